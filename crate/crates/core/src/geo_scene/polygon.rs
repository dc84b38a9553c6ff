//! Planar polygon helpers for building footprints (local metric frame).

pub type Vec2 = [f64; 2];

pub(crate) fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc
}

pub(crate) fn centroid(poly: &[Vec2]) -> Vec2 {
    let a = signed_area(poly);
    let n = poly.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        let cross = x0 * y1 - x1 * y0;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test (touching counts).
pub(crate) fn segments_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d1 = cross(b0, b1, a0);
    let d2 = cross(b0, b1, a1);
    let d3 = cross(a0, a1, b0);
    let d4 = cross(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a0, b0, b1))
        || (d2 == 0.0 && on_segment(a1, b0, b1))
        || (d3 == 0.0 && on_segment(b0, a0, a1))
        || (d4 == 0.0 && on_segment(b1, a0, a1))
}

/// True when no two non-adjacent edges touch.
pub(crate) fn is_simple(poly: &[Vec2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let (a0, a1) = (poly[i], poly[(i + 1) % n]);
        if a0 == a1 {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(a0, a1, poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Crossing-number point-in-polygon.
pub(crate) fn contains(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > p[1]) != (yj > p[1]) {
            let x_cross = xj + (p[1] - yj) * (xi - xj) / (yi - yj);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt()
}

pub(crate) fn segment_segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

/// Distance from a segment to the polygon boundary.
pub(crate) fn segment_boundary_distance(poly: &[Vec2], a: Vec2, b: Vec2) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| segment_segment_distance(a, b, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Parameter ranges `t ∈ [0, 1]` over which `a + t (b - a)` lies inside the polygon.
pub(crate) fn segment_inside_ranges(poly: &[Vec2], a: Vec2, b: Vec2) -> Vec<(f64, f64)> {
    let d = [b[0] - a[0], b[1] - a[1]];
    if d[0] == 0.0 && d[1] == 0.0 {
        return if contains(poly, a) {
            vec![(0.0, 1.0)]
        } else {
            Vec::new()
        };
    }

    let n = poly.len();
    let mut ts = vec![0.0, 1.0];
    for i in 0..n {
        let q0 = poly[i];
        let q1 = poly[(i + 1) % n];
        let e = [q1[0] - q0[0], q1[1] - q0[1]];
        let denom = d[0] * e[1] - d[1] * e[0];
        if denom == 0.0 {
            continue;
        }
        let w = [q0[0] - a[0], q0[1] - a[1]];
        let t = (w[0] * e[1] - w[1] * e[0]) / denom;
        let u = (w[0] * d[1] - w[1] * d[0]) / denom;
        if (0.0..=1.0).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
            ts.push(t);
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 <= 1e-15 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        if contains(poly, [a[0] + tm * d[0], a[1] + tm * d[1]]) {
            match out.last_mut() {
                Some(last) if (t0 - last.1).abs() <= 1e-12 => last.1 = t1,
                _ => out.push((t0, t1)),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, s: f64) -> Vec<Vec2> {
        vec![[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s]]
    }

    #[test]
    fn area_and_centroid() {
        let sq = square(0.0, 0.0, 2.0);
        assert_eq!(signed_area(&sq), 4.0);
        assert_eq!(centroid(&sq), [1.0, 1.0]);
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!is_simple(&bowtie));
        assert!(is_simple(&square(0.0, 0.0, 1.0)));
    }

    #[test]
    fn crossing_ranges_through_square() {
        let sq = square(0.0, 0.0, 10.0);
        let r = segment_inside_ranges(&sq, [-10.0, 5.0], [20.0, 5.0]);
        assert_eq!(r.len(), 1);
        assert!((r[0].0 - 10.0 / 30.0).abs() < 1e-12);
        assert!((r[0].1 - 20.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn concave_footprint_gives_two_ranges() {
        // U shape opening upward; a horizontal line through the arms crosses twice.
        let u = vec![
            [0.0, 0.0],
            [30.0, 0.0],
            [30.0, 30.0],
            [20.0, 30.0],
            [20.0, 10.0],
            [10.0, 10.0],
            [10.0, 30.0],
            [0.0, 30.0],
        ];
        let r = segment_inside_ranges(&u, [-5.0, 20.0], [35.0, 20.0]);
        assert_eq!(r.len(), 2);
        let len: f64 = r.iter().map(|(a, b)| (b - a) * 40.0).sum();
        assert!((len - 20.0).abs() < 1e-9);
    }

    #[test]
    fn clearance_beside_face() {
        let sq = square(0.0, 0.0, 10.0);
        let d = segment_boundary_distance(&sq, [-5.0, 10.5], [15.0, 10.5]);
        assert!((d - 0.5).abs() < 1e-12);
    }
}
