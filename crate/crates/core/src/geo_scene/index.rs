//! Uniform-grid index over building bounding boxes.

use super::polygon::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn of(points: &[Vec2]) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            min[0] = min[0].min(p[0]);
            min[1] = min[1].min(p[1]);
            max[0] = max[0].max(p[0]);
            max[1] = max[1].max(p[1]);
        }
        Self { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GridIndex {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl GridIndex {
    pub fn build(boxes: &[Aabb]) -> Self {
        if boxes.is_empty() {
            return Self {
                origin: [0.0, 0.0],
                cell: 1.0,
                nx: 0,
                ny: 0,
                cells: Vec::new(),
            };
        }
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        let mut mean_extent = 0.0;
        for b in boxes {
            min[0] = min[0].min(b.min[0]);
            min[1] = min[1].min(b.min[1]);
            max[0] = max[0].max(b.max[0]);
            max[1] = max[1].max(b.max[1]);
            mean_extent += (b.max[0] - b.min[0]).max(b.max[1] - b.min[1]);
        }
        mean_extent /= boxes.len() as f64;
        let span = (max[0] - min[0]).max(max[1] - min[1]).max(1.0);
        // about two buildings per cell side, capped at 512 cells per axis
        let cell = (2.0 * mean_extent).max(span / 512.0).max(1.0);
        let nx = ((max[0] - min[0]) / cell).floor() as usize + 1;
        let ny = ((max[1] - min[1]) / cell).floor() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        let mut index = Self {
            origin: min,
            cell,
            nx,
            ny,
            cells: Vec::new(),
        };
        for (i, b) in boxes.iter().enumerate() {
            let (c0, r0) = index.cell_of(b.min);
            let (c1, r1) = index.cell_of(b.max);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    cells[r * nx + c].push(i as u32);
                }
            }
        }
        index.cells = cells;
        index
    }

    fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let c = ((p[0] - self.origin[0]) / self.cell).floor();
        let r = ((p[1] - self.origin[1]) / self.cell).floor();
        (
            c.clamp(0.0, (self.nx - 1) as f64) as usize,
            r.clamp(0.0, (self.ny - 1) as f64) as usize,
        )
    }

    /// Candidate items within the point's cell.
    pub fn point_candidates(&self, p: Vec2) -> Vec<usize> {
        if self.nx == 0 {
            return Vec::new();
        }
        let x_ok = p[0] >= self.origin[0] && p[0] <= self.origin[0] + self.nx as f64 * self.cell;
        let y_ok = p[1] >= self.origin[1] && p[1] <= self.origin[1] + self.ny as f64 * self.cell;
        if !(x_ok && y_ok) {
            return Vec::new();
        }
        let (c, r) = self.cell_of(p);
        self.cells[r * self.nx + c].iter().map(|&i| i as usize).collect()
    }

    /// Superset of items whose boxes come within `margin` of the 2D segment `a`–`b`.
    ///
    /// Walks the grid column by column, covering only the rows the
    /// margin-widened segment crosses inside each column strip.
    pub fn segment_candidates(&self, a: Vec2, b: Vec2, margin: f64) -> Vec<usize> {
        if self.nx == 0 {
            return Vec::new();
        }
        let x_lo = a[0].min(b[0]) - margin;
        let x_hi = a[0].max(b[0]) + margin;
        let (c0, _) = self.cell_of([x_lo, self.origin[1]]);
        let (c1, _) = self.cell_of([x_hi, self.origin[1]]);
        if x_hi < self.origin[0] || x_lo > self.origin[0] + self.nx as f64 * self.cell {
            return Vec::new();
        }

        let dx = b[0] - a[0];
        let mut out = Vec::new();
        for c in c0..=c1 {
            let strip_lo = (self.origin[0] + c as f64 * self.cell - margin).max(x_lo);
            let strip_hi = (self.origin[0] + (c + 1) as f64 * self.cell + margin).min(x_hi);
            let (y_lo, y_hi) = if dx.abs() < 1e-12 {
                (a[1].min(b[1]), a[1].max(b[1]))
            } else {
                let t0 = ((strip_lo - a[0]) / dx).clamp(0.0, 1.0);
                let t1 = ((strip_hi - a[0]) / dx).clamp(0.0, 1.0);
                let y0 = a[1] + t0 * (b[1] - a[1]);
                let y1 = a[1] + t1 * (b[1] - a[1]);
                (y0.min(y1), y0.max(y1))
            };
            let (y_lo, y_hi) = (y_lo - margin, y_hi + margin);
            if y_hi < self.origin[1] || y_lo > self.origin[1] + self.ny as f64 * self.cell {
                continue;
            }
            let (_, r0) = self.cell_of([self.origin[0], y_lo]);
            let (_, r1) = self.cell_of([self.origin[0], y_hi]);
            for r in r0..=r1 {
                out.extend(self.cells[r * self.nx + c].iter().map(|&i| i as usize));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_box_on_diagonal() {
        let boxes: Vec<Aabb> = (0..10)
            .flat_map(|i| {
                (0..10).map(move |j| Aabb {
                    min: [i as f64 * 30.0, j as f64 * 30.0],
                    max: [i as f64 * 30.0 + 10.0, j as f64 * 30.0 + 10.0],
                })
            })
            .collect();
        let idx = GridIndex::build(&boxes);
        let c = idx.segment_candidates([0.0, 0.0], [300.0, 300.0], 0.0);
        // every diagonal box (i == j) is a candidate
        for i in 0..10 {
            assert!(c.contains(&(i * 10 + i)));
        }
        assert!(c.len() < boxes.len());
    }
}
