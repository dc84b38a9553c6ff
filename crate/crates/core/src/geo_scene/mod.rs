//! 3D urban scene: building prisms over a terrain grid, and the direct-path
//! ray queries that produce the geometric link features.
//!
//! Buildings are vertical prisms with flat roofs. Footprints live in a local
//! equirectangular frame centered on the terrain extent; all ray geometry is
//! done in that frame with absolute heights on the z axis.

mod index;
pub(crate) mod polygon;
mod terrain;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use index::{Aabb, GridIndex};
pub use polygon::Vec2;
pub use terrain::TerrainGrid;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Lateral clearance below which an unobstructed link is only tentatively LOS.
pub const TENTATIVE_CLEARANCE_M: f64 = 1.0;

/// Spacing of terrain clearance samples along the ray.
pub const TERRAIN_SAMPLE_STEP_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
    /// Height above local ground.
    pub alt_ag_m: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64, alt_ag_m: f64) -> Result<Self> {
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidInput(format!("coordinates ({lon}, {lat}) invalid")));
        }
        if !(alt_ag_m >= 0.0) || !alt_ag_m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "altitude above ground must be >= 0, got {alt_ag_m}"
            )));
        }
        Ok(Self { lon, lat, alt_ag_m })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: u64,
    /// Local-metric footprint vertices, open ring (first vertex not repeated).
    pub footprint: Vec<Vec2>,
    /// Absolute elevation of the ground floor.
    pub base_elev_m: f64,
    pub height_m: f64,
}

impl Building {
    pub fn new(id: u64, mut footprint: Vec<Vec2>, base_elev_m: f64, height_m: f64) -> Result<Self> {
        if footprint.len() > 1 && footprint.first() == footprint.last() {
            footprint.pop();
        }
        if footprint.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "building {id}: footprint needs >= 3 vertices"
            )));
        }
        if footprint.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("building {id}: non-finite vertex")));
        }
        if polygon::signed_area(&footprint).abs() < 1e-9 {
            return Err(Error::InvalidInput(format!("building {id}: zero-area footprint")));
        }
        if !polygon::is_simple(&footprint) {
            return Err(Error::InvalidInput(format!(
                "building {id}: footprint self-intersects"
            )));
        }
        if !(height_m > 0.0) || !height_m.is_finite() || !base_elev_m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "building {id}: height must be > 0, got {height_m}"
            )));
        }
        Ok(Self {
            id,
            footprint,
            base_elev_m,
            height_m,
        })
    }

    /// Axis-aligned rectangular building.
    pub fn rect(id: u64, min: Vec2, max: Vec2, base_elev_m: f64, height_m: f64) -> Result<Self> {
        Self::new(
            id,
            vec![min, [max[0], min[1]], max, [min[0], max[1]]],
            base_elev_m,
            height_m,
        )
    }

    pub fn top_m(&self) -> f64 {
        self.base_elev_m + self.height_m
    }

    pub fn centroid(&self) -> Vec2 {
        polygon::centroid(&self.footprint)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p[2] >= self.base_elev_m
            && p[2] <= self.top_m()
            && polygon::contains(&self.footprint, [p[0], p[1]])
    }
}

/// Equirectangular projection about `(lon0, lat0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub lon0: f64,
    pub lat0: f64,
}

impl LocalProjection {
    pub fn to_local(&self, lon: f64, lat: f64) -> Vec2 {
        let x = EARTH_RADIUS_M * self.lat0.to_radians().cos() * (lon - self.lon0).to_radians();
        let y = EARTH_RADIUS_M * (lat - self.lat0).to_radians();
        [x, y]
    }

    pub fn to_geo(&self, p: Vec2) -> (f64, f64) {
        let lon = self.lon0 + (p[0] / (EARTH_RADIUS_M * self.lat0.to_radians().cos())).to_degrees();
        let lat = self.lat0 + (p[1] / EARTH_RADIUS_M).to_degrees();
        (lon, lat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LosClass {
    Los,
    Nlos,
    LosTentative,
}

impl LosClass {
    /// Binary projection used as a feature: tentative counts as LOS.
    pub fn as_binary(self) -> u8 {
        match self {
            LosClass::Los | LosClass::LosTentative => 1,
            LosClass::Nlos => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub building_id: u64,
    pub entry_m: f64,
    pub exit_m: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.exit_m - self.entry_m
    }
}

/// In-solid intervals along the transmitter-to-UE segment, sorted by entry.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RayTraversal {
    pub length_m: f64,
    pub intervals: Vec<Interval>,
}

/// Everything the feature extractor needs about one tx–UE link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    pub traversal: RayTraversal,
    pub los: LosClass,
    pub ue_building: Option<u64>,
    pub penetration_m: f64,
    pub obstruction_m: f64,
    pub intersection_count: usize,
    pub terrain_blocked: bool,
    /// Local-frame offsets of the UE from the transmitter.
    pub dx_m: f64,
    pub dy_m: f64,
    pub distance_3d_m: f64,
}

#[derive(Debug, Clone)]
pub struct Scene {
    buildings: Vec<Building>,
    boxes: Vec<Aabb>,
    terrain: TerrainGrid,
    projection: LocalProjection,
    index: GridIndex,
}

impl Scene {
    /// Projection about the terrain extent's center; building footprints
    /// passed to [`Scene::new`] must already be in this frame.
    pub fn projection_for(terrain: &TerrainGrid) -> LocalProjection {
        let (lon_min, lat_min, lon_max, lat_max) = terrain.extent();
        LocalProjection {
            lon0: 0.5 * (lon_min + lon_max),
            lat0: 0.5 * (lat_min + lat_max),
        }
    }

    pub fn new(terrain: TerrainGrid, buildings: Vec<Building>) -> Result<Self> {
        let projection = Self::projection_for(&terrain);
        for b in &buildings {
            for &v in &b.footprint {
                let (lon, lat) = projection.to_geo(v);
                if !terrain.contains(lon, lat) {
                    return Err(Error::InvalidInput(format!(
                        "building {} extends outside the terrain extent",
                        b.id
                    )));
                }
            }
        }
        let boxes: Vec<Aabb> = buildings.iter().map(|b| Aabb::of(&b.footprint)).collect();
        let index = GridIndex::build(&boxes);
        Ok(Self {
            buildings,
            boxes,
            terrain,
            projection,
            index,
        })
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn terrain(&self) -> &TerrainGrid {
        &self.terrain
    }

    pub fn projection(&self) -> LocalProjection {
        self.projection
    }

    pub fn terrain_altitude(&self, lon: f64, lat: f64) -> Result<f64> {
        self.terrain.altitude(lon, lat)
    }

    /// Local `(x, y)` and absolute `z` of a point.
    pub fn project_local(&self, p: &GeoPoint) -> Result<[f64; 3]> {
        let ground = self.terrain.altitude(p.lon, p.lat)?;
        let [x, y] = self.projection.to_local(p.lon, p.lat);
        Ok([x, y, ground + p.alt_ag_m])
    }

    /// Containing building of a UE position, if any.
    pub fn is_indoor(&self, p: &GeoPoint) -> Result<Option<u64>> {
        let q = self.project_local(p)?;
        Ok(self.building_at(q).map(|i| self.buildings[i].id))
    }

    fn building_at(&self, q: [f64; 3]) -> Option<usize> {
        self.index
            .point_candidates([q[0], q[1]])
            .into_iter()
            .filter(|&i| self.boxes[i].contains([q[0], q[1]]))
            .find(|&i| self.buildings[i].contains(q))
    }

    pub fn trace_ray(&self, tx: &GeoPoint, ue: &GeoPoint) -> Result<RayTraversal> {
        let (a, b) = self.endpoints(tx, ue)?;
        Ok(self.traverse(a, b, true))
    }

    /// Same as [`Scene::trace_ray`] but tests every building, bypassing the index.
    pub fn trace_ray_exhaustive(&self, tx: &GeoPoint, ue: &GeoPoint) -> Result<RayTraversal> {
        let (a, b) = self.endpoints(tx, ue)?;
        Ok(self.traverse(a, b, false))
    }

    pub fn classify_los(&self, tx: &GeoPoint, ue: &GeoPoint) -> Result<LosClass> {
        Ok(self.link(tx, ue)?.los)
    }

    pub fn building_penetration_length(&self, tx: &GeoPoint, ue: &GeoPoint) -> Result<f64> {
        Ok(self.link(tx, ue)?.penetration_m)
    }

    pub fn total_obstruction_length_3d(&self, tx: &GeoPoint, ue: &GeoPoint) -> Result<f64> {
        Ok(self.link(tx, ue)?.obstruction_m)
    }

    pub fn building_intersection_count_3d(&self, tx: &GeoPoint, ue: &GeoPoint) -> Result<usize> {
        Ok(self.link(tx, ue)?.intersection_count)
    }

    fn endpoints(&self, tx: &GeoPoint, ue: &GeoPoint) -> Result<([f64; 3], [f64; 3])> {
        let a = self.project_local(tx)?;
        let b = self.project_local(ue)?;
        if a == b {
            return Err(Error::DegenerateSegment);
        }
        Ok((a, b))
    }

    /// Traces the link once and derives every geometric feature from it.
    ///
    /// The interval that ends at the UE inside its own building is reported
    /// as penetration and kept out of obstruction, count, and LOS.
    pub fn link(&self, tx: &GeoPoint, ue: &GeoPoint) -> Result<LinkGeometry> {
        let (a, b) = self.endpoints(tx, ue)?;
        let traversal = self.traverse(a, b, true);
        let ue_idx = self.building_at(b);
        let ue_building = ue_idx.map(|i| self.buildings[i].id);

        let length = traversal.length_m;
        let mut penetration_m = 0.0;
        let mut obstructing: Vec<&Interval> = Vec::with_capacity(traversal.intervals.len());
        for iv in &traversal.intervals {
            let is_own_final =
                Some(iv.building_id) == ue_building && (length - iv.exit_m).abs() <= 1e-9 * length.max(1.0);
            if is_own_final {
                penetration_m += iv.length();
            } else {
                obstructing.push(iv);
            }
        }
        let obstruction_m: f64 = obstructing.iter().map(|iv| iv.length()).sum();
        let mut ids: Vec<u64> = obstructing.iter().map(|iv| iv.building_id).collect();
        ids.sort_unstable();
        ids.dedup();

        let terrain_blocked = self.terrain_blocks(a, b);
        let los = if !obstructing.is_empty() || terrain_blocked {
            LosClass::Nlos
        } else if self.min_clearance(a, b, ue_idx) < TENTATIVE_CLEARANCE_M {
            LosClass::LosTentative
        } else {
            LosClass::Los
        };

        Ok(LinkGeometry {
            los,
            ue_building,
            penetration_m,
            obstruction_m,
            intersection_count: ids.len(),
            terrain_blocked,
            dx_m: b[0] - a[0],
            dy_m: b[1] - a[1],
            distance_3d_m: length,
            traversal,
        })
    }

    fn candidates(&self, a: [f64; 3], b: [f64; 3], margin: f64, use_index: bool) -> Vec<usize> {
        if use_index {
            self.index.segment_candidates([a[0], a[1]], [b[0], b[1]], margin)
        } else {
            (0..self.buildings.len()).collect()
        }
    }

    fn traverse(&self, a: [f64; 3], b: [f64; 3], use_index: bool) -> RayTraversal {
        let length = dist3(a, b);
        let mut intervals = Vec::new();
        for i in self.candidates(a, b, 0.0, use_index) {
            let bld = &self.buildings[i];
            for (t0, t1) in prism_ranges(bld, a, b) {
                intervals.push(Interval {
                    building_id: bld.id,
                    entry_m: t0 * length,
                    exit_m: t1 * length,
                });
            }
        }
        intervals.sort_by(|p, q| {
            p.entry_m
                .total_cmp(&q.entry_m)
                .then(p.building_id.cmp(&q.building_id))
        });
        RayTraversal {
            length_m: length,
            intervals,
        }
    }

    /// Minimum horizontal distance from the ray to any footprint over the
    /// part of the ray lying within that building's height band.
    fn min_clearance(&self, a: [f64; 3], b: [f64; 3], skip: Option<usize>) -> f64 {
        let mut best = f64::INFINITY;
        for i in self.candidates(a, b, TENTATIVE_CLEARANCE_M, true) {
            if Some(i) == skip {
                continue;
            }
            let bld = &self.buildings[i];
            let Some((t0, t1)) = height_band(bld, a, b) else {
                continue;
            };
            let p0 = [a[0] + t0 * (b[0] - a[0]), a[1] + t0 * (b[1] - a[1])];
            let p1 = [a[0] + t1 * (b[0] - a[0]), a[1] + t1 * (b[1] - a[1])];
            best = best.min(polygon::segment_boundary_distance(&bld.footprint, p0, p1));
        }
        best
    }

    fn terrain_blocks(&self, a: [f64; 3], b: [f64; 3]) -> bool {
        let length = dist3(a, b);
        let n = (length / TERRAIN_SAMPLE_STEP_M).ceil() as usize;
        (1..n).any(|i| {
            let t = i as f64 / n as f64;
            let x = a[0] + t * (b[0] - a[0]);
            let y = a[1] + t * (b[1] - a[1]);
            let z = a[2] + t * (b[2] - a[2]);
            let (lon, lat) = self.projection.to_geo([x, y]);
            match self.terrain.altitude(lon, lat) {
                Ok(ground) => z < ground - 1e-9,
                Err(_) => false,
            }
        })
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
}

/// Parameter range where the segment's height lies within the prism's vertical extent.
fn height_band(bld: &Building, a: [f64; 3], b: [f64; 3]) -> Option<(f64, f64)> {
    let dz = b[2] - a[2];
    let (lo, hi) = if dz == 0.0 {
        if a[2] >= bld.base_elev_m && a[2] <= bld.top_m() {
            (0.0, 1.0)
        } else {
            return None;
        }
    } else {
        let t_base = (bld.base_elev_m - a[2]) / dz;
        let t_top = (bld.top_m() - a[2]) / dz;
        (t_base.min(t_top).max(0.0), t_base.max(t_top).min(1.0))
    };
    (hi >= lo).then_some((lo, hi))
}

/// Parameter ranges along `a`–`b` that lie inside the building prism.
fn prism_ranges(bld: &Building, a: [f64; 3], b: [f64; 3]) -> Vec<(f64, f64)> {
    let Some((z_lo, z_hi)) = height_band(bld, a, b) else {
        return Vec::new();
    };
    polygon::segment_inside_ranges(&bld.footprint, [a[0], a[1]], [b[0], b[1]])
        .into_iter()
        .filter_map(|(t0, t1)| {
            let (lo, hi) = (t0.max(z_lo), t1.min(z_hi));
            (hi - lo > 1e-12).then_some((lo, hi))
        })
        .collect()
}
