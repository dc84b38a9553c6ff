use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular lon/lat elevation grid. Node `(row, col)` sits at
/// `(origin_lon + col * cell_size_deg, origin_lat + row * cell_size_deg)`;
/// row 0 is the southern edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainGrid {
    origin_lon: f64,
    origin_lat: f64,
    cell_size_deg: f64,
    rows: usize,
    cols: usize,
    elevations: Vec<f64>,
}

impl TerrainGrid {
    pub fn new(
        origin_lon: f64,
        origin_lat: f64,
        cell_size_deg: f64,
        rows: usize,
        cols: usize,
        elevations: Vec<f64>,
    ) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidInput(format!(
                "terrain grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if !(cell_size_deg > 0.0 && cell_size_deg.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "terrain cell size must be positive, got {cell_size_deg}"
            )));
        }
        if elevations.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: elevations.len(),
            });
        }
        if let Some(bad) = elevations.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite elevation {bad}")));
        }
        let grid = Self {
            origin_lon,
            origin_lat,
            cell_size_deg,
            rows,
            cols,
            elevations,
        };
        let (lon_min, lat_min, lon_max, lat_max) = grid.extent();
        if lon_min < -180.0 || lon_max > 180.0 || lat_min < -90.0 || lat_max > 90.0 {
            return Err(Error::InvalidInput("terrain extent exceeds lon/lat bounds".into()));
        }
        Ok(grid)
    }

    /// Flat grid at a constant elevation.
    pub fn flat(
        origin_lon: f64,
        origin_lat: f64,
        cell_size_deg: f64,
        rows: usize,
        cols: usize,
        elevation_m: f64,
    ) -> Result<Self> {
        Self::new(
            origin_lon,
            origin_lat,
            cell_size_deg,
            rows,
            cols,
            vec![elevation_m; rows * cols],
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_deg
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_lon, self.origin_lat)
    }

    /// Row-major elevations, southern row first.
    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    pub fn node(&self, row: usize, col: usize) -> f64 {
        self.elevations[row * self.cols + col]
    }

    /// `(lon_min, lat_min, lon_max, lat_max)` spanned by the grid nodes.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_lon,
            self.origin_lat,
            self.origin_lon + (self.cols - 1) as f64 * self.cell_size_deg,
            self.origin_lat + (self.rows - 1) as f64 * self.cell_size_deg,
        )
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let (lon_min, lat_min, lon_max, lat_max) = self.extent();
        // small slack for points produced by round-tripping through the local projection
        let eps = 1e-9 * self.cell_size_deg;
        lon >= lon_min - eps && lon <= lon_max + eps && lat >= lat_min - eps && lat <= lat_max + eps
    }

    /// Bilinear interpolation between the four surrounding nodes.
    pub fn altitude(&self, lon: f64, lat: f64) -> Result<f64> {
        if !self.contains(lon, lat) {
            return Err(Error::OutsideExtent { lon, lat });
        }
        let fx = ((lon - self.origin_lon) / self.cell_size_deg).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((lat - self.origin_lat) / self.cell_size_deg).clamp(0.0, (self.rows - 1) as f64);
        let c0 = (fx.floor() as usize).min(self.cols - 2);
        let r0 = (fy.floor() as usize).min(self.rows - 2);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let z00 = self.node(r0, c0);
        let z01 = self.node(r0, c0 + 1);
        let z10 = self.node(r0 + 1, c0);
        let z11 = self.node(r0 + 1, c0 + 1);
        Ok(z00 * (1.0 - tx) * (1.0 - ty) + z01 * tx * (1.0 - ty) + z10 * (1.0 - tx) * ty + z11 * tx * ty)
    }
}
