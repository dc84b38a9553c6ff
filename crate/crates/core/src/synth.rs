//! Seeded synthetic city and measurement generator with a known path-loss
//! oracle, used to exercise the pipeline end to end.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{
    assemble_features, temporal_of, FeatureOptions, FREQUENCY_RANGE_MHZ, TX_HEIGHT_RANGE_M, TX_POWER_RANGE_DBM,
};
use crate::geo_scene::{Building, GeoPoint, Scene, TerrainGrid};
use crate::io;
use crate::propagation::{PathLossModel, RadioEstimate, DEFAULT_N_RB};
use crate::record::{MeasurementRecord, Transmitter};

/// RSRQ of an unloaded cell, `10 log10(1/12)`.
pub const RSRQ_UNLOADED_DB: f64 = -10.791812460476248;
pub const RSRQ_CLAMP_DB: (f64, f64) = (-19.5, -3.0);
pub const OUTDOOR_UE_ALTITUDE_M: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub center_lon: f64,
    pub center_lat: f64,
    /// City lots along x (east) and y (north).
    pub lots_x: usize,
    pub lots_y: usize,
    pub lot_size_m: f64,
    /// Probability that a lot holds a building.
    pub building_density: f64,
    pub building_side_m: (f64, f64),
    pub building_height_m: (f64, f64),
    pub terrain_cell_deg: f64,
    pub terrain_base_m: f64,
    /// Northward terrain rise, m per km; 0 for flat ground.
    pub terrain_slope_m_per_km: f64,
    pub transmitters: usize,
    pub tx_height_m: (f64, f64),
    pub tx_power_dbm: (f64, f64),
    pub frequencies_mhz: Vec<f64>,
    pub samples: usize,
    pub indoor_fraction: f64,
    pub shadowing_sigma_db: f64,
    pub oracle: PathLossModel,
    pub n_rb: u32,
    /// Peak-hour RSRQ degradation from cell load, dB.
    pub rsrq_load_amplitude_db: f64,
    pub rsrq_noise_db: f64,
    /// Reporting resolution of RSRQ; 0 disables quantization.
    pub rsrq_step_db: f64,
    pub start: DateTime<Utc>,
    pub days: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            center_lon: -79.3927,
            center_lat: 43.6459,
            lots_x: 30,
            lots_y: 30,
            lot_size_m: 80.0,
            building_density: 0.5,
            building_side_m: (15.0, 60.0),
            building_height_m: (6.0, 45.0),
            terrain_cell_deg: 0.0005,
            terrain_base_m: 76.0,
            terrain_slope_m_per_km: 5.0,
            transmitters: 8,
            tx_height_m: (25.0, 60.0),
            tx_power_dbm: (40.0, 46.0),
            frequencies_mhz: vec![700.0, 850.0, 1900.0, 2100.0, 2600.0],
            samples: 20_000,
            indoor_fraction: 0.4,
            shadowing_sigma_db: 6.0,
            oracle: PathLossModel::clutter(3.5, 0.5, 12.0),
            n_rb: DEFAULT_N_RB,
            rsrq_load_amplitude_db: 3.0,
            rsrq_noise_db: 1.0,
            rsrq_step_db: 0.5,
            start: Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap(),
            days: 28,
        }
    }
}

fn in_range(name: &str, (lo, hi): (f64, f64), bounds: (f64, f64)) -> Result<()> {
    if lo <= hi && lo >= bounds.0 && hi <= bounds.1 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} range ({lo}, {hi}) outside [{}, {}]", bounds.0, bounds.1)))
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lots_x == 0 || self.lots_y == 0 || !(self.lot_size_m > 0.0) {
            return Err(Error::Config("city has zero area".into()));
        }
        if !(0.0..=1.0).contains(&self.building_density) {
            return Err(Error::Config("building_density must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.indoor_fraction) {
            return Err(Error::Config("indoor_fraction must lie in [0, 1]".into()));
        }
        let (s0, s1) = self.building_side_m;
        if !(s0 > 0.0 && s0 <= s1 && s1 < self.lot_size_m) {
            return Err(Error::Config("building sides must be positive and fit within a lot".into()));
        }
        let (h0, h1) = self.building_height_m;
        if !(h0 > 2.0 && h0 <= h1) {
            return Err(Error::Config("building heights must exceed 2 m".into()));
        }
        in_range("tx_height_m", self.tx_height_m, TX_HEIGHT_RANGE_M)?;
        in_range("tx_power_dbm", self.tx_power_dbm, TX_POWER_RANGE_DBM)?;
        if self.frequencies_mhz.is_empty() {
            return Err(Error::Config("need at least one frequency".into()));
        }
        for &f in &self.frequencies_mhz {
            in_range("frequency", (f, f), FREQUENCY_RANGE_MHZ)?;
        }
        if self.transmitters == 0 {
            return Err(Error::Config("need at least one transmitter".into()));
        }
        if !(self.shadowing_sigma_db >= 0.0 && self.rsrq_noise_db >= 0.0 && self.rsrq_step_db >= 0.0) {
            return Err(Error::Config("noise levels must be >= 0".into()));
        }
        if !(self.terrain_cell_deg > 0.0) || self.days == 0 || self.n_rb == 0 {
            return Err(Error::Config("terrain cell, days and n_rb must be positive".into()));
        }
        if matches!(self.oracle, PathLossModel::External { .. }) {
            return Err(Error::Config("the oracle must be a built-in path-loss model".into()));
        }
        Ok(())
    }

    fn half_extent_m(&self) -> (f64, f64) {
        (
            0.5 * self.lots_x as f64 * self.lot_size_m,
            0.5 * self.lots_y as f64 * self.lot_size_m,
        )
    }
}

/// Relative cell load by local hour and weekday (0 = Monday): busy (1) during
/// the day, idle (0) at night, with the busy period starting later on weekends.
pub fn load_profile(hour: u8, day_of_week: u8) -> f64 {
    let weekend = day_of_week >= 5;
    let busy = if weekend { (11..=22).contains(&hour) } else { (8..=19).contains(&hour) };
    if busy {
        1.0
    } else {
        0.0
    }
}

/// RSRQ before noise: the unloaded value minus the load penalty.
pub fn rsrq_mean_db(hour: u8, day_of_week: u8, amplitude_db: f64) -> f64 {
    RSRQ_UNLOADED_DB - amplitude_db * load_profile(hour, day_of_week)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn city_terrain(config: &SynthConfig) -> Result<TerrainGrid> {
    let (hx, hy) = config.half_extent_m();
    let margin = 200.0;
    let m_per_deg_lat = 111_194.93;
    let m_per_deg_lon = m_per_deg_lat * config.center_lat.to_radians().cos();
    let cs = config.terrain_cell_deg;
    let cols = (2.0 * (hx + margin) / m_per_deg_lon / cs).ceil() as usize + 1;
    let rows = (2.0 * (hy + margin) / m_per_deg_lat / cs).ceil() as usize + 1;
    let lon0 = config.center_lon - 0.5 * (cols - 1) as f64 * cs;
    let lat0 = config.center_lat - 0.5 * (rows - 1) as f64 * cs;
    let mut elev = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let north_km = (r as f64 * cs - 0.5 * (rows - 1) as f64 * cs) * m_per_deg_lat / 1000.0;
        for _ in 0..cols {
            elev.push(config.terrain_base_m + config.terrain_slope_m_per_km * north_km);
        }
    }
    TerrainGrid::new(lon0, lat0, cs, rows, cols, elev)
}

pub fn generate_scene(config: &SynthConfig) -> Result<Scene> {
    config.validate()?;
    let terrain = city_terrain(config)?;
    let proj = Scene::projection_for(&terrain);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (hx, hy) = config.half_extent_m();
    let lot = config.lot_size_m;
    let mut buildings = Vec::new();
    for j in 0..config.lots_y {
        for i in 0..config.lots_x {
            // draw every lot's values so one lot's outcome never shifts another's
            let occupied = rng.random_bool(config.building_density);
            let w = uniform(&mut rng, config.building_side_m);
            let d = uniform(&mut rng, config.building_side_m);
            let h = uniform(&mut rng, config.building_height_m);
            let fx: f64 = rng.random();
            let fy: f64 = rng.random();
            if !occupied {
                continue;
            }
            let x0 = -hx + i as f64 * lot + fx * (lot - w);
            let y0 = -hy + j as f64 * lot + fy * (lot - d);
            let (clon, clat) = proj.to_geo([x0 + 0.5 * w, y0 + 0.5 * d]);
            let base = terrain.altitude(clon, clat)?;
            buildings.push(Building::rect(buildings.len() as u64 + 1, [x0, y0], [x0 + w, y0 + d], base, h)?);
        }
    }
    Scene::new(terrain, buildings)
}

/// Digest of a scene's buildings and terrain.
pub fn scene_digest(scene: &Scene) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(scene.buildings()).expect("buildings serialize"));
    h.update(serde_json::to_vec(scene.terrain()).expect("terrain serializes"));
    hex::encode(h.finalize())
}

fn place_transmitters(scene: &Scene, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Transmitter>> {
    let (hx, hy) = config.half_extent_m();
    let proj = scene.projection();
    let mut out = Vec::with_capacity(config.transmitters);
    for k in 0..config.transmitters {
        let x = uniform(rng, (-hx, hx));
        let y = uniform(rng, (-hy, hy));
        let mut height = uniform(rng, config.tx_height_m);
        let power = uniform(rng, config.tx_power_dbm);
        let freq = config.frequencies_mhz[rng.random_range(0..config.frequencies_mhz.len())];
        let mast = uniform(rng, (3.0, 10.0));
        let (lon, lat) = proj.to_geo([x, y]);
        let ground = scene.terrain_altitude(lon, lat)?;
        // antennas inside a footprint are mounted on the roof
        for b in scene.buildings() {
            if b.contains([x, y, b.base_elev_m]) && ground + height <= b.top_m() + 1.0 {
                height = (b.top_m() - ground + mast).min(TX_HEIGHT_RANGE_M.1);
            }
        }
        out.push(Transmitter {
            id: format!("tx{:03}", k + 1),
            lon,
            lat,
            height_m: height,
            power_dbm: power,
            frequency_mhz: freq,
        });
    }
    Ok(out)
}

fn sample_ue(scene: &Scene, config: &SynthConfig, rng: &mut ChaCha8Rng, indoor: bool) -> Result<Option<GeoPoint>> {
    let proj = scene.projection();
    if indoor {
        let b = &scene.buildings()[rng.random_range(0..scene.buildings().len())];
        let xs = b.footprint.iter().map(|p| p[0]);
        let ys = b.footprint.iter().map(|p| p[1]);
        let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
        let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
        let x = uniform(rng, (x0 + 0.5, x1 - 0.5));
        let y = uniform(rng, (y0 + 0.5, y1 - 0.5));
        let z = b.base_elev_m + uniform(rng, (1.0, b.height_m - 1.0));
        let (lon, lat) = proj.to_geo([x, y]);
        let alt = z - scene.terrain_altitude(lon, lat)?;
        if alt < 0.0 {
            return Ok(None);
        }
        Ok(Some(GeoPoint::new(lon, lat, alt)?))
    } else {
        let (hx, hy) = config.half_extent_m();
        let x = uniform(rng, (-hx, hx));
        let y = uniform(rng, (-hy, hy));
        let (lon, lat) = proj.to_geo([x, y]);
        let p = GeoPoint::new(lon, lat, OUTDOOR_UE_ALTITUDE_M)?;
        Ok(if scene.is_indoor(&p)?.is_some() { None } else { Some(p) })
    }
}

fn nearest<'a>(scene: &Scene, txs: &'a [Transmitter], ue: &GeoPoint) -> &'a Transmitter {
    let proj = scene.projection();
    let u = proj.to_local(ue.lon, ue.lat);
    txs.iter()
        .min_by(|a, b| {
            let pa = proj.to_local(a.lon, a.lat);
            let pb = proj.to_local(b.lon, b.lat);
            let da = (pa[0] - u[0]).powi(2) + (pa[1] - u[1]).powi(2);
            let db = (pb[0] - u[0]).powi(2) + (pb[1] - u[1]).powi(2);
            da.total_cmp(&db)
        })
        .expect("at least one transmitter")
}

fn quantize(v: f64, step: f64) -> f64 {
    if step > 0.0 {
        (v / step).round() * step
    } else {
        v
    }
}

/// Samples UEs, serves each from the nearest transmitter and draws RSRP and
/// RSRQ from the oracle. Samples whose features fall outside the supported
/// ranges are redrawn.
pub fn generate_measurements(scene: &Scene, config: &SynthConfig) -> Result<Vec<MeasurementRecord>> {
    config.validate()?;
    // independent stream from the scene's
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let txs = place_transmitters(scene, config, &mut rng)?;
    let indoor_possible = !scene.buildings().is_empty();
    let options = FeatureOptions::default();
    let span_s = i64::from(config.days) * 86_400;

    let mut out = Vec::with_capacity(config.samples);
    let mut attempts = 0usize;
    while out.len() < config.samples {
        attempts += 1;
        if attempts > 100 * config.samples.max(10) {
            return Err(Error::InvalidInput(format!(
                "could only place {} of {} samples",
                out.len(),
                config.samples
            )));
        }
        let indoor = indoor_possible && rng.random_bool(config.indoor_fraction);
        let Some(ue) = sample_ue(scene, config, &mut rng, indoor)? else {
            continue;
        };
        let tx = nearest(scene, &txs, &ue).clone();
        let timestamp = config.start + Duration::seconds(rng.random_range(0..span_s));
        let shadow: f64 = StandardNormal.sample(&mut rng);
        let q_noise: f64 = StandardNormal.sample(&mut rng);

        let mut rec = MeasurementRecord {
            record_id: out.len() as u64 + 1,
            timestamp,
            ue,
            tx,
            rsrp_dbm: 0.0,
            rsrq_db: None,
        };
        let Ok(f) = assemble_features(&rec, scene, &options) else {
            continue;
        };
        let alpha = config.oracle.estimate(&f.path_loss, None)?;
        let beta = RadioEstimate::new(rec.tx.power_dbm, alpha, config.n_rb)?.beta_dbm();
        rec.rsrp_dbm = beta + config.shadowing_sigma_db * shadow;

        let t = temporal_of(&rec, 0)?;
        let q = rsrq_mean_db(t.hour_of_day, t.day_of_week, config.rsrq_load_amplitude_db)
            + config.rsrq_noise_db * q_noise;
        rec.rsrq_db = Some(quantize(q, config.rsrq_step_db).clamp(RSRQ_CLAMP_DB.0, RSRQ_CLAMP_DB.1));
        out.push(rec);
    }
    Ok(out)
}

/// Writes the measurement CSV, building GeoJSON and terrain grid into `dir`.
pub fn emit_dataset(dir: &Path, scene: &Scene, records: &[MeasurementRecord]) -> Result<()> {
    io::save_scene(dir, scene)?;
    io::write_measurements(&dir.join(io::MEASUREMENTS_FILE), records)
}
