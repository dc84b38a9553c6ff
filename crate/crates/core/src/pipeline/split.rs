//! Geographic train/validation/blind-test splitting.
//!
//! Records are assigned whole geohash6 cells at a time, so no cell can feed
//! more than one split. Blind-test cells are named explicitly; the remaining
//! cells are divided by a boundary rule.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geohash;
use crate::record::MeasurementRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// How non-holdout cells are divided between train and validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// Cells whose centers fall on `train_side` of the directed lon/lat
    /// polyline go to train, the rest to validation.
    Polyline {
        vertices: Vec<[f64; 2]>,
        train_side: Side,
    },
    /// Cells sorted west to east; the western cells holding `train_fraction`
    /// of the records go to train.
    LongitudeQuantile { train_fraction: f64 },
}

impl Default for Boundary {
    fn default() -> Self {
        Boundary::LongitudeQuantile { train_fraction: 0.674 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitRule {
    /// Blind-test geohash codes (precision <= 6; shorter codes cover all
    /// cells they prefix).
    #[serde(default)]
    pub holdout: Vec<String>,
    #[serde(default)]
    pub boundary: Boundary,
}

impl SplitRule {
    pub fn describe(&self) -> String {
        let b = match &self.boundary {
            Boundary::Polyline { vertices, train_side } => format!(
                "polyline({} vertices, train={})",
                vertices.len(),
                match train_side {
                    Side::Left => "left",
                    Side::Right => "right",
                }
            ),
            Boundary::LongitudeQuantile { train_fraction } => {
                format!("longitude_quantile({train_fraction})")
            }
        };
        format!("holdout[{}]; {}", self.holdout.join(","), b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub rule: String,
    pub train_ids: Vec<u64>,
    pub validation_ids: Vec<u64>,
    pub test_ids: Vec<u64>,
    pub train_cells: Vec<String>,
    pub validation_cells: Vec<String>,
    pub test_cells: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl SplitManifest {
    /// Rejects manifests whose splits share record ids or cells with the blind test.
    pub fn validate(&self) -> Result<()> {
        let test: BTreeSet<&String> = self.test_cells.iter().collect();
        let mut shared: Vec<String> = self
            .train_cells
            .iter()
            .chain(&self.validation_cells)
            .filter(|c| test.contains(c))
            .cloned()
            .collect();
        let train: BTreeSet<&String> = self.train_cells.iter().collect();
        shared.extend(self.validation_cells.iter().filter(|c| train.contains(c)).cloned());
        if !shared.is_empty() {
            shared.sort();
            shared.dedup();
            return Err(Error::Leak(shared));
        }
        let mut seen = BTreeSet::new();
        for id in self.train_ids.iter().chain(&self.validation_ids).chain(&self.test_ids) {
            if !seen.insert(*id) {
                return Err(Error::InvalidInput(format!("record {id} appears in more than one split")));
            }
        }
        Ok(())
    }

    /// Digest of the whole manifest.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }

    /// Provenance tag for statistics fitted on the train split.
    pub fn train_digest(&self) -> String {
        let ids: Vec<String> = self.train_ids.iter().map(u64::to_string).collect();
        format!("train:{}", sha256_hex(ids.join(",").as_bytes()))
    }
}

fn side_of(polyline: &[[f64; 2]], p: [f64; 2]) -> Side {
    // side relative to the nearest polyline segment
    let mut best = (f64::INFINITY, 0.0);
    for w in polyline.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
        };
        let q = [a[0] + t * d[0], a[1] + t * d[1]];
        let dist2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        let cross = d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0]);
        if dist2 < best.0 {
            best = (dist2, cross);
        }
    }
    if best.1 > 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

fn validate_rule(rule: &SplitRule) -> Result<()> {
    for code in &rule.holdout {
        if code.len() > geohash::SPLIT_PRECISION {
            return Err(Error::Config(format!(
                "holdout code {code:?} is finer than geohash{}",
                geohash::SPLIT_PRECISION
            )));
        }
        geohash::decode(code)?;
    }
    match &rule.boundary {
        Boundary::Polyline { vertices, .. } if vertices.len() < 2 => {
            Err(Error::Config("boundary polyline needs >= 2 vertices".into()))
        }
        Boundary::LongitudeQuantile { train_fraction } if !(0.0..=1.0).contains(train_fraction) => {
            Err(Error::Config(format!("train_fraction {train_fraction} outside [0, 1]")))
        }
        _ => Ok(()),
    }
}

pub fn split_records(records: &[MeasurementRecord], rule: &SplitRule) -> Result<SplitManifest> {
    validate_rule(rule)?;

    // cell -> record ids, ordered by code for determinism
    let mut cells: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for r in records {
        cells.entry(r.cell()?).or_default().push(r.record_id);
    }

    let mut test_cells = Vec::new();
    let mut rest: Vec<(String, Vec<u64>)> = Vec::new();
    for (cell, ids) in cells {
        if rule.holdout.iter().any(|h| cell.starts_with(h.as_str())) {
            test_cells.push((cell, ids));
        } else {
            rest.push((cell, ids));
        }
    }

    let mut train_cells = Vec::new();
    let mut validation_cells = Vec::new();
    match &rule.boundary {
        Boundary::Polyline { vertices, train_side } => {
            for (cell, ids) in rest {
                let (lat, lon) = geohash::decode(&cell)?.center();
                if side_of(vertices, [lon, lat]) == *train_side {
                    train_cells.push((cell, ids));
                } else {
                    validation_cells.push((cell, ids));
                }
            }
        }
        Boundary::LongitudeQuantile { train_fraction } => {
            let mut keyed: Vec<(f64, String, Vec<u64>)> = rest
                .into_iter()
                .map(|(c, ids)| {
                    let lon = geohash::decode(&c).map(|g| g.center().1);
                    lon.map(|lon| (lon, c, ids))
                })
                .collect::<Result<_>>()?;
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let total: usize = keyed.iter().map(|k| k.2.len()).sum();
            let quota = train_fraction * total as f64;
            let n_cells = keyed.len();
            let mut taken = 0usize;
            for (i, (_, cell, ids)) in keyed.into_iter().enumerate() {
                let remaining = n_cells - i;
                let must_leave_one = *train_fraction < 1.0 && remaining == 1 && !train_cells.is_empty();
                let want = (taken as f64) < quota || (train_cells.is_empty() && *train_fraction > 0.0);
                if want && !must_leave_one {
                    taken += ids.len();
                    train_cells.push((cell, ids));
                } else {
                    validation_cells.push((cell, ids));
                }
            }
        }
    }

    let flatten = |cells: &[(String, Vec<u64>)]| -> (Vec<u64>, Vec<String>) {
        let mut ids: Vec<u64> = cells.iter().flat_map(|c| c.1.iter().copied()).collect();
        ids.sort_unstable();
        (ids, cells.iter().map(|c| c.0.clone()).collect())
    };
    let (train_ids, train_codes) = flatten(&train_cells);
    let (validation_ids, validation_codes) = flatten(&validation_cells);
    let (test_ids, test_codes) = flatten(&test_cells);

    let manifest = SplitManifest {
        rule: rule.describe(),
        train_ids,
        validation_ids,
        test_ids,
        train_cells: train_codes,
        validation_cells: validation_codes,
        test_cells: test_codes,
    };
    manifest.validate()?;
    Ok(manifest)
}
