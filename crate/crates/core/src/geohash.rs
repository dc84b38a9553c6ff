//! Base-32 geohash encoding.
//!
//! Used to label records by their ~0.6 km cell (precision 6) so that
//! train/validation/blind-test splits can be checked for geographic leaks.

use crate::error::{Error, Result};

const ALPHABET: &[u8; 32] = b"0123456789bcdefghjkmnpqrstuvwxyz";

pub const MAX_PRECISION: usize = 12;

/// Precision used for split labelling and leak checks.
pub const SPLIT_PRECISION: usize = 6;

/// Mean Earth radius used for cell dimensions, in meters.
const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GeohashCell {
    pub code: String,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GeohashCell {
    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.lat_min + self.lat_max),
            0.5 * (self.lon_min + self.lon_max),
        )
    }

    /// Half-open containment, matching the encoder's bisection rule.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let lat_ok = lat >= self.lat_min && (lat < self.lat_max || self.lat_max == 90.0);
        let lon_ok = lon >= self.lon_min && (lon < self.lon_max || self.lon_max == 180.0);
        lat_ok && lon_ok
    }

    /// East-west extent at the cell's central latitude, km.
    pub fn width_km(&self) -> f64 {
        let (lat, _) = self.center();
        (self.lon_max - self.lon_min).to_radians() * EARTH_RADIUS_M * lat.to_radians().cos()
            / 1000.0
    }

    /// North-south extent, km.
    pub fn height_km(&self) -> f64 {
        (self.lat_max - self.lat_min).to_radians() * EARTH_RADIUS_M / 1000.0
    }
}

fn check_precision(precision: usize) -> Result<()> {
    if (1..=MAX_PRECISION).contains(&precision) {
        Ok(())
    } else {
        Err(Error::Geohash(format!(
            "precision {precision} outside 1..={MAX_PRECISION}"
        )))
    }
}

pub fn encode(lat: f64, lon: f64, precision: usize) -> Result<String> {
    check_precision(precision)?;
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(Error::Geohash(format!("coordinates ({lat}, {lon}) invalid")));
    }

    let (mut lat_lo, mut lat_hi) = (-90.0_f64, 90.0_f64);
    let (mut lon_lo, mut lon_hi) = (-180.0_f64, 180.0_f64);
    let mut code = String::with_capacity(precision);
    let mut even = true;
    for _ in 0..precision {
        let mut idx = 0u8;
        for _ in 0..5 {
            let (lo, hi, v) = if even {
                (&mut lon_lo, &mut lon_hi, lon)
            } else {
                (&mut lat_lo, &mut lat_hi, lat)
            };
            let mid = 0.5 * (*lo + *hi);
            idx <<= 1;
            if v >= mid {
                idx |= 1;
                *lo = mid;
            } else {
                *hi = mid;
            }
            even = !even;
        }
        code.push(ALPHABET[idx as usize] as char);
    }
    Ok(code)
}

pub fn decode(code: &str) -> Result<GeohashCell> {
    check_precision(code.len())?;
    let (mut lat_lo, mut lat_hi) = (-90.0_f64, 90.0_f64);
    let (mut lon_lo, mut lon_hi) = (-180.0_f64, 180.0_f64);
    let mut even = true;
    for ch in code.bytes() {
        let idx = ALPHABET
            .iter()
            .position(|&a| a == ch)
            .ok_or_else(|| Error::Geohash(format!("invalid character {:?} in {code:?}", ch as char)))?;
        for bit in (0..5).rev() {
            let set = (idx >> bit) & 1 == 1;
            let (lo, hi) = if even {
                (&mut lon_lo, &mut lon_hi)
            } else {
                (&mut lat_lo, &mut lat_hi)
            };
            let mid = 0.5 * (*lo + *hi);
            if set {
                *lo = mid;
            } else {
                *hi = mid;
            }
            even = !even;
        }
    }
    Ok(GeohashCell {
        code: code.to_string(),
        lat_min: lat_lo,
        lat_max: lat_hi,
        lon_min: lon_lo,
        lon_max: lon_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_vector() {
        assert_eq!(encode(57.64911, 10.40744, 11).unwrap(), "u4pruydqqvj");
    }

    #[test]
    fn origin_first_char() {
        // lon bit 1 (0 >= 0), lat bit 1, lon 0, lat 0, lon 0 -> 0b11000 = 24 -> 's'
        assert_eq!(encode(0.0, 0.0, 1).unwrap(), "s");
        let cell = decode("s").unwrap();
        assert_eq!(
            (cell.lat_min, cell.lat_max, cell.lon_min, cell.lon_max),
            (0.0, 45.0, 0.0, 45.0)
        );
    }

    #[test]
    fn toronto_cell_dimensions() {
        let cell = decode("dpz833").unwrap();
        assert!(cell.contains(43.645, -79.39));
        // 360 / 2^15 degrees of longitude at ~43.65 N
        assert!((cell.width_km() - 0.884).abs() < 0.002, "{}", cell.width_km());
        // 180 / 2^15 degrees of latitude
        assert!((cell.height_km() - 0.6108).abs() < 0.001, "{}", cell.height_km());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(encode(0.0, 0.0, 0).is_err());
        assert!(encode(0.0, 0.0, 13).is_err());
        assert!(encode(91.0, 0.0, 5).is_err());
        assert!(decode("dpza").is_err());
        assert!(decode("").is_err());
    }

    #[test]
    fn nearby_points_share_cell() {
        let cell = decode("dpz833").unwrap();
        let (lat, lon) = cell.center();
        // 1 m is ~9e-6 degrees of latitude
        let a = encode(lat, lon, 6).unwrap();
        let b = encode(lat + 9e-6, lon, 6).unwrap();
        assert_eq!(a, "dpz833");
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn round_trip_and_containment(lat in -89.9..89.9f64, lon in -179.9..179.9f64) {
            let code = encode(lat, lon, 6).unwrap();
            let cell = decode(&code).unwrap();
            prop_assert!(cell.contains(lat, lon));
            let (clat, clon) = cell.center();
            prop_assert_eq!(encode(clat, clon, 6).unwrap(), code);
        }

        #[test]
        fn prefix_nesting(lat in -90.0..90.0f64, lon in -180.0..180.0f64, k in 1usize..12) {
            let short = encode(lat, lon, k).unwrap();
            let long = encode(lat, lon, k + 1).unwrap();
            prop_assert!(long.starts_with(&short));
        }
    }
}
