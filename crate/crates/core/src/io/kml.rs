//! KML export of transmitter-to-UE rays colored by line-of-sight class.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geo_scene::{LosClass, Scene};
use crate::record::MeasurementRecord;

/// KML `aabbggrr` line colors.
pub fn style_color(class: LosClass) -> &'static str {
    match class {
        LosClass::Los => "ff00ff00",
        LosClass::Nlos => "ff0000ff",
        LosClass::LosTentative => "ffff0000",
    }
}

fn style_id(class: LosClass) -> &'static str {
    match class {
        LosClass::Los => "los",
        LosClass::Nlos => "nlos",
        LosClass::LosTentative => "los_tentative",
    }
}

/// One placemark per record with absolute antenna and UE altitudes.
pub fn rays_to_kml(scene: &Scene, rays: &[(&MeasurementRecord, LosClass)]) -> Result<String> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<kml xmlns=\"http://www.opengis.net/kml/2.2\">\n<Document>\n");
    for class in [LosClass::Los, LosClass::Nlos, LosClass::LosTentative] {
        let _ = writeln!(
            s,
            "<Style id=\"{}\"><LineStyle><color>{}</color><width>2</width></LineStyle></Style>",
            style_id(class),
            style_color(class)
        );
    }
    for (r, class) in rays {
        let tx_alt = scene.terrain_altitude(r.tx.lon, r.tx.lat)? + r.tx.height_m;
        let ue_alt = scene.terrain_altitude(r.ue.lon, r.ue.lat)? + r.ue.alt_ag_m;
        let _ = writeln!(
            s,
            "<Placemark><name>{}</name><styleUrl>#{}</styleUrl><LineString><altitudeMode>absolute</altitudeMode>\
             <coordinates>{},{},{} {},{},{}</coordinates></LineString></Placemark>",
            r.record_id,
            style_id(*class),
            r.tx.lon,
            r.tx.lat,
            tx_alt,
            r.ue.lon,
            r.ue.lat,
            ue_alt
        );
    }
    s.push_str("</Document>\n</kml>\n");
    Ok(s)
}

pub fn write_kml(path: &Path, scene: &Scene, rays: &[(&MeasurementRecord, LosClass)]) -> Result<()> {
    std::fs::write(path, rays_to_kml(scene, rays)?).map_err(|e| Error::io(path, e))
}
