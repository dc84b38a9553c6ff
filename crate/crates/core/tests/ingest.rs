use std::path::Path;

use radiometrics::features::FeatureOptions;
use radiometrics::geo_scene::LosClass;
use radiometrics::io::{self, kml};
use radiometrics::pipeline::MetricKind;
use radiometrics::synth::{emit_dataset, generate_measurements, generate_scene, scene_digest, SynthConfig};
use radiometrics::Error;

fn synth_dir(dir: &Path, samples: usize) -> SynthConfig {
    let cfg = SynthConfig {
        lots_x: 12,
        lots_y: 12,
        samples,
        ..SynthConfig::default()
    };
    let scene = generate_scene(&cfg).unwrap();
    let recs = generate_measurements(&scene, &cfg).unwrap();
    emit_dataset(dir, &scene, &recs).unwrap();
    cfg
}

#[test]
fn synth_files_round_trip_without_drops() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_dir(dir.path(), 400);
    let scene = io::load_scene(dir.path()).unwrap();
    let original = generate_scene(&cfg).unwrap();
    assert_eq!(scene.buildings().len(), original.buildings().len());
    assert_eq!(scene.terrain(), original.terrain());

    let ing = io::ingest(
        &dir.path().join(io::MEASUREMENTS_FILE),
        &scene,
        &FeatureOptions::default(),
        Some(MetricKind::Rssi),
    )
    .unwrap();
    assert!(ing.dropped.is_empty(), "{:?}", ing.dropped);
    assert_eq!(ing.records, generate_measurements(&original, &cfg).unwrap());
    assert_eq!(ing.total_rows, 400);
    assert!(ing.notice().is_none());

    // re-emitting the ingested scene gives the same digest
    let again = tempfile::tempdir().unwrap();
    emit_dataset(again.path(), &scene, &ing.records).unwrap();
    assert_eq!(scene_digest(&io::load_scene(again.path()).unwrap()), scene_digest(&scene));
}

#[test]
fn out_of_range_rows_are_logged() {
    let dir = tempfile::tempdir().unwrap();
    synth_dir(dir.path(), 50);
    let scene = io::load_scene(dir.path()).unwrap();
    let path = dir.path().join(io::MEASUREMENTS_FILE);
    let mut table = io::read_measurements(&path).unwrap();
    // move one transmitter ~5 km north, one frequency out of band, one UE off the map
    table.records[0].tx.lat += 0.045;
    table.records[1].tx.frequency_mhz = 3500.0;
    let (_, _, _, lat_max) = scene.terrain().extent();
    table.records[2].ue.lat = lat_max + 0.002;
    table.records[2].ue.lon = table.records[2].tx.lon;
    io::write_measurements(&path, &table.records).unwrap();

    let ing = io::ingest(&path, &scene, &FeatureOptions::default(), None).unwrap();
    assert_eq!(ing.records.len() + ing.dropped.len(), ing.total_rows);
    let reasons: Vec<(&str, usize)> = ing.dropped.iter().map(|d| (d.reason.as_str(), d.line)).collect();
    assert_eq!(
        reasons,
        vec![
            ("distance_to_transmitter_km out of range", 2),
            ("downlink_frequency out of range", 3),
            ("outside scene extent", 4),
        ]
    );
}

#[test]
fn rsrq_column_required_for_rsrq_metrics() {
    let dir = tempfile::tempdir().unwrap();
    synth_dir(dir.path(), 20);
    let scene = io::load_scene(dir.path()).unwrap();
    let path = dir.path().join(io::MEASUREMENTS_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    std::fs::write(&path, stripped).unwrap();
    for metric in [MetricKind::Rssi, MetricKind::Rsrq] {
        let e = io::ingest(&path, &scene, &FeatureOptions::default(), Some(metric)).unwrap_err();
        assert!(matches!(e, Error::Schema(_)));
        assert!(e.to_string().contains("rsrq_db"), "{e}");
    }
    assert_eq!(
        io::ingest(&path, &scene, &FeatureOptions::default(), Some(MetricKind::Rsrp))
            .unwrap()
            .records
            .len(),
        20
    );
}

#[test]
fn empty_body_gives_notice() {
    let dir = tempfile::tempdir().unwrap();
    synth_dir(dir.path(), 5);
    let scene = io::load_scene(dir.path()).unwrap();
    let path = dir.path().join(io::MEASUREMENTS_FILE);
    io::write_measurements(&path, &[]).unwrap();
    let ing = io::ingest(&path, &scene, &FeatureOptions::default(), None).unwrap();
    assert!(ing.records.is_empty());
    assert!(ing.notice().unwrap().contains("no data rows"));
}

#[test]
fn kml_colors_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    synth_dir(dir.path(), 60);
    let scene = io::load_scene(dir.path()).unwrap();
    let ing = io::ingest(
        &dir.path().join(io::MEASUREMENTS_FILE),
        &scene,
        &FeatureOptions::default(),
        None,
    )
    .unwrap();
    let rays: Vec<_> = ing.records.iter().zip(&ing.features).map(|(r, f)| (r, f.los_class)).collect();
    let text = kml::rays_to_kml(&scene, &rays).unwrap();
    assert!(text.contains("xmlns=\"http://www.opengis.net/kml/2.2\""));
    assert_eq!(text.matches("<Placemark>").count(), 60);
    assert_eq!(kml::style_color(LosClass::Nlos), "ff0000ff");
    assert_eq!(kml::style_color(LosClass::Los), "ff00ff00");
    assert_eq!(kml::style_color(LosClass::LosTentative), "ffff0000");

    let all_los: Vec<_> = ing.records.iter().map(|r| (r, LosClass::Los)).collect();
    let green = kml::rays_to_kml(&scene, &all_los).unwrap();
    assert_eq!(green.matches("#los<").count(), 60);
    assert!(!green.contains("#nlos<") && !green.contains("#los_tentative<"));
}
