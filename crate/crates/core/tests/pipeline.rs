use radiometrics::geo_scene::Scene;
use radiometrics::net::{Architecture, Network, TrainConfig};
use radiometrics::pipeline::*;
use radiometrics::propagation::PathLossModel;
use radiometrics::record::MeasurementRecord;
use radiometrics::synth::{generate_measurements, generate_scene, SynthConfig};
use radiometrics::Error;

fn world(samples: usize) -> (Scene, Vec<MeasurementRecord>) {
    let cfg = SynthConfig {
        lots_x: 16,
        lots_y: 16,
        samples,
        ..SynthConfig::default()
    };
    let scene = generate_scene(&cfg).unwrap();
    let recs = generate_measurements(&scene, &cfg).unwrap();
    (scene, recs)
}

fn small_config(metric: MetricKind) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(metric);
    cfg.seed = 11;
    cfg.architecture = Some(Architecture::new(vec![16, 16], vec![8, 1]).unwrap());
    cfg.train = Some(TrainConfig {
        batch_size: 32,
        learning_rate: 3e-3,
        weight_decay: 1e-4,
        max_epochs: 8,
        patience: 4,
        ..TrainConfig::default()
    });
    cfg.split.holdout = vec!["dpz833".into()];
    cfg
}

#[test]
fn bundle_round_trip_is_exact() {
    let (scene, recs) = world(1500);
    let cfg = small_config(MetricKind::Rsrp);
    let model = train_model(&recs, &scene, &cfg, None).unwrap();
    let bundle = &model.bundle;

    assert_eq!(bundle.standardizer.fitted_on, bundle.split.train_digest());
    assert!(bundle.summary.validation_records > 0 && bundle.summary.test_records > 0);

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    bundle.save(&a).unwrap();
    let loaded = ModelBundle::load(&a).unwrap();
    assert_eq!(&loaded, bundle);
    loaded.save(&b).unwrap();
    for f in ["manifest.json", "weights.bin"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    let manifest = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    for key in ["\"trunk\"", "\"head\"", "\"batch_size\"", "\"learning_rate\"", "\"weight_decay\"", "\"max_epochs\"", "\"format_version\""] {
        assert!(manifest.contains(key), "manifest lacks {key}");
    }

    let p1 = predict(bundle, &recs, &scene, None).unwrap();
    let p2 = predict(&loaded, &recs, &scene, None).unwrap();
    assert_eq!(p1.predictions, p2.predictions);

    // validation RMSE reproduces from a fresh load
    let val: Vec<MeasurementRecord> = recs
        .iter()
        .filter(|r| bundle.split.validation_ids.binary_search(&r.record_id).is_ok())
        .cloned()
        .collect();
    let pv = predict(&loaded, &val, &scene, None).unwrap();
    let t: Vec<f64> = pv.predictions.iter().map(|p| p.target.unwrap()).collect();
    let z: Vec<f64> = pv.predictions.iter().map(|p| p.prediction).collect();
    let r = radiometrics::eval::rmse(&z, &t).unwrap();
    assert!((r - bundle.summary.validation_rmse.unwrap()).abs() < 1e-9);
}

#[test]
fn corrupt_bundles_rejected() {
    let (scene, recs) = world(800);
    let model = train_model(&recs, &scene, &small_config(MetricKind::Rsrp), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    model.bundle.save(d).unwrap();

    let blob = std::fs::read(d.join("weights.bin")).unwrap();
    std::fs::write(d.join("weights.bin"), &blob[..blob.len() - 8]).unwrap();
    assert!(matches!(ModelBundle::load(d), Err(Error::Bundle(_))));

    let mut flipped = blob.clone();
    flipped[3] ^= 1;
    std::fs::write(d.join("weights.bin"), &flipped).unwrap();
    assert!(matches!(ModelBundle::load(d), Err(Error::Bundle(_))));

    std::fs::write(d.join("weights.bin"), &blob).unwrap();
    let m = std::fs::read_to_string(d.join("manifest.json")).unwrap();
    std::fs::write(d.join("manifest.json"), m.replace("\"format_version\": 1", "\"format_version\": 99")).unwrap();
    let e = ModelBundle::load(d).unwrap_err();
    assert!(e.to_string().contains("version 99"), "{e}");
}

#[test]
fn zero_weight_networks_compose_by_metric() {
    let (scene, recs) = world(800);
    for metric in [MetricKind::Rsrp, MetricKind::Rsrq, MetricKind::Rssi] {
        let mut bundle = train_model(&recs, &scene, &small_config(metric), None).unwrap().bundle;
        bundle.network = Network::zeros(bundle.network.architecture().clone(), bundle.network.input_dim()).unwrap();
        let preds = predict(&bundle, &recs, &scene, None).unwrap().predictions;
        assert_eq!(preds.len(), recs.len());
        for p in preds {
            match metric {
                MetricKind::Rsrq => assert_eq!(p.prediction, 0.0),
                _ => assert_eq!(p.prediction, p.beta_dbm),
            }
        }
    }
}

#[test]
fn schema_and_delegate_checks() {
    let (scene, recs) = world(800);
    let mut bundle = train_model(&recs, &scene, &small_config(MetricKind::Rsrp), None).unwrap().bundle;
    let mut wrong = bundle.clone();
    wrong.features.temporal = true;
    assert!(matches!(predict(&wrong, &recs, &scene, None), Err(Error::Schema(_))));

    bundle.path_loss = PathLossModel::External { name: "site".into() };
    assert!(matches!(predict(&bundle, &recs, &scene, None), Err(Error::MissingDelegate)));
    let delegate = |_: &radiometrics::features::PathLossFeatures| 120.0;
    let p = predict(&bundle, &recs[..5], &scene, Some(&delegate)).unwrap();
    assert!(p.predictions.iter().all(|x| x.alpha_db == 120.0));
}

#[test]
fn training_is_deterministic() {
    let (scene, recs) = world(1000);
    let cfg = small_config(MetricKind::Rssi);
    let a = train_model(&recs, &scene, &cfg, None).unwrap().bundle;
    let b = train_model(&recs, &scene, &cfg, None).unwrap().bundle;
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    a.save(&dir.path().join("a")).unwrap();
    b.save(&dir.path().join("b")).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("a/weights.bin")).unwrap(),
        std::fs::read(dir.path().join("b/weights.bin")).unwrap()
    );
}

#[test]
fn zero_residual_targets_are_learned() {
    let synth = SynthConfig {
        lots_x: 16,
        lots_y: 16,
        samples: 3000,
        shadowing_sigma_db: 0.0,
        oracle: PathLossModel::default(),
        ..SynthConfig::default()
    };
    let scene = generate_scene(&synth).unwrap();
    let recs = generate_measurements(&scene, &synth).unwrap();
    let mut cfg = small_config(MetricKind::Rsrp);
    cfg.train = Some(TrainConfig {
        max_epochs: 50,
        patience: 10,
        ..cfg.train.unwrap()
    });
    let m = train_model(&recs, &scene, &cfg, None).unwrap();
    assert!(m.bundle.summary.validation_rmse.unwrap() < 0.5, "{:?}", m.bundle.summary);
}

#[test]
fn too_few_train_records() {
    let (scene, recs) = world(60);
    let e = train_model(&recs, &scene, &small_config(MetricKind::Rsrp), None).unwrap_err();
    assert!(e.to_string().contains("at least 100"), "{e}");
}

#[test]
fn search_properties() {
    let (scene, recs) = world(600);
    let mut cfg = small_config(MetricKind::Rsrp);
    cfg.search = SearchSpace {
        batch_size: (16, 64),
        trunk_depth: (1, 2),
        widths: vec![8, 16],
        head_templates: vec![vec![8, 1], vec![1]],
        learning_rate: (1e-4, 1e-2),
        weight_decay: (1e-6, 1e-3),
        max_epochs: (2, 4),
    };
    let data = prepare(&recs, &scene, &cfg, None).unwrap();

    let one = hyper_search(&data, &cfg, 1).unwrap();
    assert_eq!(one.trials.len(), 1);
    assert_eq!(one.best_trial, 0);
    assert_eq!(one.best.architecture.as_ref().unwrap().trunk, one.trials[0].trunk);

    let two = hyper_search(&data, &cfg, 2).unwrap();
    let ten = hyper_search(&data, &cfg, 10).unwrap();
    assert_eq!(ten.trials.len(), 10);
    let best = |o: &SearchOutcome| o.trials[o.best_trial].validation_rmse.unwrap();
    assert!(best(&ten) <= best(&two));
    assert_eq!(ten.trials[..2], two.trials[..]);
    assert!(hyper_search(&data, &cfg, 0).is_err());
}
