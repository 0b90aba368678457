use radnet_core::dataset::{Dataset, PreprocessOptions};
use radnet_core::detect::{evaluate, extract_detections, FrameGroundTruth};
use radnet_core::formats::{
    decode_checkpoint, decode_dataset, decode_recording, encode_checkpoint, encode_dataset,
    encode_recording, read_recording, write_recording, RecordingSidecar,
};
use radnet_core::neural::{init_params, NetworkSpec};
use radnet_core::pipeline::make_split;
use radnet_core::scene::{generate_recording, CameraModel, RadarConfig, Scenario};
use radnet_core::training::{seg_loss, total_loss, train, targets_as_outputs, LossWeights, TrainConfig};
use radnet_core::Error;

fn small_config() -> RadarConfig {
    RadarConfig::with_dims(16, 16)
}

fn small_scenario(fg: usize, bg: usize) -> Scenario {
    Scenario {
        background_frames: bg,
        foreground_frames: fg,
        range_max: 12.0,
        ..Scenario::default()
    }
}

fn small_dataset(fg: usize, seed: u64) -> Dataset {
    let config = small_config();
    let rec = generate_recording(&config, &CameraModel::default(), &small_scenario(fg, 4), seed).unwrap();
    make_split(&rec.foreground, &rec.truth, &rec.background, 0.25, seed, &PreprocessOptions::default()).unwrap()
}

#[test]
fn recording_round_trip_through_files() {
    let config = small_config();
    let camera = CameraModel::default();
    let scenario = small_scenario(5, 3);
    let rec = generate_recording(&config, &camera, &scenario, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.rdr1");
    let sidecar = RecordingSidecar {
        config: config.clone(),
        camera,
        scenario: Some(scenario),
        seed: 9,
        background: rec.background.iter().map(|f| radnet_core::scene::FrameTruth {
            frame_id: f.frame_id,
            timestamp: f.timestamp,
            ..Default::default()
        }).collect(),
        truth: rec.truth.clone(),
        excluded: rec.excluded,
    };
    write_recording(&path, &rec, &sidecar).unwrap();
    let (back, meta) = read_recording(&path).unwrap();
    assert_eq!(meta, sidecar);
    assert_eq!(back.truth, rec.truth);
    for (a, b) in back.foreground.iter().zip(&rec.foreground) {
        assert_eq!((a.frame_id, a.timestamp), (b.frame_id, b.timestamp));
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.re, f64::from(y.re as f32));
            assert_eq!(x.im, f64::from(y.im as f32));
        }
    }
    // re-encoding the decoded frames is byte-identical
    let bytes = encode_recording(&config, &rec).unwrap();
    assert_eq!(encode_recording(&config, &back).unwrap(), bytes);
    assert!(matches!(decode_recording(&bytes[..bytes.len() - 3]), Err(Error::Format { .. })));
}

#[test]
fn dataset_round_trip_is_exact() {
    let data = small_dataset(6, 2);
    let bytes = encode_dataset(&data).unwrap();
    let back = decode_dataset(&bytes).unwrap();
    assert_eq!(back, data);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_dataset(&bad), Err(Error::Format { .. })));
    let mut extra = bytes;
    extra.push(0);
    assert!(matches!(decode_dataset(&extra), Err(Error::Format { .. })));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let spec = NetworkSpec::new(32, &[2, 3, 4, 5, 6]).unwrap();
    let params = init_params::<f32>(&spec, 4);
    let mut momentum = params.zeros_like();
    momentum.add_scaled(&params, -0.25);
    let bytes = encode_checkpoint(&params, Some(&momentum)).unwrap();
    let ck = decode_checkpoint(&bytes).unwrap();
    assert_eq!(ck.params, params);
    assert_eq!(ck.momentum.as_ref(), Some(&momentum));
    assert_eq!(encode_checkpoint(&ck.params, ck.momentum.as_ref()).unwrap(), bytes);
    let plain = decode_checkpoint(&encode_checkpoint(&params, None).unwrap()).unwrap();
    assert!(plain.momentum.is_none());
    assert!(decode_checkpoint(&bytes[..100]).is_err());
}

#[test]
fn zero_learning_rate_leaves_parameters_alone() {
    let data = small_dataset(4, 1);
    let spec = NetworkSpec::new(data.channels, &[2, 2, 4, 4, 8]).unwrap();
    let config = TrainConfig { learning_rate: 0.0, epochs: 1, batch_size: 2, seed: 3, ..TrainConfig::default() };
    let out = train(&data, &data, &spec, &config, |_| {}).unwrap();
    assert_eq!(out.history.len(), 1);
    assert_eq!(out.final_params, init_params::<f32>(&spec, 3));
}

#[test]
fn training_is_deterministic_and_thread_independent() {
    let data = small_dataset(8, 5);
    let val = small_dataset(4, 6);
    let spec = NetworkSpec::new(data.channels, &[2, 2, 4, 4, 8]).unwrap();
    let config = TrainConfig { epochs: 3, batch_size: 4, seed: 1, ..TrainConfig::default() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(&data, &val, &spec, &config, |_| {}).unwrap())
    };
    let (a, b, c) = (run(1), run(1), run(3));
    let losses = |o: &radnet_core::training::TrainOutcome| {
        o.history.iter().map(|r| (r.train, r.val)).collect::<Vec<_>>()
    };
    assert_eq!(losses(&a), losses(&b));
    assert_eq!(a.final_params, b.final_params);
    assert_eq!(losses(&a), losses(&c));
    assert_eq!(a.final_params, c.final_params);
}

#[test]
fn bad_hyperparameters_are_rejected() {
    let data = small_dataset(2, 1);
    let spec = NetworkSpec::new(data.channels, &[2, 2, 4, 4, 8]).unwrap();
    for cfg in [
        TrainConfig { momentum: 1.0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { learning_rate: f64::NAN, ..TrainConfig::default() },
    ] {
        assert!(matches!(train(&data, &data, &spec, &cfg, |_| {}), Err(Error::Config(_))));
    }
    let wrong = NetworkSpec::new(8, &[2, 2, 4, 4, 8]).unwrap();
    assert!(matches!(
        train(&data, &data, &wrong, &TrainConfig::default(), |_| {}),
        Err(Error::Shape(_))
    ));
}

#[test]
fn background_only_sample_reduces_to_bce() {
    let data = small_dataset(0, 2);
    assert!(!data.is_empty());
    let sample = &data.samples[0];
    assert!(!sample.meta.present);
    let p: Vec<f32> = (0..256).map(|i| 0.05 + 0.9 * (i as f32 / 255.0)).collect();
    let g = vec![0.0f32; 256];
    let bce: f64 = p.iter().map(|&x| -(1.0 - f64::from(x)).ln()).sum::<f64>() / 256.0;
    assert!((seg_loss(&p, &g).unwrap() - bce).abs() < 1e-9);
    let mut outputs = targets_as_outputs::<f32>(&[&sample.targets]).unwrap();
    outputs.coord_x.data_mut().fill(0.7);
    outputs.coord_y.data_mut().fill(0.2);
    let (loss, _) = total_loss(&outputs, &[&sample.targets], &LossWeights::default()).unwrap();
    assert_eq!((loss.mse_x, loss.mse_y), (0.0, 0.0));
}

#[test]
fn oracle_maps_give_perfect_scores() {
    let config = RadarConfig { noise_sigma: 0.0, ..small_config() };
    let camera = CameraModel::default();
    let rec = generate_recording(&config, &camera, &small_scenario(30, 4), 3).unwrap();
    let data = make_split(&rec.foreground, &rec.truth, &rec.background, 0.25, 3, &PreprocessOptions::default()).unwrap();
    let mut detections = Vec::new();
    let mut truth = Vec::new();
    for s in &data.samples {
        let t = &s.targets;
        detections.push(
            extract_detections(&t.presence, &t.coord_x, &t.coord_y, (16, 16), 0.5, 1, &config).unwrap(),
        );
        truth.push(FrameGroundTruth::from_sample(s));
    }
    let report = evaluate(&detections, &truth, &camera, 0.1).unwrap();
    assert_eq!(report.recall, 1.0);
    assert_eq!(report.precision, 1.0);
    assert!(report.mse_x < 1e-12 && report.mse_y < 1e-12);
    assert!(report.range_mae < config.range_resolution() / 2.0);
    assert!((report.mean_iou - 1.0).abs() < 1e-12);
}
