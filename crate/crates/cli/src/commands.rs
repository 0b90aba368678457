use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use radnet_core::dataset::{preprocess_pair, PreprocessOptions};
use radnet_core::detect::{detect_outputs, Detection};
use radnet_core::formats::{
    read_checkpoint, read_dataset, read_recording, write_checkpoint, write_dataset,
    write_recording, RecordingSidecar,
};
use radnet_core::neural::{unet_forward, Tensor4};
use radnet_core::pipeline::{
    detect_dataset, make_split, segment_scenario, simulate_segments, DetectOptions,
};
use radnet_core::preprocess::range_doppler;
use radnet_core::render::{encode_pgm, encode_ppm, overlay_rgb, spectrum_image};
use radnet_core::scene::{derive_seed, FrameTruth};
use radnet_core::training::{train as run_training, EpochLogLine, TrainConfig};
use radnet_core::{CameraModel, Dataset, NetworkSpec, RadarConfig, Scenario};

use crate::manifest::ArtifactDir;
use crate::{
    DetectArgs, EvalArgs, InferArgs, PreprocessArgs, PreprocessOptionsArgs, PrintConfigArgs,
    RenderArgs, SimulateArgs, TrainArgs,
};

const STREAM_PAIRING: u64 = 3;

/// Radar and camera settings, the `--config` file format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub radar: RadarConfig,
    pub camera: CameraModel,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn load_sim_config(path: Option<&Path>) -> Result<SimConfig> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => SimConfig::default(),
    };
    cfg.radar.validate()?;
    cfg.camera.validate()?;
    Ok(cfg)
}

fn preprocess_options(args: &PreprocessOptionsArgs, disk_radius: usize) -> PreprocessOptions {
    PreprocessOptions {
        window: args.window,
        phase_normalize: !args.no_phase_norm,
        disk_radius,
    }
}

fn detect_options(args: &DetectArgs, iou_threshold: f64) -> Result<DetectOptions> {
    if !(args.tau > 0.0 && args.tau < 1.0) {
        bail!(radnet_core::Error::Config(format!("tau {} outside (0, 1)", args.tau)));
    }
    Ok(DetectOptions {
        tau: args.tau,
        min_cells: args.min_cells,
        iou_threshold,
    })
}

fn file_stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .with_context(|| format!("no file name in {}", path.display()))
}

fn background_truth(frames: &[radnet_core::RadarFrame]) -> Vec<FrameTruth> {
    frames
        .iter()
        .map(|f| FrameTruth {
            frame_id: f.frame_id,
            timestamp: f.timestamp,
            ..FrameTruth::default()
        })
        .collect()
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let sim = load_sim_config(args.config.as_deref())?;
    let scenario: Scenario = match &args.scenario {
        Some(p) => read_json(p)?,
        None => Scenario::default(),
    };
    let seed = args.seed.unwrap_or(sim.radar.rng_seed);
    let mut out = ArtifactDir::create(&args.out, "simulate")?;
    out.config(serde_json::json!({ "sim": &sim, "scenario": &scenario, "val_phase": args.val_phase }))?;
    out.seed("seed", seed);
    out.seed("scene_seed", scenario.scene_seed);
    for p in args.config.iter().chain(&args.scenario) {
        out.input(p);
    }

    let started = Instant::now();
    let segments = simulate_segments(&sim.radar, &sim.camera, &scenario, seed, args.val_phase)?;
    out.timing("simulate", started);
    let recordings = [&segments.background, &segments.train, &segments.val];
    for (i, name) in ["background", "train", "val"].into_iter().enumerate() {
        let rec = recordings[i];
        let sidecar = RecordingSidecar {
            config: sim.radar.clone(),
            camera: sim.camera,
            scenario: Some(segment_scenario(&scenario, i, args.val_phase)),
            seed: segments.seeds[i],
            background: background_truth(&rec.background),
            truth: rec.truth.clone(),
            excluded: rec.excluded,
        };
        let path = out.file(&format!("{name}.rdr1"));
        out.file(&format!("{name}.rdr1.json"));
        write_recording(&path, rec, &sidecar)?;
        out.seed(name, segments.seeds[i]);
    }
    let cfg_path = out.file("sim_config.json");
    fs::write(cfg_path, serde_json::to_vec_pretty(&sim)?)?;
    out.finish()
}

pub fn preprocess(args: PreprocessArgs) -> Result<()> {
    let options = preprocess_options(&args.options, args.disk_radius);
    let mut out = ArtifactDir::create(&args.out, "preprocess")?;
    out.config(serde_json::json!({ "options": options, "bg_ratio": args.bg_ratio }))?;
    out.seed("seed", args.seed);
    out.input(&args.background);
    let (bg, bg_meta) = read_recording(&args.background)?;
    for (i, path) in args.recordings.iter().enumerate() {
        let started = Instant::now();
        out.input(path);
        let (rec, meta) = read_recording(path)?;
        if meta.config.dims() != bg_meta.config.dims() {
            bail!(radnet_core::Error::Config(format!(
                "{} has dims {:?}, background {:?}",
                path.display(),
                meta.config.dims(),
                bg_meta.config.dims()
            )));
        }
        let pairing_seed = derive_seed(args.seed, STREAM_PAIRING, i as u64);
        let data = make_split(
            &rec.foreground,
            &rec.truth,
            &bg.background,
            args.bg_ratio,
            pairing_seed,
            &options,
        )?;
        let stem = file_stem(path)?;
        write_dataset(&out.file(&format!("{stem}.rdt1")), &data)?;
        out.seed(&format!("pairing_{stem}"), pairing_seed);
        out.timing(&stem, started);
    }
    out.finish()
}

pub fn train(args: TrainArgs) -> Result<()> {
    let train_set = read_dataset(&args.train)?;
    let val_set = match &args.val {
        Some(p) => read_dataset(p)?,
        None => Dataset::new(train_set.channels, train_set.range_bins, train_set.doppler_bins),
    };
    let spec = NetworkSpec::new(train_set.channels, &args.widths)?;
    let config = TrainConfig {
        learning_rate: args.lr,
        momentum: args.momentum,
        epochs: args.epochs,
        batch_size: args.batch,
        seed: args.seed,
        ..TrainConfig::default()
    };
    config.validate()?;
    let mut out = ArtifactDir::create(&args.out, "train")?;
    out.config(serde_json::json!({ "train": &config, "spec": &spec }))?;
    out.seed("seed", args.seed);
    out.input(&args.train);
    if let Some(p) = &args.val {
        out.input(p);
    }
    let started = Instant::now();
    let log_path = out.file("train_log.jsonl");
    let mut log = BufWriter::new(File::create(&log_path)?);
    let mut log_err = None;
    let outcome = run_training(&train_set, &val_set, &spec, &config, |record| {
        let line = EpochLogLine::from(record);
        let res = serde_json::to_writer(&mut log, &line)
            .map_err(anyhow::Error::from)
            .and_then(|_| Ok(writeln!(log)?))
            .and_then(|_| Ok(log.flush()?));
        if let Err(e) = res {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e);
    }
    write_checkpoint(&out.file("final.rdw1"), &outcome.final_params, Some(&outcome.velocity))?;
    write_checkpoint(&out.file("best.rdw1"), &outcome.best_params, None)?;
    out.seed("best_epoch", outcome.best_epoch as u64);
    out.timing("train", started);
    out.finish()
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let sim = load_sim_config(args.config.as_deref())?;
    let options = detect_options(&args.detect, args.iou)?;
    let data = read_dataset(&args.dataset)?;
    let (k, m, _) = sim.radar.dims();
    if (data.range_bins, data.doppler_bins) != (k, m) {
        bail!(radnet_core::Error::Config(format!(
            "dataset is {}x{}, radar config {k}x{m}",
            data.range_bins, data.doppler_bins
        )));
    }
    let checkpoint = read_checkpoint(&args.checkpoint)?;
    let mut out = ArtifactDir::create(&args.out, "eval")?;
    out.config(serde_json::json!({
        "sim": &sim,
        "tau": options.tau,
        "min_cells": options.min_cells,
        "iou_threshold": options.iou_threshold,
    }))?;
    out.input(&args.dataset);
    out.input(&args.checkpoint);
    let started = Instant::now();
    let detections = detect_dataset(&checkpoint.params, &data, &sim.radar, &options)?;
    let truth: Vec<_> = data
        .samples
        .iter()
        .map(radnet_core::detect::FrameGroundTruth::from_sample)
        .collect();
    let report = radnet_core::detect::evaluate(&detections, &truth, &sim.camera, options.iou_threshold)?;
    let mut lines = Vec::new();
    for (frame, dets) in detections.iter().enumerate() {
        serde_json::to_writer(&mut lines, &serde_json::json!({ "frame": frame, "detections": dets }))?;
        lines.push(b'\n');
    }
    fs::write(out.file("detections.jsonl"), lines)?;
    fs::write(out.file("eval_report.json"), serde_json::to_vec_pretty(&report)?)?;
    out.timing("eval", started);
    out.finish()
}

pub fn infer(args: InferArgs) -> Result<()> {
    let options = detect_options(&args.detect, radnet_core::detect::DEFAULT_IOU_THRESHOLD)?;
    let pre = preprocess_options(&args.options, 1);
    let (rec, meta) = read_recording(&args.recording)?;
    let (bg, _) = read_recording(&args.background)?;
    let fg_frame = rec
        .foreground
        .get(args.frame)
        .with_context(|| format!("foreground frame {} of {}", args.frame, rec.foreground.len()))?;
    let bg_frame = bg
        .background
        .get(args.bg_frame)
        .with_context(|| format!("background frame {} of {}", args.bg_frame, bg.background.len()))?;
    let checkpoint = read_checkpoint(&args.checkpoint)?;
    let mut out = ArtifactDir::create(&args.out, "infer")?;
    out.config(serde_json::json!({ "preprocess": pre, "tau": options.tau, "min_cells": options.min_cells }))?;
    out.input(&args.recording);
    out.input(&args.background);
    out.input(&args.checkpoint);
    let started = Instant::now();
    let input = preprocess_pair(fg_frame, bg_frame, &pre)?;
    let tensor = Tensor4::from_vec(
        [1, input.channels, input.range_bins, input.doppler_bins],
        input.values,
    )?;
    let outputs = unet_forward(&checkpoint.params, &tensor)?;
    let detections = detect_outputs(&outputs, 0, options.tau, options.min_cells, &meta.config)?;
    fs::write(out.file("detections.json"), serde_json::to_vec_pretty(&detections)?)?;
    out.timing("infer", started);
    out.finish()
}

pub fn render(args: RenderArgs) -> Result<()> {
    let (rec, _) = read_recording(&args.recording)?;
    let frames = if args.background_frame { &rec.background } else { &rec.foreground };
    let frame = frames
        .get(args.frame)
        .with_context(|| format!("frame {} of {}", args.frame, frames.len()))?;
    let detections: Vec<Detection> = match &args.detections {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    let mut out = ArtifactDir::create(&args.out, "render")?;
    out.config(serde_json::json!({ "window": args.window, "frame": args.frame, "background_frame": args.background_frame }))?;
    out.input(&args.recording);
    if let Some(p) = &args.detections {
        out.input(p);
    }
    let cube = range_doppler(frame, args.window)?;
    let img = spectrum_image(&cube);
    let rgb = overlay_rgb(&img, &detections)?;
    fs::write(out.file("spectrum.pgm"), encode_pgm(&img))?;
    fs::write(out.file("overlay.ppm"), encode_ppm(img.width, img.height, &rgb))?;
    out.finish()
}

pub fn print_config(args: PrintConfigArgs) -> Result<()> {
    let value = match args.section.as_str() {
        "sim" => serde_json::to_value(SimConfig::default())?,
        "scenario" => serde_json::to_value(Scenario::default())?,
        "train" => serde_json::to_value(TrainConfig::default())?,
        "preprocess" => serde_json::to_value(PreprocessOptions::default())?,
        "all" => serde_json::json!({
            "sim": SimConfig::default(),
            "scenario": Scenario::default(),
            "train": TrainConfig::default(),
            "preprocess": PreprocessOptions::default(),
        }),
        other => bail!(radnet_core::Error::Config(format!(
            "unknown section '{other}' (all, sim, scenario, train, preprocess)"
        ))),
    };
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}
