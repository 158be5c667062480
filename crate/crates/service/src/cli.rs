//! Subcommands of the `doci` binary. Each `run_*` function does the work
//! and returns a JSON summary plus any warnings; printing is left to the
//! binary.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use doci::archive::{read_stack, write_maps, write_stack};
use doci::camera::{acquire, acquire_channel, AcquisitionConfig, ChannelFrames, ChannelStack};
use doci::channels::ChannelSet;
use doci::characterize::{
    calibrate_fall_tau, calibrate_noise, default_lifetime_grid, format_ns, linearity_fit,
    measure_stack_std, resolve_bar_target, temporal_resolution, DEFAULT_CONTRAST_CRITERION,
};
use doci::classifier::{
    blockify, build_features, channel_sweep, confusion, metrics_csv, predict_map, render_overlay,
    sample_training_rois, train_lda_with, BlockGrid, BlockMap, ClassifierConfig, EvalMode,
    Evaluator, FeatureMatrix, MetricsRow, Priors, TrainingRoi, DEFAULT_BLOCK_MM, DEFAULT_LAMBDA,
};
use doci::format::{write_raster, RasterData};
use doci::lifetime::PumpPulse;
use doci::phantom::{
    label, make_dye_drop_phantom, BarTargetSpec, DyeDropSpec, Phantom, PhantomSpec, TissueSpec,
};
use doci::pipeline::{
    encode_png, render_heatmap, render_intensity, DociStack, Normalization, Palette, Roi,
};
use ndarray::{concatenate, Array2, Axis};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Result, ServiceError};
use crate::server::{self, ServerOptions};
use crate::{rfc3339_now, timestamp_dir_name, DATA_DIR_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "doci",
    version,
    about = "Simulate, map and classify gated lifetime images"
)]
pub struct Cli {
    /// Root for outputs written without an explicit --out.
    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = "doci-data")]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Acquire a stack archive from a phantom.
    Simulate(SimulateArgs),
    /// Compute DOCI maps and heatmaps from a stack archive.
    Doci(DociArgs),
    /// Train on labelled regions and classify one or more stacks.
    Classify(ClassifyArgs),
    /// Score every channel subset of the given sizes and write a CSV table.
    Sweep(SweepArgs),
    /// Fit the DOCI-to-lifetime line and estimate temporal resolution.
    Calibrate(CalibrateArgs),
    /// Image a bar target and report the finest resolved spacing.
    Resolve(ResolveArgs),
    /// Run the HTTP instrument service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Phantom spec JSON; defaults to the built-in tissue phantom.
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    /// Acquisition config JSON; unspecified fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noiseless: bool,
    /// Pace channels so a nine-window sequence takes about 15 s.
    #[arg(long)]
    pub realtime: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PaletteArg {
    Hot,
    Gray,
}

impl From<PaletteArg> for Palette {
    fn from(p: PaletteArg) -> Self {
        match p {
            PaletteArg::Hot => Palette::Hot,
            PaletteArg::Gray => Palette::Gray,
        }
    }
}

#[derive(Debug, Args)]
pub struct DociArgs {
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Absolute denominator floor; defaults to a fraction of each channel's
    /// 99th-percentile signal.
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long, value_enum, default_value = "hot")]
    pub palette: PaletteArg,
    /// Fixed heatmap range as `low,high`; defaults to per-map min/max.
    #[arg(long)]
    pub range: Option<String>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Training regions as a JSON list of `{label, roi}`.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Stack archives; training pixels are pooled across all of them.
    #[arg(long, num_args = 1.., required = true)]
    pub stacks: Vec<PathBuf>,
    #[arg(long, default_value = "[2 - 10]")]
    pub channels: String,
    /// Phantom spec supplying ground-truth labels for scoring.
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BLOCK_MM)]
    pub block_mm: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Resubstitution,
    HeldOut,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Resubstitution => EvalMode::Resubstitution,
            ModeArg::HeldOut => EvalMode::HeldOut,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Tissue phantom spec JSON; defaults to the built-in phantom.
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated subset sizes.
    #[arg(long, default_value = "1,2,3,9")]
    pub sizes: String,
    #[arg(long, value_enum, default_value = "resubstitution")]
    pub mode: ModeArg,
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_BLOCK_MM)]
    pub block_mm: f64,
    /// CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 20.0)]
    pub gate_width: f64,
    /// Pump fall constant in ns.
    #[arg(long, default_value_t = 1.0)]
    pub fall_tau: f64,
    /// Bisect the fall constant until 1/k reaches this value.
    #[arg(long)]
    pub target_inv_slope: Option<f64>,
    /// Fall-constant bracket for the bisection, `lo,hi` in ns.
    #[arg(long, default_value = "0.1,5")]
    pub bracket: String,
    /// Bisect the photon scale until the dye-drop ROI std reaches this value.
    #[arg(long)]
    pub noise_target: Option<f64>,
    /// Skip the noisy dye-drop measurement.
    #[arg(long)]
    pub skip_noise: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    /// Bar target spec JSON; defaults to the built-in target.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Gaussian PSF sigma in pixels.
    #[arg(long, default_value_t = 0.8)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_CONTRAST_CRITERION)]
    pub criterion: f64,
    #[arg(long, default_value_t = 2)]
    pub channel: u8,
    /// Add shot and read noise.
    #[arg(long)]
    pub noisy: bool,
    /// Directory for the report and images.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub realtime: bool,
    /// Pause between live frames, in milliseconds.
    #[arg(long)]
    pub frame_interval_ms: Option<u64>,
}

/// Result of one command: a JSON summary for stdout and warnings for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: Value,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn new(summary: Value) -> Self {
        Outcome {
            summary,
            warnings: Vec::new(),
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let data = cli.data_dir.as_path();
    match &cli.command {
        Command::Simulate(a) => run_simulate(a, data),
        Command::Doci(a) => run_doci(a, data),
        Command::Classify(a) => run_classify(a, data),
        Command::Sweep(a) => run_sweep(a, data),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Resolve(a) => run_resolve(a),
        Command::Serve(a) => run_serve(a, data),
    }
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| ServiceError::BadRequest(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| ServiceError::BadRequest(format!("cannot parse {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

fn output_dir(explicit: &Option<PathBuf>, data_dir: &Path, kind: &str) -> PathBuf {
    explicit
        .clone()
        .unwrap_or_else(|| data_dir.join(kind).join(timestamp_dir_name()))
}

pub fn load_phantom(path: &Option<PathBuf>) -> Result<Phantom> {
    let spec = match path {
        Some(p) => load_json(p)?,
        None => PhantomSpec::Tissue(TissueSpec::default()),
    };
    Ok(spec.build()?)
}

pub fn load_config(
    path: &Option<PathBuf>,
    seed: Option<u64>,
    noiseless: bool,
) -> Result<AcquisitionConfig> {
    let mut config: AcquisitionConfig = match path {
        Some(p) => load_json(p)?,
        None => AcquisitionConfig::default(),
    };
    if noiseless {
        config.noise = doci::camera::NoiseConfig::noiseless();
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let bad = || ServiceError::BadRequest(format!("{what} must be `a,b`, got `{text}`"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn run_simulate(args: &SimulateArgs, data_dir: &Path) -> Result<Outcome> {
    let phantom = load_phantom(&args.phantom)?;
    let config = load_config(&args.config, args.seed, args.noiseless)?;
    let start = Instant::now();
    let stack = if args.realtime {
        // Sequential, padded so each window takes its share of 15 s.
        let per_channel = Duration::from_millis(15_000 / 9);
        let mut channels = Vec::new();
        for &channel in &config.channels {
            let t0 = Instant::now();
            channels.push(ChannelFrames {
                channel,
                triplet: acquire_channel(&phantom, channel, &config)?,
            });
            std::thread::sleep(per_channel.saturating_sub(t0.elapsed()));
        }
        ChannelStack {
            phantom_id: phantom.id.clone(),
            pixel_pitch_mm: phantom.pixel_pitch_mm,
            config: config.clone(),
            channels,
        }
    } else {
        acquire(&phantom, &config)?
    };
    let elapsed = start.elapsed().as_secs_f64();
    let out = output_dir(&args.out, data_dir, "stacks");
    let manifest = write_stack(&out, &stack, Some(rfc3339_now()))?;
    Ok(Outcome::new(json!({
        "out": out,
        "phantom_id": manifest.phantom_id,
        "channels": manifest.channels(),
        "width": manifest.width,
        "height": manifest.height,
        "seed": manifest.seed,
        "files": manifest.files.len(),
        "checksum": manifest.checksum,
        "acquisition_s": elapsed,
    })))
}

pub fn run_doci(args: &DociArgs, data_dir: &Path) -> Result<Outcome> {
    let (stack, manifest) = read_stack(&args.stack)?;
    let maps = DociStack::from_channels(&stack, args.floor)?;
    let out = output_dir(&args.out, data_dir, "maps");
    write_maps(&out, &maps, &manifest, Some(rfc3339_now()))?;
    let normalization = match &args.range {
        Some(r) => {
            let (low, high) = parse_pair(r, "--range")?;
            Normalization::Fixed { low, high }
        }
        None => Normalization::MinMax,
    };
    let mut warnings = Vec::new();
    let mut channels = Vec::new();
    for m in &maps.maps {
        let png = encode_png(&render_heatmap(m, args.palette.into(), normalization))?;
        fs::write(out.join(format!("ch{:02}_doci.png", m.channel)), png)?;
        let valid = m.valid_count();
        if valid == 0 {
            warnings.push(format!(
                "channel {}: no pixel exceeds the denominator floor {:e}; the map is entirely invalid",
                m.channel, m.denominator_floor
            ));
        }
        let mean = (valid > 0).then(|| m.valid_values().sum::<f64>() / valid as f64);
        channels.push(json!({
            "channel": m.channel,
            "valid_fraction": valid as f64 / m.values.len() as f64,
            "floor": m.denominator_floor,
            "mean": mean,
        }));
    }
    Ok(Outcome {
        summary: json!({ "out": out, "channels": channels }),
        warnings,
    })
}

struct Scored {
    name: String,
    row: Option<MetricsRow>,
}

pub fn run_classify(args: &ClassifyArgs, data_dir: &Path) -> Result<Outcome> {
    let channels = ChannelSet::parse(&args.channels)?;
    let truth = args
        .phantom
        .as_ref()
        .map(|_| load_phantom(&args.phantom))
        .transpose()?;
    let mut scenes = Vec::new();
    for dir in &args.stacks {
        let (stack, _) = read_stack(dir)?;
        let maps = DociStack::from_channels(&stack, None)?;
        scenes.push((dir.clone(), stack.pixel_pitch_mm, maps));
    }
    let rois: Vec<TrainingRoi> = match (&args.train, &truth) {
        (Some(path), _) => load_json(path)?,
        (None, Some(p)) => {
            let c = ClassifierConfig::default();
            sample_training_rois(
                &p.labels,
                0..p.width(),
                c.rois_per_class,
                c.roi_size_px,
                c.seed,
            )?
        }
        (None, None) => {
            return Err(ServiceError::BadRequest(
                "need --train or --phantom to obtain training regions".into(),
            ))
        }
    };

    let parts = scenes
        .iter()
        .map(|(_, _, maps)| build_features(maps, &channels, &rois))
        .collect::<doci::Result<Vec<_>>>()?;
    let views: Vec<_> = parts.iter().map(|f| f.rows.view()).collect();
    let rows = concatenate(Axis(0), &views).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let labels = parts
        .iter()
        .flat_map(|f| f.labels.iter().copied())
        .collect();
    let model = train_lda_with(
        &FeatureMatrix::new(rows, labels, channels.clone())?,
        args.lambda,
        Priors::Empirical,
    )?;

    let out = output_dir(&args.out, data_dir, "predictions");
    fs::create_dir_all(&out)?;
    write_json(&out.join("model.json"), &model)?;
    let mut scored = Vec::new();
    for (i, (dir, pitch, maps)) in scenes.iter().enumerate() {
        let name = format!(
            "{i:02}_{}",
            dir.file_name()
                .map_or("stack".into(), |n| n.to_string_lossy().into_owned())
        );
        let sub = out.join(&name);
        fs::create_dir_all(&sub)?;
        let pred = predict_map(&model, maps)?;
        write_raster(
            sub.join("prediction.docr"),
            &RasterData::Mask(pred.cancer.clone()),
        )?;
        write_raster(
            sub.join("predicted.docr"),
            &RasterData::Mask(pred.predicted.clone()),
        )?;
        let shape = pred.cancer.dim();
        let grid = BlockGrid::new(args.block_mm, *pitch, shape)?;
        let (truth_blocks, mask) = match &truth {
            Some(p) => {
                if p.shape() != shape {
                    return Err(doci::DociError::ShapeMismatch {
                        expected: shape,
                        found: p.shape(),
                    }
                    .into());
                }
                let mask = p.labels.mapv(|l| l != label::CORKBOARD);
                (
                    blockify(&p.labels.mapv(|l| l == label::CANCER), &grid, &mask)?,
                    mask,
                )
            }
            None => {
                // Without ground truth every block is scored as benign, so
                // the overlay shows predictions only.
                let mask = pred.predicted.clone();
                (
                    blockify(&Array2::from_elem(shape, false), &grid, &mask)?,
                    mask,
                )
            }
        };
        let predicted: BlockMap = blockify(&pred.cancer, &grid, &mask)?;
        fs::write(
            sub.join("overlay.png"),
            encode_png(&render_overlay(&grid, &truth_blocks, &predicted)?)?,
        )?;
        let row = match truth {
            Some(_) => {
                let row = MetricsRow::new(channels.clone(), confusion(&truth_blocks, &predicted)?);
                write_json(&sub.join("metrics.json"), &row)?;
                Some(row)
            }
            None => None,
        };
        scored.push(Scored { name, row });
    }
    let rows: Vec<MetricsRow> = scored.iter().filter_map(|s| s.row.clone()).collect();
    if !rows.is_empty() {
        fs::write(out.join("metrics.csv"), metrics_csv(&rows, "classify"))?;
    }
    Ok(Outcome::new(json!({
        "out": out,
        "channels": channels.to_string(),
        "training_rois": rois.len(),
        "stacks": scored.iter().map(|s| json!({ "name": s.name, "metrics": s.row })).collect::<Vec<_>>(),
    })))
}

pub fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| ServiceError::BadRequest(format!("bad subset size `{s}`")))
        })
        .collect()
}

pub fn run_sweep(args: &SweepArgs, data_dir: &Path) -> Result<Outcome> {
    let sizes = parse_sizes(&args.sizes)?;
    let phantom = load_phantom(&args.phantom)?;
    let config = load_config(&args.config, args.seed, args.noiseless)?;
    let start = Instant::now();
    let maps = DociStack::from_channels(&acquire(&phantom, &config)?, None)?;
    let classifier = ClassifierConfig {
        mode: args.mode.into(),
        block_size_mm: args.block_mm,
        ..Default::default()
    };
    let mode = classifier.mode;
    let ev = Evaluator::new(&maps, &phantom.labels, phantom.pixel_pitch_mm, classifier)?;
    let rows = channel_sweep(&ev, &sizes)?;
    let out = args.out.clone().unwrap_or_else(|| {
        data_dir
            .join("sweeps")
            .join(format!("{}.csv", timestamp_dir_name()))
    });
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&out, metrics_csv(&rows, mode.label()))?;
    let best: Vec<Value> = sizes
        .iter()
        .filter_map(|&k| rows.iter().find(|r| r.channels.len() == k))
        .map(|r| json!({ "size": r.channels.len(), "channels": r.channels.to_string(), "accuracy": r.accuracy }))
        .collect();
    Ok(Outcome::new(json!({
        "out": out,
        "rows": rows.len(),
        "mode": mode.label(),
        "best": best,
        "elapsed_s": start.elapsed().as_secs_f64(),
    })))
}

/// Centered square ROIs inside each dye drop.
pub fn dye_drop_rois(size: usize) -> Result<(Phantom, Vec<Roi>)> {
    let (phantom, drops) = make_dye_drop_phantom(&DyeDropSpec::default())?;
    let rois = drops
        .iter()
        .map(|d| {
            let (r, c, h, w) = d.centered_roi(size);
            Roi::rect(r, c, h, w)
        })
        .collect();
    Ok((phantom, rois))
}

pub fn run_calibrate(args: &CalibrateArgs) -> Result<Outcome> {
    let pulse = PumpPulse::default().with_fall_tau(args.fall_tau);
    let grid = default_lifetime_grid();
    let fit = linearity_fit(&pulse, args.gate_width, &grid)?;
    let mut report =
        json!({ "gate_width_ns": args.gate_width, "fall_tau_ns": args.fall_tau, "fit": fit });
    let mut inv_slope = fit.inv_slope;
    let mut config = AcquisitionConfig {
        pulse,
        ..Default::default()
    }
    .with_gate_width(args.gate_width);
    if let Some(target) = args.target_inv_slope {
        let cal = calibrate_fall_tau(
            &pulse,
            args.gate_width,
            &grid,
            target,
            parse_pair(&args.bracket, "--bracket")?,
            0.005,
        )?;
        inv_slope = cal.fit.inv_slope;
        config = AcquisitionConfig {
            pulse: pulse.with_fall_tau(cal.fall_tau_ns),
            ..Default::default()
        }
        .with_gate_width(args.gate_width);
        report["fall_tau_calibration"] = serde_json::to_value(cal)?;
    }
    if !args.skip_noise || args.noise_target.is_some() {
        let (phantom, rois) = dye_drop_rois(50)?;
        if let Some(target) = args.noise_target {
            let cal = calibrate_noise(&phantom, &config, 2, &rois, target, (1e-7, 1e-1), 0.005)?;
            config.noise.photons_per_unit = cal.photons_per_unit;
            report["noise_calibration"] = serde_json::to_value(cal)?;
        }
        let triplet = acquire_channel(&phantom, 2, &config)?;
        let std = measure_stack_std(&doci::pipeline::compute_doci_default(&triplet, 2)?, &rois)?;
        let t = temporal_resolution(std, inv_slope)?;
        report["avg_roi_std"] = json!(std);
        report["photons_per_unit"] = json!(config.noise.photons_per_unit);
        report["temporal_resolution_ns"] = json!(t);
        report["temporal_resolution"] = json!(format!("{} ns", format_ns(t)));
    }
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        write_json(out, &report)?;
    }
    Ok(Outcome::new(report))
}

pub fn run_resolve(args: &ResolveArgs) -> Result<Outcome> {
    let spec: BarTargetSpec = match &args.spec {
        Some(p) => load_json(p)?,
        None => BarTargetSpec::default(),
    };
    let base = if args.noisy {
        AcquisitionConfig::default()
    } else {
        AcquisitionConfig::noiseless()
    };
    let config = AcquisitionConfig {
        psf_sigma_px: args.sigma,
        channels: vec![args.channel],
        ..base
    };
    config.validate()?;
    let (report, map) = resolve_bar_target(&spec, &config, args.criterion)?;
    let mut warnings = Vec::new();
    if report.finest_resolved_spacing_um.is_none() {
        warnings.push("no bar group reaches the contrast criterion".to_string());
    }
    let summary = json!({ "sigma_px": args.sigma, "summary": report.summary(), "report": report });
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_json(&out.join("report.json"), &summary)?;
        fs::write(
            out.join("doci.png"),
            encode_png(&render_heatmap(&map, Palette::Hot, Normalization::MinMax))?,
        )?;
        let (phantom, _) = doci::phantom::make_usaf_phantom(&spec)?;
        let t = acquire_channel(&phantom, args.channel, &config)?;
        fs::write(
            out.join("intensity.png"),
            encode_png(&render_intensity(&(&t.reference - &t.background)))?,
        )?;
    }
    Ok(Outcome { summary, warnings })
}

pub fn serve_options(args: &ServeArgs, data_dir: &Path) -> Result<ServerOptions> {
    let mut options = ServerOptions::new(load_phantom(&args.phantom)?, data_dir);
    options.config = load_config(&args.config, None, false)?;
    if args.realtime {
        options = options.realtime();
    }
    if let Some(ms) = args.frame_interval_ms {
        options.frame_interval = Duration::from_millis(ms);
    }
    Ok(options)
}

fn run_serve(args: &ServeArgs, data_dir: &Path) -> Result<Outcome> {
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| ServiceError::BadRequest(format!("bad listen address: {e}")))?;
    let options = serve_options(args, data_dir)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(server::serve(options, addr))?;
    Ok(Outcome::new(json!({ "stopped": true })))
}
