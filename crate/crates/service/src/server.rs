//! HTTP service around one simulated instrument.
//!
//! All session mutations go through one mutex that is never held across an
//! await. Acquisition runs on blocking workers; each worker carries the
//! session generation it was started for and its frames are dropped once
//! the mode changes, so published sequence numbers only ever increase.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use doci::archive::write_stack;
use doci::camera::{
    acquire_channel, blank_window_frame, AcquisitionConfig, ChannelFrames, ChannelStack,
    NoiseConfig,
};
use doci::channels::ChannelSet;
use doci::classifier::{
    render_overlay, ClassifierConfig, EvalMode, Evaluator, LdaModel, MetricsRow, TrainingRoi,
};
use doci::phantom::Phantom;
use doci::pipeline::{
    compute_doci_default, encode_png, render_heatmap, render_intensity, DociStack, Normalization,
    Palette,
};
use serde::{Deserialize, Serialize};
use tokio::sync::watch;
use tokio::time::Instant;

use crate::error::{ErrorBody, Result, ServiceError};
use crate::{rfc3339_now, timestamp_dir_name};

/// Fixed heatmap scale so frames stay comparable when the gate changes.
pub const HEATMAP_RANGE: (f64, f64) = (0.0, 0.3);
const HISTORY_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Blank-window intensity frames, continuously.
    Video,
    /// One pass over every configured channel, then back to manual.
    Imaging,
    /// DOCI frames on the selected channel, continuously.
    Manual,
}

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub phantom: Phantom,
    pub config: AcquisitionConfig,
    /// Imaging archives go to `data_dir/stacks/<timestamp>`.
    pub data_dir: PathBuf,
    pub initial_mode: Mode,
    /// Pause between live frames in video and manual mode.
    pub frame_interval: Duration,
    /// Pause after each channel of an imaging sequence.
    pub channel_interval: Duration,
    pub long_poll_timeout: Duration,
}

impl ServerOptions {
    pub fn new(phantom: Phantom, data_dir: impl Into<PathBuf>) -> Self {
        ServerOptions {
            phantom,
            config: AcquisitionConfig::default(),
            data_dir: data_dir.into(),
            initial_mode: Mode::Manual,
            frame_interval: Duration::from_millis(500),
            channel_interval: Duration::ZERO,
            long_poll_timeout: Duration::from_secs(30),
        }
    }

    /// Pace frames like the instrument: 2 s per live frame and 15 s per
    /// nine-window sequence.
    pub fn realtime(mut self) -> Self {
        self.frame_interval = Duration::from_secs(2);
        self.channel_interval = Duration::from_millis(15_000 / 9);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Intensity,
    Doci,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub seq: u64,
    /// `None` for blank-window intensity frames.
    pub channel: Option<u8>,
    pub kind: FrameKind,
    pub mode: Mode,
    pub timestamp: String,
    pub width: usize,
    pub height: usize,
    pub gate_width_ns: f64,
}

#[derive(Debug)]
pub struct Frame {
    pub meta: FrameMeta,
    pub png: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub channel: Option<u8>,
    pub gate_width_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub mode: Mode,
    pub seq: u64,
    pub channel: u8,
    pub config: AcquisitionConfig,
    pub phantom_id: String,
    pub width: usize,
    pub height: usize,
    pub imaging: Option<Progress>,
    /// Channels with maps from the last completed imaging sequence.
    pub mapped_channels: Vec<u8>,
    pub last_archive: Option<String>,
    pub last_error: Option<ErrorBody>,
    pub history: Vec<HistoryEntry>,
}

struct Session {
    mode: Mode,
    config: AcquisitionConfig,
    channel: u8,
    seq: u64,
    generation: u64,
    imaging: Option<Progress>,
    latest: Option<Arc<Frame>>,
    maps: Option<Arc<DociStack>>,
    overlay: Option<Arc<Vec<u8>>>,
    last_archive: Option<PathBuf>,
    last_error: Option<ErrorBody>,
    history: VecDeque<HistoryEntry>,
}

pub struct AppState {
    session: Mutex<Session>,
    phantom: Arc<Phantom>,
    notify: watch::Sender<u64>,
    data_dir: PathBuf,
    frame_interval: Duration,
    channel_interval: Duration,
    long_poll_timeout: Duration,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn status(&self) -> Status {
        let s = self.lock();
        Status {
            mode: s.mode,
            seq: s.seq,
            channel: s.channel,
            config: s.config.clone(),
            phantom_id: self.phantom.id.clone(),
            width: self.phantom.width(),
            height: self.phantom.height(),
            imaging: s.imaging,
            mapped_channels: s
                .maps
                .as_ref()
                .map_or_else(Vec::new, |m| m.maps.iter().map(|x| x.channel).collect()),
            last_archive: s.last_archive.as_ref().map(|p| p.display().to_string()),
            last_error: s.last_error.clone(),
            history: s.history.iter().copied().collect(),
        }
    }

    fn is_current(&self, generation: u64) -> bool {
        self.lock().generation == generation
    }

    /// Assign the next sequence number and publish, unless the worker is stale.
    fn publish(&self, generation: u64, mut meta: FrameMeta, png: Vec<u8>) -> bool {
        let seq = {
            let mut s = self.lock();
            if s.generation != generation {
                return false;
            }
            s.seq += 1;
            meta.seq = s.seq;
            meta.mode = s.mode;
            let entry = HistoryEntry {
                seq: s.seq,
                channel: meta.channel,
                gate_width_ns: meta.gate_width_ns,
            };
            s.history.push_back(entry);
            if s.history.len() > HISTORY_LEN {
                s.history.pop_front();
            }
            s.latest = Some(Arc::new(Frame { meta, png }));
            s.seq
        };
        self.notify.send_replace(seq);
        true
    }

    fn record_error(&self, generation: u64, err: &ServiceError) {
        let mut s = self.lock();
        if s.generation == generation {
            tracing::warn!(code = err.code(), "{err}");
            s.last_error = Some(err.body());
        }
    }

    fn latest_after(&self, since: u64) -> Option<Arc<Frame>> {
        self.lock().latest.clone().filter(|f| f.meta.seq > since)
    }
}

/// Create the session and start the initial mode. Must run inside a Tokio
/// runtime.
pub fn start(options: ServerOptions) -> Result<SharedState> {
    options.config.validate()?;
    options.phantom.validate()?;
    let channel = options
        .config
        .channels
        .first()
        .copied()
        .unwrap_or(doci::channels::FIRST_CHANNEL);
    let state = Arc::new(AppState {
        session: Mutex::new(Session {
            mode: options.initial_mode,
            config: options.config,
            channel,
            seq: 0,
            generation: 0,
            imaging: None,
            latest: None,
            maps: None,
            overlay: None,
            last_archive: None,
            last_error: None,
            history: VecDeque::new(),
        }),
        phantom: Arc::new(options.phantom),
        notify: watch::channel(0).0,
        data_dir: options.data_dir,
        frame_interval: options.frame_interval,
        channel_interval: options.channel_interval,
        long_poll_timeout: options.long_poll_timeout,
    });
    set_mode(&state, options.initial_mode)?;
    Ok(state)
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/status", get(get_status))
        .route("/api/config", get(get_config).put(put_config))
        .route("/api/mode", post(post_mode))
        .route("/api/frame", get(get_frame))
        .route("/api/map/:channel", get(get_map))
        .route("/api/classify", post(post_classify))
        .route("/api/overlay", get(get_overlay))
        .fallback(|| async { ServiceError::NotFound("no such endpoint".into()) })
        .with_state(state)
}

pub async fn serve(options: ServerOptions, addr: SocketAddr) -> Result<()> {
    let state = start(options)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

/// Switch modes and start the matching worker. Rejected while an imaging
/// sequence is running.
pub fn set_mode(state: &SharedState, mode: Mode) -> Result<Status> {
    let generation = {
        let mut s = state.lock();
        if s.imaging.is_some() {
            return Err(ServiceError::ImagingInProgress);
        }
        s.generation += 1;
        s.mode = mode;
        if mode == Mode::Imaging {
            s.imaging = Some(Progress {
                done: 0,
                total: s.config.channels.len(),
            });
        }
        s.generation
    };
    let worker = state.clone();
    match mode {
        Mode::Imaging => tokio::spawn(imaging_run(worker, generation)),
        Mode::Video | Mode::Manual => tokio::spawn(live_loop(worker, generation)),
    };
    Ok(state.status())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Task(e.to_string()))?
}

fn heatmap_png(map: &doci::pipeline::DociMap) -> Result<Vec<u8>> {
    let (low, high) = HEATMAP_RANGE;
    Ok(encode_png(&render_heatmap(
        map,
        Palette::Hot,
        Normalization::Fixed { low, high },
    ))?)
}

async fn live_loop(state: SharedState, generation: u64) {
    loop {
        let (mode, mut config, channel, seq) = {
            let s = state.lock();
            if s.generation != generation {
                return;
            }
            (s.mode, s.config.clone(), s.channel, s.seq)
        };
        // Fresh noise per frame, reproducible from the configured seed.
        config.seed = config.seed.wrapping_add(seq + 1);
        let phantom = state.phantom.clone();
        let gate_width_ns = config.gate.width_ns;
        let rendered = blocking(move || -> Result<(Option<u8>, FrameKind, Vec<u8>)> {
            match mode {
                Mode::Video => {
                    let raster = blank_window_frame(&phantom, &config)?;
                    Ok((
                        None,
                        FrameKind::Intensity,
                        encode_png(&render_intensity(&raster))?,
                    ))
                }
                _ => {
                    let map = compute_doci_default(
                        &acquire_channel(&phantom, channel, &config)?,
                        channel,
                    )?;
                    Ok((Some(channel), FrameKind::Doci, heatmap_png(&map)?))
                }
            }
        })
        .await;
        match rendered {
            Ok((channel, kind, png)) => {
                let meta = frame_meta(&state, channel, kind, mode, gate_width_ns);
                state.publish(generation, meta, png);
            }
            Err(e) => state.record_error(generation, &e),
        }
        tokio::time::sleep(state.frame_interval).await;
    }
}

fn frame_meta(
    state: &AppState,
    channel: Option<u8>,
    kind: FrameKind,
    mode: Mode,
    gate_width_ns: f64,
) -> FrameMeta {
    FrameMeta {
        seq: 0,
        channel,
        kind,
        mode,
        timestamp: rfc3339_now(),
        width: state.phantom.width(),
        height: state.phantom.height(),
        gate_width_ns,
    }
}

async fn imaging_run(state: SharedState, generation: u64) {
    // Config is frozen for the whole sequence.
    let config = state.lock().config.clone();
    let mut frames = Vec::new();
    let mut maps = Vec::new();
    let mut failure = None;
    for (i, &channel) in config.channels.iter().enumerate() {
        if !state.is_current(generation) {
            return;
        }
        let (phantom, cfg) = (state.phantom.clone(), config.clone());
        let result = blocking(move || {
            let triplet = acquire_channel(&phantom, channel, &cfg)?;
            let map = compute_doci_default(&triplet, channel)?;
            let png = heatmap_png(&map)?;
            Ok((triplet, map, png))
        })
        .await;
        match result {
            Ok((triplet, map, png)) => {
                let meta = frame_meta(
                    &state,
                    Some(channel),
                    FrameKind::Doci,
                    Mode::Imaging,
                    config.gate.width_ns,
                );
                state.publish(generation, meta, png);
                frames.push(ChannelFrames { channel, triplet });
                maps.push(map);
                if let Some(p) = state.lock().imaging.as_mut() {
                    p.done = i + 1;
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        if !state.channel_interval.is_zero() {
            tokio::time::sleep(state.channel_interval).await;
        }
    }

    let mut archive = None;
    if failure.is_none() {
        let stack = ChannelStack {
            phantom_id: state.phantom.id.clone(),
            pixel_pitch_mm: state.phantom.pixel_pitch_mm,
            config: config.clone(),
            channels: frames,
        };
        let dir = state.data_dir.join("stacks").join(timestamp_dir_name());
        let target = dir.clone();
        match blocking(move || Ok(write_stack(&target, &stack, Some(rfc3339_now()))?)).await {
            Ok(_) => archive = Some(dir),
            Err(e) => failure = Some(e),
        }
    }

    let next = {
        let mut s = state.lock();
        if s.generation != generation {
            return;
        }
        if let Some(e) = &failure {
            tracing::warn!(code = e.code(), "imaging failed: {e}");
            s.last_error = Some(e.body());
        }
        if !maps.is_empty() {
            s.maps = Some(Arc::new(DociStack { maps }));
        }
        if archive.is_some() {
            s.last_archive = archive;
        }
        s.imaging = None;
        s.mode = Mode::Manual;
        s.generation += 1;
        s.generation
    };
    tokio::spawn(live_loop(state, next));
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T> {
    serde_json::from_slice(body)
        .map_err(|e| ServiceError::BadRequest(format!("malformed request body: {e}")))
}

async fn get_status(State(state): State<SharedState>) -> Json<Status> {
    Json(state.status())
}

async fn get_config(State(state): State<SharedState>) -> Json<AcquisitionConfig> {
    Json(state.lock().config.clone())
}

/// Partial update of the acquisition settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub gate_width_ns: Option<f64>,
    /// Channel shown in manual mode.
    pub channel: Option<u8>,
    /// Channels covered by an imaging sequence.
    pub channels: Option<Vec<u8>>,
    pub pulses_averaged: Option<u64>,
    pub noise: Option<NoiseConfig>,
    pub seed: Option<u64>,
    pub psf_sigma_px: Option<f64>,
}

impl ConfigPatch {
    pub fn apply(&self, config: &AcquisitionConfig) -> Result<AcquisitionConfig> {
        let mut next = config.clone();
        if let Some(w) = self.gate_width_ns {
            if !(w.is_finite() && w > 0.0) {
                return Err(ServiceError::BadRequest(format!(
                    "gate width must be positive, got {w}"
                )));
            }
            next = next.with_gate_width(w);
        }
        if let Some(channels) = &self.channels {
            next.channels = ChannelSet::new(channels.clone())?.0;
        }
        if let Some(n) = self.pulses_averaged {
            next.pulses_averaged = n;
        }
        if let Some(noise) = self.noise {
            next.noise = noise;
        }
        if let Some(seed) = self.seed {
            next.seed = seed;
        }
        if let Some(sigma) = self.psf_sigma_px {
            next.psf_sigma_px = sigma;
        }
        next.validate()?;
        Ok(next)
    }
}

async fn put_config(State(state): State<SharedState>, body: Bytes) -> Result<Json<Status>> {
    let patch: ConfigPatch = parse_body(&body)?;
    {
        let mut s = state.lock();
        if s.imaging.is_some() {
            return Err(ServiceError::ImagingInProgress);
        }
        if let Some(ch) = patch.channel {
            doci::channels::FilterChannel::get(ch)?;
        }
        s.config = patch.apply(&s.config)?;
        if let Some(ch) = patch.channel {
            s.channel = ch;
        }
    }
    Ok(Json(state.status()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModeRequest {
    Bare(Mode),
    Wrapped { mode: Mode },
}

async fn post_mode(State(state): State<SharedState>, body: Bytes) -> Result<Json<Status>> {
    let mode = match parse_body::<ModeRequest>(&body)? {
        ModeRequest::Bare(m) | ModeRequest::Wrapped { mode: m } => m,
    };
    Ok(Json(set_mode(&state, mode)?))
}

#[derive(Serialize)]
struct FrameJson<'a> {
    #[serde(flatten)]
    meta: &'a FrameMeta,
    png_base64: String,
}

fn frame_response(frame: &Frame, as_json: bool) -> Result<Response> {
    if as_json {
        let body = FrameJson {
            meta: &frame.meta,
            png_base64: base64::engine::general_purpose::STANDARD.encode(&frame.png),
        };
        return Ok(Json(body).into_response());
    }
    let meta = serde_json::to_string(&frame.meta)?;
    let mut resp = (StatusCode::OK, frame.png.clone()).into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    headers.insert("x-frame-seq", HeaderValue::from(frame.meta.seq));
    headers.insert(
        "x-frame-meta",
        HeaderValue::from_str(&meta).map_err(|e| ServiceError::Task(e.to_string()))?,
    );
    Ok(resp)
}

/// Long-poll for the first frame newer than `since`.
async fn get_frame(
    State(state): State<SharedState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response> {
    let since = match q.get("since") {
        Some(v) => v.parse::<u64>().map_err(|_| {
            ServiceError::BadRequest(format!("`since` must be an integer, got `{v}`"))
        })?,
        None => 0,
    };
    let as_json = match q.get("format").map(String::as_str) {
        None | Some("png") => false,
        Some("json") => true,
        Some(other) => {
            return Err(ServiceError::BadRequest(format!(
                "unknown frame format `{other}`"
            )))
        }
    };
    let mut rx = state.notify.subscribe();
    let deadline = Instant::now() + state.long_poll_timeout;
    loop {
        if let Some(frame) = state.latest_after(since) {
            return frame_response(&frame, as_json);
        }
        match tokio::time::timeout_at(deadline, rx.changed()).await {
            Ok(Ok(())) => continue,
            Ok(Err(_)) | Err(_) => return Ok(StatusCode::NO_CONTENT.into_response()),
        }
    }
}

fn png_response(png: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], png).into_response()
}

/// Heatmap of one channel from the last imaging sequence.
async fn get_map(
    State(state): State<SharedState>,
    Path(channel): Path<String>,
) -> Result<Response> {
    let channel: u8 = channel
        .parse()
        .map_err(|_| ServiceError::NotFound(format!("unknown channel `{channel}`")))?;
    doci::channels::FilterChannel::get(channel)?;
    let maps = state
        .lock()
        .maps
        .clone()
        .ok_or(ServiceError::NoImagingData)?;
    let png = blocking(move || heatmap_png(maps.get(channel)?)).await?;
    Ok(png_response(png))
}

async fn get_overlay(State(state): State<SharedState>) -> Result<Response> {
    let overlay = state
        .lock()
        .overlay
        .clone()
        .ok_or_else(|| ServiceError::NotFound("no classification has run".into()))?;
    Ok(png_response(overlay.as_ref().clone()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ChannelsField {
    List(Vec<u8>),
    Text(String),
}

impl ChannelsField {
    pub fn to_set(&self) -> doci::Result<ChannelSet> {
        match self {
            ChannelsField::List(v) => ChannelSet::new(v.clone()),
            ChannelsField::Text(t) => ChannelSet::parse(t),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub channels: ChannelsField,
    /// Labelled training regions; sampled from the ground truth when absent.
    #[serde(default)]
    pub rois: Option<Vec<TrainingRoi>>,
    #[serde(default)]
    pub block_size_mm: Option<f64>,
    #[serde(default)]
    pub mode: Option<EvalMode>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyResponse {
    pub row: MetricsRow,
    pub mode: EvalMode,
    pub training_rois: usize,
    pub model: LdaModel,
    pub overlay_png_base64: String,
}

async fn post_classify(
    State(state): State<SharedState>,
    body: Bytes,
) -> Result<Json<ClassifyResponse>> {
    let req: ClassifyRequest = parse_body(&body)?;
    let channels = req.channels.to_set()?;
    let maps = state
        .lock()
        .maps
        .clone()
        .ok_or(ServiceError::NoImagingData)?;
    for &c in channels.channels() {
        maps.get(c)?;
    }
    let phantom = state.phantom.clone();
    let (resp, png) = blocking(move || {
        let mut config = ClassifierConfig::default();
        if let Some(b) = req.block_size_mm {
            config.block_size_mm = b;
        }
        if let Some(m) = req.mode {
            config.mode = m;
        }
        let mut ev = Evaluator::new(
            &maps,
            &phantom.labels,
            phantom.pixel_pitch_mm,
            config.clone(),
        )?;
        if let Some(rois) = req.rois {
            ev = ev.with_rois(rois);
        }
        let result = ev.evaluate(&channels)?;
        let png = encode_png(&render_overlay(&ev.grid, &result.truth, &result.predicted)?)?;
        Ok((
            ClassifyResponse {
                row: result.row,
                mode: config.mode,
                training_rois: ev.rois.len(),
                model: result.model,
                overlay_png_base64: base64::engine::general_purpose::STANDARD.encode(&png),
            },
            png,
        ))
    })
    .await?;
    state.lock().overlay = Some(Arc::new(png));
    Ok(Json(resp))
}
