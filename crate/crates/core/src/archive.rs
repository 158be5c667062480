//! Stack directories: `manifest.json` plus one raster file per
//! (channel, plane).
//!
//! The manifest checksum covers every manifest field except `created_at`
//! and the checksum itself, so two archives written from the same inputs
//! differ only in their timestamp.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::camera::{AcquisitionConfig, ChannelFrames, ChannelStack, FrameTriplet};
use crate::channels::FilterChannel;
use crate::error::{DociError, Result};
use crate::format::{self, RasterData};
use crate::pipeline::{DociMap, DociStack};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    Reference,
    Decay,
    Background,
    Doci,
    Mask,
}

impl Plane {
    pub fn name(self) -> &'static str {
        match self {
            Plane::Reference => "reference",
            Plane::Decay => "decay",
            Plane::Background => "background",
            Plane::Doci => "doci",
            Plane::Mask => "mask",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub channel: u8,
    pub plane: Plane,
    pub center_nm: Option<f64>,
    pub passband_nm: (f64, f64),
    pub dtype: String,
    pub width: usize,
    pub height: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub phantom_id: String,
    pub pixel_pitch_mm: f64,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub config: AcquisitionConfig,
    /// Denominator floor per map channel, for DOCI map archives.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub floors: Vec<(u8, f64)>,
    pub files: Vec<FileEntry>,
    /// Excluded from `checksum`.
    #[serde(default)]
    pub created_at: Option<String>,
    pub checksum: String,
}

impl Manifest {
    /// SHA-256 over the canonical JSON of the manifest with `created_at`
    /// and `checksum` removed.
    pub fn compute_checksum(&self) -> Result<String> {
        canonical_checksum(serde_json::to_value(self)?)
    }

    pub fn entry(&self, channel: u8, plane: Plane) -> Option<&FileEntry> {
        self.files
            .iter()
            .find(|f| f.channel == channel && f.plane == plane)
    }

    pub fn channels(&self) -> Vec<u8> {
        let mut c: Vec<u8> = self.files.iter().map(|f| f.channel).collect();
        c.dedup();
        c
    }
}

/// Checksum of a JSON tree with keys sorted. Working on the raw tree means
/// renamed or unknown keys are caught even where serde would default them.
fn canonical_checksum(mut value: serde_json::Value) -> Result<String> {
    let obj = value
        .as_object_mut()
        .ok_or_else(|| DociError::Manifest("manifest is not an object".into()))?;
    obj.remove("created_at");
    obj.remove("checksum");
    Ok(sha256_hex(&serde_json::to_vec(&value)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_name(channel: u8, plane: Plane) -> String {
    format!("ch{channel:02}_{}.docr", plane.name())
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<FileEntry>,
}

impl Writer<'_> {
    fn put(&mut self, channel: u8, plane: Plane, raster: &RasterData) -> Result<()> {
        let ch = FilterChannel::get(channel)?;
        let bytes = format::encode(raster)?;
        let name = file_name(channel, plane);
        fs::write(self.dir.join(&name), &bytes)?;
        let (height, width) = raster.dim();
        self.files.push(FileEntry {
            name,
            channel,
            plane,
            center_nm: ch.center_nm,
            passband_nm: ch.passband_nm,
            dtype: raster.dtype().name().to_string(),
            width,
            height,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }
}

fn finish(dir: &Path, mut manifest: Manifest) -> Result<Manifest> {
    manifest.checksum = manifest.compute_checksum()?;
    fs::write(
        dir.join(MANIFEST_NAME),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Write frames as `f32` rasters. Values are narrowed from `f64`.
pub fn write_stack(
    dir: impl AsRef<Path>,
    stack: &ChannelStack,
    created_at: Option<String>,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (height, width) = stack
        .shape()
        .ok_or_else(|| DociError::Manifest("stack has no channels".into()))?;
    let mut w = Writer {
        dir,
        files: Vec::new(),
    };
    for c in &stack.channels {
        let t = &c.triplet;
        w.put(
            c.channel,
            Plane::Reference,
            &RasterData::from_f64(&t.reference),
        )?;
        w.put(c.channel, Plane::Decay, &RasterData::from_f64(&t.decay))?;
        w.put(
            c.channel,
            Plane::Background,
            &RasterData::from_f64(&t.background),
        )?;
    }
    finish(
        dir,
        Manifest {
            version: MANIFEST_VERSION,
            phantom_id: stack.phantom_id.clone(),
            pixel_pitch_mm: stack.pixel_pitch_mm,
            width,
            height,
            seed: stack.config.seed,
            config: stack.config.clone(),
            floors: Vec::new(),
            files: w.files,
            created_at,
            checksum: String::new(),
        },
    )
}

/// Parse and verify the manifest checksum.
pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let bytes = fs::read(dir.as_ref().join(MANIFEST_NAME))?;
    let raw: serde_json::Value = serde_json::from_slice(&bytes)?;
    let manifest: Manifest = serde_json::from_value(raw.clone())?;
    if manifest.version != MANIFEST_VERSION {
        return Err(DociError::Manifest(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    if canonical_checksum(raw)? != manifest.checksum {
        return Err(DociError::ChecksumMismatch(MANIFEST_NAME.to_string()));
    }
    Ok(manifest)
}

fn load(dir: &Path, manifest: &Manifest, channel: u8, plane: Plane) -> Result<RasterData> {
    let entry = manifest.entry(channel, plane).ok_or_else(|| {
        DociError::Manifest(format!(
            "missing {} plane for channel {channel}",
            plane.name()
        ))
    })?;
    let bytes = fs::read(dir.join(&entry.name))?;
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(DociError::ChecksumMismatch(entry.name.clone()));
    }
    let raster = format::decode(&bytes)?;
    if raster.dim() != (entry.height, entry.width) {
        return Err(DociError::ShapeMismatch {
            expected: (entry.height, entry.width),
            found: raster.dim(),
        });
    }
    Ok(raster)
}

fn load_f64(
    dir: &Path,
    manifest: &Manifest,
    channel: u8,
    plane: Plane,
) -> Result<ndarray::Array2<f64>> {
    load(dir, manifest, channel, plane)?
        .to_f64()
        .ok_or_else(|| {
            DociError::Manifest(format!(
                "{} plane of channel {channel} is not numeric",
                plane.name()
            ))
        })
}

/// Read a stack written by [`write_stack`], verifying every checksum.
pub fn read_stack(dir: impl AsRef<Path>) -> Result<(ChannelStack, Manifest)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut channels = Vec::new();
    for channel in manifest.channels() {
        let triplet = FrameTriplet {
            reference: load_f64(dir, &manifest, channel, Plane::Reference)?,
            decay: load_f64(dir, &manifest, channel, Plane::Decay)?,
            background: load_f64(dir, &manifest, channel, Plane::Background)?,
        };
        channels.push(ChannelFrames { channel, triplet });
    }
    let stack = ChannelStack {
        phantom_id: manifest.phantom_id.clone(),
        pixel_pitch_mm: manifest.pixel_pitch_mm,
        config: manifest.config.clone(),
        channels,
    };
    Ok((stack, manifest))
}

/// DOCI values as `f32` plus a validity mask plane per channel.
pub fn write_maps(
    dir: impl AsRef<Path>,
    maps: &DociStack,
    source: &Manifest,
    created_at: Option<String>,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut w = Writer {
        dir,
        files: Vec::new(),
    };
    let mut floors = Vec::new();
    for m in &maps.maps {
        w.put(m.channel, Plane::Doci, &RasterData::from_f64(&m.values))?;
        w.put(m.channel, Plane::Mask, &RasterData::Mask(m.valid.clone()))?;
        floors.push((m.channel, m.denominator_floor));
    }
    finish(
        dir,
        Manifest {
            floors,
            files: w.files,
            created_at,
            checksum: String::new(),
            ..source.clone()
        },
    )
}

pub fn read_maps(dir: impl AsRef<Path>) -> Result<(DociStack, Manifest)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut maps = Vec::new();
    for channel in manifest.channels() {
        let values = load_f64(dir, &manifest, channel, Plane::Doci)?;
        let valid = load(dir, &manifest, channel, Plane::Mask)?
            .into_mask()
            .ok_or_else(|| {
                DociError::Manifest(format!("mask plane of channel {channel} is not a mask"))
            })?;
        let floor = manifest
            .floors
            .iter()
            .find(|(c, _)| *c == channel)
            .map_or(0.0, |(_, f)| *f);
        maps.push(DociMap {
            values,
            valid,
            channel,
            denominator_floor: floor,
        });
    }
    Ok((DociStack { maps }, manifest))
}
