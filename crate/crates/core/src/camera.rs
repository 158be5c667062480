//! Simulated gated camera.
//!
//! Expected counts per pixel are
//! `photons_per_unit * pulses_averaged * blur(illumination * yield * M) + offsets`,
//! where `M` is the closed-form gated integral for the pixel's lifetime and
//! amplitude. Noise is one Poisson draw per gate read with that mean
//! (the sum of per-pulse Poisson counts has the same law) plus Gaussian
//! read noise.

use ndarray::{Array2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{FilterChannel, BLANK_CHANNEL, FIRST_CHANNEL, LAST_CHANNEL};
use crate::error::{invalid, DociError, Result};
use crate::lifetime::{window_integral, Fluorophore, GateConfig, PumpPulse};
use crate::phantom::{Phantom, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub shot_noise: bool,
    pub read_noise_sigma: f64,
    /// Additive offset present in all three gates.
    pub dark_level: f64,
    /// Expected photoelectrons per unit of gated emission per pulse.
    pub photons_per_unit: f64,
}

/// Photon scale at which the default dye-drop scene shows an average
/// 50x50 ROI DOCI standard deviation of about 0.0068 on channel 2.
pub const CALIBRATED_PHOTONS_PER_UNIT: f64 = 3.4e-4;

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            shot_noise: true,
            read_noise_sigma: 2.0,
            dark_level: 10.0,
            photons_per_unit: CALIBRATED_PHOTONS_PER_UNIT,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig {
            shot_noise: false,
            read_noise_sigma: 0.0,
            dark_level: 0.0,
            photons_per_unit: 1e-4,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        !self.shot_noise && self.read_noise_sigma == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub pulse: PumpPulse,
    pub gate: GateConfig,
    /// Filter channels to acquire, in acquisition order.
    pub channels: Vec<u8>,
    pub pulses_averaged: u64,
    pub noise: NoiseConfig,
    pub seed: u64,
    /// Gaussian PSF sigma in pixels; 0 disables the blur.
    pub psf_sigma_px: f64,
    /// Common-mode room light per ns of gate, in emission units.
    pub ambient_per_ns: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        let pulse = PumpPulse::default();
        AcquisitionConfig {
            pulse,
            gate: GateConfig::for_pulse(&pulse, 20.0),
            channels: (FIRST_CHANNEL..=LAST_CHANNEL).collect(),
            // Half a second at 500 kHz.
            pulses_averaged: 250_000,
            noise: NoiseConfig::default(),
            seed: 0,
            psf_sigma_px: 0.8,
            ambient_per_ns: 0.0,
        }
    }
}

impl AcquisitionConfig {
    pub fn noiseless() -> Self {
        AcquisitionConfig {
            noise: NoiseConfig::noiseless(),
            ..Default::default()
        }
    }

    /// Set the gate width and re-place the windows with the default layout.
    pub fn with_gate_width(mut self, width_ns: f64) -> Self {
        self.gate = GateConfig::for_pulse(&self.pulse, width_ns);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.gate.validate(&self.pulse)?;
        if self.pulses_averaged == 0 {
            return Err(invalid("pulses_averaged must be at least 1"));
        }
        let n = &self.noise;
        if !(n.read_noise_sigma >= 0.0) || !(n.dark_level >= 0.0) || !(n.photons_per_unit > 0.0) {
            return Err(invalid(
                "noise parameters must be nonnegative with a positive photon scale",
            ));
        }
        if !(self.psf_sigma_px >= 0.0) || !(self.ambient_per_ns >= 0.0) {
            return Err(invalid("psf sigma and ambient light must be nonnegative"));
        }
        if self.channels.is_empty() {
            return Err(invalid("no channels to acquire"));
        }
        for &c in &self.channels {
            FilterChannel::slot_of(c)?;
        }
        Ok(())
    }

    fn count_scale(&self) -> f64 {
        self.noise.photons_per_unit * self.pulses_averaged as f64
    }

    fn offset(&self) -> f64 {
        self.noise.dark_level + self.count_scale() * self.ambient_per_ns * self.gate.width_ns
    }
}

/// Reference, decay and background frames of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTriplet {
    pub reference: Raster,
    pub decay: Raster,
    pub background: Raster,
}

impl FrameTriplet {
    pub fn shape(&self) -> (usize, usize) {
        self.reference.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.shape();
        for r in [&self.decay, &self.background] {
            if r.dim() != dim {
                return Err(DociError::ShapeMismatch {
                    expected: dim,
                    found: r.dim(),
                });
            }
        }
        for r in [&self.reference, &self.decay, &self.background] {
            if let Some(((row, col), _)) = r.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(DociError::NonFinite { row, col });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrames {
    pub channel: u8,
    pub triplet: FrameTriplet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    pub phantom_id: String,
    pub pixel_pitch_mm: f64,
    pub config: AcquisitionConfig,
    pub channels: Vec<ChannelFrames>,
}

impl ChannelStack {
    pub fn triplet(&self, channel: u8) -> Result<&FrameTriplet> {
        self.channels
            .iter()
            .find(|c| c.channel == channel)
            .map(|c| &c.triplet)
            .ok_or(DociError::UnknownChannel(channel))
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.channels.first().map(|c| c.triplet.shape())
    }
}

/// Gated reference and decay integrals for unit amplitude over a lifetime
/// raster. Consecutive equal lifetimes reuse the previous result.
fn unit_integrals(lifetimes: &Raster, pulse: &PumpPulse, gate: &GateConfig) -> (Raster, Raster) {
    let (h, w) = lifetimes.dim();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut reference = Vec::with_capacity(w);
            let mut decay = Vec::with_capacity(w);
            let mut last = (f64::NAN, 0.0, 0.0);
            for c in 0..w {
                let tau = lifetimes[[r, c]];
                if tau != last.0 {
                    let f = Fluorophore {
                        amplitude: 1.0,
                        lifetime_ns: tau,
                    };
                    let (rs, width) = gate.reference_window();
                    let (ds, _) = gate.decay_window();
                    last = (
                        tau,
                        window_integral(pulse, &f, rs, width),
                        window_integral(pulse, &f, ds, width),
                    );
                }
                reference.push(last.1);
                decay.push(last.2);
            }
            (reference, decay)
        })
        .collect();
    let mut reference = Array2::zeros((h, w));
    let mut decay = Array2::zeros((h, w));
    for (r, (ref_row, dec_row)) in rows.into_iter().enumerate() {
        for c in 0..w {
            reference[[r, c]] = ref_row[c];
            decay[[r, c]] = dec_row[c];
        }
    }
    (reference, decay)
}

/// Noiseless expected counts for one channel.
pub fn expected_triplet(
    phantom: &Phantom,
    channel: &FilterChannel,
    config: &AcquisitionConfig,
) -> Result<FrameTriplet> {
    phantom.validate()?;
    config.pulse.validate()?;
    config.gate.validate(&config.pulse)?;
    let (unit_ref, unit_dec) =
        unit_integrals(phantom.lifetime_for(channel), &config.pulse, &config.gate);
    let mut weight = Array2::zeros(phantom.shape());
    Zip::from(&mut weight)
        .and(&phantom.amplitude)
        .and(&phantom.illumination)
        .and(&phantom.labels)
        .for_each(|w, &a, &ill, &l| *w = a * ill * phantom.yield_for(l, channel));
    let scale = config.count_scale();
    let offset = config.offset();
    let render = |unit: &Raster| {
        let mut signal = &weight * unit;
        if config.psf_sigma_px > 0.0 {
            signal = gaussian_blur(&signal, config.psf_sigma_px);
        }
        signal.mapv_inplace(|v| scale * v + offset);
        signal
    };
    Ok(FrameTriplet {
        reference: render(&unit_ref),
        decay: render(&unit_dec),
        background: Array2::from_elem(phantom.shape(), offset),
    })
}

/// Intensity frame through the blank window: the reference gate without a
/// filter, summing every channel's emission with unit yield on channel 2's
/// lifetimes.
pub fn blank_window_frame(phantom: &Phantom, config: &AcquisitionConfig) -> Result<Raster> {
    let mut cfg = config.clone();
    cfg.channels = vec![FIRST_CHANNEL];
    let ch = FilterChannel::get(FIRST_CHANNEL)?;
    let expected = expected_triplet(phantom, &ch, &cfg)?;
    let mut rng = channel_rng(config.seed, BLANK_CHANNEL);
    let mut frame = &expected.reference - &expected.background;
    if !config.noise.is_noiseless() {
        frame = sample(&expected.reference, &config.noise, &mut rng) - &expected.background;
    }
    Ok(frame.mapv(|v| v.max(0.0)))
}

/// Independent random stream per channel so parallel acquisition is
/// reproducible.
pub fn channel_rng(seed: u64, channel: u8) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(channel as u64 + 0x9E37_79B9)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample(expected: &Raster, noise: &NoiseConfig, rng: &mut ChaCha8Rng) -> Raster {
    let read = Normal::new(0.0, noise.read_noise_sigma.max(0.0)).unwrap();
    expected.mapv(|mean| {
        let mut v = if noise.shot_noise && mean > 0.0 {
            Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(mean)
        } else {
            mean
        };
        if noise.read_noise_sigma > 0.0 {
            v += read.sample(rng);
        }
        v.max(0.0)
    })
}

/// One noisy draw around `expected` for `channel`.
pub fn sample_triplet(
    expected: &FrameTriplet,
    noise: &NoiseConfig,
    seed: u64,
    channel: u8,
) -> FrameTriplet {
    if noise.is_noiseless() {
        return expected.clone();
    }
    let mut rng = channel_rng(seed, channel);
    FrameTriplet {
        reference: sample(&expected.reference, noise, &mut rng),
        decay: sample(&expected.decay, noise, &mut rng),
        background: sample(&expected.background, noise, &mut rng),
    }
}

pub fn acquire_channel(
    phantom: &Phantom,
    channel: u8,
    config: &AcquisitionConfig,
) -> Result<FrameTriplet> {
    let ch = FilterChannel::get(channel)?;
    let expected = expected_triplet(phantom, &ch, config)?;
    Ok(sample_triplet(
        &expected,
        &config.noise,
        config.seed,
        channel,
    ))
}

/// Acquire every configured channel. Channels run in parallel; output is
/// independent of scheduling.
pub fn acquire(phantom: &Phantom, config: &AcquisitionConfig) -> Result<ChannelStack> {
    config.validate()?;
    phantom.validate()?;
    let channels = config
        .channels
        .par_iter()
        .map(|&channel| {
            acquire_channel(phantom, channel, config)
                .map(|triplet| ChannelFrames { channel, triplet })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelStack {
        phantom_id: phantom.id.clone(),
        pixel_pitch_mm: phantom.pixel_pitch_mm,
        config: config.clone(),
        channels,
    })
}

/// Normalized Gaussian taps for `sigma`, radius `ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil().max(1.0) as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Half-sample symmetric reflection: `-1 -> 0`, `n -> n - 1`.
fn reflect(i: isize, n: isize) -> usize {
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

fn blur_axis(src: &Raster, kernel: &[f64], along_rows: bool) -> Raster {
    let (h, w) = src.dim();
    let radius = (kernel.len() / 2) as isize;
    let mut out = Array2::zeros((h, w));
    let n = if along_rows { w } else { h } as isize;
    Zip::indexed(&mut out).par_for_each(|(r, c), dst| {
        let mut acc = 0.0;
        for (k, &tap) in kernel.iter().enumerate() {
            let offset = k as isize - radius;
            let v = if along_rows {
                src[[r, reflect(c as isize + offset, n)]]
            } else {
                src[[reflect(r as isize + offset, n), c]]
            };
            acc += tap * v;
        }
        *dst = acc;
    });
    out
}

/// Separable Gaussian blur with reflective edges. With a symmetric kernel
/// the reflected operator is symmetric, so the raster sum is preserved.
pub fn gaussian_blur(src: &Raster, sigma: f64) -> Raster {
    if sigma <= 0.0 {
        return src.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let tmp = blur_axis(src, &kernel, true);
    blur_axis(&tmp, &kernel, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifetime::doci_value;
    use crate::phantom::{label, Illumination};
    use std::collections::BTreeMap;

    pub(crate) fn uniform_phantom(h: usize, w: usize, tau: f64, amp: f64) -> Phantom {
        Phantom {
            id: "uniform".into(),
            pixel_pitch_mm: 0.05,
            lifetime_ns: vec![Array2::from_elem((h, w), tau); 9],
            amplitude: Array2::from_elem((h, w), amp),
            illumination: Illumination::Uniform.render(h, w),
            labels: Array2::from_elem((h, w), label::FIBROUS),
            class_yield: BTreeMap::new(),
        }
    }

    fn quiet() -> AcquisitionConfig {
        AcquisitionConfig {
            psf_sigma_px: 0.0,
            ..AcquisitionConfig::noiseless()
        }
    }

    #[test]
    fn uniform_ratio_matches_model() {
        let p = uniform_phantom(8, 8, 2.0, 1.0);
        let cfg = quiet();
        let t = expected_triplet(&p, &FilterChannel::get(5).unwrap(), &cfg).unwrap();
        let expected = doci_value(&cfg.pulse, &Fluorophore::new(1.0, 2.0).unwrap(), &cfg.gate)
            .unwrap()
            .value();
        for ((r, d), b) in t
            .reference
            .iter()
            .zip(t.decay.iter())
            .zip(t.background.iter())
        {
            assert!((((d - b) / (r - b)) - expected).abs() < 1e-9);
            assert_eq!(*r, t.reference[[0, 0]]);
        }
    }

    #[test]
    fn amplitude_is_linear() {
        let cfg = quiet();
        let ch = FilterChannel::get(3).unwrap();
        let a = expected_triplet(&uniform_phantom(4, 4, 1.5, 1.0), &ch, &cfg).unwrap();
        let b = expected_triplet(&uniform_phantom(4, 4, 1.5, 2.0), &ch, &cfg).unwrap();
        assert_eq!(b.reference, a.reference.mapv(|v| 2.0 * v));
        assert_eq!(b.decay, a.decay.mapv(|v| 2.0 * v));
        assert_eq!(a.background, b.background);
    }

    #[test]
    fn noiseless_acquire_equals_expected() {
        let p = uniform_phantom(6, 5, 3.0, 1.0);
        let cfg = AcquisitionConfig::noiseless();
        let stack = acquire(&p, &cfg).unwrap();
        for c in &stack.channels {
            let e = expected_triplet(&p, &FilterChannel::get(c.channel).unwrap(), &cfg).unwrap();
            assert_eq!(c.triplet, e);
        }
    }

    #[test]
    fn seeded_acquisition_is_reproducible() {
        let p = uniform_phantom(6, 5, 3.0, 1.0);
        let cfg = AcquisitionConfig {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(acquire(&p, &cfg).unwrap(), acquire(&p, &cfg).unwrap());
        let other = AcquisitionConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(acquire(&p, &cfg).unwrap(), acquire(&p, &other).unwrap());
    }

    #[test]
    fn blur_preserves_sum() {
        let mut src = Array2::zeros((17, 23));
        src[[0, 0]] = 5.0;
        src[[16, 22]] = 1.0;
        src[[8, 3]] = 2.5;
        let out = gaussian_blur(&src, 2.5);
        assert!((out.sum() - src.sum()).abs() / src.sum() < 1e-12);
    }

    #[test]
    fn reflect_bounces() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(-7, 5), 3);
        assert_eq!(reflect(12, 5), 2);
    }

    #[test]
    fn config_validation() {
        let cfg = AcquisitionConfig {
            pulses_averaged: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = AcquisitionConfig {
            channels: vec![11],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(DociError::UnknownChannel(11))));
    }
}
