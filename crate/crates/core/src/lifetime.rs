//! Pulsed-excitation fluorescence model and the DOCI ratio.
//!
//! A square pump pulse with an exponential trailing edge excites a
//! single-exponential fluorophore. The emission is the convolution of the
//! pump with the decay response; the instrument integrates that emission
//! over three equal-width gates (reference, decay, background) and reports
//! `(decay - background) / (reference - background)`.
//!
//! Two evaluation paths are provided: a closed-form piecewise solution used
//! everywhere in the pipeline, and a trapezoidal convolution on a uniform
//! grid used to cross-check it.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DociError, Result};

/// Upper end of the lifetime range the simulator supports, in ns.
pub const MAX_LIFETIME_NS: f64 = 20.0;

/// Below this relative rate difference the fall solution switches to the
/// equal-rate limit.
const EQUAL_RATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fluorophore {
    pub amplitude: f64,
    pub lifetime_ns: f64,
}

impl Fluorophore {
    pub fn new(amplitude: f64, lifetime_ns: f64) -> Result<Self> {
        let f = Fluorophore {
            amplitude,
            lifetime_ns,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lifetime_ns > 0.0) || !self.lifetime_ns.is_finite() {
            return Err(invalid(format!(
                "lifetime must be positive, got {} ns",
                self.lifetime_ns
            )));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(invalid(format!(
                "amplitude must be nonnegative, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }
}

/// Excitation pulse: plateau at `peak_intensity` from t = 0 until
/// `fall_start_ns`, then an exponential fall with constant `fall_tau_ns`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PumpPulse {
    pub peak_intensity: f64,
    pub fall_start_ns: f64,
    pub fall_tau_ns: f64,
    pub pulse_width_ns: f64,
    pub rep_rate_hz: f64,
}

impl Default for PumpPulse {
    fn default() -> Self {
        PumpPulse {
            peak_intensity: 1.0,
            fall_start_ns: 80.0,
            fall_tau_ns: 1.0,
            pulse_width_ns: 80.0,
            rep_rate_hz: 5e5,
        }
    }
}

impl PumpPulse {
    pub fn with_fall_tau(mut self, fall_tau_ns: f64) -> Self {
        self.fall_tau_ns = fall_tau_ns;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("peak_intensity", self.peak_intensity),
            ("fall_start_ns", self.fall_start_ns),
            ("fall_tau_ns", self.fall_tau_ns),
            ("pulse_width_ns", self.pulse_width_ns),
            ("rep_rate_hz", self.rep_rate_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Pump intensity at time `t_ns` (ns after the rising edge).
    pub fn intensity(&self, t_ns: f64) -> f64 {
        if t_ns < 0.0 {
            0.0
        } else if t_ns <= self.fall_start_ns {
            self.peak_intensity
        } else {
            self.peak_intensity * (-(t_ns - self.fall_start_ns) / self.fall_tau_ns).exp()
        }
    }

    fn period_ns(&self) -> f64 {
        1e9 / self.rep_rate_hz
    }
}

pub fn pump_intensity(pulse: &PumpPulse, t_ns: f64) -> f64 {
    pulse.intensity(t_ns)
}

/// Placement of the three equal-width integration windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub width_ns: f64,
    pub reference_start_ns: f64,
    pub decay_start_ns: f64,
    pub background_start_ns: f64,
}

impl GateConfig {
    /// Default placement for `pulse`: reference `[t0 - T, t0]`, decay from
    /// `t0`, background from `t0 + 10 (tau0 + tau_max)` or after the decay
    /// window, whichever is later.
    pub fn for_pulse(pulse: &PumpPulse, width_ns: f64) -> Self {
        Self::for_pulse_with_max_lifetime(pulse, width_ns, MAX_LIFETIME_NS)
    }

    pub fn for_pulse_with_max_lifetime(
        pulse: &PumpPulse,
        width_ns: f64,
        max_lifetime_ns: f64,
    ) -> Self {
        let t0 = pulse.fall_start_ns;
        let settle = t0 + 10.0 * (pulse.fall_tau_ns + max_lifetime_ns);
        GateConfig {
            width_ns,
            reference_start_ns: t0 - width_ns,
            decay_start_ns: t0,
            background_start_ns: settle.max(t0 + width_ns),
        }
    }

    pub fn reference_window(&self) -> (f64, f64) {
        (self.reference_start_ns, self.width_ns)
    }

    pub fn decay_window(&self) -> (f64, f64) {
        (self.decay_start_ns, self.width_ns)
    }

    pub fn background_window(&self) -> (f64, f64) {
        (self.background_start_ns, self.width_ns)
    }

    /// Latest instant covered by any of the three windows.
    pub fn end_ns(&self) -> f64 {
        self.reference_start_ns
            .max(self.decay_start_ns)
            .max(self.background_start_ns)
            + self.width_ns
    }

    pub fn validate(&self, pulse: &PumpPulse) -> Result<()> {
        let t0 = pulse.fall_start_ns;
        if !(self.width_ns > 0.0) || !self.width_ns.is_finite() {
            return Err(invalid(format!(
                "gate width must be positive, got {}",
                self.width_ns
            )));
        }
        if self.reference_start_ns < 0.0 {
            return Err(invalid("reference window starts before the pump rises"));
        }
        // Small slack for windows computed as t0 - T.
        let slack = 1e-9 * t0.max(1.0);
        if self.reference_start_ns + self.width_ns > t0 + slack {
            return Err(invalid(
                "reference window must end at or before the pump fall",
            ));
        }
        if self.decay_start_ns < t0 - slack {
            return Err(invalid("decay window must start at or after the pump fall"));
        }
        if self.background_start_ns < self.decay_start_ns + self.width_ns - slack {
            return Err(invalid("background window overlaps the decay window"));
        }
        if self.end_ns() > pulse.period_ns() {
            return Err(invalid("gate windows extend past the pulse period"));
        }
        Ok(())
    }
}

/// Uniform sampling grid starting at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub end_ns: f64,
    pub dt_ns: f64,
}

impl SampleGrid {
    pub const DEFAULT_DT_NS: f64 = 0.01;

    /// Grid covering every window of `gate`.
    pub fn covering(gate: &GateConfig, dt_ns: f64) -> Self {
        SampleGrid {
            end_ns: gate.end_ns(),
            dt_ns,
        }
    }

    fn len(&self) -> usize {
        (self.end_ns / self.dt_ns).ceil() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmissionMethod {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionCurve {
    pub t_ns: Vec<f64>,
    pub phi: Vec<f64>,
    pub dt_ns: f64,
}

impl EmissionCurve {
    pub fn start_ns(&self) -> f64 {
        self.t_ns[0]
    }

    pub fn end_ns(&self) -> f64 {
        *self.t_ns.last().unwrap()
    }

    /// Linear interpolation of phi at `t`, which must lie in the domain.
    fn value_at(&self, t: f64) -> f64 {
        let x = (t - self.start_ns()) / self.dt_ns;
        let i = (x.floor() as usize).min(self.phi.len() - 1);
        if i + 1 >= self.phi.len() {
            return self.phi[i];
        }
        let frac = x - i as f64;
        self.phi[i] + frac * (self.phi[i + 1] - self.phi[i])
    }
}

/// Closed-form emission phi(t) for the piecewise pump.
pub fn emission_at(pulse: &PumpPulse, f: &Fluorophore, t_ns: f64) -> f64 {
    let scale = pulse.peak_intensity * f.amplitude;
    let tau = f.lifetime_ns;
    let t0 = pulse.fall_start_ns;
    if t_ns <= 0.0 {
        return 0.0;
    }
    if t_ns <= t0 {
        return scale * tau * -(-t_ns / tau).exp_m1();
    }
    let s = t_ns - t0;
    let plateau = scale * tau * -(-t0 / tau).exp_m1();
    plateau * (-s / tau).exp() + scale * fall_kernel(tau, pulse.fall_tau_ns, s)
}

/// Emission driven by the trailing edge alone, per unit pump and amplitude:
/// `g(s) = ∫_0^s exp(-u/tau0) exp(-(s-u)/tau) du`.
fn fall_kernel(tau: f64, tau0: f64, s: f64) -> f64 {
    let rate_gap = 1.0 / tau - 1.0 / tau0;
    let decay = (-s / tau).exp();
    if (rate_gap * tau).abs() < EQUAL_RATE_TOL {
        s * decay
    } else {
        decay * (rate_gap * s).exp_m1() / rate_gap
    }
}

/// `∫_{a}^{b} exp(-s/c) ds` for `0 <= a <= b`.
fn exp_window(c: f64, a: f64, b: f64) -> f64 {
    c * ((-a / c).exp() - (-b / c).exp())
}

/// Exact integral of phi over `[start, start + width]`.
pub fn window_integral(pulse: &PumpPulse, f: &Fluorophore, start_ns: f64, width_ns: f64) -> f64 {
    let scale = pulse.peak_intensity * f.amplitude;
    if scale == 0.0 {
        return 0.0;
    }
    let tau = f.lifetime_ns;
    let tau0 = pulse.fall_tau_ns;
    let t0 = pulse.fall_start_ns;
    let (a, b) = (start_ns.max(0.0), (start_ns + width_ns).max(0.0));
    let mut total = 0.0;

    // Rising part, phi = scale * tau * (1 - exp(-t/tau)).
    let (ra, rb) = (a.min(t0), b.min(t0));
    if rb > ra {
        total += scale * tau * ((rb - ra) - exp_window(tau, ra, rb));
    }

    // Falling part in s = t - t0.
    let (sa, sb) = ((a - t0).max(0.0), (b - t0).max(0.0));
    if sb > sa {
        let plateau = scale * tau * -(-t0 / tau).exp_m1();
        total += plateau * exp_window(tau, sa, sb);
        let rate_gap = 1.0 / tau - 1.0 / tau0;
        let kernel = if (rate_gap * tau).abs() < EQUAL_RATE_TOL {
            // ∫ s exp(-s/tau) ds
            tau * ((sa + tau) * (-sa / tau).exp() - (sb + tau) * (-sb / tau).exp())
        } else {
            (exp_window(tau0, sa, sb) - exp_window(tau, sa, sb)) / (tau0 - tau) * tau * tau0
        };
        total += scale * kernel;
    }
    total
}

/// Sample the emission response on `grid`.
///
/// `Quadrature` evaluates the convolution integral with the composite
/// trapezoid rule, using the exact recursion
/// `phi(t + dt) = phi(t) e^{-dt/tau} + ∫_t^{t+dt} I(u) A e^{-(t+dt-u)/tau} du`
/// with the inner integral taken by one trapezoid.
pub fn emission_response(
    pulse: &PumpPulse,
    f: &Fluorophore,
    grid: &SampleGrid,
    method: EmissionMethod,
) -> Result<EmissionCurve> {
    f.validate()?;
    pulse.validate()?;
    if !(grid.dt_ns > 0.0) || !(grid.end_ns > 0.0) {
        return Err(invalid("sample grid needs positive step and extent"));
    }
    let n = grid.len();
    let t_ns: Vec<f64> = (0..n).map(|i| i as f64 * grid.dt_ns).collect();
    let phi = match method {
        EmissionMethod::ClosedForm => t_ns.iter().map(|&t| emission_at(pulse, f, t)).collect(),
        EmissionMethod::Quadrature => {
            let step_decay = (-grid.dt_ns / f.lifetime_ns).exp();
            let half = 0.5 * grid.dt_ns * f.amplitude;
            let mut phi = Vec::with_capacity(n);
            let mut current = 0.0;
            phi.push(current);
            for w in t_ns.windows(2) {
                current = current * step_decay
                    + half * (pulse.intensity(w[0]) * step_decay + pulse.intensity(w[1]));
                phi.push(current);
            }
            phi
        }
    };
    Ok(EmissionCurve {
        t_ns,
        phi,
        dt_ns: grid.dt_ns,
    })
}

/// Trapezoidal integral of the sampled curve over `[start, start + width]`.
/// Window edges that fall between samples are handled by linear
/// interpolation.
pub fn gated_integral(curve: &EmissionCurve, start_ns: f64, width_ns: f64) -> Result<f64> {
    let end = start_ns + width_ns;
    let tol = 1e-9 * curve.dt_ns;
    if start_ns < curve.start_ns() - tol || end > curve.end_ns() + tol || !(width_ns >= 0.0) {
        return Err(DociError::WindowOutsideDomain {
            start_ns,
            end_ns: end,
            domain_start_ns: curve.start_ns(),
            domain_end_ns: curve.end_ns(),
        });
    }
    let start = start_ns.max(curve.start_ns());
    let end = end.min(curve.end_ns());
    let dt = curve.dt_ns;
    let origin = curve.start_ns();
    // Snap to nodes when within rounding of one.
    let snap = |x: f64| {
        let r = x.round();
        if (x - r).abs() < 1e-7 {
            r
        } else {
            x
        }
    };
    let first_node = snap((start - origin) / dt).ceil() as usize;
    let last_node = (snap((end - origin) / dt).floor() as usize).min(curve.phi.len() - 1);
    if first_node > last_node {
        let (ya, yb) = (curve.value_at(start), curve.value_at(end));
        return Ok(0.5 * (ya + yb) * (end - start));
    }
    let t_first = origin + first_node as f64 * dt;
    let t_last = origin + last_node as f64 * dt;
    let mut total = 0.0;
    if t_first > start {
        total += 0.5 * (curve.value_at(start) + curve.phi[first_node]) * (t_first - start);
    }
    for i in first_node..last_node {
        total += 0.5 * (curve.phi[i] + curve.phi[i + 1]) * dt;
    }
    if end > t_last {
        total += 0.5 * (curve.phi[last_node] + curve.value_at(end)) * (end - t_last);
    }
    Ok(total)
}

/// The three gated integrals of one fluorophore.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateIntegrals {
    pub reference: f64,
    pub decay: f64,
    pub background: f64,
}

impl GateIntegrals {
    pub fn ratio(&self, epsilon: f64) -> Result<f64> {
        let denom = self.reference - self.background;
        if !(denom > epsilon) {
            return Err(DociError::DenominatorTooSmall {
                value: denom,
                floor: epsilon,
            });
        }
        Ok((self.decay - self.background) / denom)
    }
}

/// Knobs for [`doci_value_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DociOptions {
    /// Common-mode light per ns, present in all three gates.
    pub ambient_per_ns: f64,
    /// Denominator floor relative to the reference scale `I0 * A * T`.
    pub epsilon_relative: f64,
}

impl Default for DociOptions {
    fn default() -> Self {
        DociOptions {
            ambient_per_ns: 0.0,
            epsilon_relative: 1e-12,
        }
    }
}

/// Closed-form gated integrals. Emission inside the background gate is
/// neglected, so without ambient light the background integral is zero.
pub fn gate_integrals(
    pulse: &PumpPulse,
    f: &Fluorophore,
    gate: &GateConfig,
    ambient_per_ns: f64,
) -> GateIntegrals {
    let common = ambient_per_ns * gate.width_ns;
    let (rs, w) = gate.reference_window();
    let (ds, _) = gate.decay_window();
    GateIntegrals {
        reference: window_integral(pulse, f, rs, w) + common,
        decay: window_integral(pulse, f, ds, w) + common,
        background: common,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DociValue(pub f64);

impl DociValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn doci_value(pulse: &PumpPulse, f: &Fluorophore, gate: &GateConfig) -> Result<DociValue> {
    doci_value_with(pulse, f, gate, &DociOptions::default())
}

pub fn doci_value_with(
    pulse: &PumpPulse,
    f: &Fluorophore,
    gate: &GateConfig,
    options: &DociOptions,
) -> Result<DociValue> {
    pulse.validate()?;
    f.validate()?;
    gate.validate(pulse)?;
    let integrals = gate_integrals(pulse, f, gate, options.ambient_per_ns);
    let scale = pulse.peak_intensity * f.amplitude.max(f64::MIN_POSITIVE) * gate.width_ns;
    integrals
        .ratio(options.epsilon_relative * scale)
        .map(DociValue)
}

/// DOCI value by trapezoidal convolution at `dt_ns` and `dt_ns / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureDoci {
    pub value: f64,
    pub half_step_value: f64,
}

impl QuadratureDoci {
    pub fn relative_change(&self) -> f64 {
        ((self.value - self.half_step_value) / self.half_step_value).abs()
    }

    pub fn converged(&self, tolerance: f64) -> bool {
        self.relative_change() < tolerance
    }
}

pub fn quadrature_doci(
    pulse: &PumpPulse,
    f: &Fluorophore,
    gate: &GateConfig,
    dt_ns: f64,
) -> Result<QuadratureDoci> {
    gate.validate(pulse)?;
    let at = |dt: f64| -> Result<f64> {
        // The background gate is not needed: emission there is neglected.
        let grid = SampleGrid {
            end_ns: gate.decay_start_ns + gate.width_ns,
            dt_ns: dt,
        };
        let curve = emission_response(pulse, f, &grid, EmissionMethod::Quadrature)?;
        let (rs, w) = gate.reference_window();
        let (ds, _) = gate.decay_window();
        let reference = gated_integral(&curve, rs, w)?;
        let decay = gated_integral(&curve, ds, w)?;
        GateIntegrals {
            reference,
            decay,
            background: 0.0,
        }
        .ratio(1e-12 * pulse.peak_intensity * f.amplitude * w)
    };
    Ok(QuadratureDoci {
        value: at(dt_ns)?,
        half_step_value: at(0.5 * dt_ns)?,
    })
}

/// DOCI values on a lifetime × gate-width grid. Rows follow `lifetimes_ns`,
/// columns follow `gate_widths_ns`; each width uses the default gate
/// placement for `pulse`.
pub fn doci_surface(
    pulse: &PumpPulse,
    lifetimes_ns: &[f64],
    gate_widths_ns: &[f64],
) -> Result<Array2<f64>> {
    if lifetimes_ns.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("all lifetimes must be positive"));
    }
    if gate_widths_ns.iter().any(|&w| !(w > 0.0)) {
        return Err(invalid("all gate widths must be positive"));
    }
    let gates: Vec<GateConfig> = gate_widths_ns
        .iter()
        .map(|&w| GateConfig::for_pulse(pulse, w))
        .collect();
    let mut surface = Array2::zeros((lifetimes_ns.len(), gate_widths_ns.len()));
    for (i, &tau) in lifetimes_ns.iter().enumerate() {
        let f = Fluorophore::new(1.0, tau)?;
        for (j, gate) in gates.iter().enumerate() {
            surface[[i, j]] = doci_value(pulse, &f, gate)?.0;
        }
    }
    Ok(surface)
}
