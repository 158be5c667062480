use doci::lifetime::*;
use proptest::prelude::*;

/// Independent brute-force oracle: composite trapezoid of the convolution
/// integral, then trapezoid over the gates. Written against the model
/// equations only.
fn oracle_doci(tau: f64, tau0: f64, width: f64, dt: f64) -> (f64, f64, f64) {
    let t0 = 80.0;
    let n = ((t0 + width) / dt).round() as usize;
    let pump = |t: f64| {
        if t <= t0 {
            1.0
        } else {
            (-(t - t0) / tau0).exp()
        }
    };
    let decay = (-dt / tau).exp();
    let mut phi = vec![0.0; n + 1];
    for k in 1..=n {
        let (a, b) = ((k - 1) as f64 * dt, k as f64 * dt);
        phi[k] = phi[k - 1] * decay + 0.5 * dt * (pump(a) * decay + pump(b));
    }
    let trap = |i0: usize, i1: usize| {
        (i0..i1)
            .map(|i| 0.5 * dt * (phi[i] + phi[i + 1]))
            .sum::<f64>()
    };
    let r0 = ((t0 - width) / dt).round() as usize;
    let r1 = (t0 / dt).round() as usize;
    let reference = trap(r0, r1);
    let dec = trap(r1, n);
    (dec / reference, reference, dec)
}

fn pulse(tau0: f64) -> PumpPulse {
    PumpPulse::default().with_fall_tau(tau0)
}

fn doci(tau: f64, tau0: f64, width: f64) -> f64 {
    let p = pulse(tau0);
    doci_value(
        &p,
        &Fluorophore::new(1.0, tau).unwrap(),
        &GateConfig::for_pulse(&p, width),
    )
    .unwrap()
    .value()
}

// Frozen from the trapezoid oracle at dt = 0.001 ns (also reproduced by an
// independent numpy run).
const TAU2_T20_ORACLE: f64 = 0.149_990_920_116_93;

#[test]
fn regression_constant_tau_2() {
    let (oracle, _, _) = oracle_doci(2.0, 1.0, 20.0, 0.001);
    assert!((oracle - TAU2_T20_ORACLE).abs() < 1e-11, "oracle {oracle}");
    let closed = doci(2.0, 1.0, 20.0);
    assert!(
        ((closed - TAU2_T20_ORACLE) / TAU2_T20_ORACLE).abs() < 1e-5,
        "closed {closed}"
    );
}

#[test]
fn closed_form_matches_oracle_integrals() {
    for &(tau, tau0, width) in &[
        (0.5, 1.0, 20.0),
        (1.0, 1.0, 20.0),
        (6.0, 1.0, 20.0),
        (2.0, 0.5, 10.0),
        (3.0, 2.0, 40.0),
    ] {
        let (_, reference, dec) = oracle_doci(tau, tau0, width, 0.001);
        let p = pulse(tau0);
        let f = Fluorophore::new(1.0, tau).unwrap();
        let g = gate_integrals(&p, &f, &GateConfig::for_pulse(&p, width), 0.0);
        assert!(
            ((g.reference - reference) / reference).abs() < 1e-5,
            "reference tau={tau}"
        );
        assert!(((g.decay - dec) / dec).abs() < 1e-5, "decay tau={tau}");
    }
}

#[test]
fn quadrature_path_agrees_with_closed_form() {
    for &(tau, tau0) in &[(0.3, 1.0), (1.0, 1.0), (2.0, 0.5), (6.0, 2.0)] {
        let p = pulse(tau0);
        let f = Fluorophore::new(1.3, tau).unwrap();
        let gate = GateConfig::for_pulse(&p, 20.0);
        let grid = SampleGrid {
            end_ns: gate.decay_start_ns + gate.width_ns,
            dt_ns: 0.001,
        };
        let curve = emission_response(&p, &f, &grid, EmissionMethod::Quadrature).unwrap();
        for (start, width) in [gate.reference_window(), gate.decay_window()] {
            let numeric = gated_integral(&curve, start, width).unwrap();
            let exact = window_integral(&p, &f, start, width);
            assert!(
                ((numeric - exact) / exact).abs() < 1e-5,
                "tau={tau} tau0={tau0} start={start}"
            );
        }
    }
}

#[test]
fn closed_form_curve_sampling_matches_quadrature_pointwise() {
    let p = pulse(1.0);
    let f = Fluorophore::new(1.0, 1.0).unwrap();
    let grid = SampleGrid {
        end_ns: 100.0,
        dt_ns: 0.001,
    };
    let exact = emission_response(&p, &f, &grid, EmissionMethod::ClosedForm).unwrap();
    let numeric = emission_response(&p, &f, &grid, EmissionMethod::Quadrature).unwrap();
    // Equal-rate fall region: (1 + s) e^{-s}.
    for s in [0.5f64, 2.0, 5.0] {
        let i = ((80.0 + s) / 0.001).round() as usize;
        let expected = (1.0 + s) * (-s).exp();
        assert!((exact.phi[i] - expected).abs() < 1e-9);
        assert!(((numeric.phi[i] - expected) / expected).abs() < 1e-5);
    }
}

#[test]
fn convergence_under_halving() {
    let p = pulse(1.0);
    for tau in [0.5, 2.0, 6.0] {
        let q = quadrature_doci(
            &p,
            &Fluorophore::new(1.0, tau).unwrap(),
            &GateConfig::for_pulse(&p, 20.0),
            SampleGrid::DEFAULT_DT_NS,
        )
        .unwrap();
        assert!(
            q.converged(1e-4),
            "tau={tau} change={}",
            q.relative_change()
        );
    }
}

#[test]
fn limit_of_short_lifetime() {
    let expected = (1.0 - (-20.0f64).exp()) / 20.0;
    assert!((doci(1e-3, 1.0, 20.0) - expected).abs() < 1e-3);
}

#[test]
fn widths_decrease_and_lifetimes_increase() {
    let p = pulse(1.0);
    let row = doci_surface(&p, &[2.0], &[10.0, 20.0, 40.0]).unwrap();
    assert!(row[[0, 0]] > row[[0, 1]] && row[[0, 1]] > row[[0, 2]]);
    // Same ordering in the independent oracle.
    let o: Vec<f64> = [10.0, 20.0, 40.0]
        .iter()
        .map(|&w| oracle_doci(2.0, 1.0, w, 0.001).0)
        .collect();
    assert!(o[0] > o[1] && o[1] > o[2]);

    let col = doci_surface(&p, &[0.5, 2.0, 6.0], &[20.0]).unwrap();
    assert!(col[[0, 0]] < col[[1, 0]] && col[[1, 0]] < col[[2, 0]]);
    let o: Vec<f64> = [0.5, 2.0, 6.0]
        .iter()
        .map(|&t| oracle_doci(t, 1.0, 20.0, 0.001).0)
        .collect();
    assert!(o[0] < o[1] && o[1] < o[2]);
}

#[test]
fn monotone_on_grid_over_pump_range() {
    let lifetimes: Vec<f64> = (0..50).map(|i| 0.1 + 5.9 * i as f64 / 49.0).collect();
    let widths: Vec<f64> = (0..50).map(|i| 10.0 + 30.0 * i as f64 / 49.0).collect();
    for tau0 in [0.5, 1.0, 2.0] {
        let s = doci_surface(&pulse(tau0), &lifetimes, &widths).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let v = s[[i, j]];
                assert!(v > 0.0 && v < 1.0);
                if i > 0 {
                    assert!(
                        v > s[[i - 1, j]],
                        "not increasing in tau at {i},{j} tau0={tau0}"
                    );
                }
                if j > 0 {
                    assert!(
                        v < s[[i, j - 1]],
                        "not decreasing in T at {i},{j} tau0={tau0}"
                    );
                }
            }
        }
    }
}

#[test]
fn near_linear_at_twenty_ns() {
    let taus: Vec<f64> = (1..=60).map(|i| i as f64 * 0.1).collect();
    let ys: Vec<f64> = taus.iter().map(|&t| doci(t, 1.0, 20.0)).collect();
    let n = taus.len() as f64;
    let (mx, my) = (taus.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = taus.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = taus.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.999, "r2 = {r2}");
}

proptest! {
    #[test]
    fn amplitude_invariance(a1 in 1e-3f64..1e3, a2 in 1e-3f64..1e3, tau in 0.1f64..10.0, tau0 in 0.3f64..3.0, width in 5.0f64..50.0) {
        let p = pulse(tau0);
        let gate = GateConfig::for_pulse(&p, width);
        let v1 = doci_value(&p, &Fluorophore::new(a1, tau).unwrap(), &gate).unwrap().value();
        let v2 = doci_value(&p, &Fluorophore::new(a2, tau).unwrap(), &gate).unwrap().value();
        prop_assert!(((v1 - v2) / v1).abs() < 1e-12);
    }

    #[test]
    fn value_in_unit_interval(tau in 0.05f64..20.0, tau0 in 0.2f64..3.0, width in 5.0f64..60.0) {
        let v = doci(tau, tau0, width);
        prop_assert!(v > 0.0 && v < 1.0, "v = {}", v);
    }

    #[test]
    fn continuous_across_equal_rates(tau0 in 0.5f64..2.0, rel in -1e-6f64..1e-6) {
        let a = doci(tau0, tau0, 20.0);
        let b = doci(tau0 * (1.0 + rel), tau0, 20.0);
        prop_assert!((a - b).abs() < 1e-6);
    }
}
