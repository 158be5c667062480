//! DOCI as a function of lifetime: tabulate the closed-form value, check it
//! against brute-force quadrature, fit the line through 0.1..6 ns and show
//! how the fitted 1/k tracks the gate width.
//!
//! cargo run --release -p doci --example lifetime_linearity

use doci::characterize::{calibrate_fall_tau, default_lifetime_grid, linearity_fit};
use doci::lifetime::{
    doci_surface, doci_value, quadrature_doci, Fluorophore, GateConfig, PumpPulse,
};

fn main() -> doci::Result<()> {
    let pulse = PumpPulse::default();
    let gate = GateConfig::for_pulse(&pulse, 20.0);

    println!("tau (ns)   closed form   quadrature (dt 1 ps)");
    for tau in [0.5, 1.0, 2.0, 4.0, 6.0] {
        let f = Fluorophore::new(1.0, tau)?;
        let exact = doci_value(&pulse, &f, &gate)?.value();
        let q = quadrature_doci(&pulse, &f, &gate, 1e-3)?;
        println!("{tau:>8.1}   {exact:>11.6}   {:>11.6}", q.value);
    }

    let grid = default_lifetime_grid();
    let fit = linearity_fit(&pulse, 20.0, &grid)?;
    println!(
        "\nT = 20 ns: 1/k = {:.3} ns, intercept {:.4}, R^2 = {:.5}",
        fit.inv_slope, fit.intercept, fit.r_squared
    );

    println!("\nT (ns)   1/k (ns)   1/k - T");
    for width in [5.0, 10.0, 20.0, 30.0, 50.0] {
        let fit = linearity_fit(&pulse, width, &grid)?;
        println!(
            "{width:>6.0}   {:>8.3}   {:>7.3}",
            fit.inv_slope,
            fit.inv_slope - width
        );
    }

    let cal = calibrate_fall_tau(&pulse, 20.0, &grid, 21.03, (0.1, 5.0), 0.02)?;
    println!(
        "\nfall constant {:.4} ns gives 1/k = {:.3} ns ({} steps)",
        cal.fall_tau_ns, cal.fit.inv_slope, cal.iterations
    );

    let widths: Vec<f64> = (1..=10).map(|i| 5.0 * i as f64).collect();
    let surface = doci_surface(&pulse, &grid, &widths)?;
    println!(
        "\nsurface {} lifetimes x {} widths, max DOCI {:.4}",
        surface.nrows(),
        surface.ncols(),
        surface.iter().copied().fold(0.0, f64::max)
    );
    Ok(())
}
