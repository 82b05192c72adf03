//! Propagates a moving soliton and compares with the exact travelling wave.

use dnls_lab::solitons::{localization_product, soliton_report, SolitonParams};
use dnls_lab::{GridSpec, SolverConfig};

fn main() -> dnls_lab::Result<()> {
    let grid = GridSpec::new(64.0, 2048)?;
    let cfg = SolverConfig::new(1e-3, 5.0).with_snapshot_every(0.25);
    for theta in [0.6, std::f64::consts::FRAC_PI_4, 1.2] {
        let params = SolitonParams::new(theta)?;
        let r = soliton_report(&params, grid, &cfg)?;
        println!(
            "theta {theta:.4}: mass {:.9} (8θ = {:.9}), speed {:+.6} vs {:+.6}, phase rate {:.6} vs {:.6}, L2 error at t={} {:.2e}",
            r.mass,
            params.mass(),
            r.speed_measured,
            r.speed_exact,
            r.phase_rate_measured,
            r.phase_rate_exact,
            r.t,
            r.l2_error_vs_exact_at_t
        );
        println!("  localization product {:.4}", localization_product(&params, grid)?);
    }
    Ok(())
}
