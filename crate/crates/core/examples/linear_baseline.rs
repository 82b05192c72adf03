//! Free Schrödinger flow: sup norm decays like t^{-1/2}.

use dnls_lab::grid::linf_norm;
use dnls_lab::harness::config::gaussian_initial;
use dnls_lab::harness::fit_power_law;
use dnls_lab::solver::{uniform_times, LinearFlow};
use dnls_lab::GridSpec;

fn main() -> dnls_lab::Result<()> {
    let grid = GridSpec::new(1024.0, 16384)?;
    let u0 = gaussian_initial(grid, 0.05, 1.0, 0.0, 0)?;
    let flow = LinearFlow::new(&u0);
    let mut series = Vec::new();
    for t in uniform_times(0.0, 100.0, 1.0) {
        series.push((t, linf_norm(&flow.at(t)?)));
    }
    let fit = fit_power_law("linf_u", &series, 5.0)?;
    println!(
        "‖u‖∞ ≈ {:.4e} ⟨t⟩^{:.4} (r² = {:.6}) on [{}, {}]",
        fit.constant, fit.exponent, fit.r_squared, fit.t_range.0, fit.t_range.1
    );
    Ok(())
}
