//! Tracks γ(t, v) through a nonlinear run and measures the remainder of the
//! asymptotic equation iγ_t = (v/2)t⁻¹|γ|²γ − R.

use dnls_lab::asymptotic::{
    exact_free_asymptotic, log_phase_residual, measure_remainder, modulus_drift, AsymptoticState,
};
use dnls_lab::harness::config::gaussian_initial;
use dnls_lab::harness::experiment::relative_gap;
use dnls_lab::solver::{evolve, uniform_times};
use dnls_lab::wave_packets::{default_v_grid, extract_gamma, PacketProfile};
use dnls_lab::{GridSpec, SolverConfig};

fn main() -> dnls_lab::Result<()> {
    let grid = GridSpec::new(512.0, 8192)?;
    let u0 = gaussian_initial(grid, 0.1, 1.0, 0.0, 0)?;
    let cfg = SolverConfig::new(2e-3, 12.0).with_snapshots(uniform_times(1.0, 12.0, 0.5));
    let run = evolve(&u0, &cfg, &mut [])?;
    let fields: Vec<_> = run.into_iter().map(|s| s.field).collect();

    let profile = PacketProfile::bump();
    let v_grid = default_v_grid(&u0, 1.0);
    let profiles = fields
        .iter()
        .map(|u| extract_gamma(u, &v_grid, &profile))
        .collect::<dnls_lab::Result<Vec<_>>>()?;

    let series = measure_remainder(&fields, &profiles)?;
    for (e, c) in series.estimates.iter().zip(&series.cumulative).step_by(4) {
        println!(
            "t = {:5.2}  ‖R‖∞ {:.3e}  ‖vR‖∞ {:.3e}  ∫‖R‖ {:.3e}  bound ratio {:.3}",
            e.t, e.r_inf, e.vr_inf, c, e.bound_ratio
        );
    }

    let state = AsymptoticState::new(profiles[0].clone())?;
    let last = profiles.last().unwrap();
    let model = exact_free_asymptotic(&state, last.t())?;
    println!(
        "γ vs the asymptotic solution at t = {}: {:.3e}",
        last.t(),
        relative_gap(last, &model)
    );

    let drift = modulus_drift(&profiles)?;
    let (t, d) = drift.last().unwrap();
    println!("max |γ(t)| − |γ(1)| at t = {t}: {d:.3e}");
    let phase = log_phase_residual(&profiles)?;
    let (t, p) = phase.last().unwrap();
    println!("log-phase residual at t = {t}: {p:.3e}");
    Ok(())
}
