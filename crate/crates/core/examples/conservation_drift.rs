//! Mass, momentum and energy drift for both integrators.

use dnls_lab::harness::config::gaussian_initial;
use dnls_lab::solver::evolve;
use dnls_lab::{GridSpec, Integrator, SolverConfig};

fn main() -> dnls_lab::Result<()> {
    let grid = GridSpec::new(256.0, 4096)?;
    let u0 = gaussian_initial(grid, 0.3, 1.0, 0.2, 7)?;
    for integrator in [Integrator::Ifrk4, Integrator::Etdrk4] {
        let cfg = SolverConfig::new(2e-3, 10.0)
            .with_integrator(integrator)
            .with_snapshot_every(2.0);
        let run = evolve(&u0, &cfg, &mut [])?;
        let reference = run[0].record.conserved;
        println!(
            "{integrator}: M = {:.12} P = {:.12} E = {:.12}",
            reference.mass, reference.momentum, reference.energy
        );
        for s in &run[1..] {
            println!(
                "  t = {:5.1}  drift {:.3e}",
                s.field.time(),
                s.record.conserved.max_relative_drift(&reference)
            );
        }
    }
    Ok(())
}
