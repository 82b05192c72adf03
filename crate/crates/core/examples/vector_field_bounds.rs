//! Growth of ‖Lu‖, the Klainerman–Sobolev ratio, and the co-evolved z = Lu.

use dnls_lab::grid::l2_norm;
use dnls_lab::harness::config::gaussian_initial;
use dnls_lab::solver::evolve;
use dnls_lab::vector_field::{apply_l, evolve_linearized_z, VectorFieldObserver};
use dnls_lab::{GridSpec, SolverConfig};
use num_complex::Complex64;

fn main() -> dnls_lab::Result<()> {
    let grid = GridSpec::new(256.0, 4096)?;
    let u0 = gaussian_initial(grid, 0.1, 1.0, 0.0, 0)?;
    let cfg = SolverConfig::new(2e-3, 10.0).with_snapshot_every(1.0);
    let mut vf = VectorFieldObserver::new();
    let run = evolve(&u0, &cfg, &mut [&mut vf])?;
    for s in &run {
        let d = s.record.vector_field.expect("observer ran");
        println!(
            "t = {:4.1}  ‖Lu‖ {:.5e}  ‖L u_x‖ {:.5e}  KS ratio {:.4}  growth {:+.4}",
            d.t, d.lu_l2, d.lux_l2, d.ks_ratio, d.growth_exponent
        );
    }

    let fields: Vec<_> = run.iter().map(|s| s.field.clone()).collect();
    let z = evolve_linearized_z(&fields, &cfg)?;
    let last = fields.last().unwrap();
    let lu = apply_l(last)?;
    let diff = z
        .last()
        .unwrap()
        .combine(Complex64::new(1.0, 0.0), &lu, Complex64::new(-1.0, 0.0))?;
    println!(
        "‖z - Lu‖ / ‖Lu‖ at t = {}: {:.3e}",
        last.time(),
        l2_norm(&diff) / l2_norm(&lu)
    );
    Ok(())
}
