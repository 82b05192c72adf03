//! Grid, transform, derivative and snapshot round trip on a gaussian.

use dnls_lab::grid::{self, fft, spectral_derivative};
use dnls_lab::{ComplexField, GridSpec};
use num_complex::Complex64;

fn main() -> dnls_lab::Result<()> {
    let g = GridSpec::new(32.0, 1024)?;
    println!("dx = {:.6}, dxi = {:.6}", g.dx(), g.dxi());

    let u = ComplexField::from_fn(g, 0.0, |x| Complex64::new((-x * x / 2.0).exp(), 0.0))?;
    let ux = spectral_derivative(&u, 1)?;
    let err = (0..g.n_points())
        .map(|j| {
            let x = g.x(j);
            (ux.values()[j] - Complex64::new(-x * (-x * x / 2.0).exp(), 0.0)).norm()
        })
        .fold(0.0, f64::max);
    println!("max |u_x - exact| = {err:.3e}");

    // the transform of e^{-x²/2} is e^{-ξ²/2}
    let spec = fft(&u);
    let peak = spec.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    println!("max |û| = {peak:.12} (exact 1)");
    println!("Parseval: {:.3e}", (spec.l2() - grid::l2_norm(&u)).abs());

    let n = u.norms();
    println!("L2 {:.6}  H1 {:.6}  Linf {:.6}", n.l2, n.h1, n.linf);

    let mut buf = Vec::new();
    grid::write_snapshot(&u, &mut buf).expect("in-memory write");
    let back = grid::read_snapshot(buf.as_slice())?;
    println!("snapshot round trip exact: {}", back == u);
    Ok(())
}
