//! The Galilean vector field `L = x + 2it∂ₓ`.
//!
//! `L` commutes with the free Schrödinger operator, so `‖Lu‖₂` is constant
//! along linear solutions and grows slowly along small DNLS solutions.
//! Together with `‖u‖₂` it controls `‖u‖∞` through the Klainerman–Sobolev
//! inequality `‖u‖²∞ ≲ t⁻¹ ‖u‖₂ ‖Lu‖₂`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{self, l2_norm, linf_norm, ComplexField};
use crate::harness::fit::loglog_ols;
use crate::solver::{run_system, DiagnosticsRecord, Observer, SolverConfig, System};
use crate::{DnlsError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VFDiagnostics {
    pub t: f64,
    pub lu_l2: f64,
    pub lux_l2: f64,
    /// `‖u‖²∞ t / (‖u‖₂ ‖Lu‖₂)`; zero at `t = 0`.
    pub ks_ratio: f64,
    /// Slope of `ln ‖Lu‖₂` against `ln ⟨t⟩` over the samples seen so far.
    pub growth_exponent: f64,
}

/// `Lu = x u + 2it u_x` at the field's own time.
pub fn apply_l(field: &ComplexField) -> Result<ComplexField> {
    field.check_boundary()?;
    Ok(apply_l_unchecked(field))
}

pub(crate) fn apply_l_unchecked(field: &ComplexField) -> ComplexField {
    let ux = grid::spectral_derivative(field, 1).expect("order 1 is supported");
    let g = field.grid();
    let two_it = Complex64::new(0.0, 2.0 * field.time());
    let values = field
        .values()
        .iter()
        .zip(ux.values())
        .enumerate()
        .map(|(j, (&u, &d))| g.x(j) * u + two_it * d)
        .collect();
    ComplexField::from_parts(*g, field.time(), values)
}

/// `‖u‖²∞ t / (‖u‖₂ ‖Lu‖₂)`, the quantity the Klainerman–Sobolev inequality
/// bounds by a universal constant.
pub fn ks_inequality_ratio(u: &ComplexField, lu: &ComplexField) -> Result<f64> {
    let t = u.time();
    if !(t > 0.0) {
        return Err(DnlsError::Argument(format!(
            "the Klainerman–Sobolev ratio needs t > 0, got {t}"
        )));
    }
    if u.grid() != lu.grid() {
        return Err(DnlsError::Structural("u and Lu live on different grids".into()));
    }
    let denom = l2_norm(u) * l2_norm(lu);
    if denom == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(linf_norm(u).powi(2) * t / denom)
}

/// `‖Lu‖₂`, `‖L(u_x)‖₂` and the Klainerman–Sobolev ratio for one field.
pub fn vf_diagnostics(field: &ComplexField) -> Result<VFDiagnostics> {
    let lu = apply_l(field)?;
    vf_diagnostics_with(field, &lu)
}

fn vf_diagnostics_with(field: &ComplexField, lu: &ComplexField) -> Result<VFDiagnostics> {
    let ux = grid::spectral_derivative(field, 1)?;
    let lux = apply_l_unchecked(&ux);
    let ks_ratio = if field.time() > 0.0 {
        ks_inequality_ratio(field, lu)?
    } else {
        0.0
    };
    Ok(VFDiagnostics {
        t: field.time(),
        lu_l2: l2_norm(lu),
        lux_l2: l2_norm(&lux),
        ks_ratio,
        growth_exponent: 0.0,
    })
}

/// Attaches [`VFDiagnostics`] to every record and keeps a running fit of
/// `‖Lu‖₂` against `⟨t⟩`.
///
/// Boundary contact does not abort the run here; it is already flagged in
/// [`DiagnosticsRecord::boundary_ok`].
#[derive(Clone, Debug)]
pub struct VectorFieldObserver {
    fit_start: f64,
    history: Vec<(f64, f64)>,
}

impl Default for VectorFieldObserver {
    fn default() -> Self {
        Self::new()
    }
}

impl VectorFieldObserver {
    pub fn new() -> Self {
        Self {
            fit_start: 1.0,
            history: Vec::new(),
        }
    }

    /// Only samples with `t ≥ fit_start` enter the running fit.
    pub fn with_fit_start(mut self, fit_start: f64) -> Self {
        self.fit_start = fit_start;
        self
    }

    /// `(t, ‖Lu(t)‖₂)` for every observed snapshot.
    pub fn history(&self) -> &[(f64, f64)] {
        &self.history
    }
}

impl Observer for VectorFieldObserver {
    fn observe(&mut self, snapshot: &ComplexField, record: &mut DiagnosticsRecord) -> Result<()> {
        let lu = apply_l_unchecked(snapshot);
        let mut vf = vf_diagnostics_with(snapshot, &lu)?;
        self.history.push((vf.t, vf.lu_l2));
        let used: Vec<(f64, f64)> = self
            .history
            .iter()
            .copied()
            .filter(|&(t, v)| t >= self.fit_start && v > 0.0)
            .collect();
        if used.len() >= 3 {
            if let Some((slope, _, _)) = loglog_ols(&used) {
                vf.growth_exponent = slope;
            }
        }
        record.vector_field = Some(vf);
        Ok(())
    }
}

/// Evolves `z` with `(i∂_t + ∂ₓ²)z = -i[∂ₓ(2|u|²z - u²z̄) - |u|²u]` in tandem
/// with `u`, starting from `z = L u` at the first snapshot, and returns `z` at
/// every snapshot time of `u_trajectory`.
///
/// `u_trajectory` must be the snapshots a DNLS run with the same `cfg`
/// produced.
pub fn evolve_linearized_z(u_trajectory: &[ComplexField], cfg: &SolverConfig) -> Result<Vec<ComplexField>> {
    let u0 = u_trajectory
        .first()
        .ok_or_else(|| DnlsError::Structural("empty u trajectory".into()))?;
    let t0 = u0.time();
    let tol = 1e-9 * cfg.t_end.max(1.0);
    let expected: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|&t| t >= t0 - tol).collect();
    let matches = expected.len() == u_trajectory.len()
        && expected
            .iter()
            .zip(u_trajectory)
            .all(|(&t, u)| (t - u.time()).abs() <= tol && u.grid() == u0.grid());
    if !matches {
        return Err(DnlsError::Structural(format!(
            "u trajectory ({} snapshots) does not match the configured snapshot times ({})",
            u_trajectory.len(),
            expected.len()
        )));
    }
    let z0 = apply_l(u0)?;
    let grid = *u0.grid();
    let mut out = Vec::with_capacity(expected.len());
    run_system(&[u0, &z0], System::WithVectorField, cfg, |t, mut phys| {
        out.push(ComplexField::new(grid, t, phys.swap_remove(1))?);
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{spectral_derivative, weighted_l2_norm, GridSpec};
    use crate::solver::{evolve, linear_propagate};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn smooth(t: f64) -> ComplexField {
        let g = GridSpec::new(30.0, 512).unwrap();
        ComplexField::from_fn(g, t, |x| {
            Complex64::from_polar((-x * x / 2.0).exp(), 0.3 * x) + c(0.0, 0.5 * (-(x - 1.0).powi(2)).exp())
        })
        .unwrap()
    }

    #[test]
    fn at_time_zero_l_is_multiplication_by_x() {
        let u = smooth(0.0);
        let lu = apply_l(&u).unwrap();
        for j in 0..u.grid().n_points() {
            assert_eq!(lu.values()[j], u.grid().x(j) * u.values()[j]);
        }
    }

    #[test]
    fn commutator_with_derivative_is_identity() {
        let u = smooth(1.7);
        let d_lu = spectral_derivative(&apply_l(&u).unwrap(), 1).unwrap();
        let l_du = apply_l_unchecked(&spectral_derivative(&u, 1).unwrap());
        let comm = d_lu.combine(c(1.0, 0.0), &l_du, c(-1.0, 0.0)).unwrap();
        assert!(max_diff(&comm, &u) < 1e-10, "{}", max_diff(&comm, &u));
    }

    #[test]
    fn l_of_derivative() {
        // L(u_x) = ∂ₓ(Lu) - u
        let u = smooth(0.6);
        let lux = apply_l_unchecked(&spectral_derivative(&u, 1).unwrap());
        let rhs = spectral_derivative(&apply_l(&u).unwrap(), 1)
            .unwrap()
            .combine(c(1.0, 0.0), &u, c(-1.0, 0.0))
            .unwrap();
        assert!(max_diff(&lux, &rhs) < 1e-10);
    }

    #[test]
    fn boundary_contact_is_a_domain_error() {
        let g = GridSpec::new(5.0, 64).unwrap();
        let u = ComplexField::from_fn(g, 1.0, |x| c((-x * x / 8.0).exp(), 0.0)).unwrap();
        assert!(matches!(apply_l(&u), Err(DnlsError::Domain { .. })));
    }

    #[test]
    fn l_norm_is_conserved_by_free_flow() {
        let g = GridSpec::new(40.0, 1024).unwrap();
        let u0 = ComplexField::from_fn(g, 0.0, |x| c((-x * x / 2.0).exp(), 0.0)).unwrap();
        let x_u0 = weighted_l2_norm(&u0);
        for t in [0.25, 1.0, 2.0] {
            let lu = apply_l(&linear_propagate(&u0, t).unwrap()).unwrap();
            assert!((l2_norm(&lu) - x_u0).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn l_commutes_with_free_flow() {
        // (i∂_t + ∂ₓ²) Lu = 0, checked by the identity L e^{it∂²} = e^{it∂²} x
        let g = GridSpec::new(40.0, 1024).unwrap();
        let u0 = ComplexField::from_fn(g, 0.0, |x| Complex64::from_polar((-x * x).exp(), 0.4 * x)).unwrap();
        let xu0 = apply_l(&u0).unwrap();
        let t = 1.5;
        let lhs = apply_l(&linear_propagate(&u0, t).unwrap()).unwrap();
        let rhs = linear_propagate(&xu0, t).unwrap();
        assert!(max_diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn ks_ratio_on_linear_gaussians() {
        // ‖u‖∞ = |1+2it|^{-1/2}, ‖u‖₂ = π^{1/4}, ‖Lu‖₂ = (√π/2)^{1/2}
        let g = GridSpec::new(400.0, 16384).unwrap();
        let pi = std::f64::consts::PI;
        for t in [1.0, 2.0, 5.0, 10.0] {
            let a = c(1.0, 2.0 * t);
            let u = ComplexField::from_fn(g, t, |x| (-x * x / (2.0 * a)).exp() / a.sqrt()).unwrap();
            let lu = apply_l(&u).unwrap();
            let ratio = ks_inequality_ratio(&u, &lu).unwrap();
            let exact = t / a.norm() / (pi.powf(0.25) * (pi.sqrt() / 2.0).sqrt());
            assert!((ratio - exact).abs() < 1e-9, "t = {t}: {ratio} vs {exact}");
            assert!(ratio < 2.0);
        }
        let u0 = ComplexField::from_fn(g, 0.0, |x| c((-x * x).exp(), 0.0)).unwrap();
        assert!(ks_inequality_ratio(&u0, &u0).is_err());
        let z = ComplexField::zeros(g, 1.0);
        assert_eq!(ks_inequality_ratio(&z, &z).unwrap(), f64::INFINITY);
    }

    fn coevolve(amplitude: f64) -> (Vec<ComplexField>, Vec<ComplexField>, SolverConfig) {
        let g = GridSpec::new(80.0, 2048).unwrap();
        let u0 = ComplexField::from_fn(g, 0.0, |x| {
            Complex64::from_polar(amplitude * (-x * x / 2.0).exp(), 0.2 * x)
        })
        .unwrap();
        let cfg = SolverConfig::new(1e-3, 2.0).with_snapshot_every(0.5);
        let u: Vec<ComplexField> = evolve(&u0, &cfg, &mut [])
            .unwrap()
            .into_iter()
            .map(|s| s.field)
            .collect();
        let z = evolve_linearized_z(&u, &cfg).unwrap();
        (u, z, cfg)
    }

    #[test]
    fn co_evolved_z_matches_l_of_solution() {
        let (u, z, _) = coevolve(0.5);
        assert_eq!(u.len(), 5);
        for (ui, zi) in u.iter().zip(&z) {
            assert_eq!(ui.time(), zi.time());
            let lu = apply_l(ui).unwrap();
            let diff = zi.combine(c(1.0, 0.0), &lu, c(-1.0, 0.0)).unwrap();
            let rel = l2_norm(&diff) / l2_norm(&lu);
            assert!(rel < 1e-5, "t = {}: {rel}", ui.time());
        }
    }

    #[test]
    fn tiny_data_gives_free_z() {
        let (u, z, _) = coevolve(1e-6);
        let xu0 = apply_l(&u[0]).unwrap();
        let free = linear_propagate(&xu0, 2.0).unwrap();
        let last = z.last().unwrap();
        let rel = l2_norm(&last.combine(c(1.0, 0.0), &free, c(-1.0, 0.0)).unwrap()) / l2_norm(&free);
        assert!(rel < 1e-10, "{rel}");
    }

    #[test]
    fn time_grid_mismatch_is_structural() {
        let (u, _, cfg) = coevolve(0.1);
        assert!(matches!(
            evolve_linearized_z(&u[..3], &cfg),
            Err(DnlsError::Structural(_))
        ));
        assert!(matches!(evolve_linearized_z(&[], &cfg), Err(DnlsError::Structural(_))));
    }

    #[test]
    fn observer_fills_records() {
        let g = GridSpec::new(80.0, 2048).unwrap();
        let u0 = ComplexField::from_fn(g, 0.0, |x| c(0.3 * (-x * x / 2.0).exp(), 0.0)).unwrap();
        let cfg = SolverConfig::new(2e-3, 3.0).with_snapshot_every(0.5);
        let mut obs = VectorFieldObserver::new();
        let run = evolve(&u0, &cfg, &mut [&mut obs]).unwrap();
        assert_eq!(obs.history().len(), run.len());
        for s in &run {
            let vf = s.record.vector_field.unwrap();
            assert!(vf.lu_l2 > 0.0 && vf.lux_l2 > 0.0);
            assert!(vf.ks_ratio.is_finite() && vf.growth_exponent.is_finite());
        }
        let last = run.last().unwrap().record.vector_field.unwrap();
        assert!(last.growth_exponent.abs() < 0.1);
    }
}
