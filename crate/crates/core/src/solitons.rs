//! The Kaup–Newell soliton family
//!
//! ```text
//! q₀(x, θ) = √(2 sin 2θ) · cosh³(x − iθ) / |cosh(x − iθ)|⁴ · e^{−ix cot 2θ}
//! q(t, x, θ) = q₀(x + 2 cot(2θ) t, θ) · e^{it csc²(2θ)}
//! ```
//!
//! and its rescalings `√λ e^{iα} q(λ²t, λ(x − x₀))`. Every member has mass
//! `8θ`, so the family contains arbitrarily small solitons in `L²`; the
//! localization product `‖xq‖_{H¹}‖q‖₂` stays bounded below, which is why
//! these solitons sit outside the small-data theory.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{self, hk_norm, l2_norm, ComplexField, GridSpec};
use crate::solver::{evolve, SolverConfig};
use crate::{DnlsError, Result};

/// Decay length multiples kept between a soliton and the box edge.
const EDGE_MARGIN: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub theta: f64,
    #[serde(rename = "lambda")]
    pub scale: f64,
    pub shift: f64,
    pub phase: f64,
}

impl SolitonParams {
    pub fn new(theta: f64) -> Result<Self> {
        let p = Self {
            theta,
            scale: 1.0,
            shift: 0.0,
            phase: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        self.scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < FRAC_PI_2) {
            return Err(DnlsError::Argument(format!(
                "theta must lie in (0, π/2), got {}",
                self.theta
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(DnlsError::Argument(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.shift.is_finite() && self.phase.is_finite()) {
            return Err(DnlsError::Argument("shift and phase must be finite".into()));
        }
        Ok(())
    }

    /// `‖q‖₂² = 8θ`, independent of scale, shift and phase.
    pub fn mass(&self) -> f64 {
        8.0 * self.theta
    }

    /// Velocity of the rescaled soliton, `−2λ cot 2θ`.
    pub fn speed(&self) -> f64 {
        -2.0 * self.scale / (2.0 * self.theta).tan()
    }

    /// Phase rotation rate at the peak, `λ² csc² 2θ`.
    pub fn phase_rate(&self) -> f64 {
        self.scale * self.scale / (2.0 * self.theta).sin().powi(2)
    }

    /// Smallest half width keeping the profile below the boundary
    /// tolerance up to time `t`.
    pub fn required_half_width(&self, t: f64) -> f64 {
        self.shift.abs() + self.speed().abs() * t + EDGE_MARGIN / self.scale
    }
}

/// `q₀(x, θ)` in overflow-free form: with `a = cos θ − i tanh(x) sin θ`,
/// `cosh³(x−iθ)/|cosh(x−iθ)|⁴ = a³ / |a|⁴ · sech x`.
pub fn q0(x: f64, theta: f64) -> Complex64 {
    let a = Complex64::new(theta.cos(), -x.tanh() * theta.sin());
    let sech = 1.0 / x.cosh();
    let amp = (2.0 * (2.0 * theta).sin()).sqrt();
    let carrier = Complex64::from_polar(1.0, -x / (2.0 * theta).tan());
    amp * a.powi(3) / a.norm_sqr().powi(2) * sech * carrier
}

/// `q₀` from the trigonometric display
/// `[cos θ cosh x − i sin θ sinh x]³ / [cos²θ cosh²x + sin²θ sinh²x]²`.
/// Overflows for `|x| ≳ 170`.
pub fn q0_trig(x: f64, theta: f64) -> Complex64 {
    let (c, s) = (theta.cos(), theta.sin());
    let num = Complex64::new(c * x.cosh(), -s * x.sinh()).powi(3);
    let den = (c * c * x.cosh().powi(2) + s * s * x.sinh().powi(2)).powi(2);
    (2.0 * (2.0 * theta).sin()).sqrt() * num / den * Complex64::from_polar(1.0, -x / (2.0 * theta).tan())
}

/// `q₀` evaluated with complex `cosh(x − iθ)`. Overflows for `|x| ≳ 170`.
pub fn q0_complex(x: f64, theta: f64) -> Complex64 {
    let ch = Complex64::new(x, -theta).cosh();
    (2.0 * (2.0 * theta).sin()).sqrt() * ch.powi(3) / ch.norm_sqr().powi(2)
        * Complex64::from_polar(1.0, -x / (2.0 * theta).tan())
}

/// `q(t, x, θ)` for the unscaled soliton.
pub fn q_exact(t: f64, x: f64, theta: f64) -> Complex64 {
    let cot = 1.0 / (2.0 * theta).tan();
    let csc2 = 1.0 / (2.0 * theta).sin().powi(2);
    q0(x + 2.0 * cot * t, theta) * Complex64::from_polar(1.0, t * csc2)
}

fn scaled(params: &SolitonParams, grid: GridSpec, t: f64) -> Result<ComplexField> {
    params.validate()?;
    let lam = params.scale;
    let pre = Complex64::from_polar(lam.sqrt(), params.phase);
    let field = ComplexField::from_fn(grid, t, |x| {
        pre * q_exact(lam * lam * t, lam * (x - params.shift), params.theta)
    })?;
    if !field.boundary_report().ok {
        return Err(DnlsError::Domain {
            message: format!(
                "soliton (θ = {}, λ = {}) reaches the boundary at t = {t}",
                params.theta, params.scale
            ),
            required_half_width: Some(params.required_half_width(t)),
        });
    }
    Ok(field)
}

/// `√λ e^{iα} q₀(λ(x − x₀), θ)` at `t = 0`.
pub fn soliton_initial(params: &SolitonParams, grid: GridSpec) -> Result<ComplexField> {
    scaled(params, grid, 0.0)
}

/// The exact rescaled soliton `√λ e^{iα} q(λ²t, λ(x − x₀), θ)` at time `t`.
pub fn soliton_exact(params: &SolitonParams, grid: GridSpec, t: f64) -> Result<ComplexField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(DnlsError::Argument(format!("t must be nonnegative, got {t}")));
    }
    scaled(params, grid, t)
}

/// `‖x q‖_{H¹} ‖q‖₂` for the initial soliton, `x` measured from the origin.
/// Bounded below by 1 across the whole family.
pub fn localization_product(params: &SolitonParams, grid: GridSpec) -> Result<f64> {
    let q = soliton_initial(params, grid)?;
    let xq = q.map(|x, z| x * z)?;
    let product = hk_norm(&xq, 1) * l2_norm(&q);
    if product < 1.0 {
        log::warn!("localization product {product} below 1 for {params:?}");
    }
    Ok(product)
}

/// `‖(x q)′‖₂ ‖q‖₂`, the homogeneous part of the localization product; this
/// one is exactly invariant under `λ` when the soliton is centred at 0.
pub fn homogeneous_localization_product(params: &SolitonParams, grid: GridSpec) -> Result<f64> {
    let q = soliton_initial(params, grid)?;
    let xq = q.map(|x, z| x * z)?;
    let d = grid::spectral_derivative(&xq, 1)?;
    Ok(l2_norm(&d) * l2_norm(&q))
}

/// Sub-grid location of the maximum of `|u|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: f64,
    /// Trigonometric interpolant of `u` at `position`.
    pub value: (f64, f64),
}

impl Peak {
    pub fn phase(&self) -> f64 {
        self.value.1.atan2(self.value.0)
    }
}

/// Fits a parabola through `|u|²` at the grid maximum and its neighbours.
pub fn track_peak(field: &ComplexField) -> Peak {
    let g = field.grid();
    let n = g.n_points();
    let v = field.values();
    let (j, _) = v
        .iter()
        .enumerate()
        .map(|(j, z)| (j, z.norm_sqr()))
        .fold((0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    let (a, b, c) = (
        v[(j + n - 1) % n].norm_sqr(),
        v[j].norm_sqr(),
        v[(j + 1) % n].norm_sqr(),
    );
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 0.0 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let position = g.x(j) + offset * g.dx();
    let z = field.interpolate(position);
    Peak {
        position,
        value: (z.re, z.im),
    }
}

/// `∫x|u|² / ∫|u|²`.
pub fn center_of_mass(field: &ComplexField) -> f64 {
    let g = field.grid();
    let (mut m, mut mx) = (0.0, 0.0);
    for (j, z) in field.values().iter().enumerate() {
        let w = z.norm_sqr();
        m += w;
        mx += w * g.x(j);
    }
    if m == 0.0 {
        0.0
    } else {
        mx / m
    }
}

/// Outcome of evolving a soliton with the solver and comparing against the
/// exact formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonReport {
    pub theta: f64,
    pub lambda: f64,
    pub mass: f64,
    pub mass_error: f64,
    pub speed_measured: f64,
    pub speed_exact: f64,
    pub phase_rate_measured: f64,
    pub phase_rate_exact: f64,
    pub t: f64,
    pub l2_error_vs_exact_at_t: f64,
}

/// Evolves the soliton through `cfg.snapshot_times` and measures mass,
/// centre-of-mass speed, peak phase rate and the final relative `L²` error.
pub fn soliton_report(params: &SolitonParams, grid: GridSpec, cfg: &SolverConfig) -> Result<SolitonReport> {
    let u0 = soliton_initial(params, grid)?;
    let run = evolve(&u0, cfg, &mut [])?;
    if run.len() < 2 {
        return Err(DnlsError::Argument("need at least two snapshots".into()));
    }
    let times: Vec<f64> = run.iter().map(|s| s.field.time()).collect();
    let centers: Vec<f64> = run.iter().map(|s| center_of_mass(&s.field)).collect();
    let mut phases: Vec<f64> = run.iter().map(|s| track_peak(&s.field).phase()).collect();
    unwrap_phase(&mut phases);

    let last = &run.last().unwrap().field;
    let exact = soliton_exact(params, grid, last.time())?;
    let diff = last.combine(Complex64::new(1.0, 0.0), &exact, Complex64::new(-1.0, 0.0))?;
    let mass = run[0].record.conserved.mass;
    Ok(SolitonReport {
        theta: params.theta,
        lambda: params.scale,
        mass,
        mass_error: (mass - params.mass()).abs(),
        speed_measured: slope(&times, &centers),
        speed_exact: params.speed(),
        phase_rate_measured: slope(&times, &phases),
        phase_rate_exact: params.phase_rate(),
        t: last.time(),
        l2_error_vs_exact_at_t: l2_norm(&diff) / l2_norm(&exact),
    })
}

/// Removes `2π` jumps between consecutive samples.
pub fn unwrap_phase(phases: &mut [f64]) {
    use std::f64::consts::{PI, TAU};
    for i in 1..phases.len() {
        let mut d = phases[i] - phases[i - 1];
        while d > PI {
            d -= TAU;
        }
        while d < -PI {
            d += TAU;
        }
        phases[i] = phases[i - 1] + d;
    }
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::spectral_derivative;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn grid() -> GridSpec {
        GridSpec::new(64.0, 2048).unwrap()
    }

    #[test]
    fn display_forms_agree() {
        for theta in [0.1, 0.6, FRAC_PI_4, 1.2, 1.5] {
            for i in 0..=400 {
                let x = -30.0 + 0.15 * i as f64;
                let a = q0(x, theta);
                assert!((a - q0_trig(x, theta)).norm() <= 1e-12 * (1.0 + a.norm()));
                assert!((a - q0_complex(x, theta)).norm() <= 1e-12 * (1.0 + a.norm()));
            }
        }
        assert!(q0(800.0, 0.3).is_finite());
        assert_eq!(q0(800.0, 0.3), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        for theta in [0.0, -0.1, FRAC_PI_2, 2.0, f64::NAN] {
            assert!(matches!(SolitonParams::new(theta), Err(DnlsError::Argument(_))));
        }
        let p = SolitonParams::new(0.5).unwrap();
        assert!(p.with_scale(0.0).is_err());
        assert!(p.with_scale(-1.0).is_err());
    }

    #[test]
    fn mass_is_eight_theta() {
        for theta in [0.2, FRAC_PI_4, 1.2] {
            for lambda in [1.0, 2.0] {
                let p = SolitonParams::new(theta).unwrap().with_scale(lambda).unwrap();
                let q = soliton_initial(&p, grid()).unwrap();
                let mass = l2_norm(&q).powi(2);
                assert!((mass - 8.0 * theta).abs() < 1e-6, "θ = {theta}: {mass}");
            }
        }
    }

    #[test]
    fn quarter_pi_is_stationary() {
        let p = SolitonParams::new(FRAC_PI_4).unwrap();
        assert!(p.speed().abs() < 1e-15);
        assert!((p.phase_rate() - 1.0).abs() < 1e-15);
        // the carrier is absent, so q₀ is symmetric under x → −x up to conjugation
        for x in [0.3, 1.7, 4.0] {
            assert!((q0(x, FRAC_PI_4) - q0(-x, FRAC_PI_4).conj()).norm() < 1e-15);
        }
        let t = 0.8;
        let q = soliton_exact(&p, grid(), t).unwrap();
        let q0f = soliton_initial(&p, grid()).unwrap();
        let rot = Complex64::from_polar(1.0, t);
        for (a, b) in q.values().iter().zip(q0f.values()) {
            assert!((a - b * rot).norm() < 1e-14);
        }
    }

    #[test]
    fn exact_at_zero_is_initial() {
        let p = SolitonParams::new(0.6)
            .unwrap()
            .with_scale(1.5)
            .unwrap()
            .with_shift(3.0)
            .with_phase(0.4);
        assert_eq!(
            soliton_exact(&p, grid(), 0.0).unwrap(),
            soliton_initial(&p, grid()).unwrap()
        );
    }

    #[test]
    fn exact_soliton_solves_the_equation() {
        // residual of i q_t + q_xx + i(|q|²q)_x with a centred time difference
        let p = SolitonParams::new(0.6).unwrap().with_scale(1.3).unwrap();
        let (t, h) = (0.4, 1e-4);
        let g = grid();
        let qm = soliton_exact(&p, g, t - h).unwrap();
        let q = soliton_exact(&p, g, t).unwrap();
        let qp = soliton_exact(&p, g, t + h).unwrap();
        let qxx = spectral_derivative(&q, 2).unwrap();
        let flux = q.map(|_, z| z * z.norm_sqr()).unwrap();
        let dflux = spectral_derivative(&flux, 1).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let res = (0..g.n_points())
            .map(|j| {
                let qt = (qp.values()[j] - qm.values()[j]) / (2.0 * h);
                (i * qt + qxx.values()[j] + i * dflux.values()[j]).norm()
            })
            .fold(0.0, f64::max);
        assert!(res < 1e-6, "{res}");
    }

    #[test]
    fn small_domain_is_rejected_with_a_width_hint() {
        let p = SolitonParams::new(0.5).unwrap().with_scale(0.5).unwrap();
        match soliton_initial(&p, GridSpec::new(10.0, 256).unwrap()) {
            Err(DnlsError::Domain {
                required_half_width: Some(w),
                ..
            }) => assert!(w > 10.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn localization_product_is_at_least_one() {
        let g = GridSpec::new(200.0, 16384).unwrap();
        for theta in [0.1, 0.5, FRAC_PI_4, 1.2, 1.5] {
            for lambda in [0.5, 1.0, 2.0, 4.0] {
                let p = SolitonParams::new(theta).unwrap().with_scale(lambda).unwrap();
                let v = localization_product(&p, g).unwrap();
                assert!(v >= 1.0, "θ = {theta}, λ = {lambda}: {v}");
            }
        }
    }

    #[test]
    fn homogeneous_product_is_scale_invariant() {
        let g = GridSpec::new(200.0, 16384).unwrap();
        for theta in [0.3, FRAC_PI_4, 1.2] {
            let at = |lambda: f64| {
                let p = SolitonParams::new(theta).unwrap().with_scale(lambda).unwrap();
                homogeneous_localization_product(&p, g).unwrap()
            };
            let base = at(1.0);
            for lambda in [0.5, 2.0] {
                assert!((at(lambda) - base).abs() < 1e-8 * base, "θ = {theta}, λ = {lambda}");
            }
        }
    }

    #[test]
    fn peak_and_center_tracking() {
        let p = SolitonParams::new(0.6).unwrap().with_shift(1.234).with_phase(0.7);
        let q = soliton_initial(&p, grid()).unwrap();
        let peak = track_peak(&q);
        assert!((peak.position - 1.234).abs() < 1e-3, "{}", peak.position);
        // q₀(0) is real and positive
        assert!((peak.phase() - 0.7).abs() < 5e-3, "{}", peak.phase());
        // |q₀| is even about the centre
        assert!((center_of_mass(&q) - 1.234).abs() < 1e-10);
    }

    #[test]
    fn unwrap_removes_jumps() {
        let mut p: Vec<f64> = (0..50)
            .map(|i| (0.5 * i as f64 + PI).rem_euclid(2.0 * PI) - PI)
            .collect();
        unwrap_phase(&mut p);
        for w in p.windows(2) {
            assert!((w[1] - w[0] - 0.5).abs() < 1e-12);
        }
    }
}
