//! The asymptotic equation `iγ_t = (v/2) t⁻¹ |γ|²γ − R`.
//!
//! With `R = 0` the modulus of `γ` is frozen and its phase rotates like
//! `−(v/2)|γ|² ln t`. On simulation data the remainder is recovered by
//! differencing profiles in time.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{self, l2_norm, linf_norm, ComplexField};
use crate::solver::fmt_f64;
use crate::vector_field::apply_l_unchecked;
use crate::wave_packets::Profile;
use crate::{DnlsError, Result};

/// Fraction of `max|γ|` above which a velocity counts as bulk.
pub const BULK_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticState {
    t0: f64,
    profile0: Profile,
}

impl AsymptoticState {
    pub fn new(profile0: Profile) -> Result<Self> {
        let t0 = profile0.t();
        if !(t0 >= 1.0) {
            return Err(DnlsError::Argument(format!("asymptotic state needs t0 >= 1, got {t0}")));
        }
        Ok(Self { t0, profile0 })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn profile0(&self) -> &Profile {
        &self.profile0
    }

    pub fn v_grid(&self) -> &[f64] {
        self.profile0.v_grid()
    }
}

/// `γ(t, v) = γ(t0, v) exp(−i (v/2) |γ(t0, v)|² ln(t/t0))`.
pub fn exact_free_asymptotic(state: &AsymptoticState, t: f64) -> Result<Profile> {
    if !(t >= state.t0) || !t.is_finite() {
        return Err(DnlsError::Argument(format!(
            "cannot evolve the asymptotic profile from t0 = {} back to t = {t}",
            state.t0
        )));
    }
    let log = (t / state.t0).ln();
    let gamma = state
        .v_grid()
        .iter()
        .zip(state.profile0.gamma())
        .map(|(&v, &g)| g * Complex64::from_polar(1.0, -0.5 * v * g.norm_sqr() * log))
        .collect();
    Profile::new(t, state.v_grid().to_vec(), gamma)
}

/// Remainder estimate at one interior snapshot time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderEstimate {
    pub t: f64,
    /// `‖R‖∞` over the velocity bulk.
    pub r_inf: f64,
    /// `‖vR‖∞` over the velocity bulk.
    pub vr_inf: f64,
    /// `‖R‖∞` outside the bulk.
    pub r_inf_tail: f64,
    pub vr_inf_tail: f64,
    /// `‖R‖∞` over all velocities divided by the assembled bound on it.
    pub bound_ratio: f64,
    /// Same for `‖vR‖∞`.
    pub v_bound_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderSeries {
    pub estimates: Vec<RemainderEstimate>,
    /// Trapezoid `∫ ‖R‖∞ dt` from the first estimate to each estimate.
    pub cumulative: Vec<f64>,
}

impl RemainderSeries {
    /// `∫ ‖R‖∞` between the estimates nearest to `a` and `b`.
    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        let at = |t: f64| {
            self.estimates
                .iter()
                .zip(&self.cumulative)
                .min_by(|x, y| (x.0.t - t).abs().total_cmp(&(y.0.t - t).abs()))
                .map(|(_, &c)| c)
                .unwrap_or(0.0)
        };
        at(b) - at(a)
    }
}

fn check_shared_grid(profiles: &[Profile]) -> Result<()> {
    let first = profiles[0].v_grid();
    for p in &profiles[1..] {
        if p.v_grid() != first {
            return Err(DnlsError::Structural(format!(
                "profile at t = {} uses a different velocity grid",
                p.t()
            )));
        }
    }
    for w in profiles.windows(2) {
        if !(w[1].t() > w[0].t()) {
            return Err(DnlsError::Argument("profile times must increase".into()));
        }
    }
    Ok(())
}

/// Norms entering the remainder bounds.
struct BoundNorms {
    u_inf: f64,
    ux_inf: f64,
    lu: f64,
    lux: f64,
    lu_x: f64,
}

impl BoundNorms {
    fn of(u: &ComplexField) -> Result<Self> {
        let ux = grid::spectral_derivative(u, 1)?;
        let lu = apply_l_unchecked(u);
        let lu_x = grid::spectral_derivative(&lu, 1)?;
        Ok(Self {
            u_inf: linf_norm(u),
            ux_inf: linf_norm(&ux),
            lu: l2_norm(&lu),
            lux: l2_norm(&apply_l_unchecked(&ux)),
            lu_x: l2_norm(&lu_x),
        })
    }

    fn r_bound(&self, t: f64) -> f64 {
        let (u, ux, lu) = (self.u_inf, self.ux_inf, self.lu);
        t.powf(-1.25) * lu
            + u.powi(3)
            + t.powf(-0.75) * u * u * lu
            + u * ux * t.powf(-0.25) * lu
            + t.powf(-0.75) * u * lu * (t.powf(-0.75) * lu + t.sqrt() * ux)
    }

    fn vr_bound(&self, t: f64) -> f64 {
        let (u, ux, lu, lux, lu_x) = (self.u_inf, self.ux_inf, self.lu, self.lux, self.lu_x);
        t.powf(-1.25) * (lu + lux)
            + t.powf(-1.25) * u * u * lu
            + u * u * ux
            + u * (t.powf(-1.5) * lu * lu + t.powf(-0.75) * ux * lu + t.powf(-0.25) * ux * lux)
            + (t.powf(-0.75) * lu + t.sqrt() * ux) * u * (t.powf(-1.25) * lu_x + t.powf(-0.75) * lux)
    }
}

/// `R(t_k, v) = (v/2) t⁻¹ |γ|²γ − iγ_t` at every interior snapshot, with `γ_t`
/// from centred three-point differences on the (possibly uneven) time grid.
///
/// `snapshots[k]` is the field that produced `profiles[k]`; its norms feed the
/// bound ratios.
pub fn measure_remainder(snapshots: &[ComplexField], profiles: &[Profile]) -> Result<RemainderSeries> {
    if profiles.len() < 3 {
        return Err(DnlsError::Argument(format!(
            "need at least 3 profiles for centred differences, got {}",
            profiles.len()
        )));
    }
    if snapshots.len() != profiles.len() {
        return Err(DnlsError::Structural(format!(
            "{} snapshots for {} profiles",
            snapshots.len(),
            profiles.len()
        )));
    }
    check_shared_grid(profiles)?;
    for (s, p) in snapshots.iter().zip(profiles) {
        if (s.time() - p.t()).abs() > 1e-9 * p.t() {
            return Err(DnlsError::Structural(format!(
                "snapshot at t = {} paired with profile at t = {}",
                s.time(),
                p.t()
            )));
        }
    }
    let v_grid = profiles[0].v_grid();
    let mut estimates = Vec::with_capacity(profiles.len() - 2);
    for k in 1..profiles.len() - 1 {
        let (p0, p1, p2) = (&profiles[k - 1], &profiles[k], &profiles[k + 1]);
        let t = p1.t();
        let h1 = t - p0.t();
        let h2 = p2.t() - t;
        let a = -h2 / (h1 * (h1 + h2));
        let b = (h2 - h1) / (h1 * h2);
        let c = h1 / (h2 * (h1 + h2));
        let peak = p1.linf();
        let mut est = RemainderEstimate {
            t,
            r_inf: 0.0,
            vr_inf: 0.0,
            r_inf_tail: 0.0,
            vr_inf_tail: 0.0,
            bound_ratio: 0.0,
            v_bound_ratio: 0.0,
        };
        for (i, &v) in v_grid.iter().enumerate() {
            let g = p1.gamma()[i];
            let gt = a * p0.gamma()[i] + b * g + c * p2.gamma()[i];
            let r = (0.5 * v / t * g.norm_sqr()) * g - Complex64::i() * gt;
            let (rn, vrn) = (r.norm(), (v * r).norm());
            if g.norm() > BULK_FRACTION * peak {
                est.r_inf = est.r_inf.max(rn);
                est.vr_inf = est.vr_inf.max(vrn);
            } else {
                est.r_inf_tail = est.r_inf_tail.max(rn);
                est.vr_inf_tail = est.vr_inf_tail.max(vrn);
            }
        }
        let norms = BoundNorms::of(&snapshots[k])?;
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        est.bound_ratio = ratio(est.r_inf.max(est.r_inf_tail), norms.r_bound(t));
        est.v_bound_ratio = ratio(est.vr_inf.max(est.vr_inf_tail), norms.vr_bound(t));
        estimates.push(est);
    }
    let mut cumulative = Vec::with_capacity(estimates.len());
    let mut acc = 0.0;
    for (i, e) in estimates.iter().enumerate() {
        if i > 0 {
            let prev = &estimates[i - 1];
            acc += 0.5 * (e.r_inf + prev.r_inf) * (e.t - prev.t);
        }
        cumulative.push(acc);
    }
    Ok(RemainderSeries { estimates, cumulative })
}

/// `max_v ||γ(t, v)| − |γ(t_first, v)||` for every profile after the first.
pub fn modulus_drift(profiles: &[Profile]) -> Result<Vec<(f64, f64)>> {
    if profiles.len() < 2 {
        return Err(DnlsError::Argument("modulus drift needs at least 2 profiles".into()));
    }
    check_shared_grid(profiles)?;
    let first = &profiles[0];
    Ok(profiles[1..]
        .iter()
        .map(|p| {
            let drift = p
                .gamma()
                .iter()
                .zip(first.gamma())
                .map(|(g, g0)| (g.norm() - g0.norm()).abs())
                .fold(0.0, f64::max);
            (p.t(), drift)
        })
        .collect())
}

/// `max_v |arg γ(t,v) − arg γ(t_first,v) + (v/2)|γ(t_first,v)|² ln(t/t_first)|` over
/// the bulk of the first profile. Phases are unwrapped along time, so
/// consecutive profiles must be close enough that no phase step exceeds π.
pub fn log_phase_residual(profiles: &[Profile]) -> Result<Vec<(f64, f64)>> {
    if profiles.len() < 2 {
        return Err(DnlsError::Argument(
            "log-phase residual needs at least 2 profiles".into(),
        ));
    }
    check_shared_grid(profiles)?;
    let first = &profiles[0];
    let peak = first.linf();
    let bulk: Vec<usize> = (0..first.len())
        .filter(|&i| first.gamma()[i].norm() > BULK_FRACTION * peak)
        .collect();
    let mut unwrapped = vec![0.0; first.len()];
    let mut out = Vec::with_capacity(profiles.len() - 1);
    for w in profiles.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let log = (cur.t() / first.t()).ln();
        let mut worst: f64 = 0.0;
        for &i in &bulk {
            unwrapped[i] += (cur.gamma()[i] * prev.gamma()[i].conj()).arg();
            let v = first.v_grid()[i];
            let residual = unwrapped[i] + 0.5 * v * first.gamma()[i].norm_sqr() * log;
            worst = worst.max(residual.abs());
        }
        out.push((cur.t(), worst));
    }
    Ok(out)
}

/// Columns `time, r_inf, vr_inf, cumulative_r_integral`.
pub fn write_remainder_csv<W: Write>(series: &RemainderSeries, mut w: W) -> std::io::Result<()> {
    writeln!(w, "time,r_inf,vr_inf,cumulative_r_integral")?;
    for (e, c) in series.estimates.iter().zip(&series.cumulative) {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(e.t),
            fmt_f64(e.r_inf),
            fmt_f64(e.vr_inf),
            fmt_f64(*c)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::harness::fit::fit_power_law;
    use crate::solver::{uniform_times, LinearFlow};
    use crate::wave_packets::{default_v_grid, extract_gamma, PacketProfile};

    fn sample_state() -> AsymptoticState {
        let v: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.2).collect();
        let g = v
            .iter()
            .map(|&v| Complex64::from_polar(0.8 * (-v * v / 4.0).exp(), 0.3 * v))
            .collect();
        AsymptoticState::new(Profile::new(1.0, v, g).unwrap()).unwrap()
    }

    /// Dormand–Prince 5(4) with standard step control, for `y' = f(t, y)`.
    fn dormand_prince(f: impl Fn(f64, [f64; 2]) -> [f64; 2], t0: f64, y0: [f64; 2], t1: f64, tol: f64) -> [f64; 2] {
        const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
        const A: [[f64; 6]; 7] = [
            [0.0; 6],
            [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [
                19372.0 / 6561.0,
                -25360.0 / 2187.0,
                64448.0 / 6561.0,
                -212.0 / 729.0,
                0.0,
                0.0,
            ],
            [
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
                0.0,
            ],
            [
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        const B5: [f64; 7] = [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
            0.0,
        ];
        const B4: [f64; 7] = [
            5179.0 / 57600.0,
            0.0,
            7571.0 / 16695.0,
            393.0 / 640.0,
            -92097.0 / 339200.0,
            187.0 / 2100.0,
            1.0 / 40.0,
        ];
        let (mut t, mut y, mut h): (f64, [f64; 2], f64) = (t0, y0, 1e-3);
        while t < t1 {
            h = h.min(t1 - t);
            let mut k = [[0.0; 2]; 7];
            for s in 0..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for d in 0..2 {
                        ys[d] += h * A[s][j] * kj[d];
                    }
                }
                k[s] = f(t + C[s] * h, ys);
            }
            let mut y5 = y;
            let mut err: f64 = 0.0;
            for d in 0..2 {
                let mut e = 0.0;
                for s in 0..7 {
                    y5[d] += h * B5[s] * k[s][d];
                    e += h * (B5[s] - B4[s]) * k[s][d];
                }
                err = err.max(e.abs() / (tol * (1.0 + y[d].abs())));
            }
            if err <= 1.0 {
                t += h;
                y = y5;
            }
            h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        }
        y
    }

    #[test]
    fn exact_solution_keeps_modulus() {
        let s = sample_state();
        for t in [1.0, 2.0, 50.0, 1e3] {
            let p = exact_free_asymptotic(&s, t).unwrap();
            for (g, g0) in p.gamma().iter().zip(s.profile0().gamma()) {
                assert!((g.norm() - g0.norm()).abs() < 1e-15);
            }
            let mid = s.v_grid().iter().position(|&v| v == 0.0).unwrap();
            assert_eq!(p.gamma()[mid], s.profile0().gamma()[mid]);
        }
        assert!(matches!(exact_free_asymptotic(&s, 0.5), Err(DnlsError::Argument(_))));
    }

    #[test]
    fn state_needs_late_start() {
        let p = Profile::new(0.5, vec![0.0], vec![Complex64::new(1.0, 0.0)]).unwrap();
        assert!(AsymptoticState::new(p).is_err());
    }

    #[test]
    fn exact_solution_matches_adaptive_integration() {
        let s = sample_state();
        for (&v, &g0) in s.v_grid().iter().zip(s.profile0().gamma()).step_by(5) {
            // γ' = −i (v/2) |γ|² γ / t
            let rhs = |t: f64, y: [f64; 2]| {
                let m = 0.5 * v * (y[0] * y[0] + y[1] * y[1]) / t;
                [m * y[1], -m * y[0]]
            };
            for t in [10.0, 100.0] {
                let y = dormand_prince(rhs, 1.0, [g0.re, g0.im], t, 1e-13);
                let exact = exact_free_asymptotic(&s, t).unwrap();
                let i = s.v_grid().iter().position(|&w| w == v).unwrap();
                let err = (Complex64::new(y[0], y[1]) - exact.gamma()[i]).norm();
                assert!(err < 1e-9, "v = {v}, t = {t}: {err}");
            }
        }
    }

    #[test]
    fn exact_profiles_have_no_drift_and_no_phase_residual() {
        let s = sample_state();
        let profiles: Vec<Profile> = uniform_times(1.0, 100.0, 0.5)
            .into_iter()
            .map(|t| exact_free_asymptotic(&s, t).unwrap())
            .collect();
        for (_, d) in modulus_drift(&profiles).unwrap() {
            assert!(d < 1e-15);
        }
        for (_, r) in log_phase_residual(&profiles).unwrap() {
            assert!(r < 1e-12);
        }
    }

    #[test]
    fn remainder_of_exact_profiles_is_differencing_error() {
        let s = sample_state();
        let grid = GridSpec::new(8.0, 64).unwrap();
        let times = uniform_times(1.0, 20.0, 0.05);
        let profiles: Vec<Profile> = times.iter().map(|&t| exact_free_asymptotic(&s, t).unwrap()).collect();
        let snaps: Vec<ComplexField> = times.iter().map(|&t| ComplexField::zeros(grid, t)).collect();
        let series = measure_remainder(&snaps, &profiles).unwrap();
        for e in &series.estimates {
            assert!(e.r_inf.max(e.r_inf_tail) < 1e-3 / (e.t * e.t), "{e:?}");
        }
    }

    #[test]
    fn remainder_preconditions() {
        let s = sample_state();
        let grid = GridSpec::new(8.0, 64).unwrap();
        let p: Vec<Profile> = [1.0, 2.0]
            .iter()
            .map(|&t| exact_free_asymptotic(&s, t).unwrap())
            .collect();
        let snaps: Vec<ComplexField> = [1.0, 2.0].iter().map(|&t| ComplexField::zeros(grid, t)).collect();
        assert!(matches!(measure_remainder(&snaps, &p), Err(DnlsError::Argument(_))));
        assert!(modulus_drift(&p[..1]).is_err());
        let other = Profile::new(3.0, vec![0.0], vec![Complex64::new(1.0, 0.0)]).unwrap();
        let mixed = vec![p[0].clone(), p[1].clone(), other];
        assert!(matches!(modulus_drift(&mixed), Err(DnlsError::Structural(_))));
    }

    #[test]
    fn zero_field_has_zero_remainder() {
        let grid = GridSpec::new(64.0, 512).unwrap();
        let times = [1.0, 1.5, 2.0, 2.5];
        let snaps: Vec<ComplexField> = times.iter().map(|&t| ComplexField::zeros(grid, t)).collect();
        let vs = [-1.0, 0.0, 1.0];
        let profiles: Vec<Profile> = snaps
            .iter()
            .map(|u| extract_gamma(u, &vs, &PacketProfile::bump()).unwrap())
            .collect();
        let series = measure_remainder(&snaps, &profiles).unwrap();
        assert_eq!(series.estimates.len(), 2);
        for e in &series.estimates {
            assert_eq!((e.r_inf, e.vr_inf, e.r_inf_tail), (0.0, 0.0, 0.0));
        }
        assert!(series.cumulative.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn linear_flow_remainder_is_the_cubic_term() {
        // for free waves γ is nearly constant, so R ≈ (v/2) t⁻¹ |γ|²γ ∝ t⁻¹
        let grid = GridSpec::new(2048.0, 16384).unwrap();
        let u0 = ComplexField::from_fn(grid, 0.0, |x| Complex64::new((-x * x / 2.0).exp(), 0.0)).unwrap();
        let flow = LinearFlow::new(&u0);
        let p = PacketProfile::bump();
        let vs = default_v_grid(&u0, 100.0);
        let times = uniform_times(1.0, 100.0, 0.5);
        let snaps: Vec<ComplexField> = times.iter().map(|&t| flow.at(t).unwrap()).collect();
        let profiles: Vec<Profile> = snaps.iter().map(|u| extract_gamma(u, &vs, &p).unwrap()).collect();
        let series = measure_remainder(&snaps, &profiles).unwrap();
        let points: Vec<(f64, f64)> = series.estimates.iter().map(|e| (e.t, e.r_inf)).collect();
        let fit = fit_power_law("r_inf", &points, 5.0).unwrap();
        assert!((fit.exponent + 1.0).abs() < 0.15, "{fit:?}");
        assert!(series.estimates.iter().all(|e| e.bound_ratio.is_finite()));
    }

    #[test]
    fn csv_layout() {
        let series = RemainderSeries {
            estimates: vec![RemainderEstimate {
                t: 1.5,
                r_inf: 0.1,
                vr_inf: 0.2,
                r_inf_tail: 0.0,
                vr_inf_tail: 0.0,
                bound_ratio: 1.0,
                v_bound_ratio: 1.0,
            }],
            cumulative: vec![0.0],
        };
        let mut buf = Vec::new();
        write_remainder_csv(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("time,r_inf,vr_inf,cumulative_r_integral"));
        assert_eq!(text.lines().count(), 2);
    }
}
