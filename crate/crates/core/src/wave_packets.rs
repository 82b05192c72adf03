//! Wave packets `Φ_v = e^{iφ} χ((x − vt)/√t)` with `φ = x²/4t`, and the
//! asymptotic profile `γ(t, v) = ∫ u Φ̄_v dx`.
//!
//! Velocities and frequencies are paired by `v = 2ξ`: a packet on the ray
//! `x = vt` carries the frequency `v/2`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{self, l2_norm, linf_norm, ComplexField, FourierTransform, GridSpec};
use crate::solver::fmt_f64;
use crate::{DnlsError, Result};

const BUMP_QUADRATURE_POINTS: usize = 1 << 16;
const GAUSSIAN_SIGMA: f64 = 1.0 / 3.0;
const GAUSSIAN_RADIUS: f64 = 3.0;

const KERNEL_HALF_WIDTH: f64 = 64.0;
const KERNEL_POINTS: usize = 1 << 18;
const KERNEL_CUTOFF: f64 = 1e-17;
const LAGRANGE_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    CompactBump,
    Gaussian,
}

/// The window `χ`, normalized to unit integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketProfile {
    pub kind: PacketKind,
    pub normalization: f64,
    /// `χ` vanishes (bump) or is below `1e-17` (Gaussian) outside this radius.
    pub support_radius: f64,
}

impl Default for PacketProfile {
    fn default() -> Self {
        Self::bump()
    }
}

impl PacketProfile {
    /// `c·exp(−1/(1 − y²))` on `[−1, 1]`.
    pub fn bump() -> Self {
        static C: OnceLock<f64> = OnceLock::new();
        let normalization = *C.get_or_init(|| {
            let h = 2.0 / BUMP_QUADRATURE_POINTS as f64;
            let sum: f64 = (1..BUMP_QUADRATURE_POINTS)
                .map(|j| bump_shape(-1.0 + j as f64 * h))
                .sum();
            1.0 / (sum * h)
        });
        Self {
            kind: PacketKind::CompactBump,
            normalization,
            support_radius: 1.0,
        }
    }

    /// Gaussian with standard deviation `1/3`, truncated at radius 3.
    pub fn gaussian() -> Self {
        Self {
            kind: PacketKind::Gaussian,
            normalization: 1.0 / (GAUSSIAN_SIGMA * (2.0 * PI).sqrt()),
            support_radius: GAUSSIAN_RADIUS,
        }
    }

    pub fn chi(&self, y: f64) -> f64 {
        self.derivatives(y).0
    }

    pub fn chi_prime(&self, y: f64) -> f64 {
        self.derivatives(y).1
    }

    pub fn chi_second(&self, y: f64) -> f64 {
        self.derivatives(y).2
    }

    /// `(χ, χ′, χ″)` at `y`.
    pub fn derivatives(&self, y: f64) -> (f64, f64, f64) {
        match self.kind {
            PacketKind::CompactBump => {
                if y.abs() >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let s = 1.0 - y * y;
                let f = self.normalization * (-1.0 / s).exp();
                let g = -2.0 * y / (s * s);
                let dg = -2.0 / (s * s) - 8.0 * y * y / (s * s * s);
                (f, f * g, f * (g * g + dg))
            }
            PacketKind::Gaussian => {
                if y.abs() > self.support_radius {
                    return (0.0, 0.0, 0.0);
                }
                let s2 = GAUSSIAN_SIGMA * GAUSSIAN_SIGMA;
                let f = self.normalization * (-0.5 * y * y / s2).exp();
                (f, -y / s2 * f, (y * y / (s2 * s2) - 1.0 / s2) * f)
            }
        }
    }

    /// `∫χ dy − 1` by a Riemann sum with `n` cells over the support.
    pub fn unit_mass_error(&self, n: usize) -> f64 {
        let r = self.support_radius;
        let h = 2.0 * r / n as f64;
        let sum: f64 = (0..=n).map(|j| self.chi(-r + j as f64 * h)).sum();
        sum * h - 1.0
    }

    /// `∫χ² dy` by the same sum.
    pub fn square_integral(&self, n: usize) -> f64 {
        let r = self.support_radius;
        let h = 2.0 * r / n as f64;
        (0..=n).map(|j| self.chi(-r + j as f64 * h).powi(2)).sum::<f64>() * h
    }

    /// Half width a grid needs to hold the packet on ray `v` at time `t`.
    pub fn required_half_width(&self, v: f64, t: f64) -> f64 {
        v.abs() * t + self.support_radius * t.sqrt()
    }

    fn fits(&self, grid: &GridSpec, v: f64, t: f64) -> bool {
        self.required_half_width(v, t) <= grid.half_width() - grid.dx()
    }

    fn kernel(&self) -> &'static FourierKernel {
        static BUMP: OnceLock<FourierKernel> = OnceLock::new();
        static GAUSS: OnceLock<FourierKernel> = OnceLock::new();
        match self.kind {
            PacketKind::CompactBump => BUMP.get_or_init(|| FourierKernel::build(&Self::bump())),
            PacketKind::Gaussian => GAUSS.get_or_init(|| FourierKernel::build(&Self::gaussian())),
        }
    }
}

fn bump_shape(y: f64) -> f64 {
    if y.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - y * y)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketComponent {
    /// `Φ_v = e^{iφ} χ(y)`.
    Phi,
    /// `Ψ_v = e^{iφ} χ′(y)`.
    Psi,
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 1.0) || !t.is_finite() {
        return Err(DnlsError::Argument(format!("packet diagnostics need t >= 1, got {t}")));
    }
    Ok(())
}

/// `Φ_v(t, ·)` sampled on `grid`.
pub fn packet(v: f64, t: f64, grid: &GridSpec, profile: &PacketProfile) -> Result<ComplexField> {
    packet_component(v, t, grid, profile, PacketComponent::Phi)
}

pub fn packet_component(
    v: f64,
    t: f64,
    grid: &GridSpec,
    profile: &PacketProfile,
    component: PacketComponent,
) -> Result<ComplexField> {
    check_time(t)?;
    if !profile.fits(grid, v, t) {
        let need = profile.required_half_width(v, t) + grid.dx();
        return Err(DnlsError::Domain {
            message: format!("packet on ray v = {v} at t = {t} leaves the box"),
            required_half_width: Some(need),
        });
    }
    let sqrt_t = t.sqrt();
    ComplexField::from_fn(*grid, t, |x| {
        let (c, dc, _) = profile.derivatives((x - v * t) / sqrt_t);
        let amp = match component {
            PacketComponent::Phi => c,
            PacketComponent::Psi => dc,
        };
        Complex64::from_polar(amp, x * x / (4.0 * t))
    })
}

/// `(i∂_t + ∂ₓ²)Φ_v = t⁻¹ e^{iφ} [i(χ + yχ′)/2 + χ″]`.
pub fn packet_residual(v: f64, t: f64, grid: &GridSpec, profile: &PacketProfile) -> Result<ComplexField> {
    let phi = packet(v, t, grid, profile)?;
    let sqrt_t = t.sqrt();
    phi.map(|x, _| {
        let y = (x - v * t) / sqrt_t;
        let (c, dc, ddc) = profile.derivatives(y);
        Complex64::from_polar(1.0 / t, x * x / (4.0 * t)) * Complex64::new(ddc, 0.5 * (c + y * dc))
    })
}

/// `γ(t, v)` on a velocity grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    t: f64,
    v_grid: Vec<f64>,
    gamma: Vec<Complex64>,
    dropped: Vec<f64>,
}

impl Profile {
    pub fn new(t: f64, v_grid: Vec<f64>, gamma: Vec<Complex64>) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(DnlsError::Argument(format!("profile time must be positive, got {t}")));
        }
        if v_grid.len() != gamma.len() {
            return Err(DnlsError::Structural(format!(
                "{} velocities but {} profile values",
                v_grid.len(),
                gamma.len()
            )));
        }
        if v_grid.iter().any(|v| !v.is_finite()) || gamma.iter().any(|g| !g.is_finite()) {
            return Err(DnlsError::Argument("profile contains non-finite values".into()));
        }
        Ok(Self {
            t,
            v_grid,
            gamma,
            dropped: Vec::new(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn v_grid(&self) -> &[f64] {
        &self.v_grid
    }

    pub fn gamma(&self) -> &[Complex64] {
        &self.gamma
    }

    /// Requested velocities whose packet did not fit in the box.
    pub fn dropped(&self) -> &[f64] {
        &self.dropped
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn linf(&self) -> f64 {
        self.gamma.iter().map(|g| g.norm()).fold(0.0, f64::max)
    }

    /// Riemann-sum `‖γ‖_{L²_v}`, using each point's mean neighbour spacing.
    pub fn l2(&self) -> f64 {
        let n = self.v_grid.len();
        if n < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..n {
            let lo = self.v_grid[i.saturating_sub(1)];
            let hi = self.v_grid[(i + 1).min(n - 1)];
            let w = (hi - lo) / if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            sum += self.gamma[i].norm_sqr() * w.abs();
        }
        sum.sqrt()
    }
}

/// `w = e^{−iφ} u` on the grid.
fn demodulate(u: &ComplexField) -> Vec<Complex64> {
    let t = u.time();
    let g = u.grid();
    u.values()
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let x = g.x(j);
            z * Complex64::from_polar(1.0, -x * x / (4.0 * t))
        })
        .collect()
}

/// `dx Σ_j w_j χ((x_j − vt)/√t)` over the packet support.
fn gamma_at(w: &[Complex64], grid: &GridSpec, t: f64, v: f64, profile: &PacketProfile) -> Complex64 {
    let dx = grid.dx();
    let sqrt_t = t.sqrt();
    let h = grid.half_width();
    let reach = profile.support_radius * sqrt_t;
    let lo = (((v * t - reach + h) / dx).floor().max(0.0)) as usize;
    let hi = ((((v * t + reach + h) / dx).ceil()) as usize).min(w.len() - 1);
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &z) in w.iter().enumerate().take(hi + 1).skip(lo) {
        let c = profile.chi((grid.x(j) - v * t) / sqrt_t);
        acc += z * c;
    }
    acc * dx
}

/// `γ(t, v)` by direct quadrature of `u Φ̄_v`; velocities whose packet leaves
/// the box are dropped.
pub fn extract_gamma(u: &ComplexField, v_grid: &[f64], profile: &PacketProfile) -> Result<Profile> {
    let t = u.time();
    check_time(t)?;
    let grid = *u.grid();
    let w = demodulate(u);
    let (kept, dropped): (Vec<f64>, Vec<f64>) = v_grid.iter().partition(|&&v| profile.fits(&grid, v, t));
    let gamma: Vec<Complex64> = kept.par_iter().map(|&v| gamma_at(&w, &grid, t, v, profile)).collect();
    let mut out = Profile::new(t, kept, gamma)?;
    out.dropped = dropped;
    Ok(out)
}

/// Tabulated `G(η) = (2π)^{−1/2} ∫ e^{iy²/4} χ(y) e^{−iyη} dy`.
struct FourierKernel {
    deta: f64,
    /// Values for signed index `m = −N/2 .. N/2 − 1`, stored from `−N/2`.
    values: Vec<Complex64>,
    eta_cut: f64,
}

impl FourierKernel {
    fn build(profile: &PacketProfile) -> Self {
        let n = KERNEL_POINTS;
        let dy = 2.0 * KERNEL_HALF_WIDTH / n as f64;
        let mut data: Vec<Complex64> = (0..n)
            .map(|j| {
                let y = -KERNEL_HALF_WIDTH + j as f64 * dy;
                Complex64::from_polar(profile.chi(y), y * y / 4.0)
            })
            .collect();
        FourierTransform::new(n).forward(&mut data);
        let scale = dy / (2.0 * PI).sqrt();
        let half = n / 2;
        // e^{-iη_m y_0} with y_0 = -64 and η_m = 2πm/128 is (-1)^m
        let values: Vec<Complex64> = (0..n)
            .map(|i| {
                let m = i as i64 - half as i64;
                let slot = m.rem_euclid(n as i64) as usize;
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                data[slot] * (sign * scale)
            })
            .collect();
        let deta = 2.0 * PI / (2.0 * KERNEL_HALF_WIDTH);
        let peak = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let last = values
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() >= KERNEL_CUTOFF * peak)
            .map(|(i, _)| (i as i64 - half as i64).unsigned_abs())
            .max()
            .unwrap_or(0);
        let max_index = (half - LAGRANGE_POINTS) as u64;
        let eta_cut = last.min(max_index) as f64 * deta;
        Self { deta, values, eta_cut }
    }

    fn eval(&self, eta: f64) -> Complex64 {
        if eta.abs() > self.eta_cut {
            return Complex64::new(0.0, 0.0);
        }
        let half = (self.values.len() / 2) as i64;
        let p = eta / self.deta;
        let base = p.floor() as i64 - (LAGRANGE_POINTS as i64 / 2 - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..LAGRANGE_POINTS as i64 {
            let mut weight = 1.0;
            for b in 0..LAGRANGE_POINTS as i64 {
                if b != a {
                    weight *= (p - (base + b) as f64) / (a - b) as f64;
                }
            }
            acc += self.values[(base + a + half) as usize] * weight;
        }
        acc
    }
}

/// `γ(t, v)` through the Fourier side: `dξ Σ_k û_k · conj(Σ_m Φ̂_v(ξ_k + 2πm/dx))`
/// with `Φ̂_v(ξ) = √t e^{i(v²t/4 − vtξ)} G(√t(ξ − v/2))`.
pub fn extract_gamma_fourier(u: &ComplexField, v_grid: &[f64], profile: &PacketProfile) -> Result<Profile> {
    let t = u.time();
    check_time(t)?;
    let grid = *u.grid();
    let spectrum = grid::fft(u);
    let coeffs = spectrum.coeffs();
    let kernel = profile.kernel();
    let n = grid.n_points() as i64;
    let dxi = grid.dxi();
    let period = 2.0 * PI / grid.dx();
    let sqrt_t = t.sqrt();
    let reach = kernel.eta_cut / sqrt_t;

    let (kept, dropped): (Vec<f64>, Vec<f64>) = v_grid.iter().partition(|&&v| profile.fits(&grid, v, t));
    let gamma: Vec<Complex64> = kept
        .par_iter()
        .map(|&v| {
            let centre = v / 2.0;
            let m_lo = ((centre - reach - PI / grid.dx()) / period).floor() as i64;
            let m_hi = ((centre + reach + PI / grid.dx()) / period).ceil() as i64;
            let mut acc = Complex64::new(0.0, 0.0);
            for m in m_lo..=m_hi {
                let shift = m as f64 * period;
                let k_lo = (((centre - reach - shift) / dxi).floor() as i64).max(-n / 2);
                let k_hi = (((centre + reach - shift) / dxi).ceil() as i64).min(n / 2 - 1);
                for k in k_lo..=k_hi {
                    let xi = k as f64 * dxi + shift;
                    let g = kernel.eval(sqrt_t * (xi - centre));
                    if g.re == 0.0 && g.im == 0.0 {
                        continue;
                    }
                    let phase = Complex64::from_polar(sqrt_t, v * v * t / 4.0 - v * t * xi);
                    let slot = k.rem_euclid(n) as usize;
                    acc += coeffs[slot] * (phase * g).conj();
                }
            }
            acc * dxi
        })
        .collect();
    let mut out = Profile::new(t, kept, gamma)?;
    out.dropped = dropped;
    Ok(out)
}

/// Uniform velocities with spacing `spacing_time^{−1/2}` covering `|v| ≤ 2ξ_s`,
/// where `ξ_s` is the largest frequency with `|û| ≥ 10⁻³ max|û|`.
pub fn default_v_grid(u: &ComplexField, spacing_time: f64) -> Vec<f64> {
    let spectrum = grid::fft(u);
    let peak = spectrum.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return vec![0.0];
    }
    let xi_support = spectrum
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() >= 1e-3 * peak)
        .map(|(m, _)| u.grid().frequency(m).abs())
        .fold(0.0, f64::max);
    let v_max = 2.0 * xi_support;
    let dv = 1.0 / spacing_time.max(1.0).sqrt();
    let half = (v_max / dv).floor() as i64;
    (-half..=half).map(|i| i as f64 * dv).collect()
}

/// The ray grid `v_j = x_j / t` for every grid point whose packet fits the box.
pub fn ray_grid(grid: &GridSpec, t: f64, profile: &PacketProfile) -> Vec<f64> {
    (0..grid.n_points())
        .map(|j| grid.x(j) / t)
        .filter(|&v| profile.fits(grid, v, t))
        .collect()
}

/// `‖f‖_{L²_v}` of samples `f(v_j)` on the ray grid, spacing `dx/t`.
pub fn ray_l2(values: &[Complex64], grid: &GridSpec, t: f64) -> f64 {
    (values.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx() / t).sqrt()
}

/// Left-hand sides of the packet approximation bounds divided by their
/// right-hand sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRatios {
    pub t: f64,
    /// `‖u(t,vt) − t^{−1/2}e^{iφ}γ‖∞ / (t^{−3/4}‖Lu‖₂)`.
    pub spatial_linf: f64,
    /// Same difference in `L²_v`, over `t^{−1}‖Lu‖₂`.
    pub spatial_l2v: f64,
    /// `‖u_x(t,vt) − (i/2)t^{−1/2}e^{iφ}vγ‖∞ / (t^{−3/4}(‖Lu‖₂ + ‖L(u_x)‖₂))`.
    pub derivative_linf: f64,
    /// `‖û(t,ξ) − (1+i)e^{−itξ²}γ(t,2ξ)‖∞ / (t^{−1/4}‖Lu‖₂)`.
    pub fourier_linf: f64,
    /// Same difference in `L²_ξ`, over `t^{−1/2}‖Lu‖₂`.
    pub fourier_l2: f64,
    /// `fourier_linf` without the `(1+i)` factor.
    pub fourier_linf_unscaled: f64,
    /// `fourier_l2` without the `(1+i)` factor.
    pub fourier_l2_unscaled: f64,
}

impl DifferenceRatios {
    /// The five bounded ratios, by name.
    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("spatial_linf", self.spatial_linf),
            ("spatial_l2v", self.spatial_l2v),
            ("derivative_linf", self.derivative_linf),
            ("fourier_linf", self.fourier_linf),
            ("fourier_l2", self.fourier_l2),
        ]
    }
}

/// Compares `u`, `u_x` and `û` with their packet approximations over every
/// ray whose packet fits the box. `lu` and `lux` are `Lu` and `L(u_x)` at the
/// same time.
pub fn difference_bounds(
    u: &ComplexField,
    lu: &ComplexField,
    lux: &ComplexField,
    profile: &PacketProfile,
) -> Result<DifferenceRatios> {
    let t = u.time();
    check_time(t)?;
    if lu.grid() != u.grid() || lux.grid() != u.grid() {
        return Err(DnlsError::Structural("u, Lu and L(u_x) live on different grids".into()));
    }
    if lu.time() != t || lux.time() != t {
        return Err(DnlsError::Structural("u, Lu and L(u_x) are at different times".into()));
    }
    let grid = *u.grid();
    let w = demodulate(u);
    let ux = grid::spectral_derivative(u, 1)?;
    let lu_norm = l2_norm(lu);
    let lux_norm = l2_norm(lux);
    let sqrt_t = t.sqrt();

    let rows: Vec<(Complex64, Complex64)> = (0..grid.n_points())
        .into_par_iter()
        .filter_map(|j| {
            let x = grid.x(j);
            let v = x / t;
            if !profile.fits(&grid, v, t) {
                return None;
            }
            let gamma = gamma_at(&w, &grid, t, v, profile);
            let approx = Complex64::from_polar(1.0 / sqrt_t, x * x / (4.0 * t)) * gamma;
            let d0 = u.values()[j] - approx;
            let d1 = ux.values()[j] - Complex64::new(0.0, 0.5 * v) * approx;
            Some((d0, d1))
        })
        .collect();
    let d0: Vec<Complex64> = rows.iter().map(|r| r.0).collect();
    let d0_linf = d0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let d1_linf = rows.iter().map(|r| r.1.norm()).fold(0.0, f64::max);

    let spectrum = grid::fft(u);
    let scaled_factor = Complex64::new(1.0, 1.0);
    let fourier: Vec<(f64, f64)> = (0..grid.n_points())
        .into_par_iter()
        .filter_map(|m| {
            let xi = grid.frequency(m);
            if !profile.fits(&grid, 2.0 * xi, t) {
                return None;
            }
            let gamma = gamma_at(&w, &grid, t, 2.0 * xi, profile);
            let free = Complex64::from_polar(1.0, -t * xi * xi) * gamma;
            let uhat = spectrum.coeffs()[m];
            Some(((uhat - scaled_factor * free).norm(), (uhat - free).norm()))
        })
        .collect();
    let dxi = grid.dxi();
    let f_linf = fourier.iter().map(|f| f.0).fold(0.0, f64::max);
    let f_l2 = (fourier.iter().map(|f| f.0 * f.0).sum::<f64>() * dxi).sqrt();
    let g_linf = fourier.iter().map(|f| f.1).fold(0.0, f64::max);
    let g_l2 = (fourier.iter().map(|f| f.1 * f.1).sum::<f64>() * dxi).sqrt();

    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    Ok(DifferenceRatios {
        t,
        spatial_linf: ratio(d0_linf, t.powf(-0.75) * lu_norm),
        spatial_l2v: ratio(ray_l2(&d0, &grid, t), lu_norm / t),
        derivative_linf: ratio(d1_linf, t.powf(-0.75) * (lu_norm + lux_norm)),
        fourier_linf: ratio(f_linf, t.powf(-0.25) * lu_norm),
        fourier_l2: ratio(f_l2, lu_norm / sqrt_t),
        fourier_linf_unscaled: ratio(g_linf, t.powf(-0.25) * lu_norm),
        fourier_l2_unscaled: ratio(g_l2, lu_norm / sqrt_t),
    })
}

/// Size bounds on `γ` itself, each as a ratio to its right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileBounds {
    pub t: f64,
    /// `‖γ‖∞ / (t^{1/2}‖u‖∞)`.
    pub linf: f64,
    /// `‖γ‖_{L²_v} / ‖u‖₂`.
    pub l2: f64,
    /// `‖∂_vγ‖_{L²_v} / ‖Lu‖₂`.
    pub derivative_l2: f64,
    /// `‖⟨v⟩^{k/2}γ‖∞ / (‖Lu‖₂ + ‖u‖_{H^k})` for `k = 0, 1, 2`.
    pub weighted: [f64; 3],
}

/// [`ProfileBounds`] on the full ray grid at `u`'s time.
pub fn profile_bounds(u: &ComplexField, lu: &ComplexField, profile: &PacketProfile) -> Result<ProfileBounds> {
    let t = u.time();
    check_time(t)?;
    let grid = *u.grid();
    let rays = ray_grid(&grid, t, profile);
    let gamma = extract_gamma(u, &rays, profile)?;
    let dv = grid.dx() / t;
    let derivative = uniform_derivative(gamma.gamma(), dv)?;
    let lu_norm = l2_norm(lu);
    let mut weighted = [0.0; 3];
    for (k, slot) in weighted.iter_mut().enumerate() {
        let lhs = rays
            .iter()
            .zip(gamma.gamma())
            .map(|(&v, g)| (1.0 + v * v).powf(k as f64 / 4.0) * g.norm())
            .fold(0.0, f64::max);
        *slot = lhs / (lu_norm + grid::hk_norm(u, k as u32));
    }
    Ok(ProfileBounds {
        t,
        linf: gamma.linf() / (t.sqrt() * linf_norm(u)),
        l2: ray_l2(gamma.gamma(), &grid, t) / l2_norm(u),
        derivative_l2: ray_l2(&derivative, &grid, t) / lu_norm,
        weighted,
    })
}

/// Spectral derivative of uniformly spaced samples, zero-padded to a power of
/// two. The samples should vanish at both ends.
fn uniform_derivative(values: &[Complex64], spacing: f64) -> Result<Vec<Complex64>> {
    let n = values.len().max(8).next_power_of_two() * 2;
    let mut padded = values.to_vec();
    padded.resize(n, Complex64::new(0.0, 0.0));
    let g = GridSpec::new(0.5 * n as f64 * spacing, n)?;
    let field = ComplexField::new(g, 0.0, padded)?;
    let d = grid::spectral_derivative(&field, 1)?;
    Ok(d.values()[..values.len()].to_vec())
}

/// `gamma_t<time>.csv`.
pub fn profile_file_name(t: f64) -> String {
    format!("gamma_t{t:.3}.csv")
}

pub fn write_profile_csv<W: Write>(profile: &Profile, mut w: W) -> std::io::Result<()> {
    writeln!(w, "v,re_gamma,im_gamma,abs_gamma")?;
    for (&v, g) in profile.v_grid.iter().zip(&profile.gamma) {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(v),
            fmt_f64(g.re),
            fmt_f64(g.im),
            fmt_f64(g.norm())
        )?;
    }
    Ok(())
}
