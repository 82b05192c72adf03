//! Uniform periodic grids, unitary Fourier transforms and the norms shared by
//! every other module.
//!
//! The continuous transform convention is
//! `û(ξ) = (2π)^{-1/2} ∫ e^{-ixξ} u(x) dx`. On the grid `x_j = -H + j·dx`
//! the discrete analogue is
//!
//! ```text
//! û_k = dx / √(2π) · Σ_j u_j e^{-i ξ_k x_j},   ξ_k = π k / H,
//! ```
//!
//! which satisfies `Σ_j |u_j|² dx = Σ_k |û_k|² dξ` with `dξ = π / H`.
//! Coefficients are stored in FFT slot order (`k = 0, 1, …, n/2-1, -n/2, …, -1`).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{DnlsError, Result};

/// Relative edge magnitude (against `‖u‖_∞`) above which a field is said to
/// touch the boundary of the periodic box.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

const SNAPSHOT_MAGIC: &[u8; 4] = b"DNLS";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: f64,
    n_points: usize,
}

impl GridSpec {
    /// Grid on `[-half_width, half_width)` with `n_points` samples.
    ///
    /// `n_points` must be a power of two and at least 8.
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(DnlsError::Argument(format!(
                "half_width must be positive and finite, got {half_width}"
            )));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(DnlsError::Argument(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        Ok(Self { half_width, n_points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    /// Spacing of the physical frequencies, `π / half_width`.
    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Signed wavenumber stored in FFT slot `m`.
    pub fn mode(&self, m: usize) -> i64 {
        let n = self.n_points as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    /// Physical frequency `ξ = π k / half_width` of FFT slot `m`.
    pub fn frequency(&self, m: usize) -> f64 {
        self.mode(m) as f64 * self.dxi()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|m| self.frequency(m)).collect()
    }

    pub fn nyquist_slot(&self) -> usize {
        self.n_points / 2
    }

    /// Slots kept by the 2/3 rule: `|k| ≤ n/3`.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cutoff = self.n_points as i64 / 3;
        (0..self.n_points).map(|m| self.mode(m).abs() <= cutoff).collect()
    }
}

/// Complex samples of `u(t, ·)` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    time: f64,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, time: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(DnlsError::Structural(format!(
                "field has {} values but grid has {} points",
                values.len(),
                grid.n_points()
            )));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(DnlsError::Argument(format!(
                "field time must be finite and >= 0, got {time}"
            )));
        }
        if let Some(j) = values.iter().position(|z| !z.is_finite()) {
            return Err(DnlsError::Argument(format!("non-finite value at index {j}")));
        }
        Ok(Self { grid, time, values })
    }

    pub fn from_fn(grid: GridSpec, time: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = (0..grid.n_points()).map(|j| f(grid.x(j))).collect();
        Self::new(grid, time, values)
    }

    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        Self {
            grid,
            time,
            values: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    /// Internal constructor for values produced by trusted arithmetic.
    pub(crate) fn from_parts(grid: GridSpec, time: f64, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, time, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn with_time(mut self, time: f64) -> Result<Self> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(DnlsError::Argument(format!(
                "field time must be finite and >= 0, got {time}"
            )));
        }
        self.time = time;
        Ok(self)
    }

    /// Pointwise map keeping grid and time.
    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &z)| f(self.grid.x(j), z))
            .collect();
        Self::new(self.grid, self.time, values)
    }

    /// `a·self + b·other` on the same grid.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(DnlsError::Structural("fields live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        Self::new(self.grid, self.time, values)
    }

    pub fn norms(&self) -> Norms {
        norms(self)
    }

    pub fn boundary_report(&self) -> BoundaryReport {
        let n = self.grid.n_points();
        let band = (n / 64).max(2);
        let linf = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let weighted_linf = self
            .values
            .iter()
            .enumerate()
            .map(|(j, z)| z.norm() * self.grid.x(j).abs())
            .fold(0.0, f64::max);
        let mut edge = 0.0_f64;
        let mut weighted = 0.0_f64;
        for j in (0..band).chain(n - band..n) {
            let a = self.values[j].norm();
            edge = edge.max(a);
            weighted = weighted.max(a * self.grid.x(j).abs());
        }
        BoundaryReport {
            edge_max: edge,
            weighted_edge_max: weighted,
            linf,
            weighted_linf,
            ok: edge <= BOUNDARY_TOLERANCE * linf && weighted <= BOUNDARY_TOLERANCE * weighted_linf,
        }
    }

    /// Errors with a domain error when the field touches the box edge.
    pub fn check_boundary(&self) -> Result<()> {
        let report = self.boundary_report();
        if report.ok {
            Ok(())
        } else {
            Err(DnlsError::domain(format!(
                "field reaches the boundary at t = {}: edge {:.3e}, x-weighted edge {:.3e}, sup {:.3e}",
                self.time, report.edge_max, report.weighted_edge_max, report.linf
            )))
        }
    }

    /// Trigonometric interpolant evaluated off-grid.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let spectrum = fft(self);
        let norm = (2.0 * PI).sqrt() / (2.0 * self.grid.half_width());
        let nyq = self.grid.nyquist_slot();
        spectrum
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, &c)| {
                let xi = self.grid.frequency(m);
                if m == nyq {
                    // split the Nyquist mode symmetrically so real data stays real
                    c * Complex64::new((xi * x).cos(), 0.0)
                } else {
                    c * Complex64::from_polar(1.0, xi * x)
                }
            })
            .sum::<Complex64>()
            * norm
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryReport {
    /// Largest `|u|` in the edge bands.
    pub edge_max: f64,
    /// Largest `|x·u|` in the edge bands.
    pub weighted_edge_max: f64,
    pub linf: f64,
    /// Largest `|x·u|` anywhere.
    pub weighted_linf: f64,
    pub ok: bool,
}

/// Normalized Fourier coefficients of a field, FFT slot order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n_points() {
            return Err(DnlsError::Structural(format!(
                "spectrum has {} modes but grid has {} points",
                coeffs.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `(Σ |û_k|² dξ)^{1/2}`, equal to the physical L² norm.
    pub fn l2(&self) -> f64 {
        (self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dxi()).sqrt()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward/inverse plan pair with its own scratch space.
///
/// `forward` is the raw DFT `Σ_j u_j e^{-2πijm/n}`; `inverse` includes the
/// `1/n` factor so the pair round-trips.
pub(crate) struct FourierTransform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl FourierTransform {
    pub(crate) fn new(n: usize) -> Self {
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        });
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub(crate) fn forward(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Unnormalized inverse: `Σ_m û_m e^{2πijm/n}`.
    pub(crate) fn inverse_raw(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }

    pub(crate) fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse_raw(data);
        let s = 1.0 / self.n as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }
}

/// Normalized coefficient from a raw DFT value in slot `m`.
fn normalize_raw(grid: &GridSpec, m: usize, z: Complex64) -> Complex64 {
    // e^{-iξ_k x_0} with x_0 = -H is (-1)^k
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    z * (sign * grid.dx() / (2.0 * PI).sqrt())
}

/// Normalized Fourier transform of a field.
pub fn fft(field: &ComplexField) -> Spectrum {
    let grid = *field.grid();
    let mut data = field.values().to_vec();
    FourierTransform::new(grid.n_points()).forward(&mut data);
    let coeffs = data
        .into_iter()
        .enumerate()
        .map(|(m, z)| normalize_raw(&grid, m, z))
        .collect();
    Spectrum { grid, coeffs }
}

/// Inverse of [`fft`]; the result carries the given time.
pub fn inverse_fft(spectrum: &Spectrum, time: f64) -> Result<ComplexField> {
    let grid = *spectrum.grid();
    let scale = (2.0 * PI).sqrt() / grid.dx();
    let mut data: Vec<Complex64> = spectrum
        .coeffs
        .iter()
        .enumerate()
        .map(|(m, &z)| if m % 2 == 0 { z * scale } else { -z * scale })
        .collect();
    FourierTransform::new(grid.n_points()).inverse(&mut data);
    ComplexField::new(grid, time, data)
}

/// Multiplies raw DFT data by `(iξ)^order`, zeroing Nyquist for odd orders.
pub(crate) fn apply_derivative_multiplier(grid: &GridSpec, data: &mut [Complex64], order: u32) {
    let nyq = grid.nyquist_slot();
    for (m, z) in data.iter_mut().enumerate() {
        if order % 2 == 1 && m == nyq {
            *z = Complex64::new(0.0, 0.0);
            continue;
        }
        let ik = Complex64::new(0.0, grid.frequency(m));
        *z *= ik.powu(order);
    }
}

/// `∂ₓ^order u` for `order ∈ {1, 2, 3}`.
pub fn spectral_derivative(field: &ComplexField, order: u32) -> Result<ComplexField> {
    if !(1..=3).contains(&order) {
        return Err(DnlsError::Argument(format!(
            "derivative order must be 1, 2 or 3, got {order}"
        )));
    }
    let grid = *field.grid();
    let mut data = field.values().to_vec();
    let mut ft = FourierTransform::new(grid.n_points());
    ft.forward(&mut data);
    apply_derivative_multiplier(&grid, &mut data, order);
    ft.inverse(&mut data);
    ComplexField::new(grid, field.time(), data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

pub fn l2_norm(field: &ComplexField) -> f64 {
    (field.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * field.grid().dx()).sqrt()
}

pub fn linf_norm(field: &ComplexField) -> f64 {
    field.values().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖⟨ξ⟩^k û‖₂`. `k = 0` returns the physical L² norm itself.
pub fn hk_norm(field: &ComplexField, k: u32) -> f64 {
    if k == 0 {
        return l2_norm(field);
    }
    let spectrum = fft(field);
    let grid = spectrum.grid;
    let sum: f64 = spectrum
        .coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let xi = grid.frequency(m);
            (1.0 + xi * xi).powi(k as i32) * c.norm_sqr()
        })
        .sum();
    (sum * grid.dxi()).sqrt()
}

/// `‖x·u‖₂` with grid coordinates centred at the origin.
pub fn weighted_l2_norm(field: &ComplexField) -> f64 {
    let grid = field.grid();
    let sum: f64 = field
        .values()
        .iter()
        .enumerate()
        .map(|(j, z)| (grid.x(j) * z.norm()).powi(2))
        .sum();
    (sum * grid.dx()).sqrt()
}

pub fn norms(field: &ComplexField) -> Norms {
    Norms {
        l2: l2_norm(field),
        h1: hk_norm(field, 1),
        linf: linf_norm(field),
    }
}

/// Writes the binary snapshot: `"DNLS"`, version, `n`, half width, time,
/// then `n` interleaved little-endian `(re, im)` pairs.
pub fn write_snapshot<W: Write>(field: &ComplexField, mut w: W) -> std::io::Result<()> {
    let grid = field.grid();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.n_points() as u32).to_le_bytes())?;
    w.write_all(&grid.half_width().to_le_bytes())?;
    w.write_all(&field.time().to_le_bytes())?;
    for z in field.values() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<ComplexField> {
    let io = |e: std::io::Error| DnlsError::Format(e.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(DnlsError::Format(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io)?;
    let version = u32::from_le_bytes(b4);
    if version != SNAPSHOT_VERSION {
        return Err(DnlsError::Format(format!("unsupported version {version}")));
    }
    r.read_exact(&mut b4).map_err(io)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8).map_err(io)?;
    let half_width = f64::from_le_bytes(b8);
    r.read_exact(&mut b8).map_err(io)?;
    let time = f64::from_le_bytes(b8);
    let grid = GridSpec::new(half_width, n)?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8).map_err(io)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8).map_err(io)?;
        let im = f64::from_le_bytes(b8);
        values.push(Complex64::new(re, im));
    }
    ComplexField::new(grid, time, values)
}

pub fn save_snapshot(field: &ComplexField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| DnlsError::io(path, e))?;
    write_snapshot(field, std::io::BufWriter::new(file)).map_err(|e| DnlsError::io(path, e))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<ComplexField> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DnlsError::io(path, e))?;
    read_snapshot(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(grid: GridSpec, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.n_points())
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexField::new(grid, 0.0, values).unwrap()
    }

    fn max_rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(GridSpec::new(10.0, 4).is_err());
        assert!(GridSpec::new(10.0, 100).is_err());
        assert!(GridSpec::new(-1.0, 64).is_err());
        assert!(GridSpec::new(f64::NAN, 64).is_err());
        let g = GridSpec::new(10.0, 64).unwrap();
        assert_eq!(g.dx() * 64.0, 20.0);
    }

    #[test]
    fn frequencies_are_symmetric_except_nyquist() {
        let g = GridSpec::new(3.0, 32).unwrap();
        let xi = g.frequencies();
        for m in 1..32 {
            if m == g.nyquist_slot() {
                continue;
            }
            let neg = xi.iter().any(|&y| (y + xi[m]).abs() < 1e-12);
            assert!(neg, "missing -ξ for slot {m}");
        }
        assert!(!xi.iter().any(|&y| (y - PI * 16.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn field_rejects_wrong_length_and_nan() {
        let g = GridSpec::new(1.0, 8).unwrap();
        assert!(matches!(
            ComplexField::new(g, 0.0, vec![c(0.0, 0.0); 7]),
            Err(DnlsError::Structural(_))
        ));
        let mut v = vec![c(0.0, 0.0); 8];
        v[3] = c(f64::NAN, 0.0);
        assert!(ComplexField::new(g, 0.0, v).is_err());
    }

    #[test]
    fn pure_mode_has_single_coefficient() {
        let g = GridSpec::new(8.0, 64).unwrap();
        let xi1 = g.frequency(1);
        let u = ComplexField::from_fn(g, 0.0, |x| Complex64::from_polar(1.0, xi1 * x)).unwrap();
        let s = fft(&u);
        for (m, z) in s.coeffs().iter().enumerate() {
            if m == 1 {
                // dx/√(2π)·n·e^{-iξ₁x₀}·e^{iξ₁x₀}
                assert!((z.norm() - 16.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
            } else {
                assert!(z.norm() < 1e-12, "slot {m}: {z}");
            }
        }
    }

    #[test]
    fn constant_field_maps_to_zero_mode() {
        // û_0 = dx/√(2π) Σ_j 1 = 2H/√(2π)
        let g = GridSpec::new(5.0, 128).unwrap();
        let u = ComplexField::from_fn(g, 0.0, |_| c(1.0, 0.0)).unwrap();
        let s = fft(&u);
        let expected = 10.0 / (2.0 * PI).sqrt();
        assert!((s.coeffs()[0] - c(expected, 0.0)).norm() < 1e-12);
        assert!(s.coeffs()[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn roundtrip_and_parseval_over_sizes() {
        let mut n = 64;
        while n <= 8192 {
            let g = GridSpec::new(7.5, n).unwrap();
            let u = random_field(g, n as u64);
            let s = fft(&u);
            let back = inverse_fft(&s, 0.0).unwrap();
            assert!(max_rel_diff(back.values(), u.values()) < 1e-12, "n = {n}");
            let l2 = l2_norm(&u);
            assert!((s.l2() - l2).abs() / l2 < 1e-12, "n = {n}");
            n *= 2;
        }
    }

    #[test]
    fn inverse_rejects_length_mismatch() {
        let g = GridSpec::new(1.0, 16).unwrap();
        assert!(Spectrum::new(g, vec![c(0.0, 0.0); 15]).is_err());
    }

    #[test]
    fn derivative_of_pure_modes() {
        let g = GridSpec::new(4.0, 128).unwrap();
        let xi1 = g.frequency(1);
        let u = ComplexField::from_fn(g, 0.0, |x| Complex64::from_polar(1.0, xi1 * x)).unwrap();
        let du = spectral_derivative(&u, 1).unwrap();
        let expect: Vec<_> = u.values().iter().map(|z| z * c(0.0, xi1)).collect();
        assert!(max_rel_diff(du.values(), &expect) < 1e-10);

        let v = ComplexField::from_fn(g, 0.0, |x| c((xi1 * x).cos(), 0.0)).unwrap();
        let d2 = spectral_derivative(&v, 2).unwrap();
        let expect: Vec<_> = v.values().iter().map(|z| z * (-xi1 * xi1)).collect();
        assert!(max_rel_diff(d2.values(), &expect) < 1e-10);
    }

    #[test]
    fn derivative_of_gaussian() {
        let g = GridSpec::new(12.0, 512).unwrap();
        let u = ComplexField::from_fn(g, 0.0, |x| c((-x * x).exp(), 0.0)).unwrap();
        let du = spectral_derivative(&u, 1).unwrap();
        let err = (0..g.n_points())
            .map(|j| {
                let x = g.x(j);
                (du.values()[j] - c(-2.0 * x * (-x * x).exp(), 0.0)).norm()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn odd_derivative_keeps_real_fields_real() {
        let g = GridSpec::new(3.0, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = ComplexField::new(g, 0.0, (0..32).map(|_| c(rng.gen_range(-1.0..1.0), 0.0)).collect()).unwrap();
        for order in [1, 3] {
            let du = spectral_derivative(&u, order).unwrap();
            assert!(du.values().iter().all(|z| z.im.abs() < 1e-12));
        }
    }

    #[test]
    fn unsupported_order_is_rejected() {
        let g = GridSpec::new(3.0, 32).unwrap();
        let u = ComplexField::zeros(g, 0.0);
        assert!(matches!(spectral_derivative(&u, 0), Err(DnlsError::Argument(_))));
        assert!(matches!(spectral_derivative(&u, 4), Err(DnlsError::Argument(_))));
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = GridSpec::new(6.0, 64).unwrap();
        let u = ComplexField::from_fn(g, 0.0, |_| c(0.0, 2.0)).unwrap();
        assert!((l2_norm(&u) - 2.0 * 12f64.sqrt()).abs() < 1e-12);

        let g = GridSpec::new(12.0, 256).unwrap();
        let gauss = ComplexField::from_fn(g, 0.0, |x| c((-x * x / 2.0).exp(), 0.0)).unwrap();
        let n = gauss.norms();
        assert!((n.l2 - PI.powf(0.25)).abs() < 1e-8);
        assert!((n.linf - 1.0).abs() < 1e-15);
        // ‖u‖²_{H¹} = ‖u‖² + ‖u'‖² = √π + √π/2
        assert!((n.h1 - (1.5 * PI.sqrt()).sqrt()).abs() < 1e-8);
        assert_eq!(hk_norm(&gauss, 0), n.l2);
        // ‖x e^{-x²/2}‖² = √π / 2
        assert!((weighted_l2_norm(&gauss) - (PI.sqrt() / 2.0).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn boundary_guard() {
        let g = GridSpec::new(20.0, 256).unwrap();
        let ok = ComplexField::from_fn(g, 0.0, |x| c((-x * x / 2.0).exp(), 0.0)).unwrap();
        assert!(ok.check_boundary().is_ok());
        let wide = ComplexField::from_fn(g, 0.0, |x| c((-x * x / 200.0).exp(), 0.0)).unwrap();
        assert!(matches!(wide.check_boundary(), Err(DnlsError::Domain { .. })));
        assert!(ComplexField::zeros(g, 0.0).check_boundary().is_ok());
        // |u| at the edge passes, |x·u| relative to sup|x·u| does not
        let bump = ComplexField::from_fn(g, 0.0, |x| {
            c((-x * x / 2.0).exp() + 1e-11 * (-(x.abs() - 19.0).powi(2)).exp(), 0.0)
        })
        .unwrap();
        let report = bump.boundary_report();
        assert!(report.edge_max <= 1e-10 * report.linf);
        assert!(!report.ok);
    }

    #[test]
    fn interpolation_hits_grid_values_and_between() {
        let g = GridSpec::new(10.0, 128).unwrap();
        let f = |x: f64| Complex64::from_polar((-x * x / 2.0).exp(), 0.3 * x);
        let u = ComplexField::from_fn(g, 0.0, f).unwrap();
        assert!((u.interpolate(g.x(40)) - u.values()[40]).norm() < 1e-12);
        assert!((u.interpolate(0.123) - f(0.123)).norm() < 1e-10);
    }

    #[test]
    fn snapshot_roundtrip_and_layout() {
        let g = GridSpec::new(2.5, 8).unwrap();
        let u = ComplexField::from_fn(g, 1.25, |x| c(x, -x * x)).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&u, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 8 + 8 * 16);
        assert_eq!(&buf[0..4], b"DNLS");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(buf[12..20].try_into().unwrap()), 2.5);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 1.25);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), -2.5);
        let back = read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, u);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(&bad[..]), Err(DnlsError::Format(_))));
        assert!(read_snapshot(&buf[..40]).is_err());
    }

    proptest! {
        #[test]
        fn derivative_is_linear(seed in 0u64..1000, a_re in -2.0..2.0f64, a_im in -2.0..2.0f64, b in -2.0..2.0f64) {
            let g = GridSpec::new(4.0, 64).unwrap();
            let u = random_field(g, seed);
            let v = random_field(g, seed + 7919);
            let a = c(a_re, a_im);
            let b = c(b, 0.0);
            for order in 1..=3 {
                let lhs = spectral_derivative(&u.combine(a, &v, b).unwrap(), order).unwrap();
                let rhs = spectral_derivative(&u, order).unwrap()
                    .combine(a, &spectral_derivative(&v, order).unwrap(), b).unwrap();
                prop_assert!(max_rel_diff(lhs.values(), rhs.values()) < 1e-12);
            }
        }

        #[test]
        fn parseval_holds(seed in 0u64..10_000, log_n in 3u32..12) {
            let g = GridSpec::new(3.7, 1 << log_n).unwrap();
            let u = random_field(g, seed);
            let l2 = l2_norm(&u);
            prop_assert!((fft(&u).l2() - l2).abs() / l2 < 1e-12);
        }
    }
}
