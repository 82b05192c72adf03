//! Time evolution of `i u_t + u_xx = -i (|u|²u)_x` and the exact free
//! Schrödinger propagator.
//!
//! The state is advanced in Fourier space. The stiff linear part
//! `-iξ²` is integrated exactly by either an integrating-factor RK4 or ETDRK4
//! (φ-functions by contour averaging); the nonlinear term `-(|u|²u)_x` is
//! formed pseudospectrally, optionally with the 2/3 rule.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{self, ComplexField, FourierTransform, GridSpec, Norms};
use crate::vector_field::VFDiagnostics;
use crate::{DnlsError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Contour points used for the ETDRK4 coefficients.
const CONTOUR_POINTS: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Ifrk4,
    Etdrk4,
}

impl std::fmt::Display for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Integrator::Ifrk4 => "ifrk4",
            Integrator::Etdrk4 => "etdrk4",
        })
    }
}

impl std::str::FromStr for Integrator {
    type Err = DnlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ifrk4" => Ok(Integrator::Ifrk4),
            "etdrk4" => Ok(Integrator::Etdrk4),
            other => Err(DnlsError::Argument(format!("unknown integrator {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub integrator: Integrator,
    /// Absolute times at which snapshots are recorded, sorted.
    pub snapshot_times: Vec<f64>,
}

impl SolverConfig {
    /// IFRK4 with dealiasing and a single snapshot at `t_end`.
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            dealias: true,
            integrator: Integrator::Ifrk4,
            snapshot_times: vec![t_end],
        }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    /// Snapshots at `0, spacing, 2·spacing, …` up to and including `t_end`.
    pub fn with_snapshot_every(mut self, spacing: f64) -> Self {
        self.snapshot_times = uniform_times(0.0, self.t_end, spacing);
        self
    }

    /// Checks the invariants and returns non-fatal warnings.
    pub fn validate(&self, grid: &GridSpec) -> Result<Vec<String>> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(DnlsError::Argument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(DnlsError::Argument(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        let tol = 1e-12 * self.t_end.max(1.0);
        for w in self.snapshot_times.windows(2) {
            if w[1] < w[0] {
                return Err(DnlsError::Argument("snapshot_times must be sorted".into()));
            }
        }
        if let Some(&t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(t >= -tol && t <= self.t_end + tol))
        {
            return Err(DnlsError::Argument(format!(
                "snapshot time {t} outside [0, {}]",
                self.t_end
            )));
        }
        let mut warnings = Vec::new();
        let dx = grid.dx();
        if self.dt > 0.5 * dx * dx {
            warnings.push(format!(
                "dt = {} exceeds the explicit diffusion limit 0.5·dx² = {:.3e}; \
                 fine for exponential integrators",
                self.dt,
                0.5 * dx * dx
            ));
        }
        Ok(warnings)
    }
}

/// `start, start + spacing, …`, always ending exactly at `end`.
pub fn uniform_times(start: f64, end: f64, spacing: f64) -> Vec<f64> {
    let count = ((end - start) / spacing + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=count).map(|i| start + i as f64 * spacing).collect();
    match times.last() {
        Some(&last) if (end - last).abs() <= 1e-9 * spacing => {
            *times.last_mut().unwrap() = end;
        }
        _ => times.push(end),
    }
    times
}

/// Mass, momentum and energy.
///
/// The signs are those conserved by `i u_t + u_xx = -i(|u|²u)_x`:
///
/// ```text
/// M = ∫ |u|²
/// P = ∫ Im(ū u_x) + ½|u|⁴
/// E = ∫ |u_x|² + (3/2)|u|² Im(ū u_x) + ½|u|⁶
/// ```
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservedTriple {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    /// `∫ |Im(ū u_x)| + ½|u|⁴`, the size of the momentum density.
    pub momentum_scale: f64,
    /// `∫ |u_x|² + (3/2)|u|²|Im(ū u_x)| + ½|u|⁶`.
    pub energy_scale: f64,
}

impl ConservedTriple {
    /// Largest change of the three quantities against `reference`, each
    /// divided by the size of its density in `reference`.
    ///
    /// For data with `Im(ū u_x) = 0`, such as real initial data, the scales
    /// equal the quantities themselves. They keep the drift meaningful when a
    /// quantity vanishes through cancellation (the `θ = π/4` soliton has zero
    /// energy).
    pub fn max_relative_drift(&self, reference: &ConservedTriple) -> f64 {
        let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(b.abs()).max(1e-300);
        rel(self.mass, reference.mass, reference.mass)
            .max(rel(self.momentum, reference.momentum, reference.momentum_scale))
            .max(rel(self.energy, reference.energy, reference.energy_scale))
    }
}

pub fn conserved(field: &ComplexField) -> ConservedTriple {
    let ux = grid::spectral_derivative(field, 1).expect("order 1 is supported");
    let dx = field.grid().dx();
    let (mut mass, mut momentum, mut energy) = (0.0, 0.0, 0.0);
    let (mut p_scale, mut e_scale) = (0.0, 0.0);
    for (&u, &d) in field.values().iter().zip(ux.values()) {
        let rho = u.norm_sqr();
        let current = (u.conj() * d).im;
        mass += rho;
        momentum += current + 0.5 * rho * rho;
        energy += d.norm_sqr() + 1.5 * rho * current + 0.5 * rho * rho * rho;
        p_scale += current.abs() + 0.5 * rho * rho;
        e_scale += d.norm_sqr() + 1.5 * rho * current.abs() + 0.5 * rho * rho * rho;
    }
    ConservedTriple {
        mass: mass * dx,
        momentum: momentum * dx,
        energy: energy * dx,
        momentum_scale: p_scale * dx,
        energy_scale: e_scale * dx,
    }
}

/// Free evolution `û(t, ξ) = û(t₀, ξ) e^{-iξ²(t - t₀)}`.
pub fn linear_propagate(field: &ComplexField, t_target: f64) -> Result<ComplexField> {
    LinearFlow::new(field).at(t_target)
}

/// Exact free flow from a fixed datum; cheap to sample at many times.
pub struct LinearFlow {
    grid: GridSpec,
    t0: f64,
    raw: Vec<Complex64>,
}

impl LinearFlow {
    pub fn new(field: &ComplexField) -> Self {
        let grid = *field.grid();
        let mut raw = field.values().to_vec();
        FourierTransform::new(grid.n_points()).forward(&mut raw);
        Self {
            grid,
            t0: field.time(),
            raw,
        }
    }

    pub fn at(&self, t: f64) -> Result<ComplexField> {
        if !(t.is_finite() && t >= self.t0) {
            return Err(DnlsError::Argument(format!(
                "linear propagation runs forward only: t = {t} < {}",
                self.t0
            )));
        }
        let s = t - self.t0;
        let mut data: Vec<Complex64> = self
            .raw
            .iter()
            .enumerate()
            .map(|(m, &z)| {
                let xi = self.grid.frequency(m);
                z * Complex64::from_polar(1.0, -xi * xi * s)
            })
            .collect();
        FourierTransform::new(self.grid.n_points()).inverse(&mut data);
        ComplexField::new(self.grid, t, data)
    }
}

/// The equations the stepper knows how to advance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum System {
    /// `u_t = i u_xx - (|u|²u)_x`
    Dnls,
    /// `(u, z)` with `z_t = i z_xx - (2|u|²z - u²z̄)_x + |u|²u`, the equation
    /// satisfied by `z = Lu`.
    WithVectorField,
}

impl System {
    fn components(self) -> usize {
        match self {
            System::Dnls => 1,
            System::WithVectorField => 2,
        }
    }
}

enum Coefficients {
    Ifrk4 {
        full: Vec<Complex64>,
        half: Vec<Complex64>,
    },
    Etdrk4 {
        full: Vec<Complex64>,
        half: Vec<Complex64>,
        q: Vec<Complex64>,
        f1: Vec<Complex64>,
        f2: Vec<Complex64>,
        f3: Vec<Complex64>,
    },
}

impl Coefficients {
    fn new(grid: &GridSpec, integrator: Integrator, h: f64) -> Self {
        let n = grid.n_points();
        let lin: Vec<Complex64> = (0..n)
            .map(|m| {
                let xi = grid.frequency(m);
                Complex64::new(0.0, -xi * xi)
            })
            .collect();
        let full: Vec<_> = lin.iter().map(|&l| (l * h).exp()).collect();
        let half: Vec<_> = lin.iter().map(|&l| (l * (h / 2.0)).exp()).collect();
        match integrator {
            Integrator::Ifrk4 => Coefficients::Ifrk4 { full, half },
            Integrator::Etdrk4 => {
                let roots: Vec<Complex64> = (1..=CONTOUR_POINTS)
                    .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 - 0.5) / CONTOUR_POINTS as f64))
                    .collect();
                let mut q = Vec::with_capacity(n);
                let mut f1 = Vec::with_capacity(n);
                let mut f2 = Vec::with_capacity(n);
                let mut f3 = Vec::with_capacity(n);
                for &l in &lin {
                    let z = l * h;
                    let (mut sq, mut s1, mut s2, mut s3) = (ZERO, ZERO, ZERO, ZERO);
                    for &root in &roots {
                        let r = z + root;
                        let er = r.exp();
                        let r3 = r * r * r;
                        sq += ((r / 2.0).exp() - 1.0) / r;
                        s1 += (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3;
                        s2 += (2.0 + r + er * (r - 2.0)) / r3;
                        s3 += (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3;
                    }
                    let scale = h / CONTOUR_POINTS as f64;
                    q.push(sq * scale);
                    f1.push(s1 * scale);
                    f2.push(s2 * scale);
                    f3.push(s3 * scale);
                }
                Coefficients::Etdrk4 {
                    full,
                    half,
                    q,
                    f1,
                    f2,
                    f3,
                }
            }
        }
    }
}

/// Fourier-space stepper shared by the DNLS and the `(u, Lu)` systems.
///
/// IFRK4 works in the interaction picture: the state is `w = e^{iξ²τ} û`
/// with `τ` the time since [`Stepper::load`], and the free phase is applied
/// once on output. Multiplying the state by `e^{-iξ²h}` every step would
/// instead accumulate rounding noise spread over the whole box.
pub(crate) struct Stepper {
    grid: GridSpec,
    system: System,
    integrator: Integrator,
    ft: FourierTransform,
    /// `1/n` on kept modes, zero on filtered ones.
    in_weight: Vec<f64>,
    /// `-iξ` on kept modes, zero on filtered ones and at Nyquist.
    out_mul: Vec<Complex64>,
    cache: Vec<(u64, Coefficients)>,
    phys: Vec<Vec<Complex64>>,
    stages: Vec<Vec<Vec<Complex64>>>,
    tmp: Vec<Vec<Complex64>>,
    /// `e^{-iξ²τ}` at the current time (IFRK4 only).
    frame: Vec<Complex64>,
    frame_half: Vec<Complex64>,
    frame_full: Vec<Complex64>,
}

impl Stepper {
    pub(crate) fn new(grid: GridSpec, system: System, integrator: Integrator, dealias: bool) -> Self {
        let n = grid.n_points();
        let nyq = grid.nyquist_slot();
        let mask = dealias.then(|| grid.dealias_mask());
        let keep = |m: usize| mask.as_ref().is_none_or(|k: &Vec<bool>| k[m]);
        let in_weight = (0..n).map(|m| if keep(m) { 1.0 / n as f64 } else { 0.0 }).collect();
        let out_mul = (0..n)
            .map(|m| {
                if m == nyq || !keep(m) {
                    ZERO
                } else {
                    Complex64::new(0.0, -grid.frequency(m))
                }
            })
            .collect();
        let c = system.components();
        let zeros = || vec![vec![ZERO; n]; c];
        Self {
            grid,
            system,
            integrator,
            ft: FourierTransform::new(n),
            in_weight,
            out_mul,
            cache: Vec::new(),
            phys: vec![vec![ZERO; n]; 2],
            stages: (0..5).map(|_| zeros()).collect(),
            tmp: zeros(),
            frame: vec![Complex64::new(1.0, 0.0); n],
            frame_half: vec![ZERO; n],
            frame_full: vec![ZERO; n],
        }
    }

    /// Physical fields to stepper state; resets `τ` to zero.
    pub(crate) fn load(&mut self, fields: &[&ComplexField]) -> Vec<Vec<Complex64>> {
        self.frame.fill(Complex64::new(1.0, 0.0));
        fields
            .iter()
            .map(|f| {
                let mut v = f.values().to_vec();
                self.ft.forward(&mut v);
                v
            })
            .collect()
    }

    /// Physical fields at `τ` after the last [`Stepper::load`].
    pub(crate) fn emit(&mut self, state: &[Vec<Complex64>], tau: f64) -> Vec<Vec<Complex64>> {
        if self.integrator == Integrator::Ifrk4 {
            for (m, e) in self.frame.iter_mut().enumerate() {
                let xi = self.grid.frequency(m);
                *e = Complex64::from_polar(1.0, -xi * xi * tau);
            }
        }
        state
            .iter()
            .map(|s| {
                let mut v = match self.integrator {
                    Integrator::Ifrk4 => s.iter().zip(&self.frame).map(|(a, e)| a * e).collect(),
                    Integrator::Etdrk4 => s.clone(),
                };
                self.ft.inverse(&mut v);
                v
            })
            .collect()
    }

    fn coefficients_index(&mut self, h: f64) -> usize {
        let key = h.to_bits();
        if let Some(i) = self.cache.iter().position(|(k, _)| *k == key) {
            return i;
        }
        if self.cache.len() >= 4 {
            // keep the first entry: it is the regular step
            self.cache.truncate(1);
        }
        self.cache
            .push((key, Coefficients::new(&self.grid, self.integrator, h)));
        self.cache.len() - 1
    }

    /// `conj(frame) · N(frame · input)`.
    fn rotated_nonlinear(&mut self, frame: &[Complex64], input: &[Vec<Complex64>], out: &mut [Vec<Complex64>]) {
        self.nonlinear_in_frame(Some(frame), input, out);
    }

    /// Writes `N(state)` into `out`.
    fn nonlinear(&mut self, state: &[Vec<Complex64>], out: &mut [Vec<Complex64>]) {
        self.nonlinear_in_frame(None, state, out);
    }

    fn nonlinear_in_frame(
        &mut self,
        frame: Option<&[Complex64]>,
        state: &[Vec<Complex64>],
        out: &mut [Vec<Complex64>],
    ) {
        let n = self.grid.n_points();
        for (p, s) in self.phys.iter_mut().zip(state) {
            match frame {
                Some(f) => {
                    for m in 0..n {
                        p[m] = s[m] * f[m] * self.in_weight[m];
                    }
                }
                None => {
                    for m in 0..n {
                        p[m] = s[m] * self.in_weight[m];
                    }
                }
            }
            self.ft.inverse_raw(p);
        }
        match self.system {
            System::Dnls => {
                let o = &mut out[0];
                for (o, u) in o.iter_mut().zip(&self.phys[0]) {
                    *o = u * u.norm_sqr();
                }
                self.ft.forward(o);
                match frame {
                    Some(f) => {
                        for m in 0..n {
                            o[m] *= self.out_mul[m] * f[m].conj();
                        }
                    }
                    None => {
                        for (v, w) in o.iter_mut().zip(&self.out_mul) {
                            *v *= w;
                        }
                    }
                }
            }
            System::WithVectorField => {
                let (u, z) = (&self.phys[0], &self.phys[1]);
                let (ou, oz) = out.split_at_mut(1);
                let (ou, oz) = (&mut ou[0], &mut oz[0]);
                for j in 0..n {
                    let rho = u[j].norm_sqr();
                    ou[j] = u[j] * rho;
                    oz[j] = 2.0 * rho * z[j] - u[j] * u[j] * z[j].conj();
                }
                self.ft.forward(ou);
                self.ft.forward(oz);
                for m in 0..n {
                    let rot = frame.map_or(Complex64::new(1.0, 0.0), |f| f[m].conj());
                    // the source term is filtered like the flux
                    let kept = if self.in_weight[m] > 0.0 { rot } else { ZERO };
                    oz[m] = self.out_mul[m] * rot * oz[m] + kept * ou[m];
                    ou[m] *= self.out_mul[m] * rot;
                }
            }
        }
    }

    /// Advances the raw spectral state by `h`.
    pub(crate) fn step(&mut self, state: &mut [Vec<Complex64>], h: f64) {
        let idx = self.coefficients_index(h);
        let mut stages = std::mem::take(&mut self.stages);
        let mut tmp = std::mem::take(&mut self.tmp);
        let coeffs = std::mem::replace(
            &mut self.cache[idx].1,
            Coefficients::Ifrk4 {
                full: Vec::new(),
                half: Vec::new(),
            },
        );
        let n = self.grid.n_points();
        let comps = state.len();

        match &coeffs {
            Coefficients::Ifrk4 { full, half } => {
                let [k1, k2, k3, k4, _] = &mut stages[..] else {
                    unreachable!()
                };
                let frame0 = std::mem::take(&mut self.frame);
                let mut frame_half = std::mem::take(&mut self.frame_half);
                let mut frame_full = std::mem::take(&mut self.frame_full);
                for m in 0..n {
                    frame_half[m] = frame0[m] * half[m];
                    frame_full[m] = frame0[m] * full[m];
                }
                self.rotated_nonlinear(&frame0, state, k1);
                for c in 0..comps {
                    for m in 0..n {
                        tmp[c][m] = state[c][m] + 0.5 * h * k1[c][m];
                    }
                }
                self.rotated_nonlinear(&frame_half, &tmp, k2);
                for c in 0..comps {
                    for m in 0..n {
                        tmp[c][m] = state[c][m] + 0.5 * h * k2[c][m];
                    }
                }
                self.rotated_nonlinear(&frame_half, &tmp, k3);
                for c in 0..comps {
                    for m in 0..n {
                        tmp[c][m] = state[c][m] + h * k3[c][m];
                    }
                }
                self.rotated_nonlinear(&frame_full, &tmp, k4);
                for c in 0..comps {
                    for m in 0..n {
                        state[c][m] += h / 6.0 * (k1[c][m] + 2.0 * (k2[c][m] + k3[c][m]) + k4[c][m]);
                    }
                }
                self.frame = frame_full;
                self.frame_full = frame0;
                self.frame_half = frame_half;
            }
            Coefficients::Etdrk4 {
                full,
                half,
                q,
                f1,
                f2,
                f3,
            } => {
                let [nv, a, na, nb, nc] = &mut stages[..] else {
                    unreachable!()
                };
                self.nonlinear(state, nv);
                for c in 0..comps {
                    for m in 0..n {
                        a[c][m] = half[m] * state[c][m] + q[m] * nv[c][m];
                    }
                }
                self.nonlinear(a, na);
                for c in 0..comps {
                    for m in 0..n {
                        tmp[c][m] = half[m] * state[c][m] + q[m] * na[c][m];
                    }
                }
                self.nonlinear(&tmp, nb);
                for c in 0..comps {
                    for m in 0..n {
                        tmp[c][m] = half[m] * a[c][m] + q[m] * (2.0 * nb[c][m] - nv[c][m]);
                    }
                }
                self.nonlinear(&tmp, nc);
                for c in 0..comps {
                    for m in 0..n {
                        state[c][m] = full[m] * state[c][m]
                            + f1[m] * nv[c][m]
                            + 2.0 * f2[m] * (na[c][m] + nb[c][m])
                            + f3[m] * nc[c][m];
                    }
                }
            }
        }

        self.cache[idx].1 = coeffs;
        self.stages = stages;
        self.tmp = tmp;
    }
}

fn all_finite(state: &[Vec<Complex64>]) -> bool {
    state.iter().all(|s| s.iter().all(|z| z.is_finite()))
}

/// Steps a system from `t0` through every snapshot time up to `cfg.t_end`,
/// calling `on_snapshot` with physical fields at each requested time.
///
/// The step before each snapshot is shortened so snapshots land exactly on
/// the requested times.
pub(crate) fn run_system(
    initial: &[&ComplexField],
    system: System,
    cfg: &SolverConfig,
    mut on_snapshot: impl FnMut(f64, Vec<Vec<Complex64>>) -> Result<()>,
) -> Result<()> {
    let grid = *initial[0].grid();
    for w in cfg.validate(&grid)? {
        log::warn!("{w}");
    }
    if initial.len() != system.components() || initial.iter().any(|f| *f.grid() != grid) {
        return Err(DnlsError::Structural(
            "initial components do not match the system".into(),
        ));
    }
    let t0 = initial[0].time();
    let tol = 1e-12 * cfg.t_end.max(1.0);
    if cfg.t_end < t0 - tol {
        return Err(DnlsError::Argument(format!(
            "t_end = {} precedes the initial time {t0}",
            cfg.t_end
        )));
    }
    let mut stepper = Stepper::new(grid, system, cfg.integrator, cfg.dealias);
    let mut state = stepper.load(initial);

    let mut targets: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|&t| t >= t0 - tol).collect();
    let record_end = targets.last().is_some_and(|&t| (t - cfg.t_end).abs() <= tol);
    if !record_end {
        targets.push(cfg.t_end);
    }

    let mut t = t0;
    for (i, &target) in targets.iter().enumerate() {
        let span = target - t;
        if span > tol {
            let full_steps = (span / cfg.dt + 1e-9).floor() as usize;
            let mut remainder = span - full_steps as f64 * cfg.dt;
            if remainder < 1e-9 * cfg.dt {
                remainder = 0.0;
            }
            for k in 0..full_steps {
                stepper.step(&mut state, cfg.dt);
                if !all_finite(&state) {
                    return Err(DnlsError::BlowUp {
                        last_good_time: t + k as f64 * cfg.dt,
                    });
                }
            }
            if remainder > 0.0 {
                stepper.step(&mut state, remainder);
                if !all_finite(&state) {
                    return Err(DnlsError::BlowUp {
                        last_good_time: t + full_steps as f64 * cfg.dt,
                    });
                }
            }
        }
        t = target;
        let is_requested = i + 1 < targets.len() || record_end;
        if is_requested {
            on_snapshot(t, stepper.emit(&state, t - t0))?;
        }
    }
    Ok(())
}

/// One step of length `cfg.dt` with the configured integrator.
pub fn dnls_step(field: &ComplexField, cfg: &SolverConfig) -> Result<ComplexField> {
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(DnlsError::Argument(format!("dt must be positive, got {}", cfg.dt)));
    }
    let grid = *field.grid();
    let mut stepper = Stepper::new(grid, System::Dnls, cfg.integrator, cfg.dealias);
    let mut state = stepper.load(&[field]);
    stepper.step(&mut state, cfg.dt);
    if !all_finite(&state) {
        return Err(DnlsError::BlowUp {
            last_good_time: field.time(),
        });
    }
    let values = stepper.emit(&state, cfg.dt).remove(0);
    ComplexField::new(grid, field.time() + cfg.dt, values)
}

/// One time slice of diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub conserved: ConservedTriple,
    pub norms: Norms,
    pub linf_ux: f64,
    /// False when the field touches the edge of the box.
    pub boundary_ok: bool,
    pub vector_field: Option<VFDiagnostics>,
}

impl DiagnosticsRecord {
    pub fn from_field(field: &ComplexField) -> Self {
        let ux = grid::spectral_derivative(field, 1).expect("order 1 is supported");
        Self {
            time: field.time(),
            conserved: conserved(field),
            norms: field.norms(),
            linf_ux: grid::linf_norm(&ux),
            boundary_ok: field.boundary_report().ok,
            vector_field: None,
        }
    }
}

/// Per-snapshot hook; may enrich the record.
pub trait Observer {
    fn observe(&mut self, snapshot: &ComplexField, record: &mut DiagnosticsRecord) -> Result<()>;
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub field: ComplexField,
    pub record: DiagnosticsRecord,
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug)]
pub struct EvolveFailure {
    pub error: DnlsError,
    pub partial: Vec<Snapshot>,
}

impl fmt::Display for EvolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} snapshots recorded)", self.error, self.partial.len())
    }
}

impl std::error::Error for EvolveFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<EvolveFailure> for DnlsError {
    fn from(f: EvolveFailure) -> Self {
        f.error
    }
}

/// Runs the DNLS flow and records a snapshot plus diagnostics at every
/// requested time.
pub fn evolve(
    field: &ComplexField,
    cfg: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> std::result::Result<Vec<Snapshot>, EvolveFailure> {
    let grid = *field.grid();
    let mut out = Vec::with_capacity(cfg.snapshot_times.len());
    let res = run_system(&[field], System::Dnls, cfg, |t, mut phys| {
        let snap = ComplexField::new(grid, t, phys.remove(0))?;
        let mut record = DiagnosticsRecord::from_field(&snap);
        if !record.boundary_ok {
            log::warn!("field touches the boundary at t = {t}");
        }
        for obs in observers.iter_mut() {
            obs.observe(&snap, &mut record)?;
        }
        out.push(Snapshot { field: snap, record });
        Ok(())
    });
    match res {
        Ok(()) => Ok(out),
        Err(error) => Err(EvolveFailure { error, partial: out }),
    }
}

/// Writes diagnostics rows; vector-field columns are appended when every
/// record carries them.
pub fn write_diagnostics_csv<W: Write>(records: &[DiagnosticsRecord], mut w: W) -> std::io::Result<()> {
    let with_vf = !records.is_empty() && records.iter().all(|r| r.vector_field.is_some());
    write!(w, "time,mass,momentum,energy,l2,h1,linf_u,linf_ux")?;
    if with_vf {
        write!(w, ",lu_l2,lux_l2,ks_ratio")?;
    }
    writeln!(w)?;
    for r in records {
        let cols = [
            r.time,
            r.conserved.mass,
            r.conserved.momentum,
            r.conserved.energy,
            r.norms.l2,
            r.norms.h1,
            r.norms.linf,
            r.linf_ux,
        ];
        let mut line = cols.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>();
        if let (true, Some(vf)) = (with_vf, &r.vector_field) {
            line.extend([vf.lu_l2, vf.lux_l2, vf.ks_ratio].iter().map(|v| fmt_f64(*v)));
        }
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
