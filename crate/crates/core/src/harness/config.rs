//! Experiment configuration.
//!
//! Configs are flat TOML: one `key = value` per line, no tables. Every key is
//! optional and unknown keys are rejected.
//!
//! ```toml
//! kind = "decay_scan"        # simulate | decay_scan | packet_test | soliton_test | linear_baseline
//! half_width = 2048.0
//! n = 32768
//! dt = 2e-3
//! t_end = 100.0
//! snapshot_every = 0.5
//! integrator = "ifrk4"       # ifrk4 | etdrk4
//! dealias = true
//! initial = "gaussian"       # gaussian | soliton | custom
//! epsilon = 0.05             # gaussian size, and the threshold of the smallness check
//! width = 1.0
//! noise = 0.0                # relative size of the seeded perturbation
//! theta = 0.7853981633974483
//! lambda = 1.0
//! shift = 0.0
//! snapshot_file = "u0.bin"   # for initial = "custom"
//! epsilon_ladder = [0.025, 0.05, 0.1]
//! packet = "compact_bump"    # compact_bump | gaussian
//! fit_t_min = 5.0
//! output_dir = "out"
//! seed = 0
//! ```
//!
//! Command-line flags are applied on top of the file; see [`Overrides`].

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::grid::{self, hk_norm, l2_norm, ComplexField, GridSpec};
use crate::solitons::{soliton_initial, SolitonParams};
use crate::solver::{Integrator, SolverConfig};
use crate::wave_packets::{PacketKind, PacketProfile};
use crate::{DnlsError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    DecayScan,
    PacketTest,
    SolitonTest,
    LinearBaseline,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::DecayScan => "decay_scan",
            Self::PacketTest => "packet_test",
            Self::SolitonTest => "soliton_test",
            Self::LinearBaseline => "linear_baseline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialData {
    /// `A e^{−x²/2w²}` plus an optional seeded perturbation, scaled so that
    /// `‖x u₀‖_{H¹} + ‖u₀‖₂ = epsilon`.
    Gaussian {
        epsilon: f64,
        width: f64,
        noise: f64,
    },
    Soliton {
        params: SolitonParams,
    },
    Custom {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub half_width: f64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    pub integrator: Integrator,
    pub dealias: bool,
    pub initial_data: InitialData,
    /// Threshold for the smallness check on the initial data.
    pub epsilon: f64,
    pub epsilon_ladder: Option<Vec<f64>>,
    pub packet: PacketKind,
    pub fit_t_min: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Keys accepted in a config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<ExperimentKind>,
    half_width: Option<f64>,
    n: Option<usize>,
    dt: Option<f64>,
    t_end: Option<f64>,
    snapshot_every: Option<f64>,
    integrator: Option<Integrator>,
    dealias: Option<bool>,
    initial: Option<String>,
    epsilon: Option<f64>,
    width: Option<f64>,
    noise: Option<f64>,
    theta: Option<f64>,
    lambda: Option<f64>,
    shift: Option<f64>,
    snapshot_file: Option<PathBuf>,
    epsilon_ladder: Option<Vec<f64>>,
    packet: Option<PacketKind>,
    fit_t_min: Option<f64>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
}

/// Values from the command line; `Some` wins over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub t_end: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `kind` with no file and no overrides.
    pub fn defaults(kind: ExperimentKind) -> Self {
        Self::build(
            RawConfig::default(),
            &Overrides {
                kind: Some(kind),
                ..Default::default()
            },
        )
        .expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| DnlsError::Config(e.to_string()))?;
        Self::build(raw, overrides)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &Overrides) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DnlsError::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    fn build(raw: RawConfig, o: &Overrides) -> Result<Self> {
        let kind = o.kind.or(raw.kind).unwrap_or(ExperimentKind::DecayScan);
        let soliton = kind == ExperimentKind::SolitonTest;
        let initial = raw
            .initial
            .clone()
            .unwrap_or_else(|| if soliton { "soliton" } else { "gaussian" }.to_string());
        let epsilon = o.epsilon.or(raw.epsilon).unwrap_or(if soliton { 0.1 } else { 0.05 });
        let initial_data = match initial.as_str() {
            "gaussian" => InitialData::Gaussian {
                epsilon,
                width: raw.width.unwrap_or(1.0),
                noise: raw.noise.unwrap_or(0.0),
            },
            "soliton" => {
                let params = SolitonParams::new(o.theta.or(raw.theta).unwrap_or(FRAC_PI_4))?
                    .with_scale(raw.lambda.unwrap_or(1.0))?
                    .with_shift(raw.shift.unwrap_or(0.0));
                InitialData::Soliton { params }
            }
            "custom" => InitialData::Custom {
                path: raw
                    .snapshot_file
                    .clone()
                    .ok_or_else(|| DnlsError::Config("initial = \"custom\" needs snapshot_file".into()))?,
            },
            other => {
                return Err(DnlsError::Config(format!(
                    "unknown initial data {other:?}; expected gaussian, soliton or custom"
                )))
            }
        };
        let (half_width, n, dt, t_end) = if soliton {
            (64.0, 2048, 1e-3, 20.0)
        } else {
            (2048.0, 32768, 2e-3, 100.0)
        };
        let cfg = Self {
            kind,
            half_width: raw.half_width.unwrap_or(half_width),
            n: o.n.or(raw.n).unwrap_or(n),
            dt: raw.dt.unwrap_or(dt),
            t_end: o.t_end.or(raw.t_end).unwrap_or(t_end),
            snapshot_every: raw.snapshot_every.unwrap_or(0.5),
            integrator: raw.integrator.unwrap_or_default(),
            dealias: raw.dealias.unwrap_or(true),
            initial_data,
            epsilon,
            epsilon_ladder: raw.epsilon_ladder,
            packet: raw.packet.unwrap_or(PacketKind::CompactBump),
            fit_t_min: raw.fit_t_min.unwrap_or(5.0),
            output_dir: o
                .output_dir
                .clone()
                .or(raw.output_dir)
                .unwrap_or_else(|| PathBuf::from("out").join(kind.name())),
            seed: o.seed.or(raw.seed).unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DnlsError::Config(m));
        self.grid()?;
        if !(self.dt > 0.0) || !(self.t_end > 0.0) || !(self.snapshot_every > 0.0) {
            return bad(format!(
                "dt, t_end and snapshot_every must be positive (got {}, {}, {})",
                self.dt, self.t_end, self.snapshot_every
            ));
        }
        let mut eps = vec![self.epsilon];
        if let Some(ladder) = &self.epsilon_ladder {
            if ladder.is_empty() {
                return bad("epsilon_ladder is empty".into());
            }
            eps.extend(ladder);
        }
        if let InitialData::Gaussian { epsilon, width, noise } = &self.initial_data {
            eps.push(*epsilon);
            if !(*width > 0.0) || !(*noise >= 0.0) {
                return bad(format!("gaussian needs width > 0 and noise >= 0, got {width}, {noise}"));
            }
        }
        if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < 0.5)) {
            return bad(format!("epsilon values must lie in (0, 0.5), got {e}"));
        }
        if let InitialData::Custom { path } = &self.initial_data {
            if !path.is_file() {
                return bad(format!("snapshot file {} does not exist", path.display()));
            }
        }
        if !(self.fit_t_min >= 0.0) {
            return bad(format!("fit_t_min must be nonnegative, got {}", self.fit_t_min));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.half_width, self.n)
    }

    /// Solver settings with snapshots every `snapshot_every` up to `t_end`.
    pub fn solver(&self) -> SolverConfig {
        SolverConfig::new(self.dt, self.t_end)
            .with_integrator(self.integrator)
            .with_dealias(self.dealias)
            .with_snapshot_every(self.snapshot_every)
    }

    pub fn packet_profile(&self) -> PacketProfile {
        match self.packet {
            PacketKind::CompactBump => PacketProfile::bump(),
            PacketKind::Gaussian => PacketProfile::gaussian(),
        }
    }

    /// The same experiment with a different gaussian size.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut out = self.clone();
        out.epsilon = epsilon;
        if let InitialData::Gaussian { epsilon: e, .. } = &mut out.initial_data {
            *e = epsilon;
        }
        out.epsilon_ladder = None;
        out
    }

    /// Canonical JSON: field order is fixed by the struct definition.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Flat TOML that loads back to an equal config.
    pub fn to_toml(&self) -> String {
        let mut lines = vec![
            format!("kind = \"{}\"", self.kind.name()),
            format!("half_width = {:?}", self.half_width),
            format!("n = {}", self.n),
            format!("dt = {:?}", self.dt),
            format!("t_end = {:?}", self.t_end),
            format!("snapshot_every = {:?}", self.snapshot_every),
            format!("integrator = \"{}\"", self.integrator),
            format!("dealias = {}", self.dealias),
            format!("epsilon = {:?}", self.epsilon),
        ];
        match &self.initial_data {
            InitialData::Gaussian { width, noise, .. } => {
                lines.push("initial = \"gaussian\"".into());
                lines.push(format!("width = {width:?}"));
                lines.push(format!("noise = {noise:?}"));
            }
            InitialData::Soliton { params } => {
                lines.push("initial = \"soliton\"".into());
                lines.push(format!("theta = {:?}", params.theta));
                lines.push(format!("lambda = {:?}", params.scale));
                lines.push(format!("shift = {:?}", params.shift));
            }
            InitialData::Custom { path } => {
                lines.push("initial = \"custom\"".into());
                lines.push(format!("snapshot_file = {:?}", path.display().to_string()));
            }
        }
        if let Some(ladder) = &self.epsilon_ladder {
            let items: Vec<String> = ladder.iter().map(|e| format!("{e:?}")).collect();
            lines.push(format!("epsilon_ladder = [{}]", items.join(", ")));
        }
        lines.push(format!(
            "packet = \"{}\"",
            match self.packet {
                PacketKind::CompactBump => "compact_bump",
                PacketKind::Gaussian => "gaussian",
            }
        ));
        lines.push(format!("fit_t_min = {:?}", self.fit_t_min));
        lines.push(format!("output_dir = {:?}", self.output_dir.display().to_string()));
        lines.push(format!("seed = {}", self.seed));
        lines.join("\n") + "\n"
    }

    /// Builds `u₀` on the configured grid.
    pub fn initial_field(&self) -> Result<ComplexField> {
        let grid = self.grid()?;
        match &self.initial_data {
            InitialData::Gaussian { epsilon, width, noise } => {
                gaussian_initial(grid, *epsilon, *width, *noise, self.seed)
            }
            InitialData::Soliton { params } => soliton_initial(params, grid),
            InitialData::Custom { path } => {
                let u = grid::load_snapshot(path)?;
                if u.time() != 0.0 {
                    return Err(DnlsError::Config(format!(
                        "snapshot {} is at t = {}, initial data must be at t = 0",
                        path.display(),
                        u.time()
                    )));
                }
                Ok(u)
            }
        }
    }
}

/// Result of the smallness check `‖x u₀‖_{H¹} + ‖u₀‖₂ ≤ ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub epsilon: f64,
    pub epsilon_effective: f64,
    pub pass: bool,
}

/// `‖x u₀‖_{H¹} + ‖u₀‖₂`, with the H¹ norm taken through the Fourier multiplier `⟨ξ⟩`.
pub fn epsilon_effective(u0: &ComplexField) -> f64 {
    let xu = u0.map(|x, z| x * z).expect("same grid");
    hk_norm(&xu, 1) + l2_norm(u0)
}

/// Data built to size exactly `ε` passes: the comparison allows a relative
/// rounding slack of `1e-12`.
pub fn hypothesis_check(u0: &ComplexField, epsilon: f64) -> HypothesisCheck {
    let epsilon_effective = epsilon_effective(u0);
    HypothesisCheck {
        epsilon,
        epsilon_effective,
        pass: epsilon_effective <= epsilon * (1.0 + 1e-12),
    }
}

/// Gaussian data of size `epsilon`. With `noise > 0` a seeded smooth
/// perturbation `noise · Σ_{k<4} c_k (x/w)^k e^{−x²/2w²}` is added before the
/// final rescaling.
pub fn gaussian_initial(grid: GridSpec, epsilon: f64, width: f64, noise: f64, seed: u64) -> Result<ComplexField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Complex64> = (0..4)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let shape = ComplexField::from_fn(grid, 0.0, |x| {
        let y = x / width;
        let envelope = (-0.5 * y * y).exp();
        let mut p = Complex64::new(0.0, 0.0);
        for c in coeffs.iter().rev() {
            p = p * y + c;
        }
        (Complex64::new(1.0, 0.0) + noise * p) * envelope
    })?;
    let size = epsilon_effective(&shape);
    if size == 0.0 {
        return Err(DnlsError::Argument("gaussian shape has zero size".into()));
    }
    shape.map(|_, z| z * (epsilon / size))
}
