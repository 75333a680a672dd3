//! Experiment configuration files (TOML).
//!
//! Parsing happens in two stages. Serde checks the document shape and reports
//! line and column on failure; [`ExperimentConfig::validate`] then checks
//! cross references such as index ranges and schedule tiling. Physics checks
//! (Hermiticity, normalization, unitarity) run when the engine objects are
//! built and fail with [`CliError::Physics`].

use num_complex::Complex64;
use offdiag_core::evolution::presets::{block_rotation, precession, pseudopure_block_path};
use offdiag_core::evolution::{Generator, GeneratorSchedule, Segment, UnitaryPath};
use offdiag_core::linalg::{DEFAULT_DEGENERACY_TOL, DEFAULT_NODAL_TOL, MAX_DIM};
use offdiag_core::phases::{IndexTuple, StateFamily};
use offdiag_core::pseudopure::pseudopure_family;
use offdiag_core::random::random_hermitian;
use offdiag_core::{CMatrix, OrthonormalBasis, SpectralDensity};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_GRID_STEPS: usize = offdiag_core::evolution::DEFAULT_STEPS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pure,
    Mixed,
    Degenerate,
    PseudopureClosed,
    NodalScan,
    Figure1,
    Interfere,
    Selftest,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Pure => "pure",
            Mode::Mixed => "mixed",
            Mode::Degenerate => "degenerate",
            Mode::PseudopureClosed => "pseudopure-closed",
            Mode::NodalScan => "nodal-scan",
            Mode::Figure1 => "figure1",
            Mode::Interfere => "interfere",
            Mode::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    DEFAULT_GRID_STEPS
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { steps: DEFAULT_GRID_STEPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_nodal")]
    pub nodal: f64,
    #[serde(default = "default_degeneracy")]
    pub degeneracy: f64,
}

fn default_nodal() -> f64 {
    DEFAULT_NODAL_TOL
}

fn default_degeneracy() -> f64 {
    DEFAULT_DEGENERACY_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { nodal: DEFAULT_NODAL_TOL, degeneracy: DEFAULT_DEGENERACY_TOL }
    }
}

/// Row-major list of (re, im) pairs.
pub type MatrixEntries = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    /// ρ_1 = (1−ε)I/N + ε|1⟩⟨1| in the computational basis.
    Pseudopure { epsilon: f64 },
    /// ρ_1 = Σ_k p_k |b_k⟩⟨b_k| for the columns b_k of `basis` (default computational).
    Spectrum {
        eigenvalues: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<MatrixEntries>,
    },
    /// Explicit density matrix, which must be diagonal in `basis`.
    Matrix {
        entries: MatrixEntries,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<MatrixEntries>,
    },
    /// Only a basis, for pure-state phases.
    Basis {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<MatrixEntries>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub start: f64,
    pub end: f64,
    pub generator: MatrixEntries,
    /// Optional linear term: H(s) = generator + slope·s with s local time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<MatrixEntries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathSpec {
    Schedule {
        segments: Vec<SegmentSpec>,
    },
    BlockRotation {
        n: usize,
        m: usize,
        axis: [f64; 3],
        angle: f64,
        #[serde(default = "one")]
        duration: f64,
    },
    Precession {
        theta: f64,
        #[serde(default = "one_turn")]
        turns: u32,
    },
    PseudopureBlock {
        n: usize,
        m: usize,
        eta: f64,
        omega: f64,
    },
    /// Piecewise-linear random generators drawn from the config seed.
    Random {
        #[serde(default = "two")]
        segments: usize,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn one_turn() -> u32 {
    1
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudopureSpec {
    pub epsilon: f64,
    pub eta: f64,
    pub omega: f64,
    /// Also evaluate the phases with the degenerate engine on the block path.
    #[serde(default)]
    pub verify: bool,
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanSource {
    /// Closed-form residuals.
    #[default]
    Closed,
    /// Traces from the degenerate engine on the pseudopure block path.
    Engine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub omega: f64,
    pub epsilon: Range,
    pub eta: Range,
    #[serde(default)]
    pub source: ScanSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure1Spec {
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    /// Number of η intervals on [0, 1].
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_ns() -> Vec<usize> {
    vec![3, 4, 5, 6]
}

fn default_points() -> usize {
    1000
}

impl Default for Figure1Spec {
    fn default() -> Self {
        Self { ns: default_ns(), points: default_points() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfereSpec {
    #[serde(default = "default_chi_points")]
    pub chi_points: usize,
}

fn default_chi_points() -> usize {
    offdiag_core::interferometer::DEFAULT_CHI_POINTS
}

impl Default for InterfereSpec {
    fn default() -> Self {
        Self { chi_points: default_chi_points() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Promote an undefined phase (or vanishing fringes) to a failing exit status.
    #[serde(default)]
    pub require_defined: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudopure: Option<PseudopureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure1: Option<Figure1Spec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interfere: Option<InterfereSpec>,
}

fn schema<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Schema(msg.into()))
}

fn finite(field: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        schema(format!("field `{field}` must be finite, got {x}"))
    }
}

/// Parses, fills defaults and validates cross references.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Schema(e.to_string().trim_end().to_string()))?;
    cfg.fill_defaults();
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// A config with only the mode set, defaults filled.
    pub fn for_mode(mode: Mode) -> Self {
        let mut cfg = Self {
            mode,
            dimension: None,
            indices: None,
            seed: None,
            require_defined: false,
            output: None,
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
            state: None,
            path: None,
            pseudopure: None,
            scan: None,
            figure1: None,
            interfere: None,
        };
        cfg.fill_defaults();
        cfg
    }

    fn fill_defaults(&mut self) {
        match self.mode {
            Mode::Figure1 => {
                self.figure1.get_or_insert_with(Figure1Spec::default);
            }
            Mode::Interfere => {
                self.interfere.get_or_insert_with(InterfereSpec::default);
            }
            Mode::PseudopureClosed => {
                if self.indices.is_none() {
                    self.indices = Some(vec![1, 2]);
                }
            }
            _ => {}
        }
    }

    /// Canonical TOML text; parsing it gives back an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are always representable in TOML")
    }

    fn require_dimension(&self) -> Result<usize, CliError> {
        let Some(n) = self.dimension else {
            return schema(format!("mode `{}` needs `dimension`", self.mode.name()));
        };
        if !(1..=MAX_DIM).contains(&n) {
            return schema(format!("field `dimension` = {n} outside 1..={MAX_DIM}"));
        }
        Ok(n)
    }

    fn require_indices(&self, n: usize) -> Result<&[usize], CliError> {
        let Some(idx) = self.indices.as_deref() else {
            return schema(format!("mode `{}` needs `indices`", self.mode.name()));
        };
        IndexTuple::new(idx.to_vec(), n).map_err(|e| CliError::Schema(format!("field `indices`: {e}")))?;
        Ok(idx)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.steps == 0 {
            return schema("field `grid.steps` must be positive");
        }
        if !(self.tolerances.nodal >= 0.0 && self.tolerances.nodal.is_finite()) {
            return schema("field `tolerances.nodal` must be a finite nonnegative number");
        }
        if !(self.tolerances.degeneracy >= 0.0 && self.tolerances.degeneracy.is_finite()) {
            return schema("field `tolerances.degeneracy` must be a finite nonnegative number");
        }
        match self.mode {
            Mode::Pure | Mode::Mixed | Mode::Degenerate | Mode::Interfere => {
                let n = self.require_dimension()?;
                let idx = self.require_indices(n)?;
                if self.mode == Mode::Interfere && idx.len() != 2 {
                    return schema("field `indices`: interference needs a pair (n, m)");
                }
                if self.mode != Mode::Pure && self.state.is_none() {
                    return schema(format!("mode `{}` needs a [state] table", self.mode.name()));
                }
                if let Some(state) = &self.state {
                    self.validate_state(state, n)?;
                }
                let Some(path) = &self.path else {
                    return schema(format!("mode `{}` needs a [path] table", self.mode.name()));
                };
                self.validate_path(path, n)?;
                if let Some(spec) = &self.interfere {
                    if spec.chi_points < 8 {
                        return schema("field `interfere.chi_points` must be at least 8");
                    }
                }
            }
            Mode::PseudopureClosed => {
                let n = self.require_dimension()?;
                if n < 2 {
                    return schema("field `dimension` must be at least 2 for pseudopure states");
                }
                let idx = self.require_indices(n)?;
                if idx.len() != 2 {
                    return schema("field `indices`: pseudopure block phases need a pair (n, m)");
                }
                let Some(p) = &self.pseudopure else {
                    return schema("mode `pseudopure-closed` needs a [pseudopure] table");
                };
                for (name, x) in [("pseudopure.epsilon", p.epsilon), ("pseudopure.eta", p.eta), ("pseudopure.omega", p.omega)] {
                    finite(name, x)?;
                }
            }
            Mode::NodalScan => {
                let n = self.require_dimension()?;
                if n < 2 {
                    return schema("field `dimension` must be at least 2 for pseudopure states");
                }
                let Some(scan) = &self.scan else {
                    return schema("mode `nodal-scan` needs a [scan] table");
                };
                finite("scan.omega", scan.omega)?;
                for (name, r) in [("scan.epsilon", scan.epsilon), ("scan.eta", scan.eta)] {
                    if r.count == 0 {
                        return schema(format!("field `{name}.count` must be positive"));
                    }
                    finite(&format!("{name}.start"), r.start)?;
                    finite(&format!("{name}.stop"), r.stop)?;
                }
            }
            Mode::Figure1 => {
                let spec = self.figure1.as_ref().expect("filled by defaults");
                if spec.ns.is_empty() || spec.ns.iter().any(|&n| n < 3) {
                    return schema("field `figure1.ns` must list dimensions N >= 3");
                }
                if spec.points == 0 {
                    return schema("field `figure1.points` must be positive");
                }
            }
            Mode::Selftest => {
                if self.seed.is_none() {
                    return schema("mode `selftest` needs `seed`");
                }
            }
        }
        Ok(())
    }

    fn validate_state(&self, state: &StateSpec, n: usize) -> Result<(), CliError> {
        let check_basis = |basis: &Option<MatrixEntries>| match basis {
            Some(b) => check_entries("state.basis", b, n),
            None => Ok(()),
        };
        match state {
            StateSpec::Pseudopure { epsilon } => finite("state.epsilon", *epsilon),
            StateSpec::Spectrum { eigenvalues, basis } => {
                if eigenvalues.len() != n {
                    return schema(format!("field `state.eigenvalues` has {} entries, expected {n}", eigenvalues.len()));
                }
                for &p in eigenvalues {
                    finite("state.eigenvalues", p)?;
                }
                check_basis(basis)
            }
            StateSpec::Matrix { entries, basis } => {
                check_entries("state.entries", entries, n)?;
                check_basis(basis)
            }
            StateSpec::Basis { basis } => check_basis(basis),
        }
    }

    fn validate_path(&self, path: &PathSpec, n: usize) -> Result<(), CliError> {
        let block_indices = |a: usize, b: usize| {
            if a == 0 || b == 0 || a > n || b > n || a == b {
                schema(format!("path block indices ({a}, {b}) must be distinct and in 1..={n}"))
            } else {
                Ok(())
            }
        };
        match path {
            PathSpec::Schedule { segments } => {
                if segments.is_empty() {
                    return schema("field `path.segments` must not be empty");
                }
                for (i, s) in segments.iter().enumerate() {
                    let label = format!("path.segments[{i}]");
                    finite(&format!("{label}.start"), s.start)?;
                    finite(&format!("{label}.end"), s.end)?;
                    check_entries(&format!("{label}.generator"), &s.generator, n)?;
                    if let Some(slope) = &s.slope {
                        check_entries(&format!("{label}.slope"), slope, n)?;
                    }
                    if !(s.end > s.start) {
                        return schema(format!("{label} [{}, {}] is empty or reversed", s.start, s.end));
                    }
                    if i == 0 && s.start != 0.0 {
                        return schema(format!("{label} [{}, {}] must start at t = 0", s.start, s.end));
                    }
                    if i > 0 {
                        let prev = &segments[i - 1];
                        if s.start < prev.end {
                            return schema(format!(
                                "{label} [{}, {}] overlaps path.segments[{}] [{}, {}]",
                                s.start,
                                s.end,
                                i - 1,
                                prev.start,
                                prev.end
                            ));
                        }
                        if s.start > prev.end {
                            return schema(format!("gap before {label} [{}, {}]: previous interval ends at {}", s.start, s.end, prev.end));
                        }
                    }
                }
                Ok(())
            }
            PathSpec::BlockRotation { n: a, m: b, axis, angle, duration } => {
                block_indices(*a, *b)?;
                for x in axis.iter().chain([angle, duration]) {
                    finite("path", *x)?;
                }
                Ok(())
            }
            PathSpec::Precession { theta, .. } => {
                if n != 2 {
                    return schema("path `precession` needs dimension 2");
                }
                finite("path.theta", *theta)
            }
            PathSpec::PseudopureBlock { n: a, m: b, eta, omega } => {
                block_indices(*a, *b)?;
                finite("path.eta", *eta)?;
                finite("path.omega", *omega)
            }
            PathSpec::Random { segments, scale } => {
                if self.seed.is_none() {
                    return schema("path `random` needs `seed`");
                }
                if *segments == 0 {
                    return schema("field `path.segments` must be positive");
                }
                finite("path.scale", *scale)
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension.expect("validated")
    }

    pub fn index_tuple(&self) -> Result<IndexTuple, CliError> {
        Ok(IndexTuple::new(self.indices.clone().expect("validated"), self.dimension())?)
    }

    /// The unitary path described by `[path]`.
    pub fn build_path(&self) -> Result<UnitaryPath, CliError> {
        let n = self.dimension();
        let path = self.path.as_ref().expect("validated");
        let schedule = match path {
            PathSpec::Schedule { segments } => {
                let segs = segments
                    .iter()
                    .map(|s| {
                        let h = to_matrix(&s.generator, n);
                        let generator = match &s.slope {
                            Some(slope) => Generator::Polynomial(vec![h, to_matrix(slope, n)]),
                            None => Generator::Constant(h),
                        };
                        Segment { start: s.start, end: s.end, generator }
                    })
                    .collect();
                GeneratorSchedule::new(segs)?
            }
            PathSpec::BlockRotation { n: a, m: b, axis, angle, duration } => block_rotation(n, *a, *b, *axis, *angle, *duration)?,
            PathSpec::Precession { theta, turns } => precession(*theta, *turns)?,
            PathSpec::PseudopureBlock { n: a, m: b, eta, omega } => pseudopure_block_path(n, *a, *b, *eta, *omega)?,
            PathSpec::Random { segments, scale } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.expect("validated"));
                let segs = (0..*segments)
                    .map(|i| Segment {
                        start: i as f64,
                        end: (i + 1) as f64,
                        generator: Generator::Polynomial(vec![
                            random_hermitian(&mut rng, n, *scale),
                            random_hermitian(&mut rng, n, *scale),
                        ]),
                    })
                    .collect();
                GeneratorSchedule::new(segs)?
            }
        };
        Ok(schedule.into())
    }

    fn state_basis(&self) -> Result<OrthonormalBasis, CliError> {
        let n = self.dimension();
        let entries = match &self.state {
            Some(StateSpec::Spectrum { basis, .. } | StateSpec::Matrix { basis, .. } | StateSpec::Basis { basis }) => basis.as_ref(),
            _ => None,
        };
        match entries {
            Some(b) => Ok(OrthonormalBasis::from_unitary(&to_matrix(b, n))?),
            None => Ok(OrthonormalBasis::computational(n)),
        }
    }

    /// Basis for pure-state phases.
    pub fn build_basis(&self) -> Result<OrthonormalBasis, CliError> {
        self.state_basis()
    }

    /// ρ_1 with the basis that defines the cyclic shift.
    pub fn build_family(&self) -> Result<StateFamily, CliError> {
        let n = self.dimension();
        let tol = self.tolerances.degeneracy;
        match self.state.as_ref().expect("validated") {
            StateSpec::Pseudopure { epsilon } => {
                if !(0.0..=1.0).contains(epsilon) {
                    return Err(CliError::Physics(format!("purity {epsilon} outside [0, 1]")));
                }
                if *epsilon == 0.0 {
                    let mixed = SpectralDensity::diagonal(&vec![1.0 / n as f64; n], &OrthonormalBasis::computational(n), tol)?;
                    return Ok(StateFamily::computational(mixed)?);
                }
                Ok(pseudopure_family(n, *epsilon)?)
            }
            StateSpec::Spectrum { eigenvalues, .. } => {
                let basis = self.state_basis()?;
                let rho = SpectralDensity::diagonal(eigenvalues, &basis, tol)?;
                Ok(StateFamily::new(rho, basis)?)
            }
            StateSpec::Matrix { entries, .. } => {
                let rho = SpectralDensity::from_matrix(&to_matrix(entries, n), tol)?;
                Ok(StateFamily::new(rho, self.state_basis()?)?)
            }
            StateSpec::Basis { .. } => Err(CliError::Physics(format!(
                "mode `{}` needs a density operator, not only a basis",
                self.mode.name()
            ))),
        }
    }
}

fn check_entries(field: &str, entries: &MatrixEntries, n: usize) -> Result<(), CliError> {
    if entries.len() != n * n {
        return schema(format!("field `{field}` has {} entries, expected {} for an {n}x{n} matrix", entries.len(), n * n));
    }
    if entries.iter().flatten().any(|x| !x.is_finite()) {
        return schema(format!("field `{field}` contains a non-finite entry"));
    }
    Ok(())
}

pub fn to_matrix(entries: &MatrixEntries, n: usize) -> CMatrix {
    CMatrix::from_row_iterator(n, n, entries.iter().map(|[re, im]| Complex64::new(*re, *im)))
}
