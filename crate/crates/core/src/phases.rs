//! Off-diagonal geometric phase factors of pure states, nondegenerate mixed
//! states and degenerate mixed states, with gauge-invariance diagnostics.
//!
//! Indices in [`IndexTuple`] are 1-based. Products run over the tuple in
//! order, with the tuple rotated so that it starts at its smallest index;
//! the trace is cyclic, so this only fixes the floating-point evaluation
//! order and makes cyclically equivalent tuples give identical results.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::evolution::{diagonal_gauge, Integrator, SampledPath, TimeGrid, UnitaryPath};
use crate::linalg::{
    cyclic_shift_unitary, density_root, expm, identity, matrix_power, trace, CMatrix, OrthonormalBasis,
    PhaseResult, SpectralDensity, DEFAULT_NODAL_TOL, ONE,
};
use crate::random::{random_hermitian, SmoothPhase};

/// Ordered tuple (j_1, …, j_l) of distinct 1-based indices, read cyclically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexTuple {
    indices: Vec<usize>,
}

impl IndexTuple {
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return invalid("index tuple must not be empty");
        }
        if indices.len() > dim {
            return invalid(format!("order {} exceeds dimension {dim}", indices.len()));
        }
        for (a, &j) in indices.iter().enumerate() {
            if j == 0 || j > dim {
                return invalid(format!("index {j} outside 1..={dim}"));
            }
            if indices[..a].contains(&j) {
                return invalid(format!("index {j} repeated"));
            }
        }
        Ok(Self { indices })
    }

    pub fn order(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The same cycle started at position `k`.
    pub fn rotated(&self, k: usize) -> Self {
        let mut indices = self.indices.clone();
        indices.rotate_left(k % self.indices.len());
        Self { indices }
    }

    fn canonical(&self) -> Vec<usize> {
        let start = (0..self.indices.len()).min_by_key(|&a| self.indices[a]).unwrap();
        self.rotated(start).indices
    }
}

/// ρ_1 together with the basis that defines the cyclic shift W; the members
/// are ρ_n = W^{n−1} ρ_1 W†^{n−1}.
#[derive(Debug, Clone)]
pub struct StateFamily {
    rho1: SpectralDensity,
    basis: OrthonormalBasis,
    shift: CMatrix,
}

impl StateFamily {
    pub fn new(rho1: SpectralDensity, basis: OrthonormalBasis) -> Result<Self> {
        if rho1.dim() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: rho1.dim() });
        }
        if !rho1.is_diagonal_in(&basis, 1e-10) {
            return invalid("ρ_1 must be diagonal in the basis that defines W");
        }
        let shift = cyclic_shift_unitary(&basis)?;
        Ok(Self { rho1: rho1.completed(), basis, shift })
    }

    /// Family in the computational basis.
    pub fn computational(rho1: SpectralDensity) -> Result<Self> {
        let basis = OrthonormalBasis::computational(rho1.dim());
        Self::new(rho1, basis)
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn rho1(&self) -> &SpectralDensity {
        &self.rho1
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn shift(&self) -> &CMatrix {
        &self.shift
    }

    /// ρ_n for 1-based n.
    pub fn member(&self, n: usize) -> SpectralDensity {
        self.rho1.conjugated(&matrix_power(&self.shift, (n - 1) % self.dim()))
    }
}

/// |Tr(W^{j_2−j_1} ρ_{j_1})| with W defined by `basis`; vanishes when ρ_1 is
/// diagonal in that basis.
pub fn noninterference_check(rho1: &SpectralDensity, basis: &OrthonormalBasis, j1: usize, j2: usize) -> Result<f64> {
    let n = basis.dim();
    if j1 == j2 {
        return invalid("indices must differ");
    }
    if j1 == 0 || j2 == 0 || j1 > n || j2 > n {
        return invalid(format!("indices must lie in 1..={n}"));
    }
    let w = cyclic_shift_unitary(basis)?;
    let rho_j1 = matrix_power(&w, j1 - 1) * rho1.matrix() * matrix_power(&w.adjoint(), j1 - 1);
    let power = (j2 + n - j1) % n;
    Ok(trace(&(matrix_power(&w, power) * rho_j1)).norm())
}

/// One factor ⟨ψ_{j_a}|U(τ)|ψ_{j_{a+1}}⟩ of a pure-state phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub amplitude: Complex64,
    pub defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurePhase {
    pub result: PhaseResult,
    pub links: Vec<Link>,
}

/// Phase computations sharing one integration setup and nodal tolerance.
#[derive(Debug, Clone)]
pub struct PhaseEngine {
    integrator: Integrator,
    nodal_tol: f64,
}

impl PhaseEngine {
    pub fn new(integrator: Integrator, nodal_tol: f64) -> Self {
        Self { integrator, nodal_tol }
    }

    pub fn with_grid(grid: TimeGrid) -> Self {
        Self::new(Integrator::new(grid), DEFAULT_NODAL_TOL)
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integrator
    }

    pub fn nodal_tol(&self) -> f64 {
        self.nodal_tol
    }

    /// ∏_a Φ[⟨ψ_{j_a}|U(τ)|ψ_{j_{a+1}}⟩] d_{j_a}(τ).
    pub fn pure(&self, path: &UnitaryPath, basis: &OrthonormalBasis, idx: &IndexTuple) -> Result<PurePhase> {
        if basis.dim() != path.dim() {
            return Err(Error::DimensionMismatch { expected: path.dim(), found: basis.dim() });
        }
        check_tuple(idx, basis.dim())?;
        let order = idx.canonical();
        let states: Vec<_> = order.iter().map(|&j| basis.vector(j - 1).clone()).collect();
        let (d, u) = self.integrator.connection_factors(path, &states)?;
        let l = order.len();
        let mut raw = ONE;
        let mut phase = ONE;
        let mut links = Vec::with_capacity(l);
        for a in 0..l {
            let b = (a + 1) % l;
            let amplitude = states[a].dotc(&(&u * &states[b]));
            let defined = amplitude.norm() >= self.nodal_tol && amplitude.norm() > 0.0;
            links.push(Link { from: order[a], to: order[b], amplitude, defined });
            raw *= amplitude * d[a];
            if defined {
                phase *= amplitude / amplitude.norm() * d[a];
            }
        }
        let defined = links.iter().all(|k| k.defined);
        let result = PhaseResult {
            phase: if defined { phase } else { Complex64::new(0.0, 0.0) },
            raw_trace: raw,
            defined,
            magnitude: raw.norm(),
        };
        Ok(PurePhase { result, links })
    }

    /// Φ[Tr ∏_a U^∥(τ) ρ_{j_a}^{1/l}] with U^∥ built in the family basis.
    pub fn mixed_nondegenerate(&self, path: &UnitaryPath, family: &StateFamily, idx: &IndexTuple) -> Result<PhaseResult> {
        check_family(path, family, idx)?;
        if !family.rho1().nondegenerate_nonzero(0.0) {
            return Err(Error::DegenerateSpectrum(
                "ρ_1 has a degenerate nonzero eigenvalue; use the degenerate-state phase".into(),
            ));
        }
        let upar = self.integrator.parallel_transport_unitary(path, family.basis())?;
        self.phase_from_transporters(family, idx, |_| Ok(upar.clone()))
    }

    /// Φ[Tr ∏_a U(τ) V^∥_{j_a}(τ) ρ_{j_a}^{1/l}] with V^∥ transporting each
    /// level of ρ_{j_a}, its kernel included.
    pub fn mixed_degenerate(&self, path: &UnitaryPath, family: &StateFamily, idx: &IndexTuple) -> Result<PhaseResult> {
        check_family(path, family, idx)?;
        self.phase_from_transporters(family, idx, |j| Ok(self.integrator.parallel_family(path, &family.member(j))?.transporter))
    }

    /// Φ[Tr ∏_a T_{j_a} ρ_{j_a}^{1/l}] for precomputed transporters T_j = U_j^∥(τ).
    /// Transporters depend on the path and on the level projectors only, so one
    /// set serves every spectrum with the same eigenspaces.
    pub fn phase_from_transporters(
        &self,
        family: &StateFamily,
        idx: &IndexTuple,
        transporter: impl Fn(usize) -> Result<CMatrix>,
    ) -> Result<PhaseResult> {
        check_tuple(idx, family.dim())?;
        let order = idx.canonical();
        let l = order.len();
        let mut product = identity(family.dim());
        for &j in &order {
            let t = transporter(j)?;
            if t.shape() != (family.dim(), family.dim()) {
                return Err(Error::DimensionMismatch { expected: family.dim(), found: t.nrows() });
            }
            product = product * t * density_root(&family.member(j), l)?;
        }
        Ok(crate::linalg::phase_functional(trace(&product), self.nodal_tol))
    }
}

fn check_tuple(idx: &IndexTuple, dim: usize) -> Result<()> {
    IndexTuple::new(idx.indices().to_vec(), dim).map(|_| ())
}

fn check_family(path: &UnitaryPath, family: &StateFamily, idx: &IndexTuple) -> Result<()> {
    if family.dim() != path.dim() {
        return Err(Error::DimensionMismatch { expected: path.dim(), found: family.dim() });
    }
    check_tuple(idx, family.dim())
}

pub fn pure_offdiagonal_phase(
    path: &UnitaryPath,
    basis: &OrthonormalBasis,
    idx: &IndexTuple,
    grid: &TimeGrid,
    nodal_tol: f64,
) -> Result<PurePhase> {
    PhaseEngine::new(Integrator::new(grid.clone()), nodal_tol).pure(path, basis, idx)
}

pub fn mixed_offdiagonal_phase_nondeg(
    path: &UnitaryPath,
    family: &StateFamily,
    idx: &IndexTuple,
    grid: &TimeGrid,
    nodal_tol: f64,
) -> Result<PhaseResult> {
    PhaseEngine::new(Integrator::new(grid.clone()), nodal_tol).mixed_nondegenerate(path, family, idx)
}

pub fn mixed_offdiagonal_phase_degenerate(
    path: &UnitaryPath,
    family: &StateFamily,
    idx: &IndexTuple,
    grid: &TimeGrid,
    nodal_tol: f64,
) -> Result<PhaseResult> {
    PhaseEngine::new(Integrator::new(grid.clone()), nodal_tol).mixed_degenerate(path, family, idx)
}

/// Which phase a gauge report recomputes.
#[derive(Debug, Clone)]
pub enum PhaseTarget {
    Pure(OrthonormalBasis),
    Nondegenerate(StateFamily),
    Degenerate(StateFamily),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeReport {
    /// Largest |γ_gauged − γ| over the trials that produced a defined phase.
    pub max_deviation: f64,
    pub trials: usize,
    /// Trials skipped because either phase was undefined.
    pub excluded: usize,
    /// |γ| difference between the sampled path and the path as given; this is
    /// discretization error, not gauge dependence.
    pub representation_gap: f64,
}

/// Shape of the random gauge families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeSpec {
    /// Peak amplitude of each sinusoid in θ(t).
    pub amplitude: f64,
    /// Angular frequencies are drawn below this many cycles per path duration.
    pub max_cycles: f64,
}

impl Default for GaugeSpec {
    fn default() -> Self {
        Self { amplitude: 1.0, max_cycles: 2.0 }
    }
}

impl PhaseEngine {
    fn phase_of(&self, path: &UnitaryPath, target: &PhaseTarget, idx: &IndexTuple) -> Result<PhaseResult> {
        match target {
            PhaseTarget::Pure(basis) => Ok(self.pure(path, basis, idx)?.result),
            PhaseTarget::Nondegenerate(f) => self.mixed_nondegenerate(path, f, idx),
            PhaseTarget::Degenerate(f) => self.mixed_degenerate(path, f, idx),
        }
    }

    /// Recomputes the phase on `n_trials` gauge-transformed copies of the
    /// sampled path: diagonal phases Σ_k e^{iθ_k(t)}|ψ_k⟩⟨ψ_k| for pure and
    /// nondegenerate targets, block unitaries exp(−iθ(t)K) commuting with
    /// every ρ_{j_a} for degenerate targets. Trial `i` draws from stream `i`
    /// of a generator seeded with `seed`.
    pub fn gauge_invariance_report(
        &self,
        path: &UnitaryPath,
        target: &PhaseTarget,
        idx: &IndexTuple,
        n_trials: usize,
        seed: u64,
        spec: GaugeSpec,
    ) -> Result<GaugeReport> {
        if n_trials == 0 {
            return invalid("gauge report needs at least one trial");
        }
        let grid = self.integrator.grid();
        let samples = self.integrator.evolve(path)?;
        let sampled: UnitaryPath = SampledPath::new(grid.nodes().to_vec(), samples.clone())?.into();
        let reference = self.phase_of(&sampled, target, idx)?;
        let representation_gap = reference.distance(&self.phase_of(path, target, idx)?);
        let blocks = gauge_blocks(target, idx);
        let max_freq = std::f64::consts::TAU * spec.max_cycles / grid.duration();
        let dim = path.dim();

        let mut max_deviation: f64 = 0.0;
        let mut excluded = 0;
        for trial in 0..n_trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let gauges: Vec<CMatrix> = match &blocks {
                GaugeBlocks::Diagonal(basis) => {
                    let thetas: Vec<SmoothPhase> =
                        (0..dim).map(|_| SmoothPhase::random(&mut rng, spec.amplitude, max_freq)).collect();
                    grid.nodes()
                        .iter()
                        .map(|&t| diagonal_gauge(basis, &thetas.iter().map(|th| th.eval(t)).collect::<Vec<_>>()))
                        .collect()
                }
                GaugeBlocks::Blocks(basis, groups) => {
                    let mut k = CMatrix::zeros(dim, dim);
                    for g in groups {
                        let h = random_hermitian(&mut rng, g.len(), 1.0);
                        for (a, &i) in g.iter().enumerate() {
                            for (b, &j) in g.iter().enumerate() {
                                k += crate::linalg::outer(basis.vector(i), basis.vector(j)) * h[(a, b)];
                            }
                        }
                    }
                    let theta = SmoothPhase::random(&mut rng, spec.amplitude, max_freq);
                    grid.nodes().iter().map(|&t| expm(&(&k * Complex64::new(0.0, -theta.eval(t))))).collect()
                }
            };
            let gauged: Vec<CMatrix> = samples.iter().zip(&gauges).map(|(u, g)| u * g).collect();
            let gauged: UnitaryPath = SampledPath::new(grid.nodes().to_vec(), gauged)?.into();
            let result = self.phase_of(&gauged, target, idx)?;
            if reference.defined && result.defined {
                max_deviation = max_deviation.max(result.distance(&reference));
            } else {
                excluded += 1;
            }
        }
        Ok(GaugeReport { max_deviation, trials: n_trials, excluded, representation_gap })
    }
}

enum GaugeBlocks {
    Diagonal(OrthonormalBasis),
    /// Groups of basis positions that lie in the same level of every ρ_{j_a}.
    Blocks(OrthonormalBasis, Vec<Vec<usize>>),
}

fn gauge_blocks(target: &PhaseTarget, idx: &IndexTuple) -> GaugeBlocks {
    match target {
        PhaseTarget::Pure(basis) => GaugeBlocks::Diagonal(basis.clone()),
        PhaseTarget::Nondegenerate(f) => GaugeBlocks::Diagonal(f.basis().clone()),
        PhaseTarget::Degenerate(f) => {
            let members: Vec<SpectralDensity> = idx.indices().iter().map(|&j| f.member(j)).collect();
            let signature = |k: usize| -> Vec<usize> {
                let v = f.basis().vector(k);
                members
                    .iter()
                    .map(|m| {
                        m.levels().iter().position(|lv| v.dotc(&(&lv.projector * v)).re > 0.5).unwrap_or(usize::MAX)
                    })
                    .collect()
            };
            let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
            for k in 0..f.dim() {
                let sig = signature(k);
                match groups.iter_mut().find(|(s, _)| *s == sig) {
                    Some((_, g)) => g.push(k),
                    None => groups.push((sig, vec![k])),
                }
            }
            GaugeBlocks::Blocks(f.basis().clone(), groups.into_iter().map(|(_, g)| g).collect())
        }
    }
}

pub fn gauge_invariance_report(
    path: &UnitaryPath,
    target: &PhaseTarget,
    idx: &IndexTuple,
    grid: &TimeGrid,
    n_trials: usize,
    seed: u64,
) -> Result<GaugeReport> {
    PhaseEngine::with_grid(grid.clone()).gauge_invariance_report(path, target, idx, n_trials, seed, GaugeSpec::default())
}
