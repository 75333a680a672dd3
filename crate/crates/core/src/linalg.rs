//! Dense complex linear algebra and the density-operator data model.
//!
//! Matrices are `nalgebra` dynamic matrices over `Complex64`. Residuals are
//! measured with the max-entry norm throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest Hilbert-space dimension accepted by constructors.
pub const MAX_DIM: usize = 64;

/// Relative tolerance under which eigenvalues are merged into one level.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

/// Default threshold on |trace| below which a phase is reported undefined.
pub const DEFAULT_NODAL_TOL: f64 = 1e-10;

/// Tolerance used when validating Hermitian and unitary input.
pub const INPUT_TOL: f64 = 1e-10;

const ORTHONORMAL_TOL: f64 = 1e-12;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return invalid(format!("dimension {dim} outside 1..={MAX_DIM}"));
    }
    Ok(())
}

pub(crate) fn check_square(m: &CMatrix, dim: usize) -> Result<()> {
    if m.nrows() != m.ncols() {
        return invalid(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols()));
    }
    if m.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
    }
    Ok(())
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_residual(h: &CMatrix) -> f64 {
    max_abs_diff(h, &h.adjoint())
}

/// ‖U†U − I‖ in the max-entry norm.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}

/// Residual of P² = P and P† = P.
pub fn projector_residual(p: &CMatrix) -> f64 {
    max_abs_diff(&(p * p), p).max(hermiticity_residual(p))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn outer(ket: &CVector, bra: &CVector) -> CMatrix {
    ket * bra.adjoint()
}

/// Integer matrix power by repeated squaring.
pub fn matrix_power(m: &CMatrix, exp: usize) -> CMatrix {
    let mut result = identity(m.nrows());
    let mut base = m.clone();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

pub(crate) fn ensure_hermitian(h: &CMatrix) -> Result<()> {
    let residual = hermiticity_residual(h);
    if residual > INPUT_TOL {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

pub(crate) fn ensure_unitary(u: &CMatrix, tol: f64) -> Result<()> {
    let residual = unitarity_residual(u);
    if residual > tol {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

pub(crate) fn ensure_projector(p: &CMatrix) -> Result<()> {
    let residual = projector_residual(p);
    if residual > INPUT_TOL {
        return Err(Error::NotProjector { residual });
    }
    Ok(())
}

/// Outcome of applying Φ[z] = z/|z| to a trace-like quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub phase: Complex64,
    pub raw_trace: Complex64,
    pub defined: bool,
    pub magnitude: f64,
}

impl PhaseResult {
    /// Chordal distance |γ_a − γ_b|; two undefined results are at distance 0,
    /// a defined and an undefined one at the maximal distance 2.
    pub fn distance(&self, other: &PhaseResult) -> f64 {
        match (self.defined, other.defined) {
            (true, true) => (self.phase - other.phase).norm(),
            (false, false) => 0.0,
            _ => 2.0,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        self.defined.then(|| self.phase.arg())
    }
}

/// Φ[z] with an explicit nodal threshold on |z|.
pub fn phase_functional(z: Complex64, nodal_tol: f64) -> PhaseResult {
    let magnitude = z.norm();
    if magnitude >= nodal_tol && magnitude > 0.0 {
        PhaseResult { phase: z / magnitude, raw_trace: z, defined: true, magnitude }
    } else {
        PhaseResult { phase: ZERO, raw_trace: z, defined: false, magnitude }
    }
}

/// Orthonormal set of `dim` column vectors spanning the Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    vectors: Vec<CVector>,
}

impl OrthonormalBasis {
    pub fn new(vectors: Vec<CVector>) -> Result<Self> {
        let dim = vectors.len();
        check_dim(dim)?;
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
        }
        for (j, a) in vectors.iter().enumerate() {
            for (k, b) in vectors.iter().enumerate() {
                let expected = if j == k { ONE } else { ZERO };
                if (a.dotc(b) - expected).norm() > ORTHONORMAL_TOL {
                    return invalid(format!("basis vectors {j} and {k} are not orthonormal"));
                }
            }
        }
        Ok(Self { vectors })
    }

    pub fn computational(dim: usize) -> Self {
        let vectors = (0..dim)
            .map(|k| {
                let mut v = CVector::zeros(dim);
                v[k] = ONE;
                v
            })
            .collect();
        Self { vectors }
    }

    /// Basis formed by the columns of a unitary matrix.
    pub fn from_unitary(u: &CMatrix) -> Result<Self> {
        if u.nrows() != u.ncols() {
            return invalid("basis matrix must be square");
        }
        Self::new(u.column_iter().map(|c| c.into_owned()).collect())
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vector(&self, k: usize) -> &CVector {
        &self.vectors[k]
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn projector(&self, k: usize) -> CMatrix {
        outer(&self.vectors[k], &self.vectors[k])
    }

    /// Matrix whose columns are the basis vectors.
    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_columns(&self.vectors)
    }

    pub fn is_computational(&self) -> bool {
        *self == Self::computational(self.dim())
    }
}

/// One eigenvalue with its multiplicity and orthogonal eigenprojector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLevel {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    pub projector: CMatrix,
}

/// Spectral decomposition of a Hermitian matrix with degenerate eigenvalues
/// merged; levels are sorted by decreasing eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSpectrum {
    pub dim: usize,
    pub levels: Vec<SpectralLevel>,
}

impl HermitianSpectrum {
    pub fn reconstruct(&self) -> CMatrix {
        reconstruct(self.dim, &self.levels, |l| l.eigenvalue)
    }
}

fn reconstruct(dim: usize, levels: &[SpectralLevel], f: impl Fn(&SpectralLevel) -> f64) -> CMatrix {
    levels.iter().fold(CMatrix::zeros(dim, dim), |acc, level| {
        acc + &level.projector * Complex64::new(f(level), 0.0)
    })
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues closer than
/// `degeneracy_tol` times the largest |eigenvalue| share a level.
pub fn hermitian_eig(h: &CMatrix, degeneracy_tol: f64) -> Result<HermitianSpectrum> {
    let dim = h.nrows();
    check_dim(dim)?;
    check_square(h, dim)?;
    ensure_hermitian(h)?;
    let symmetrized = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(symmetrized);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let threshold = if scale > 0.0 { degeneracy_tol * scale } else { degeneracy_tol };

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &idx in &order {
        match groups.last_mut() {
            Some(group)
                if eig.eigenvalues[*group.last().unwrap()] - eig.eigenvalues[idx] <= threshold =>
            {
                group.push(idx)
            }
            _ => groups.push(vec![idx]),
        }
    }

    let levels = groups
        .into_iter()
        .map(|group| {
            let eigenvalue =
                group.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / group.len() as f64;
            let mut projector = CMatrix::zeros(dim, dim);
            for &i in &group {
                let v = eig.eigenvectors.column(i);
                projector += &v * v.adjoint();
            }
            SpectralLevel { eigenvalue, multiplicity: group.len(), projector }
        })
        .collect();
    Ok(HermitianSpectrum { dim, levels })
}

/// A density operator stored as its spectral levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    dim: usize,
    levels: Vec<SpectralLevel>,
}

impl SpectralDensity {
    /// Validates unit trace, nonnegativity, projector orthogonality, ranks and
    /// distinctness of the eigenvalues.
    pub fn from_levels(dim: usize, levels: Vec<SpectralLevel>) -> Result<Self> {
        check_dim(dim)?;
        if levels.is_empty() {
            return invalid("density needs at least one level");
        }
        let mut trace_sum = 0.0;
        let mut rank_sum = 0;
        for level in &levels {
            check_square(&level.projector, dim)?;
            if level.eigenvalue < 0.0 {
                return Err(Error::NegativeEigenvalue(level.eigenvalue));
            }
            if level.multiplicity == 0 {
                return invalid("level multiplicity must be positive");
            }
            ensure_projector(&level.projector)?;
            let rank = trace(&level.projector).re;
            if (rank - level.multiplicity as f64).abs() > 1e-9 {
                return invalid(format!(
                    "projector rank {rank:.6} does not match multiplicity {}",
                    level.multiplicity
                ));
            }
            trace_sum += level.eigenvalue * level.multiplicity as f64;
            rank_sum += level.multiplicity;
        }
        if rank_sum > dim {
            return invalid(format!("total rank {rank_sum} exceeds dimension {dim}"));
        }
        if (trace_sum - 1.0).abs() > 1e-12 {
            return invalid(format!("density trace {trace_sum} differs from 1"));
        }
        for (j, a) in levels.iter().enumerate() {
            for b in &levels[j + 1..] {
                if max_abs(&(&a.projector * &b.projector)) > 1e-12 {
                    return Err(Error::NotProjector { residual: max_abs(&(&a.projector * &b.projector)) });
                }
                if a.eigenvalue == b.eigenvalue {
                    return invalid(format!("repeated eigenvalue {} across levels", a.eigenvalue));
                }
            }
        }
        Ok(Self { dim, levels })
    }

    /// Accepts a raw density matrix: Hermitian, positive semidefinite, unit trace.
    pub fn from_matrix(rho: &CMatrix, degeneracy_tol: f64) -> Result<Self> {
        let spectrum = hermitian_eig(rho, degeneracy_tol)?;
        let tr = trace(rho);
        if (tr.re - 1.0).abs() > INPUT_TOL || tr.im.abs() > INPUT_TOL {
            return invalid(format!("density trace {tr} differs from 1"));
        }
        let mut levels = spectrum.levels;
        for level in &mut levels {
            if level.eigenvalue < -INPUT_TOL {
                return Err(Error::NegativeEigenvalue(level.eigenvalue));
            }
            level.eigenvalue = level.eigenvalue.max(0.0);
        }
        let total: f64 = levels.iter().map(|l| l.eigenvalue * l.multiplicity as f64).sum();
        for level in &mut levels {
            level.eigenvalue /= total;
        }
        Self::from_levels(spectrum.dim, levels)
    }

    /// Density diagonal in `basis` with the given eigenvalue on each vector;
    /// equal eigenvalues (within the relative tolerance) are merged.
    pub fn diagonal(eigenvalues: &[f64], basis: &OrthonormalBasis, degeneracy_tol: f64) -> Result<Self> {
        let dim = basis.dim();
        if eigenvalues.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: eigenvalues.len() });
        }
        if let Some(&neg) = eigenvalues.iter().find(|&&v| v < 0.0) {
            return Err(Error::NegativeEigenvalue(neg));
        }
        let scale = eigenvalues.iter().fold(0.0_f64, |a, v| a.max(*v));
        let threshold = if scale > 0.0 { degeneracy_tol * scale } else { degeneracy_tol };
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for idx in order {
            match groups.last_mut() {
                Some(g) if eigenvalues[*g.last().unwrap()] - eigenvalues[idx] <= threshold => g.push(idx),
                _ => groups.push(vec![idx]),
            }
        }
        let total: f64 = eigenvalues.iter().sum();
        if (total - 1.0).abs() > INPUT_TOL {
            return invalid(format!("eigenvalues sum to {total}, expected 1"));
        }
        let levels = groups
            .into_iter()
            .map(|g| {
                let eigenvalue = g.iter().map(|&i| eigenvalues[i]).sum::<f64>() / g.len() as f64 / total;
                let projector = g.iter().fold(CMatrix::zeros(dim, dim), |acc, &i| acc + basis.projector(i));
                SpectralLevel { eigenvalue, multiplicity: g.len(), projector }
            })
            .collect();
        Self::from_levels(dim, levels)
    }

    /// Rank-one density |ψ⟩⟨ψ| with its kernel kept as a zero level.
    pub fn pure(state: &CVector) -> Result<Self> {
        let dim = state.len();
        check_dim(dim)?;
        let norm = state.norm();
        if (norm - 1.0).abs() > INPUT_TOL {
            return invalid(format!("state norm {norm} differs from 1"));
        }
        let p = outer(state, state);
        let mut levels = vec![SpectralLevel { eigenvalue: 1.0, multiplicity: 1, projector: p.clone() }];
        if dim > 1 {
            levels.push(SpectralLevel { eigenvalue: 0.0, multiplicity: dim - 1, projector: identity(dim) - p });
        }
        Self::from_levels(dim, levels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> &[SpectralLevel] {
        &self.levels
    }

    pub fn matrix(&self) -> CMatrix {
        reconstruct(self.dim, &self.levels, |l| l.eigenvalue)
    }

    /// Whether the level projectors resolve the identity.
    pub fn is_complete(&self) -> bool {
        let sum = self.levels.iter().fold(CMatrix::zeros(self.dim, self.dim), |acc, l| acc + &l.projector);
        max_abs_diff(&sum, &identity(self.dim)) <= INPUT_TOL
    }

    /// Adds the kernel as an explicit zero level when the projectors do not
    /// already resolve the identity.
    pub fn completed(&self) -> Self {
        if self.is_complete() {
            return self.clone();
        }
        let mut levels = self.levels.clone();
        let covered = levels.iter().fold(CMatrix::zeros(self.dim, self.dim), |acc, l| acc + &l.projector);
        let kernel = identity(self.dim) - covered;
        let rank = self.dim - levels.iter().map(|l| l.multiplicity).sum::<usize>();
        match levels.iter_mut().find(|l| l.eigenvalue == 0.0) {
            Some(zero) => {
                zero.projector += &kernel;
                zero.multiplicity += rank;
            }
            None => levels.push(SpectralLevel { eigenvalue: 0.0, multiplicity: rank, projector: kernel }),
        }
        Self { dim: self.dim, levels }
    }

    /// U ρ U† for a unitary U.
    pub fn conjugated(&self, u: &CMatrix) -> Self {
        let ud = u.adjoint();
        let levels = self
            .levels
            .iter()
            .map(|l| SpectralLevel {
                eigenvalue: l.eigenvalue,
                multiplicity: l.multiplicity,
                projector: u * &l.projector * &ud,
            })
            .collect();
        Self { dim: self.dim, levels }
    }

    /// True when every level with a nonzero eigenvalue is one-dimensional.
    pub fn nondegenerate_nonzero(&self, zero_tol: f64) -> bool {
        self.levels.iter().all(|l| l.eigenvalue <= zero_tol || l.multiplicity == 1)
    }

    /// Whether ρ is diagonal in `basis`, i.e. commutes with every |ψ_k⟩⟨ψ_k|.
    pub fn is_diagonal_in(&self, basis: &OrthonormalBasis, tol: f64) -> bool {
        let rho = self.matrix();
        (0..self.dim).all(|k| {
            let p = basis.projector(k);
            max_abs_diff(&(&p * &rho), &(&rho * &p)) <= tol
        })
    }
}

/// Σ_k λ_k^{1/l} P_k.
pub fn density_root(rho: &SpectralDensity, l: usize) -> Result<CMatrix> {
    if l == 0 {
        return invalid("root order must be positive");
    }
    let inv = 1.0 / l as f64;
    Ok(reconstruct(rho.dim, &rho.levels, |level| {
        if level.eigenvalue == 0.0 { 0.0 } else { level.eigenvalue.powf(inv) }
    }))
}

/// W = |ψ_1⟩⟨ψ_N| + |ψ_N⟩⟨ψ_{N−1}| + … + |ψ_2⟩⟨ψ_1|, so W|ψ_k⟩ = |ψ_{k+1}⟩ cyclically.
pub fn cyclic_shift_unitary(basis: &OrthonormalBasis) -> Result<CMatrix> {
    let n = basis.dim();
    if n < 2 {
        return invalid("cyclic shift needs dimension >= 2");
    }
    Ok((0..n).fold(CMatrix::zeros(n, n), |acc, k| {
        acc + outer(basis.vector((k + 1) % n), basis.vector(k))
    }))
}

/// exp(−i·H·dt) for Hermitian H.
pub fn expm_antihermitian(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    check_square(h, h.nrows())?;
    ensure_hermitian(h)?;
    Ok(expm(&(h * Complex64::new(0.0, -dt))))
}

/// exp(−i·H·dt) via the unitary eigenbasis of H; slower than [`expm_antihermitian`]
/// but exact up to the eigensolver.
pub fn expm_spectral(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    ensure_hermitian(h)?;
    let eig = SymmetricEigen::new((h + h.adjoint()) * Complex64::new(0.5, 0.0));
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|e| (Complex64::new(0.0, -e * dt)).exp()));
    Ok(&eig.eigenvectors * phases * eig.eigenvectors.adjoint())
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0,
    3960.0, 90.0, 1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0, 10559470521600.0, 670442572800.0, 33522128640.0, 1323241920.0,
    40840800.0, 960960.0, 16380.0, 182.0, 1.0,
];
const THETA: [f64; 5] = [1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1, 2.097847961257068, 5.371920351148152];

fn norm1(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn scaled(m: &CMatrix, s: f64) -> CMatrix {
    m * Complex64::new(s, 0.0)
}

fn pade_low(a: &CMatrix, b: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let a2 = a * a;
    let mut pow = identity(n);
    let mut odd = scaled(&pow, b[1]);
    let mut even = scaled(&pow, b[0]);
    let mut k = 2;
    while k < b.len() {
        pow = &pow * &a2;
        even += scaled(&pow, b[k]);
        odd += scaled(&pow, b[k + 1]);
        k += 2;
    }
    (a * odd, even)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let b = &PADE13;
    let n = a.nrows();
    let id = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]));
    let u = a * (inner_u + scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(&id, b[1]));
    let inner_v = &a6 * (scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]));
    let v = inner_v + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&id, b[0]);
    (u, v)
}

/// Scaling-and-squaring Padé exponential of a general square matrix.
/// For anti-Hermitian input the diagonal Padé approximant is unitary.
pub(crate) fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = norm1(a);
    if norm == 0.0 {
        return identity(n);
    }
    let (u, v, squarings) = if norm <= THETA[0] {
        let (u, v) = pade_low(a, &PADE3);
        (u, v, 0)
    } else if norm <= THETA[1] {
        let (u, v) = pade_low(a, &PADE5);
        (u, v, 0)
    } else if norm <= THETA[2] {
        let (u, v) = pade_low(a, &PADE7);
        (u, v, 0)
    } else if norm <= THETA[3] {
        let (u, v) = pade_low(a, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
        let (u, v) = pade13(&scaled(a, 0.5_f64.powi(s)));
        (u, v, s)
    };
    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom.lu().solve(&numer).expect("Pade denominator is nonsingular");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Unitary polar factor of `x` on the subspace selected by `p`: X (X†X)^{-1/2}
/// with the inverse root taken on the range of `p`.
pub(crate) fn polar_unitary_on(x: &CMatrix, p: &CMatrix) -> CMatrix {
    let gram = x.adjoint() * x;
    let eig = SymmetricEigen::new((&gram + gram.adjoint()) * Complex64::new(0.5, 0.0));
    let n = x.nrows();
    let mut inv_root = CMatrix::zeros(n, n);
    for (i, &val) in eig.eigenvalues.iter().enumerate() {
        if val > 1e-24 {
            let v = eig.eigenvectors.column(i);
            inv_root += (&v * v.adjoint()) * Complex64::new(val.sqrt().recip(), 0.0);
        }
    }
    x * inv_root * p
}
