//! Purifications and two-arm interference of system ⊗ ancilla states, plus
//! the equivalent circuit with two auxiliary qubits.
//!
//! Joint vectors use system-major ordering: amplitude of |k⟩⊗|j⟩ sits at
//! index k·N + j, so `kron(A_s, A_a)` acts on them directly.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    check_square, density_root, ensure_unitary, kron, matrix_power, CMatrix, CVector, SpectralDensity, INPUT_TOL,
};
use crate::pseudopure::format_sig17;

/// Pure state on system ⊗ ancilla, both of dimension N.
#[derive(Debug, Clone, PartialEq)]
pub struct Purification {
    dim: usize,
    amplitudes: CVector,
}

impl Purification {
    pub fn new(dim: usize, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return invalid(format!("purification norm {norm} differs from 1"));
        }
        Ok(Self { dim, amplitudes })
    }

    /// Σ_{ij} (√ρ)_{ij} |i⟩⊗|j⟩, whose ancilla partial trace is √ρ√ρ† = ρ.
    pub fn of_density(rho: &SpectralDensity) -> Result<Self> {
        let root = density_root(rho, 2)?;
        let n = rho.dim();
        let amplitudes = CVector::from_iterator(n * n, (0..n * n).map(|idx| root[(idx / n, idx % n)]));
        Self::new(n, amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// Tr_a |Ψ⟩⟨Ψ|.
    pub fn reduced_system(&self) -> CMatrix {
        let n = self.dim;
        CMatrix::from_fn(n, n, |i, k| (0..n).map(|a| self.amplitudes[i * n + a] * self.amplitudes[k * n + a].conj()).sum())
    }
}

/// √((1−ε)/N) Σ_{k≠n} |k⟩⊗|k⟩ + √(ε + (1−ε)/N) |n⟩⊗|n⟩ for 1-based n.
pub fn purify_pseudopure(n: usize, epsilon: f64, index: usize) -> Result<Purification> {
    if n < 2 {
        return invalid(format!("dimension {n} must be at least 2"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return invalid(format!("purity {epsilon} outside [0, 1]"));
    }
    if index == 0 || index > n {
        return invalid(format!("pure index {index} outside 1..={n}"));
    }
    let nn = n as f64;
    let mut amplitudes = CVector::zeros(n * n);
    for k in 0..n {
        let weight = if k == index - 1 { epsilon + (1.0 - epsilon) / nn } else { (1.0 - epsilon) / nn };
        amplitudes[k * n + k] = Complex64::new(weight.sqrt(), 0.0);
    }
    let norm = amplitudes.norm();
    Purification::new(n, amplitudes / Complex64::new(norm, 0.0))
}

/// The four local operators of the two arms. The variable phase e^{iχ}
/// multiplies the U arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Arms {
    pub u_s: CMatrix,
    pub u_a: CMatrix,
    pub v_s: CMatrix,
    pub v_a: CMatrix,
}

impl Arms {
    /// U_s = U_a = W^{m−n}, V_s = U^∥, V_a = (U^∥)ᵀ in the computational
    /// ancilla basis, for 1-based n, m.
    pub fn for_pair(shift: &CMatrix, transporter: &CMatrix, n: usize, m: usize) -> Result<Self> {
        let dim = shift.nrows();
        if n == 0 || m == 0 || n > dim || m > dim {
            return invalid(format!("indices ({n}, {m}) outside 1..={dim}"));
        }
        let w = matrix_power(shift, (m + dim - n) % dim);
        Ok(Self { u_s: w.clone(), u_a: w, v_s: transporter.clone(), v_a: transporter.transpose() })
    }

    fn validate(&self, dim: usize) -> Result<()> {
        for m in [&self.u_s, &self.u_a, &self.v_s, &self.v_a] {
            check_square(m, dim)?;
            ensure_unitary(m, INPUT_TOL)?;
        }
        Ok(())
    }

    fn joint(&self, state: &Purification) -> Result<(CVector, CVector)> {
        self.validate(state.dim())?;
        let a = kron(&self.u_s, &self.u_a) * state.amplitudes();
        let b = kron(&self.v_s, &self.v_a) * state.amplitudes();
        Ok((a, b))
    }

    /// ⟨Ψ|(U_s⊗U_a)†(V_s⊗V_a)|Ψ⟩; the intensity is 2 + 2Re(e^{−iχ}c).
    pub fn cross_term(&self, state: &Purification) -> Result<Complex64> {
        let (a, b) = self.joint(state)?;
        Ok(a.dotc(&b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferogramPoint {
    pub chi: f64,
    pub intensity: f64,
}

/// `count` uniform points on [0, 2π).
pub fn chi_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| TAU * i as f64 / count as f64).collect()
}

pub const DEFAULT_CHI_POINTS: usize = 64;

/// I(χ) = |e^{iχ}(U_s⊗U_a)|Ψ⟩ + (V_s⊗V_a)|Ψ⟩|².
pub fn interferogram(state: &Purification, arms: &Arms, chis: &[f64]) -> Result<Vec<InterferogramPoint>> {
    let (a, b) = arms.joint(state)?;
    Ok(chis
        .iter()
        .map(|&chi| {
            let field = &a * Complex64::from_polar(1.0, chi) + &b;
            InterferogramPoint { chi, intensity: field.norm_squared() }
        })
        .collect())
}

/// Probability of finding both auxiliary qubits in |0⟩ after H⊗H, the
/// conditional unitary
/// (|00⟩⟨00| + |01⟩⟨01|)⊗e^{iχ}U_s⊗U_a + (|10⟩⟨10| + |11⟩⟨11|)⊗V_s⊗V_a,
/// and H⊗H again, starting from |0⟩|0⟩|Ψ⟩. This gives p_00 = I(χ)/4.
pub fn conditional_circuit_readout(state: &Purification, arms: &Arms, chis: &[f64]) -> Result<Vec<InterferogramPoint>> {
    let (a, b) = arms.joint(state)?;
    let half = Complex64::new(0.5, 0.0);
    Ok(chis
        .iter()
        .map(|&chi| {
            // Branch amplitudes after the first Hadamards: 1/2 on each |xy⟩.
            let u_branch = &a * (half * Complex64::from_polar(1.0, chi));
            let v_branch = &b * half;
            let branches = [&u_branch, &u_branch, &v_branch, &v_branch];
            // Final Hadamards: ⟨00|H⊗H|xy⟩ = 1/2.
            let out00 = branches.iter().fold(CVector::zeros(a.len()), |acc, v| acc + *v) * half;
            InterferogramPoint { chi, intensity: out00.norm_squared() }
        })
        .collect())
}

/// Least-squares fit I(χ) ≈ A + B cos(χ − φ), B ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferogramFit {
    /// φ in (−π, π], absent when the fringe contrast vanishes.
    pub shift: Option<f64>,
    /// B/A.
    pub visibility: f64,
    /// A.
    pub mean: f64,
    pub defined: bool,
}

pub fn fit_interferogram(points: &[InterferogramPoint]) -> Result<InterferogramFit> {
    if points.len() < 8 {
        return invalid(format!("fit needs at least 8 points, got {}", points.len()));
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.chi), hi.max(p.chi)));
    let n = points.len() as f64;
    if (hi - lo) * n / (n - 1.0) < TAU - 1e-9 {
        return invalid("χ points must span at least one period");
    }
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for p in points {
        let basis = Vector3::new(1.0, p.chi.cos(), p.chi.sin());
        normal += basis * basis.transpose();
        rhs += basis * p.intensity;
    }
    let coeffs = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("interferogram normal equations are singular".into()))?;
    let (mean, a1, a2) = (coeffs[0], coeffs[1], coeffs[2]);
    let amplitude = a1.hypot(a2);
    let visibility = if mean > 0.0 { amplitude / mean } else { 0.0 };
    let defined = mean > 0.0 && visibility >= 1e-12;
    Ok(InterferogramFit { shift: defined.then(|| a2.atan2(a1)), visibility, mean, defined })
}

/// CSV with header `chi,intensity`.
pub fn interferogram_csv(points: &[InterferogramPoint]) -> String {
    let mut out = String::from("chi,intensity\n");
    for p in points {
        writeln!(out, "{},{}", format_sig17(p.chi), format_sig17(p.intensity)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::presets::{embed_block, pseudopure_block_path};
    use crate::evolution::{GeneratorSchedule, Integrator, TimeGrid, UnitaryPath};
    use crate::linalg::{cyclic_shift_unitary, identity, max_abs_diff, OrthonormalBasis};
    use crate::phases::{IndexTuple, PhaseEngine};
    use crate::pseudopure::{l2_nodal_eta_squared, pseudopure_density, pseudopure_family};
    use crate::random::random_su2_generator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn purification_limits() {
        let p = purify_pseudopure(3, 1.0, 2).unwrap();
        let nonzero: Vec<usize> = (0..9).filter(|&i| p.amplitudes()[i].norm() > 0.0).collect();
        assert_eq!(nonzero, vec![4]);
        let p = purify_pseudopure(4, 0.0, 1).unwrap();
        for k in 0..4 {
            assert!((p.amplitudes()[k * 4 + k].re - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn partial_trace_recovers_density() {
        for n in [2, 4, 7, 16] {
            for e in [0.0, 0.3, 0.8, 1.0] {
                for idx in [1, n] {
                    let p = purify_pseudopure(n, e, idx).unwrap();
                    let rho = pseudopure_density(n, e, idx).unwrap().matrix();
                    assert!(max_abs_diff(&p.reduced_system(), &rho) < 1e-12);
                    let q = Purification::of_density(&pseudopure_density(n, e, idx).unwrap()).unwrap();
                    assert!((p.amplitudes() - q.amplitudes()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identical_arms_are_constructive() {
        let p = purify_pseudopure(3, 0.4, 1).unwrap();
        let arms = Arms { u_s: identity(3), u_a: identity(3), v_s: identity(3), v_a: identity(3) };
        let pts = interferogram(&p, &arms, &[0.0]).unwrap();
        assert!((pts[0].intensity - 4.0).abs() < 1e-12);
        let circuit = conditional_circuit_readout(&p, &arms, &[0.0]).unwrap();
        assert!((circuit[0].intensity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circuit_is_quarter_intensity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = purify_pseudopure(3, 0.6, 2).unwrap();
        let arms = Arms {
            u_s: crate::random::random_unitary(&mut rng, 3),
            u_a: crate::random::random_unitary(&mut rng, 3),
            v_s: crate::random::random_unitary(&mut rng, 3),
            v_a: crate::random::random_unitary(&mut rng, 3),
        };
        let chis = chi_grid(16);
        let circuit = conditional_circuit_readout(&p, &arms, &chis).unwrap();
        let direct = interferogram(&p, &arms, &chis).unwrap();
        for (c, r) in circuit.iter().zip(&direct) {
            assert!((4.0 * c.intensity - r.intensity).abs() < 1e-12);
            assert!(c.intensity <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn fit_synthetic_patterns() {
        let chis = chi_grid(64);
        let pts: Vec<_> = chis.iter().map(|&chi| InterferogramPoint { chi, intensity: 2.0 + 2.0 * chi.cos() }).collect();
        let fit = fit_interferogram(&pts).unwrap();
        assert!(fit.shift.unwrap().abs() < 1e-12);
        assert!((fit.visibility - 1.0).abs() < 1e-12);

        let flat: Vec<_> = chis.iter().map(|&chi| InterferogramPoint { chi, intensity: 3.0 }).collect();
        let fit = fit_interferogram(&flat).unwrap();
        assert!(!fit.defined && fit.shift.is_none());

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noisy: Vec<_> = chis
            .iter()
            .map(|&chi| InterferogramPoint { chi, intensity: 2.0 + 1.3 * (chi - 0.7).cos() + rng.gen_range(-1e-8..1e-8) })
            .collect();
        assert!((fit_interferogram(&noisy).unwrap().shift.unwrap() - 0.7).abs() < 1e-6);

        assert!(fit_interferogram(&pts[..7]).is_err());
        assert!(fit_interferogram(&pts[..32]).is_err());
    }

    fn random_block(rng: &mut ChaCha8Rng, n: usize, a: usize, b: usize) -> UnitaryPath {
        GeneratorSchedule::constant(embed_block(n, a, b, &random_su2_generator(rng, 4.0)).unwrap(), 1.0).unwrap().into()
    }

    fn setup(path: &UnitaryPath, n: usize, e: f64, a: usize, b: usize) -> (Purification, Arms, Complex64) {
        let family = pseudopure_family(n, e).unwrap();
        let grid = TimeGrid::uniform(path.duration(), 2000).unwrap();
        let upar = Integrator::new(grid.clone()).parallel_family(path, &family.member(a)).unwrap().transporter;
        let arms = Arms::for_pair(&cyclic_shift_unitary(&OrthonormalBasis::computational(n)).unwrap(), &upar, a, b).unwrap();
        let trace = PhaseEngine::with_grid(grid).mixed_degenerate(path, &family, &IndexTuple::new(vec![a, b], n).unwrap()).unwrap().raw_trace;
        (purify_pseudopure(n, e, a).unwrap(), arms, trace)
    }

    #[test]
    fn fitted_shift_is_order_two_trace_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let path = random_block(&mut rng, 4, 1, 3);
        let (state, arms, trace) = setup(&path, 4, 0.5, 1, 3);
        let c = arms.cross_term(&state).unwrap();
        assert!((c - trace).norm() < 1e-12);
        let pts = interferogram(&state, &arms, &chi_grid(64)).unwrap();
        let fit = fit_interferogram(&pts).unwrap();
        let gap = (fit.shift.unwrap() - trace.arg()).rem_euclid(TAU);
        assert!(gap.min(TAU - gap) < 1e-4);
        assert!((fit.visibility - trace.norm()).abs() < 1e-10);
    }

    #[test]
    fn pure_qubit_shift_is_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = random_block(&mut rng, 2, 1, 2);
        let (state, arms, _) = setup(&path, 2, 1.0, 1, 2);
        for pts in [interferogram(&state, &arms, &chi_grid(64)).unwrap(), conditional_circuit_readout(&state, &arms, &chi_grid(64)).unwrap()] {
            let fit = fit_interferogram(&pts).unwrap();
            assert!((fit.shift.unwrap().abs() - std::f64::consts::PI).abs() < 1e-8);
        }
    }

    #[test]
    fn nodal_configuration_has_no_fringes() {
        let (n, e, omega) = (4, 0.5, 1.0);
        let eta = l2_nodal_eta_squared(n, e, omega).unwrap().unwrap().sqrt();
        let path: UnitaryPath = pseudopure_block_path(n, 1, 2, eta, omega).unwrap().into();
        let (state, arms, _) = setup(&path, n, e, 1, 2);
        let fit = fit_interferogram(&interferogram(&state, &arms, &chi_grid(64)).unwrap()).unwrap();
        assert!(fit.visibility < 1e-6);
    }

    #[test]
    fn rejects_non_unitary_arms() {
        let p = purify_pseudopure(2, 0.5, 1).unwrap();
        let mut bad = identity(2);
        bad[(0, 1)] = Complex64::new(0.5, 0.0);
        let arms = Arms { u_s: bad, u_a: identity(2), v_s: identity(2), v_a: identity(2) };
        assert!(interferogram(&p, &arms, &[0.0]).is_err());
        let arms = Arms { u_s: identity(3), u_a: identity(2), v_s: identity(2), v_a: identity(2) };
        assert!(interferogram(&p, &arms, &[0.0]).is_err());
    }

    #[test]
    fn csv_header() {
        let csv = interferogram_csv(&[InterferogramPoint { chi: 0.0, intensity: 4.0 }]);
        assert_eq!(csv, "chi,intensity\n0,4.0000000000000000\n");
    }
}
