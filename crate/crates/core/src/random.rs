//! Seeded random instances used by gauge trials, self-checks and tests.

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::{expm, identity, CMatrix, OrthonormalBasis, SpectralDensity, SpectralLevel};

fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    (r * t.cos(), r * t.sin())
}

/// GUE-like Hermitian matrix with entries of typical size `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let (a, b) = gaussian_pair(rng);
            m[(i, j)] = Complex64::new(a, b);
        }
    }
    (&m + m.adjoint()) * Complex64::new(0.5 * scale, 0.0)
}

/// Traceless Hermitian 2x2 generator h·σ with |h| drawn uniformly in [0, `max_norm`].
pub fn random_su2_generator<R: Rng + ?Sized>(rng: &mut R, max_norm: f64) -> CMatrix {
    let (x, y) = gaussian_pair(rng);
    let (z, _) = gaussian_pair(rng);
    let len = (x * x + y * y + z * z).sqrt().max(1e-300);
    let s = rng.gen_range(0.0..max_norm) / len;
    let (x, y, z) = (x * s, y * s, z * s);
    CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(z, 0.0), Complex64::new(x, -y), Complex64::new(x, y), Complex64::new(-z, 0.0)],
    )
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let h = random_hermitian(rng, dim, 2.0);
    expm(&(h * Complex64::new(0.0, -1.0)))
}

/// Density with random nondegenerate spectrum in a random eigenbasis.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> SpectralDensity {
    let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let u = random_unitary(rng, dim);
    let basis = OrthonormalBasis::from_unitary(&u).expect("unitary columns are orthonormal");
    let levels = weights
        .iter()
        .enumerate()
        .map(|(k, w)| SpectralLevel { eigenvalue: w / total, multiplicity: 1, projector: basis.projector(k) })
        .collect();
    SpectralDensity::from_levels(dim, levels).unwrap_or_else(|_| {
        // Coincident draws are vanishingly unlikely; fall back to the maximally mixed state.
        SpectralDensity::from_matrix(&(identity(dim) * Complex64::new(1.0 / dim as f64, 0.0)), 1e-9)
            .expect("maximally mixed state is valid")
    })
}

/// Smooth real function θ(t) = Σ a_j (sin(ω_j t + φ_j) − sin φ_j), so θ(0) = 0.
#[derive(Debug, Clone)]
pub struct SmoothPhase {
    terms: Vec<(f64, f64, f64)>,
}

impl SmoothPhase {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, amplitude: f64, max_frequency: f64) -> Self {
        let terms = (0..3)
            .map(|_| {
                (
                    rng.gen_range(-amplitude..=amplitude),
                    rng.gen_range(0.1..max_frequency),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(a, w, p)| a * ((w * t + p).sin() - p.sin())).sum()
    }
}
