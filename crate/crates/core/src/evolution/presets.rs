//! Named paths: rotations inside a two-level block, full-cycle precessions and
//! a smooth rotating-frame loop with a time-dependent generator.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::{Generator, GeneratorSchedule, Segment};
use crate::error::{invalid, Result};
use crate::linalg::{check_dim, CMatrix};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Pauli matrices σ_x, σ_y, σ_z.
pub fn pauli() -> [CMatrix; 3] {
    let z = c(0.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, c(1.0), c(1.0), z]),
        CMatrix::from_row_slice(2, 2, &[z, Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), z]),
        CMatrix::from_row_slice(2, 2, &[c(1.0), z, z, c(-1.0)]),
    ]
}

/// (a·σ)/2 for a real 3-vector a.
pub fn spin_half(a: [f64; 3]) -> CMatrix {
    let [sx, sy, sz] = pauli();
    (sx * c(a[0]) + sy * c(a[1]) + sz * c(a[2])) * c(0.5)
}

/// Places a 2x2 matrix on span{|n⟩, |m⟩} (1-based indices) of a `dim`-level
/// system, zero elsewhere. |n⟩ plays the role of the qubit's |0⟩.
pub fn embed_block(dim: usize, n: usize, m: usize, block: &CMatrix) -> Result<CMatrix> {
    check_dim(dim)?;
    if n == 0 || m == 0 || n > dim || m > dim || n == m {
        return invalid(format!("block indices ({n}, {m}) must be distinct and in 1..={dim}"));
    }
    if block.shape() != (2, 2) {
        return invalid("block must be 2x2");
    }
    let idx = [n - 1, m - 1];
    let mut out = CMatrix::zeros(dim, dim);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[(i, j)] = block[(a, b)];
        }
    }
    Ok(out)
}

fn unit_axis(axis: [f64; 3]) -> Result<[f64; 3]> {
    let len = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(len > 0.0 && len.is_finite()) {
        return invalid("rotation axis must be a nonzero finite vector");
    }
    Ok(axis.map(|x| x / len))
}

/// Rotation by `angle` about `axis` inside span{|n⟩, |m⟩}, identity elsewhere,
/// driven by a constant generator over `duration`.
pub fn block_rotation(dim: usize, n: usize, m: usize, axis: [f64; 3], angle: f64, duration: f64) -> Result<GeneratorSchedule> {
    if !(duration > 0.0) {
        return invalid(format!("duration {duration} must be positive"));
    }
    let axis = unit_axis(axis)?;
    let h = spin_half(axis.map(|x| x * angle / duration));
    GeneratorSchedule::constant(embed_block(dim, n, m, &h)?, duration)
}

/// Qubit precession about the axis at polar angle θ in the xz-plane, `turns`
/// full cycles of 2π at unit angular speed.
pub fn precession(theta: f64, turns: u32) -> Result<GeneratorSchedule> {
    if turns == 0 {
        return invalid("precession needs at least one turn");
    }
    let h = spin_half([theta.sin(), 0.0, theta.cos()]);
    GeneratorSchedule::constant(h, TAU * turns as f64)
}

/// Solid angle enclosed by |0⟩ under [`precession`], per turn.
pub fn precession_solid_angle(theta: f64) -> f64 {
    TAU * (1.0 - theta.cos())
}

/// Block path in span{|n⟩, |m⟩} with pure-state visibility η and solid angle Ω:
/// a full precession enclosing Ω followed by a geodesic rotation about y by
/// 2·arccos η. Then ⟨n|U|n⟩d_n = η e^{−iΩ/2} and ⟨m|U|m⟩d_m = η e^{iΩ/2}.
pub fn pseudopure_block_path(dim: usize, n: usize, m: usize, eta: f64, omega: f64) -> Result<GeneratorSchedule> {
    if !(0.0..=1.0).contains(&eta) {
        return invalid(format!("visibility {eta} outside [0, 1]"));
    }
    if !omega.is_finite() {
        return invalid("solid angle must be finite");
    }
    let reduced = omega.rem_euclid(2.0 * TAU);
    let cos_theta = (1.0 - reduced / TAU).clamp(-1.0, 1.0);
    let sin_theta = (1.0 - cos_theta * cos_theta).sqrt();
    let beta = 2.0 * eta.acos();
    let loop_h = embed_block(dim, n, m, &spin_half([TAU * sin_theta, 0.0, TAU * cos_theta]))?;
    let tilt_h = embed_block(dim, n, m, &spin_half([0.0, beta, 0.0]))?;
    GeneratorSchedule::new(vec![
        Segment { start: 0.0, end: 1.0, generator: Generator::Constant(loop_h) },
        Segment { start: 1.0, end: 2.0, generator: Generator::Constant(tilt_h) },
    ])
}

/// Qubit loop U(t) = R_z(2πa t) R_n(2πb t) on t ∈ [0, 1], with n at polar angle θ
/// in the xz-plane. Its generator is time dependent, so integration errors
/// are genuinely second order.
pub fn rotating_loop(theta: f64, a: u32, b: u32) -> Result<GeneratorSchedule> {
    if b == 0 {
        return invalid("rotating loop needs b >= 1");
    }
    let (w, v) = (TAU * a as f64, TAU * b as f64);
    let [sx, sy, sz] = pauli();
    let generator = Generator::Harmonic {
        offset: sz * c(0.5 * (w + v * theta.cos())),
        cosine: sx * c(0.5 * v * theta.sin()),
        sine: sy * c(0.5 * v * theta.sin()),
        frequency: w,
    };
    GeneratorSchedule::new(vec![Segment { start: 0.0, end: 1.0, generator }])
}

/// Solid angle enclosed by |0⟩ under [`rotating_loop`].
pub fn rotating_loop_solid_angle(theta: f64, a: u32, b: u32) -> f64 {
    TAU * a as f64 * theta.sin().powi(2) + TAU * b as f64 * (1.0 - theta.cos())
}

/// Polar angle θ ∈ [0, 2π/3] with `rotating_loop_solid_angle(θ, 1, 1) = omega`,
/// for 0 ≤ Ω ≤ 4.5π (the map is monotone there).
pub fn rotating_loop_for_solid_angle(omega: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 2.0 * PI / 3.0);
    if !(0.0..=rotating_loop_solid_angle(hi, 1, 1)).contains(&omega) {
        return invalid(format!("solid angle {omega} outside [0, 4.5π]"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rotating_loop_solid_angle(mid, 1, 1) < omega {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
