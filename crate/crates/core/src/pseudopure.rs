//! Closed forms for pseudopure pairs ρ_n, ρ_m evolving under a two-level
//! block path, their nodal sets, and the common-nodal function f(η, N).

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::evolution::presets::pseudopure_block_path;
use crate::evolution::{TimeGrid, UnitaryPath};
use crate::linalg::{identity, phase_functional, CMatrix, OrthonormalBasis, PhaseResult, SpectralDensity, SpectralLevel};
use crate::phases::{IndexTuple, PhaseEngine, StateFamily};

/// Dimension N, purity ε ∈ (0, 1], pure-state visibility η ∈ [0, 1] and
/// solid angle Ω (4π-periodic).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudopureParams {
    pub n: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub omega: f64,
}

impl PseudopureParams {
    pub fn new(n: usize, epsilon: f64, eta: f64, omega: f64) -> Result<Self> {
        if n < 2 {
            return invalid(format!("dimension {n} must be at least 2"));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return invalid(format!("purity {epsilon} outside (0, 1]"));
        }
        if !(0.0..=1.0).contains(&eta) {
            return invalid(format!("visibility {eta} outside [0, 1]"));
        }
        if !omega.is_finite() {
            return invalid("solid angle must be finite");
        }
        Ok(Self { n, epsilon, eta, omega })
    }
}

fn nf(n: usize) -> f64 {
    n as f64
}

/// (N−2)(1−ε) + η(1+(N−1)ε)e^{−iΩ/2} + η(1−ε)e^{iΩ/2}; equals N·Tr(U^∥ ρ_n).
pub fn gamma1_argument(p: &PseudopureParams) -> Complex64 {
    let n = nf(p.n);
    let e = p.epsilon;
    Complex64::new((n - 2.0) * (1.0 - e), 0.0)
        + Complex64::from_polar(p.eta * (1.0 + (n - 1.0) * e), -p.omega / 2.0)
        + Complex64::from_polar(p.eta * (1.0 - e), p.omega / 2.0)
}

/// (N−2)(1−ε) + (2+(N−2)ε)(η²−1) + 2η²√((1−ε)(1+(N−1)ε)) cosΩ; equals
/// N·Tr(U^∥ √ρ_n U^∥ √ρ_m).
pub fn gamma2_argument(p: &PseudopureParams) -> f64 {
    gamma2_argument_raw(nf(p.n), p.epsilon, p.eta * p.eta, p.omega)
}

fn gamma2_argument_raw(n: f64, e: f64, eta_sq: f64, omega: f64) -> f64 {
    (n - 2.0) * (1.0 - e) + (2.0 + (n - 2.0) * e) * (eta_sq - 1.0)
        + 2.0 * eta_sq * ((1.0 - e) * (1.0 + (n - 1.0) * e)).sqrt() * omega.cos()
}

/// The tolerance applies to the argument; `raw_trace` and `magnitude` hold the
/// trace itself, argument/N.
fn closed_result(argument: Complex64, n: usize, nodal_tol: f64) -> PhaseResult {
    let mut r = phase_functional(argument, nodal_tol);
    r.raw_trace = argument / nf(n);
    r.magnitude = r.raw_trace.norm();
    r
}

/// γ^{(1)} for ρ_n.
pub fn gamma1_closed(p: &PseudopureParams, nodal_tol: f64) -> PhaseResult {
    closed_result(gamma1_argument(p), p.n, nodal_tol)
}

/// γ^{(1)} for ρ_m, the complex conjugate of [`gamma1_closed`].
pub fn gamma1_closed_partner(p: &PseudopureParams, nodal_tol: f64) -> PhaseResult {
    closed_result(gamma1_argument(p).conj(), p.n, nodal_tol)
}

/// γ^{(2)} for the pair; ±1 whenever defined.
pub fn gamma2_closed(p: &PseudopureParams, nodal_tol: f64) -> PhaseResult {
    closed_result(Complex64::new(gamma2_argument(p), 0.0), p.n, nodal_tol)
}

/// ((N−2)(1−ε) + η(2+(N−2)ε)cos(Ω/2))² + η²N²ε² sin²(Ω/2), i.e. |γ^{(1)} argument|².
pub fn l1_nodal_residual(p: &PseudopureParams) -> f64 {
    l1_residual_raw(nf(p.n), p.epsilon, p.eta, p.omega)
}

fn l1_residual_raw(n: f64, e: f64, eta: f64, omega: f64) -> f64 {
    let (s, c) = (omega / 2.0).sin_cos();
    ((n - 2.0) * (1.0 - e) + eta * (2.0 + (n - 2.0) * e) * c).powi(2) + (eta * n * e * s).powi(2)
}

fn check_purity(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return invalid(format!("purity {epsilon} outside (0, 1]"));
    }
    Ok(())
}

/// Visibility of the l=1 nodal point at Ω = 2π (mod 4π) for N ≥ 3, or `None`
/// when it would exceed 1, which happens exactly for ε < (N−4)/(2(N−2)).
pub fn l1_nodal_eta(n: usize, epsilon: f64) -> Result<Option<f64>> {
    if n < 3 {
        return invalid(format!("l=1 nodal visibility needs N >= 3 (N = {n}: nodal points are η = 0)"));
    }
    check_purity(epsilon)?;
    let n = nf(n);
    let eta = (n - 2.0) * (1.0 - epsilon) / (2.0 + (n - 2.0) * epsilon);
    Ok(match eta {
        e if e <= 1.0 => Some(e),
        e if e <= 1.0 + 1e-12 => Some(1.0),
        _ => None,
    })
}

/// Purity bound (N−4)/(2(N−2)) below which no l=1 nodal point exists.
pub fn l1_noise_bound(n: usize) -> f64 {
    (nf(n) - 4.0) / (2.0 * (nf(n) - 2.0))
}

/// η² on the l=2 nodal surface, or `None` outside [0, 1].
pub fn l2_nodal_eta_squared(n: usize, epsilon: f64, omega: f64) -> Result<Option<f64>> {
    if n < 2 {
        return invalid(format!("dimension {n} must be at least 2"));
    }
    check_purity(epsilon)?;
    let nn = nf(n);
    let num = 2.0 * (nn - 2.0) * epsilon - nn + 4.0;
    let den = 2.0 + (nn - 2.0) * epsilon + 2.0 * ((1.0 - epsilon) * (1.0 + (nn - 1.0) * epsilon)).sqrt() * omega.cos();
    if den.abs() < 1e-14 {
        return Err(Error::Singular(format!("l=2 nodal denominator vanishes at N={n}, ε={epsilon}, Ω={omega}")));
    }
    let eta_sq = num / den;
    Ok((0.0..=1.0).contains(&eta_sq).then_some(eta_sq))
}

/// Purity window for l=2 nodal points of mixed states (ε < 1) when cosΩ < 0.
/// At ε = 1 the surface is η = 1 for every Ω, which the window misses.
pub fn l2_noise_window(n: usize, omega: f64) -> (f64, f64) {
    let nn = nf(n);
    let c2 = omega.cos().powi(2);
    let upper = ((nn - 2.0).powi(2) - 4.0 * c2) / (4.0 * (nn - 1.0) * c2 + (nn - 2.0).powi(2));
    (l1_noise_bound(n), upper)
}

/// f(η, N) = η² + η − 1 + (2η²/(N−2))√(η(N−2−η)); its zeros are the common
/// nodal points of γ^{(1)} and γ^{(2)}.
pub fn f_eta(eta: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return invalid(format!("f(η, N) needs N >= 3, got {n}"));
    }
    let m = nf(n) - 2.0;
    let radicand = eta * (m - eta);
    if radicand < 0.0 || !eta.is_finite() {
        return Err(Error::Domain(format!("η = {eta} gives a negative radicand for N = {n}")));
    }
    Ok(eta * eta + eta - 1.0 + 2.0 * eta * eta / m * radicand.sqrt())
}

/// Root of f(·, N) on [0, 1] by bisection, bracketed by f(0) = −1 < 0 < f(1).
/// Bisects until the bracket cannot shrink, well below 1e−12.
pub fn f_eta_root(n: usize) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    if f_eta(lo, n)? >= 0.0 || f_eta(hi, n)? <= 0.0 {
        return Err(Error::Domain(format!("f(η, {n}) is not bracketed on [0, 1]")));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_eta(mid, n)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Return the endpoint with the smaller residual.
    Ok(if f_eta(lo, n)?.abs() <= f_eta(hi, n)?.abs() { lo } else { hi })
}

/// Grid points η_i = i/steps where f changes sign between η_i and η_{i+1};
/// returns the left endpoints.
pub fn f_eta_sign_changes(n: usize, steps: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut prev = f_eta(0.0, n)?;
    for i in 1..=steps {
        let eta = i as f64 / steps as f64;
        let cur = f_eta(eta, n)?;
        if (prev < 0.0) != (cur < 0.0) {
            out.push((i - 1) as f64 / steps as f64);
        }
        prev = cur;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodalKind {
    L1,
    L2,
    Common,
}

/// A parameter point where a phase is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodalSolution {
    pub kind: NodalKind,
    pub n: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub omega: f64,
    /// Largest defining residual at the point (|γ^{(1)} argument|², |γ^{(2)} argument|).
    pub residual: f64,
}

/// Common nodal point for N ≥ 3: η from the root of f, ε from the l=1 nodal
/// relation solved for ε, Ω = 2π.
pub fn common_nodal_point(n: usize) -> Result<NodalSolution> {
    let eta = f_eta_root(n)?;
    let m = nf(n) - 2.0;
    let epsilon = (m - 2.0 * eta) / (m * (1.0 + eta));
    let omega = TAU;
    let residual = l1_residual_raw(nf(n), epsilon, eta, omega).max(gamma2_argument_raw(nf(n), epsilon, eta * eta, omega).abs());
    Ok(NodalSolution { kind: NodalKind::Common, n, epsilon, eta, omega, residual })
}

/// Table of (η, N, f) rows with the bisection root of each curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Data {
    pub rows: Vec<(f64, usize, f64)>,
    pub roots: Vec<(usize, f64)>,
}

pub fn figure1_data(ns: &[usize], etas: &[f64]) -> Result<Figure1Data> {
    if let Some(&bad) = etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return invalid(format!("η = {bad} outside [0, 1]"));
    }
    let mut rows = Vec::with_capacity(ns.len() * etas.len());
    let mut roots = Vec::with_capacity(ns.len());
    for &n in ns {
        for &eta in etas {
            rows.push((eta, n, f_eta(eta, n)?));
        }
        roots.push((n, f_eta_root(n)?));
    }
    Ok(Figure1Data { rows, roots })
}

/// `count + 1` uniform points on [0, 1].
pub fn uniform_eta_grid(count: usize) -> Vec<f64> {
    (0..=count).map(|i| i as f64 / count as f64).collect()
}

/// Shortest decimal with 17 significant digits, without exponent.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (16 - magnitude).clamp(0, 340) as usize;
    format!("{x:.decimals$}")
}

impl Figure1Data {
    /// CSV with header `eta,N,f`, preceded by `# root N=<n> eta=<value>` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (n, eta) in &self.roots {
            writeln!(out, "# root N={n} eta={}", format_sig17(*eta)).unwrap();
        }
        out.push_str("eta,N,f\n");
        for (eta, n, f) in &self.rows {
            writeln!(out, "{},{n},{}", format_sig17(*eta), format_sig17(*f)).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut roots = Vec::new();
        let mut header = false;
        for (lineno, line) in text.lines().enumerate() {
            let bad = |what: &str| invalid(format!("line {}: {what}: {line:?}", lineno + 1));
            if let Some(rest) = line.strip_prefix("# root ") {
                let parsed = rest
                    .split_once(' ')
                    .and_then(|(a, b)| Some((a.strip_prefix("N=")?.parse().ok()?, b.strip_prefix("eta=")?.parse().ok()?)));
                match parsed {
                    Some(r) => roots.push(r),
                    None => return bad("malformed root annotation"),
                }
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            } else if !header {
                if line != "eta,N,f" {
                    return bad("expected header eta,N,f");
                }
                header = true;
            } else {
                let fields: Vec<&str> = line.split(',').collect();
                let parsed = (fields.len() == 3)
                    .then(|| Some((fields[0].parse().ok()?, fields[1].parse().ok()?, fields[2].parse().ok()?)))
                    .flatten();
                match parsed {
                    Some(r) => rows.push(r),
                    None => return bad("malformed row"),
                }
            }
        }
        if !header {
            return invalid("missing header eta,N,f");
        }
        Ok(Self { rows, roots })
    }

    /// Sign changes of f along each curve, in row order.
    pub fn sign_changes(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        let mut last: Option<(usize, f64)> = None;
        for &(_, n, f) in &self.rows {
            if out.last().map(|&(m, _)| m) != Some(n) {
                out.push((n, 0));
                last = None;
            }
            if let Some((m, prev)) = last {
                if m == n && (prev < 0.0) != (f < 0.0) {
                    out.last_mut().unwrap().1 += 1;
                }
            }
            last = Some((n, f));
        }
        out
    }
}

/// ρ_n = (1−ε)/N·I + ε|n⟩⟨n| (1-based n) in the computational basis, as two
/// levels: (1+(N−1)ε)/N on |n⟩ and (1−ε)/N on its complement. ε = 0 gives the
/// single-level maximally mixed state.
pub fn pseudopure_density(n: usize, epsilon: f64, index: usize) -> Result<SpectralDensity> {
    if n < 2 {
        return invalid(format!("dimension {n} must be at least 2"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return invalid(format!("purity {epsilon} outside [0, 1]"));
    }
    if index == 0 || index > n {
        return invalid(format!("pure index {index} outside 1..={n}"));
    }
    let nn = nf(n);
    if epsilon == 0.0 {
        let level = SpectralLevel { eigenvalue: 1.0 / nn, multiplicity: n, projector: identity(n) };
        return SpectralDensity::from_levels(n, vec![level]);
    }
    let p: CMatrix = OrthonormalBasis::computational(n).projector(index - 1);
    SpectralDensity::from_levels(
        n,
        vec![
            SpectralLevel { eigenvalue: (1.0 + (nn - 1.0) * epsilon) / nn, multiplicity: 1, projector: p.clone() },
            SpectralLevel { eigenvalue: (1.0 - epsilon) / nn, multiplicity: n - 1, projector: identity(n) - p },
        ],
    )
}

/// The family ρ_k = W^{k−1}ρ_1W†^{k−1} with ρ_1 pseudopure on |1⟩, so ρ_k is
/// pseudopure on |k⟩.
pub fn pseudopure_family(n: usize, epsilon: f64) -> Result<StateFamily> {
    StateFamily::computational(pseudopure_density(n, epsilon, 1)?)
}

/// Engine evaluation of (γ^{(1)}_{ρ_a}, γ^{(1)}_{ρ_b}, γ^{(2)}_{ρ_a ρ_b}) for
/// the block path in span{|a⟩, |b⟩} realizing `p.eta` and `p.omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockPhases {
    pub gamma1_n: PhaseResult,
    pub gamma1_m: PhaseResult,
    pub gamma2: PhaseResult,
}

pub fn block_path(p: &PseudopureParams, a: usize, b: usize) -> Result<UnitaryPath> {
    Ok(pseudopure_block_path(p.n, a, b, p.eta, p.omega)?.into())
}

pub fn engine_block_phases(p: &PseudopureParams, a: usize, b: usize, steps: usize, nodal_tol: f64) -> Result<BlockPhases> {
    let path = block_path(p, a, b)?;
    let engine = PhaseEngine::new(crate::evolution::Integrator::new(TimeGrid::uniform(path.duration(), steps)?), nodal_tol);
    let family = pseudopure_family(p.n, p.epsilon)?;
    Ok(BlockPhases {
        gamma1_n: engine.mixed_degenerate(&path, &family, &IndexTuple::new(vec![a], p.n)?)?,
        gamma1_m: engine.mixed_degenerate(&path, &family, &IndexTuple::new(vec![b], p.n)?)?,
        gamma2: engine.mixed_degenerate(&path, &family, &IndexTuple::new(vec![a, b], p.n)?)?,
    })
}
