//! One-parameter unitary families U(t), their connection integrals and
//! parallel-transporting operators.
//!
//! Generator schedules are integrated with one midpoint exponential per step,
//! which is second order and unitary per step. Sampled paths are integrated
//! from the overlaps U(t_i)†U(t_{i+1}) by default, which keeps the discrete
//! transport exactly covariant under gauge transformations of the samples.

use std::collections::HashMap;

use nalgebra::Schur;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    check_dim, check_square, ensure_hermitian, ensure_projector, ensure_unitary, expm, identity, max_abs_diff,
    outer, polar_unitary_on, CMatrix, CVector, OrthonormalBasis, SpectralDensity, INPUT_TOL,
};

pub mod presets;

/// Default number of uniform integration steps.
pub const DEFAULT_STEPS: usize = 10_000;

/// Strictly increasing integration nodes from 0 to τ.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(duration: f64, n_steps: usize) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return invalid(format!("duration {duration} must be positive"));
        }
        if n_steps == 0 {
            return invalid("grid needs at least one step");
        }
        let mut nodes: Vec<f64> = (0..=n_steps).map(|i| duration * i as f64 / n_steps as f64).collect();
        nodes[n_steps] = duration;
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return invalid("grid needs at least two nodes");
        }
        if nodes[0] != 0.0 {
            return invalid(format!("grid must start at 0, got {}", nodes[0]));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0])) {
            return invalid(format!("grid nodes not strictly increasing at {} -> {}", w[0], w[1]));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn duration(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

/// Hermitian generator of one schedule segment as a function of the local
/// time s = t − segment start.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Constant(CMatrix),
    /// H(s) = Σ_j c_j s^j.
    Polynomial(Vec<CMatrix>),
    /// H(s) = offset + cosine·cos(ωs) + sine·sin(ωs).
    Harmonic { offset: CMatrix, cosine: CMatrix, sine: CMatrix, frequency: f64 },
}

impl Generator {
    fn parts(&self) -> Vec<&CMatrix> {
        match self {
            Generator::Constant(h) => vec![h],
            Generator::Polynomial(c) => c.iter().collect(),
            Generator::Harmonic { offset, cosine, sine, .. } => vec![offset, cosine, sine],
        }
    }

    pub fn dim(&self) -> usize {
        self.parts().first().map_or(0, |m| m.nrows())
    }

    pub fn eval(&self, s: f64) -> CMatrix {
        match self {
            Generator::Constant(h) => h.clone(),
            Generator::Polynomial(coeffs) => {
                let mut acc = CMatrix::zeros(coeffs[0].nrows(), coeffs[0].ncols());
                for c in coeffs.iter().rev() {
                    acc = acc * Complex64::new(s, 0.0) + c;
                }
                acc
            }
            Generator::Harmonic { offset, cosine, sine, frequency } => {
                let (sn, cs) = (frequency * s).sin_cos();
                offset + cosine * Complex64::new(cs, 0.0) + sine * Complex64::new(sn, 0.0)
            }
        }
    }

    fn validate(&self) -> Result<usize> {
        let parts = self.parts();
        if parts.is_empty() {
            return invalid("polynomial generator needs at least one coefficient");
        }
        let dim = parts[0].nrows();
        check_dim(dim)?;
        for p in parts {
            check_square(p, dim)?;
            ensure_hermitian(p)?;
        }
        if let Generator::Harmonic { frequency, .. } = self {
            if !frequency.is_finite() {
                return invalid("harmonic frequency must be finite");
            }
        }
        Ok(dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub generator: Generator,
}

/// Piecewise generator H(t) on contiguous intervals tiling [0, τ].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSchedule {
    dim: usize,
    segments: Vec<Segment>,
}

impl GeneratorSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let Some(first) = segments.first() else {
            return invalid("schedule needs at least one segment");
        };
        if first.start != 0.0 {
            return invalid(format!("schedule must start at t=0, first interval is [{}, {}]", first.start, first.end));
        }
        let dim = first.generator.validate()?;
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.end > seg.start) || !seg.end.is_finite() {
                return invalid(format!("interval {i} [{}, {}] is empty or reversed", seg.start, seg.end));
            }
            let d = seg.generator.validate()?;
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: d });
            }
            if i > 0 {
                let prev = &segments[i - 1];
                let gap = seg.start - prev.end;
                if gap.abs() > 1e-12 * prev.end.abs().max(1.0) {
                    let what = if gap > 0.0 { "gap before" } else { "overlap at" };
                    return invalid(format!(
                        "{what} interval {i} [{}, {}] (previous ends at {})",
                        seg.start, seg.end, prev.end
                    ));
                }
            }
        }
        // Snap boundaries so consecutive segments share exact endpoints.
        let mut segments = segments;
        for i in 1..segments.len() {
            segments[i].start = segments[i - 1].end;
        }
        Ok(Self { dim, segments })
    }

    pub fn constant(h: CMatrix, duration: f64) -> Result<Self> {
        Self::new(vec![Segment { start: 0.0, end: duration, generator: Generator::Constant(h) }])
    }

    /// This schedule followed by `next`, shifted to start at the end of this one.
    pub fn then(&self, next: &GeneratorSchedule) -> Result<Self> {
        let offset = self.duration();
        let mut segments = self.segments.clone();
        segments.extend(next.segments.iter().map(|s| Segment {
            start: s.start + offset,
            end: s.end + offset,
            generator: s.generator.clone(),
        }));
        Self::new(segments)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().unwrap().end
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Index of the segment containing `t` (right-continuous, last segment closed).
    fn segment_at(&self, t: f64) -> usize {
        let idx = self.segments.partition_point(|s| s.end <= t);
        idx.min(self.segments.len() - 1)
    }

    pub fn generator_at(&self, t: f64) -> CMatrix {
        let seg = &self.segments[self.segment_at(t)];
        seg.generator.eval(t - seg.start)
    }
}

/// U(t) given on sample nodes, U(0) = I.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    unitaries: Vec<CMatrix>,
    interpolate: bool,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, mut unitaries: Vec<CMatrix>) -> Result<Self> {
        if times.len() != unitaries.len() {
            return invalid("sample times and unitaries differ in length");
        }
        TimeGrid::from_nodes(times.clone())?;
        let dim = unitaries[0].nrows();
        check_dim(dim)?;
        for u in &unitaries {
            check_square(u, dim)?;
            ensure_unitary(u, INPUT_TOL)?;
        }
        let residual = max_abs_diff(&unitaries[0], &identity(dim));
        if residual > INPUT_TOL {
            return invalid(format!("sampled path must start at the identity (residual {residual:.3e})"));
        }
        unitaries[0] = identity(dim);
        Ok(Self { times, unitaries, interpolate: false })
    }

    /// Allow evaluation grids that are not a subset of the sample nodes, by
    /// geodesic interpolation U_i exp(s log(U_i†U_{i+1})).
    pub fn with_interpolation(mut self, enabled: bool) -> Self {
        self.interpolate = enabled;
        self
    }

    pub fn dim(&self) -> usize {
        self.unitaries[0].nrows()
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn unitaries(&self) -> &[CMatrix] {
        &self.unitaries
    }

    fn node_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.duration().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    fn at(&self, t: f64) -> Result<CMatrix> {
        if let Some(i) = self.node_index(t) {
            return Ok(self.unitaries[i].clone());
        }
        if !self.interpolate {
            return invalid(format!("t = {t} is not a sample node and interpolation is disabled"));
        }
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let step = self.unitaries[i].adjoint() * &self.unitaries[i + 1];
        Ok(&self.unitaries[i] * unitary_power(&step, (t - t0) / (t1 - t0)))
    }
}

/// M^s for unitary M along the principal geodesic.
fn unitary_power(m: &CMatrix, s: f64) -> CMatrix {
    let (q, t) = Schur::new(m.clone()).unpack();
    let diag = CVector::from_iterator(t.nrows(), t.diagonal().iter().map(|z| Complex64::from_polar(1.0, s * z.arg())));
    &q * CMatrix::from_diagonal(&diag) * q.adjoint()
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitaryPath {
    Generated(GeneratorSchedule),
    Sampled(SampledPath),
}

impl From<GeneratorSchedule> for UnitaryPath {
    fn from(s: GeneratorSchedule) -> Self {
        UnitaryPath::Generated(s)
    }
}

impl From<SampledPath> for UnitaryPath {
    fn from(s: SampledPath) -> Self {
        UnitaryPath::Sampled(s)
    }
}

impl UnitaryPath {
    pub fn dim(&self) -> usize {
        match self {
            UnitaryPath::Generated(s) => s.dim(),
            UnitaryPath::Sampled(s) => s.dim(),
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            UnitaryPath::Generated(s) => s.duration(),
            UnitaryPath::Sampled(s) => s.duration(),
        }
    }
}

/// Quadrature rule for the connection integral of generator schedules.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Quadrature {
    #[default]
    Midpoint,
    Trapezoid,
}

/// How sampled paths are differentiated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SampledRule {
    /// Transport from step overlaps U_i†U_{i+1}.
    #[default]
    Overlap,
    /// U̇ from three-point finite differences, integrated by the trapezoid rule.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationOptions {
    pub quadrature: Quadrature,
    pub sampled_rule: SampledRule,
}

type StepKey = (usize, u64);

/// One step of the integration as seen by the transport accumulators.
enum Increment<'a> {
    /// Approximation of ∫ U†U̇ dt over the step (anti-Hermitian). Steps that share
    /// a key have identical increments.
    Connection { matrix: &'a CMatrix, key: Option<StepKey> },
    /// U(t_i)† U(t_{i+1}).
    Overlap(&'a CMatrix),
}

/// Runs product integrations of a path on a grid.
#[derive(Debug, Clone)]
pub struct Integrator {
    grid: TimeGrid,
    options: IntegrationOptions,
}

impl Integrator {
    pub fn new(grid: TimeGrid) -> Self {
        Self { grid, options: IntegrationOptions::default() }
    }

    pub fn with_options(mut self, options: IntegrationOptions) -> Self {
        self.options = options;
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn check_span(&self, duration: f64) -> Result<()> {
        let end = self.grid.duration();
        if (end - duration).abs() > 1e-12 * duration.max(1.0) {
            return invalid(format!("grid spans [0, {end}] but the path has duration {duration}"));
        }
        Ok(())
    }

    /// Walks the path, reporting U at every grid node and every step increment.
    /// Returns U(τ).
    fn walk(
        &self,
        path: &UnitaryPath,
        mut on_node: impl FnMut(usize, &CMatrix),
        mut on_step: impl FnMut(Increment<'_>),
    ) -> Result<CMatrix> {
        self.check_span(path.duration())?;
        match path {
            UnitaryPath::Generated(s) => Ok(self.walk_generated(s, &mut on_node, &mut on_step)),
            UnitaryPath::Sampled(s) => self.walk_sampled(s, &mut on_node, &mut on_step),
        }
    }

    fn walk_generated(
        &self,
        schedule: &GeneratorSchedule,
        on_node: &mut impl FnMut(usize, &CMatrix),
        on_step: &mut impl FnMut(Increment<'_>),
    ) -> CMatrix {
        let dim = schedule.dim();
        let nodes = self.grid.nodes();
        let segments = schedule.segments();
        let mut u = identity(dim);
        on_node(0, &u);

        // Constant-generator segments: per (segment, h) the step exponentials and
        // the connection increment are fixed once U at the segment start is known.
        let mut cache: HashMap<StepKey, (CMatrix, CMatrix)> = HashMap::new();
        let mut current_seg = usize::MAX;
        let mut seg_start_u = u.clone();
        let mut breakpoints = Vec::with_capacity(4);

        for (i, w) in nodes.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            breakpoints.clear();
            breakpoints.push(a);
            let first = schedule.segment_at(a);
            for seg in &segments[first..] {
                if seg.end >= b {
                    break;
                }
                if seg.end > a {
                    breakpoints.push(seg.end);
                }
            }
            breakpoints.push(b);

            for sub in breakpoints.windows(2) {
                let (s0, s1) = (sub[0], sub[1]);
                let h = s1 - s0;
                let mid = 0.5 * (s0 + s1);
                let seg_idx = schedule.segment_at(mid);
                let seg = &segments[seg_idx];
                if seg_idx != current_seg {
                    current_seg = seg_idx;
                    seg_start_u = u.clone();
                    cache.clear();
                }
                match (&seg.generator, self.options.quadrature) {
                    (Generator::Constant(hm), Quadrature::Midpoint) => {
                        let key = (seg_idx, h.to_bits());
                        let (step, conn) = cache.entry(key).or_insert_with(|| {
                            let step = expm(&(hm * Complex64::new(0.0, -h)));
                            let conn = seg_start_u.adjoint() * hm * &seg_start_u * Complex64::new(0.0, -h);
                            (step, conn)
                        });
                        u = &*step * &u;
                        on_step(Increment::Connection { matrix: conn, key: Some(key) });
                    }
                    (generator, Quadrature::Midpoint) => {
                        let hm = generator.eval(mid - seg.start);
                        let half = expm(&(&hm * Complex64::new(0.0, -0.5 * h)));
                        let u_mid = &half * &u;
                        u = &half * &u_mid;
                        let conn = u_mid.adjoint() * &hm * &u_mid * Complex64::new(0.0, -h);
                        on_step(Increment::Connection { matrix: &conn, key: None });
                    }
                    (generator, Quadrature::Trapezoid) => {
                        let hm = generator.eval(mid - seg.start);
                        let h0 = generator.eval(s0 - seg.start);
                        let h1 = generator.eval(s1 - seg.start);
                        let u0 = u.clone();
                        u = expm(&(&hm * Complex64::new(0.0, -h))) * &u;
                        let conn = (u0.adjoint() * h0 * &u0 + u.adjoint() * h1 * &u) * Complex64::new(0.0, -0.5 * h);
                        on_step(Increment::Connection { matrix: &conn, key: None });
                    }
                }
            }
            on_node(i + 1, &u);
        }
        u
    }

    fn walk_sampled(
        &self,
        path: &SampledPath,
        on_node: &mut impl FnMut(usize, &CMatrix),
        on_step: &mut impl FnMut(Increment<'_>),
    ) -> Result<CMatrix> {
        // Integration nodes: all samples, plus grid nodes when interpolating.
        let tol = 1e-12 * path.duration().max(1.0);
        let mut times: Vec<f64> = path.times().to_vec();
        for &t in self.grid.nodes() {
            if path.node_index(t).is_none() {
                if !path.interpolate {
                    return invalid(format!("grid node t = {t} is not a sample node (enable interpolation)"));
                }
                times.push(t);
            }
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let us: Vec<CMatrix> = times.iter().map(|&t| path.at(t)).collect::<Result<_>>()?;

        let grid = self.grid.nodes();
        let mut next_grid = 0;
        let mut report = |t: f64, u: &CMatrix, next_grid: &mut usize| {
            while *next_grid < grid.len() && (grid[*next_grid] - t).abs() <= tol {
                on_node(*next_grid, u);
                *next_grid += 1;
            }
        };
        report(times[0], &us[0], &mut next_grid);

        match self.options.sampled_rule {
            SampledRule::Overlap => {
                for j in 0..times.len() - 1 {
                    let m = us[j].adjoint() * &us[j + 1];
                    on_step(Increment::Overlap(&m));
                    report(times[j + 1], &us[j + 1], &mut next_grid);
                }
            }
            SampledRule::FiniteDifference => {
                let d = finite_difference_connection(&times, &us);
                for j in 0..times.len() - 1 {
                    let h = times[j + 1] - times[j];
                    let c = (&d[j] + &d[j + 1]) * Complex64::new(0.5 * h, 0.0);
                    let c = (&c - c.adjoint()) * Complex64::new(0.5, 0.0);
                    on_step(Increment::Connection { matrix: &c, key: None });
                    report(times[j + 1], &us[j + 1], &mut next_grid);
                }
            }
        }
        Ok(us.last().unwrap().clone())
    }

    /// U at every grid node; the first sample is the identity.
    pub fn evolve(&self, path: &UnitaryPath) -> Result<Vec<CMatrix>> {
        let mut out = vec![CMatrix::zeros(0, 0); self.grid.nodes().len()];
        self.walk(path, |i, u| out[i] = u.clone(), |_| {})?;
        Ok(out)
    }

    /// d_k(τ) = exp(−∫⟨ψ_k|U†U̇|ψ_k⟩dt) for each state, together with U(τ).
    pub fn connection_factors(&self, path: &UnitaryPath, states: &[CVector]) -> Result<(Vec<Complex64>, CMatrix)> {
        for s in states {
            if s.len() != path.dim() {
                return Err(Error::DimensionMismatch { expected: path.dim(), found: s.len() });
            }
        }
        let mut exponent = vec![Complex64::new(0.0, 0.0); states.len()];
        let mut product = vec![Complex64::new(1.0, 0.0); states.len()];
        let u = self.walk(
            path,
            |_, _| {},
            |inc| match inc {
                Increment::Connection { matrix, .. } => {
                    for (k, s) in states.iter().enumerate() {
                        exponent[k] += s.dotc(&(matrix * s));
                    }
                }
                Increment::Overlap(m) => {
                    for (k, s) in states.iter().enumerate() {
                        let z = s.dotc(&(m * s)).conj();
                        product[k] *= z / z.norm();
                    }
                }
            },
        )?;
        let factors = exponent.iter().zip(&product).map(|(e, p)| (-e).exp() * p).collect();
        Ok((factors, u))
    }

    pub fn connection_factor(&self, path: &UnitaryPath, state: &CVector) -> Result<Complex64> {
        Ok(self.connection_factors(path, std::slice::from_ref(state))?.0[0])
    }

    /// U^∥(τ) = U(τ) Σ_k d_k(τ) |ψ_k⟩⟨ψ_k|.
    pub fn parallel_transport_unitary(&self, path: &UnitaryPath, basis: &OrthonormalBasis) -> Result<CMatrix> {
        if basis.dim() != path.dim() {
            return Err(Error::DimensionMismatch { expected: path.dim(), found: basis.dim() });
        }
        let (d, u) = self.connection_factors(path, basis.vectors())?;
        let gauge = (0..basis.dim()).fold(CMatrix::zeros(basis.dim(), basis.dim()), |acc, k| acc + basis.projector(k) * d[k]);
        Ok(u * gauge)
    }

    /// Time-ordered block transport V(τ) = T exp(−∫ Σ_k P_k U†U̇ P_k dt), acting on
    /// the range of the given orthogonal projectors. Returns (V, U(τ)).
    fn block_transport(&self, path: &UnitaryPath, projectors: &[CMatrix]) -> Result<(CMatrix, CMatrix)> {
        let dim = path.dim();
        let support = projectors.iter().fold(CMatrix::zeros(dim, dim), |acc, p| acc + p);
        let mut v = support.clone();
        let mut cache: HashMap<StepKey, CMatrix> = HashMap::new();
        let block = |c: &CMatrix| projectors.iter().fold(CMatrix::zeros(dim, dim), |acc, p| acc + p * c * p);
        let u = self.walk(
            path,
            |_, _| {},
            |inc| match inc {
                Increment::Connection { matrix, key } => {
                    let step = match key {
                        Some(k) => cache.entry(k).or_insert_with(|| expm(&(-block(matrix)))).clone(),
                        None => expm(&(-block(matrix))),
                    };
                    v = &step * &v;
                }
                Increment::Overlap(m) => {
                    let md = m.adjoint();
                    let step = projectors
                        .iter()
                        .fold(CMatrix::zeros(dim, dim), |acc, p| acc + polar_unitary_on(&(p * &md * p), p));
                    v = step * &v;
                }
            },
        )?;
        Ok((&v * &support, u))
    }

    /// α^∥(τ) = P T exp(−∫ P U†U̇ P dt) P.
    pub fn subspace_parallel_transport(&self, path: &UnitaryPath, projector: &CMatrix) -> Result<CMatrix> {
        check_square(projector, path.dim())?;
        ensure_projector(projector)?;
        Ok(self.block_transport(path, std::slice::from_ref(projector))?.0)
    }

    /// Parallel-transporting pair for a density operator whose level projectors
    /// resolve the identity: V^∥(τ) = Σ_k α^∥_k(τ) and U^∥(τ) = U(τ) V^∥(τ).
    pub fn parallel_family(&self, path: &UnitaryPath, rho: &SpectralDensity) -> Result<ParallelFamily> {
        if rho.dim() != path.dim() {
            return Err(Error::DimensionMismatch { expected: path.dim(), found: rho.dim() });
        }
        if !rho.is_complete() {
            return invalid("level projectors do not resolve the identity; add the kernel level (SpectralDensity::completed)");
        }
        let projectors: Vec<CMatrix> = rho.levels().iter().map(|l| l.projector.clone()).collect();
        let (v, u) = self.block_transport(path, &projectors)?;
        Ok(ParallelFamily { transporter: &u * &v, supplementary: v, final_unitary: u })
    }
}

/// Result of [`Integrator::parallel_family`].
#[derive(Debug, Clone)]
pub struct ParallelFamily {
    /// U^∥(τ) = U(τ) V^∥(τ).
    pub transporter: CMatrix,
    /// V^∥(τ).
    pub supplementary: CMatrix,
    /// U(τ).
    pub final_unitary: CMatrix,
}

/// U_j† U̇_j at each node from three-point (nonuniform) differences.
fn finite_difference_connection(times: &[f64], us: &[CMatrix]) -> Vec<CMatrix> {
    let n = times.len();
    let c = |x: f64| Complex64::new(x, 0.0);
    (0..n)
        .map(|j| {
            let deriv = if n == 2 {
                (&us[1] - &us[0]) * c(1.0 / (times[1] - times[0]))
            } else if j == 0 {
                let (h1, h2) = (times[1] - times[0], times[2] - times[1]);
                &us[0] * c(-(2.0 * h1 + h2) / (h1 * (h1 + h2))) + &us[1] * c((h1 + h2) / (h1 * h2))
                    + &us[2] * c(-h1 / (h2 * (h1 + h2)))
            } else if j == n - 1 {
                let (h1, h2) = (times[n - 2] - times[n - 3], times[n - 1] - times[n - 2]);
                &us[n - 3] * c(h2 / (h1 * (h1 + h2))) + &us[n - 2] * c(-(h1 + h2) / (h1 * h2))
                    + &us[n - 1] * c((2.0 * h2 + h1) / (h2 * (h1 + h2)))
            } else {
                let (h1, h2) = (times[j] - times[j - 1], times[j + 1] - times[j]);
                &us[j - 1] * c(-h2 / (h1 * (h1 + h2))) + &us[j] * c((h2 - h1) / (h1 * h2))
                    + &us[j + 1] * c(h1 / (h2 * (h1 + h2)))
            };
            us[j].adjoint() * deriv
        })
        .collect()
}

/// Samples U on a grid and wraps the samples as a sampled path.
pub fn sample_path(path: &UnitaryPath, grid: &TimeGrid) -> Result<SampledPath> {
    let us = Integrator::new(grid.clone()).evolve(path)?;
    SampledPath::new(grid.nodes().to_vec(), us)
}

pub fn evolve(path: &UnitaryPath, grid: &TimeGrid) -> Result<Vec<CMatrix>> {
    Integrator::new(grid.clone()).evolve(path)
}

pub fn connection_factor(path: &UnitaryPath, grid: &TimeGrid, state: &CVector) -> Result<Complex64> {
    Integrator::new(grid.clone()).connection_factor(path, state)
}

pub fn parallel_transport_unitary(path: &UnitaryPath, basis: &OrthonormalBasis, grid: &TimeGrid) -> Result<CMatrix> {
    Integrator::new(grid.clone()).parallel_transport_unitary(path, basis)
}

pub fn subspace_parallel_transport(path: &UnitaryPath, projector: &CMatrix, grid: &TimeGrid) -> Result<CMatrix> {
    Integrator::new(grid.clone()).subspace_parallel_transport(path, projector)
}

pub fn build_parallel_family(path: &UnitaryPath, rho: &SpectralDensity, grid: &TimeGrid) -> Result<ParallelFamily> {
    Integrator::new(grid.clone()).parallel_family(path, rho)
}

/// Σ_k e^{iθ_k} |ψ_k⟩⟨ψ_k|.
pub fn diagonal_gauge(basis: &OrthonormalBasis, angles: &[f64]) -> CMatrix {
    angles.iter().enumerate().fold(CMatrix::zeros(basis.dim(), basis.dim()), |acc, (k, &a)| {
        acc + outer(basis.vector(k), basis.vector(k)) * Complex64::from_polar(1.0, a)
    })
}
