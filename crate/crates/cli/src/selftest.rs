//! Reduced acceptance checks, fast enough to run from the command line.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use offdiag_core::evolution::presets::{
    embed_block, precession, precession_solid_angle, rotating_loop, rotating_loop_for_solid_angle,
};
use offdiag_core::evolution::{build_parallel_family, Generator, GeneratorSchedule, Segment, TimeGrid, UnitaryPath};
use offdiag_core::interferometer::{
    chi_grid, conditional_circuit_readout, fit_interferogram, interferogram, purify_pseudopure, Arms,
};
use offdiag_core::linalg::{cyclic_shift_unitary, identity, max_abs_diff};
use offdiag_core::phases::{GaugeSpec, IndexTuple, PhaseEngine, PhaseTarget, StateFamily};
use offdiag_core::pseudopure::{
    engine_block_phases, f_eta, f_eta_root, figure1_data, gamma2_argument, l1_nodal_eta, l2_nodal_eta_squared,
    pseudopure_family, uniform_eta_grid, Figure1Data, PseudopureParams,
};
use offdiag_core::random::{random_hermitian, random_su2_generator, random_unitary};
use offdiag_core::{OrthonormalBasis, Result, SpectralDensity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckOutcome>,
}

struct Ctx {
    seed: u64,
    steps: usize,
}

impl Ctx {
    /// Independent stream per check so results do not depend on run order.
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn engine(&self, path: &UnitaryPath) -> Result<PhaseEngine> {
        Ok(PhaseEngine::with_grid(TimeGrid::uniform(path.duration(), self.steps)?))
    }
}

type Check = fn(&Ctx) -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 10] = [
    ("qubit pi-shift", qubit_shift),
    ("maximally mixed transport", maximally_mixed),
    ("qubit mixed closed form", qubit_mixed),
    ("pure limit precession", pure_limit),
    ("gauge invariance", gauge),
    ("order-2 sign law", sign_law),
    ("nodal bounds", nodal_bounds),
    ("common nodal function", common_nodal),
    ("interferometric consistency", interferometer),
    ("reduction chain", reduction_chain),
];

/// Runs every check; order of the result follows the check list.
pub fn run_all(seed: u64, steps: usize) -> Vec<CheckOutcome> {
    let ctx = Ctx { seed, steps };
    CHECKS
        .par_iter()
        .map(|(name, check)| match check(&ctx) {
            Ok((passed, detail)) => CheckOutcome { name, passed, detail },
            Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
        })
        .collect()
}

fn random_schedule(rng: &mut ChaCha8Rng, dim: usize) -> Result<UnitaryPath> {
    let mut segments = Vec::new();
    let mut t = 0.0;
    for _ in 0..rng.gen_range(1..=2) {
        let len = rng.gen_range(0.3..1.2);
        let generator = if dim == 2 {
            Generator::Polynomial(vec![random_su2_generator(rng, 3.0), random_su2_generator(rng, 3.0)])
        } else {
            Generator::Polynomial(vec![random_hermitian(rng, dim, 1.5), random_hermitian(rng, dim, 1.5)])
        };
        segments.push(Segment { start: t, end: t + len, generator });
        t += len;
    }
    Ok(GeneratorSchedule::new(segments)?.into())
}

fn qubit_shift(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(1);
    let basis = OrthonormalBasis::computational(2);
    let (mut used, mut worst) = (0, 0.0f64);
    while used < 20 {
        let path = random_schedule(&mut rng, 2)?;
        let eng = ctx.engine(&path)?;
        let u = eng.integrator().evolve(&path)?.pop().expect("grid has nodes");
        if u[(0, 1)].norm() <= 1e-6 {
            continue;
        }
        let r = eng.pure(&path, &basis, &IndexTuple::new(vec![1, 2], 2)?)?.result;
        worst = worst.max(if r.defined { (r.phase + 1.0).norm() } else { 2.0 });
        used += 1;
    }
    Ok((worst < 1e-8, format!("20 paths, max |γ+1| = {worst:.2e}")))
}

fn maximally_mixed(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(2);
    let mut worst = 0.0f64;
    for dim in [2, 3, 4] {
        let path = random_schedule(&mut rng, dim)?;
        let rho = SpectralDensity::diagonal(&vec![1.0 / dim as f64; dim], &OrthonormalBasis::computational(dim), 1e-9)?;
        let family = build_parallel_family(&path, &rho, &TimeGrid::uniform(path.duration(), ctx.steps)?)?;
        worst = worst.max(max_abs_diff(&family.transporter, &identity(dim)));
    }
    Ok((worst < 1e-8, format!("3 paths, max |U∥ − I| = {worst:.2e}")))
}

fn qubit_mixed(ctx: &Ctx) -> Result<(bool, String)> {
    let idx = IndexTuple::new(vec![1], 2)?;
    let mut worst = 0.0f64;
    for (eps, omega) in [(0.2, 1.0), (0.5, 3.0), (0.8, 5.4)] {
        let path: UnitaryPath = rotating_loop(rotating_loop_for_solid_angle(omega)?, 1, 1)?.into();
        let r = ctx.engine(&path)?.mixed_nondegenerate(&path, &pseudopure_family(2, eps)?, &idx)?;
        let exact = Complex64::from_polar(1.0, -(eps * (omega / 2.0).sin()).atan2((omega / 2.0).cos()));
        worst = worst.max((r.phase - exact).norm());
    }
    Ok((worst < 1e-6, format!("3 points, max error = {worst:.2e}")))
}

fn pure_limit(ctx: &Ctx) -> Result<(bool, String)> {
    let basis = OrthonormalBasis::computational(2);
    let idx = IndexTuple::new(vec![1], 2)?;
    let mut worst = 0.0f64;
    for theta in [PI / 6.0, PI / 3.0, PI / 2.0] {
        let path: UnitaryPath = precession(theta, 1)?.into();
        let r = ctx.engine(&path)?.pure(&path, &basis, &idx)?.result;
        let expected = Complex64::from_polar(1.0, -precession_solid_angle(theta) / 2.0);
        worst = worst.max((r.phase - expected).norm());
    }
    Ok((worst < 1e-6, format!("3 angles, max error = {worst:.2e}")))
}

fn gauge(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(5);
    let path = random_schedule(&mut rng, 3)?;
    let eng = ctx.engine(&path)?;
    let basis = OrthonormalBasis::from_unitary(&random_unitary(&mut rng, 3))?;
    let family = StateFamily::new(SpectralDensity::diagonal(&[0.5, 0.3, 0.2], &basis, 1e-9)?, basis.clone())?;
    let pseudo = pseudopure_family(3, 0.4)?;
    let pair = IndexTuple::new(vec![1, 2], 3)?;
    let spec = GaugeSpec::default();
    let reports = [
        eng.gauge_invariance_report(&path, &PhaseTarget::Pure(basis), &pair, 3, ctx.seed, spec)?,
        eng.gauge_invariance_report(&path, &PhaseTarget::Nondegenerate(family), &pair, 3, ctx.seed, spec)?,
        eng.gauge_invariance_report(&path, &PhaseTarget::Degenerate(pseudo), &pair, 3, ctx.seed, spec)?,
    ];
    let worst = reports.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
    let excluded: usize = reports.iter().map(|r| r.excluded).sum();
    Ok((worst < 1e-7 && excluded == 0, format!("9 gauges, max deviation = {worst:.2e}")))
}

fn sign_law(ctx: &Ctx) -> Result<(bool, String)> {
    let (mut worst, mut checked) = (0.0f64, 0);
    for eps in [0.2, 0.6, 1.0] {
        for eta in [0.3, 0.7, 1.0] {
            for omega in [1.0, 4.0, 10.0] {
                let p = PseudopureParams::new(4, eps, eta, omega)?;
                let r = engine_block_phases(&p, 1, 2, ctx.steps, 1e-10)?.gamma2;
                let argument = gamma2_argument(&p);
                worst = worst.max((r.raw_trace - Complex64::new(argument / 4.0, 0.0)).norm());
                if argument.abs() >= 1e-6 {
                    checked += 1;
                    let sign = Complex64::new(argument.signum(), 0.0);
                    worst = worst.max(if r.defined { (r.phase - sign).norm() } else { 2.0 });
                }
            }
        }
    }
    Ok((worst < 1e-6, format!("27 points ({checked} signed), max gap = {worst:.2e}")))
}

fn nodal_bounds(_: &Ctx) -> Result<(bool, String)> {
    let mut bad = 0;
    for k in 1..=120 {
        let eps = k as f64 / 120.0;
        if l1_nodal_eta(5, eps)?.is_some() != (eps >= 1.0 / 6.0) {
            bad += 1;
        }
        for j in 0..20 {
            let omega = PI / 2.0 + PI * (j as f64 + 0.5) / 20.0;
            if eps < 1.0 && l2_nodal_eta_squared(2, eps, omega)?.is_some() {
                bad += 1;
            }
        }
    }
    Ok((bad == 0, format!("{bad} violations")))
}

fn common_nodal(_: &Ctx) -> Result<(bool, String)> {
    let ns = [3, 4, 5, 6];
    let mut ok = true;
    for &n in &ns {
        let root = f_eta_root(n)?;
        ok &= f_eta(0.0, n)? == -1.0 && f_eta(1.0, n)? > 0.0 && root > 0.0 && root < 1.0 && f_eta(root, n)?.abs() < 1e-12;
    }
    let data = Figure1Data::from_csv(&figure1_data(&ns, &uniform_eta_grid(200))?.to_csv())?;
    let changes = data.sign_changes();
    ok &= changes.iter().all(|&(_, c)| c == 1) && changes.len() == ns.len();
    Ok((ok, format!("sign changes {changes:?}")))
}

fn interferometer(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(9);
    let chis = chi_grid(64);
    let (mut shift_gap, mut circuit_gap) = (0.0f64, 0.0f64);
    for (k, (n, eps)) in [(2, 1.0), (3, 0.5), (4, 0.8)].into_iter().enumerate() {
        let (a, b) = (1, n);
        let path: UnitaryPath = GeneratorSchedule::constant(embed_block(n, a, b, &random_su2_generator(&mut rng, 4.0))?, 1.0)?.into();
        let family = pseudopure_family(n, eps)?;
        let eng = ctx.engine(&path)?;
        let transporter = eng.integrator().parallel_family(&path, &family.member(a))?.transporter;
        let trace = eng.mixed_degenerate(&path, &family, &IndexTuple::new(vec![a, b], n)?)?;
        let arms = Arms::for_pair(&cyclic_shift_unitary(&OrthonormalBasis::computational(n))?, &transporter, a, b)?;
        let state = purify_pseudopure(n, eps, a)?;
        let direct = interferogram(&state, &arms, &chis)?;
        let circuit = conditional_circuit_readout(&state, &arms, &chis)?;
        for (c, d) in circuit.iter().zip(&direct) {
            circuit_gap = circuit_gap.max((4.0 * c.intensity - d.intensity).abs());
        }
        let Some(shift) = fit_interferogram(&direct)?.shift else {
            return Ok((false, format!("config {k}: no fringes")));
        };
        let target = if k == 0 { PI } else { trace.raw_trace.arg() };
        let g = (shift - target).rem_euclid(TAU);
        shift_gap = shift_gap.max(g.min(TAU - g));
    }
    Ok((shift_gap < 1e-4 && circuit_gap < 1e-10, format!("3 configs, shift gap {shift_gap:.1e}, circuit gap {circuit_gap:.1e}")))
}

fn reduction_chain(ctx: &Ctx) -> Result<(bool, String)> {
    let mut rng = ctx.rng(10);
    let (mut worst, mut symmetric) = (0.0f64, true);
    for dim in [2, 3] {
        let path = random_schedule(&mut rng, dim)?;
        let eng = ctx.engine(&path)?;
        let basis = OrthonormalBasis::from_unitary(&random_unitary(&mut rng, dim))?;
        let weights: Vec<f64> = (1..=dim).map(|k| k as f64).collect();
        let total: f64 = weights.iter().sum();
        let rho = SpectralDensity::diagonal(&weights.iter().map(|w| w / total).collect::<Vec<_>>(), &basis, 1e-9)?;
        let family = StateFamily::new(rho, basis.clone())?;
        let rank1 = StateFamily::new(SpectralDensity::pure(basis.vector(0))?, basis.clone())?;
        let (nm, mn) = (IndexTuple::new(vec![1, dim], dim)?, IndexTuple::new(vec![dim, 1], dim)?);
        let nondeg = eng.mixed_nondegenerate(&path, &family, &nm)?;
        worst = worst.max(eng.mixed_degenerate(&path, &family, &nm)?.distance(&nondeg));
        worst = worst.max(eng.mixed_nondegenerate(&path, &rank1, &nm)?.distance(&eng.pure(&path, &basis, &nm)?.result));
        symmetric &= nondeg == eng.mixed_nondegenerate(&path, &family, &mn)?;
    }
    Ok((worst < 1e-8 && symmetric, format!("max gap {worst:.1e}, exact symmetry {symmetric}")))
}
