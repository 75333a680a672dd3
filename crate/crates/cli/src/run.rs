//! Dispatch from a parsed config to the engines, and artifact emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use offdiag_core::evolution::{Integrator, TimeGrid, UnitaryPath};
use offdiag_core::interferometer::{
    chi_grid, conditional_circuit_readout, fit_interferogram, interferogram, Arms, InterferogramFit, Purification,
};
use offdiag_core::phases::{IndexTuple, PhaseEngine};
use offdiag_core::pseudopure::{
    block_path, engine_block_phases, figure1_data, format_sig17, gamma1_closed, gamma1_closed_partner,
    gamma2_argument, gamma2_closed, l1_nodal_eta, l1_nodal_residual, l2_nodal_eta_squared, pseudopure_family,
    uniform_eta_grid, PseudopureParams,
};
use offdiag_core::{CMatrix, PhaseResult};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Mode, ScanSource};
use crate::error::CliError;
use crate::selftest;

pub const TOOL: &str = concat!("offdiag ", env!("CARGO_PKG_VERSION"));

/// Command-line values that replace config fields before hashing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            cfg.seed = Some(seed);
        }
        if let Some(steps) = self.grid {
            cfg.grid.steps = steps;
        }
        if let Some(tol) = self.tol {
            cfg.tolerances.nodal = tol;
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads for sweep cells; `None` uses every available core.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    /// File names written into the output directory, in emission order.
    pub artifacts: Vec<String>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub mode: &'static str,
    pub config_sha256: String,
    pub grid_steps: usize,
    pub nodal_tol: f64,
    pub degeneracy_tol: f64,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        let digest = Sha256::digest(cfg.to_toml().as_bytes());
        Self {
            tool: TOOL,
            mode: cfg.mode.name(),
            config_sha256: hex::encode(digest),
            grid_steps: cfg.grid.steps,
            nodal_tol: cfg.tolerances.nodal,
            degeneracy_tol: cfg.tolerances.degeneracy,
            seed: cfg.seed,
        }
    }

    /// `# key=value` lines for the top of a CSV file.
    pub fn csv_header(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# tool={}\n# mode={}\n# config_sha256={}\n# grid_steps={}\n# nodal_tol={:e}\n# degeneracy_tol={:e}\n# seed={seed}\n",
            self.tool, self.mode, self.config_sha256, self.grid_steps, self.nodal_tol, self.degeneracy_tol
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseJson {
    pub defined: bool,
    pub phase: [f64; 2],
    pub angle: Option<f64>,
    pub trace: [f64; 2],
    pub magnitude: f64,
}

impl From<&PhaseResult> for PhaseJson {
    fn from(r: &PhaseResult) -> Self {
        Self {
            defined: r.defined,
            phase: [r.phase.re, r.phase.im],
            angle: r.angle(),
            trace: [r.raw_trace.re, r.raw_trace.im],
            magnitude: r.magnitude,
        }
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

struct Output {
    dir: PathBuf,
    report: RunReport,
    undefined: Vec<String>,
}

impl Output {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), contents)?;
        self.report.artifacts.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn say(&mut self, line: String) {
        self.report.summary.push(line);
    }

    fn phase_line(&mut self, label: &str, r: &PhaseResult) {
        let line = match r.angle() {
            Some(a) => format!("{label}: phase {:+.12} {:+.12}i (angle {a:+.12}), |trace| = {:.6e}", r.phase.re, r.phase.im, r.magnitude),
            None => {
                self.undefined.push(label.to_string());
                format!("{label}: undefined (|trace| = {:.3e})", r.magnitude)
            }
        };
        self.say(line);
    }
}

fn engine(cfg: &ExperimentConfig, path: &UnitaryPath) -> Result<PhaseEngine, CliError> {
    let grid = TimeGrid::uniform(path.duration(), cfg.grid.steps)?;
    Ok(PhaseEngine::new(Integrator::new(grid), cfg.tolerances.nodal))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        if k == 0 {
            return Err(CliError::Schema("--workers must be positive".into()));
        }
        builder = builder.num_threads(k);
    }
    builder.build().map_err(|e| CliError::Numerical(e.to_string()))
}

/// Runs `cfg`, writing `provenance.json`, `config.toml` and the mode's
/// artifacts into `opts.out_dir`. Undefined results are written with
/// `defined = false` and become [`CliError::Undefined`] only when the config
/// sets `require_defined`.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    let (report, status) = run_reporting(cfg, opts)?;
    status.map(|()| report)
}

/// Like [`run`], but keeps the report when the run completes with a failing
/// status (undefined result or selftest failure), so it can still be shown.
pub fn run_reporting(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(RunReport, Result<(), CliError>), CliError> {
    cfg.validate()?;
    fs::create_dir_all(&opts.out_dir)?;
    let provenance = Provenance::of(cfg);
    let mut out = Output { dir: opts.out_dir.clone(), report: RunReport::default(), undefined: Vec::new() };
    out.json("provenance.json", &provenance)?;
    out.write("config.toml", &cfg.to_toml())?;
    let pool = pool(opts.workers)?;
    let mut status = Ok(());
    match cfg.mode {
        Mode::Pure => run_pure(cfg, &mut out)?,
        Mode::Mixed | Mode::Degenerate => run_mixed(cfg, &mut out)?,
        Mode::PseudopureClosed => run_pseudopure(cfg, &mut out)?,
        Mode::NodalScan => pool.install(|| run_scan(cfg, &provenance, &mut out))?,
        Mode::Figure1 => run_figure1(cfg, &mut out)?,
        Mode::Interfere => run_interfere(cfg, &provenance, &mut out)?,
        Mode::Selftest => {
            if let Some(err) = pool.install(|| run_selftest(cfg, &mut out))? {
                status = Err(err);
            }
        }
    }
    if status.is_ok() && cfg.require_defined && !out.undefined.is_empty() {
        status = Err(CliError::Undefined(out.undefined.join(", ")));
    }
    Ok((out.report, status))
}

#[derive(Serialize)]
struct LinkJson {
    from: usize,
    to: usize,
    amplitude: [f64; 2],
    defined: bool,
}

#[derive(Serialize)]
struct PhaseReport {
    mode: &'static str,
    indices: Vec<usize>,
    result: PhaseJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    links: Option<Vec<LinkJson>>,
}

fn run_pure(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let path = cfg.build_path()?;
    let basis = cfg.build_basis()?;
    let idx = cfg.index_tuple()?;
    let r = engine(cfg, &path)?.pure(&path, &basis, &idx)?;
    out.phase_line(&format!("pure γ{:?}", idx.indices()), &r.result);
    let links = r
        .links
        .iter()
        .map(|l| LinkJson { from: l.from, to: l.to, amplitude: pair(l.amplitude), defined: l.defined })
        .collect();
    out.json(
        "result.json",
        &PhaseReport { mode: cfg.mode.name(), indices: idx.indices().to_vec(), result: (&r.result).into(), links: Some(links) },
    )
}

fn run_mixed(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let path = cfg.build_path()?;
    let family = cfg.build_family()?;
    let idx = cfg.index_tuple()?;
    let eng = engine(cfg, &path)?;
    let r = if cfg.mode == Mode::Mixed {
        eng.mixed_nondegenerate(&path, &family, &idx)?
    } else {
        eng.mixed_degenerate(&path, &family, &idx)?
    };
    out.phase_line(&format!("{} γ{:?}", cfg.mode.name(), idx.indices()), &r);
    out.json("result.json", &PhaseReport { mode: cfg.mode.name(), indices: idx.indices().to_vec(), result: (&r).into(), links: None })
}

#[derive(Serialize)]
struct PseudopureReport {
    params: PseudopureParams,
    indices: [usize; 2],
    gamma1_n: PhaseJson,
    gamma1_m: PhaseJson,
    gamma2: PhaseJson,
    l1_residual: f64,
    gamma2_argument: f64,
    /// Visibility of the l=1 nodal point at Ω = 2π; absent for N < 3 or when above 1.
    l1_nodal_eta: Option<f64>,
    l2_nodal_eta_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    engine: Option<EngineCheck>,
}

#[derive(Serialize)]
struct EngineCheck {
    gamma1_n: PhaseJson,
    gamma1_m: PhaseJson,
    gamma2: PhaseJson,
    /// Largest |trace_engine − trace_closed| over the three phases.
    max_trace_gap: f64,
}

fn run_pseudopure(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.pseudopure.as_ref().expect("validated");
    let n = cfg.dimension();
    let p = PseudopureParams::new(n, spec.epsilon, spec.eta, spec.omega)?;
    let tol = cfg.tolerances.nodal;
    let idx = cfg.indices.clone().expect("validated");
    let (a, b) = (idx[0], idx[1]);
    let closed = [gamma1_closed(&p, tol), gamma1_closed_partner(&p, tol), gamma2_closed(&p, tol)];
    for (label, r) in ["γ1(ρ_n)", "γ1(ρ_m)", "γ2(ρ_n, ρ_m)"].iter().zip(&closed) {
        out.phase_line(label, r);
    }
    let engine = if spec.verify {
        let e = engine_block_phases(&p, a, b, cfg.grid.steps, tol)?;
        let engine_results = [e.gamma1_n, e.gamma1_m, e.gamma2];
        let gap = engine_results.iter().zip(&closed).map(|(x, y)| (x.raw_trace - y.raw_trace).norm()).fold(0.0, f64::max);
        out.say(format!("engine vs closed form: max trace gap {gap:.3e}"));
        Some(EngineCheck {
            gamma1_n: (&e.gamma1_n).into(),
            gamma1_m: (&e.gamma1_m).into(),
            gamma2: (&e.gamma2).into(),
            max_trace_gap: gap,
        })
    } else {
        None
    };
    let report = PseudopureReport {
        params: p,
        indices: [a, b],
        gamma1_n: (&closed[0]).into(),
        gamma1_m: (&closed[1]).into(),
        gamma2: (&closed[2]).into(),
        l1_residual: l1_nodal_residual(&p),
        gamma2_argument: gamma2_argument(&p),
        l1_nodal_eta: if n >= 3 { l1_nodal_eta(n, p.epsilon)? } else { None },
        l2_nodal_eta_squared: l2_nodal_eta_squared(n, p.epsilon, p.omega).unwrap_or(None),
        engine,
    };
    out.json("result.json", &report)
}

/// One (ε, η) cell of a nodal scan.
#[derive(Debug, Clone, Copy)]
struct ScanCell {
    epsilon: f64,
    eta: f64,
    l1_residual: f64,
    l2_argument: f64,
}

fn scan_cells(cfg: &ExperimentConfig) -> Result<Vec<ScanCell>, CliError> {
    let spec = cfg.scan.as_ref().expect("validated");
    let n = cfg.dimension();
    let (epsilons, etas) = (spec.epsilon.values(), spec.eta.values());
    for &eps in &epsilons {
        for &eta in &etas {
            PseudopureParams::new(n, eps, eta, spec.omega)?;
        }
    }
    match spec.source {
        ScanSource::Closed => {
            let cells: Vec<(f64, f64)> = epsilons.iter().flat_map(|&e| etas.iter().map(move |&h| (e, h))).collect();
            Ok(cells
                .par_iter()
                .map(|&(epsilon, eta)| {
                    let p = PseudopureParams { n, epsilon, eta, omega: spec.omega };
                    ScanCell { epsilon, eta, l1_residual: l1_nodal_residual(&p), l2_argument: gamma2_argument(&p) }
                })
                .collect())
        }
        ScanSource::Engine => {
            // Transporters depend on the path and the level projectors only,
            // so one pair per η serves every ε.
            let per_eta: Vec<Vec<ScanCell>> = etas
                .par_iter()
                .map(|&eta| -> Result<Vec<ScanCell>, CliError> {
                    let probe = PseudopureParams { n, epsilon: 0.5, eta, omega: spec.omega };
                    let path = block_path(&probe, 1, 2)?;
                    let eng = engine(cfg, &path)?;
                    let reference = pseudopure_family(n, 0.5)?;
                    let t: Vec<CMatrix> = [1, 2]
                        .iter()
                        .map(|&j| eng.integrator().parallel_family(&path, &reference.member(j)).map(|f| f.transporter))
                        .collect::<Result<_, _>>()?;
                    epsilons
                        .iter()
                        .map(|&epsilon| {
                            let family = pseudopure_family(n, epsilon)?;
                            let one = eng.phase_from_transporters(&family, &IndexTuple::new(vec![1], n)?, |_| Ok(t[0].clone()))?;
                            let two = eng.phase_from_transporters(&family, &IndexTuple::new(vec![1, 2], n)?, |j| Ok(t[j - 1].clone()))?;
                            let nn = n as f64;
                            Ok(ScanCell {
                                epsilon,
                                eta,
                                l1_residual: (one.raw_trace * nn).norm_sqr(),
                                l2_argument: two.raw_trace.re * nn,
                            })
                        })
                        .collect()
                })
                .collect::<Result<_, _>>()?;
            let mut cells = Vec::with_capacity(epsilons.len() * etas.len());
            for i in 0..epsilons.len() {
                cells.extend(per_eta.iter().map(|column| column[i]));
            }
            Ok(cells)
        }
    }
}

fn run_scan(cfg: &ExperimentConfig, provenance: &Provenance, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.scan.as_ref().expect("validated");
    let n = cfg.dimension();
    let cells = scan_cells(cfg)?;
    let mut scan = provenance.csv_header();
    writeln!(scan, "# omega={}\n# source={:?}", format_sig17(spec.omega), spec.source).unwrap();
    scan.push_str("epsilon,eta,l1_residual,l2_argument\n");
    for c in &cells {
        writeln!(scan, "{},{},{},{}", format_sig17(c.epsilon), format_sig17(c.eta), format_sig17(c.l1_residual), format_sig17(c.l2_argument)).unwrap();
    }
    out.write("scan.csv", &scan)?;

    // Per-ε minimum of the l=1 residual against the analytic curve, which
    // exists only where cos(Ω/2) = −1.
    let on_curve = n >= 3 && ((spec.omega / 2.0).cos() + 1.0).abs() < 1e-12;
    let mut curve = provenance.csv_header();
    curve.push_str("epsilon,eta_min,l1_residual_min,eta_analytic\n");
    let per_row = spec.eta.count;
    let mut worst_gap: Option<f64> = None;
    for row in cells.chunks(per_row) {
        let best = row.iter().fold(row[0], |b, c| if c.l1_residual < b.l1_residual { *c } else { b });
        let analytic = if on_curve { l1_nodal_eta(n, best.epsilon)? } else { None };
        if let Some(eta) = analytic {
            worst_gap = Some(worst_gap.unwrap_or(0.0).max((eta - best.eta).abs()));
        }
        writeln!(
            curve,
            "{},{},{},{}",
            format_sig17(best.epsilon),
            format_sig17(best.eta),
            format_sig17(best.l1_residual),
            analytic.map(format_sig17).unwrap_or_default()
        )
        .unwrap();
    }
    out.write("curve.csv", &curve)?;
    out.say(format!("scanned {} cells ({} x {})", cells.len(), spec.epsilon.count, spec.eta.count));
    if let Some(gap) = worst_gap {
        out.say(format!("largest |η_min − η_analytic| = {gap:.3e}"));
    }
    Ok(())
}

fn run_figure1(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.figure1.as_ref().expect("filled by defaults");
    let data = figure1_data(&spec.ns, &uniform_eta_grid(spec.points))?;
    out.write("figure1.csv", &data.to_csv())?;
    for (n, root) in &data.roots {
        out.say(format!("N = {n}: f(η, N) = 0 at η = {}", format_sig17(*root)));
    }
    Ok(())
}

#[derive(Serialize)]
struct InterfereReport {
    indices: [usize; 2],
    fit: InterferogramFit,
    cross_term: [f64; 2],
    trace: PhaseJson,
    /// Angular distance between the fitted shift and arg of the l=2 trace.
    shift_gap: Option<f64>,
    /// max |4·p00 − I| over the χ grid.
    circuit_gap: f64,
}

fn run_interfere(cfg: &ExperimentConfig, provenance: &Provenance, out: &mut Output) -> Result<(), CliError> {
    let path = cfg.build_path()?;
    let family = cfg.build_family()?;
    let idx = cfg.index_tuple()?;
    let (a, b) = (idx.indices()[0], idx.indices()[1]);
    let eng = engine(cfg, &path)?;
    let transporter = eng.integrator().parallel_family(&path, &family.member(a))?.transporter;
    let arms = Arms::for_pair(family.shift(), &transporter, a, b)?;
    let state = Purification::of_density(&family.member(a))?;
    let chis = chi_grid(cfg.interfere.as_ref().expect("filled by defaults").chi_points);
    let direct = interferogram(&state, &arms, &chis)?;
    let circuit = conditional_circuit_readout(&state, &arms, &chis)?;
    let fit = fit_interferogram(&direct)?;
    let trace = eng.mixed_degenerate(&path, &family, &idx)?;
    let circuit_gap = direct.iter().zip(&circuit).map(|(d, c)| (4.0 * c.intensity - d.intensity).abs()).fold(0.0, f64::max);

    let mut csv = provenance.csv_header();
    csv.push_str("chi,intensity,circuit_p00\n");
    for (d, c) in direct.iter().zip(&circuit) {
        writeln!(csv, "{},{},{}", format_sig17(d.chi), format_sig17(d.intensity), format_sig17(c.intensity)).unwrap();
    }
    out.write("interferogram.csv", &csv)?;

    let shift_gap = match (fit.shift, trace.defined) {
        (Some(s), true) => {
            let g = (s - trace.raw_trace.arg()).rem_euclid(std::f64::consts::TAU);
            Some(g.min(std::f64::consts::TAU - g))
        }
        _ => None,
    };
    match fit.shift {
        Some(s) => out.say(format!("fitted shift {s:+.9} rad, visibility {:.6}", fit.visibility)),
        None => {
            out.undefined.push("interferogram shift".into());
            out.say(format!("no fringes: visibility {:.3e}", fit.visibility));
        }
    }
    out.phase_line(&format!("degenerate γ{:?}", idx.indices()), &trace);
    out.json(
        "result.json",
        &InterfereReport {
            indices: [a, b],
            fit,
            cross_term: pair(arms.cross_term(&state)?),
            trace: (&trace).into(),
            shift_gap,
            circuit_gap,
        },
    )
}

fn run_selftest(cfg: &ExperimentConfig, out: &mut Output) -> Result<Option<CliError>, CliError> {
    let seed = cfg.seed.expect("validated");
    let outcomes = selftest::run_all(seed, cfg.grid.steps);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in &outcomes {
        out.say(format!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail));
    }
    out.say(format!("selftest: {} passed, {failed} failed", outcomes.len() - failed));
    out.json("selftest.json", &selftest::Summary { passed: outcomes.len() - failed, failed, checks: outcomes.clone() })?;
    Ok((failed > 0).then_some(CliError::Selftest { failed, total: outcomes.len() }))
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)?;
    crate::config::parse_config(&text).map_err(|e| match e {
        CliError::Schema(msg) => CliError::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}
