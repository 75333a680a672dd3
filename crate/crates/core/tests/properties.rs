use std::f64::consts::TAU;

use num_complex::Complex64;
use offdiag_core::evolution::{Generator, GeneratorSchedule, Integrator, Segment, TimeGrid, UnitaryPath};
use offdiag_core::interferometer::{chi_grid, conditional_circuit_readout, fit_interferogram, interferogram, Arms, Purification};
use offdiag_core::linalg::{cyclic_shift_unitary, max_abs_diff, phase_functional, unitarity_residual};
use offdiag_core::phases::{GaugeSpec, IndexTuple, PhaseEngine, PhaseTarget, StateFamily};
use offdiag_core::pseudopure::{
    gamma1_closed, gamma1_closed_partner, gamma2_argument, gamma2_closed, l1_nodal_eta, l1_nodal_residual,
    l2_nodal_eta_squared, PseudopureParams,
};
use offdiag_core::random::{random_density, random_hermitian, random_su2_generator, random_unitary};
use offdiag_core::{OrthonormalBasis, SpectralDensity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEPS: usize = 400;

fn schedule(rng: &mut ChaCha8Rng, dim: usize) -> UnitaryPath {
    let mut segments = Vec::new();
    let mut t = 0.0;
    for _ in 0..rng.gen_range(1..=2) {
        let len = rng.gen_range(0.3..1.0);
        let generator = if dim == 2 {
            Generator::Polynomial(vec![random_su2_generator(rng, 3.0), random_su2_generator(rng, 3.0)])
        } else {
            Generator::Polynomial(vec![random_hermitian(rng, dim, 1.5), random_hermitian(rng, dim, 1.5)])
        };
        segments.push(Segment { start: t, end: t + len, generator });
        t += len;
    }
    GeneratorSchedule::new(segments).unwrap().into()
}

fn engine(path: &UnitaryPath) -> PhaseEngine {
    PhaseEngine::with_grid(TimeGrid::uniform(path.duration(), STEPS).unwrap())
}

fn nondegenerate_family(rng: &mut ChaCha8Rng, dim: usize) -> StateFamily {
    let basis = OrthonormalBasis::from_unitary(&random_unitary(rng, dim)).unwrap();
    let weights: Vec<f64> = (0..dim).map(|k| k as f64 + 1.0 + rng.gen_range(0.0..0.5)).collect();
    let total: f64 = weights.iter().sum();
    let rho = SpectralDensity::diagonal(&weights.iter().map(|w| w / total).collect::<Vec<_>>(), &basis, 1e-9).unwrap();
    StateFamily::new(rho, basis).unwrap()
}

fn params() -> impl Strategy<Value = PseudopureParams> {
    (2usize..=8, 0.01f64..=1.0, 0.0f64..=1.0, -TAU..2.0 * TAU)
        .prop_map(|(n, e, eta, om)| PseudopureParams::new(n, e, eta, om).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_stays_unitary(seed in any::<u64>(), dim in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = schedule(&mut rng, dim);
        let integrator = Integrator::new(TimeGrid::uniform(path.duration(), STEPS).unwrap());
        for u in integrator.evolve(&path).unwrap() {
            prop_assert!(unitarity_residual(&u) < 1e-10);
        }
        let rho = random_density(&mut rng, dim).completed();
        let family = integrator.parallel_family(&path, &rho).unwrap();
        prop_assert!(unitarity_residual(&family.transporter) < 1e-10);
        prop_assert!(unitarity_residual(&family.supplementary) < 1e-10);
    }

    #[test]
    fn su2_pairs_always_shift_by_pi(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = schedule(&mut rng, 2);
        let eng = engine(&path);
        let u = eng.integrator().evolve(&path).unwrap().pop().unwrap();
        prop_assume!(u[(0, 1)].norm() > 1e-4);
        let r = eng.pure(&path, &OrthonormalBasis::computational(2), &IndexTuple::new(vec![1, 2], 2).unwrap()).unwrap().result;
        prop_assert!(r.defined);
        prop_assert!((r.phase + 1.0).norm() < 1e-9, "{}", r.phase);
    }

    #[test]
    fn cyclic_rotation_is_exact(seed in any::<u64>(), dim in 3usize..=4, k in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = schedule(&mut rng, dim);
        let eng = engine(&path);
        let family = nondegenerate_family(&mut rng, dim);
        let idx = IndexTuple::new(vec![1, 2, dim], dim).unwrap();
        let base = eng.mixed_nondegenerate(&path, &family, &idx).unwrap();
        prop_assert_eq!(base.clone(), eng.mixed_nondegenerate(&path, &family, &idx.rotated(k)).unwrap());
        prop_assert_eq!(
            eng.pure(&path, family.basis(), &idx).unwrap().result,
            eng.pure(&path, family.basis(), &idx.rotated(k)).unwrap().result
        );
    }

    #[test]
    fn reductions_agree(seed in any::<u64>(), dim in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = schedule(&mut rng, dim);
        let eng = engine(&path);
        let family = nondegenerate_family(&mut rng, dim);
        let idx = IndexTuple::new(vec![1, dim], dim).unwrap();
        let nondeg = eng.mixed_nondegenerate(&path, &family, &idx).unwrap();
        let deg = eng.mixed_degenerate(&path, &family, &idx).unwrap();
        prop_assert!((nondeg.raw_trace - deg.raw_trace).norm() < 1e-10);
        let rank1 = StateFamily::new(SpectralDensity::pure(family.basis().vector(0)).unwrap(), family.basis().clone()).unwrap();
        let mixed = eng.mixed_degenerate(&path, &rank1, &idx).unwrap();
        let pure = eng.pure(&path, family.basis(), &idx).unwrap().result;
        prop_assert!(mixed.distance(&pure) < 1e-9, "{} vs {}", mixed.phase, pure.phase);
    }

    #[test]
    fn gauge_changes_leave_phases_fixed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = schedule(&mut rng, 3);
        let eng = engine(&path);
        let family = nondegenerate_family(&mut rng, 3);
        let idx = IndexTuple::new(vec![1, 3], 3).unwrap();
        let report = eng
            .gauge_invariance_report(&path, &PhaseTarget::Nondegenerate(family), &idx, 2, seed, GaugeSpec::default())
            .unwrap();
        prop_assume!(report.excluded == 0);
        prop_assert!(report.max_deviation < 1e-9, "{}", report.max_deviation);
    }

    #[test]
    fn lowering_the_nodal_tolerance_never_loses_definition(re in -1.0f64..1.0, im in -1.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let z = Complex64::new(re, im);
        let (lo, hi) = (a.min(b), a.max(b));
        let (r_lo, r_hi) = (phase_functional(z, lo), phase_functional(z, hi));
        prop_assert!(!r_hi.defined || r_lo.defined);
        if r_hi.defined {
            prop_assert_eq!(r_lo.phase, r_hi.phase);
        }
    }

    #[test]
    fn partner_phase_is_the_conjugate(p in params()) {
        let (a, b) = (gamma1_closed(&p, 1e-10), gamma1_closed_partner(&p, 1e-10));
        prop_assert_eq!(a.defined, b.defined);
        prop_assert!((a.phase.conj() - b.phase).norm() < 1e-12);
    }

    #[test]
    fn order_two_phase_is_a_sign(p in params()) {
        let r = gamma2_closed(&p, 1e-10);
        if r.defined {
            prop_assert_eq!(r.phase, Complex64::new(gamma2_argument(&p).signum(), 0.0));
        }
    }

    #[test]
    fn nodal_visibilities_zero_the_arguments(n in 2usize..=12, e in 0.01f64..=1.0, omega in 0.0f64..TAU) {
        if n >= 3 {
            if let Some(eta) = l1_nodal_eta(n, e).unwrap() {
                let p = PseudopureParams::new(n, e, eta, TAU).unwrap();
                prop_assert!(l1_nodal_residual(&p) < 1e-12);
            }
        }
        if let Some(eta_sq) = l2_nodal_eta_squared(n, e, omega).unwrap() {
            let p = PseudopureParams::new(n, e, eta_sq.sqrt(), omega).unwrap();
            prop_assert!(gamma2_argument(&p).abs() < 1e-12, "{}", gamma2_argument(&p));
        }
    }

    #[test]
    fn purification_recovers_the_density(seed in any::<u64>(), dim in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, dim);
        let state = Purification::of_density(&rho).unwrap();
        prop_assert!(max_abs_diff(&state.reduced_system(), &rho.matrix()) < 1e-10);
    }

    #[test]
    fn circuit_and_direct_fits_agree(seed in any::<u64>(), dim in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, dim);
        let basis = OrthonormalBasis::computational(dim);
        let arms = Arms::for_pair(&cyclic_shift_unitary(&basis).unwrap(), &random_unitary(&mut rng, dim), 1, dim).unwrap();
        let state = Purification::of_density(&rho).unwrap();
        let chis = chi_grid(32);
        let direct = fit_interferogram(&interferogram(&state, &arms, &chis).unwrap()).unwrap();
        let circuit = fit_interferogram(&conditional_circuit_readout(&state, &arms, &chis).unwrap()).unwrap();
        prop_assert!((direct.visibility - circuit.visibility).abs() < 1e-8);
        if direct.visibility > 1e-6 {
            let (a, b) = (direct.shift.unwrap(), circuit.shift.unwrap());
            let g = (a - b).rem_euclid(TAU);
            prop_assert!(g.min(TAU - g) < 1e-8);
        }
    }
}
