use std::f64::consts::PI;
use std::sync::Arc;

use fieldlab::dsl::parse_lagrangian;
use fieldlab::dynamics::{
    continue_run, el_residual, evolve, exact_plane_wave, fit_order, run, EvolutionConfig, InitialData, Profile,
    SpatialGrid, Stepper,
};
use fieldlab::lattice::LatticeGrid;
use fieldlab::Theory;

fn theory(src: &str) -> Arc<Theory> {
    Arc::new(Theory::new(parse_lagrangian(src).unwrap()).unwrap())
}

const KG: &str = "dim 2\nparam m = 1\nL = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2";
const CKG: &str = "dim 2\nfield phi complex\nparam m = 1\nL = d(phi,mu)*d(phistar,^mu) - m^2*phi*phistar";

fn plane_wave_error(t: &Arc<Theory>, n: usize, steps: usize, complex: bool) -> f64 {
    let space = SpatialGrid { sites: vec![n], lengths: vec![2.0 * PI], origin: vec![0.0] };
    let h = 2.0 * PI / n as f64;
    let cfg = EvolutionConfig {
        dt: h / 2.0,
        steps,
        courant_check: true,
        initial: InitialData::uniform(Profile::PlaneWave { amplitude: 1.0, k: vec![2.0], mass: 1.0 }),
    };
    let block = evolve(t, &space, &cfg).unwrap();
    let exact = exact_plane_wave(1.0, &[2.0], 1.0, block.grid(), complex).unwrap();
    block.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn klein_gordon_plane_wave_converges_at_second_order() {
    let t = theory(KG);
    let ns = [64, 128, 256];
    let errs: Vec<f64> = ns.iter().map(|&n| plane_wave_error(&t, n, 1000 * n / 256, false)).collect();
    let hs: Vec<f64> = ns.iter().map(|&n| 2.0 * PI / n as f64).collect();
    let fit = fit_order(&hs, &errs).unwrap();
    eprintln!("{fit:?}");
    assert!(fit.monotone);
    assert!((1.8..=2.2).contains(&fit.order), "{}", fit.order);
    assert!(errs[2] <= 5.0 * hs[2] * hs[2] * 12.0);
}

#[test]
fn complex_plane_wave_tracks_the_rotation() {
    let t = theory(CKG);
    let ns = [64, 128, 256];
    let errs: Vec<f64> = ns.iter().map(|&n| plane_wave_error(&t, n, 500 * n / 256, true)).collect();
    let hs: Vec<f64> = ns.iter().map(|&n| 2.0 * PI / n as f64).collect();
    let fit = fit_order(&hs, &errs).unwrap();
    eprintln!("{fit:?}");
    assert!((1.8..=2.2).contains(&fit.order), "{}", fit.order);
}

const PHI4: &str = "dim 2\nparam m = 1\nparam g = 1\nL = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2 - g/24*phi^4";

fn random_start(t: &Arc<Theory>, n: usize, seed: u64) -> (LatticeGrid, Vec<f64>, Vec<f64>) {
    let space = SpatialGrid { sites: vec![n], lengths: vec![2.0 * PI], origin: vec![0.0] };
    let init = InitialData::uniform(Profile::RandomSmooth { seed, cutoff: 4, amplitude: 0.8 });
    let (phi, pi) = fieldlab::dynamics::cauchy_slices(t, &space, &init).unwrap();
    let grid = LatticeGrid::spacetime(400, PI / n as f64, 0.0, &[n], &[2.0 * PI], &[0.0]).unwrap();
    (grid, phi, pi)
}

#[test]
fn continuing_a_run_matches_one_long_run() {
    let t = theory(PHI4);
    let stepper = Stepper::new(t.clone()).unwrap();
    let (grid, phi, pi) = random_start(&t, 48, 11);
    let long = run(&stepper, &grid, phi.clone(), pi.clone(), 400).unwrap();
    let mut short = run(&stepper, &grid, phi, pi, 150).unwrap();
    continue_run(&stepper, &grid, &mut short, 400).unwrap();
    assert_eq!(short, long);
}

#[test]
fn leapfrog_solves_the_lattice_field_equation() {
    // The residual uses the stepper's own stencils, so inside the block it
    // is rounding, not truncation.
    let t = theory(PHI4);
    let stepper = Stepper::new(t.clone()).unwrap();
    assert!(stepper.is_affine());
    let (grid, phi, pi) = random_start(&t, 48, 5);
    let slices = run(&stepper, &grid, phi, pi, 200).unwrap();
    let block = fieldlab::dynamics::assemble(grid, 1, &slices).unwrap();
    let r = el_residual(&t, &block).unwrap();
    let m = block.grid().slice_len();
    let n = block.grid().time_slices();
    let worst = r.values()[m..(n - 1) * m].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn random_data_is_reproducible_and_seed_dependent() {
    let t = theory(PHI4);
    let (_, a, _) = random_start(&t, 32, 1);
    let (_, b, _) = random_start(&t, 32, 1);
    let (_, c, _) = random_start(&t, 32, 2);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn steps_beyond_the_courant_bound_are_refused() {
    let t = theory(KG);
    let space = SpatialGrid { sites: vec![32], lengths: vec![2.0 * PI], origin: vec![0.0] };
    let h = 2.0 * PI / 32.0;
    let cfg = EvolutionConfig {
        dt: 0.6 * h,
        steps: 10,
        courant_check: true,
        initial: InitialData::uniform(Profile::PlaneWave { amplitude: 1.0, k: vec![1.0], mass: 1.0 }),
    };
    assert!(matches!(evolve(&t, &space, &cfg), Err(fieldlab::dynamics::DynamicsError::Courant { .. })));
}
