use std::f64::consts::PI;
use std::sync::Arc;

use fieldlab::currents::*;
use fieldlab::dsl::{parse_lagrangian, Poly, Var};
use fieldlab::dynamics::{evolve, fit_order, EvolutionConfig, InitialData, Profile, SpatialGrid};
use fieldlab::lattice::{LatticeGrid, ScalarLatticeField};
use fieldlab::{Solution, Theory};

const KG: &str = "dim 2\nparam m = 1\nL = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2";
const CKG: &str = "dim 2\nfield phi complex\nparam m = 1\nL = d(phi,mu)*d(phistar,^mu) - m^2*phi*phistar";
const PHI4: &str = "dim 2\nparam m = 1\nparam g = 0.5\nL = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2 - g/4*phi^4";
const PHI4_4D: &str = "dim 4\nparam g = 1\nL = 0.5*d(phi,mu)*d(phi,^mu) - g/4*phi^4";
const DISS: &str = "dim 2\nparam m = 1\nL = exp(0.1*x0 + 0.05*x1)*(0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2)";
const STD: &str = "dim 2\nparam s = 2\nparam al = 0.1\nparam c = 0\n\
                   L = 0.5*d(phi,mu)*d(phi,^mu) + 2*al*x0*d(phi,0) - 0.5*s*phi^2 - s*al*x0^2*phi + c";

fn theory(src: &str) -> Arc<Theory> {
    Arc::new(Theory::new(parse_lagrangian(src).unwrap()).unwrap())
}

fn family(kind: FamilyKind) -> PerturbationFamily {
    kind.into()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Jets of an arbitrary field sampled on a 2D grid.
fn sampled(t: &Arc<Theory>, n: usize, f: impl Fn(&[f64]) -> f64) -> Solution {
    let g = LatticeGrid::new(vec![n, n], vec![0.1, 2.0 * PI / n as f64], vec![0.0, 0.0]).unwrap();
    Solution::new(t.clone(), ScalarLatticeField::from_fn(g, f)).unwrap()
}

fn evolved(t: &Arc<Theory>, n: usize, steps: usize, init: Profile) -> Solution {
    let space = SpatialGrid { sites: vec![n], lengths: vec![2.0 * PI], origin: vec![0.0] };
    let cfg = EvolutionConfig { dt: PI / n as f64, steps, courant_check: true, initial: InitialData::uniform(init) };
    Solution::new(t.clone(), evolve(t, &space, &cfg).unwrap()).unwrap()
}

fn wave() -> Profile {
    Profile::PlaneWave { amplitude: 1.0, k: vec![2.0], mass: 1.0 }
}

#[test]
fn identity_family_is_inert() {
    let t = theory(PHI4);
    let f = family(FamilyKind::Identity);
    assert!(f.velocity(&t).unwrap().is_zero());
    assert!(f.dl_depsilon(&t).unwrap().poly.is_zero());
    let j = current_from_psi(&t, &f, &psi::zero(&t), "j").unwrap();
    assert!(j.components.iter().all(Poly::is_zero));
    let sol = evolved(&t, 32, 40, wave());
    let r = nonlocal_constant(&sol, &f, 1, 30, 0.0).unwrap();
    assert!(r.values.iter().all(|v| v.value == 0.0));
    assert!(r.pass);
}

#[test]
fn spacetime_shift_of_a_linear_ramp_is_one() {
    let t = theory(KG);
    let sol = sampled(&t, 8, |x| x[0]);
    let v = family(FamilyKind::SpacetimeShift { a: vec![1.0, 0.0] }).family_velocity(&sol).unwrap();
    assert!(v[0].values().iter().all(|&x| (x - 1.0).abs() < 1e-12));
}

#[test]
fn energy_density_of_a_massless_ramp() {
    let t = theory("dim 2\nL = 0.5*d(phi,mu)*d(phi,^mu)");
    let sol = sampled(&t, 8, |x| x[0]);
    let tt = energy_momentum(&t).unwrap().evaluate(&sol);
    for s in 0..sol.grid().len() {
        assert!((tt.at(0, 0, s) - 0.5).abs() < 1e-12);
    }
}

#[test]
fn shift_current_reduces_to_the_energy_momentum_tensor() {
    let t = theory(PHI4);
    let tt = energy_momentum(&t).unwrap();
    let a = [0.7, -1.3];
    let f = family(FamilyKind::SpacetimeShift { a: a.to_vec() });
    let (j, chk) = total_divergence_current(&t, &f, &psi::lagrangian_along(&t, &a), "j").unwrap();
    assert!(chk.holds && chk.symbolic == 0.0);
    for mu in 0..2 {
        let ta = tt.component(mu, 0).scale(a[0]).add(&tt.component(mu, 1).scale(a[1]));
        assert!(j.components[mu].sub(&ta).max_coefficient() < 1e-15);
    }
}

#[test]
fn energy_momentum_and_k_are_symmetric() {
    for src in [KG, CKG, PHI4, STD] {
        let t = theory(src);
        let mut tensors = vec![k_tensor(&t, None).ok().map(|k| k.tensor)];
        tensors.push(energy_momentum(&t).ok());
        for x in tensors.into_iter().flatten() {
            let up = raise_second(&t, &x);
            let asym = up.component(0, 1).sub(up.component(1, 0));
            assert!(asym.max_coefficient() < 1e-14, "{src}: {}", x.name);
        }
    }
}

#[test]
fn klein_gordon_k_equals_t_with_the_computed_rho() {
    let t = theory(KG);
    let k = k_tensor(&t, None).unwrap();
    assert!((k.rho + 1.0).abs() < 1e-14);
    let tt = energy_momentum(&t).unwrap();
    for mu in 0..2 {
        for nu in 0..2 {
            assert!(k.tensor.component(mu, nu).sub(tt.component(mu, nu)).max_coefficient() < 1e-14);
        }
    }
    // ρ = 1/(2m²) does not satisfy the condition identically.
    assert!(matches!(k_tensor(&t, Some(0.5)), Err(CurrentError::Refused(Refusal::NoConstantRho))));
}

#[test]
fn k_vanishes_on_the_zero_field() {
    let t = theory(PHI4);
    let k = k_tensor(&t, None);
    // φ⁴ has no constant ρ: δL/δφ is cubic while the momentum is linear.
    assert!(matches!(k, Err(CurrentError::Refused(Refusal::NoConstantRho))));
    let t = theory(KG);
    let sol = sampled(&t, 8, |_| 0.0);
    let kf = k_tensor(&t, None).unwrap().tensor.evaluate(&sol);
    assert!(kf.columns.iter().all(|c| c.field.max_abs() == 0.0));
}

#[test]
fn spacetime_dependent_theory_uses_k_only() {
    let t = theory(STD);
    assert!(!t.is_spacetime_independent());
    let k = k_tensor(&t, None).unwrap();
    assert!((k.rho + 0.5).abs() < 1e-14, "{}", k.rho);
    assert!(matches!(energy_momentum(&t), Err(CurrentError::Refused(Refusal::SpacetimeDependent))));
    // 2K^μ_ν = 2∂^μA ∂_νA + δ^μ_ν(σA² − ∂A·∂A) with A = φ + a(x).
    let a = "(phi + 0.1*x0^2)";
    let jets = random_jets(&t, 8, 3);
    for jet in jets {
        let l = t.layout();
        let x0 = jet[l.coord(0)];
        let aa = jet[l.field(0)] + 0.1 * x0 * x0;
        let da = [jet[l.grad(0, 0)] + 0.2 * x0, jet[l.grad(0, 1)]];
        let dada = da[0] * da[0] - da[1] * da[1];
        for mu in 0..2 {
            for nu in 0..2 {
                let up = if mu == 0 { da[0] } else { -da[1] };
                let expect = up * da[nu] + if mu == nu { 0.5 * (2.0 * aa * aa - dada) } else { 0.0 };
                let got = k.tensor.component(mu, nu).eval(&|v| jet[l.slot(v)]).unwrap();
                assert!((got - expect).abs() < 1e-12, "{a} {mu}{nu}: {got} vs {expect}");
            }
        }
    }
}

#[test]
fn scaling_preconditions() {
    let refused = |src: &str| match scaling_currents(&theory(src)) {
        Err(CurrentError::Refused(r)) => r.code(),
        Ok(_) => "accepted",
        Err(e) => panic!("{e}"),
    };
    assert_eq!(refused(KG), "scaling-dimension-zero");
    assert_eq!(refused(PHI4_4D), "accepted");
    assert_eq!(refused("dim 4\nL = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*phi^2 - phi^4"), "wrong-homogeneity-degree");
    assert_eq!(refused("dim 3\nL = 0.5*d(phi,mu)*d(phi,^mu) - phi^6"), "accepted");
    assert_eq!(refused("dim 1\nL = 0.5*d(phi,mu)*d(phi,^mu) - phi^(-2)"), "accepted");
    assert_eq!(refused("dim 4\nL = 0.5*d(phi,mu)*d(phi,^mu)*phi^2 - phi^4"), "not-canonical");
    assert_eq!(refused("dim 4\nL = 0.5*d(phi,mu)*d(phi,^mu)"), "accepted");
}

#[test]
fn scaling_current_matches_the_t_generated_form() {
    let t = theory(PHI4_4D);
    let sc = scaling_currents(&t).unwrap();
    assert_eq!(sc.degree, Some(4.0));
    let f = family(FamilyKind::MixedGeneral {
        f: vec!["x0".into(), "x1".into(), "x2".into(), "x3".into()],
        internal: vec!["phi".into()],
    });
    let tg = current_from_t(&t, &f).unwrap();
    assert_eq!(tg.check.symbolic, 0.0);
    for mu in 0..4 {
        assert!(tg.current.components[mu].sub(&sc.j.components[mu]).max_coefficient() < 1e-14);
    }
    // A generator without the internal part violates the condition.
    let bad = family(FamilyKind::MixedGeneral { f: vec!["x0".into(), "x1".into(), "x2".into(), "x3".into()], internal: vec![] });
    assert!(matches!(current_from_t(&t, &bad), Err(CurrentError::Refused(Refusal::GeneratorCondition(_)))));
}

#[test]
fn t_generated_with_constant_generator_and_theta() {
    let t = theory(PHI4);
    let f = family(FamilyKind::MixedGeneral { f: vec!["0".into(), "0".into()], internal: vec![] });
    let tg = current_from_t(&t, &f).unwrap();
    assert!(tg.current.components.iter().all(Poly::is_zero));
    let f = family(FamilyKind::MixedGeneral { f: vec!["1".into(), "0".into()], internal: vec![] });
    let tg = current_from_t(&t, &f).unwrap();
    let tt = energy_momentum(&t).unwrap();
    assert!(tg.current.components[0].sub(tt.component(0, 0)).max_coefficient() < 1e-15);
    // x-dependent density: only the right ϑ is accepted.
    let t = theory("dim 2\nL = 0.5*d(phi,mu)*d(phi,^mu) + x1");
    let f = family(FamilyKind::MixedGeneral { f: vec!["0".into(), "1".into()], internal: vec![] });
    assert!(matches!(current_from_t_general(&t, &f, None), Err(CurrentError::Refused(Refusal::ThetaInconsistent(1)))));
    assert!(current_from_t_general(&t, &f, Some("x1")).is_ok());
}

#[test]
fn h_is_not_symmetric() {
    let t = theory(PHI4_4D);
    let sc = scaling_currents(&t).unwrap();
    let asym = sc.h.component(0, 1).sub(sc.h.component(1, 0));
    assert!(asym.max_coefficient() > 0.1);
}

#[test]
fn zero_field_has_zero_scaling_currents() {
    let t = theory("dim 3\nL = 0.5*d(phi,mu)*d(phi,^mu) - phi^6");
    let sc = scaling_currents(&t).unwrap();
    let g = LatticeGrid::new(vec![4, 4, 4], vec![0.1; 3], vec![0.0; 3]).unwrap();
    let sol = Solution::new(t.clone(), ScalarLatticeField::zeros(g, 1)).unwrap();
    assert_eq!(sc.j.evaluate(&sol).field.max_abs(), 0.0);
    assert!(sc.h.evaluate(&sol).columns.iter().all(|c| c.field.max_abs() == 0.0));
    let d = distance_from_origin(&sol, &sc).unwrap();
    assert_eq!(d.values.max_abs(), 0.0);
}

#[test]
fn distance_identity_on_arbitrary_data() {
    // The identity is algebraic, so any field works, solution or not.
    let t = theory("dim 3\nparam g = 2\nL = 0.5*d(phi,mu)*d(phi,^mu) - g*phi^6");
    let sc = scaling_currents(&t).unwrap();
    let g = LatticeGrid::new(vec![6, 8, 8], vec![0.2, 0.3, 0.3], vec![0.5, -1.0, -1.0]).unwrap();
    let f = ScalarLatticeField::from_fn(g, |x| (x[0] * 1.3 + x[1]).sin() * (x[2] - 0.2).cos() * 0.8);
    let sol = Solution::new(t.clone(), f).unwrap();
    let d = distance_from_origin(&sol, &sc).unwrap();
    for (r, p) in d.values.values().iter().zip(sol.block().values()) {
        assert!((r - p.abs()).abs() <= 1e-11 * (1.0 + p.abs()), "{r} vs {p}");
    }
}

#[test]
fn phase_current_is_the_u1_charge() {
    let t = theory(CKG);
    let f = family(FamilyKind::Phase);
    let dl = f.dl_depsilon(&t).unwrap();
    assert!(dl.poly.is_zero());
    // Analytic substitution: φ = e^{i(ωt − kx)} gives j⁰ = 2ω.
    let (w, k) = (5f64.sqrt(), 2.0);
    let g = LatticeGrid::new(vec![8, 16], vec![0.05, 2.0 * PI / 16.0], vec![0.0, 0.0]).unwrap();
    let l = t.layout();
    let sol = Solution::new(t.clone(), ScalarLatticeField::zeros(g.clone(), 2)).unwrap();
    let (res, j) = finite_invariance_current(&sol, &f).unwrap();
    assert!(res.symbolic && res.xi == 0.0);
    let c = j.compile(&t);
    let mut scratch = fieldlab::theory::Scratch::default();
    for s in 0..g.len() {
        let (x0, x1) = (g.coordinate(s, 0), g.coordinate(s, 1));
        let ph = w * x0 - k * x1;
        let mut jet = vec![0.0; l.len()];
        jet[l.coord(0)] = x0;
        jet[l.coord(1)] = x1;
        jet[l.field(0)] = ph.cos();
        jet[l.field(1)] = ph.sin();
        jet[l.grad(0, 0)] = -w * ph.sin();
        jet[l.grad(1, 0)] = w * ph.cos();
        jet[l.grad(0, 1)] = k * ph.sin();
        jet[l.grad(1, 1)] = -k * ph.cos();
        assert!((c[0].eval(&t, &jet, &mut scratch) - 2.0 * w).abs() < 1e-12);
        assert!((c[1].eval(&t, &jet, &mut scratch) - 2.0 * k).abs() < 1e-12);
    }
    assert!(matches!(family(FamilyKind::Phase).velocity(&theory(KG)), Err(Refusal::NeedsComplexField)));
}

#[test]
fn dissipative_weight_and_preconditions() {
    let t = theory(DISS);
    let (h, _) = exponential_weight(&t).unwrap();
    assert!((h[0] - 0.1).abs() < 1e-15 && (h[1] - 0.05).abs() < 1e-15);
    let dc = dissipative_current(&t).unwrap();
    assert!((dc.c_dot_h - 2.0).abs() < 1e-12);
    assert!(dc.condition.holds);
    // The componentwise reciprocal gives c·h = 2(2 − D) = 0 here.
    let cw = dissipative_current_with(&t, DissipativeVariant::Componentwise).unwrap();
    assert!(cw.c_dot_h.abs() < 1e-12);
    assert!(!cw.condition.holds);
    let zero = theory("dim 2\nL = exp(0.1*x0)*(0.5*d(phi,mu)*d(phi,^mu) - 0.5*phi^2)");
    assert!(matches!(
        dissipative_current_with(&zero, DissipativeVariant::Componentwise),
        Err(CurrentError::Refused(Refusal::ZeroWeightComponent(1)))
    ));
    assert!(dissipative_current(&zero).is_ok());
    let null = theory("dim 2\nL = exp(0.1*x0 + 0.1*x1)*(0.5*d(phi,mu)*d(phi,^mu) - 0.5*phi^2)");
    assert!(matches!(dissipative_current(&null), Err(CurrentError::Refused(Refusal::NullWeight))));
    let quartic = theory("dim 2\nL = exp(0.1*x0)*(0.5*d(phi,mu)*d(phi,^mu) - phi^4)");
    assert!(matches!(dissipative_current(&quartic), Err(CurrentError::Refused(Refusal::WrongDegree { .. }))));
    assert!(matches!(dissipative_current(&theory(KG)), Err(CurrentError::Refused(Refusal::NotExponentiallyWeighted))));
}

#[test]
fn shifts_of_a_damped_theory_are_not_finitely_invariant() {
    let t = theory(DISS);
    let sol = sampled(&t, 8, |x| (x[1]).sin() * (0.3 * x[0]).cos());
    let f = family(FamilyKind::SpacetimeShift { a: vec![1.0, 0.0] });
    assert!(matches!(
        finite_invariance_current(&sol, &f),
        Err(CurrentError::Refused(Refusal::NotFinitelyInvariant { .. }))
    ));
}

#[test]
fn total_divergence_residual_of_the_identity_is_zero() {
    let t = theory(PHI4);
    let sol = sampled(&t, 8, |x| x[1].sin());
    let r = total_divergence_residual(&sol, &family(FamilyKind::Identity), &psi::zero(&t)).unwrap();
    assert_eq!(r.max_abs(), 0.0);
}

#[test]
fn zero_current_verifies_trivially() {
    let t = theory(KG);
    let sol = sampled(&t, 8, |x| x[1].cos());
    let e = verify_current(&sol, &CurrentExpr::zero("0", "none", 2));
    assert_eq!((e.residual_l2, e.residual_linf, e.drift), (0.0, 0.0, 0.0));
    assert!(e.drift_absolute);
}

fn kg_divergence(n: usize) -> (f64, f64) {
    let t = theory(KG);
    let sol = evolved(&t, n, 4 * n, wave());
    let tt = energy_momentum(&t).unwrap();
    let e = verify_current(&sol, tt.column(0));
    (e.residual_l2, e.drift)
}

#[test]
fn energy_residual_converges_at_second_order() {
    let ns = [32, 64, 128];
    let r: Vec<(f64, f64)> = ns.iter().map(|&n| kg_divergence(n)).collect();
    let h: Vec<f64> = ns.iter().map(|&n| 2.0 * PI / n as f64).collect();
    let fit = fit_order(&h, &r.iter().map(|x| x.0).collect::<Vec<_>>()).unwrap();
    assert!((1.8..=2.2).contains(&fit.order), "{fit:?}");
    assert!(r[2].1 < 1e-3, "{r:?}");
}

#[test]
fn shift_residual_converges_under_refinement() {
    let t = theory(PHI4);
    let mut l2 = Vec::new();
    for n in [32, 64, 128] {
        let sol = evolved(&t, n, 2 * n, Profile::RandomSmooth { seed: 3, cutoff: 3, amplitude: 0.5 });
        let a = [1.0, 0.5];
        let r = total_divergence_residual(
            &sol,
            &family(FamilyKind::SpacetimeShift { a: a.to_vec() }),
            &psi::lagrangian_along(&t, &a),
        )
        .unwrap();
        let m = sol.grid().slice_len();
        let k = sol.grid().time_slices();
        l2.push(max_abs(&r.values()[2 * m..(k - 2) * m]));
    }
    assert!(l2[0] / l2[1] > 3.0 && l2[1] / l2[2] > 3.0, "{l2:?}");
}

#[test]
fn family_velocities_follow_their_definitions() {
    let t = theory(PHI4_4D);
    let v = family(FamilyKind::Scaling { delta: None }).velocity(&t).unwrap();
    // Δ₄ = 1
    let mut expect = Poly::var(Var::Field(0));
    for mu in 0..4 {
        expect = expect.add(&Poly::var(Var::Coord(mu)).mul(&Poly::var(Var::Grad(0, mu))));
    }
    assert_eq!(v.polys[0], expect);
    let v = family(FamilyKind::FieldShiftConst).velocity(&t).unwrap();
    assert_eq!(v.polys[0], Poly::constant(-1.0));
    let v = family(FamilyKind::FieldScale).velocity(&t).unwrap();
    assert_eq!(v.polys[0], Poly::var(Var::Field(0)));
    let e = family(FamilyKind::SpacetimeShift { a: vec![1.0] }).velocity(&t).unwrap_err();
    assert_eq!(e.code(), "family-parameters");
}

#[test]
fn non_periodic_density_balances_against_seam_flux() {
    let t = theory(DISS);
    let d = dissipative_current(&t).unwrap();
    let drift = |n: usize| verify_current(&evolved(&t, n, 4 * n, wave()), &d.current).drift;
    let (a, b) = (drift(32), drift(64));
    assert!(b < 2e-3 && a / b > 3.5, "drift {a} -> {b}");
}

#[test]
fn dilation_charge_balance_converges_at_second_order() {
    // A Gaussian at rest: ∫J⁰ starts at zero and the density is not periodic.
    let t = theory("dim 3\nparam g = 1\nL = 0.5*d(phi,mu)*d(phi,^mu) - g*phi^6");
    let sc = scaling_currents(&t).unwrap();
    let drift = |n: usize| {
        let space = SpatialGrid { sites: vec![n, n], lengths: vec![2.0 * PI; 2], origin: vec![0.0; 2] };
        let init = Profile::Gaussian { center: vec![PI, PI], width: 1.0, amplitude: 0.5 };
        let h = 2.0 * PI / n as f64;
        let cfg = EvolutionConfig { dt: h / 4.0, steps: 4 * n, courant_check: true, initial: InitialData::uniform(init) };
        let sol = Solution::new(t.clone(), evolve(&t, &space, &cfg).unwrap()).unwrap();
        verify_current(&sol, &sc.j).drift
    };
    let (a, b) = (drift(16), drift(32));
    assert!((a / b).log2() > 1.8, "drift {a} -> {b}");
}
