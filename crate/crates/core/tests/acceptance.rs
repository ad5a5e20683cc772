//! One line per acceptance criterion. Tolerances are fixed here and nowhere
//! else; a criterion that misses its bound prints FAIL and the run exits 1.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use std::time::{Duration, Instant};

use fieldlab::cli::scenario::preset;
use fieldlab::currents::*;
use fieldlab::dsl::parse_lagrangian;
use fieldlab::dynamics::{evolve, fit_order, EvolutionConfig, InitialData, Profile, SpatialGrid};
use fieldlab::lattice::ops::{divergence, surface_flux, volume_integral};
use fieldlab::lattice::{LatticeGrid, SlabRegion, VectorLatticeField};
use fieldlab::theory::Scratch;
use fieldlab::{Solution, Theory};

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: impl Into<String>) -> Line {
    Line { pass, detail: detail.into() }
}

fn theory(src: &str) -> Arc<Theory> {
    Arc::new(Theory::new(parse_lagrangian(src).expect("source parses")).expect("theory builds"))
}

fn preset_theory(id: &str) -> Arc<Theory> {
    theory(preset(id).expect("known preset"))
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

/// Evolves on a torus of length 2π per axis.
fn run(t: &Arc<Theory>, n: usize, dims: usize, dt: f64, steps: usize, init: Profile) -> Solution {
    let space = SpatialGrid::cube(dims, n, TAU);
    let cfg = EvolutionConfig { dt, steps, courant_check: true, initial: InitialData::uniform(init) };
    Solution::new(t.clone(), evolve(t, &space, &cfg).expect("evolution succeeds")).expect("block fits theory")
}

fn plane_wave(k: f64, mass: f64) -> Profile {
    Profile::PlaneWave { amplitude: 1.0, k: vec![k], mass }
}

/// 1+1D refinement with `dt = h/2` over the time span of `base_steps` at 256 sites.
const RESOLUTIONS: [usize; 3] = [64, 128, 256];
fn refined(t: &Arc<Theory>, n: usize, base_steps: usize, init: Profile) -> Solution {
    run(t, n, 1, TAU / n as f64 / 2.0, base_steps * n / 256, init)
}

fn spacings(ns: &[usize]) -> Vec<f64> {
    ns.iter().map(|&n| TAU / n as f64).collect()
}

fn order(ns: &[usize], errs: &[f64]) -> f64 {
    fit_order(&spacings(ns), errs).map_or(f64::NAN, |r| r.order)
}

// ---------------------------------------------------------------------------

/// `n` time steps over `[0, lt]` plus one guard slice at each end, so the
/// slab covers a fixed span with centred time differences only. The defect
/// is then even in the spacing.
fn gauss_defect(n: usize, spatial: usize, lt: f64) -> f64 {
    let ht = lt / n as f64;
    let mut shape = vec![n + 3];
    shape.extend(std::iter::repeat_n(n, spatial));
    let mut spacing = vec![ht];
    spacing.extend(std::iter::repeat_n(TAU / n as f64, spatial));
    let mut origin = vec![-ht];
    origin.extend(std::iter::repeat_n(0.0, spatial));
    let g = LatticeGrid::new(shape, spacing, origin).unwrap();
    let j = VectorLatticeField::from_fn(g, |x, mu| {
        let s: f64 = x[1..].iter().map(|v| v.sin()).sum();
        match mu {
            0 => (0.8 * x[0]).exp() * (1.0 + s),
            m => (0.7 * x[0]).cos() * (x[m] + 0.3 * m as f64).cos().powi(2),
        }
    });
    let slab = SlabRegion::new(1, n + 1);
    (surface_flux(&j, slab).unwrap() - volume_integral(&divergence(&j), slab).unwrap()).abs()
}

fn c1_gauss() -> Line {
    let e2: Vec<f64> = RESOLUTIONS.iter().map(|&n| gauss_defect(n, 1, 2.0)).collect();
    let p2 = order(&RESOLUTIONS, &e2);
    let n4 = [8, 16, 32];
    let e4: Vec<f64> = n4.iter().map(|&n| gauss_defect(n, 3, 2.0)).collect();
    let p4 = order(&n4, &e4);
    line(p2 >= 2.0 && p4 >= 2.0, format!("1+1D order {p2:.5} (defect {:.2e} at 256), 3+1D order {p4:.5}", e2[2]))
}

// ---------------------------------------------------------------------------

const KG_STEPS: usize = 2000;

fn kg_block(n: usize) -> Solution {
    refined(&preset_theory("klein-gordon"), n, KG_STEPS, plane_wave(1.0, 1.0))
}

fn c2_energy(block: &Solution) -> Line {
    let t = block.theory();
    let tt = energy_momentum(t).unwrap();
    let drift = verify_current(block, tt.column(0)).drift;
    let mut res: Vec<f64> = RESOLUTIONS[..2]
        .iter()
        .map(|&n| verify_current(&kg_block(n), tt.column(0)).residual_l2)
        .collect();
    res.push(verify_current(block, tt.column(0)).residual_l2);
    let p = order(&RESOLUTIONS, &res);
    line(drift <= 1e-4 && within(p, 1.8, 2.2), format!("drift {drift:.2e}, divergence order {p:.3}"))
}

fn c3_degeneracy(block: &Solution) -> Line {
    let t = block.theory();
    let k = k_tensor(t, None).unwrap();
    let kf = k.tensor.evaluate(block);
    let tf = energy_momentum(t).unwrap().evaluate(block);
    let (mut kt, mut tt2, mut tmax) = (0.0, 0.0, 0.0f64);
    let d = t.dim();
    for s in 0..block.grid().len() {
        for mu in 0..d {
            for nu in 0..d {
                let (a, b) = (kf.at(mu, nu, s), tf.at(mu, nu, s));
                kt += a * b;
                tt2 += b * b;
                tmax = tmax.max(b.abs());
            }
        }
    }
    let kappa = kt / tt2;
    let mut err = 0.0f64;
    for s in 0..block.grid().len() {
        for mu in 0..d {
            for nu in 0..d {
                err = err.max((kf.at(mu, nu, s) - kappa * tf.at(mu, nu, s)).abs());
            }
        }
    }
    let stated = 1.0 / 2.0;
    line(
        err <= 1e-10 * tmax,
        format!("kappa {kappa:.15}, max|K - kappa T|/max|T| {:.2e}, rho computed {:.15}, rho stated 1/(2m^2) = {stated}", err / tmax, k.rho),
    )
}

// ---------------------------------------------------------------------------

/// Massless φ⁴ in 3+1D, `8n` steps over a fixed span with `dt = h/8`.
fn scaling_block(n: usize) -> Solution {
    let t = preset_theory("phi4-massless-4d");
    let span = TAU;
    // Six sites per axis resolve only a broad pulse.
    let init = Profile::Gaussian { center: vec![PI; 3], width: 3.5, amplitude: 1.0 };
    run(&t, n, 3, span / (8 * n) as f64, 8 * n, init)
}

fn c4_scaling(ns: &[usize; 3], blocks: &[Solution]) -> Line {
    let t = blocks[0].theory();
    let sc = scaling_currents(t).unwrap();
    let h: Vec<f64> = ns.iter().map(|&n| TAU / n as f64).collect();
    let fit = |c: &CurrentExpr| {
        let e: Vec<f64> = blocks.iter().map(|b| verify_current(b, c).residual_l2).collect();
        fit_order(&h, &e).map_or(f64::NAN, |r| r.order)
    };
    let mut orders = vec![("J".to_string(), fit(&sc.j))];
    for nu in 0..4 {
        orders.push((format!("H[{nu}]"), fit(sc.h.column(nu))));
    }
    let pass = orders.iter().all(|(_, p)| within(*p, 1.7, 2.3));
    let text = orders.iter().map(|(n, p)| format!("{n} {p:.3}")).collect::<Vec<_>>().join(", ");
    line(pass, format!("orders {text}"))
}

fn c5_distance(block: &Solution) -> Line {
    let sc = scaling_currents(block.theory()).unwrap();
    let d = distance_from_origin(block, &sc).unwrap();
    let worst = d
        .values
        .values()
        .iter()
        .zip(block.block().values())
        .map(|(r, p)| (r - p.abs()).abs() / (1.0 + p.abs()))
        .fold(0.0, f64::max);
    line(worst <= 1e-11, format!("max |r - |phi|| / (1 + |phi|) = {worst:.2e} on {} sites", block.grid().len()))
}

// ---------------------------------------------------------------------------

fn phase_current(sol: &Solution) -> (FiniteInvarianceResult, CurrentExpr) {
    finite_invariance_current(sol, &FamilyKind::Phase.into()).unwrap()
}

fn c6_u1() -> Line {
    let t = preset_theory("complex-kg");
    let k = 2.0;
    let omega = (k * k + 1.0f64).sqrt();
    let (mut e0, mut e1) = (Vec::new(), Vec::new());
    let mut drift = f64::NAN;
    for &n in &RESOLUTIONS {
        let sol = refined(&t, n, KG_STEPS, plane_wave(k, 1.0));
        let (_, j) = phase_current(&sol);
        if n == 256 {
            drift = verify_current(&sol, &j).drift;
        }
        let jf = j.evaluate(&sol);
        let m = sol.grid().slice_len();
        let nt = sol.grid().time_slices();
        let err = |mu: usize, want: f64| {
            jf.field.component(mu)[2 * m..(nt - 2) * m].iter().map(|v| (v - want).abs()).fold(0.0, f64::max)
        };
        e0.push(err(0, 2.0 * omega));
        e1.push(err(1, 2.0 * k));
    }
    // Leapfrog conserves Im(φₙ*φₙ₊₁) exactly and the start sets it to ω·dt,
    // so j⁰ can sit at rounding on every grid; only then is its order moot.
    let exact = e0.iter().all(|e| *e <= 1e-12 * 2.0 * omega);
    let p0 = order(&RESOLUTIONS, &e0);
    let p1 = order(&RESOLUTIONS, &e1);
    let j0_ok = exact || within(p0, 1.8, 2.2);
    line(
        drift <= 1e-4 && j0_ok,
        format!(
            "drift {drift:.2e}; max|j0 - 2 omega| {:.2e}, {:.2e}, {:.2e} ({}); j1 - 2k order {p1:.3}",
            e0[0],
            e0[1],
            e0[2],
            if exact { "exact to rounding".to_string() } else { format!("order {p0:.3}") }
        ),
    )
}

// ---------------------------------------------------------------------------

/// `φ̈ + hφ̇ + m²φ = 0` by classical RK4.
fn damped_oscillator(h: f64, m: f64, y0: [f64; 2], dt: f64, steps: usize) -> Vec<[f64; 2]> {
    let f = |y: [f64; 2]| [y[1], -h * y[1] - m * m * y[0]];
    let mut out = vec![y0];
    let mut y = y0;
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]]);
        let k3 = f([y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]]);
        let k4 = f([y[0] + dt * k3[0], y[1] + dt * k3[1]]);
        for i in 0..2 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(y);
    }
    out
}

fn c7_dissipative() -> Line {
    let t = preset_theory("dissipative-kg");
    let dc = dissipative_current(&t).unwrap();
    let res: Vec<f64> = RESOLUTIONS
        .iter()
        .map(|&n| verify_current(&refined(&t, n, KG_STEPS, plane_wave(1.0, 1.0)), &dc.current).residual_l2)
        .collect();
    let p = order(&RESOLUTIONS, &res);

    // The same construction in D = 1 is a damped oscillator; its current is a
    // first integral, checked along an independent integration.
    let (h, m) = (0.1, 1.0);
    let t1 = theory(&format!("dim 1\nparam h = {h}\nparam m = {m}\nL = exp(h*x0)*(0.5*d(phi,0)^2 - 0.5*m^2*phi^2)"));
    let j = dissipative_current(&t1).unwrap().current.compile(&t1);
    let l = t1.layout();
    let dt = 1e-3;
    let traj = damped_oscillator(h, m, [1.0, 0.3], dt, 10_000);
    let mut scratch = Scratch::default();
    let mut jet = vec![0.0; l.len()];
    let values: Vec<f64> = traj
        .iter()
        .enumerate()
        .map(|(i, y)| {
            jet[l.coord(0)] = i as f64 * dt;
            jet[l.field(0)] = y[0];
            jet[l.grad(0, 0)] = y[1];
            j[0].eval(&t1, &jet, &mut scratch)
        })
        .collect();
    let i0 = values[0];
    let ode = values.iter().map(|v| (v - i0).abs()).fold(0.0, f64::max) / i0.abs().max(1.0);
    line(
        within(p, 1.8, 2.2) && ode <= 1e-8,
        format!("divergence order {p:.3}; D=1 first integral {i0:.6} constant to {ode:.2e} over t in [0, 10]"),
    )
}

// ---------------------------------------------------------------------------

fn c8_trivial() -> Line {
    let t = preset_theory("phi4");
    let blocks: Vec<Solution> = RESOLUTIONS.iter().map(|&n| refined(&t, n, 512, plane_wave(1.0, 1.0))).collect();
    let mut pass = true;
    let mut text = Vec::new();
    for kind in [FamilyKind::FieldShiftConst, FamilyKind::FieldScale] {
        let f: PerturbationFamily = kind.into();
        let reports: Vec<NonlocalReport> = blocks
            .iter()
            .map(|b| nonlocal_constant(b, &f, 1, b.grid().time_slices() - 2, 0.0).unwrap())
            .collect();
        let size: Vec<f64> = reports.iter().map(|r| r.max_abs).collect();
        let spread: Vec<f64> = reports.iter().map(|r| r.deviation).collect();
        // φ − ε is a discrete conservation law of leapfrog: its constant is
        // rounding on every grid, and zero satisfies any C·h².
        if reports.iter().all(|r| r.max_abs <= 1e-12 * r.scale) {
            text.push(format!("{}: exact to rounding, max {:.2e}", f.name(), size.iter().fold(0.0f64, |a, b| a.max(*b))));
            continue;
        }
        let (ps, pd) = (order(&RESOLUTIONS, &size), order(&RESOLUTIONS, &spread));
        let h = spacings(&RESOLUTIONS);
        let c = size.iter().zip(&h).map(|(e, h)| e / (h * h)).fold(0.0, f64::max);
        pass &= ps >= 2.0 && pd >= 2.0;
        text.push(format!("{}: max {:.2e} (C = {c:.3}), order {ps:.3}, t1 spread order {pd:.3}", f.name(), size[2]));
    }
    line(pass, text.join("; "))
}

// ---------------------------------------------------------------------------

fn c9_finite_invariance() -> Line {
    let t = preset_theory("complex-kg");
    let sol = refined(&t, 64, 256, plane_wave(2.0, 1.0));
    let (res, _) = phase_current(&sol);
    let d = preset_theory("dissipative-kg");
    let sol = refined(&d, 64, 256, plane_wave(1.0, 1.0));
    let shift: PerturbationFamily = FamilyKind::SpacetimeShift { a: vec![1.0, 0.0] }.into();
    let rejected = matches!(
        finite_invariance_current(&sol, &shift),
        Err(CurrentError::Refused(Refusal::NotFinitelyInvariant { .. }))
    );
    line(res.xi.abs() <= 1e-8 && rejected, format!("phase xi = {:.2e}; dissipative shift rejected: {rejected}", res.xi))
}

// ---------------------------------------------------------------------------

/// Largest `|X^{μν} − X^{νμ}|` at a site relative to the largest entry there.
fn asymmetry(sol: &Solution, x: &TensorExpr) -> f64 {
    let t = sol.theory();
    let up = raise_second(t, x).evaluate(sol);
    let d = t.dim();
    let mut worst = 0.0f64;
    for s in 0..sol.grid().len() {
        let mut scale = 0.0f64;
        let mut diff = 0.0f64;
        for mu in 0..d {
            for nu in 0..d {
                scale = scale.max(up.at(mu, nu, s).abs());
                diff = diff.max((up.at(mu, nu, s) - up.at(nu, mu, s)).abs());
            }
        }
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

fn c10_symmetry(kg: &Solution, scaling: &Solution) -> Line {
    let t = kg.theory();
    let at = asymmetry(kg, &energy_momentum(t).unwrap());
    let ak = asymmetry(kg, &k_tensor(t, None).unwrap().tensor);
    let a4 = asymmetry(scaling, &energy_momentum(scaling.theory()).unwrap());
    let sc = scaling_currents(scaling.theory()).unwrap();
    // H carries no index placement convention of its own: compare H^{μν}
    // with H^{νμ} directly.
    let hf = sc.h.evaluate(scaling);
    let mut witness = None;
    'sites: for s in 0..scaling.grid().len() {
        for mu in 0..4 {
            for nu in mu + 1..4 {
                let (a, b) = (hf.at(mu, nu, s), hf.at(nu, mu, s));
                if (a - b).abs() > 1e-3 * a.abs().max(b.abs()) && (a - b).abs() > 1e-6 {
                    witness = Some((s, mu, nu, a, b));
                    break 'sites;
                }
            }
        }
    }
    let found = witness.map_or("none".to_string(), |(s, mu, nu, a, b)| {
        format!("H^{mu}{nu} = {a:.4e} vs H^{nu}{mu} = {b:.4e} at site {s}")
    });
    line(
        at.max(a4) <= 1e-12 && ak <= 1e-12 && witness.is_some(),
        format!("T {:.1e}, K {ak:.1e}; H witness: {found}", at.max(a4)),
    )
}

// ---------------------------------------------------------------------------

fn c11_spacetime_dependent() -> Line {
    let t = preset_theory("spacetime-dependent");
    let sigma: f64 = 2.0;
    let k = k_tensor(&t, None).unwrap();
    let mut errs = vec![Vec::new(); 2];
    for &n in &RESOLUTIONS {
        let sol = refined(&t, n, KG_STEPS / 2, plane_wave(1.0, sigma.sqrt()));
        for (nu, e) in errs.iter_mut().enumerate() {
            e.push(verify_current(&sol, k.tensor.column(nu)).residual_l2);
        }
    }
    let orders: Vec<f64> = errs.iter().map(|e| order(&RESOLUTIONS, e)).collect();
    let refused = matches!(energy_momentum(&t), Err(CurrentError::Refused(Refusal::SpacetimeDependent)));
    let rho_ok = (k.rho + 1.0 / sigma).abs() <= 1e-14;
    line(
        rho_ok && orders.iter().all(|p| within(*p, 1.8, 2.2)) && refused,
        format!("rho {} (-1/sigma = {}), div K orders {:.3}, {:.3}; T refused: {refused}", k.rho, -1.0 / sigma, orders[0], orders[1]),
    )
}

// ---------------------------------------------------------------------------

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn main() {
    let mut lines: Vec<(usize, &str, Line, Duration)> = Vec::new();
    let mut add = |id, name, l: Line, d: Duration| {
        println!("criterion {id:>2} {} {name}: {} ({:.2} s)", if l.pass { "PASS" } else { "FAIL" }, l.detail, d.as_secs_f64());
        lines.push((id, name, l, d));
    };

    let (mut l, d) = timed(c1_gauss);
    l.pass &= d < Duration::from_secs(10);
    add(1, "gauss consistency", l, d);

    let (kg, d_block) = timed(|| kg_block(256));
    let (mut l, d) = timed(|| c2_energy(&kg));
    let d = d + d_block;
    l.pass &= d < Duration::from_secs(30);
    add(2, "klein-gordon energy", l, d);

    let (l, d) = timed(|| c3_degeneracy(&kg));
    add(3, "K/T degeneracy", l, d);

    let ns = [6, 8, 12];
    let ((blocks, mut l), d) = timed(|| {
        let blocks: Vec<Solution> = ns.iter().map(|&n| scaling_block(n)).collect();
        let l = c4_scaling(&ns, &blocks);
        (blocks, l)
    });
    l.pass &= d < Duration::from_secs(300);
    add(4, "massless phi^4 scaling currents", l, d);

    let (l, d) = timed(|| c5_distance(&blocks[1]));
    add(5, "distance identity", l, d);

    let (l, d) = timed(c6_u1);
    add(6, "U(1) charge", l, d);

    let (l, d) = timed(c7_dissipative);
    add(7, "dissipative current", l, d);

    let (l, d) = timed(c8_trivial);
    add(8, "trivial families", l, d);

    let (l, d) = timed(c9_finite_invariance);
    add(9, "finite invariance", l, d);

    let (l, d) = timed(|| c10_symmetry(&kg, &blocks[1]));
    add(10, "symmetry", l, d);

    let (l, d) = timed(c11_spacetime_dependent);
    add(11, "spacetime-dependent theory", l, d);

    let failed: Vec<usize> = lines.iter().filter(|x| !x.2.pass).map(|x| x.0).collect();
    println!("acceptance: {} of {} criteria pass", lines.len() - failed.len(), lines.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
