//! Requested checks: validated symbolically before any evolution, then
//! measured on the evolved block.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::currents::{
    dissipative_current, distance_from_origin, energy_momentum, finite_invariance_current, k_tensor,
    nonlocal_constant, raise_second, scaling_currents, verify_current, verify_tensor, CurrentError,
    DissipativeCurrent, KTensor, NonlocalReport, PerturbationFamily, Refusal, ScalingCurrents, TGenerated,
    TensorExpr, VerificationEntry,
};
use crate::currents::{current_from_t_general, generator_residual_on};
use crate::solution::Solution;
use crate::theory::Theory;

use super::scenario::{Check, Scenario, Tolerances};
use super::CliError;

/// A check that passed its preconditions.
#[derive(Clone, Debug)]
pub enum Prepared {
    T(TensorExpr),
    K { k: KTensor, t: Option<TensorExpr> },
    TGenerated { family: PerturbationFamily, tg: Box<TGenerated> },
    Scaling(Box<ScalingCurrents>),
    Dissipative(DissipativeCurrent),
    FiniteInvariance(PerturbationFamily),
    Nonlocal { check: Check, family: PerturbationFamily },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RefusalRecord {
    pub check: String,
    pub family: Option<String>,
    pub code: String,
    pub message: String,
}

impl RefusalRecord {
    fn new(check: Check, family: Option<&PerturbationFamily>, r: &Refusal) -> Self {
        RefusalRecord {
            check: check.label().into(),
            family: family.map(|f| f.name().into()),
            code: r.code().into(),
            message: r.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub check: String,
    pub family: Option<String>,
    pub pass: bool,
    pub currents: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub refusal: Option<RefusalRecord>,
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub checks: Vec<CheckSummary>,
    pub entries: Vec<VerificationEntry>,
    pub nonlocal: Vec<NonlocalReport>,
}

/// Builds every requested construction. Precondition failures are
/// collected, not raised, so all of them can be reported at once.
pub fn prepare(theory: &Theory, scenario: &Scenario) -> Result<(Vec<Prepared>, Vec<RefusalRecord>), CliError> {
    let mut ok = Vec::new();
    let mut refused = Vec::new();
    let mut checks = scenario.checks.clone();
    checks.sort();
    checks.dedup();
    let (complex, d) = (theory.is_complex(), theory.dim());
    for check in checks {
        let refuse = |e: CurrentError, fam: Option<&PerturbationFamily>, refused: &mut Vec<RefusalRecord>| match e {
            CurrentError::Refused(r) => {
                refused.push(RefusalRecord::new(check, fam, &r));
                Ok(())
            }
            other => Err(CliError::from(other)),
        };
        match check {
            Check::T => match energy_momentum(theory) {
                Ok(t) => ok.push(Prepared::T(t)),
                Err(e) => refuse(e, None, &mut refused)?,
            },
            Check::K => match k_tensor(theory, None) {
                Ok(k) => ok.push(Prepared::K { k, t: energy_momentum(theory).ok() }),
                Err(e) => refuse(e, None, &mut refused)?,
            },
            Check::Scaling => match scaling_currents(theory) {
                Ok(s) => ok.push(Prepared::Scaling(Box::new(s))),
                Err(e) => refuse(e, None, &mut refused)?,
            },
            Check::Dissipative => match dissipative_current(theory) {
                Ok(dc) => ok.push(Prepared::Dissipative(dc)),
                Err(e) => refuse(e, None, &mut refused)?,
            },
            Check::TGenerated => {
                for f in scenario.families_for(check, complex, d) {
                    match current_from_t_general(theory, &f, scenario.theta.as_deref()) {
                        Ok(tg) => ok.push(Prepared::TGenerated { family: f, tg: Box::new(tg) }),
                        Err(e) => refuse(e, Some(&f), &mut refused)?,
                    }
                }
            }
            Check::FiniteInvariance | Check::Nonlocal | Check::TrivialFamilies => {
                for f in scenario.families_for(check, complex, d) {
                    match f.velocity(theory) {
                        Ok(_) if check == Check::FiniteInvariance => ok.push(Prepared::FiniteInvariance(f)),
                        Ok(_) => ok.push(Prepared::Nonlocal { check, family: f }),
                        Err(r) => refused.push(RefusalRecord::new(check, Some(&f), &r)),
                    }
                }
            }
        }
    }
    Ok((ok, refused))
}

fn drift_ok(entries: &[VerificationEntry], tol: f64) -> bool {
    entries.iter().all(|e| e.drift <= tol)
}

fn names(entries: &[VerificationEntry]) -> Vec<String> {
    entries.iter().map(|e| e.current.clone()).collect()
}

fn worst_drift(entries: &[VerificationEntry]) -> f64 {
    entries.iter().fold(0.0, |a, e| a.max(e.drift))
}

/// Largest `|X^{μν} − X^{νμ}|` over interior sites, relative to the largest
/// component at the same site.
pub fn asymmetry(sol: &Solution, upper: &TensorExpr) -> f64 {
    let f = upper.evaluate(sol);
    let g = sol.grid();
    let (d, m, n) = (g.dim(), g.slice_len(), g.time_slices());
    let mut worst = 0.0f64;
    for s in m..(n - 1) * m {
        let mut scale = 0.0f64;
        let mut diff = 0.0f64;
        for mu in 0..d {
            for nu in 0..d {
                scale = scale.max(f.at(mu, nu, s).abs());
                diff = diff.max((f.at(mu, nu, s) - f.at(nu, mu, s)).abs());
            }
        }
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

/// Least-squares `κ` with `K ≈ κT` and `max|K − κT| / max|T|` over interior
/// sites.
pub fn degeneracy(sol: &Solution, k: &TensorExpr, t: &TensorExpr) -> (f64, f64) {
    let (kf, tf) = (k.evaluate(sol), t.evaluate(sol));
    let g = sol.grid();
    let (d, m, n) = (g.dim(), g.slice_len(), g.time_slices());
    let (mut kt, mut tt) = (0.0, 0.0);
    for s in m..(n - 1) * m {
        for mu in 0..d {
            for nu in 0..d {
                kt += kf.at(mu, nu, s) * tf.at(mu, nu, s);
                tt += tf.at(mu, nu, s) * tf.at(mu, nu, s);
            }
        }
    }
    let kappa = if tt > 0.0 { kt / tt } else { 0.0 };
    let (mut err, mut tmax) = (0.0f64, 0.0f64);
    for s in m..(n - 1) * m {
        for mu in 0..d {
            for nu in 0..d {
                err = err.max((kf.at(mu, nu, s) - kappa * tf.at(mu, nu, s)).abs());
                tmax = tmax.max(tf.at(mu, nu, s).abs());
            }
        }
    }
    (kappa, if tmax > 0.0 { err / tmax } else { err })
}

fn summary(check: Check, family: Option<&PerturbationFamily>, entries: &[VerificationEntry]) -> CheckSummary {
    CheckSummary {
        check: check.label().into(),
        family: family.map(|f| f.name().into()),
        pass: true,
        currents: names(entries),
        metrics: BTreeMap::new(),
        refusal: None,
    }
}

/// Runs one prepared check on an evolved block.
pub fn execute(sol: &Solution, p: &Prepared, scenario: &Scenario) -> Result<Outcome, CliError> {
    let tol: &Tolerances = &scenario.tolerances;
    let theory = sol.theory();
    let mut out = Outcome::default();
    let mut entries = Vec::new();
    let mut s;
    match p {
        Prepared::T(t) => {
            entries = verify_tensor(sol, t);
            s = summary(Check::T, None, &entries);
            let asym = asymmetry(sol, &raise_second(theory, t));
            s.metrics.insert("asymmetry".into(), asym);
            s.pass = drift_ok(&entries, tol.drift) && asym <= tol.symmetry;
        }
        Prepared::K { k, t } => {
            entries = verify_tensor(sol, &k.tensor);
            s = summary(Check::K, None, &entries);
            let asym = asymmetry(sol, &raise_second(theory, &k.tensor));
            s.metrics.insert("rho".into(), k.rho);
            s.metrics.insert("asymmetry".into(), asym);
            if let Some(t) = t {
                let (kappa, err) = degeneracy(sol, &k.tensor, t);
                s.metrics.insert("kappa".into(), kappa);
                s.metrics.insert("degeneracy_error".into(), err);
            }
            s.pass = drift_ok(&entries, tol.drift) && asym <= tol.symmetry;
        }
        Prepared::TGenerated { family, tg } => {
            entries.push(verify_current(sol, &tg.current));
            s = summary(Check::TGenerated, Some(family), &entries);
            let on_block = generator_residual_on(sol, tg);
            s.metrics.insert("generator_residual_block".into(), on_block);
            s.metrics.insert("generator_residual_random".into(), tg.check.sampled.max(tg.check.symbolic));
            s.pass = drift_ok(&entries, tol.drift) && on_block <= tol.generator && tg.check.holds;
        }
        Prepared::Scaling(sc) => {
            entries.push(verify_current(sol, &sc.j));
            entries.extend(verify_tensor(sol, &sc.h));
            s = summary(Check::Scaling, None, &entries);
            let dist = distance_from_origin(sol, sc)?;
            let block = sol.block();
            let nc = block.channels();
            let g = sol.grid();
            let (m, n) = (g.slice_len(), g.time_slices());
            let mut err = 0.0f64;
            for site in m..(n - 1) * m {
                let mag = (0..nc).map(|c| block.get(c, site).powi(2)).sum::<f64>().sqrt();
                err = err.max((dist.values.get(0, site) - mag).abs() / (1.0 + mag));
            }
            let h_asym = asymmetry(sol, &sc.h);
            s.metrics.insert("delta".into(), sc.delta);
            if let Some(k) = sc.degree {
                s.metrics.insert("degree".into(), k);
            }
            s.metrics.insert("distance_error".into(), err);
            s.metrics.insert("distance_clamped".into(), dist.clamped as f64);
            s.metrics.insert("h_asymmetry".into(), h_asym);
            s.pass = drift_ok(&entries, tol.drift) && err <= tol.distance;
        }
        Prepared::Dissipative(dc) => {
            entries.push(verify_current(sol, &dc.current));
            s = summary(Check::Dissipative, None, &entries);
            s.metrics.insert("c_dot_h".into(), dc.c_dot_h);
            for (mu, c) in dc.c.iter().enumerate() {
                s.metrics.insert(format!("c{mu}"), *c);
            }
            s.pass = drift_ok(&entries, tol.drift);
        }
        Prepared::FiniteInvariance(f) => match finite_invariance_current(sol, f) {
            Ok((res, j)) => {
                entries.push(verify_current(sol, &j));
                s = summary(Check::FiniteInvariance, Some(f), &entries);
                s.metrics.insert("xi".into(), res.xi);
                s.metrics.insert("deviation".into(), res.deviation);
                s.metrics.insert("threshold".into(), res.threshold);
                s.pass = drift_ok(&entries, tol.drift);
            }
            Err(CurrentError::Refused(r)) => {
                s = summary(Check::FiniteInvariance, Some(f), &[]);
                s.pass = false;
                s.refusal = Some(RefusalRecord::new(Check::FiniteInvariance, Some(f), &r));
            }
            Err(e) => return Err(e.into()),
        },
        Prepared::Nonlocal { check, family } => {
            let n = sol.grid().time_slices();
            let r = nonlocal_constant(sol, family, scenario.nonlocal_t0, n - 2, tol.nonlocal)?;
            s = summary(*check, Some(family), &[]);
            s.metrics.insert("max_abs".into(), r.max_abs);
            s.metrics.insert("deviation".into(), r.deviation);
            s.metrics.insert("scale".into(), r.scale);
            s.pass = r.pass;
            out.nonlocal.push(r);
        }
    }
    if !entries.is_empty() {
        s.metrics.insert("drift".into(), worst_drift(&entries));
    }
    out.checks.push(s);
    out.entries = entries;
    Ok(out)
}
