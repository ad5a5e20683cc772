//! Current constructors. Each one checks its hypotheses on the symbolic
//! density first and refuses with a [`Refusal`] instead of producing a
//! current that is not conserved.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsl::analysis::{check_k_condition, homogeneity_of, SYMBOLIC_TOL};
use crate::dsl::{Poly, Var};
use crate::lattice::ScalarLatticeField;
use crate::scalar::{CDd, Dd};
use crate::solution::Solution;
use crate::theory::{Scratch, Theory};

use super::family::{dl_depsilon_of, lower_aux, momentum_flux, FamilyKind, PerturbationFamily};
use super::{CurrentError, CurrentExpr, Observable, Refusal, TensorExpr, TensorField, CurrentField};

/// Relative size below which a sampled residual counts as zero when the
/// symbolic check is inconclusive (non-polynomial densities).
pub const SAMPLED_TOL: f64 = 1e-9;

fn coords(d: usize) -> Vec<Poly> {
    (0..d).map(|mu| Poly::var(Var::Coord(mu))).collect()
}

fn delta(mu: usize, nu: usize) -> f64 {
    if mu == nu {
        1.0
    } else {
        0.0
    }
}

/// `x^μ x_μ`
fn x_squared(theory: &Theory) -> Poly {
    let parts: Vec<Poly> = coords(theory.dim())
        .iter()
        .enumerate()
        .map(|(mu, x)| x.mul(x).scale(theory.eta(mu)))
        .collect();
    Poly::sum(parts.iter())
}

fn divergence_of(theory: &Theory, psi: &[Poly]) -> Result<Poly, Refusal> {
    let mut parts = Vec::with_capacity(psi.len());
    for (mu, p) in psi.iter().enumerate() {
        parts.push(
            p.total_derivative(mu, theory.ncomp(), theory.dim())
                .ok_or_else(|| Refusal::FamilyParameters("ψ may not use second derivatives".into()))?,
        );
    }
    Ok(Poly::sum(parts.iter()))
}

/// Channel jets drawn uniformly from `[-1, 1]`, a stand-in for "all motions,
/// whether solutions or not".
pub fn random_jets(theory: &Theory, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = theory.layout().len();
    (0..n).map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// Outcome of deciding whether an expression vanishes for every jet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    /// Largest surviving coefficient relative to the largest input
    /// coefficient; zero when the canonical form cancels exactly.
    pub symbolic: f64,
    /// Largest `|residual| / (1 + scale)` over random jets.
    pub sampled: f64,
    pub holds: bool,
}

/// `residual ≡ 0`? `scale` holds the pieces it was assembled from, which
/// set the magnitude rounding is measured against.
pub fn check_identity(theory: &Theory, residual: &Observable, scale: &[&Poly]) -> IdentityCheck {
    let s = scale.iter().map(|p| p.max_coefficient()).fold(1.0, f64::max);
    let symbolic = residual.poly.max_coefficient() / s;
    if symbolic <= SYMBOLIC_TOL {
        return IdentityCheck { symbolic, sampled: 0.0, holds: true };
    }
    let r = residual.compile(theory);
    let parts: Vec<_> = scale.iter().map(|p| Observable::real(Poly::clone(p)).compile(theory)).collect();
    let mut scratch = Scratch::default();
    let mut sampled = 0.0f64;
    for jet in random_jets(theory, 64, 0x7e57_1de7) {
        let v = r.eval(theory, &jet, &mut scratch).abs();
        let m = parts.iter().map(|p| p.eval(theory, &jet, &mut scratch).abs()).fold(0.0, f64::max);
        sampled = sampled.max(v / (1.0 + m));
    }
    IdentityCheck { symbolic, sampled, holds: sampled <= SAMPLED_TOL }
}

/// `T^μ_ν = Σ_a P_a^μ ∂_νφ_a − L δ^μ_ν` with no hypothesis checked; for an
/// explicitly spacetime-dependent density this is not conserved.
pub fn canonical_tensor(theory: &Theory, name: &str, label: &str) -> TensorExpr {
    let d = theory.dim();
    let l = &theory.lagrangian;
    let columns = (0..d)
        .map(|nu| {
            let components = (0..d)
                .map(|mu| {
                    let parts: Vec<Poly> = (0..theory.ncomp())
                        .map(|a| theory.momentum[a][mu].mul(&Poly::var(Var::Grad(a, nu))))
                        .collect();
                    Poly::sum(parts.iter()).sub(&l.scale(delta(mu, nu)))
                })
                .collect();
            CurrentExpr { name: format!("{name}[{nu}]"), theorem: label.into(), components, imaginary: false }
        })
        .collect();
    TensorExpr { name: name.into(), theorem: label.into(), columns }
}

pub fn energy_momentum(theory: &Theory) -> Result<TensorExpr, CurrentError> {
    if !theory.is_spacetime_independent() {
        return Err(Refusal::SpacetimeDependent.into());
    }
    Ok(canonical_tensor(theory, "T", "energy-momentum"))
}

/// `X^{μν} = X^μ_σ η^{σν}` for a mixed tensor stored by columns.
pub fn raise_second(theory: &Theory, t: &TensorExpr) -> TensorExpr {
    let columns = t
        .columns
        .iter()
        .enumerate()
        .map(|(nu, c)| CurrentExpr {
            components: c.components.iter().map(|p| p.scale(theory.eta(nu))).collect(),
            ..c.clone()
        })
        .collect();
    TensorExpr { name: format!("{}^", t.name), theorem: t.theorem.clone(), columns }
}

#[derive(Clone, Debug)]
pub struct KTensor {
    pub tensor: TensorExpr,
    pub rho: f64,
    /// The total divergence condition for the family `φ + ε b^ν δL/δ∂^νφ`
    /// with each unit `b`.
    pub condition: IdentityCheck,
}

/// Largest coefficient of `δL/δ∂^μφ_a − ρ ∂_μ(δL/δφ_a)` over `a, μ`.
pub fn k_condition_residual(theory: &Theory, rho: f64) -> f64 {
    let (nc, d) = (theory.ncomp(), theory.dim());
    let mut worst = 0.0f64;
    for a in 0..nc {
        for mu in 0..d {
            let p = theory.momentum_lower(a, mu);
            let de = theory.dl_dfield[a].total_derivative(mu, nc, d).expect("first-order density");
            let scale = p.max_coefficient().max(rho.abs() * de.max_coefficient()).max(1.0);
            worst = worst.max(p.sub(&de.scale(rho)).max_coefficient() / scale);
        }
    }
    worst
}

/// `K^μ_ν = Σ_a P_a^μ P_{ā,ν} − ½δ^μ_ν [ρ Σ_a E_a E_ā + Σ_a P_a^α P_{ā,α}]`,
/// where `ā` is the conjugate of a complex component and `a` itself otherwise.
pub fn k_tensor(theory: &Theory, rho: Option<f64>) -> Result<KTensor, CurrentError> {
    let rho = match rho {
        Some(r) => r,
        None => check_k_condition(theory.spec()).ok_or(Refusal::NoConstantRho)?,
    };
    if !rho.is_finite() || k_condition_residual(theory, rho) > SYMBOLIC_TOL {
        return Err(Refusal::NoConstantRho.into());
    }
    let (nc, d) = (theory.ncomp(), theory.dim());
    let e = &theory.dl_dfield;
    let mut scalar = Vec::new();
    for a in 0..nc {
        let b = theory.partner(a);
        scalar.push(e[a].mul(&e[b]).scale(rho));
        for alpha in 0..d {
            scalar.push(theory.momentum[a][alpha].mul(&theory.momentum_lower(b, alpha)));
        }
    }
    let s = Poly::sum(scalar.iter()).scale(0.5);
    let columns: Vec<CurrentExpr> = (0..d)
        .map(|nu| {
            let components = (0..d)
                .map(|mu| {
                    let parts: Vec<Poly> = (0..nc)
                        .map(|a| theory.momentum[a][mu].mul(&theory.momentum_lower(theory.partner(a), nu)))
                        .collect();
                    Poly::sum(parts.iter()).sub(&s.scale(delta(mu, nu)))
                })
                .collect();
            CurrentExpr { name: format!("K[{nu}]"), theorem: "k-tensor".into(), components, imaginary: false }
        })
        .collect();

    // Column ν is the current of the unit momentum shift along ν.
    let mut condition = IdentityCheck { symbolic: 0.0, sampled: 0.0, holds: true };
    for nu in 0..d {
        let mut b = vec![0.0; d];
        b[nu] = 1.0;
        let fam = PerturbationFamily::from(FamilyKind::MomentumFieldShift { b });
        let psi: Vec<Poly> = (0..d).map(|mu| s.scale(delta(mu, nu))).collect();
        let c = total_divergence_condition(theory, &fam, &psi)?;
        let chk = check_identity(theory, &c, &[&s, &theory.lagrangian]);
        condition.symbolic = condition.symbolic.max(chk.symbolic);
        condition.sampled = condition.sampled.max(chk.sampled);
        condition.holds &= chk.holds;
    }
    if !condition.holds {
        return Err(Refusal::DivergenceCondition(format!(
            "momentum shift leaves a residual of relative size {:e}",
            condition.sampled
        ))
        .into());
    }
    Ok(KTensor { tensor: TensorExpr { name: "K".into(), theorem: "k-tensor".into(), columns }, rho, condition })
}

/// `∂L_ε/∂ε|₀ − ∂_μψ^μ` as an expression over jets. `ψ` carries the same
/// factor `i` as the family's velocity.
pub fn total_divergence_condition(
    theory: &Theory,
    family: &PerturbationFamily,
    psi: &[Poly],
) -> Result<Observable, Refusal> {
    let dl = family.dl_depsilon(theory)?;
    let div = divergence_of(theory, psi)?;
    Ok(Observable { poly: dl.poly.sub(&div), imaginary: dl.imaginary })
}

/// The same residual evaluated on a block: `∂L_ε/∂ε|₀` from the jets minus
/// the lattice divergence of `ψ` sampled at every site.
pub fn total_divergence_residual(
    sol: &Solution,
    family: &PerturbationFamily,
    psi: &[Poly],
) -> Result<ScalarLatticeField, CurrentError> {
    let theory = sol.theory();
    let dl = family.dl_depsilon(theory)?;
    let psi = CurrentExpr {
        name: "psi".into(),
        theorem: "total-divergence".into(),
        components: psi.to_vec(),
        imaginary: dl.imaginary,
    };
    let div = super::verify::chart_divergence(sol, &psi);
    let mut r = dl.compile(theory).evaluate(sol);
    for (x, d) in r.iter_mut().zip(&div) {
        *x -= d;
    }
    Ok(ScalarLatticeField::from_raw(sol.grid().clone(), 1, r))
}

/// `j^μ = Σ_a P_a^μ v_a − ψ^μ`.
pub fn current_from_psi(
    theory: &Theory,
    family: &PerturbationFamily,
    psi: &[Poly],
    name: &str,
) -> Result<CurrentExpr, CurrentError> {
    if psi.len() != theory.dim() {
        return Err(Refusal::FamilyParameters(format!("ψ has {} components, expected {}", psi.len(), theory.dim())).into());
    }
    let v = family.velocity(theory)?;
    let components = momentum_flux(theory, &v).iter().zip(psi).map(|(f, p)| f.sub(p)).collect();
    Ok(CurrentExpr { name: name.into(), theorem: "total-divergence".into(), components, imaginary: v.imaginary })
}

/// [`current_from_psi`] gated on the total divergence condition holding
/// identically in the jet variables.
pub fn total_divergence_current(
    theory: &Theory,
    family: &PerturbationFamily,
    psi: &[Poly],
    name: &str,
) -> Result<(CurrentExpr, IdentityCheck), CurrentError> {
    let cond = total_divergence_condition(theory, family, psi)?;
    let dl = family.dl_depsilon(theory)?;
    let mut scale: Vec<&Poly> = psi.iter().collect();
    scale.push(&dl.poly);
    scale.push(&theory.lagrangian);
    let chk = check_identity(theory, &cond, &scale);
    if !chk.holds {
        return Err(Refusal::DivergenceCondition(format!(
            "{} family: residual {:e} relative",
            family.name(),
            chk.sampled.max(chk.symbolic)
        ))
        .into());
    }
    Ok((current_from_psi(theory, family, psi, name)?, chk))
}

pub mod psi {
    //! The `ψ^μ` that make the standard families total divergences.

    use super::*;

    pub fn zero(theory: &Theory) -> Vec<Poly> {
        vec![Poly::zero(); theory.dim()]
    }

    /// `L a^μ`
    pub fn lagrangian_along(theory: &Theory, a: &[f64]) -> Vec<Poly> {
        a.iter().map(|&c| theory.lagrangian.scale(c)).collect()
    }

    /// `x^μ L`
    pub fn x_lagrangian(theory: &Theory) -> Vec<Poly> {
        coords(theory.dim()).iter().map(|x| x.mul(&theory.lagrangian)).collect()
    }

    /// `ξ x^μ`
    pub fn xi_x(theory: &Theory, xi: f64) -> Vec<Poly> {
        coords(theory.dim()).iter().map(|x| x.scale(xi)).collect()
    }
}

// ---------------------------------------------------------------------------
// Currents generated by the energy-momentum tensor.

#[derive(Clone, Debug)]
pub struct TGenerated {
    pub current: CurrentExpr,
    /// `∂L(x,ϕ_ε,∂ϕ_ε)/∂ε|₀ + [P^μ ∂_αφ − (L−ϑ)δ^μ_α] ∂_μ f^α`, which the
    /// hypothesis requires to vanish for every field configuration.
    pub condition: Observable,
    pub check: IdentityCheck,
    pub theta: Poly,
}

/// Current of the mixed family `φ(x + εf(x)) + ϕ_ε(x)` for a density with
/// `∂L/∂x^μ = D_μϑ`. Needs a [`FamilyKind::MixedGeneral`] family (any family
/// whose velocity splits into a transport and an internal part works).
pub fn current_from_t_general(
    theory: &Theory,
    family: &PerturbationFamily,
    theta: Option<&str>,
) -> Result<TGenerated, CurrentError> {
    let (nc, d) = (theory.ncomp(), theory.dim());
    let theta = match theta {
        Some(s) => lower_aux(theory, s)?,
        None => Poly::zero(),
    };
    if theta.vars().iter().any(|v| matches!(v, Var::Hess(..))) {
        return Err(Refusal::FamilyParameters("ϑ may not use second derivatives".into()).into());
    }
    for mu in 0..d {
        let dt = theta.total_derivative(mu, nc, d).expect("checked above");
        let r = dt.sub(&theory.explicit_x[mu]);
        let s = dt.max_coefficient().max(theory.explicit_x[mu].max_coefficient()).max(1.0);
        if r.max_coefficient() > SYMBOLIC_TOL * s {
            return Err(Refusal::ThetaInconsistent(mu).into());
        }
    }
    let f = family.shift_vector(theory)?;
    let w = family.internal_velocity(theory)?;
    if w.imaginary {
        return Err(Refusal::FamilyParameters("the internal part must be real".into()).into());
    }
    let l_eff = theory.lagrangian.sub(&theta);
    // G^μ_α = Σ_a P_a^μ ∂_αφ_a − (L−ϑ)δ^μ_α
    let g = |mu: usize, alpha: usize| {
        let parts: Vec<Poly> =
            (0..nc).map(|a| theory.momentum[a][mu].mul(&Poly::var(Var::Grad(a, alpha)))).collect();
        Poly::sum(parts.iter()).sub(&l_eff.scale(delta(mu, alpha)))
    };
    let flux = momentum_flux(theory, &w);
    let mut components = Vec::with_capacity(d);
    for (mu, fl) in flux.iter().enumerate() {
        let parts: Vec<Poly> = (0..d).map(|alpha| g(mu, alpha).mul(&f[alpha])).collect();
        components.push(Poly::sum(parts.iter()).add(fl));
    }
    let dl_int = dl_depsilon_of(theory, &w)?;
    let mut cond = vec![dl_int.poly.clone()];
    for mu in 0..d {
        for (alpha, fa) in f.iter().enumerate() {
            let df = fa.diff(Var::Coord(mu));
            if !df.is_zero() {
                cond.push(g(mu, alpha).mul(&df));
            }
        }
    }
    let condition = Observable::real(Poly::sum(cond.iter()));
    let mut scale: Vec<&Poly> = cond.iter().collect();
    scale.push(&theory.lagrangian);
    let check = check_identity(theory, &condition, &scale);
    if !check.holds {
        return Err(Refusal::GeneratorCondition(check.sampled.max(check.symbolic)).into());
    }
    Ok(TGenerated {
        current: CurrentExpr { name: "j_T".into(), theorem: "t-generated".into(), components, imaginary: false },
        condition,
        check,
        theta,
    })
}

/// The spacetime-independent case, where `ϑ = 0` and the generator is `T`.
pub fn current_from_t(theory: &Theory, family: &PerturbationFamily) -> Result<TGenerated, CurrentError> {
    if !theory.is_spacetime_independent() {
        return Err(Refusal::SpacetimeDependent.into());
    }
    current_from_t_general(theory, family, None)
}

/// Largest `|condition|` over the interior of an evolved block, relative to
/// `1 + max|L|`. Complements the random-jet sample in [`TGenerated::check`].
pub fn generator_residual_on(sol: &Solution, tg: &TGenerated) -> f64 {
    let theory = sol.theory();
    let c = tg.condition.compile(theory).evaluate(sol);
    let g = sol.grid();
    let m = g.slice_len();
    let n = g.time_slices();
    let mut scratch = Scratch::default();
    let lmax = (m..(n - 1) * m).fold(0.0f64, |a, s| a.max(theory.density(sol.jet(s), &mut scratch).abs()));
    c[m..(n - 1) * m].iter().fold(0.0f64, |a, v| a.max(v.abs())) / (1.0 + lmax)
}

// ---------------------------------------------------------------------------
// Canonical densities, scaling currents and the distance formula.

/// `L = ½ η^{μμ} G^{ab} ∂_μφ_a ∂_μφ_b − U(φ)` with constant `G`.
#[derive(Clone, Debug, PartialEq)]
pub struct Canonical {
    pub g: Vec<Vec<f64>>,
    pub potential: Poly,
}

pub fn canonical_form(theory: &Theory, l: &Poly) -> Result<Canonical, Refusal> {
    let (nc, d) = (theory.ncomp(), theory.dim());
    let mut g = vec![vec![0.0; nc]; nc];
    for (a, row) in g.iter_mut().enumerate() {
        for (b, gab) in row.iter_mut().enumerate() {
            *gab = l
                .diff(Var::Grad(a, 0))
                .diff(Var::Grad(b, 0))
                .as_constant()
                .ok_or_else(|| Refusal::NotCanonical("the kinetic metric is not constant".into()))?;
        }
    }
    if g.iter().flatten().all(|&x| x == 0.0) {
        return Err(Refusal::NotCanonical("no kinetic term".into()));
    }
    let mut kin = Vec::new();
    for mu in 0..d {
        for (a, row) in g.iter().enumerate() {
            for (b, &gab) in row.iter().enumerate() {
                if gab != 0.0 {
                    kin.push(
                        Poly::var(Var::Grad(a, mu))
                            .mul(&Poly::var(Var::Grad(b, mu)))
                            .scale(0.5 * theory.eta(mu) * gab),
                    );
                }
            }
        }
    }
    let rest = l.sub(&Poly::sum(kin.iter()));
    let derivs = |v: &Var| matches!(v, Var::Grad(..) | Var::Hess(..));
    let stray = rest.filter_terms(&|m| {
        m.factors().iter().any(|(a, _)| match a {
            crate::dsl::poly::Atom::Var(v) => derivs(v),
            crate::dsl::poly::Atom::Pow(p) => p.depends_on(&derivs),
            _ => false,
        }) || m.exp_arg().is_some_and(|p| p.depends_on(&derivs))
    });
    if stray.max_coefficient() > SYMBOLIC_TOL * l.max_coefficient().max(1.0) {
        return Err(Refusal::NotCanonical("derivative terms beyond ½ G ∂φ∂φ".into()));
    }
    let potential = rest.sub(&stray).neg();
    if potential.depends_on(&|v| matches!(v, Var::Coord(_))) {
        return Err(Refusal::NotCanonical("the potential depends on spacetime".into()));
    }
    Ok(Canonical { g, potential })
}

/// Homogeneity degree of `U` under joint scaling of all components; `None`
/// for `U ≡ 0`, which has every degree.
fn potential_degree(theory: &Theory, u: &Poly, required: f64) -> Result<Option<f64>, Refusal> {
    if u.is_zero() {
        return Ok(None);
    }
    let comps: Vec<usize> = (0..theory.ncomp()).collect();
    let k = homogeneity_of(u, &comps, 16).and_then(|k| k.to_f64());
    match k {
        Some(k) if (k - required).abs() <= 1e-12 * (1.0 + required.abs()) => Ok(Some(k)),
        Some(k) => Err(Refusal::WrongDegree { found: format!("{k}"), required: format!("{required}") }),
        None => Err(Refusal::WrongDegree { found: "not homogeneous".into(), required: format!("{required}") }),
    }
}

#[derive(Clone, Debug)]
pub struct ScalingCurrents {
    pub delta: f64,
    /// `None` when the potential vanishes.
    pub degree: Option<f64>,
    pub canonical: Canonical,
    pub t: TensorExpr,
    pub j: CurrentExpr,
    /// Column `ν` holds `H^{μν}`, conserved in `μ`.
    pub h: TensorExpr,
    pub condition: IdentityCheck,
}

/// `J^μ = Δ G φ ∂^μφ + x^α T^μ_α` and
/// `H^{μν} = ½Δ η^{μν} G φφ + ½ x·x T^{μν} − x^ν J^μ`.
pub fn scaling_currents(theory: &Theory) -> Result<ScalingCurrents, CurrentError> {
    let d = theory.dim();
    if d == 2 {
        return Err(Refusal::ScalingDimensionZero.into());
    }
    if !theory.is_spacetime_independent() {
        return Err(Refusal::SpacetimeDependent.into());
    }
    let canonical = canonical_form(theory, &theory.lagrangian)?;
    let delta = (d as f64 - 2.0) / 2.0;
    let degree = potential_degree(theory, &canonical.potential, d as f64 / delta)?;
    let fam = PerturbationFamily::from(FamilyKind::Scaling { delta: Some(delta) });
    let (mut j, condition) = total_divergence_current(theory, &fam, &psi::x_lagrangian(theory), "J")?;
    j.theorem = "scaling".into();
    let t = energy_momentum(theory)?;
    let tu = raise_second(theory, &t);
    let nc = theory.ncomp();
    let mut gpp = Vec::new();
    for a in 0..nc {
        for b in 0..nc {
            if canonical.g[a][b] != 0.0 {
                gpp.push(Poly::var(Var::Field(a)).mul(&Poly::var(Var::Field(b))).scale(canonical.g[a][b]));
            }
        }
    }
    let gpp = Poly::sum(gpp.iter());
    let xx = x_squared(theory);
    let x = coords(d);
    let columns = (0..d)
        .map(|nu| {
            let components = (0..d)
                .map(|mu| {
                    let mut p = xx.mul(tu.component(mu, nu)).scale(0.5).sub(&x[nu].mul(&j.components[mu]));
                    if mu == nu {
                        p = p.add(&gpp.scale(0.5 * delta * theory.eta(mu)));
                    }
                    p
                })
                .collect();
            CurrentExpr { name: format!("H[{nu}]"), theorem: "scaling".into(), components, imaginary: false }
        })
        .collect();
    Ok(ScalingCurrents {
        delta,
        degree,
        canonical,
        t,
        j,
        h: TensorExpr { name: "H".into(), theorem: "scaling".into(), columns },
        condition,
    })
}

/// Factor `κ` with `G^{ab} φ_a φ_b = κ |φ|²`, where `|φ|²` sums the squares
/// of the stored channels. Exists when `G` is a multiple of the pairing
/// between each component and its conjugate and all fields are of one kind.
pub fn pairing_norm(theory: &Theory, g: &[Vec<f64>]) -> Option<f64> {
    let nc = theory.ncomp();
    let gamma = g[0][theory.partner(0)];
    if gamma == 0.0 {
        return None;
    }
    for (a, row) in g.iter().enumerate() {
        for (b, &x) in row.iter().enumerate() {
            let expect = if b == theory.partner(a) { gamma } else { 0.0 };
            if (x - expect).abs() > SYMBOLIC_TOL * gamma.abs() {
                return None;
            }
        }
    }
    let complex = (0..nc).filter(|&a| theory.partner(a) != a).count();
    match complex {
        0 => Some(gamma),
        c if c == nc => Some(2.0 * gamma),
        _ => None,
    }
}

#[derive(Clone, Debug)]
pub struct DistanceField {
    /// Reconstructed `|φ|` at every site.
    pub values: ScalarLatticeField,
    /// Most negative radicand before clamping, relative to its scale.
    pub min_radicand: f64,
    /// Sites where the radicand was negative beyond rounding.
    pub clamped: usize,
}

/// Rebuilds `|φ|` from `2H^μ_μ − x·x T^μ_μ + 2x_μJ^μ = DΔ G φφ`, the trace
/// of the definition of `H`.
///
/// Each of `T`, `J` and `H` is evaluated component by component and the
/// trace is assembled in double-double arithmetic, because near `φ = 0` the
/// radicand is a difference of terms many orders of magnitude larger.
pub fn distance_from_origin(sol: &Solution, sc: &ScalingCurrents) -> Result<DistanceField, CurrentError> {
    let theory = sol.theory();
    let d = theory.dim();
    let kappa = pairing_norm(theory, &sc.canonical.g)
        .ok_or_else(|| Refusal::NotCanonical("G is not a multiple of the conjugate pairing".into()))?;
    let comp = |p: &Poly| theory.compile(p);
    let tt: Vec<_> = (0..d).map(|mu| comp(sc.t.component(mu, mu))).collect();
    let jj: Vec<_> = (0..d).map(|mu| comp(&sc.j.components[mu])).collect();
    let hh: Vec<_> = (0..d).map(|mu| comp(sc.h.component(mu, mu))).collect();
    let denom = d as f64 * sc.delta * kappa;
    let g = sol.grid().clone();
    let n = g.len();
    let mut out = vec![0.0; n];
    let mut worst = 0.0f64;
    let mut clamped = 0;
    let complex = theory.is_complex();
    let mut dd: Vec<Dd> = Vec::new();
    let mut cx: Vec<CDd> = Vec::new();
    for (site, o) in out.iter_mut().enumerate() {
        let jet = sol.jet(site);
        let x: Vec<Dd> = jet[..d].iter().map(|&v| Dd::new(v)).collect();
        let eval = |c: &crate::dsl::compile::Compiled, dd: &mut Vec<Dd>, cx: &mut Vec<CDd>| -> Dd {
            if complex {
                theory.component_jet::<CDd>(jet, cx);
                c.eval(cx.as_slice()).re
            } else {
                theory.component_jet::<Dd>(jet, dd);
                c.eval(dd.as_slice())
            }
        };
        let mut xx = Dd::new(0.0);
        for (mu, xm) in x.iter().enumerate() {
            xx = xx + Dd::new(theory.eta(mu)) * *xm * *xm;
        }
        let mut trace_h = Dd::new(0.0);
        let mut trace_t = Dd::new(0.0);
        let mut xj = Dd::new(0.0);
        let mut scale = 0.0f64;
        for mu in 0..d {
            let h = eval(&hh[mu], &mut dd, &mut cx);
            let t = eval(&tt[mu], &mut dd, &mut cx);
            let j = eval(&jj[mu], &mut dd, &mut cx);
            // H^μ_μ = η_μμ H^{μμ}; x_μ J^μ = η_μμ x^μ J^μ
            trace_h = trace_h + Dd::new(theory.eta(mu)) * h;
            trace_t = trace_t + t;
            xj = xj + Dd::new(theory.eta(mu)) * x[mu] * j;
            scale = scale.max(h.to_f64().abs()).max((xx * t).to_f64().abs()).max((x[mu] * j).to_f64().abs());
        }
        let rad = Dd::new(2.0) * trace_h - xx * trace_t + Dd::new(2.0) * xj;
        let r = rad / Dd::new(denom);
        if r.hi < 0.0 {
            let rel = rad.to_f64() / scale.max(f64::MIN_POSITIVE);
            worst = worst.min(rel);
            if rel < -1e-20 {
                clamped += 1;
            }
            *o = 0.0;
        } else {
            *o = r.sqrt().to_f64();
        }
    }
    Ok(DistanceField { values: ScalarLatticeField::from_raw(g, 1, out), min_radicand: worst, clamped })
}

/// The same reconstruction from already evaluated lattice fields, in plain
/// `f64`. Loses accuracy where `|φ|` is small compared with `x·x T`.
pub fn distance_from_fields(
    t: &TensorField,
    j: &CurrentField,
    h: &TensorField,
    delta: f64,
    kappa: f64,
) -> DistanceField {
    let g = j.field.grid().clone();
    let d = g.dim();
    let eta = |mu: usize| if mu == 0 { 1.0 } else { -1.0 };
    let denom = d as f64 * delta * kappa;
    let mut worst = 0.0f64;
    let mut clamped = 0;
    let out = (0..g.len())
        .map(|s| {
            let x: Vec<f64> = (0..d).map(|mu| g.coordinate(s, mu)).collect();
            let xx: f64 = (0..d).map(|mu| eta(mu) * x[mu] * x[mu]).sum();
            let th: f64 = (0..d).map(|mu| eta(mu) * h.at(mu, mu, s)).sum();
            let tt: f64 = (0..d).map(|mu| t.at(mu, mu, s)).sum();
            let xj: f64 = (0..d).map(|mu| eta(mu) * x[mu] * j.field.component(mu)[s]).sum();
            let rad = 2.0 * th - xx * tt + 2.0 * xj;
            if rad < 0.0 {
                let scale = (2.0 * th).abs().max((xx * tt).abs()).max(f64::MIN_POSITIVE);
                worst = worst.min(rad / scale);
                if rad / scale < -1e-12 {
                    clamped += 1;
                }
                0.0
            } else {
                (rad / denom).sqrt()
            }
        })
        .collect();
    DistanceField { values: ScalarLatticeField::from_raw(g, 1, out), min_radicand: worst, clamped }
}

// ---------------------------------------------------------------------------
// Exponentially weighted densities.

/// `h` with `L = e^{h·x} L₀(φ, ∂φ)`, together with `L₀`.
pub fn exponential_weight(theory: &Theory) -> Result<(Vec<f64>, Poly), Refusal> {
    let d = theory.dim();
    let l = &theory.lagrangian;
    let mut arg: Option<&Poly> = None;
    for (m, _) in l.terms() {
        match (m.exp_arg(), arg) {
            (None, _) => return Err(Refusal::NotExponentiallyWeighted),
            (Some(a), None) => arg = Some(a),
            (Some(a), Some(b)) if a != b => return Err(Refusal::NotExponentiallyWeighted),
            _ => {}
        }
    }
    let arg = arg.ok_or(Refusal::NotExponentiallyWeighted)?;
    let mut h = vec![0.0; d];
    let mut linear = Vec::with_capacity(d);
    for (mu, hm) in h.iter_mut().enumerate() {
        *hm = arg.diff(Var::Coord(mu)).as_constant().ok_or(Refusal::NotExponentiallyWeighted)?;
        linear.push(Poly::var(Var::Coord(mu)).scale(*hm));
    }
    if !arg.sub(&Poly::sum(linear.iter())).is_zero() {
        return Err(Refusal::NotExponentiallyWeighted);
    }
    let l0 = l.mul(&arg.neg().exp());
    if l0.depends_on(&|v| matches!(v, Var::Coord(_))) {
        return Err(Refusal::NotExponentiallyWeighted);
    }
    Ok((h, l0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DissipativeVariant {
    /// `c^μ = 2h^μ/(h·h)`, so that `c^μ h_μ = 2`.
    Minkowski,
    /// `c_μ = 2/h_μ` component by component.
    Componentwise,
}

pub fn dissipative_c(theory: &Theory, variant: DissipativeVariant) -> Result<Vec<f64>, Refusal> {
    let (h, _) = exponential_weight(theory)?;
    let d = theory.dim();
    match variant {
        DissipativeVariant::Minkowski => {
            let hh: f64 = (0..d).map(|mu| theory.eta(mu) * h[mu] * h[mu]).sum();
            let hmax = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if hh.abs() <= 1e-12 * hmax * hmax || hmax == 0.0 {
                return Err(Refusal::NullWeight);
            }
            Ok((0..d).map(|mu| 2.0 * theory.eta(mu) * h[mu] / hh).collect())
        }
        DissipativeVariant::Componentwise => (0..d)
            .map(|mu| if h[mu] == 0.0 { Err(Refusal::ZeroWeightComponent(mu)) } else { Ok(theory.eta(mu) * 2.0 / h[mu]) })
            .collect(),
    }
}

#[derive(Clone, Debug)]
pub struct DissipativeCurrent {
    pub current: CurrentExpr,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    /// `c^μ h_μ`; the construction needs exactly 2.
    pub c_dot_h: f64,
    pub condition: IdentityCheck,
}

/// `j^μ = e^{h·x} (φ ∂^μφ + c_ν T_L^{μν})` for `L = e^{h·x}(½∂φ∂φ − U)`
/// with `U` homogeneous of degree 2.
pub fn dissipative_current(theory: &Theory) -> Result<DissipativeCurrent, CurrentError> {
    let dc = dissipative_current_with(theory, DissipativeVariant::Minkowski)?;
    if !dc.condition.holds {
        return Err(Refusal::DivergenceCondition(format!("residual {:e}", dc.condition.sampled)).into());
    }
    Ok(dc)
}

/// Builds the current for either choice of `c` and reports whether the
/// total divergence condition holds instead of refusing when it does not.
pub fn dissipative_current_with(theory: &Theory, variant: DissipativeVariant) -> Result<DissipativeCurrent, CurrentError> {
    let (h, l0) = exponential_weight(theory)?;
    let canonical = canonical_form(theory, &l0)?;
    potential_degree(theory, &canonical.potential, 2.0)?;
    let c = dissipative_c(theory, variant)?;
    let d = theory.dim();
    let c_dot_h = (0..d).map(|mu| c[mu] * h[mu]).sum();
    let fam = PerturbationFamily::from(FamilyKind::DissipativeMixed { c: Some(c.clone()) });
    let psi = psi::lagrangian_along(theory, &c);
    let cond = total_divergence_condition(theory, &fam, &psi)?;
    let dl = fam.dl_depsilon(theory)?;
    let condition = check_identity(theory, &cond, &[&dl.poly, &theory.lagrangian]);
    let mut current = current_from_psi(theory, &fam, &psi, "j_diss")?;
    current.theorem = "dissipative".into();
    Ok(DissipativeCurrent { current, h, c, c_dot_h, condition })
}

// ---------------------------------------------------------------------------
// Finite invariance.

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct FiniteInvarianceResult {
    pub xi: f64,
    /// Standard deviation of `∂L_ε/∂ε|₀` over interior sites.
    pub deviation: f64,
    pub max_deviation: f64,
    pub threshold: f64,
    /// Set when `∂L_ε/∂ε|₀` reduced to a constant symbolically.
    pub symbolic: bool,
}

/// Standard deviation threshold relative to `1 + |ξ|`.
pub const XI_TOL: f64 = 1e-8;

pub fn finite_invariance_current(
    sol: &Solution,
    family: &PerturbationFamily,
) -> Result<(FiniteInvarianceResult, CurrentExpr), CurrentError> {
    let theory = sol.theory();
    let dl = family.dl_depsilon(theory)?;
    let g = sol.grid();
    let (m, n) = (g.slice_len(), g.time_slices());
    let vals = dl.compile(theory).evaluate(sol);
    let interior = &vals[m..(n - 1) * m];
    let k = interior.len() as f64;
    let mean = interior.iter().sum::<f64>() / k;
    let std = (interior.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k).sqrt();
    let max_deviation = interior.iter().fold(0.0f64, |a, v| a.max((v - mean).abs()));
    let symbolic_xi = match dl.poly.as_constant() {
        Some(c) if dl.imaginary => (c == 0.0).then_some(0.0),
        other => other,
    };
    let xi = symbolic_xi.unwrap_or(mean);
    let threshold = XI_TOL * (1.0 + mean.abs());
    let result = FiniteInvarianceResult { xi, deviation: std, max_deviation, threshold, symbolic: symbolic_xi.is_some() };
    if symbolic_xi.is_none() && std > threshold {
        return Err(Refusal::NotFinitelyInvariant { deviation: std, threshold }.into());
    }
    if dl.imaginary && xi != 0.0 {
        return Err(Refusal::FamilyParameters("a complex velocity with ξ ≠ 0 has no real current".into()).into());
    }
    let mut j = current_from_psi(theory, family, &psi::xi_x(theory, xi), "j_xi")?;
    j.theorem = "finite-invariance".into();
    Ok((result, j))
}
