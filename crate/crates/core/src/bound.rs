//! Assembly of the closed-form energy upper bound: parameter choices, the
//! strong- and weak-coupling branches, box localization and the spin
//! polarization curve derived from the bound.

use std::f64::consts::PI;

use serde::Serialize;

use crate::constants::{self, Registry};
use crate::determinantal::exhaustive;
use crate::error::{Error, Result};
use crate::free_fermi::{continuum_energy_density, fermi_prefactor, OrbitalBasis};
use crate::lattice::{Boundary, BoxSpec};
use crate::scattering::{scattering_length_with_gamma, Repulsion};

/// Relative tolerance for treating `ρℓ³` as already integral.
const INTEGER_SNAP: f64 = 1e-9;
/// Relative tolerance of the weak-coupling identity `U r0³ = 8πa(1 + γUr0²)`.
const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub gamma: f64,
    pub delta: f64,
    pub kinetic: f64,
    pub interaction: f64,
    pub final_term: f64,
}

impl BoundConstants {
    pub fn from_registry(reg: &Registry) -> Result<Self> {
        Ok(Self {
            gamma: reg.get(constants::GAMMA)?,
            delta: reg.get(constants::DELTA)?,
            kinetic: reg.get(constants::KINETIC)?,
            interaction: reg.get(constants::INTERACTION)?,
            final_term: reg.get(constants::FINAL_TERM)?,
        })
    }

    pub fn frozen() -> Self {
        Self::from_registry(&Registry::frozen()).expect("frozen registry has every bound constant")
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Strong,
    Weak,
}

/// Strong iff `a/r0 > δ⁻¹ x^{2/9}` with `x = ρ^{1/3} a`.
pub fn regime(a: f64, r0: f64, x: f64, delta: f64) -> Regime {
    if a / r0 > x.powf(2.0 / 9.0) / delta {
        Regime::Strong
    } else {
        Regime::Weak
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Parameters {
    /// `ρ^{1/3} a`.
    pub x: f64,
    pub r: f64,
    pub s: f64,
    pub ell: f64,
    /// Particle numbers per box; integral, but kept as `f64` since they
    /// exceed `u64` at small `x`.
    pub n: f64,
    pub m: f64,
    pub eps_up: f64,
    pub eps_down: f64,
}

fn fill(target: f64) -> (f64, f64) {
    let nearest = target.round();
    let count = if (target - nearest).abs() <= INTEGER_SNAP * target.max(1.0) {
        nearest
    } else {
        target.ceil()
    };
    (count, (count - target).max(0.0))
}

fn check_densities(rho_up: f64, rho_down: f64, r0: f64) -> Result<f64> {
    if !(rho_up >= 0.0 && rho_down >= 0.0 && (rho_up + rho_down).is_finite()) {
        return Err(Error::Precondition("densities must be finite and non-negative".into()));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::Precondition(format!("lattice spacing must be positive, got {r0}")));
    }
    let rho = rho_up + rho_down;
    if rho <= 0.0 {
        return Err(Error::Precondition("total density must be positive".into()));
    }
    if rho * r0.powi(3) > 1.0 {
        return Err(Error::Precondition(format!("density {rho} exceeds the lattice ceiling 1/r0³")));
    }
    Ok(rho)
}

/// `R = a x^{-2/9}`, `s = 6R`, `ℓ = ρ^{-1/3} x^{-11/9}` and the rounded-up
/// particle numbers per box.
pub fn choose_parameters(rho_up: f64, rho_down: f64, a: f64, r0: f64) -> Result<Parameters> {
    let rho = check_densities(rho_up, rho_down, r0)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Precondition(format!("scattering length must be positive, got {a}")));
    }
    let x = rho.cbrt() * a;
    if x >= 1.0 {
        return Err(Error::Regime {
            expected: "dilute",
            detail: format!("ρa³ = {:.6e} ≥ 1", x.powi(3)),
        });
    }
    let r = a * x.powf(-2.0 / 9.0);
    let s = 6.0 * r;
    let ell = rho.cbrt().recip() * x.powf(-11.0 / 9.0);
    let vol = ell.powi(3);
    let (n, eps_up) = fill(rho_up * vol);
    let (m, eps_down) = fill(rho_down * vol);
    debug_assert!(s >= 5.0 * r);
    Ok(Parameters { x, r, s, ell, n, m, eps_up, eps_down })
}

/// Raw values of the terms in the interaction bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BracketTerms {
    /// `aR²/s³`.
    pub scattering_tail: f64,
    /// `(n+m)^{2/3}(s/ℓ)²`.
    pub cutoff_gradient: f64,
    /// `a/R`.
    pub boundary: f64,
    /// `n^{-1/3}`, zero for an empty species.
    pub fermi_up: f64,
    pub fermi_down: f64,
    /// `(n+m)^{8/3}(s/ℓ)⁵`.
    pub cutoff_loss: f64,
}

impl BracketTerms {
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("scattering_tail", self.scattering_tail),
            ("cutoff_gradient", self.cutoff_gradient),
            ("boundary", self.boundary),
            ("fermi_up", self.fermi_up),
            ("fermi_down", self.fermi_down),
            ("cutoff_loss", self.cutoff_loss),
        ]
    }

    pub fn sum(&self) -> f64 {
        self.named().iter().map(|(_, v)| v).sum()
    }
}

/// Raw values of the terms in the kinetic bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KineticTerms {
    pub fermi_up: f64,
    pub fermi_down: f64,
    /// `(n+m)^{2/3}(r0/ℓ)²`.
    pub lattice: f64,
}

impl KineticTerms {
    pub fn sum(&self) -> f64 {
        self.fermi_up + self.fermi_down + self.lattice
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub rho_up: f64,
    pub rho_down: f64,
    /// `+∞` for hard-core.
    pub u: f64,
    pub r0: f64,
    pub a: f64,
    pub gamma: f64,
    pub delta: f64,
    pub x: f64,
    pub regime: Regime,
    /// Branch whose formula produced `total`.
    pub branch: Regime,
    pub parameters: Option<Parameters>,
    pub kinetic_terms: Option<KineticTerms>,
    pub bracket: Option<BracketTerms>,
    /// Every contribution below is an energy per volume.
    pub free_gas: f64,
    pub kinetic_correction: f64,
    pub interaction: f64,
    pub interaction_correction: f64,
    pub remainder: f64,
    pub total: f64,
    pub e0_asymptote: f64,
    pub mean_field: f64,
    /// `(total − e₀ − 8πaρ↑ρ↓)/(aρ²)`.
    pub epsilon: f64,
    pub identity_residual: Option<f64>,
    /// The bound is `+∞` (first-order branch at hard core).
    pub vacuous: bool,
    /// Bracket terms that are not small, by name.
    pub violations: Vec<String>,
}

struct Setup {
    rho: f64,
    u: f64,
    a: f64,
    x: f64,
    regime: Regime,
}

fn setup(rho_up: f64, rho_down: f64, u: Repulsion, r0: f64, c: &BoundConstants) -> Result<Setup> {
    let rho = check_densities(rho_up, rho_down, r0)?;
    if !(c.delta > 0.0) {
        return Err(Error::Precondition(format!("regime threshold must be positive, got {}", c.delta)));
    }
    let a = scattering_length_with_gamma(u, c.gamma, r0)?;
    let x = rho.cbrt() * a;
    if x >= 1.0 {
        return Err(Error::Regime {
            expected: "dilute",
            detail: format!("ρa³ = {:.6e} ≥ 1", x.powi(3)),
        });
    }
    Ok(Setup { rho, u: u.value(), a, x, regime: regime(a, r0, x, c.delta) })
}

fn effective_error(total: f64, e0: f64, mean_field: f64, a: f64, rho: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    (total - e0 - mean_field) / (a * rho * rho)
}

/// `E/ℓ³` for a box of side `ℓ` tiling a cube of side `lambda_side`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Localized {
    pub density: f64,
    pub boxes: f64,
    pub total: f64,
}

pub fn localize(energy: f64, ell: f64, lambda_side: f64) -> Result<Localized> {
    if !(ell > 0.0 && lambda_side > 0.0) {
        return Err(Error::Precondition("box sides must be positive".into()));
    }
    let ratio = lambda_side / ell;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
        let nearest = k.max(1.0) * ell;
        return Err(Error::Precondition(format!(
            "side {lambda_side} is not a multiple of ℓ = {ell}; nearest admissible side is {nearest}"
        )));
    }
    let boxes = k.powi(3);
    Ok(Localized { density: energy / ell.powi(3), boxes, total: boxes * energy })
}

/// Evaluates every strong-coupling term regardless of regime and of the
/// smallness of the bracket; offending bracket terms are listed in
/// `violations`.
pub fn evaluate_strong(rho_up: f64, rho_down: f64, u: Repulsion, r0: f64, c: &BoundConstants) -> Result<BoundReport> {
    let st = setup(rho_up, rho_down, u, r0, c)?;
    let p = choose_parameters(rho_up, rho_down, st.a, r0)?;
    let Parameters { r, s, ell, n, m, .. } = p;
    let a = st.a;
    let inv_cbrt = |k: f64| if k > 0.0 { k.cbrt().recip() } else { 0.0 };
    let total_n = n + m;

    let kinetic_terms = KineticTerms {
        fermi_up: inv_cbrt(n),
        fermi_down: inv_cbrt(m),
        lattice: total_n.powf(2.0 / 3.0) * (r0 / ell).powi(2),
    };
    let bracket = BracketTerms {
        scattering_tail: a * r * r / s.powi(3),
        cutoff_gradient: total_n.powf(2.0 / 3.0) * (s / ell).powi(2),
        boundary: a / r,
        fermi_up: inv_cbrt(n),
        fermi_down: inv_cbrt(m),
        cutoff_loss: total_n.powf(8.0 / 3.0) * (s / ell).powi(5),
    };

    let vol = ell.powi(3);
    let free_box = fermi_prefactor() * (n.powf(5.0 / 3.0) + m.powf(5.0 / 3.0)) / (ell * ell);
    let free_gas = localize(free_box, ell, ell)?.density;
    let kinetic_correction = free_gas * c.kinetic * kinetic_terms.sum();
    let interaction = 8.0 * PI * a * n * m / vol / vol;
    let interaction_correction = if n * m > 0.0 { interaction * c.interaction * bracket.sum() } else { 0.0 };
    let remainder = c.final_term * total_n.powf(7.0 / 3.0) * s.powf(1.5) * a.sqrt() / ell.powi(4) / vol;
    let total = free_gas + kinetic_correction + interaction + interaction_correction + remainder;

    let e0 = continuum_energy_density(rho_up, rho_down);
    let mean_field = 8.0 * PI * a * rho_up * rho_down;
    // Excess of the rounded-up particle numbers, formed without cancellation.
    let excess = |eps: f64, rho: f64| if rho > 0.0 { eps / (rho * vol) } else { 0.0 };
    let (t_up, t_down) = (excess(p.eps_up, rho_up), excess(p.eps_down, rho_down));
    let growth = |t: f64| (5.0 / 3.0 * t.ln_1p()).exp_m1();
    let free_excess = fermi_prefactor() * (rho_up.powf(5.0 / 3.0) * growth(t_up) + rho_down.powf(5.0 / 3.0) * growth(t_down));
    let interaction_excess = mean_field * (t_up + t_down + t_up * t_down);
    let correction = free_excess + kinetic_correction + interaction_excess + interaction_correction + remainder;
    let violations = bracket
        .named()
        .iter()
        .filter(|(_, v)| *v >= 1.0)
        .map(|(name, _)| name.to_string())
        .collect();
    Ok(BoundReport {
        rho_up,
        rho_down,
        u: st.u,
        r0,
        a,
        gamma: c.gamma,
        delta: c.delta,
        x: st.x,
        regime: st.regime,
        branch: Regime::Strong,
        parameters: Some(p),
        kinetic_terms: Some(kinetic_terms),
        bracket: Some(bracket),
        free_gas,
        kinetic_correction,
        interaction,
        interaction_correction,
        remainder,
        total,
        e0_asymptote: e0,
        mean_field,
        epsilon: correction / (a * st.rho * st.rho),
        identity_residual: None,
        vacuous: false,
        violations,
    })
}

/// The strong-coupling bound, refusing points outside its regime or whose
/// bracket terms are not small.
pub fn assemble_strong(rho_up: f64, rho_down: f64, u: Repulsion, r0: f64, c: &BoundConstants) -> Result<BoundReport> {
    let report = evaluate_strong(rho_up, rho_down, u, r0, c)?;
    if report.regime != Regime::Strong {
        return Err(Error::Regime {
            expected: "strong",
            detail: format!("a/r0 = {:.6e} ≤ δ⁻¹x^(2/9) = {:.6e}", report.a / r0, report.x.powf(2.0 / 9.0) / c.delta),
        });
    }
    if let Some(b) = report.bracket {
        if let Some((term, value)) = b.named().into_iter().find(|(_, v)| *v >= 1.0) {
            return Err(Error::AssumptionViolation { term: term.into(), value });
        }
    }
    Ok(report)
}

/// First-order bound `e₀ + U r0³ ρ↑ρ↓`, with the lattice scattering identity
/// checked along the way.
pub fn assemble_weak(rho_up: f64, rho_down: f64, u: Repulsion, r0: f64, c: &BoundConstants) -> Result<BoundReport> {
    let st = setup(rho_up, rho_down, u, r0, c)?;
    if st.regime != Regime::Weak {
        return Err(Error::Regime {
            expected: "weak",
            detail: format!("a/r0 = {:.6e} > δ⁻¹x^(2/9) = {:.6e}", st.a / r0, st.x.powf(2.0 / 9.0) / c.delta),
        });
    }
    let e0 = continuum_energy_density(rho_up, rho_down);
    let mean_field = 8.0 * PI * st.a * rho_up * rho_down;
    let (interaction, identity_residual) = match u {
        Repulsion::HardCore => (f64::INFINITY, None),
        Repulsion::Finite(uv) => {
            let lhs = uv * r0.powi(3);
            let rhs = 8.0 * PI * st.a * (1.0 + c.gamma * uv * r0 * r0);
            let residual = if lhs == 0.0 { rhs.abs() } else { ((lhs - rhs) / lhs).abs() };
            if residual > IDENTITY_TOL {
                return Err(Error::invariant("U r0³ = 8πa(1 + γUr0²)", format!("relative residual {residual:.3e}")));
            }
            (lhs * rho_up * rho_down, Some(residual))
        }
    };
    let total = e0 + interaction;
    Ok(BoundReport {
        rho_up,
        rho_down,
        u: st.u,
        r0,
        a: st.a,
        gamma: c.gamma,
        delta: c.delta,
        x: st.x,
        regime: st.regime,
        branch: Regime::Weak,
        parameters: None,
        kinetic_terms: None,
        bracket: None,
        free_gas: e0,
        kinetic_correction: 0.0,
        interaction,
        interaction_correction: 0.0,
        remainder: 0.0,
        total,
        e0_asymptote: e0,
        mean_field,
        epsilon: effective_error(total, e0, mean_field, st.a, st.rho),
        identity_residual,
        vacuous: !total.is_finite(),
        violations: Vec::new(),
    })
}

/// Dispatches on the regime; the strong branch is evaluated with violations
/// reported rather than raised.
pub fn assemble(rho_up: f64, rho_down: f64, u: Repulsion, r0: f64, c: &BoundConstants) -> Result<BoundReport> {
    let st = setup(rho_up, rho_down, u, r0, c)?;
    match st.regime {
        Regime::Weak => assemble_weak(rho_up, rho_down, u, r0, c),
        Regime::Strong => evaluate_strong(rho_up, rho_down, u, r0, c),
    }
}

/// Finite upper bound at the point: the regime's own branch, or the strong
/// formula where the first-order branch is vacuous.
pub fn finite_bound(rho_up: f64, rho_down: f64, u: Repulsion, r0: f64, c: &BoundConstants) -> Result<BoundReport> {
    let report = assemble(rho_up, rho_down, u, r0, c)?;
    if report.vacuous {
        evaluate_strong(rho_up, rho_down, u, r0, c)
    } else {
        Ok(report)
    }
}

/// Check that plane-wave determinants on a periodic cube have the constant
/// density overlap `Σ_x r0⁶ ρ_N(x) ρ_M(x) = NM/V` (natural units).
#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOverlap {
    pub sites: usize,
    pub n_up: usize,
    pub n_down: usize,
    pub overlap: f64,
    pub expected: f64,
    pub residual: f64,
    /// Largest deviation of the orbital density from the exhaustive marginal.
    pub marginal_residual: f64,
}

pub fn periodic_overlap(sites: usize, n_up: usize, n_down: usize) -> Result<PeriodicOverlap> {
    let lattice = BoxSpec::cubic(sites, Boundary::Periodic, 1.0)?;
    let v = lattice.volume();
    let up = OrbitalBasis::lowest(&lattice, n_up)?;
    let down = OrbitalBasis::lowest(&lattice, n_down)?;
    let ones = vec![1.0; v];
    let mut overlap = 0.0;
    let mut marginal_residual: f64 = 0.0;
    for x in 0..v {
        let (ru, rd) = (up.density(x), down.density(x));
        overlap += ru * rd;
        for (basis, rho) in [(&up, ru), (&down, rd)] {
            if basis.n() > 0 {
                let exact = exhaustive::marginal_density(basis, &ones, &[x])?;
                marginal_residual = marginal_residual.max((exact - rho).abs());
            }
        }
    }
    let expected = (n_up * n_down) as f64 / v as f64;
    Ok(PeriodicOverlap {
        sites,
        n_up,
        n_down,
        overlap,
        expected,
        residual: (overlap - expected).abs(),
        marginal_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PolarizationPoint {
    pub x: f64,
    pub rho: f64,
    pub a: f64,
    pub regime: Regime,
    pub branch: Regime,
    /// Upper bound on the ground-state energy density at the balanced split.
    pub upper_bound: f64,
    /// Split `(ρ↑ − ρ↓)/ρ` minimising `e₀ + 8πaρ↑ρ↓`.
    pub argmin_split: f64,
    /// Largest `|ρ↑ − ρ↓|/ρ` whose free energy stays below the upper bound;
    /// bounds `S/S_max`.
    pub polarization_bound: f64,
}

fn split_densities(rho: f64, p: f64) -> (f64, f64) {
    (0.5 * rho * (1.0 + p), 0.5 * rho * (1.0 - p))
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let (c, d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(c) <= f(d) {
            hi = d;
        } else {
            lo = c;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// For each `x = ρ^{1/3}a` in `grid`, the spin polarization permitted by
/// comparing the balanced upper bound with the free (lower-bound) energy of
/// polarized splits.
pub fn polarization_curve(u: Repulsion, r0: f64, grid: &[f64], c: &BoundConstants) -> Result<Vec<PolarizationPoint>> {
    let a = scattering_length_with_gamma(u, c.gamma, r0)?;
    if !(a > 0.0) {
        return Err(Error::Precondition("polarization curve needs a positive scattering length".into()));
    }
    grid.iter()
        .map(|&x| {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::Regime { expected: "dilute", detail: format!("x = {x} outside (0, 1)") });
            }
            let rho = (x / a).powi(3);
            let report = finite_bound(0.5 * rho, 0.5 * rho, u, r0, c)?;
            let upper = report.total;
            let free = |p: f64| {
                let (ru, rd) = split_densities(rho, p);
                continuum_energy_density(ru, rd)
            };
            let polarization_bound = if free(1.0) <= upper {
                1.0
            } else {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if free(mid) <= upper {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-16 {
                        break;
                    }
                }
                lo
            };
            let asymptotic = |p: f64| {
                let (ru, rd) = split_densities(rho, p);
                continuum_energy_density(ru, rd) + 8.0 * PI * a * ru * rd
            };
            let coarse = (0..=1000)
                .map(|i| i as f64 / 1000.0)
                .min_by(|&p, &q| asymptotic(p).total_cmp(&asymptotic(q)))
                .unwrap_or(0.0);
            let mut argmin_split = golden_min(asymptotic, (coarse - 1e-3).max(0.0), (coarse + 1e-3).min(1.0));
            if asymptotic(0.0) <= asymptotic(argmin_split) {
                argmin_split = 0.0;
            }
            Ok(PolarizationPoint {
                x,
                rho,
                a,
                regime: report.regime,
                branch: report.branch,
                upper_bound: upper,
                argmin_split,
                polarization_bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frozen() -> BoundConstants {
        BoundConstants::frozen()
    }

    #[test]
    fn parameter_power_laws() {
        let a: f64 = 0.5;
        let rho = (1e-3 / a).powi(3);
        let p = choose_parameters(0.5 * rho, 0.5 * rho, a, 1e-3).unwrap();
        assert_relative_eq!(p.x, 1e-3, max_relative = 1e-12);
        assert_relative_eq!(p.r / a, 4.641588833612779, max_relative = 1e-9);
        assert_relative_eq!(p.ell * rho.cbrt(), 4641.588833612779, max_relative = 1e-9);
        assert_eq!(p.s / p.r, 6.0);
        assert!(p.n.fract() == 0.0 && p.m.fract() == 0.0);
        assert!((0.0..1.0).contains(&p.eps_up) && (0.0..1.0).contains(&p.eps_down));
    }

    #[test]
    fn integral_filling_has_no_excess() {
        let (n, eps) = fill(1000.0 * (1.0 + 1e-13));
        assert_eq!((n, eps), (1000.0, 0.0));
        let (n, eps) = fill(999.5);
        assert_eq!(n, 1000.0);
        assert_relative_eq!(eps, 0.5);
    }

    #[test]
    fn dense_points_are_rejected() {
        assert!(matches!(choose_parameters(1.0, 1.0, 1.0, 0.1), Err(Error::Regime { .. })));
        assert!(choose_parameters(0.5, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_coupling_is_the_free_gas() {
        let c = frozen();
        let r = assemble(0.01, 0.02, Repulsion::zero(), 1.0, &c).unwrap();
        assert_eq!(r.branch, Regime::Weak);
        assert_eq!(r.total, continuum_energy_density(0.01, 0.02));
        assert_eq!(r.epsilon, 0.0);
    }

    #[test]
    fn weak_correction_factor() {
        let c = frozen();
        let r = assemble_weak(1e-4, 1e-4, Repulsion::Finite(0.1), 1.0, &c).unwrap();
        let factor = r.interaction / r.mean_field;
        assert_relative_eq!(factor, 1.0 + 0.1 * c.gamma, max_relative = 1e-12);
        assert_relative_eq!(factor, 1.012636550493, max_relative = 1e-11);
        assert!(r.identity_residual.unwrap() < 1e-12);
    }

    #[test]
    fn hard_core_first_order_bound_is_vacuous() {
        let r = assemble(1e-6, 1e-6, Repulsion::HardCore, 1.0, &frozen()).unwrap();
        assert!(r.vacuous && r.total.is_infinite());
        let finite = finite_bound(1e-6, 1e-6, Repulsion::HardCore, 1.0, &frozen()).unwrap();
        assert_eq!(finite.branch, Regime::Strong);
        assert!(finite.total.is_finite());
    }

    #[test]
    fn regime_dichotomy() {
        let c = frozen().with_delta(10.0);
        for rho in [1e-30, 1e-20, 1e-12, 1e-6, 1e-3] {
            let s = assemble_strong(rho, rho, Repulsion::HardCore, 1.0, &c);
            let w = assemble_weak(rho, rho, Repulsion::HardCore, 1.0, &c);
            let strong_regime = !matches!(s, Err(Error::Regime { .. }));
            let weak_regime = !matches!(w, Err(Error::Regime { .. }));
            assert!(strong_regime ^ weak_regime, "rho = {rho}");
        }
    }

    #[test]
    fn strict_strong_names_the_offending_term() {
        let c = frozen().with_delta(10.0);
        match assemble_strong(1e-30, 1e-30, Repulsion::HardCore, 1.0, &c) {
            Err(Error::AssumptionViolation { term, value }) => {
                assert_eq!(term, "cutoff_loss");
                assert!(value >= 1.0);
            }
            other => panic!("expected a violation, got {other:?}"),
        }
    }

    #[test]
    fn empty_species_drops_the_interaction() {
        let r = evaluate_strong(0.0, 1e-9, Repulsion::HardCore, 1.0, &frozen()).unwrap();
        let p = r.parameters.unwrap();
        assert_eq!(p.n, 0.0);
        assert_eq!(r.interaction, 0.0);
        assert_eq!(r.interaction_correction, 0.0);
        assert_eq!(r.mean_field, 0.0);
        assert!(r.total >= r.e0_asymptote);
    }

    #[test]
    fn effective_error_without_cancellation() {
        let c = frozen();
        let a = scattering_length_with_gamma(Repulsion::HardCore, c.gamma, 1.0).unwrap();
        let at = |x: f64| {
            let rho = (x / a).powi(3);
            evaluate_strong(0.3 * rho, 0.7 * rho, Repulsion::HardCore, 1.0, &c).unwrap()
        };
        for x in [1e-2, 1e-3] {
            let r = at(x);
            let rho = r.rho_up + r.rho_down;
            let naive = (r.total - r.e0_asymptote - r.mean_field) / (a * rho * rho);
            assert_relative_eq!(r.epsilon, naive, max_relative = 1e-8);
        }
        let ratio = at(1e-30).epsilon / at(1e-20).epsilon;
        assert_relative_eq!(ratio, 1e-10f64.powf(2.0 / 9.0), max_relative = 1e-2);
    }

    #[test]
    fn localization() {
        let one = localize(5.0, 2.0, 2.0).unwrap();
        assert_eq!((one.density, one.boxes, one.total), (5.0 / 8.0, 1.0, 5.0));
        let eight = localize(5.0, 2.0, 4.0).unwrap();
        assert_eq!((eight.density, eight.boxes, eight.total), (5.0 / 8.0, 8.0, 40.0));
        let err = localize(5.0, 2.0, 5.0).unwrap_err().to_string();
        assert!(err.contains("nearest admissible side is 6"), "{err}");
    }

    #[test]
    fn plane_wave_overlap() {
        let r = periodic_overlap(4, 2, 2).unwrap();
        assert_relative_eq!(r.expected, 4.0 / 64.0);
        assert!(r.residual < 1e-12, "{r:?}");
        assert!(r.marginal_residual < 1e-12, "{r:?}");
    }

    #[test]
    fn bracket_scaling_exponents() {
        let c = frozen();
        let a = scattering_length_with_gamma(Repulsion::HardCore, c.gamma, 1.0).unwrap();
        let xs = [1e-5, 1e-4, 1e-3, 1e-2];
        let reports: Vec<_> = xs
            .iter()
            .map(|x| {
                let rho = (x / a).powi(3);
                evaluate_strong(0.5 * rho, 0.5 * rho, Repulsion::HardCore, 1.0, &c).unwrap()
            })
            .collect();
        let slope = |f: &dyn Fn(&BoundReport) -> f64| {
            let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let ly: Vec<f64> = reports.iter().map(|r| f(r).ln()).collect();
            crate::free_fermi::linear_fit(&lx, &ly).1
        };
        let b = |r: &BoundReport| r.bracket.unwrap();
        let norm = |r: &BoundReport| r.a * (r.rho_up + r.rho_down).powi(2);
        let checks: [(&str, f64, f64); 6] = [
            ("scattering_tail", 2.0 / 9.0, slope(&|r| b(r).scattering_tail)),
            ("cutoff_gradient", 14.0 / 9.0, slope(&|r| b(r).cutoff_gradient)),
            ("boundary", 2.0 / 9.0, slope(&|r| b(r).boundary)),
            ("fermi_up", 11.0 / 9.0, slope(&|r| b(r).fermi_up)),
            ("cutoff_loss", 2.0 / 9.0, slope(&|r| b(r).cutoff_loss)),
            ("remainder", 2.0 / 3.0, slope(&|r| r.remainder / norm(r))),
        ];
        for (name, want, got) in checks {
            assert!((got - want).abs() <= 0.05 * want, "{name}: slope {got}, expected {want}");
        }
    }
}
