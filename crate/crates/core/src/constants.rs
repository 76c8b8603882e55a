//! Registry of the empirical constants used by the assembled bound, with
//! the calibration runs that measure them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::determinantal::{lemma2_bound, lemma3_ratio};
use crate::error::{Error, Result};
use crate::free_fermi::{kinetic_constant, measure_free_fits, OrbitalBasis};
use crate::lattice::{Boundary, BoxSpec};
use crate::scattering::{compute_gamma, LatticeSpec, Repulsion, ScatteringProfile};
use crate::trial_state::{build_f, build_g, xi_sum, RampShape, TrialState, DEFAULT_DELTA};
use crate::variational::{decompose_terms, epsilon_scaling_constant};

pub const GAMMA: &str = "gamma";
pub const DELTA: &str = "delta";
pub const KINETIC: &str = "kinetic";
pub const DENSITY_SQUARE: &str = "density_square";
pub const XI_SUM: &str = "xi_sum";
pub const MATRIX_NORM: &str = "matrix_norm";
pub const CUTOFF_LOSS: &str = "cutoff_loss";
pub const INTERACTION: &str = "interaction";
pub const I3: &str = "i3";
pub const FINAL_TERM: &str = "final_term";
pub const EPSILON_SCALING: &str = "epsilon_scaling";

const FROZEN: &str = include_str!("../data/constants.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constant {
    pub value: f64,
    /// Largest value seen in the calibration run the entry was frozen from.
    pub measured: Option<f64>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registry {
    pub version: u32,
    pub constants: BTreeMap<String, Constant>,
}

impl Registry {
    /// The registry checked into the repository.
    pub fn frozen() -> Self {
        Self::from_toml_str(FROZEN).expect("checked-in constants registry parses")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let reg: Registry = toml::from_str(s).map_err(|e| Error::Registry(e.to_string()))?;
        for name in [GAMMA, DELTA, KINETIC, INTERACTION, FINAL_TERM] {
            if !reg.constants.contains_key(name) {
                return Err(Error::Registry(format!("missing entry `{name}`")));
            }
        }
        for (name, c) in &reg.constants {
            if !(c.value.is_finite() && c.value >= 0.0) {
                return Err(Error::Registry(format!("entry `{name}` must be finite and non-negative")));
            }
        }
        Ok(reg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Registry(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("registry serialises")
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.constants
            .get(name)
            .map(|c| c.value)
            .ok_or_else(|| Error::Registry(format!("no entry `{name}`")))
    }
}

/// One calibrated quantity: the largest ratio seen over the instances run.
#[derive(Debug, Clone, Serialize)]
pub struct Measurement {
    pub name: &'static str,
    pub value: f64,
    pub instances: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calibration {
    Quick,
    Full,
}

fn max_of(name: &'static str, values: &[f64]) -> Measurement {
    Measurement {
        name,
        value: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        instances: values.len(),
    }
}

/// Re-measures every registry constant from the module-level estimates.
pub fn calibrate(level: Calibration) -> Result<Vec<Measurement>> {
    let spec = LatticeSpec::default();
    let full = level == Calibration::Full;
    let mut out = vec![Measurement { name: GAMMA, value: compute_gamma(&spec)?.value, instances: 1 }];

    let sizes: &[usize] = if full { &[6, 8, 10, 12, 16] } else { &[6, 8] };
    let (mut kin, mut dsq) = (Vec::new(), Vec::new());
    for &m in sizes {
        let lattice = BoxSpec::cubic(m, Boundary::Dirichlet, 1.0)?;
        let top = if full { (m * m * m / 4).min(120) } else { 20 };
        for n in 2..=top {
            kin.push(kinetic_constant(&lattice, n)?);
        }
        for n in [4, 10, 20] {
            dsq.push(measure_free_fits(&lattice, n)?.density_square);
        }
    }
    out.push(max_of(KINETIC, &kin));
    out.push(max_of(DENSITY_SQUARE, &dsq));

    let radii: &[f64] = if full { &[5.0, 10.0, 20.0] } else { &[5.0, 10.0] };
    let mut xi = Vec::new();
    for u in [Repulsion::Finite(1.0), Repulsion::HardCore] {
        let profile = ScatteringProfile::new(u, &spec, 2.0 * radii[radii.len() - 1] + 2.0)?;
        for &r in radii {
            xi.push(xi_sum(&build_f(&profile, r, DEFAULT_DELTA)?)?.measured_constant);
        }
    }
    out.push(max_of(XI_SUM, &xi));

    let mut l2 = Vec::new();
    for u in [Repulsion::Finite(1.0), Repulsion::HardCore] {
        let profile = ScatteringProfile::new(u, &spec, 12.0)?;
        let f = build_f(&profile, 2.0, DEFAULT_DELTA)?;
        let lattice = BoxSpec::cubic(12, Boundary::Dirichlet, 1.0)?;
        for n in [2, 5, 8] {
            let basis = OrbitalBasis::lowest(&lattice, n)?;
            for ys in [vec![[6, 6, 6]], vec![[1, 1, 1], [10, 10, 10]], vec![[2, 6, 6], [12, 6, 6]]] {
                let r = lemma2_bound(&basis, &f, &ys, 10.0, 1.0)?;
                l2.push(r.norm / (r.scattering_term + r.kinetic_term));
            }
        }
    }
    out.push(max_of(MATRIX_NORM, &l2));

    let mut l3 = Vec::new();
    let profile = ScatteringProfile::new(Repulsion::Finite(1.0), &spec, 8.0)?;
    let f = build_f(&profile, 2.0, DEFAULT_DELTA)?;
    let m = if full { 7 } else { 6 };
    let lattice = BoxSpec::cubic(m, Boundary::Dirichlet, 1.0)?;
    for n in if full { vec![2, 3] } else { vec![2] } {
        let basis = OrbitalBasis::lowest(&lattice, n)?;
        for s in [2.0, 3.0] {
            let g = build_g(s, RampShape::Linear, 1.0)?;
            let r = lemma3_ratio(&basis, &f, &g, &[[3, 3, 3]], 1.0)?;
            l3.push((1.0 - r.ratio).max(0.0) / r.scale);
        }
    }
    out.push(max_of(CUTOFF_LOSS, &l3));

    let (mut i3, mut eps) = (Vec::new(), Vec::new());
    let profile = ScatteringProfile::new(Repulsion::Finite(1.0), &spec, 8.0)?;
    let f = build_f(&profile, 2.0, DEFAULT_DELTA)?;
    let g = build_g(2.0, RampShape::Linear, 1.0)?;
    let cases: &[(usize, usize, usize)] = if full { &[(3, 2, 1), (3, 2, 2), (4, 2, 1)] } else { &[(3, 2, 1), (3, 2, 2)] };
    for &(m, n_up, n_down) in cases {
        let lattice = BoxSpec::cubic(m, Boundary::Dirichlet, 1.0)?;
        let state = TrialState::lowest(&lattice, n_up, n_down, f.clone(), g)?;
        let d = decompose_terms(&state, Repulsion::Finite(1.0), None)?;
        let report = crate::variational::rayleigh_exhaustive(&state, Repulsion::Finite(1.0))?;
        let norm = report.denominator.unwrap_or(1.0);
        let side = lattice.side_length();
        let (nf, mf) = (n_up as f64, n_down as f64);
        i3.push(d.i3 * side.powi(5) / ((nf.powf(8.0 / 3.0) + mf.powf(8.0 / 3.0)) * g.s().powi(3) * norm));
        if d.epsilon_optimal.is_finite() && d.epsilon_optimal > 0.0 {
            eps.push(epsilon_scaling_constant(d.epsilon_optimal, n_up, n_down, g.s(), side, f.scattering_length()));
        }
    }
    out.push(max_of(I3, &i3));
    out.push(max_of(EPSILON_SCALING, &eps));
    Ok(out)
}

/// The `ε`-optimised remainder constant `2√(2π c₃)` implied by an `I₃` constant.
pub fn final_term_from_i3(c3: f64) -> f64 {
    2.0 * (2.0 * std::f64::consts::PI * c3).sqrt()
}

/// Aggregate constant of the interaction bracket: the largest of the
/// per-lemma constants it absorbs.
pub fn interaction_from(measurements: &[Measurement]) -> f64 {
    measurements
        .iter()
        .filter(|m| matches!(m.name, KINETIC | DENSITY_SQUARE | XI_SUM | MATRIX_NORM | CUTOFF_LOSS))
        .map(|m| m.value)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_registry_loads() {
        let reg = Registry::frozen();
        assert!((reg.get(GAMMA).unwrap() - 0.126365504929).abs() < 1e-10);
        assert!(reg.get("nonexistent").is_err());
        let back = Registry::from_toml_str(&reg.to_toml_string()).unwrap();
        assert_eq!(back, reg);
    }

    #[test]
    fn frozen_values_dominate_quick_calibration() {
        let reg = Registry::frozen();
        let measured = calibrate(Calibration::Quick).unwrap();
        for m in &measured {
            let frozen = reg.get(m.name).unwrap();
            if m.name == GAMMA {
                assert!((frozen - m.value).abs() < 1e-10);
            } else {
                assert!(frozen >= m.value, "{} frozen {frozen} < measured {}", m.name, m.value);
            }
        }
        assert!(reg.get(INTERACTION).unwrap() >= interaction_from(&measured));
        let c3 = reg.get(I3).unwrap();
        assert!(reg.get(FINAL_TERM).unwrap() >= final_term_from_i3(c3));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = Registry::frozen().to_toml_string() + "\nextra = 1\n";
        assert!(Registry::from_toml_str(&text).is_err());
    }
}
