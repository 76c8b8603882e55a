//! Rayleigh quotients of the trial state, exactly on tiny boxes and by
//! Metropolis sampling on larger ones, with the split into free kinetic
//! energy and the two correction functionals.

mod exhaustive;
mod sampled;

pub use exhaustive::{decompose_terms, rayleigh_exhaustive, TermDecomposition, EXHAUSTIVE_CAP};
pub use sampled::{rayleigh_sampled, SamplerOptions};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Serialize)]
pub struct RayleighReport {
    pub method: Method,
    /// `⟨Ψ|H|Ψ⟩` with the `r0^{3(n+m)}` measure over ordered configurations;
    /// absent for sampled estimates.
    pub numerator: Option<f64>,
    pub denominator: Option<f64>,
    pub quotient: f64,
    /// Standard error from batch means; zero for exhaustive sums.
    pub error_bar: f64,
    pub decomposition: Option<TermDecomposition>,
    pub sampling: Option<SamplingStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingStats {
    pub steps: usize,
    pub walkers: usize,
    pub batches: usize,
    pub acceptance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonChoice {
    /// `√(I₃/I₂)`; `+∞` when `I₂ = 0`.
    pub epsilon: f64,
    /// `(1+ε)I₂ + (1+ε⁻¹)I₃` at the chosen `ε`.
    pub total: f64,
}

/// Minimiser of `(1+ε)I₂ + (1+ε⁻¹)I₃` over `ε > 0`, including the limits.
pub fn epsilon_optimize(i2: f64, i3: f64) -> EpsilonChoice {
    if i2 == 0.0 && i3 == 0.0 {
        return EpsilonChoice { epsilon: 1.0, total: 0.0 };
    }
    if i2 == 0.0 {
        return EpsilonChoice { epsilon: f64::INFINITY, total: i3 };
    }
    if i3 == 0.0 {
        return EpsilonChoice { epsilon: 0.0, total: i2 };
    }
    let epsilon = (i3 / i2).sqrt();
    EpsilonChoice { epsilon, total: split_total(i2, i3, epsilon) }
}

/// `(1+ε)I₂ + (1+ε⁻¹)I₃`.
pub fn split_total(i2: f64, i3: f64, epsilon: f64) -> f64 {
    let a = if i2 == 0.0 { 0.0 } else { (1.0 + epsilon) * i2 };
    let b = if i3 == 0.0 { 0.0 } else { (1.0 + 1.0 / epsilon) * i3 };
    a + b
}

/// Constant in `ε² = c (n+m)^{8/3} s³ / (ℓ² a n m)` implied by a measured `ε`.
pub fn epsilon_scaling_constant(epsilon: f64, n: usize, m: usize, s: f64, side: f64, a: f64) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    epsilon * epsilon * side * side * a * nf * mf / ((nf + mf).powf(8.0 / 3.0) * s.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_closed_forms() {
        let e = epsilon_optimize(2.0, 2.0);
        assert_eq!(e.epsilon, 1.0);
        assert_eq!(e.total, 8.0);
        let e = epsilon_optimize(3.0, 0.0);
        assert_eq!((e.epsilon, e.total), (0.0, 3.0));
        let e = epsilon_optimize(0.0, 5.0);
        assert!(e.epsilon.is_infinite() && e.total == 5.0);
        let e = epsilon_optimize(4.0, 1.0);
        assert_eq!(e.epsilon, 0.5);
        assert_eq!(e.total, 9.0);
    }
}
