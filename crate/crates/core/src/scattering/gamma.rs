//! The Brillouin-zone constant `γ = ½ ∫ d³k/(2π)³ [2 Σ(1 − cos kᵢ)]⁻¹`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// `1 − cos k` without cancellation near `k = 0`.
#[inline]
pub(crate) fn one_minus_cos(k: f64) -> f64 {
    let s = (0.5 * k).sin();
    2.0 * s * s
}

/// The integrand `1 / (2 Σ(1 − cos kᵢ))` before the measure and the leading ½.
#[inline]
pub fn dispersion_inverse(k: [f64; 3]) -> f64 {
    1.0 / (2.0 * (one_minus_cos(k[0]) + one_minus_cos(k[1]) + one_minus_cos(k[2])))
}

/// Midpoint rule with `q` cells per axis over the full zone `[-π, π]³`,
/// evaluated on one octant and multiplied by eight. `q` must be even so that
/// no node sits at `k = 0`.
pub fn midpoint_octant(q: usize) -> f64 {
    assert!(q >= 2 && q % 2 == 0, "midpoint order must be even");
    let half = q / 2;
    let h = 2.0 * std::f64::consts::PI / q as f64;
    let c: Vec<f64> = (0..half).map(|j| one_minus_cos((j as f64 + 0.5) * h)).collect();
    let rows: Vec<f64> = (0..half)
        .into_par_iter()
        .map(|i| {
            let ci = c[i];
            let mut row = 0.0;
            for &cj in &c {
                let cij = ci + cj;
                for &ck in &c {
                    row += 1.0 / (2.0 * (cij + ck));
                }
            }
            row
        })
        .collect();
    let sum: f64 = rows.iter().sum();
    0.5 * 8.0 * sum / (q as f64).powi(3)
}

/// The same midpoint rule summed over every cell of the full zone, without
/// exploiting symmetry.
pub fn midpoint_full_zone(q: usize) -> f64 {
    assert!(q >= 2 && q % 2 == 0, "midpoint order must be even");
    let h = 2.0 * std::f64::consts::PI / q as f64;
    let k: Vec<f64> = (0..q).map(|j| -std::f64::consts::PI + (j as f64 + 0.5) * h).collect();
    let rows: Vec<f64> = k
        .par_iter()
        .map(|&k1| {
            let mut row = 0.0;
            for &k2 in &k {
                for &k3 in &k {
                    row += dispersion_inverse([k1, k2, k3]);
                }
            }
            row
        })
        .collect();
    0.5 * rows.iter().sum::<f64>() / (q as f64).powi(3)
}

/// Tensor Gauss–Legendre on the octant after splitting it into three
/// pyramids `k₁ ≥ k₂, k₃` and mapping each to the unit cube
/// (`k₁ = u`, `k₂ = uv`, `k₃ = uw`, Jacobian `u²`), which removes the
/// `1/k²` singularity.
pub fn gauss_legendre_pyramids(order: usize) -> f64 {
    let pi = std::f64::consts::PI;
    let us = gauss_legendre(order, 0.0, pi);
    let vs = gauss_legendre(order, 0.0, 1.0);
    let rows: Vec<f64> = us
        .par_iter()
        .map(|&(u, wu)| {
            let cu = one_minus_cos(u);
            let cv: Vec<f64> = vs.iter().map(|&(v, _)| one_minus_cos(u * v)).collect();
            let mut acc = 0.0;
            for (a, &(_, wa)) in vs.iter().enumerate() {
                for (b, &(_, wb)) in vs.iter().enumerate() {
                    acc += wa * wb / (2.0 * (cu + cv[a] + cv[b]));
                }
            }
            wu * u * u * acc
        })
        .collect();
    0.5 * 3.0 * rows.iter().sum::<f64>() / pi.powi(3)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GammaEstimate {
    pub value: f64,
    /// Estimate from the preceding refinement, compared against `value`.
    pub previous: f64,
    pub relative_change: f64,
    /// Quadrature orders that were evaluated.
    pub orders: Vec<usize>,
    pub scheme: &'static str,
}

/// Refinement schedule for the midpoint scheme.
#[derive(Debug, Clone, Copy)]
pub struct GammaOptions {
    pub start_order: usize,
    pub max_order: usize,
    pub rel_tol: f64,
}

impl Default for GammaOptions {
    fn default() -> Self {
        Self {
            start_order: 32,
            max_order: 1024,
            // Far stricter than needed for γ alone; φ(0) uses the closed form
            // in γ and must match the tabulated Green's function to ~1e-14.
            rel_tol: 1e-10,
        }
    }
}

/// Midpoint rule with order doubling and Richardson elimination of the
/// `h`, `h³`, `h⁵` error terms. The estimate is accepted once two successive
/// values at the deepest available elimination level agree to `rel_tol`;
/// at least two elimination levels are always applied.
pub fn gamma_midpoint_richardson(opts: GammaOptions) -> Result<GammaEstimate> {
    if opts.start_order < 8 {
        return Err(Error::Precondition(format!(
            "quadrature order must be at least 8, got {}",
            opts.start_order
        )));
    }
    const POWERS: [i32; 3] = [1, 3, 5];
    let mut q = opts.start_order + opts.start_order % 2;
    let mut orders = Vec::new();
    let mut table: Vec<Vec<f64>> = vec![Vec::new()];
    let mut last_pair = (f64::NAN, f64::NAN);
    while q <= opts.max_order {
        orders.push(q);
        table[0].push(midpoint_octant(q));
        for level in 1..=POWERS.len() {
            let prev = &table[level - 1];
            if prev.len() < 2 {
                break;
            }
            let f = 2f64.powi(POWERS[level - 1]);
            let i = prev.len() - 2;
            let v = (f * prev[i + 1] - prev[i]) / (f - 1.0);
            if table.len() <= level {
                table.push(Vec::new());
            }
            table[level].push(v);
        }
        let top = table.iter().rposition(|row| row.len() >= 2);
        if let Some(level) = top {
            let row = &table[level];
            let (prev, last) = (row[row.len() - 2], row[row.len() - 1]);
            last_pair = (last, prev);
            let rel = ((last - prev) / last).abs();
            if level >= 2 && rel <= opts.rel_tol {
                return Ok(GammaEstimate {
                    value: last,
                    previous: prev,
                    relative_change: rel,
                    orders,
                    scheme: "midpoint-richardson",
                });
            }
        }
        q *= 2;
    }
    Err(Error::Convergence {
        last: last_pair.0,
        previous: last_pair.1,
    })
}

/// Gauss–Legendre pyramid scheme with order doubling until two successive
/// orders agree to `rel_tol`.
pub fn gamma_gauss_legendre(start_order: usize, max_order: usize, rel_tol: f64) -> Result<GammaEstimate> {
    let mut p = start_order.max(2);
    let mut orders = vec![p];
    let mut prev = gauss_legendre_pyramids(p);
    while p * 2 <= max_order {
        p *= 2;
        orders.push(p);
        let v = gauss_legendre_pyramids(p);
        let rel = ((v - prev) / v).abs();
        if rel <= rel_tol {
            return Ok(GammaEstimate {
                value: v,
                previous: prev,
                relative_change: rel,
                orders,
                scheme: "gauss-legendre-pyramids",
            });
        }
        prev = v;
    }
    Err(Error::Convergence {
        last: prev,
        previous: f64::NAN,
    })
}

/// Memoised [`gamma_midpoint_richardson`] keyed by the starting order.
pub(crate) fn cached_gamma(start_order: usize) -> Result<GammaEstimate> {
    static CACHE: OnceLock<Mutex<HashMap<usize, GammaEstimate>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(g) = cache.lock().expect("gamma cache").get(&start_order) {
        return Ok(g.clone());
    }
    let g = gamma_midpoint_richardson(GammaOptions {
        start_order,
        ..GammaOptions::default()
    })?;
    cache.lock().expect("gamma cache").insert(start_order, g.clone());
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: f64 = 0.126_365_504_929_331_5;

    #[test]
    fn corner_value() {
        let pi = std::f64::consts::PI;
        // 2 Σ(1 − cos π) = 12, and the ½ in front of the integral gives 1/24.
        assert!((0.5 * dispersion_inverse([pi, pi, pi]) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn octant_symmetry() {
        for q in [8, 14, 20] {
            let a = midpoint_octant(q);
            let b = midpoint_full_zone(q);
            assert!(((a - b) / b).abs() < 1e-12, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn richardson_converges() {
        let g = gamma_midpoint_richardson(GammaOptions::default()).unwrap();
        assert!((g.value - GAMMA).abs() < 1e-9, "{g:?}");
    }

    #[test]
    fn gauss_legendre_converges() {
        let g = gamma_gauss_legendre(8, 128, 1e-11).unwrap();
        assert!((g.value - GAMMA).abs() < 1e-10, "{g:?}");
    }

    #[test]
    fn refinement_cap_reports_iterates() {
        let err = gamma_midpoint_richardson(GammaOptions {
            start_order: 8,
            max_order: 16,
            rel_tol: 1e-6,
        })
        .unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }));
    }

    #[test]
    fn low_order_rejected() {
        let err = gamma_midpoint_richardson(GammaOptions {
            start_order: 4,
            ..GammaOptions::default()
        });
        assert!(matches!(err, Err(Error::Precondition(_))));
    }
}
