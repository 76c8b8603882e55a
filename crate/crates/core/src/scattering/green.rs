//! Lattice Green's function of the simple cubic lattice,
//! `G(n) = ∫ d³k/(2π)³ e^{ik·n} / (2 Σ(1 − cos kᵢ))`, tabulated through its
//! heat-kernel representation `G(n) = ½ ∫₀^∞ Πᵢ e^{-t} I_{nᵢ}(t) dt`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::lattice::LatticeVector;
use crate::quadrature::gauss_legendre;

/// Fills `out[k] = e^{-t} I_k(t)` for `k < out.len()` by Miller's backward
/// recurrence normalised with `e^{-t}(I₀ + 2 Σ I_k) = 1`.
pub fn scaled_bessel_i(t: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if out.is_empty() {
        return;
    }
    if t == 0.0 {
        out[0] = 1.0;
        return;
    }
    let nmax = out.len() - 1;
    let start = nmax + (10.0 * t.sqrt()) as usize + 40;
    let mut b_next = 0.0_f64;
    let mut b = 1e-30_f64;
    let mut sum = 0.0_f64;
    for k in (1..=start).rev() {
        let b_prev = b_next + (2.0 * k as f64 / t) * b;
        if k <= nmax {
            out[k] = b;
        }
        sum += 2.0 * b;
        b_next = b;
        b = b_prev;
        if b.abs() > 1e250 {
            b *= 1e-250;
            b_next *= 1e-250;
            sum *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    out[0] = b;
    sum += b;
    out.iter_mut().for_each(|v| *v /= sum);
}

/// Coefficients of `e^{-t} I_n(t) √(2πt) ~ Σ_k c_k(n) t^{-k}`.
fn asymptotic_coefficients(n: usize, terms: usize) -> Vec<f64> {
    let mu = 4.0 * (n as f64).powi(2);
    let mut c = vec![1.0];
    for k in 1..terms {
        let odd = (2 * k - 1) as f64;
        let prev = c[k - 1];
        c.push(-prev * (mu - odd * odd) / (8.0 * k as f64));
    }
    c
}

/// Dense table of `G` on `{0..=extent}³`; other octants follow by symmetry.
#[derive(Debug)]
pub struct GreenTable {
    extent: usize,
    values: Vec<f64>,
}

impl GreenTable {
    pub fn compute(extent: usize) -> Self {
        const SERIES_TERMS: usize = 9;
        let l = extent;
        let t_max = f64::max(100.0, 64.0 * (l.max(1) as f64).powi(2));

        let mut nodes = gauss_legendre(24, 0.0, 1.0);
        let u_end = t_max.ln();
        let panels = (u_end / 0.1).ceil() as usize;
        let width = u_end / panels as f64;
        for p in 0..panels {
            for (u, w) in gauss_legendre(12, p as f64 * width, (p + 1) as f64 * width) {
                let t = u.exp();
                nodes.push((t, w * t));
            }
        }

        let bessel: Vec<Vec<f64>> = nodes
            .par_iter()
            .map(|&(t, _)| {
                let mut row = vec![0.0; l + 1];
                scaled_bessel_i(t, &mut row);
                row
            })
            .collect();

        let coeffs: Vec<Vec<f64>> = (0..=l).map(|n| asymptotic_coefficients(n, SERIES_TERMS)).collect();
        let tail_prefactor = 0.5 * (2.0 * std::f64::consts::PI).powf(-1.5);

        let mut triples = Vec::new();
        for i in 0..=l {
            for j in 0..=i {
                for k in 0..=j {
                    triples.push([i, j, k]);
                }
            }
        }
        let sorted_values: Vec<f64> = triples
            .par_iter()
            .map(|&[i, j, k]| {
                let mut acc = 0.0;
                for (row, &(_, w)) in bessel.iter().zip(&nodes) {
                    acc += w * row[i] * row[j] * row[k];
                }
                let (ci, cj, ck) = (&coeffs[i], &coeffs[j], &coeffs[k]);
                let mut tail = 0.0;
                for order in 0..SERIES_TERMS {
                    let mut p = 0.0;
                    for a in 0..=order {
                        for b in 0..=(order - a) {
                            p += ci[a] * cj[b] * ck[order - a - b];
                        }
                    }
                    let e = 0.5 + order as f64;
                    tail += p * t_max.powf(-e) / e;
                }
                0.5 * acc + tail_prefactor * tail
            })
            .collect();

        let side = l + 1;
        let mut values = vec![0.0; side * side * side];
        for (&[i, j, k], &v) in triples.iter().zip(&sorted_values) {
            for [a, b, c] in [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]] {
                values[(a * side + b) * side + c] = v;
            }
        }
        Self { extent, values }
    }

    /// Shared table for `extent`, computed once per process.
    pub fn shared(extent: usize) -> Arc<GreenTable> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GreenTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("green table cache");
        guard
            .entry(extent)
            .or_insert_with(|| Arc::new(GreenTable::compute(extent)))
            .clone()
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    /// `G(x)`, or `None` when some `|xᵢ|` exceeds the tabulated extent.
    pub fn get(&self, x: LatticeVector) -> Option<f64> {
        let side = self.extent + 1;
        let a = x.map(|c| c.unsigned_abs() as usize);
        if a.iter().any(|&c| c > self.extent) {
            return None;
        }
        Some(self.values[(a[0] * side + a[1]) * side + a[2]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_small_argument() {
        let mut out = [0.0; 4];
        scaled_bessel_i(0.5, &mut out);
        // e^{-1/2} I_0(1/2), e^{-1/2} I_1(1/2) from the power series.
        let series = |n: i32| -> f64 {
            let mut term = 0.25f64.powi(n) / (1..=n).map(f64::from).product::<f64>();
            let mut s = 0.0;
            for m in 0..30 {
                s += term;
                term *= 0.0625 / ((m + 1) as f64 * (m + 1 + n) as f64);
            }
            s * (-0.5f64).exp()
        };
        for n in 0..4 {
            assert!((out[n] - series(n as i32)).abs() < 1e-15, "n={n}");
        }
    }

    #[test]
    fn bessel_large_argument_normalised() {
        let mut out = vec![0.0; 80];
        scaled_bessel_i(5.0e5, &mut out);
        let asym = 1.0 / (2.0 * std::f64::consts::PI * 5.0e5).sqrt();
        assert!(((out[0] - asym) / asym).abs() < 1e-6);
        assert!(out.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn origin_and_neighbour() {
        let g = GreenTable::compute(4);
        let g0 = g.get([0, 0, 0]).unwrap();
        assert!((g0 - 2.0 * 0.126_365_504_929_331_5).abs() < 1e-12, "{g0}");
        let g1 = g.get([1, 0, 0]).unwrap();
        assert!((g0 - g1 - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(g.get([0, -3, 1]), g.get([1, 3, 0]));
        assert!(g.get([5, 0, 0]).is_none());
    }

    #[test]
    fn harmonic_away_from_origin() {
        let g = GreenTable::compute(12);
        for x in [[1, 0, 0], [2, 1, 0], [5, 3, 2], [11, 0, 1]] {
            let c = g.get(x).unwrap();
            let s: f64 = crate::lattice::NEIGHBOR_OFFSETS
                .iter()
                .map(|&d| g.get(crate::lattice::add(x, d)).unwrap() - c)
                .sum();
            assert!(s.abs() < 1e-12, "{x:?}: {s}");
        }
    }
}
