//! Gauss–Legendre nodes mapped to arbitrary intervals.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Nodes and weights of an `order`-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let order = NonZeroUsize::new(order.max(1)).expect("order is non-zero");
    let rule = GaussLegendre::new(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = gauss_legendre(5, 0.0, 2.0);
        let v: f64 = rule.iter().map(|&(x, w)| w * x.powi(9)).sum();
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
    }
}
