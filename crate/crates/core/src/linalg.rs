//! Small dense helpers: in-place determinants for tiny matrices, subset
//! enumeration and binomial coefficients.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use rayon::prelude::*;

/// Largest matrix size handled by the stack-allocated determinant.
pub const MAX_SMALL: usize = 8;

/// Determinant of the row-major `n × n` matrix in `a` by Gaussian
/// elimination with partial pivoting. Destroys `a`.
pub fn det_in_place<T>(a: &mut [T], n: usize) -> T
where
    T: ComplexField<RealField = f64> + Copy,
{
    let mut det = T::one();
    for col in 0..n {
        let mut p = col;
        let mut best = a[col * n + col].modulus();
        for r in col + 1..n {
            let m = a[r * n + col].modulus();
            if m > best {
                best = m;
                p = r;
            }
        }
        if best == 0.0 {
            return T::zero();
        }
        if p != col {
            for c in 0..n {
                a.swap(col * n + c, p * n + c);
            }
            det = -det;
        }
        let piv = a[col * n + col];
        det *= piv;
        for r in col + 1..n {
            let f = a[r * n + col] / piv;
            for c in col + 1..n {
                let v = a[col * n + c];
                a[r * n + c] -= f * v;
            }
        }
    }
    det
}

/// `C(n, k)` as a float (exact for the sizes used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C(n, k)` in integers, saturating at `u128::MAX`.
pub fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Advances a strictly increasing index tuple drawn from `0..v` to the next
/// one in lexicographic order. Returns `false` after the last tuple.
pub fn next_combination(c: &mut [usize], v: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < v - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `Σ f(S)` over all `k`-subsets `S ⊂ 0..v` (sorted), parallel over the
/// smallest element and reduced in a fixed order.
pub fn sum_over_subsets<F>(v: usize, k: usize, f: F) -> f64
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if k == 0 {
        return f(&[]);
    }
    if k > v {
        return 0.0;
    }
    let parts: Vec<f64> = (0..=v - k)
        .into_par_iter()
        .map(|first| {
            let mut c: Vec<usize> = (0..k).map(|i| first + i).collect();
            let mut acc = 0.0;
            loop {
                acc += f(&c);
                // The tail only moves forward, so it stays above `first`.
                if k == 1 || !next_combination(&mut c[1..], v) {
                    break;
                }
            }
            acc
        })
        .collect();
    parts.iter().sum()
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_count() {
        let mut c = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut c, 6) {
            count += 1;
        }
        assert_eq!(count, 20);
        let mut seen = 0.0;
        let s = sum_over_subsets(7, 3, |_| 1.0);
        seen += s;
        assert_eq!(seen, 35.0);
        assert_eq!(sum_over_subsets(5, 1, |c| c[0] as f64), 10.0);
    }

    #[test]
    fn subset_sum_matches_serial() {
        let weight = |c: &[usize]| c.iter().map(|&x| (x as f64 + 1.0).ln()).product::<f64>();
        let mut c = vec![0, 1, 2, 3];
        let mut serial = weight(&c);
        while next_combination(&mut c, 9) {
            serial += weight(&c);
        }
        assert!((sum_over_subsets(9, 4, weight) - serial).abs() < 1e-12 * serial);
    }

    #[test]
    fn small_determinants() {
        let mut a = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        assert!((det_in_place(&mut a, 3) - 18.0).abs() < 1e-12);
        let mut z = [
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        // i·(−i) − 2 = −1
        assert!((det_in_place(&mut z, 2) - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
        let mut sing = [1.0, 2.0, 1.0, 2.0];
        assert_eq!(det_in_place(&mut sing, 2), 0.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(64, 2), 2016.0);
        assert_eq!(binomial_u128(64, 32), 1_832_624_140_942_590_534);
        assert_eq!(factorial(5), 120.0);
    }
}
