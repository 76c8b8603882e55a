use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::hamiltonian::SparseHamiltonian;
use crate::error::{Error, Result};

/// Largest dimension diagonalised densely as a cross-check.
pub const DENSE_CHECK_MAX: usize = 2000;

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Residual target `‖Hv − Ev‖ ≤ tol ‖v‖`.
    pub tol: f64,
    pub max_matvecs: usize,
    /// Memory budget for the Krylov basis, in bytes.
    pub memory_budget: usize,
    pub max_krylov: usize,
    pub seed: u64,
    pub keep_vector: bool,
    pub dense_check: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_matvecs: 20_000,
            memory_budget: 1 << 30,
            max_krylov: 80,
            seed: 0x5eed,
            keep_vector: false,
            dense_check: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundState {
    pub dimension: usize,
    pub energy: f64,
    pub residual: f64,
    /// Matrix-vector products used.
    pub iterations: usize,
    pub restarts: usize,
    /// Lowest eigenvalue of the dense matrix when the dimension allows it.
    pub dense_energy: Option<f64>,
    #[serde(skip)]
    pub vector: Option<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Lowest eigenvalue by thick-restarted Lanczos with full
/// reorthogonalisation. The projected matrix is assembled from the
/// Gram-Schmidt coefficients, so restarts keep the lowest Ritz vectors and
/// continue from the current residual direction.
pub fn ground_state_energy(h: &SparseHamiltonian, opts: &LanczosOptions) -> Result<GroundState> {
    let n = h.dimension();
    if n == 0 {
        return Err(Error::Precondition("empty basis".into()));
    }
    let dense_energy = (opts.dense_check && n <= DENSE_CHECK_MAX).then(|| {
        let ev = SymmetricEigen::new(h.to_dense()).eigenvalues;
        ev.iter().copied().fold(f64::INFINITY, f64::min)
    });
    let krylov = (opts.memory_budget / (8 * n)).clamp(8, opts.max_krylov).min(n);
    let keep = (krylov / 4).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut start);
    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut t = DMatrix::<f64>::zeros(krylov, krylov);
    // Columns below `applied` already hold H q_j.
    let mut applied = 0;
    let mut w = vec![0.0; n];
    let mut matvecs = 0;
    let mut restarts = 0;
    let mut last_residual;

    loop {
        let mut beta = 0.0;
        while applied < basis.len() {
            let j = applied;
            h.apply(&basis[j], &mut w);
            matvecs += 1;
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = dot(&w, q);
                    axpy(-c, q, &mut w);
                    t[(i, j)] += c;
                }
            }
            for i in 0..j {
                t[(j, i)] = t[(i, j)];
            }
            applied += 1;
            beta = normalize(&mut w);
            let k = applied;
            let scale = (0..k).fold(1.0_f64, |m, i| m.max(t[(i, i)].abs()));
            let (_, y) = ritz(&t, k, 1);
            let estimate = (beta * y[(k - 1, 0)]).abs();
            if k == krylov || beta <= 1e-13 * scale || estimate <= 0.25 * opts.tol || matvecs >= opts.max_matvecs {
                break;
            }
            basis.push(w.clone());
        }
        let k = applied;
        let wanted = keep.min(k);
        let (theta, y) = ritz(&t, k, wanted);
        let combine = |col: usize| {
            let mut u = vec![0.0; n];
            for (q, &c) in basis.iter().zip(y.column(col).iter()) {
                axpy(c, q, &mut u);
            }
            normalize(&mut u);
            u
        };
        let mut x = combine(0);
        let mut hx = vec![0.0; n];
        h.apply(&x, &mut hx);
        matvecs += 1;
        let energy = dot(&x, &hx);
        axpy(-energy, &x, &mut hx);
        let residual = dot(&hx, &hx).sqrt();
        last_residual = residual;
        if residual <= opts.tol {
            if let Some(d) = dense_energy {
                if (d - energy).abs() > 1e-7 * energy.abs().max(1.0) {
                    return Err(Error::invariant(
                        "dense cross-check",
                        format!("Lanczos {energy} vs dense {d} at dimension {n}"),
                    ));
                }
            }
            return Ok(GroundState {
                dimension: n,
                energy,
                residual,
                iterations: matvecs,
                restarts,
                dense_energy,
                vector: opts.keep_vector.then(|| std::mem::take(&mut x)),
            });
        }
        if matvecs >= opts.max_matvecs {
            break;
        }
        restarts += 1;
        let mut kept = vec![x];
        for col in 1..wanted {
            kept.push(combine(col));
        }
        basis = kept;
        t.fill(0.0);
        for (i, &th) in theta.iter().enumerate() {
            t[(i, i)] = th;
        }
        applied = basis.len();
        if beta > 1e-13 && basis.len() < krylov {
            basis.push(w.clone());
        } else {
            // Invariant subspace without convergence: restart from the residual.
            let mut r = hx;
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&r, q);
                    axpy(-c, q, &mut r);
                }
            }
            normalize(&mut r);
            basis.truncate(1);
            t.fill(0.0);
            t[(0, 0)] = energy;
            applied = 1;
            basis.push(r);
        }
    }
    Err(Error::EigenNoConvergence { iterations: matvecs, residual: last_residual })
}

/// Lowest `count` eigenpairs of the leading `k × k` block, ascending.
fn ritz(t: &DMatrix<f64>, k: usize, count: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(t.view((0, 0), (k, k)).into_owned());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let count = count.min(k);
    let theta = order[..count].iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(k, count, |r, c| eig.eigenvectors[(r, order[c])]);
    (theta, y)
}
