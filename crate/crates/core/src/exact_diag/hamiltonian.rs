use rayon::prelude::*;

use super::fock::{FockBasis, SpinSector};
use crate::error::Result;
use crate::lattice::BoxSpec;
use crate::scattering::Repulsion;

/// Default bound on the Hilbert-space dimension.
pub const DEFAULT_DIMENSION_CAP: u128 = 20_000_000;

/// Single-spin hopping part `−Δ` in compressed rows over a [`SpinSector`].
#[derive(Debug, Clone)]
pub struct SectorOperator {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl SectorOperator {
    /// `6/r0²` per particle on the diagonal; `−1/r0²` per bond hop, with the
    /// sign from the number of occupied sites the particle passes.
    pub fn new(lattice: &BoxSpec, sector: &SpinSector) -> Self {
        let inv = 1.0 / (lattice.r0 * lattice.r0);
        let table = lattice.neighbor_table();
        let mut row_ptr = Vec::with_capacity(sector.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(sector.len());
        row_ptr.push(0);
        for &mask in sector.masks() {
            let mut d = 6.0 * inv * sector.particles() as f64;
            let mut m = mask;
            while m != 0 {
                let i = m.trailing_zeros() as usize;
                m &= m - 1;
                for j in table[i].iter().flatten().copied() {
                    if j == i {
                        d -= inv;
                        continue;
                    }
                    if mask & (1 << j) != 0 {
                        continue;
                    }
                    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                    let between = mask & ((1u64 << hi) - 1) & !((1u64 << (lo + 1)) - 1);
                    let sign = if between.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    let target = (mask & !(1 << i)) | (1 << j);
                    cols.push(sector.rank(target) as u32);
                    vals.push(-inv * sign);
                }
            }
            diag.push(d);
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, vals, diag }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().map(|&c| c as usize).zip(self.vals[span].iter().copied())
    }

    pub fn diagonal(&self, r: usize) -> f64 {
        self.diag[r]
    }
}

/// `H = −Δ_X − Δ_Y + U v_XY` acting on a [`FockBasis`]. For `U = ∞` the
/// basis excludes double occupancy and the interaction term is dropped.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    lattice: BoxSpec,
    basis: FockBasis,
    up: SectorOperator,
    down: SectorOperator,
    repulsion: Repulsion,
}

pub fn build_hamiltonian(lattice: &BoxSpec, n_up: usize, n_down: usize, u: Repulsion) -> Result<SparseHamiltonian> {
    build_hamiltonian_capped(lattice, n_up, n_down, u, DEFAULT_DIMENSION_CAP)
}

pub fn build_hamiltonian_capped(
    lattice: &BoxSpec,
    n_up: usize,
    n_down: usize,
    u: Repulsion,
    cap: u128,
) -> Result<SparseHamiltonian> {
    let basis = FockBasis::new(lattice.volume(), n_up, n_down, u.is_hard_core(), cap)?;
    let up = SectorOperator::new(lattice, basis.up());
    let down = SectorOperator::new(lattice, basis.down());
    Ok(SparseHamiltonian { lattice: *lattice, basis, up, down, repulsion: u })
}

impl SparseHamiltonian {
    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn lattice(&self) -> &BoxSpec {
        &self.lattice
    }

    pub fn repulsion(&self) -> Repulsion {
        self.repulsion
    }

    /// Diagonal element of basis state `index`.
    pub fn diagonal(&self, index: usize) -> f64 {
        let (a, b) = self.basis.ranks(index);
        let mut d = self.up.diagonal(a) + self.down.diagonal(b);
        if let Repulsion::Finite(u) = self.repulsion {
            let double = (self.basis.up().mask(a) & self.basis.down().mask(b)).count_ones();
            d += u * double as f64;
        }
        d
    }

    /// Nonzero entries of row `index`, diagonal first.
    pub fn row(&self, index: usize) -> Vec<(usize, f64)> {
        let (a, b) = self.basis.ranks(index);
        let mut out = vec![(index, self.diagonal(index))];
        for (a2, t) in self.up.row(a) {
            if let Some(j) = self.basis.index_of_ranks(a2, b) {
                out.push((j, t));
            }
        }
        for (b2, t) in self.down.row(b) {
            if let Some(j) = self.basis.index_of_ranks(a, b2) {
                out.push((j, t));
            }
        }
        out
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.dimension());
        assert_eq!(out.len(), self.dimension());
        if self.basis.is_projected() {
            out.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, o)| {
                *o = self.row(i).into_iter().map(|(j, h)| h * v[j]).sum();
            });
            return;
        }
        let nb = self.basis.down().len();
        let u = self.repulsion.value();
        let up_masks = self.basis.up().masks();
        let down_masks = self.basis.down().masks();
        out.par_chunks_mut(nb).enumerate().for_each(|(a, block)| {
            let du = self.up.diagonal(a);
            let mu = up_masks[a];
            for (b, o) in block.iter_mut().enumerate() {
                let mut acc = (du + self.down.diagonal(b) + u * (mu & down_masks[b]).count_ones() as f64) * v[a * nb + b];
                for (b2, t) in self.down.row(b) {
                    acc += t * v[a * nb + b2];
                }
                *o = acc;
            }
            for (a2, t) in self.up.row(a) {
                let src = &v[a2 * nb..(a2 + 1) * nb];
                for (o, s) in block.iter_mut().zip(src) {
                    *o += t * s;
                }
            }
        });
    }

    /// Dense matrix, for small dimensions only.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dimension();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, h) in self.row(i) {
                m[(i, j)] += h;
            }
        }
        m
    }
}
