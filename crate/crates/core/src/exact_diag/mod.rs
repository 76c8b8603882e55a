//! Exact ground states of the Hubbard Hamiltonian on small boxes.

mod fock;
mod hamiltonian;
mod lanczos;

pub use fock::{FockBasis, SpinSector, MAX_SITES};
pub use hamiltonian::{build_hamiltonian, build_hamiltonian_capped, SectorOperator, SparseHamiltonian, DEFAULT_DIMENSION_CAP};
pub use lanczos::{ground_state_energy, GroundState, LanczosOptions, DENSE_CHECK_MAX};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::BoxSpec;
use crate::scattering::Repulsion;

/// Ground energy for `N` up and `M` down particles.
pub fn ground_energy(lattice: &BoxSpec, n_up: usize, n_down: usize, u: Repulsion, opts: &LanczosOptions) -> Result<GroundState> {
    let h = build_hamiltonian(lattice, n_up, n_down, u)?;
    ground_state_energy(&h, opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorEnergy {
    pub n_up: usize,
    pub n_down: usize,
    /// `N − M`.
    pub imbalance: i64,
    pub energy: Option<f64>,
    pub dimension: Option<u128>,
    pub skipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpinScan {
    pub total: usize,
    pub sectors: Vec<SectorEnergy>,
    pub minimum: f64,
    /// Largest `|N − M|` whose sector attains the minimum within tolerance;
    /// SU(2) symmetry gives `S ≥ polarization/2`.
    pub polarization: usize,
}

/// Ground energies for every split `N + M = total` with `N ≥ M`. Sectors over
/// the dimension cap are marked skipped.
pub fn spin_sector_scan(lattice: &BoxSpec, total: usize, u: Repulsion, cap: u128, opts: &LanczosOptions) -> Result<SpinScan> {
    let mut sectors = Vec::new();
    for n_down in (0..=total / 2).rev() {
        let n_up = total - n_down;
        let entry = match build_hamiltonian_capped(lattice, n_up, n_down, u, cap) {
            Ok(h) => {
                let gs = ground_state_energy(&h, opts)?;
                SectorEnergy {
                    n_up,
                    n_down,
                    imbalance: n_up as i64 - n_down as i64,
                    energy: Some(gs.energy),
                    dimension: Some(gs.dimension as u128),
                    skipped: false,
                }
            }
            Err(Error::DimensionCap { dim, .. }) => SectorEnergy {
                n_up,
                n_down,
                imbalance: n_up as i64 - n_down as i64,
                energy: None,
                dimension: Some(dim),
                skipped: true,
            },
            Err(e) => return Err(e),
        };
        sectors.push(entry);
    }
    let minimum = sectors.iter().filter_map(|s| s.energy).fold(f64::INFINITY, f64::min);
    if !minimum.is_finite() {
        return Err(Error::DimensionCap { dim: sectors.iter().filter_map(|s| s.dimension).min().unwrap_or(0), cap });
    }
    let tol = 1e-7 * minimum.abs().max(1.0);
    let polarization = sectors
        .iter()
        .filter(|s| s.energy.is_some_and(|e| e <= minimum + tol))
        .map(|s| s.imbalance.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    Ok(SpinScan { total, sectors, minimum, polarization })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_fermi::sum_lowest;
    use crate::lattice::Boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lattice(sites: [usize; 3]) -> BoxSpec {
        BoxSpec::new(sites, Boundary::Dirichlet, 1.0).unwrap()
    }

    fn opts() -> LanczosOptions {
        LanczosOptions::default()
    }

    #[test]
    fn single_site() {
        let l = lattice([1, 1, 1]);
        let h = build_hamiltonian(&l, 1, 0, Repulsion::zero()).unwrap();
        assert_eq!(h.to_dense()[(0, 0)], 6.0);
        let h = build_hamiltonian(&l, 1, 1, Repulsion::new(2.5).unwrap()).unwrap();
        assert_eq!(h.to_dense()[(0, 0)], 14.5);
    }

    #[test]
    fn two_site_hubbard() {
        let l = lattice([2, 1, 1]);
        for u in [0.0, 1.0, 4.0, 10.0] {
            let gs = ground_energy(&l, 1, 1, Repulsion::new(u).unwrap(), &opts()).unwrap();
            let exact = 12.0 + u / 2.0 - (4.0 + u * u / 4.0).sqrt();
            assert!((gs.energy - exact).abs() < 1e-10, "U={u}: {} vs {exact}", gs.energy);
        }
    }

    #[test]
    fn free_factorisation() {
        for (sites, n, m) in [([3, 3, 3], 2, 2), ([3, 2, 2], 3, 1), ([4, 3, 2], 2, 3)] {
            let l = lattice(sites);
            let gs = ground_energy(&l, n, m, Repulsion::zero(), &opts()).unwrap();
            let exact = sum_lowest(&l, n).unwrap().energy + sum_lowest(&l, m).unwrap().energy;
            assert!((gs.energy - exact).abs() < 1e-8, "{sites:?}: {} vs {exact}", gs.energy);
        }
        let l = BoxSpec::cubic(3, Boundary::Periodic, 1.0).unwrap();
        let gs = ground_energy(&l, 1, 2, Repulsion::zero(), &opts()).unwrap();
        let exact = sum_lowest(&l, 1).unwrap().energy + sum_lowest(&l, 2).unwrap().energy;
        assert!((gs.energy - exact).abs() < 1e-8);
    }

    #[test]
    fn hermitian_action() {
        let l = lattice([3, 2, 2]);
        for u in [Repulsion::new(1.5).unwrap(), Repulsion::HardCore] {
            let h = build_hamiltonian(&l, 2, 2, u).unwrap();
            let n = h.dimension();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (mut ha, mut hb) = (vec![0.0; n], vec![0.0; n]);
            h.apply(&a, &mut ha);
            h.apply(&b, &mut hb);
            let lhs: f64 = a.iter().zip(&hb).map(|(x, y)| x * y).sum();
            let rhs: f64 = ha.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
            let d = h.to_dense();
            assert!((&d - d.transpose()).amax() == 0.0);
        }
    }

    #[test]
    fn monotone_in_u() {
        let l = lattice([3, 2, 2]);
        let mut prev = f64::NEG_INFINITY;
        for u in [Repulsion::zero(), Repulsion::new(1.0).unwrap(), Repulsion::new(5.0).unwrap(), Repulsion::HardCore] {
            let e = ground_energy(&l, 2, 2, u, &opts()).unwrap().energy;
            assert!(e >= prev - 1e-10);
            prev = e;
        }
    }

    #[test]
    fn scan_at_zero_coupling() {
        let l = lattice([3, 3, 3]);
        let scan = spin_sector_scan(&l, 2, Repulsion::zero(), DEFAULT_DIMENSION_CAP, &opts()).unwrap();
        let e1 = sum_lowest(&l, 1).unwrap().energy;
        let e2 = sum_lowest(&l, 2).unwrap().energy;
        let balanced = scan.sectors.iter().find(|s| s.imbalance == 0).unwrap().energy.unwrap();
        let polarized = scan.sectors.iter().find(|s| s.imbalance == 2).unwrap().energy.unwrap();
        assert!((balanced - 2.0 * e1).abs() < 1e-8);
        assert!((polarized - e2).abs() < 1e-8);
        assert_eq!(scan.polarization, 0);
    }

    #[test]
    fn skipped_sectors_are_marked() {
        let l = lattice([3, 3, 3]);
        let scan = spin_sector_scan(&l, 4, Repulsion::zero(), 20_000, &opts()).unwrap();
        assert!(scan.sectors.iter().any(|s| s.skipped));
        assert!(scan.sectors.iter().any(|s| !s.skipped));
    }
}
