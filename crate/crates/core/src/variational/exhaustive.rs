use rayon::prelude::*;
use serde::Serialize;

use super::{epsilon_optimize, split_total, Method, RayleighReport};
use crate::error::{Error, Result};
use crate::exact_diag::{build_hamiltonian_capped, SpinSector};
use crate::lattice::{self, LatticeVector, NEIGHBOR_OFFSETS};
use crate::linalg::{binomial_u128, factorial};
use crate::scattering::Repulsion;
use crate::trial_state::TrialState;

/// Largest `C(V,n)·C(V,m)` summed exhaustively.
pub const EXHAUSTIVE_CAP: u128 = 10_000_000;

/// Per-configuration data for one spin species.
struct SpinTable {
    sector: SpinSector,
    coords: Vec<Vec<LatticeVector>>,
    slater: Vec<f64>,
    jastrow: Vec<f64>,
    /// `G(X'_i)` for every particle `i` and neighbour direction, row-major.
    displaced: Vec<Vec<f64>>,
    /// `½ Σᵢ Σ_{x'ᵢ} [G(X) − G(X'ᵢ)]² / r0²`.
    gradient: Vec<f64>,
}

impl SpinTable {
    fn new(state: &TrialState, up: bool) -> Result<Self> {
        let lattice = *state.lattice();
        let basis = if up { state.up() } else { state.down() };
        let sector = SpinSector::new(lattice.volume(), basis.n())?;
        let inv_r2 = 1.0 / (lattice.r0 * lattice.r0);
        let rows: Vec<_> = sector
            .masks()
            .par_iter()
            .map(|&mask| {
                let sites = mask_sites(mask);
                let opts: Vec<Option<usize>> = sites.iter().map(|&s| Some(s)).collect();
                let coords: Vec<LatticeVector> = sites.iter().map(|&s| state.coords(s)).collect();
                let d = TrialState::slater(basis, &opts);
                let g = state.same_spin_jastrow(&coords);
                let mut displaced = Vec::with_capacity(coords.len() * 6);
                let mut grad = 0.0;
                let mut moved = coords.clone();
                for i in 0..coords.len() {
                    for off in NEIGHBOR_OFFSETS {
                        moved[i] = lattice::add(coords[i], off);
                        let gd = state.same_spin_jastrow(&moved);
                        displaced.push(gd);
                        grad += (g - gd) * (g - gd);
                    }
                    moved[i] = coords[i];
                }
                (coords, d, g, displaced, 0.5 * grad * inv_r2)
            })
            .collect();
        let mut table = Self {
            sector,
            coords: Vec::with_capacity(rows.len()),
            slater: Vec::with_capacity(rows.len()),
            jastrow: Vec::with_capacity(rows.len()),
            displaced: Vec::with_capacity(rows.len()),
            gradient: Vec::with_capacity(rows.len()),
        };
        for (c, d, g, disp, grad) in rows {
            table.coords.push(c);
            table.slater.push(d);
            table.jastrow.push(g);
            table.displaced.push(disp);
            table.gradient.push(grad);
        }
        Ok(table)
    }
}

fn mask_sites(mut mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        out.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    out
}

fn check_size(state: &TrialState) -> Result<()> {
    let v = state.lattice().volume();
    let configs = binomial_u128(v, state.n_up()).saturating_mul(binomial_u128(v, state.n_down()));
    if configs > EXHAUSTIVE_CAP {
        return Err(Error::DimensionCap { dim: configs, cap: EXHAUSTIVE_CAP });
    }
    Ok(())
}

/// `n! m! r0^{3(n+m)}`: sorted configurations stand for all orderings.
fn ordering_measure(state: &TrialState) -> f64 {
    let (n, m) = (state.n_up(), state.n_down());
    factorial(n) * factorial(m) * state.lattice().r0.powi(3 * (n + m) as i32)
}

/// Amplitudes over sorted configurations in product order `a·C(V,m) + b`.
fn amplitudes(state: &TrialState, up: &SpinTable, down: &SpinTable) -> Vec<f64> {
    let nb = down.sector.len();
    let mut c = vec![0.0; up.sector.len() * nb];
    c.par_chunks_mut(nb).enumerate().for_each(|(a, row)| {
        let da = up.slater[a] * up.jastrow[a];
        if da == 0.0 {
            return;
        }
        for (b, out) in row.iter_mut().enumerate() {
            let db = down.slater[b] * down.jastrow[b];
            if db != 0.0 {
                *out = da * db * state.cross_jastrow(&up.coords[a], &down.coords[b]);
            }
        }
    });
    c
}

/// Exact `⟨Ψ|H|Ψ⟩/⟨Ψ|Ψ⟩` by summing over every configuration pair.
pub fn rayleigh_exhaustive(state: &TrialState, u: Repulsion) -> Result<RayleighReport> {
    check_size(state)?;
    let up = SpinTable::new(state, true)?;
    let down = SpinTable::new(state, false)?;
    let c = amplitudes(state, &up, &down);
    let (numerator, denominator) = quadratic_forms(state, u, &c)?;
    let decomposition = Some(decompose_with(state, u, &up, &down, numerator, denominator, None));
    Ok(RayleighReport {
        method: Method::Exhaustive,
        numerator: Some(numerator),
        denominator: Some(denominator),
        quotient: numerator / denominator,
        error_bar: 0.0,
        decomposition,
        sampling: None,
    })
}

fn quadratic_forms(state: &TrialState, u: Repulsion, c: &[f64]) -> Result<(f64, f64)> {
    let measure = ordering_measure(state);
    let norm: f64 = c.iter().map(|v| v * v).sum();
    if !(norm > 0.0) {
        return Err(Error::Construction("the trial state vanishes identically".into()));
    }
    let h = build_hamiltonian_capped(state.lattice(), state.n_up(), state.n_down(), u, EXHAUSTIVE_CAP)?;
    let basis = h.basis();
    let nb = basis.down().len();
    let vec: Vec<f64> = if basis.is_projected() {
        let mut out = vec![0.0; basis.dimension()];
        for (p, &v) in c.iter().enumerate() {
            match basis.index_of_ranks(p / nb, p % nb) {
                Some(i) => out[i] = v,
                None if v != 0.0 => {
                    return Err(Error::Precondition(
                        "the trial state is nonzero on a doubly occupied site, so its hard-core energy is infinite".into(),
                    ))
                }
                None => {}
            }
        }
        out
    } else {
        c.to_vec()
    };
    let mut hv = vec![0.0; vec.len()];
    h.apply(&vec, &mut hv);
    let num: f64 = vec.iter().zip(&hv).map(|(a, b)| a * b).sum();
    Ok((measure * num, measure * norm))
}

/// Free kinetic energy and the two correction functionals, with the
/// Cauchy-Schwarz majorisation checked at `ε`.
#[derive(Debug, Clone, Serialize)]
pub struct TermDecomposition {
    /// `E^D(n) + E^D(m)`.
    pub kinetic: f64,
    pub i2: f64,
    pub i3: f64,
    pub epsilon: f64,
    /// `√(I₃/I₂)`.
    pub epsilon_optimal: f64,
    /// `kinetic·⟨Ψ|Ψ⟩ + (1+ε)I₂ + (1+ε⁻¹)I₃`.
    pub majorant: f64,
    pub numerator: f64,
    /// `majorant − numerator`.
    pub slack: f64,
    pub holds: bool,
}

/// `I₂`, `I₃` and the majorisation of `⟨Ψ|H|Ψ⟩`; `epsilon = None` uses `√(I₃/I₂)`.
pub fn decompose_terms(state: &TrialState, u: Repulsion, epsilon: Option<f64>) -> Result<TermDecomposition> {
    check_size(state)?;
    let up = SpinTable::new(state, true)?;
    let down = SpinTable::new(state, false)?;
    let c = amplitudes(state, &up, &down);
    let (numerator, denominator) = quadratic_forms(state, u, &c)?;
    Ok(decompose_with(state, u, &up, &down, numerator, denominator, epsilon))
}

fn decompose_with(
    state: &TrialState,
    u: Repulsion,
    up: &SpinTable,
    down: &SpinTable,
    numerator: f64,
    denominator: f64,
    epsilon: Option<f64>,
) -> TermDecomposition {
    let measure = ordering_measure(state);
    let inv_r2 = 1.0 / (state.lattice().r0 * state.lattice().r0);
    let f = state.f();
    let nb = down.sector.len();
    let partial: Vec<(f64, f64)> = (0..up.sector.len())
        .into_par_iter()
        .map(|a| {
            let (mut i2, mut i3) = (0.0, 0.0);
            let dx2 = up.slater[a] * up.slater[a];
            if dx2 == 0.0 {
                return (0.0, 0.0);
            }
            let xs = &up.coords[a];
            let gx = up.jastrow[a];
            for b in 0..nb {
                let dy2 = down.slater[b] * down.slater[b];
                if dy2 == 0.0 {
                    continue;
                }
                let ys = &down.coords[b];
                let gy = down.jastrow[b];
                let w = dx2 * dy2;
                let xrows: Vec<f64> = xs.iter().map(|&x| ys.iter().map(|&y| f.value(lattice::sub(x, y))).product()).collect();
                let yrows: Vec<f64> = ys.iter().map(|&y| xs.iter().map(|&x| f.value(lattice::sub(x, y))).product()).collect();
                let big_f: f64 = xrows.iter().product();
                let mut term = 0.0;
                for (i, &x) in xs.iter().enumerate() {
                    let others: f64 = xrows.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, r)| r).product();
                    for (d, off) in NEIGHBOR_OFFSETS.iter().enumerate() {
                        let moved = lattice::add(x, *off);
                        let fd = others * ys.iter().map(|&y| f.value(lattice::sub(moved, y))).product::<f64>();
                        let g = up.displaced[a][i * 6 + d];
                        term += 0.5 * gy * gy * g * g * (fd - big_f) * (fd - big_f) * inv_r2;
                    }
                }
                for (j, &y) in ys.iter().enumerate() {
                    let others: f64 = yrows.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, r)| r).product();
                    for (d, off) in NEIGHBOR_OFFSETS.iter().enumerate() {
                        let moved = lattice::add(y, *off);
                        let fd = others * xs.iter().map(|&x| f.value(lattice::sub(x, moved))).product::<f64>();
                        let g = down.displaced[b][j * 6 + d];
                        term += 0.5 * gx * gx * g * g * (fd - big_f) * (fd - big_f) * inv_r2;
                    }
                }
                if big_f != 0.0 {
                    let v = xs.iter().map(|x| ys.iter().filter(|&y| y == x).count()).sum::<usize>();
                    if v > 0 {
                        term += u.value() * gx * gx * gy * gy * v as f64 * big_f * big_f;
                    }
                }
                i2 += w * term;
                i3 += w * big_f * big_f * (gy * gy * up.gradient[a] + gx * gx * down.gradient[b]);
            }
            (i2, i3)
        })
        .collect();
    let (i2, i3) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (i2, i3) = (measure * i2, measure * i3);
    let optimal = epsilon_optimize(i2, i3);
    let eps = epsilon.unwrap_or(optimal.epsilon);
    let kinetic = state.up().energy() + state.down().energy();
    let majorant = kinetic * denominator + split_total(i2, i3, eps);
    let slack = majorant - numerator;
    TermDecomposition {
        kinetic,
        i2,
        i3,
        epsilon: eps,
        epsilon_optimal: optimal.epsilon,
        majorant,
        numerator,
        slack,
        holds: slack >= -1e-9 * majorant.abs().max(1.0),
    }
}

#[cfg(test)]
pub(super) mod tests {
    use super::*;
    use crate::lattice::{Boundary, BoxSpec};
    use crate::trial_state::{JastrowF, JastrowG};

    /// `⟨Ψ|−Δ_X−Δ_Y|Ψ⟩` from first-quantised amplitudes on unsorted tuples.
    pub(crate) fn literal_kinetic(state: &TrialState) -> f64 {
        let lattice = *state.lattice();
        let v = lattice.volume();
        let up = SpinSector::new(v, state.n_up()).unwrap();
        let down = SpinSector::new(v, state.n_down()).unwrap();
        let mut total = 0.0;
        for &mu in up.masks() {
            let xs = mask_sites(mu);
            for &md in down.masks() {
                let ys = mask_sites(md);
                let psi = state.amplitude(&xs, &ys);
                if psi == 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for i in 0..xs.len() + ys.len() {
                    for off in NEIGHBOR_OFFSETS {
                        let (mut x2, mut y2) = (xs.clone(), ys.clone());
                        let site = if i < xs.len() { &mut x2[i] } else { &mut y2[i - xs.len()] };
                        let moved = lattice.index(lattice::add(lattice.coords(*site), off));
                        let other = match moved {
                            Some(m) => {
                                *site = m;
                                state.amplitude(&x2, &y2)
                            }
                            None => 0.0,
                        };
                        acc += psi - other;
                    }
                }
                total += psi * acc;
            }
        }
        total * ordering_measure(state) / (lattice.r0 * lattice.r0)
    }

    #[test]
    fn free_reduction() {
        let l = BoxSpec::cubic(3, Boundary::Dirichlet, 1.0).unwrap();
        let s = TrialState::lowest(&l, 2, 1, JastrowF::identity(1.0), JastrowG::identity(1.0)).unwrap();
        let r = rayleigh_exhaustive(&s, Repulsion::zero()).unwrap();
        let exact = s.up().energy() + s.down().energy();
        assert!((r.quotient - exact).abs() < 1e-10);
        let d = r.decomposition.unwrap();
        assert_eq!(d.i2, 0.0);
        assert_eq!(d.i3, 0.0);
        // ⟨Ψ|Ψ⟩ = 1 for normalised orbitals with the ordered-sum measure.
        assert!((r.denominator.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fock_action_matches_first_quantisation() {
        let l = BoxSpec::cubic(3, Boundary::Dirichlet, 1.0).unwrap();
        let g = crate::trial_state::build_g(2.0, crate::trial_state::RampShape::Linear, 1.0).unwrap();
        let s = TrialState::lowest(&l, 2, 2, JastrowF::identity(1.0), g).unwrap();
        let r = rayleigh_exhaustive(&s, Repulsion::zero()).unwrap();
        let lit = literal_kinetic(&s);
        assert!(((r.numerator.unwrap() - lit) / lit).abs() < 1e-12, "{} vs {lit}", r.numerator.unwrap());
    }
}
