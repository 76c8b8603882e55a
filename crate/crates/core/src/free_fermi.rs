//! Free fermions on a box: spectra of the discrete Laplacian, Fermi-sea
//! filling, orbital tables and Slater densities.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, BoxSpec};

/// `(3/5)(6π²)^{2/3}`.
pub fn fermi_prefactor() -> f64 {
    0.6 * (6.0 * std::f64::consts::PI.powi(2)).powf(2.0 / 3.0)
}

/// Relative width within which two mode energies count as degenerate.
const SHELL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    /// Dirichlet: `mᵢ ∈ 1..=Mᵢ`, momentum `π mᵢ/ℓᵢ`. Periodic: `mᵢ ∈ 0..Mᵢ`,
    /// momentum `2π mᵢ/ℓᵢ`.
    pub m: [usize; 3],
    pub energy: f64,
}

fn axis_energy(boundary: Boundary, sites: usize, m: usize, r0: f64) -> f64 {
    let angle = match boundary {
        Boundary::Dirichlet => std::f64::consts::PI * m as f64 / (sites + 1) as f64,
        Boundary::Periodic => {
            let m = m.min(sites - m);
            2.0 * std::f64::consts::PI * m as f64 / sites as f64
        }
    };
    let s = (0.5 * angle).sin();
    4.0 * s * s / (r0 * r0)
}

fn mode(lattice: &BoxSpec, m: [usize; 3]) -> Mode {
    let mut e: [f64; 3] = std::array::from_fn(|a| axis_energy(lattice.boundary, lattice.sites[a], m[a], lattice.r0));
    // Fixed summation order makes permuted labels bitwise degenerate.
    e.sort_by(f64::total_cmp);
    Mode {
        m,
        energy: e[0] + e[1] + e[2],
    }
}

/// Sorts by energy, then lexicographically on `m` within each shell of
/// numerically degenerate energies.
fn order_modes(mut modes: Vec<Mode>) -> Vec<Mode> {
    modes.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.m.cmp(&b.m)));
    let mut start = 0;
    while start < modes.len() {
        let e0 = modes[start].energy;
        let mut end = start + 1;
        while end < modes.len() && modes[end].energy - e0 <= SHELL_TOL * e0.abs().max(1.0) {
            end += 1;
        }
        modes[start..end].sort_by(|a, b| a.m.cmp(&b.m));
        start = end;
    }
    modes
}

fn all_labels(lattice: &BoxSpec) -> Vec<[usize; 3]> {
    let range = |a: usize| -> std::ops::Range<usize> {
        match lattice.boundary {
            Boundary::Dirichlet => 1..lattice.sites[a] + 1,
            Boundary::Periodic => 0..lattice.sites[a],
        }
    };
    let mut out = Vec::with_capacity(lattice.volume());
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                out.push([i, j, k]);
            }
        }
    }
    out
}

/// All `M³` Dirichlet eigenvalues with labels, ascending.
pub fn dirichlet_spectrum(lattice: &BoxSpec) -> Result<Vec<Mode>> {
    if lattice.boundary != Boundary::Dirichlet {
        return Err(Error::Precondition("dirichlet_spectrum needs a Dirichlet box".into()));
    }
    Ok(spectrum(lattice))
}

/// All periodic (plane-wave) eigenvalues with labels, ascending.
pub fn periodic_spectrum(lattice: &BoxSpec) -> Result<Vec<Mode>> {
    if lattice.boundary != Boundary::Periodic {
        return Err(Error::Precondition("periodic_spectrum needs a periodic box".into()));
    }
    Ok(spectrum(lattice))
}

/// Spectrum of the box for its own boundary condition.
pub fn spectrum(lattice: &BoxSpec) -> Vec<Mode> {
    order_modes(all_labels(lattice).into_iter().map(|m| mode(lattice, m)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct FermiSea {
    pub n: usize,
    /// `E^D(n, ℓ)`: sum of the `n` lowest eigenvalues.
    pub energy: f64,
    pub fermi_energy: f64,
    /// Occupied modes in filling order.
    pub modes: Vec<Mode>,
    /// Whether the last occupied shell is completely filled.
    pub closed_shell: bool,
}

/// Sum of the lowest `n` eigenvalues, with the occupied modes recorded.
pub fn sum_lowest(lattice: &BoxSpec, n: usize) -> Result<FermiSea> {
    let v = lattice.volume();
    if n > v {
        return Err(Error::Precondition(format!("cannot place {n} fermions of one spin on {v} sites")));
    }
    let all = spectrum(lattice);
    let energy = all[..n].iter().map(|m| m.energy).sum();
    let fermi_energy = if n == 0 { 0.0 } else { all[n - 1].energy };
    let closed_shell = n == 0
        || n == v
        || all[n].energy - fermi_energy > SHELL_TOL * fermi_energy.abs().max(1.0);
    Ok(FermiSea {
        n,
        energy,
        fermi_energy,
        modes: all[..n].to_vec(),
        closed_shell,
    })
}

/// `(3/5)(6π²)^{2/3}(ρ↑^{5/3} + ρ↓^{5/3})`.
pub fn continuum_energy_density(rho_up: f64, rho_down: f64) -> f64 {
    fermi_prefactor() * (rho_up.powf(5.0 / 3.0) + rho_down.powf(5.0 / 3.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct FiniteBoxPoint {
    pub sites: usize,
    pub side: f64,
    pub n_up: usize,
    pub n_down: usize,
    pub energy_density: f64,
    /// Box energy over the continuum energy of the same particle numbers.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeGasEnergy {
    pub asymptote: f64,
    pub boxes: Vec<FiniteBoxPoint>,
    /// Ratio extrapolated linearly in `1/ℓ` to infinite volume.
    pub extrapolated_ratio: f64,
    pub extrapolated: f64,
}

/// Continuum asymptote together with Dirichlet boxes of the given sizes at
/// (approximately) the same densities, extrapolated to infinite volume.
pub fn free_gas_energy_density(rho_up: f64, rho_down: f64, r0: f64, sizes: &[usize]) -> Result<FreeGasEnergy> {
    if rho_up < 0.0 || rho_down < 0.0 || !(rho_up + rho_down).is_finite() {
        return Err(Error::Precondition("densities must be finite and non-negative".into()));
    }
    if (rho_up + rho_down) * r0.powi(3) > 1.0 {
        return Err(Error::Precondition(format!(
            "density {} exceeds the lattice ceiling 1/r0³",
            rho_up + rho_down
        )));
    }
    let asymptote = continuum_energy_density(rho_up, rho_down);
    let mut boxes = Vec::new();
    for &m in sizes {
        let lattice = BoxSpec::cubic(m, Boundary::Dirichlet, r0)?;
        let vol = lattice.physical_volume();
        let n_up = (rho_up * vol).round() as usize;
        let n_down = (rho_down * vol).round() as usize;
        let e = sum_lowest(&lattice, n_up)?.energy + sum_lowest(&lattice, n_down)?.energy;
        let cont = continuum_energy_density(n_up as f64 / vol, n_down as f64 / vol) * vol;
        boxes.push(FiniteBoxPoint {
            sites: m,
            side: lattice.side_length(),
            n_up,
            n_down,
            energy_density: e / vol,
            ratio: if cont > 0.0 { e / cont } else { 1.0 },
        });
    }
    let extrapolated_ratio = if boxes.len() >= 2 && asymptote > 0.0 {
        let xs: Vec<f64> = boxes.iter().map(|b| 1.0 / b.side).collect();
        let ys: Vec<f64> = boxes.iter().map(|b| b.ratio).collect();
        linear_fit(&xs, &ys).0
    } else {
        1.0
    };
    Ok(FreeGasEnergy {
        asymptote,
        boxes,
        extrapolated_ratio,
        extrapolated: extrapolated_ratio * asymptote,
    })
}

/// Least-squares line through `(x, y)`, returned as `(intercept, slope)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Single-particle eigenfunctions tabulated on the sites of a box, normalised
/// as `Σₓ r0³ φ*_α φ_β = δ_αβ`.
#[derive(Debug, Clone)]
pub struct OrbitalBasis {
    lattice: BoxSpec,
    modes: Vec<Mode>,
    /// `values[(site, α)]`.
    values: DMatrix<Complex64>,
}

impl OrbitalBasis {
    /// The `n` lowest modes (lexicographic tie-break inside shells).
    pub fn lowest(lattice: &BoxSpec, n: usize) -> Result<Self> {
        let sea = sum_lowest(lattice, n)?;
        Ok(Self::from_modes(lattice, sea.modes))
    }

    pub fn from_modes(lattice: &BoxSpec, modes: Vec<Mode>) -> Self {
        let v = lattice.volume();
        let r0 = lattice.r0;
        let mut values = DMatrix::zeros(v, modes.len());
        for site in 0..v {
            let x = lattice.coords(site);
            for (alpha, md) in modes.iter().enumerate() {
                values[(site, alpha)] = match lattice.boundary {
                    Boundary::Dirichlet => {
                        let mut p = 1.0;
                        for a in 0..3 {
                            let len = (lattice.sites[a] + 1) as f64;
                            let arg = std::f64::consts::PI * md.m[a] as f64 * (x[a] + 1) as f64 / len;
                            p *= (2.0 / (len * r0)).sqrt() * arg.sin();
                        }
                        Complex64::new(p, 0.0)
                    }
                    Boundary::Periodic => {
                        let mut phase = 0.0;
                        for a in 0..3 {
                            let len = lattice.sites[a];
                            // Reduce the integer product first so the phase stays exact.
                            let k = (md.m[a] * x[a] as usize) % len;
                            phase += 2.0 * std::f64::consts::PI * k as f64 / len as f64;
                        }
                        Complex64::from_polar(1.0 / (v as f64 * r0.powi(3)).sqrt(), phase)
                    }
                };
            }
        }
        Self {
            lattice: *lattice,
            modes,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.modes.len()
    }
    pub fn lattice(&self) -> &BoxSpec {
        &self.lattice
    }
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.energy).collect()
    }
    pub fn energy(&self) -> f64 {
        self.modes.iter().map(|m| m.energy).sum()
    }
    pub fn is_real(&self) -> bool {
        self.lattice.boundary == Boundary::Dirichlet
    }
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    #[inline]
    pub fn value(&self, site: usize, alpha: usize) -> Complex64 {
        self.values[(site, alpha)]
    }

    /// Largest deviation of the discrete Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let r3 = self.lattice.r0.powi(3);
        let gram = self.values.adjoint() * &self.values * Complex64::new(r3, 0.0);
        let n = self.n();
        let mut err = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((gram[(i, j)] - target).norm());
            }
        }
        err
    }

    /// `K(x, y) = Σ_α φ_α(x) φ*_α(y)`.
    pub fn kernel(&self, x: usize, y: usize) -> Complex64 {
        (0..self.n()).map(|a| self.values[(x, a)] * self.values[(y, a)].conj()).sum()
    }

    /// One-particle density `ρ⁽¹⁾(x) = K(x, x)`.
    pub fn density(&self, x: usize) -> f64 {
        (0..self.n()).map(|a| self.values[(x, a)].norm_sqr()).sum()
    }

    pub fn densities(&self) -> SlaterDensities<'_> {
        SlaterDensities {
            basis: self,
            rho: (0..self.lattice.volume()).map(|x| self.density(x)).collect(),
        }
    }
}

/// Evaluator of the `k`-particle densities `ρ⁽ᵏ⁾ = (1/k!) det[K(xᵢ, xⱼ)]` of the
/// Slater determinant built from an [`OrbitalBasis`].
pub struct SlaterDensities<'a> {
    basis: &'a OrbitalBasis,
    rho: Vec<f64>,
}

impl SlaterDensities<'_> {
    pub fn one(&self, x: usize) -> f64 {
        self.rho[x]
    }

    pub fn two(&self, x: usize, y: usize) -> f64 {
        0.5 * (self.rho[x] * self.rho[y] - self.basis.kernel(x, y).norm_sqr())
    }

    pub fn three(&self, x: usize, y: usize, z: usize) -> f64 {
        let k = |a: usize, b: usize| -> Complex64 {
            if a == b {
                Complex64::new(self.rho[a], 0.0)
            } else {
                self.basis.kernel(a, b)
            }
        };
        let pts = [x, y, z];
        let m = nalgebra::Matrix3::from_fn(|i, j| k(pts[i], pts[j]));
        m.determinant().re / 6.0
    }

    pub fn k(&self, points: &[usize]) -> Result<f64> {
        match points {
            [x] => Ok(self.one(*x)),
            [x, y] => Ok(self.two(*x, *y)),
            [x, y, z] => Ok(self.three(*x, *y, *z)),
            _ => Err(Error::Precondition("densities are provided for k = 1, 2, 3".into())),
        }
    }

    pub fn one_body(&self) -> &[f64] {
        &self.rho
    }
}

/// Empirical constants in the free-gas estimates, measured on one box.
#[derive(Debug, Clone, Serialize)]
pub struct FreeFits {
    pub sites: usize,
    pub n: usize,
    pub side: f64,
    /// `C` in `E^D ≤ E_cont (1 + C n^{-1/3} + C n^{2/3}(r0/ℓ)²)`.
    pub kinetic: f64,
    /// `C` in `Σ r0³ ρ² ≤ (n²/ℓ³)(1 + C n^{-1/3} + C n^{2/3}(r0/ℓ)²)`.
    pub density_square: f64,
    /// `max ρ⁽²⁾(x,y) / (|x−y|² (n/ℓ³)^{8/3})`.
    pub pair_density: f64,
    /// Hadamard bound `max ρ³/6` on `ρ⁽³⁾`, divided by `(n/ℓ³)³`.
    pub triple_density: f64,
}

pub fn kinetic_constant(lattice: &BoxSpec, n: usize) -> Result<f64> {
    let l = lattice.side_length();
    let e = sum_lowest(lattice, n)?.energy;
    let cont = fermi_prefactor() * (n as f64).powf(5.0 / 3.0) / (l * l);
    let nf = n as f64;
    Ok((e / cont - 1.0) / (nf.powf(-1.0 / 3.0) + nf.powf(2.0 / 3.0) * (lattice.r0 / l).powi(2)))
}

/// Measures the constants of [`FreeFits`] for `n` particles of one spin.
pub fn measure_free_fits(lattice: &BoxSpec, n: usize) -> Result<FreeFits> {
    if n == 0 {
        return Err(Error::Precondition("fits need at least one particle".into()));
    }
    let basis = OrbitalBasis::lowest(lattice, n)?;
    let dens = basis.densities();
    let r0 = lattice.r0;
    let l = lattice.side_length();
    let vol = lattice.physical_volume();
    let nf = n as f64;
    let bracket = nf.powf(-1.0 / 3.0) + nf.powf(2.0 / 3.0) * (r0 / l).powi(2);

    let sq: f64 = dens.one_body().iter().map(|r| r0.powi(3) * r * r).sum();
    let density_square = (sq * vol / (nf * nf) - 1.0) / bracket;

    let v = lattice.volume();
    let scale2 = (nf / vol).powf(8.0 / 3.0);
    let pair_density = (0..v)
        .map(|x| {
            let cx = lattice.coords(x);
            let mut best = 0.0_f64;
            for y in 0..x {
                let cy = lattice.coords(y);
                let d2 = crate::lattice::norm_sq(crate::lattice::sub(cx, cy)) as f64 * r0 * r0;
                best = best.max(dens.two(x, y) / (d2 * scale2));
            }
            best
        })
        .fold(0.0, f64::max);
    let rho_max = dens.one_body().iter().cloned().fold(0.0, f64::max);
    let triple_density = rho_max.powi(3) / 6.0 / (nf / vol).powi(3);

    Ok(FreeFits {
        sites: lattice.sites[0],
        n,
        side: l,
        kinetic: kinetic_constant(lattice, n)?,
        density_square,
        pair_density,
        triple_density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dbox(m: usize) -> BoxSpec {
        BoxSpec::cubic(m, Boundary::Dirichlet, 1.0).unwrap()
    }

    #[test]
    fn single_site() {
        let s = dirichlet_spectrum(&dbox(1)).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].energy - 6.0).abs() < 1e-14);
        assert!((sum_lowest(&dbox(1), 1).unwrap().energy - 6.0).abs() < 1e-14);
    }

    #[test]
    fn two_sites_per_side() {
        let s = dirichlet_spectrum(&dbox(2)).unwrap();
        assert!((s[0].energy - 3.0).abs() < 1e-14);
        assert_eq!(s[0].m, [1, 1, 1]);
    }

    #[test]
    fn full_filling_is_trace() {
        for m in [2, 3, 5] {
            let v = m * m * m;
            let e = sum_lowest(&dbox(m), v).unwrap().energy;
            assert!((e - 6.0 * v as f64).abs() < 1e-10 * v as f64);
        }
        let p = BoxSpec::cubic(4, Boundary::Periodic, 1.0).unwrap();
        assert!((sum_lowest(&p, 64).unwrap().energy - 6.0 * 64.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_shell_filled_lexicographically() {
        let sea = sum_lowest(&dbox(4), 2).unwrap();
        assert_eq!(sea.modes[0].m, [1, 1, 1]);
        assert_eq!(sea.modes[1].m, [1, 1, 2]);
        assert!(!sea.closed_shell);
        assert!(sum_lowest(&dbox(4), 4).unwrap().closed_shell);
    }

    #[test]
    fn range_checked() {
        assert!(sum_lowest(&dbox(2), 9).is_err());
        assert!(dirichlet_spectrum(&BoxSpec::cubic(2, Boundary::Periodic, 1.0).unwrap()).is_err());
    }

    #[test]
    fn orbitals_orthonormal() {
        for lattice in [
            BoxSpec::cubic(4, Boundary::Dirichlet, 0.7).unwrap(),
            BoxSpec::cubic(4, Boundary::Periodic, 1.3).unwrap(),
            BoxSpec::new([2, 3, 5], Boundary::Dirichlet, 1.0).unwrap(),
        ] {
            let b = OrbitalBasis::lowest(&lattice, 10).unwrap();
            assert!(b.orthonormality_error() < 1e-12);
            let total: f64 = (0..lattice.volume()).map(|x| b.density(x)).sum::<f64>() * lattice.r0.powi(3);
            assert!((total - 10.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pauli_zeros() {
        let b = OrbitalBasis::lowest(&dbox(3), 5).unwrap();
        let d = b.densities();
        for x in 0..27 {
            assert!(d.two(x, x).abs() < 1e-14);
            assert!(d.three(x, x, (x + 1) % 27).abs() < 1e-14);
        }
    }

    #[test]
    fn free_gas_limits() {
        let z = free_gas_energy_density(0.0, 0.0, 1.0, &[4, 6]).unwrap();
        assert_eq!(z.asymptote, 0.0);
        let rho = 0.01;
        let one = free_gas_energy_density(rho, 0.0, 1.0, &[]).unwrap();
        assert!((one.asymptote - fermi_prefactor() * rho.powf(5.0 / 3.0)).abs() < 1e-16);
        assert!(free_gas_energy_density(0.8, 0.3, 1.0, &[]).is_err());
    }
}
