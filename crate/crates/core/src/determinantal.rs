//! Weighted Slater determinants `Φ(X) = Dₙ(X) Π h(xᵢ)`: norms, `k`-particle
//! densities and the trace identity through the overlap matrix `M`, plus
//! the norm bound on `1 − M_Y` and the same-spin cutoff re-insertion
//! estimate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_fermi::OrbitalBasis;
use crate::lattice::{self, LatticeVector};
use crate::linalg::{det_in_place, factorial, hermitian_norm, sum_over_subsets};
use crate::trial_state::{JastrowF, JastrowG};

/// `M_αβ = Σₓ r0³ φ*_α(x) φ_β(x) w(x)` for a non-negative weight `w = |h|²`.
#[derive(Debug, Clone)]
pub struct WeightedOverlapMatrix {
    matrix: DMatrix<Complex64>,
}

impl WeightedOverlapMatrix {
    pub fn new(basis: &OrbitalBasis, weight: &[f64]) -> Result<Self> {
        let v = basis.lattice().volume();
        if weight.len() != v {
            return Err(Error::Precondition(format!("weight has {} entries for {v} sites", weight.len())));
        }
        let r3 = basis.lattice().r0.powi(3);
        let phi = basis.matrix();
        let mut scaled = phi.clone();
        for (x, &w) in weight.iter().enumerate() {
            for a in 0..basis.n() {
                scaled[(x, a)] *= w * r3;
            }
        }
        let mut matrix = phi.adjoint() * scaled;
        // Symmetrise away rounding so the Hermitian eigensolver sees exact symmetry.
        let adj = matrix.adjoint();
        matrix = (matrix + adj) * Complex64::new(0.5, 0.0);
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn determinant(&self) -> f64 {
        if self.dim() == 0 {
            return 1.0;
        }
        self.matrix.clone().determinant().re
    }

    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        match (ev.first(), ev.last()) {
            (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// `M⁻¹`, refused when the condition number exceeds `1e12`.
    pub fn inverse(&self) -> Result<DMatrix<Complex64>> {
        let condition = self.condition_number();
        if !(condition < 1e12) {
            return Err(Error::Singular { condition });
        }
        self.matrix
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { condition })
    }

    /// Spectral norm `‖1 − M‖`.
    pub fn distance_from_identity(&self) -> f64 {
        let n = self.dim();
        hermitian_norm(&(DMatrix::identity(n, n) - &self.matrix))
    }
}

fn squared(h: &[f64]) -> Vec<f64> {
    h.iter().map(|v| v * v).collect()
}

/// `⟨Φ|Φ⟩ = det M`.
pub fn weighted_norm(basis: &OrbitalBasis, h: &[f64]) -> Result<f64> {
    Ok(WeightedOverlapMatrix::new(basis, &squared(h))?.determinant())
}

/// Normalised `k`-particle density of `Φ` at `points`:
/// `(1/k!) det[Γ(xᵢ, xⱼ)]` with `Γ(x,y) = h(x)h(y) Σ φ_α(x)(M⁻¹)_αβ φ*_β(y)`.
pub fn k_particle_density(basis: &OrbitalBasis, h: &[f64], points: &[usize]) -> Result<f64> {
    let k = points.len();
    if k == 0 || k > basis.n() {
        return Err(Error::Precondition(format!("need 1 ≤ k ≤ n, got k = {k}")));
    }
    let m = WeightedOverlapMatrix::new(basis, &squared(h))?;
    let minv = m.inverse()?;
    let phi = basis.matrix();
    let n = basis.n();
    let gamma = |x: usize, y: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                acc += phi[(x, a)] * minv[(a, b)] * phi[(y, b)].conj();
            }
        }
        acc * h[x] * h[y]
    };
    let g = DMatrix::from_fn(k, k, |i, j| gamma(points[i], points[j]));
    Ok(g.determinant().re / factorial(k))
}

/// Right-hand side of the trace identity, `det M · Tr[K M⁻¹]`, where `K`
/// carries the weight `|k|²`.
pub fn trace_identity_rhs(basis: &OrbitalBasis, h: &[f64], k: &[f64]) -> Result<f64> {
    let m = WeightedOverlapMatrix::new(basis, &squared(h))?;
    let kk = WeightedOverlapMatrix::new(basis, &squared(k))?;
    let minv = m.inverse()?;
    Ok(m.determinant() * (kk.matrix() * minv).trace().re)
}

/// Both sides of the trace identity; the left side is the exhaustive sum.
pub fn trace_identity(basis: &OrbitalBasis, h: &[f64], k: &[f64]) -> Result<(f64, f64)> {
    Ok((exhaustive::trace_identity_lhs(basis, h, k)?, trace_identity_rhs(basis, h, k)?))
}

/// Brute-force sums over configurations, used as oracles for the matrix
/// formulas. Sums run over sorted configurations and account for orderings
/// analytically.
pub mod exhaustive {
    use super::*;

    /// Largest particle number accepted by the configuration sums.
    pub const MAX_N: usize = 6;
    /// Largest number of sorted configurations accepted.
    pub const MAX_CONFIGS: f64 = 5e7;

    fn check(basis: &OrbitalBasis, free: usize) -> Result<()> {
        let n = basis.n();
        let v = basis.lattice().volume();
        if n > MAX_N {
            return Err(Error::Precondition(format!("exhaustive sums need n ≤ {MAX_N}, got {n}")));
        }
        let configs = crate::linalg::binomial(v, free);
        if configs > MAX_CONFIGS {
            return Err(Error::Precondition(format!("{configs:e} configurations exceed the exhaustive cap")));
        }
        Ok(())
    }

    /// `|det[φ_α(xᵢ)]|²` for the given rows.
    pub fn det_sq(basis: &OrbitalBasis, sites: &[usize]) -> f64 {
        let n = sites.len();
        if basis.is_real() {
            let mut buf = [0.0_f64; 64];
            for (i, &s) in sites.iter().enumerate() {
                for a in 0..n {
                    buf[i * n + a] = basis.value(s, a).re;
                }
            }
            let d = det_in_place(&mut buf[..n * n], n);
            d * d
        } else {
            let mut buf = [Complex64::new(0.0, 0.0); 64];
            for (i, &s) in sites.iter().enumerate() {
                for a in 0..n {
                    buf[i * n + a] = basis.value(s, a);
                }
            }
            det_in_place(&mut buf[..n * n], n).norm_sqr()
        }
    }

    /// `Σ_X r0^{3n} |Dₙ(X) Π h(xᵢ)|²` over ordered configurations.
    pub fn norm(basis: &OrbitalBasis, h: &[f64]) -> Result<f64> {
        let n = basis.n();
        check(basis, n)?;
        let r3n = basis.lattice().r0.powi(3 * n as i32);
        let v = basis.lattice().volume();
        // n! orderings cancel the 1/n! in |Dₙ|².
        Ok(r3n
            * sum_over_subsets(v, n, |c| {
                let w: f64 = c.iter().map(|&x| h[x] * h[x]).product();
                if w == 0.0 {
                    0.0
                } else {
                    w * det_sq(basis, c)
                }
            }))
    }

    /// Normalised `k`-particle density by summing `|Φ|²` over the remaining
    /// `n − k` coordinates.
    pub fn marginal_density(basis: &OrbitalBasis, h: &[f64], points: &[usize]) -> Result<f64> {
        let n = basis.n();
        let k = points.len();
        if k == 0 || k > n {
            return Err(Error::Precondition(format!("need 1 ≤ k ≤ n, got k = {k}")));
        }
        check(basis, n - k)?;
        let mut sorted = points.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Ok(0.0);
        }
        let total = norm(basis, h)?;
        let v = basis.lattice().volume();
        let rest: Vec<usize> = (0..v).filter(|x| !sorted.contains(x)).collect();
        let fixed_w: f64 = points.iter().map(|&x| h[x] * h[x]).product();
        let r3 = basis.lattice().r0.powi(3 * (n - k) as i32);
        let sum = sum_over_subsets(rest.len(), n - k, |c| {
            let mut sites = [0usize; MAX_N];
            sites[..k].copy_from_slice(points);
            let mut w = fixed_w;
            for (i, &j) in c.iter().enumerate() {
                sites[k + i] = rest[j];
                w *= h[rest[j]] * h[rest[j]];
            }
            if w == 0.0 {
                0.0
            } else {
                w * det_sq(basis, &sites[..n])
            }
        });
        Ok(r3 * sum / total / factorial(k))
    }

    /// `Σᵢ ⟨Φ'ᵢ|Φ'ᵢ⟩` with `Φ'ᵢ = Dₙ k(xᵢ) Π_{j≠i} h(xⱼ)`.
    pub fn trace_identity_lhs(basis: &OrbitalBasis, h: &[f64], k: &[f64]) -> Result<f64> {
        let n = basis.n();
        check(basis, n)?;
        let r3n = basis.lattice().r0.powi(3 * n as i32);
        let v = basis.lattice().volume();
        Ok(r3n
            * sum_over_subsets(v, n, |c| {
                let mut w = 0.0;
                for i in 0..n {
                    let mut p = k[c[i]] * k[c[i]];
                    for (j, &x) in c.iter().enumerate() {
                        if j != i {
                            p *= h[x] * h[x];
                        }
                    }
                    w += p;
                }
                if w == 0.0 {
                    0.0
                } else {
                    w * det_sq(basis, c)
                }
            }))
    }
}

/// `h(x) = Π_j f(x − y_j)` on every site of the basis' box.
pub fn jastrow_weight(basis: &OrbitalBasis, f: &JastrowF, ys: &[LatticeVector]) -> Vec<f64> {
    let lattice = basis.lattice();
    (0..lattice.volume())
        .map(|x| {
            let cx = lattice.coords(x);
            ys.iter().map(|&y| f.value(lattice::sub(cx, y))).product()
        })
        .collect()
}

fn check_separation(ys: &[LatticeVector], s: f64, r0: f64) -> Result<()> {
    for i in 0..ys.len() {
        for j in 0..i {
            let d = lattice::norm(lattice::sub(ys[i], ys[j])) * r0;
            if d < s * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "positions {:?} and {:?} are {d} apart, closer than s = {s}",
                    ys[i], ys[j]
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Report {
    pub n: usize,
    pub y_count: usize,
    /// `‖1 − M_Y‖` from a dense eigendecomposition.
    pub norm: f64,
    /// `‖M_Y⁻¹‖` by direct inversion.
    pub inverse_norm: f64,
    /// `1/(1 − ‖1 − M_Y‖)`, equal to `inverse_norm` when `norm < 1`.
    pub inverse_norm_formula: f64,
    /// `aR²/s³`.
    pub scattering_term: f64,
    /// `n^{2/3} s²/ℓ²`.
    pub kinetic_term: f64,
    /// `s² λₙ`, the same term with the n-th Dirichlet eigenvalue as Fermi energy.
    pub fermi_proxy_term: f64,
    pub constant: f64,
    pub bound: f64,
    pub holds: bool,
    /// `‖1 − M_Y‖ ≥ 0.99`: reported only, no bound asserted.
    pub near_singular: bool,
}

/// The norm of `1 − M_Y` for spin-down positions `ys`, compared with
/// `C (aR²/s³ + n^{2/3} s²/ℓ²)`.
pub fn lemma2_bound(basis: &OrbitalBasis, f: &JastrowF, ys: &[LatticeVector], s: f64, constant: f64) -> Result<Lemma2Report> {
    let lattice = basis.lattice();
    let r0 = lattice.r0;
    check_separation(ys, s, r0)?;
    if !f.is_identity() && s < 5.0 * f.radius() * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("s = {s} must be at least 5R = {}", 5.0 * f.radius())));
    }
    let h = jastrow_weight(basis, f, ys);
    let m = WeightedOverlapMatrix::new(basis, &squared(&h))?;
    let norm = m.distance_from_identity();
    let inverse_norm = match m.inverse() {
        Ok(inv) => hermitian_norm(&inv),
        Err(_) => f64::INFINITY,
    };
    let n = basis.n() as f64;
    let l = lattice.side_length();
    let scattering_term = f.scattering_length() * f.radius().powi(2) / s.powi(3);
    let kinetic_term = n.powf(2.0 / 3.0) * (s / l).powi(2);
    let lambda_n = basis.modes().last().map_or(0.0, |m| m.energy);
    let bound = constant * (scattering_term + kinetic_term);
    let near_singular = norm >= 0.99;
    Ok(Lemma2Report {
        n: basis.n(),
        y_count: ys.len(),
        norm,
        inverse_norm,
        inverse_norm_formula: if norm < 1.0 { 1.0 / (1.0 - norm) } else { f64::INFINITY },
        scattering_term,
        kinetic_term,
        fermi_proxy_term: s * s * lambda_n,
        constant,
        bound,
        holds: near_singular || norm <= bound,
        near_singular,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma3Report {
    pub n: usize,
    /// `Σ_X D²F²G²`.
    pub with_cutoff: f64,
    /// `Σ_X D²F²`.
    pub without_cutoff: f64,
    pub ratio: f64,
    pub inverse_norm: f64,
    /// `n^{8/3} ‖M_Y⁻¹‖² (s/ℓ)⁵`.
    pub scale: f64,
    pub constant: f64,
    pub lower_bound: f64,
    pub holds: bool,
}

/// Exhaustive ratio `Σ D²F²G² / Σ D²F²` at fixed spin-down positions.
pub fn lemma3_ratio(
    basis: &OrbitalBasis,
    f: &JastrowF,
    g: &JastrowG,
    ys: &[LatticeVector],
    constant: f64,
) -> Result<Lemma3Report> {
    let n = basis.n();
    if n > 4 {
        return Err(Error::Precondition(format!("the exhaustive ratio needs n ≤ 4, got {n}")));
    }
    let lattice = *basis.lattice();
    let v = lattice.volume();
    if crate::linalg::binomial(v, n) > 1e9 {
        return Err(Error::Precondition("too many configurations for the exhaustive ratio".into()));
    }
    let h = jastrow_weight(basis, f, ys);
    let coords: Vec<LatticeVector> = (0..v).map(|x| lattice.coords(x)).collect();
    let w: Vec<f64> = squared(&h);
    let pair = |c: &[usize]| -> (f64, f64) {
        let weight: f64 = c.iter().map(|&x| w[x]).product();
        if weight == 0.0 {
            return (0.0, 0.0);
        }
        let d2 = exhaustive::det_sq(basis, c) * weight;
        let mut gg = 1.0;
        'outer: for i in 0..c.len() {
            for j in 0..i {
                gg *= g.value(lattice::sub(coords[c[i]], coords[c[j]]));
                if gg == 0.0 {
                    break 'outer;
                }
            }
        }
        (d2, d2 * gg * gg)
    };
    let without_cutoff = sum_over_subsets(v, n, |c| pair(c).0);
    let with_cutoff = sum_over_subsets(v, n, |c| pair(c).1);
    if !(without_cutoff > f64::MIN_POSITIVE * 1e10) {
        return Err(Error::Degenerate(format!(
            "Σ D²F² = {without_cutoff:e} underflows; the spin-down positions exclude every configuration"
        )));
    }
    let ratio = with_cutoff / without_cutoff;
    let m = WeightedOverlapMatrix::new(basis, &w)?;
    let inverse_norm = hermitian_norm(&m.inverse()?);
    let scale = (n as f64).powf(8.0 / 3.0) * inverse_norm.powi(2) * (g.s() / lattice.side_length()).powi(5);
    let lower_bound = 1.0 - constant * scale;
    Ok(Lemma3Report {
        n,
        with_cutoff,
        without_cutoff,
        ratio,
        inverse_norm,
        scale,
        constant,
        lower_bound,
        holds: ratio >= lower_bound - 1e-12,
    })
}

/// `Tr K_Y` from the matrix and from `Σ_j (ρ ∗ ξ)(y_j)`; the two agree when
/// the supports of `∇f` around different `y_j` are disjoint.
pub fn trace_k_y(basis: &OrbitalBasis, f: &JastrowF, ys: &[LatticeVector]) -> Result<(f64, f64)> {
    let lattice = *basis.lattice();
    let r0 = lattice.r0;
    let v = lattice.volume();
    let h = jastrow_weight(basis, f, ys);
    let y_sites: Vec<Option<usize>> = ys.iter().map(|&y| lattice.index(y)).collect();
    let u_half = match f.repulsion() {
        crate::scattering::Repulsion::Finite(u) => 0.5 * u,
        crate::scattering::Repulsion::HardCore => 0.0,
    };
    // |∇h|² with h continued outside the box by the same product formula.
    let hval = |c: LatticeVector| -> f64 { ys.iter().map(|&y| f.value(lattice::sub(c, y))).product() };
    let k2: Vec<f64> = (0..v)
        .map(|x| {
            let cx = lattice.coords(x);
            let hx = h[x];
            let mut g = 0.0;
            for d in lattice::NEIGHBOR_OFFSETS {
                let diff = hx - hval(lattice::add(cx, d));
                g += diff * diff;
            }
            let mut k = g / (2.0 * r0 * r0);
            if y_sites.contains(&Some(x)) {
                k += u_half * hx * hx;
            }
            k
        })
        .collect();
    let matrix = WeightedOverlapMatrix::new(basis, &k2)?.matrix().trace().re;
    let rho: Vec<f64> = (0..v).map(|x| basis.density(x)).collect();
    let mut conv = 0.0;
    for &y in ys {
        for x in 0..v {
            let d = lattice::sub(lattice.coords(x), y);
            let fx = f.value(d);
            let mut g = 0.0;
            for dd in lattice::NEIGHBOR_OFFSETS {
                let diff = fx - f.value(lattice::add(d, dd));
                g += diff * diff;
            }
            let mut xi = g / (2.0 * r0 * r0);
            if d == [0, 0, 0] {
                xi += u_half * fx * fx;
            }
            conv += r0.powi(3) * rho[x] * xi;
        }
    }
    Ok((matrix, conv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, BoxSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis(m: usize, n: usize, boundary: Boundary) -> OrbitalBasis {
        OrbitalBasis::lowest(&BoxSpec::cubic(m, boundary, 1.0).unwrap(), n).unwrap()
    }

    fn random_h(v: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..v).map(|_| rng.random_range(0.05..=1.0)).collect()
    }

    #[test]
    fn unit_weight_gives_identity() {
        let b = basis(3, 4, Boundary::Dirichlet);
        let norm = weighted_norm(&b, &vec![1.0; 27]).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
        let c = 0.7;
        let norm = weighted_norm(&b, &vec![c; 27]).unwrap();
        assert!((norm - c.powi(8)).abs() < 1e-12);
    }

    #[test]
    fn norm_matches_exhaustive() {
        for boundary in [Boundary::Dirichlet, Boundary::Periodic] {
            let b = basis(3, 3, boundary);
            let h = random_h(27, 11);
            let det = weighted_norm(&b, &h).unwrap();
            let ex = exhaustive::norm(&b, &h).unwrap();
            assert!(((det - ex) / ex).abs() < 1e-10, "{boundary}: {det} vs {ex}");
        }
    }

    #[test]
    fn densities_match_exhaustive() {
        let b = basis(3, 3, Boundary::Dirichlet);
        let h = random_h(27, 5);
        for pts in [vec![4], vec![2, 19], vec![1, 13, 23]] {
            let f = k_particle_density(&b, &h, &pts).unwrap();
            let e = exhaustive::marginal_density(&b, &h, &pts).unwrap();
            assert!(((f - e) / e).abs() < 1e-9, "{pts:?}: {f} vs {e}");
        }
        assert!(k_particle_density(&b, &h, &[3, 3]).unwrap().abs() < 1e-14);
        assert_eq!(exhaustive::marginal_density(&b, &h, &[3, 3]).unwrap(), 0.0);
    }

    #[test]
    fn full_density_is_determinant() {
        let b = basis(2, 3, Boundary::Dirichlet);
        let h = vec![1.0; 8];
        let pts = [1, 4, 6];
        let d = k_particle_density(&b, &h, &pts).unwrap();
        assert!((d - exhaustive::det_sq(&b, &pts) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn trace_identity_cases() {
        let b = basis(3, 3, Boundary::Dirichlet);
        let h = random_h(27, 8);
        let (l, r) = trace_identity(&b, &h, &vec![0.0; 27]).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
        let (l, r) = trace_identity(&b, &vec![1.0; 27], &vec![1.0; 27]).unwrap();
        assert!((l - 3.0).abs() < 1e-10 && (r - 3.0).abs() < 1e-10);
        let k = random_h(27, 9);
        let (l, r) = trace_identity(&b, &h, &k).unwrap();
        assert!(((l - r) / r).abs() < 1e-9);
    }

    #[test]
    fn overlap_spectrum_in_unit_interval() {
        let b = basis(4, 5, Boundary::Dirichlet);
        let m = WeightedOverlapMatrix::new(&b, &squared(&random_h(64, 3))).unwrap();
        let ev = m.eigenvalues();
        assert!(ev[0] >= -1e-12 && ev[ev.len() - 1] <= 1.0 + 1e-12);
    }

    #[test]
    fn singular_overlap_reported() {
        let b = basis(2, 2, Boundary::Dirichlet);
        let h = vec![0.0; 8];
        assert!(matches!(k_particle_density(&b, &h, &[0]), Err(Error::Singular { .. })));
    }
}
