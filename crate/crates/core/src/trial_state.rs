//! The Slater–Jastrow trial state: the opposite-spin factor `f` built from
//! the scattering solution on `Ω`, the same-spin cutoff `g`, amplitude
//! evaluation and the `ξ` sum with its boundary decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_fermi::OrbitalBasis;
use crate::lattice::{self, BoxSpec, LatticeRegion, LatticeVector, NEIGHBOR_OFFSETS};
use crate::linalg::{det_in_place, factorial, MAX_SMALL};
use crate::scattering::{Repulsion, ScatteringProfile};

/// Default smallness parameter: `R ≥ r0/δ` is required when building `f`.
pub const DEFAULT_DELTA: f64 = 0.5;

/// Regions with fewer sites than this are replaced by `Ω = {0}`.
const MIN_OMEGA_SITES: usize = 7;

/// Opposite-spin Jastrow factor: `f = φ/⟨φ⟩_{∂Ω}` on `Ω`, `f = 1` outside.
#[derive(Debug, Clone)]
pub struct JastrowF {
    radius: f64,
    a: f64,
    r0: f64,
    repulsion: Repulsion,
    boundary_average: f64,
    omega: LatticeRegion,
    inner_boundary: Vec<LatticeVector>,
    outer_boundary: Vec<LatticeVector>,
    extent: i64,
    values: Vec<f64>,
    degenerate: bool,
    profile: Option<ScatteringProfile>,
}

impl JastrowF {
    /// `f ≡ 1`.
    pub fn identity(r0: f64) -> Self {
        Self {
            radius: 0.0,
            a: 0.0,
            r0,
            repulsion: Repulsion::zero(),
            boundary_average: 1.0,
            omega: LatticeRegion::default(),
            inner_boundary: Vec::new(),
            outer_boundary: Vec::new(),
            extent: -1,
            values: Vec::new(),
            degenerate: false,
            profile: None,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn scattering_length(&self) -> f64 {
        self.a
    }
    pub fn r0(&self) -> f64 {
        self.r0
    }
    pub fn repulsion(&self) -> Repulsion {
        self.repulsion
    }
    pub fn boundary_average(&self) -> f64 {
        self.boundary_average
    }
    pub fn omega(&self) -> &LatticeRegion {
        &self.omega
    }
    /// `∂Ω`: sites of `Ω` with a neighbour outside.
    pub fn inner_boundary(&self) -> &[LatticeVector] {
        &self.inner_boundary
    }
    /// `∂Ω^c`: sites outside `Ω` with a neighbour inside.
    pub fn outer_boundary(&self) -> &[LatticeVector] {
        &self.outer_boundary
    }
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
    pub fn is_identity(&self) -> bool {
        self.extent < 0
    }

    /// Radius of the ball with the same volume as `Ω`, in length units.
    pub fn effective_radius(&self) -> f64 {
        (3.0 * self.omega.len() as f64 / (4.0 * std::f64::consts::PI)).cbrt() * self.r0
    }

    /// Largest `|x|` over `Ω`, in length units.
    pub fn max_radius(&self) -> f64 {
        self.omega.max_norm() * self.r0
    }

    /// `f(d)` for a displacement `d`.
    #[inline]
    pub fn value(&self, d: LatticeVector) -> f64 {
        let e = self.extent;
        if d.iter().any(|c| c.abs() > e) {
            return 1.0;
        }
        let side = (2 * e + 1) as usize;
        let idx = |c: i64| (c + e) as usize;
        self.values[(idx(d[0]) * side + idx(d[1])) * side + idx(d[2])]
    }
}

/// Builds `f` for the scattering profile and radius `R` (length units).
/// `R ≥ r0/δ` is required; the table must cover `B_{2R + r0}`.
pub fn build_f(profile: &ScatteringProfile, radius: f64, delta: f64) -> Result<JastrowF> {
    let r0 = profile.r0();
    let a = profile.scattering_length();
    if a == 0.0 {
        return Ok(JastrowF::identity(r0));
    }
    if !(delta > 0.0) || radius < r0 / delta {
        return Err(Error::Precondition(format!(
            "R = {radius} must be at least r0/δ = {}",
            r0 / delta
        )));
    }
    let scan = 2.0 * radius / r0;
    if profile.tab_radius() < (scan + 1.0) * r0 {
        return Err(Error::TabulationRange {
            point: [(scan + 1.0).ceil() as i64, 0, 0],
            radius: profile.tab_radius(),
        });
    }
    let threshold = 1.0 - a / radius;
    let scan_ball = LatticeRegion::ball(scan);
    let mut level_set = Vec::new();
    for x in scan_ball.sorted_points() {
        if profile.phi(x)? <= threshold {
            level_set.push(x);
        }
    }
    let level = LatticeRegion::from_points(level_set);
    if !level.contains(&[0, 0, 0]) {
        return Err(Error::Construction("the origin is not in the level set of φ".into()));
    }
    if level.outer_boundary().iter().any(|p| !scan_ball.contains(p)) {
        return Err(Error::Construction(format!("Ω reaches the scan radius 2R = {}", 2.0 * radius)));
    }
    let degenerate = level.len() < MIN_OMEGA_SITES;
    let omega = if degenerate {
        LatticeRegion::from_points([[0, 0, 0]])
    } else {
        if !level.is_simply_connected() {
            return Err(Error::Construction("Ω is not simply connected".into()));
        }
        level
    };

    let inner = if degenerate { vec![[0, 0, 0]] } else { omega.inner_boundary() };
    let outer = omega.outer_boundary();
    let avg = inner.iter().map(|&x| profile.phi(x)).sum::<Result<f64>>()? / inner.len() as f64;

    if !degenerate {
        let tol = 10.0 * a * r0 / (radius * radius);
        if (avg - threshold).abs() > tol {
            return Err(Error::Construction(format!(
                "boundary average {avg} differs from 1 − a/R = {threshold} by more than {tol:e}"
            )));
        }
        for &x in &inner {
            let p = profile.phi(x)?;
            if (p - avg).abs() > tol {
                return Err(Error::Construction(format!(
                    "φ({x:?}) = {p} differs from the boundary average {avg} by more than {tol:e}"
                )));
            }
        }
    }

    let extent = omega.sorted_points().iter().flat_map(|p| p.iter()).map(|c| c.abs()).max().unwrap_or(0);
    let side = (2 * extent + 1) as usize;
    let mut values = vec![1.0; side * side * side];
    for x in omega.sorted_points() {
        let v = if avg > 0.0 { profile.phi(x)? / avg } else { 0.0 };
        let idx = |c: i64| (c + extent) as usize;
        values[(idx(x[0]) * side + idx(x[1])) * side + idx(x[2])] = v;
    }

    Ok(JastrowF {
        radius,
        a,
        r0,
        repulsion: profile.repulsion(),
        boundary_average: avg,
        omega,
        inner_boundary: inner,
        outer_boundary: outer,
        extent,
        values,
        degenerate,
        profile: Some(profile.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampShape {
    Linear,
    Smoothstep,
}

impl std::str::FromStr for RampShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(RampShape::Linear),
            "smoothstep" => Ok(RampShape::Smoothstep),
            other => Err(Error::Precondition(format!("unknown ramp shape `{other}`"))),
        }
    }
}

/// Same-spin cutoff: `g = 0` for `|x| ≤ s`, `g = 1` for `|x| ≥ 2s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JastrowG {
    s: f64,
    r0: f64,
    shape: RampShape,
    identity: bool,
}

impl JastrowG {
    /// `g ≡ 1`.
    pub fn identity(r0: f64) -> Self {
        Self {
            s: 0.0,
            r0,
            shape: RampShape::Linear,
            identity: true,
        }
    }

    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn shape(&self) -> RampShape {
        self.shape
    }
    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `g` at distance `r` (length units).
    pub fn radial(&self, r: f64) -> f64 {
        if self.identity {
            return 1.0;
        }
        if r <= self.s {
            return 0.0;
        }
        if r >= 2.0 * self.s {
            return 1.0;
        }
        let t = (r - self.s) / self.s;
        match self.shape {
            RampShape::Linear => t,
            RampShape::Smoothstep => t * t * (3.0 - 2.0 * t),
        }
    }

    #[inline]
    pub fn value(&self, d: LatticeVector) -> f64 {
        if self.identity {
            return 1.0;
        }
        self.radial(lattice::norm(d) * self.r0)
    }

    /// Largest `|g(x') − g(x)|` over bonds with `|x| ≤ 4s`.
    pub fn max_bond_increment(&self) -> f64 {
        if self.identity {
            return 0.0;
        }
        let ball = LatticeRegion::ball(4.0 * self.s / self.r0);
        let mut best = 0.0_f64;
        for x in ball.sorted_points() {
            let gx = self.value(x);
            for d in NEIGHBOR_OFFSETS {
                best = best.max((self.value(lattice::add(x, d)) - gx).abs());
            }
        }
        best
    }
}

pub fn build_g(s: f64, shape: RampShape, r0: f64) -> Result<JastrowG> {
    if !(s >= 2.0 * r0) || !s.is_finite() {
        return Err(Error::Precondition(format!("cutoff s = {s} must be at least 2 r0 = {}", 2.0 * r0)));
    }
    Ok(JastrowG {
        s,
        r0,
        shape,
        identity: false,
    })
}

/// `Ψ(X,Y) = Dₙ(X) Dₘ(Y) Gₙ(X) Gₘ(Y) F(X,Y)` on a Dirichlet box.
#[derive(Debug, Clone)]
pub struct TrialState {
    up: OrbitalBasis,
    down: OrbitalBasis,
    f: JastrowF,
    g: JastrowG,
    coords: Vec<LatticeVector>,
}

impl TrialState {
    pub fn new(up: OrbitalBasis, down: OrbitalBasis, f: JastrowF, g: JastrowG) -> Result<Self> {
        if up.lattice() != down.lattice() {
            return Err(Error::Precondition("spin-up and spin-down orbitals live on different boxes".into()));
        }
        if !up.is_real() {
            return Err(Error::Precondition("the trial state needs real (Dirichlet) orbitals".into()));
        }
        if up.n() > MAX_SMALL || down.n() > MAX_SMALL {
            return Err(Error::Precondition(format!("at most {MAX_SMALL} particles per spin")));
        }
        let lattice = *up.lattice();
        let coords = (0..lattice.volume()).map(|i| lattice.coords(i)).collect();
        Ok(Self { up, down, f, g, coords })
    }

    /// Lowest-mode orbitals on `lattice` with the given Jastrow factors.
    pub fn lowest(lattice: &BoxSpec, n_up: usize, n_down: usize, f: JastrowF, g: JastrowG) -> Result<Self> {
        Self::new(OrbitalBasis::lowest(lattice, n_up)?, OrbitalBasis::lowest(lattice, n_down)?, f, g)
    }

    pub fn up(&self) -> &OrbitalBasis {
        &self.up
    }
    pub fn down(&self) -> &OrbitalBasis {
        &self.down
    }
    pub fn f(&self) -> &JastrowF {
        &self.f
    }
    pub fn g(&self) -> &JastrowG {
        &self.g
    }
    pub fn lattice(&self) -> &BoxSpec {
        self.up.lattice()
    }
    pub fn n_up(&self) -> usize {
        self.up.n()
    }
    pub fn n_down(&self) -> usize {
        self.down.n()
    }
    pub fn coords(&self, site: usize) -> LatticeVector {
        self.coords[site]
    }

    /// `Dₙ(X) = (n!)^{-1/2} det[φ_α(xᵢ)]` for arbitrary lattice positions;
    /// positions outside the box give zero.
    pub fn slater(basis: &OrbitalBasis, sites: &[Option<usize>]) -> f64 {
        let n = sites.len();
        debug_assert_eq!(n, basis.n());
        if n == 0 {
            return 1.0;
        }
        let mut buf = [0.0_f64; MAX_SMALL * MAX_SMALL];
        for (i, s) in sites.iter().enumerate() {
            let Some(s) = *s else { return 0.0 };
            for alpha in 0..n {
                buf[i * n + alpha] = basis.value(s, alpha).re;
            }
        }
        det_in_place(&mut buf[..n * n], n) / factorial(n).sqrt()
    }

    /// `Gₙ(X) = Π_{i<j} g(xᵢ − xⱼ)`.
    pub fn same_spin_jastrow(&self, xs: &[LatticeVector]) -> f64 {
        if self.g.is_identity() {
            return 1.0;
        }
        let mut p = 1.0;
        for i in 0..xs.len() {
            for j in 0..i {
                p *= self.g.value(lattice::sub(xs[i], xs[j]));
                if p == 0.0 {
                    return 0.0;
                }
            }
        }
        p
    }

    /// `F(X,Y) = Π_{i,j} f(xᵢ − yⱼ)`.
    pub fn cross_jastrow(&self, xs: &[LatticeVector], ys: &[LatticeVector]) -> f64 {
        if self.f.is_identity() {
            return 1.0;
        }
        let mut p = 1.0;
        for x in xs {
            for y in ys {
                p *= self.f.value(lattice::sub(*x, *y));
            }
        }
        p
    }

    /// `Ψ(X,Y)` for site indices (any order).
    pub fn amplitude(&self, xs: &[usize], ys: &[usize]) -> f64 {
        let xo: Vec<Option<usize>> = xs.iter().map(|&s| Some(s)).collect();
        let yo: Vec<Option<usize>> = ys.iter().map(|&s| Some(s)).collect();
        let d = Self::slater(&self.up, &xo) * Self::slater(&self.down, &yo);
        if d == 0.0 {
            return 0.0;
        }
        let xc: Vec<_> = xs.iter().map(|&s| self.coords[s]).collect();
        let yc: Vec<_> = ys.iter().map(|&s| self.coords[s]).collect();
        d * self.same_spin_jastrow(&xc) * self.same_spin_jastrow(&yc) * self.cross_jastrow(&xc, &yc)
    }
}

/// `Σ r0³ ξ` and its rearrangements.
#[derive(Debug, Clone, Serialize)]
pub struct XiReport {
    /// `Σ r0³ [|∇f|² + (U/2) δ_{x,0} f²]` summed directly.
    pub total: f64,
    /// `Σ r0³ f(−Δf) + (U/2) r0³ f(0)²`.
    pub by_parts: f64,
    /// Boundary form over `∂Ω` and `∂Ω^c`.
    pub boundary_split: f64,
    /// First term of the final form: the boundary fluctuation double sum.
    pub fluctuation: f64,
    /// Second term of the final form, `(1/⟨φ⟩) r0 Σ* (φ(x') − φ(x))`.
    pub flux_term: f64,
    /// `4πa/⟨φ⟩_{∂Ω}`.
    pub flux_closed_form: f64,
    pub boundary_average: f64,
    /// `Σξ / (4πa)`.
    pub ratio: f64,
    /// `(Σξ/(4πa) − 1)/(a/R)`.
    pub measured_constant: f64,
    pub omega_sites: usize,
    pub effective_radius: f64,
    pub degenerate: bool,
}

impl XiReport {
    /// Largest relative disagreement between the direct sum and its three
    /// rearrangements.
    pub fn identity_error(&self) -> f64 {
        let scale = self.total.abs().max(f64::MIN_POSITIVE);
        let a3 = self.fluctuation + self.flux_term;
        [
            (self.total - self.by_parts).abs(),
            (self.by_parts - self.boundary_split).abs(),
            (self.boundary_split - a3).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
            / scale
    }
}

/// Evaluates `Σₓ r0³ ξ(x)` for the factor `f` and every intermediate form of
/// its rearrangement into a flux plus a boundary fluctuation.
pub fn xi_sum(f: &JastrowF) -> Result<XiReport> {
    let r0 = f.r0;
    let four_pi_a = 4.0 * std::f64::consts::PI * f.a;
    if f.is_identity() {
        return Ok(XiReport {
            total: 0.0,
            by_parts: 0.0,
            boundary_split: 0.0,
            fluctuation: 0.0,
            flux_term: 0.0,
            flux_closed_form: 0.0,
            boundary_average: 1.0,
            ratio: if four_pi_a > 0.0 { 0.0 } else { 1.0 },
            measured_constant: 0.0,
            omega_sites: 0,
            effective_radius: 0.0,
            degenerate: false,
        });
    }
    let profile = f.profile.as_ref().expect("non-identity f carries its profile");
    let f0 = f.value([0, 0, 0]);
    let onsite = match f.repulsion {
        Repulsion::Finite(u) => 0.5 * u * r0.powi(3) * f0 * f0,
        Repulsion::HardCore => 0.0,
    };

    let mut support = f.omega.sorted_points();
    support.extend_from_slice(&f.outer_boundary);
    support.sort_unstable();

    let mut grad = 0.0;
    let mut parts = 0.0;
    for &x in &support {
        let fx = f.value(x);
        let mut g2 = 0.0;
        let mut lap = 0.0;
        for d in NEIGHBOR_OFFSETS {
            let diff = fx - f.value(lattice::add(x, d));
            g2 += diff * diff;
            lap += diff;
        }
        grad += r0 * 0.5 * g2;
        // The hard-core origin has f(0) = 0, so its product vanishes.
        parts += r0 * fx * lap;
    }
    let total = grad + onsite;
    let by_parts = parts + onsite;

    let avg = f.boundary_average;
    let mut split_inner = 0.0;
    let mut fluctuation = 0.0;
    let mut flux = 0.0;
    for &x in &f.inner_boundary {
        let p = profile.phi(x)? / avg;
        let mut outer_sum = 0.0;
        for d in NEIGHBOR_OFFSETS {
            let y = lattice::add(x, d);
            if !f.omega.contains(&y) {
                let q = profile.phi(y)? / avg;
                outer_sum += q - 1.0;
                flux += profile.phi(y)? - profile.phi(x)?;
            }
        }
        split_inner += r0 * p * outer_sum;
        fluctuation += r0 * (p - 1.0) * outer_sum;
    }
    let mut split_outer = 0.0;
    for &y in &f.outer_boundary {
        let mut s = 0.0;
        for d in NEIGHBOR_OFFSETS {
            let x = lattice::add(y, d);
            if f.omega.contains(&x) {
                s += 1.0 - profile.phi(x)? / avg;
            }
        }
        split_outer += r0 * s;
    }
    let ratio = total / four_pi_a;
    Ok(XiReport {
        total,
        by_parts,
        boundary_split: split_inner + split_outer,
        fluctuation,
        flux_term: r0 * flux / avg,
        flux_closed_form: four_pi_a / avg,
        boundary_average: avg,
        ratio,
        measured_constant: (ratio - 1.0) / (f.a / f.radius),
        omega_sites: f.omega.len(),
        effective_radius: f.effective_radius(),
        degenerate: f.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::scattering::LatticeSpec;

    fn profile(u: Repulsion) -> ScatteringProfile {
        ScatteringProfile::new(u, &LatticeSpec::default(), 30.0).unwrap()
    }

    #[test]
    fn identity_when_no_interaction() {
        let f = build_f(&profile(Repulsion::zero()), 10.0, DEFAULT_DELTA).unwrap();
        assert!(f.is_identity());
        assert_eq!(f.value([0, 0, 0]), 1.0);
        assert_eq!(xi_sum(&f).unwrap().total, 0.0);
    }

    #[test]
    fn f_definition() {
        let p = profile(Repulsion::Finite(1.0));
        let f = build_f(&p, 10.0, DEFAULT_DELTA).unwrap();
        assert!(!f.is_degenerate());
        assert!(f.omega().is_simply_connected());
        let expect = p.phi([0, 0, 0]).unwrap() / f.boundary_average();
        assert_eq!(f.value([0, 0, 0]), expect);
        for &x in f.outer_boundary() {
            assert_eq!(f.value(x), 1.0);
        }
        let a = p.scattering_length();
        let tol = 10.0 * a / 100.0;
        for &x in f.inner_boundary() {
            assert!((f.value(x) - 1.0).abs() <= tol);
        }
        for x in f.omega().sorted_points() {
            let v = f.value(x);
            assert!((0.0..=1.0 + tol).contains(&v));
        }
    }

    #[test]
    fn radius_precondition() {
        let p = profile(Repulsion::Finite(1.0));
        assert!(matches!(build_f(&p, 1.5, DEFAULT_DELTA), Err(Error::Precondition(_))));
        assert!(matches!(build_f(&p, 20.0, DEFAULT_DELTA), Err(Error::TabulationRange { .. })));
    }

    #[test]
    fn degenerate_fallback() {
        let p = profile(Repulsion::HardCore);
        let f = build_f(&p, 0.8, 2.0).unwrap();
        assert!(f.is_degenerate());
        assert_eq!(f.omega().len(), 1);
        assert_eq!(f.value([0, 0, 0]), 0.0);
        assert_eq!(f.value([1, 0, 0]), 1.0);
    }

    #[test]
    fn g_profile() {
        let g = build_g(4.0, RampShape::Linear, 1.0).unwrap();
        assert_eq!(g.radial(4.0), 0.0);
        assert_eq!(g.radial(8.0), 1.0);
        assert_eq!(g.radial(6.0), 0.5);
        assert!(g.max_bond_increment() <= 4.0 / 4.0 * 1.0);
        assert!(build_g(1.5, RampShape::Linear, 1.0).is_err());
        let sm = build_g(3.0, RampShape::Smoothstep, 1.0).unwrap();
        assert_eq!(sm.radial(4.5), 0.5);
        assert!(sm.max_bond_increment() <= 4.0 / 3.0);
    }

    #[test]
    fn amplitude_symmetries() {
        let lattice = BoxSpec::cubic(4, Boundary::Dirichlet, 1.0).unwrap();
        let p = profile(Repulsion::Finite(1.0));
        let f = build_f(&p, 2.0, DEFAULT_DELTA).unwrap();
        let g = build_g(2.0, RampShape::Linear, 1.0).unwrap();
        let st = TrialState::lowest(&lattice, 2, 2, f, g).unwrap();
        let a = st.amplitude(&[0, 63], &[5, 40]);
        assert!(a != 0.0);
        assert_eq!(st.amplitude(&[63, 0], &[5, 40]), -a);
        assert_eq!(st.amplitude(&[0, 63], &[40, 5]), -a);
        assert_eq!(st.amplitude(&[3, 3], &[5, 40]), 0.0);
        // Sites 0 and 1 are one spacing apart, inside s.
        assert_eq!(st.amplitude(&[0, 1], &[5, 40]), 0.0);
    }

    #[test]
    fn free_reduction() {
        let lattice = BoxSpec::cubic(3, Boundary::Dirichlet, 1.0).unwrap();
        let st = TrialState::lowest(&lattice, 2, 1, JastrowF::identity(1.0), JastrowG::identity(1.0)).unwrap();
        let d = TrialState::slater(st.up(), &[Some(2), Some(7)]) * TrialState::slater(st.down(), &[Some(11)]);
        assert_eq!(st.amplitude(&[2, 7], &[11]), d);
    }

    #[test]
    fn xi_rearrangements_agree() {
        for u in [Repulsion::Finite(1.0), Repulsion::HardCore] {
            let p = profile(u);
            let f = build_f(&p, 10.0, DEFAULT_DELTA).unwrap();
            let r = xi_sum(&f).unwrap();
            assert!(r.identity_error() < 1e-12, "{r:?}");
            assert!((r.flux_term - r.flux_closed_form).abs() < 1e-10 * r.flux_closed_form);
            assert!(r.ratio >= 1.0 && r.ratio <= 1.0 + 10.0 * p.scattering_length() / 10.0, "{r:?}");
        }
    }
}
