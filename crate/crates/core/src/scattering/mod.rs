//! Zero-energy scattering on the cubic lattice: the constant γ, the
//! scattering length, the tabulated solution φ and checks of its defining
//! identities.

mod gamma;
mod green;

use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{self, LatticeRegion, LatticeVector, NEIGHBOR_OFFSETS};

pub use gamma::{
    dispersion_inverse, gamma_gauss_legendre, gamma_midpoint_richardson, gauss_legendre_pyramids,
    midpoint_full_zone, midpoint_octant, GammaEstimate, GammaOptions,
};
pub use green::{scaled_bessel_i, GreenTable};

/// Default tabulation radius for φ, in units of `r0`.
pub const DEFAULT_TAB_RADIUS: f64 = 60.0;

/// On-site repulsion `U` (energy units, `ħ²/2m = 1`), possibly hard-core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Repulsion {
    Finite(f64),
    HardCore,
}

impl Repulsion {
    pub fn new(u: f64) -> Result<Self> {
        if u.is_nan() || u < 0.0 {
            return Err(Error::Domain(format!(
                "on-site repulsion must be non-negative, got {u}"
            )));
        }
        Ok(if u.is_infinite() {
            Repulsion::HardCore
        } else {
            Repulsion::Finite(u)
        })
    }

    pub fn zero() -> Self {
        Repulsion::Finite(0.0)
    }

    pub fn is_hard_core(&self) -> bool {
        matches!(self, Repulsion::HardCore)
    }

    /// `U` as a float, `+∞` for hard-core.
    pub fn value(&self) -> f64 {
        match *self {
            Repulsion::Finite(u) => u,
            Repulsion::HardCore => f64::INFINITY,
        }
    }
}

impl std::str::FromStr for Repulsion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" | "hardcore" | "hard-core" => Ok(Repulsion::HardCore),
            other => {
                let u: f64 = other
                    .parse()
                    .map_err(|_| Error::Precondition(format!("cannot parse repulsion `{s}`")))?;
                Repulsion::new(u)
            }
        }
    }
}

impl std::fmt::Display for Repulsion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Repulsion::Finite(u) => write!(f, "{u}"),
            Repulsion::HardCore => write!(f, "inf"),
        }
    }
}

impl Serialize for Repulsion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Repulsion::Finite(u) => s.serialize_f64(*u),
            Repulsion::HardCore => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Repulsion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(u) => Repulsion::new(u).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub r0: f64,
    /// Starting number of midpoint nodes per axis for the γ integral.
    pub quadrature_order: usize,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self {
            r0: 1.0,
            quadrature_order: 32,
        }
    }
}

impl LatticeSpec {
    pub fn new(r0: f64, quadrature_order: usize) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::Precondition(format!("r0 must be positive, got {r0}")));
        }
        if quadrature_order < 8 {
            return Err(Error::Precondition(format!(
                "quadrature order must be at least 8, got {quadrature_order}"
            )));
        }
        Ok(Self { r0, quadrature_order })
    }
}

/// γ by midpoint refinement with Richardson elimination (memoised per order).
pub fn compute_gamma(spec: &LatticeSpec) -> Result<GammaEstimate> {
    LatticeSpec::new(spec.r0, spec.quadrature_order)?;
    gamma::cached_gamma(spec.quadrature_order)
}

/// `8πa = r0 U r0² / (U r0² γ + 1)`, with `a = r0/(8πγ)` for hard-core.
pub fn scattering_length_with_gamma(u: Repulsion, gamma: f64, r0: f64) -> Result<f64> {
    let eight_pi = 8.0 * std::f64::consts::PI;
    match u {
        Repulsion::HardCore => Ok(r0 / (eight_pi * gamma)),
        Repulsion::Finite(u) if u >= 0.0 => {
            let x = u * r0 * r0;
            Ok(r0 * x / (x * gamma + 1.0) / eight_pi)
        }
        Repulsion::Finite(u) => Err(Error::Domain(format!(
            "on-site repulsion must be non-negative, got {u}"
        ))),
    }
}

pub fn scattering_length(u: Repulsion, spec: &LatticeSpec) -> Result<f64> {
    let gamma = compute_gamma(spec)?.value;
    scattering_length_with_gamma(u, gamma, spec.r0)
}

/// The zero-energy scattering solution on a finite ball, with its
/// scattering length. Immutable and cheap to clone.
#[derive(Debug, Clone)]
pub struct ScatteringProfile {
    repulsion: Repulsion,
    gamma: f64,
    a: f64,
    r0: f64,
    tab_radius: f64,
    green: Arc<GreenTable>,
}

impl ScatteringProfile {
    /// `tab_radius` is in length units.
    pub fn new(u: Repulsion, spec: &LatticeSpec, tab_radius: f64) -> Result<Self> {
        let gamma = compute_gamma(spec)?.value;
        Self::with_gamma(u, gamma, spec.r0, tab_radius)
    }

    pub fn with_gamma(u: Repulsion, gamma: f64, r0: f64, tab_radius: f64) -> Result<Self> {
        if !(tab_radius >= r0) {
            return Err(Error::Precondition(format!(
                "tabulation radius {tab_radius} must be at least one lattice spacing"
            )));
        }
        let a = scattering_length_with_gamma(u, gamma, r0)?;
        let extent = (tab_radius / r0 + 1e-9).ceil() as usize;
        Ok(Self {
            repulsion: u,
            gamma,
            a,
            r0,
            tab_radius,
            green: GreenTable::shared(extent),
        })
    }

    pub fn repulsion(&self) -> Repulsion {
        self.repulsion
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn scattering_length(&self) -> f64 {
        self.a
    }
    pub fn r0(&self) -> f64 {
        self.r0
    }
    /// Tabulation radius in length units.
    pub fn tab_radius(&self) -> f64 {
        self.tab_radius
    }

    pub fn in_table(&self, x: LatticeVector) -> bool {
        lattice::norm(x) * self.r0 <= self.tab_radius + 1e-9 * self.r0
    }

    /// `φ(x) = 1 − 4π (a/r0) G(x)`; at the origin the closed form
    /// `1 − 8πaγ/r0 = 1/(1 + γUr0²)` is used (0 for hard-core).
    pub fn phi(&self, x: LatticeVector) -> Result<f64> {
        if !self.in_table(x) {
            return Err(Error::TabulationRange {
                point: x,
                radius: self.tab_radius,
            });
        }
        if x == [0, 0, 0] {
            return Ok(self.phi_origin());
        }
        let g = self.green.get(x).ok_or(Error::TabulationRange {
            point: x,
            radius: self.tab_radius,
        })?;
        Ok(1.0 - 4.0 * std::f64::consts::PI * (self.a / self.r0) * g)
    }

    fn phi_origin(&self) -> f64 {
        match self.repulsion {
            Repulsion::HardCore => 0.0,
            Repulsion::Finite(u) => 1.0 / (1.0 + self.gamma * u * self.r0 * self.r0),
        }
    }

    /// Discrete Laplacian `r0⁻² Σ_{x'} (φ(x') − φ(x))`.
    pub fn laplacian(&self, x: LatticeVector) -> Result<f64> {
        let c = self.phi(x)?;
        let mut s = 0.0;
        for d in NEIGHBOR_OFFSETS {
            s += self.phi(lattice::add(x, d))? - c;
        }
        Ok(s / (self.r0 * self.r0))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroEnergyResidual {
    /// Largest `|−Δφ(x) + (U/2)δ_{x,0}φ(x)|` over the ball, origin included.
    pub max_residual: f64,
    pub max_off_origin: f64,
    /// `−Δφ(0)`.
    pub origin_kinetic: f64,
    /// `−(U/2)φ(0)`; for hard-core the origin equation is replaced by
    /// `φ(0) = 0` and this field holds `−Δφ(0)`.
    pub origin_potential: f64,
    pub points: usize,
}

/// Residual of the zero-energy equation on `|x| ≤ radius` (length units).
pub fn verify_zero_energy_equation(profile: &ScatteringProfile, radius: f64) -> Result<ZeroEnergyResidual> {
    let r0 = profile.r0;
    if radius + r0 > profile.tab_radius + 1e-9 * r0 {
        return Err(Error::TabulationRange {
            point: [(radius / r0).ceil() as i64 + 1, 0, 0],
            radius: profile.tab_radius,
        });
    }
    let ball = LatticeRegion::ball(radius / r0);
    let mut max_off = 0.0_f64;
    for x in ball.sorted_points() {
        if x != [0, 0, 0] {
            max_off = max_off.max(profile.laplacian(x)?.abs());
        }
    }
    let kinetic = -profile.laplacian([0, 0, 0])?;
    let (potential, origin_res) = match profile.repulsion {
        Repulsion::Finite(u) => {
            let p = -(u / 2.0) * profile.phi([0, 0, 0])?;
            (p, (kinetic - p).abs())
        }
        Repulsion::HardCore => (kinetic, profile.phi([0, 0, 0])?.abs()),
    };
    Ok(ZeroEnergyResidual {
        max_residual: max_off.max(origin_res),
        max_off_origin: max_off,
        origin_kinetic: kinetic,
        origin_potential: potential,
        points: ball.len(),
    })
}

/// `r0 Σ_{<x,x'>, x∈Ω, x'∉Ω} (φ(x') − φ(x))`, which equals `4πa` for every
/// admissible region containing the origin.
pub fn flux_through(region: &LatticeRegion, profile: &ScatteringProfile) -> Result<f64> {
    if !region.contains(&[0, 0, 0]) {
        return Err(Error::Precondition("flux domain must contain the origin".into()));
    }
    let mut sum = 0.0;
    for (x, y) in region.boundary_bonds() {
        sum += profile.phi(y)? - profile.phi(x)?;
    }
    Ok(profile.r0 * sum)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpruchRosenbergRow {
    pub u: Repulsion,
    pub eight_pi_a: f64,
    pub u_r0_cubed: f64,
}

/// Checks `8πa ≤ U r0³` on a grid of repulsions.
pub fn spruch_rosenberg_check(grid: &[Repulsion], gamma: f64, r0: f64) -> Result<Vec<SpruchRosenbergRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    for &u in grid {
        let a = scattering_length_with_gamma(u, gamma, r0)?;
        let lhs = 8.0 * std::f64::consts::PI * a;
        let rhs = u.value() * r0.powi(3);
        if lhs > rhs * (1.0 + 1e-14) {
            return Err(Error::invariant(
                "spruch-rosenberg",
                format!("8πa = {lhs:e} exceeds U r0³ = {rhs:e} at U = {u}"),
            ));
        }
        rows.push(SpruchRosenbergRow {
            u,
            eight_pi_a: lhs,
            u_r0_cubed: rhs,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: f64 = 0.126_365_504_929_331_5;

    fn profile(u: Repulsion, radius: f64) -> ScatteringProfile {
        ScatteringProfile::with_gamma(u, GAMMA, 1.0, radius).unwrap()
    }

    #[test]
    fn lengths() {
        let a0 = scattering_length_with_gamma(Repulsion::zero(), GAMMA, 1.0).unwrap();
        assert_eq!(a0, 0.0);
        let a1 = scattering_length_with_gamma(Repulsion::Finite(1.0), GAMMA, 1.0).unwrap();
        assert!((a1 - 0.035_325).abs() < 1e-6);
        assert!((8.0 * std::f64::consts::PI * a1 - 0.887_81).abs() < 5e-6);
        let ainf = scattering_length_with_gamma(Repulsion::HardCore, GAMMA, 1.0).unwrap();
        assert!((ainf - 0.314_870).abs() < 1e-6);
        assert!(matches!(
            scattering_length_with_gamma(Repulsion::Finite(-1.0), GAMMA, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(Repulsion::new(-0.5).is_err());
    }

    #[test]
    fn repulsion_parsing() {
        assert_eq!("inf".parse::<Repulsion>().unwrap(), Repulsion::HardCore);
        assert_eq!("2.5".parse::<Repulsion>().unwrap(), Repulsion::Finite(2.5));
        assert!("-1".parse::<Repulsion>().is_err());
        let json = serde_json::to_string(&Repulsion::HardCore).unwrap();
        assert_eq!(serde_json::from_str::<Repulsion>(&json).unwrap(), Repulsion::HardCore);
    }

    #[test]
    fn free_profile_is_flat() {
        let p = profile(Repulsion::zero(), 8.0);
        assert_eq!(p.phi([0, 0, 0]).unwrap(), 1.0);
        assert_eq!(p.phi([3, 1, 2]).unwrap(), 1.0);
        let r = verify_zero_energy_equation(&p, 5.0).unwrap();
        assert_eq!(r.max_residual, 0.0);
        assert_eq!(flux_through(&LatticeRegion::cube(2), &p).unwrap(), 0.0);
    }

    #[test]
    fn origin_value() {
        let p = profile(Repulsion::Finite(1.0), 4.0);
        let expect = 1.0 - 8.0 * std::f64::consts::PI * p.scattering_length() * GAMMA;
        assert!((p.phi([0, 0, 0]).unwrap() - expect).abs() < 1e-15);
        assert_eq!(profile(Repulsion::HardCore, 4.0).phi([0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn origin_balance_and_residual() {
        for u in [Repulsion::Finite(1.0), Repulsion::Finite(5.0), Repulsion::HardCore] {
            let p = profile(u, 12.0);
            let r = verify_zero_energy_equation(&p, 10.0).unwrap();
            assert!(r.max_residual < 1e-10, "{u}: {r:?}");
        }
    }

    #[test]
    fn flux_independent_of_shape() {
        let p = profile(Repulsion::Finite(1.0), 12.0);
        let target = 4.0 * std::f64::consts::PI * p.scattering_length();
        for region in [LatticeRegion::cube(2), LatticeRegion::ball(7.0), LatticeRegion::ellipsoid([3.0, 5.0, 8.0])] {
            let f = flux_through(&region, &p).unwrap();
            assert!(((f - target) / target).abs() < 1e-10, "{f} vs {target}");
        }
        let off = LatticeRegion::from_points([[1, 0, 0]]);
        assert!(matches!(flux_through(&off, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn out_of_table() {
        let p = profile(Repulsion::Finite(1.0), 5.0);
        assert!(matches!(p.phi([6, 0, 0]), Err(Error::TabulationRange { .. })));
        assert!(verify_zero_energy_equation(&p, 4.5).is_err());
    }

    #[test]
    fn spruch_rosenberg() {
        let grid: Vec<_> = [0.0, 0.1, 1.0, 10.0].iter().map(|&u| Repulsion::Finite(u)).collect();
        let rows = spruch_rosenberg_check(&grid, GAMMA, 1.0).unwrap();
        assert_eq!(rows[0].eight_pi_a, 0.0);
        assert!(rows.iter().all(|r| r.eight_pi_a <= r.u_r0_cubed));
    }

    #[test]
    fn asymptotic_law_along_axis() {
        let p = profile(Repulsion::Finite(1.0), DEFAULT_TAB_RADIUS);
        let a = p.scattering_length();
        let err = |r: i64| ((1.0 - p.phi([r, 0, 0]).unwrap()) * r as f64 - a).abs();
        for r in 10..50 {
            assert!(err(r + 1) < err(r), "not decreasing at {r}");
        }
        assert!(err(50) <= 0.02 * a);
        for x in [[50, 0, 0], [29, 29, 29], [60, 0, 0]] {
            let v = p.phi(x).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
