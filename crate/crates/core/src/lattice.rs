//! Cubic-lattice geometry: lattice vectors, boxes with Dirichlet or periodic
//! walls, and finite lattice regions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer lattice vector in units of the lattice spacing.
pub type LatticeVector = [i64; 3];

/// The six nearest-neighbour displacements, ordered (+x, -x, +y, -y, +z, -z).
pub const NEIGHBOR_OFFSETS: [LatticeVector; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

pub fn add(a: LatticeVector, b: LatticeVector) -> LatticeVector {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: LatticeVector, b: LatticeVector) -> LatticeVector {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn norm_sq(v: LatticeVector) -> i64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Euclidean length in lattice units.
pub fn norm(v: LatticeVector) -> f64 {
    (norm_sq(v) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Wavefunctions vanish outside the occupied sites; the walls sit one
    /// spacing beyond the outermost sites.
    Dirichlet,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" | "D" | "d" => Ok(Boundary::Dirichlet),
            "periodic" | "P" | "p" => Ok(Boundary::Periodic),
            other => Err(Error::Precondition(format!("unknown boundary `{other}`"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Dirichlet => write!(f, "dirichlet"),
            Boundary::Periodic => write!(f, "periodic"),
        }
    }
}

/// A rectangular block of lattice sites. Sites are indexed lexicographically,
/// `index = (i * ny + j) * nz + k`, with coordinates `0 <= i < nx` etc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub sites: [usize; 3],
    pub boundary: Boundary,
    pub r0: f64,
}

impl BoxSpec {
    pub fn new(sites: [usize; 3], boundary: Boundary, r0: f64) -> Result<Self> {
        if sites.iter().any(|&m| m == 0) {
            return Err(Error::Precondition(format!(
                "box needs at least one site per side, got {sites:?}"
            )));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::Precondition(format!("lattice spacing must be positive, got {r0}")));
        }
        Ok(Self { sites, boundary, r0 })
    }

    /// Cube with `m` sites per side.
    pub fn cubic(m: usize, boundary: Boundary, r0: f64) -> Result<Self> {
        Self::new([m, m, m], boundary, r0)
    }

    pub fn is_cubic(&self) -> bool {
        self.sites[0] == self.sites[1] && self.sites[1] == self.sites[2]
    }

    pub fn volume(&self) -> usize {
        self.sites.iter().product()
    }

    /// Side length along `axis`: `(M+1) r0` for Dirichlet, `M r0` for periodic.
    pub fn side_length_along(&self, axis: usize) -> f64 {
        let m = self.sites[axis] as f64;
        match self.boundary {
            Boundary::Dirichlet => (m + 1.0) * self.r0,
            Boundary::Periodic => m * self.r0,
        }
    }

    /// Side length of a cubic box (the x side for non-cubic boxes).
    pub fn side_length(&self) -> f64 {
        self.side_length_along(0)
    }

    /// Physical volume `prod side lengths`.
    pub fn physical_volume(&self) -> f64 {
        (0..3).map(|a| self.side_length_along(a)).product()
    }

    pub fn coords(&self, index: usize) -> LatticeVector {
        let [_, ny, nz] = self.sites;
        let k = index % nz;
        let j = (index / nz) % ny;
        let i = index / (ny * nz);
        [i as i64, j as i64, k as i64]
    }

    /// Site index of a coordinate triple. Periodic boxes wrap, Dirichlet
    /// boxes return `None` outside.
    pub fn index(&self, c: LatticeVector) -> Option<usize> {
        let mut w = [0usize; 3];
        for axis in 0..3 {
            let m = self.sites[axis] as i64;
            let v = match self.boundary {
                Boundary::Dirichlet => {
                    if c[axis] < 0 || c[axis] >= m {
                        return None;
                    }
                    c[axis]
                }
                Boundary::Periodic => c[axis].rem_euclid(m),
            };
            w[axis] = v as usize;
        }
        Some((w[0] * self.sites[1] + w[1]) * self.sites[2] + w[2])
    }

    /// Neighbour of `index` in direction `dir` (see [`NEIGHBOR_OFFSETS`]).
    pub fn neighbor(&self, index: usize, dir: usize) -> Option<usize> {
        self.index(add(self.coords(index), NEIGHBOR_OFFSETS[dir]))
    }

    /// Table `[site][dir] -> Option<site>`.
    pub fn neighbor_table(&self) -> Vec<[Option<usize>; 6]> {
        (0..self.volume())
            .map(|i| std::array::from_fn(|d| self.neighbor(i, d)))
            .collect()
    }
}

/// A finite set of lattice points.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LatticeRegion {
    points: HashSet<LatticeVector>,
}

impl LatticeRegion {
    pub fn from_points(points: impl IntoIterator<Item = LatticeVector>) -> Self {
        Self {
            points: points.into_iter().collect(),
        }
    }

    /// Points with `max |x_i| <= half_side`.
    pub fn cube(half_side: i64) -> Self {
        let r = -half_side..=half_side;
        Self::from_points(r.clone().flat_map(|i| {
            let r = r.clone();
            r.clone().flat_map(move |j| r.clone().map(move |k| [i, j, k]))
        }))
    }

    /// Points with `|x| <= radius` (lattice units).
    pub fn ball(radius: f64) -> Self {
        Self::ellipsoid([radius; 3])
    }

    /// Points with `sum (x_i / semi_axis_i)^2 <= 1`.
    pub fn ellipsoid(semi_axes: [f64; 3]) -> Self {
        let ext = semi_axes.iter().fold(0.0_f64, |m, &s| m.max(s)).floor() as i64;
        let r = -ext..=ext;
        let pts = r.clone().flat_map(|i| {
            let r = r.clone();
            r.clone().flat_map(move |j| r.clone().map(move |k| [i, j, k]))
        });
        Self::from_points(pts.filter(|p| {
            (0..3)
                .map(|a| (p[a] as f64 / semi_axes[a]).powi(2))
                .sum::<f64>()
                <= 1.0 + 1e-12
        }))
    }

    pub fn contains(&self, p: &LatticeVector) -> bool {
        self.points.contains(p)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in a deterministic (lexicographic) order.
    pub fn sorted_points(&self) -> Vec<LatticeVector> {
        let mut v: Vec<_> = self.points.iter().copied().collect();
        v.sort_unstable();
        v
    }

    /// Largest Euclidean norm of any point, in lattice units.
    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|&p| norm(p)).fold(0.0, f64::max)
    }

    /// Bonds `(x, x')` with `x` inside and `x'` a nearest neighbour outside,
    /// in deterministic order.
    pub fn boundary_bonds(&self) -> Vec<(LatticeVector, LatticeVector)> {
        let mut bonds = Vec::new();
        for x in self.sorted_points() {
            for d in NEIGHBOR_OFFSETS {
                let y = add(x, d);
                if !self.contains(&y) {
                    bonds.push((x, y));
                }
            }
        }
        bonds
    }

    /// Points of the region with at least one neighbour outside.
    pub fn inner_boundary(&self) -> Vec<LatticeVector> {
        self.sorted_points()
            .into_iter()
            .filter(|&x| NEIGHBOR_OFFSETS.iter().any(|&d| !self.contains(&add(x, d))))
            .collect()
    }

    /// Points outside the region with at least one neighbour inside.
    pub fn outer_boundary(&self) -> Vec<LatticeVector> {
        let mut out: Vec<_> = self
            .points
            .iter()
            .flat_map(|&x| NEIGHBOR_OFFSETS.iter().map(move |&d| add(x, d)))
            .filter(|y| !self.contains(y))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        out.sort_unstable();
        out
    }

    /// Whether the region is 6-connected.
    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.points.iter().min() else {
            return true;
        };
        flood_fill(start, |p| self.contains(p)).len() == self.len()
    }

    /// Connected and without cavities: the complement, restricted to a box
    /// one site larger than the region, is also 6-connected.
    pub fn is_simply_connected(&self) -> bool {
        if !self.is_connected() {
            return false;
        }
        if self.is_empty() {
            return true;
        }
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for p in &self.points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a] - 1);
                hi[a] = hi[a].max(p[a] + 1);
            }
        }
        let in_frame = |p: &LatticeVector| (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]);
        let frame_size: i64 = (0..3).map(|a| hi[a] - lo[a] + 1).product();
        let outside = flood_fill(lo, |p| in_frame(p) && !self.contains(p));
        outside.len() as i64 + self.len() as i64 == frame_size
    }
}

fn flood_fill(start: LatticeVector, inside: impl Fn(&LatticeVector) -> bool) -> HashSet<LatticeVector> {
    let mut seen = HashSet::new();
    if !inside(&start) {
        return seen;
    }
    let mut stack = vec![start];
    seen.insert(start);
    while let Some(p) = stack.pop() {
        for d in NEIGHBOR_OFFSETS {
            let q = add(p, d);
            if inside(&q) && seen.insert(q) {
                stack.push(q);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let b = BoxSpec::new([3, 4, 5], Boundary::Dirichlet, 1.0).unwrap();
        for i in 0..b.volume() {
            assert_eq!(b.index(b.coords(i)), Some(i));
        }
        assert_eq!(b.index([3, 0, 0]), None);
    }

    #[test]
    fn periodic_wraps() {
        let b = BoxSpec::cubic(3, Boundary::Periodic, 1.0).unwrap();
        assert_eq!(b.index([-1, 0, 0]), b.index([2, 0, 0]));
        assert!(b.neighbor(0, 1).is_some());
    }

    #[test]
    fn side_lengths() {
        let d = BoxSpec::cubic(4, Boundary::Dirichlet, 0.5).unwrap();
        assert_eq!(d.side_length(), 2.5);
        let p = BoxSpec::cubic(4, Boundary::Periodic, 0.5).unwrap();
        assert_eq!(p.side_length(), 2.0);
    }

    #[test]
    fn region_boundaries() {
        let c = LatticeRegion::cube(1);
        assert_eq!(c.len(), 27);
        assert_eq!(c.inner_boundary().len(), 26);
        assert_eq!(c.boundary_bonds().len(), 6 * 9);
        assert!(c.is_simply_connected());
        let shell = LatticeRegion::from_points(
            LatticeRegion::cube(2)
                .sorted_points()
                .into_iter()
                .filter(|p| p.iter().any(|&x| x.abs() == 2)),
        );
        assert!(shell.is_connected());
        assert!(!shell.is_simply_connected());
    }
}
