use crate::error::{Error, Result};
use crate::linalg::binomial_u128;

/// Largest number of sites representable by a single occupation bitmask.
pub const MAX_SITES: usize = 64;

/// All `n`-particle occupation masks on `v` sites in colex order, which is
/// also increasing numeric order.
#[derive(Debug, Clone)]
pub struct SpinSector {
    sites: usize,
    particles: usize,
    masks: Vec<u64>,
    table: Vec<u64>,
}

impl SpinSector {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        if sites > MAX_SITES {
            return Err(Error::Precondition(format!("bitmask bases support at most {MAX_SITES} sites, got {sites}")));
        }
        if particles > sites {
            return Err(Error::Precondition(format!("{particles} fermions do not fit on {sites} sites")));
        }
        let count = binomial_u128(sites, particles);
        if count > u32::MAX as u128 {
            return Err(Error::DimensionCap { dim: count, cap: u32::MAX as u128 });
        }
        let count = count as usize;
        let mut masks = Vec::with_capacity(count);
        let mut x: u64 = if particles == 0 { 0 } else { u64::MAX >> (64 - particles) };
        masks.push(x);
        for _ in 1..count {
            // Gosper's hack: next integer with the same popcount.
            let c = x & x.wrapping_neg();
            let r = x.wrapping_add(c);
            x = (((r ^ x) >> 2) / c) | r;
            masks.push(x);
        }
        // table[p * (particles + 1) + i] = C(p, i)
        let width = particles + 1;
        let mut table = vec![0u64; (sites + 1) * width];
        for p in 0..=sites {
            for i in 0..width {
                table[p * width + i] = binomial_u128(p, i) as u64;
            }
        }
        Ok(Self { sites, particles, masks, table })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn mask(&self, rank: usize) -> u64 {
        self.masks[rank]
    }

    /// Colex rank `Σᵢ C(pᵢ, i+1)` over the ascending set-bit positions `pᵢ`.
    pub fn rank(&self, mask: u64) -> usize {
        let width = self.particles + 1;
        let mut m = mask;
        let mut rank = 0u64;
        let mut i = 1;
        while m != 0 {
            let p = m.trailing_zeros() as usize;
            rank += self.table[p * width + i];
            m &= m - 1;
            i += 1;
        }
        rank as usize
    }
}

/// Occupation-number basis for `N` up and `M` down fermions on `V` sites,
/// optionally restricted to configurations without double occupancy.
#[derive(Debug, Clone)]
pub struct FockBasis {
    up: SpinSector,
    down: SpinSector,
    projected: Option<Projection>,
}

#[derive(Debug, Clone)]
struct Projection {
    /// `(up rank, down rank)` per basis state.
    states: Vec<(u32, u32)>,
    /// Index into `states` for every product index, `u32::MAX` if excluded.
    lookup: Vec<u32>,
}

impl FockBasis {
    /// `cap` bounds the dimension of the resulting basis.
    pub fn new(sites: usize, n_up: usize, n_down: usize, projected: bool, cap: u128) -> Result<Self> {
        let full = binomial_u128(sites, n_up).saturating_mul(binomial_u128(sites, n_down));
        if projected && n_up + n_down > sites {
            return Err(Error::Precondition(format!(
                "no configuration without double occupancy for {n_up}+{n_down} particles on {sites} sites"
            )));
        }
        let dim = if projected {
            // C(V,N)·C(V−N,M)
            binomial_u128(sites, n_up).saturating_mul(binomial_u128(sites - n_up, n_down))
        } else {
            full
        };
        if dim > cap || full > cap.max(u32::MAX as u128) {
            return Err(Error::DimensionCap { dim, cap });
        }
        let up = SpinSector::new(sites, n_up)?;
        let down = SpinSector::new(sites, n_down)?;
        let projected = projected.then(|| {
            let nb = down.len();
            let mut states = Vec::with_capacity(dim as usize);
            let mut lookup = vec![u32::MAX; up.len() * nb];
            for (a, &mu) in up.masks().iter().enumerate() {
                for (b, &md) in down.masks().iter().enumerate() {
                    if mu & md == 0 {
                        lookup[a * nb + b] = states.len() as u32;
                        states.push((a as u32, b as u32));
                    }
                }
            }
            Projection { states, lookup }
        });
        Ok(Self { up, down, projected })
    }

    pub fn sites(&self) -> usize {
        self.up.sites()
    }

    pub fn n_up(&self) -> usize {
        self.up.particles()
    }

    pub fn n_down(&self) -> usize {
        self.down.particles()
    }

    pub fn up(&self) -> &SpinSector {
        &self.up
    }

    pub fn down(&self) -> &SpinSector {
        &self.down
    }

    pub fn is_projected(&self) -> bool {
        self.projected.is_some()
    }

    pub fn dimension(&self) -> usize {
        match &self.projected {
            Some(p) => p.states.len(),
            None => self.up.len() * self.down.len(),
        }
    }

    /// Sector ranks of basis state `index`.
    pub fn ranks(&self, index: usize) -> (usize, usize) {
        match &self.projected {
            Some(p) => {
                let (a, b) = p.states[index];
                (a as usize, b as usize)
            }
            None => (index / self.down.len(), index % self.down.len()),
        }
    }

    /// Basis index of a pair of sector ranks, `None` if projected out.
    pub fn index_of_ranks(&self, a: usize, b: usize) -> Option<usize> {
        let product = a * self.down.len() + b;
        match &self.projected {
            Some(p) => {
                let i = p.lookup[product];
                (i != u32::MAX).then_some(i as usize)
            }
            None => Some(product),
        }
    }

    /// Occupation masks `(up, down)` of basis state `index`.
    pub fn state(&self, index: usize) -> (u64, u64) {
        let (a, b) = self.ranks(index);
        (self.up.mask(a), self.down.mask(b))
    }

    pub fn index_of(&self, up: u64, down: u64) -> Option<usize> {
        if up.count_ones() as usize != self.n_up() || down.count_ones() as usize != self.n_down() {
            return None;
        }
        let limit = if self.sites() == 64 { u64::MAX } else { (1u64 << self.sites()) - 1 };
        if (up | down) & !limit != 0 {
            return None;
        }
        self.index_of_ranks(self.up.rank(up), self.down.rank(down))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_ranks_round_trip() {
        for (v, n) in [(5, 0), (5, 2), (8, 3), (64, 2)] {
            let s = SpinSector::new(v, n).unwrap();
            assert_eq!(s.len() as u128, binomial_u128(v, n));
            for (i, &m) in s.masks().iter().enumerate() {
                assert_eq!(m.count_ones() as usize, n);
                assert_eq!(s.rank(m), i);
            }
        }
    }

    #[test]
    fn projected_basis_round_trip() {
        let b = FockBasis::new(6, 2, 2, true, 1 << 30).unwrap();
        assert_eq!(b.dimension(), 15 * 6);
        for i in 0..b.dimension() {
            let (u, d) = b.state(i);
            assert_eq!(u & d, 0);
            assert_eq!(b.index_of(u, d), Some(i));
        }
        assert_eq!(b.index_of(0b11, 0b11), None);
    }

    #[test]
    fn dimension_cap() {
        assert!(matches!(FockBasis::new(27, 3, 3, false, 1000), Err(Error::DimensionCap { .. })));
    }
}
