use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Method, RayleighReport, SamplingStats};
use crate::error::{Error, Result};
use crate::lattice::{self, BoxSpec};
use crate::scattering::Repulsion;
use crate::trial_state::TrialState;

#[derive(Debug, Clone)]
pub struct SamplerOptions {
    /// Metropolis proposals summed over all walkers, excluding burn-in.
    pub steps: usize,
    pub walkers: usize,
    /// Total number of batches; at least 20.
    pub batches: usize,
    /// Burn-in proposals per walker, as a fraction of its production steps.
    pub burn_in: f64,
    pub seed: u64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            steps: 400_000,
            walkers: 4,
            batches: 40,
            burn_in: 0.1,
            seed: 1,
        }
    }
}

struct Walker<'a> {
    state: &'a TrialState,
    lattice: BoxSpec,
    u: Repulsion,
    xs: Vec<usize>,
    ys: Vec<usize>,
    psi: f64,
}

impl<'a> Walker<'a> {
    fn start(state: &'a TrialState, u: Repulsion, rng: &mut ChaCha8Rng) -> Result<Self> {
        let lattice = *state.lattice();
        let v = lattice.volume();
        let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
        let mut found = 0;
        for _ in 0..20_000 {
            let xs = rand::seq::index::sample(rng, v, state.n_up()).into_vec();
            let ys = rand::seq::index::sample(rng, v, state.n_down()).into_vec();
            let psi = state.amplitude(&xs, &ys);
            if psi != 0.0 && !(u.is_hard_core() && xs.iter().any(|x| ys.contains(x))) {
                found += 1;
                if best.as_ref().is_none_or(|b| psi.abs() > b.2.abs()) {
                    best = Some((xs, ys, psi));
                }
                if found == 64 {
                    break;
                }
            }
        }
        let (xs, ys, psi) = best.ok_or_else(|| {
            Error::Construction("no configuration with nonzero amplitude found to start the walk".into())
        })?;
        Ok(Self { state, lattice, u, xs, ys, psi })
    }

    /// Site reached from `site` along neighbour direction `dir`, if inside the box.
    fn hop(&self, site: usize, dir: usize) -> Option<usize> {
        self.lattice.index(lattice::add(self.lattice.coords(site), lattice::NEIGHBOR_OFFSETS[dir]))
    }

    fn moved(&self, particle: usize, target: usize) -> (Vec<usize>, Vec<usize>) {
        let (mut xs, mut ys) = (self.xs.clone(), self.ys.clone());
        if particle < xs.len() {
            xs[particle] = target;
        } else {
            ys[particle - xs.len()] = target;
        }
        (xs, ys)
    }

    /// One Metropolis proposal; returns whether it was accepted.
    fn step(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let total = self.xs.len() + self.ys.len();
        let particle = rng.random_range(0..total);
        let dir = rng.random_range(0..6);
        let site = if particle < self.xs.len() { self.xs[particle] } else { self.ys[particle - self.xs.len()] };
        let Some(target) = self.hop(site, dir) else { return false };
        let (xs, ys) = self.moved(particle, target);
        let psi = self.state.amplitude(&xs, &ys);
        if psi == 0.0 {
            return false;
        }
        let ratio = (psi / self.psi).powi(2);
        if ratio >= 1.0 || rng.random::<f64>() < ratio {
            self.xs = xs;
            self.ys = ys;
            self.psi = psi;
            true
        } else {
            false
        }
    }

    /// `(HΨ)(X,Y)/Ψ(X,Y)`.
    fn local_energy(&self) -> f64 {
        let inv_r2 = 1.0 / (self.lattice.r0 * self.lattice.r0);
        let total = self.xs.len() + self.ys.len();
        let mut e = 6.0 * inv_r2 * total as f64;
        for particle in 0..total {
            let site = if particle < self.xs.len() { self.xs[particle] } else { self.ys[particle - self.xs.len()] };
            for dir in 0..6 {
                if let Some(target) = self.hop(site, dir) {
                    let (xs, ys) = self.moved(particle, target);
                    e -= inv_r2 * self.state.amplitude(&xs, &ys) / self.psi;
                }
            }
        }
        if let Repulsion::Finite(u) = self.u {
            let v = self.xs.iter().filter(|x| self.ys.contains(x)).count();
            e += u * v as f64;
        }
        e
    }
}

/// Metropolis estimate of the Rayleigh quotient from `|Ψ|²` sampling.
pub fn rayleigh_sampled(state: &TrialState, u: Repulsion, opts: &SamplerOptions) -> Result<RayleighReport> {
    if opts.batches < 20 {
        return Err(Error::Precondition(format!("need at least 20 batches, got {}", opts.batches)));
    }
    let walkers = opts.walkers.max(1);
    let per_walker_batches = opts.batches.div_ceil(walkers);
    let sweep = state.n_up() + state.n_down();
    if sweep == 0 {
        return Err(Error::Precondition("no particles to sample".into()));
    }
    let batch_steps = (opts.steps / (walkers * per_walker_batches)).max(sweep);
    let burn_in = (opts.burn_in * (batch_steps * per_walker_batches) as f64) as usize;

    let runs: Vec<Result<(Vec<f64>, usize, usize)>> = (0..walkers)
        .into_par_iter()
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(w as u64);
            let mut walker = Walker::start(state, u, &mut rng)?;
            for _ in 0..burn_in {
                walker.step(&mut rng);
            }
            let mut accepted = 0;
            let mut batch_means = Vec::with_capacity(per_walker_batches);
            for _ in 0..per_walker_batches {
                let (mut sum, mut count) = (0.0, 0);
                for step in 0..batch_steps {
                    accepted += walker.step(&mut rng) as usize;
                    if (step + 1) % sweep == 0 {
                        sum += walker.local_energy();
                        count += 1;
                    }
                }
                batch_means.push(sum / count as f64);
            }
            Ok((batch_means, accepted, batch_steps * per_walker_batches))
        })
        .collect();

    let mut means = Vec::new();
    let (mut accepted, mut proposed) = (0, 0);
    for r in runs {
        let (m, a, p) = r?;
        means.extend(m);
        accepted += a;
        proposed += p;
    }
    let acceptance = accepted as f64 / proposed as f64;
    if acceptance < 0.01 {
        return Err(Error::MixingFailure { acceptance });
    }
    let b = means.len() as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    Ok(RayleighReport {
        method: Method::Sampled,
        numerator: None,
        denominator: None,
        quotient: mean,
        error_bar: (var / b).sqrt(),
        decomposition: None,
        sampling: Some(SamplingStats {
            steps: proposed,
            walkers,
            batches: means.len(),
            acceptance,
            seed: opts.seed,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::trial_state::{JastrowF, JastrowG};

    #[test]
    fn free_state_is_an_eigenstate() {
        let l = BoxSpec::cubic(4, Boundary::Dirichlet, 1.0).unwrap();
        let s = TrialState::lowest(&l, 2, 2, JastrowF::identity(1.0), JastrowG::identity(1.0)).unwrap();
        let opts = SamplerOptions { steps: 20_000, ..Default::default() };
        let r = rayleigh_sampled(&s, Repulsion::zero(), &opts).unwrap();
        let exact = s.up().energy() + s.down().energy();
        // Zero-variance estimator: every local energy equals the eigenvalue.
        assert!((r.quotient - exact).abs() < 1e-9);
        assert!(r.error_bar < 1e-9);
    }

    #[test]
    fn reproducible_under_seed() {
        let l = BoxSpec::cubic(3, Boundary::Dirichlet, 1.0).unwrap();
        let g = crate::trial_state::build_g(2.0, crate::trial_state::RampShape::Linear, 1.0).unwrap();
        let s = TrialState::lowest(&l, 2, 1, JastrowF::identity(1.0), g).unwrap();
        let opts = SamplerOptions { steps: 20_000, ..Default::default() };
        let a = rayleigh_sampled(&s, Repulsion::new(1.0).unwrap(), &opts).unwrap();
        let b = rayleigh_sampled(&s, Repulsion::new(1.0).unwrap(), &opts).unwrap();
        assert_eq!(a.quotient, b.quotient);
        assert_eq!(a.error_bar, b.error_bar);
    }
}
