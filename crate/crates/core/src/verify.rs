//! End-to-end verification suite: one check per release criterion, shared by
//! the acceptance harness and the `verify-all` subcommand.

use std::f64::consts::PI;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bound::{self, BoundConstants};
use crate::constants::{self, Registry};
use crate::determinantal::{exhaustive, k_particle_density, trace_identity, weighted_norm};
use crate::error::Result;
use crate::exact_diag::{ground_energy, LanczosOptions};
use crate::free_fermi::{linear_fit, spectrum, sum_lowest, OrbitalBasis};
use crate::lattice::{Boundary, BoxSpec, LatticeRegion};
use crate::scattering::{
    flux_through, gamma_gauss_legendre, gamma_midpoint_richardson, scattering_length_with_gamma, GammaOptions,
    Repulsion, ScatteringProfile, DEFAULT_TAB_RADIUS,
};
use crate::trial_state::{build_f, build_g, xi_sum, JastrowF, JastrowG, RampShape, TrialState, DEFAULT_DELTA};
use crate::variational::{rayleigh_exhaustive, rayleigh_sampled, SamplerOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    /// Wall-clock allowance for the check.
    pub budget_seconds: f64,
}

pub const CRITERIA: [(usize, &str, f64); 10] = [
    (1, "gamma consistency", 30.0),
    (2, "flux identity", 60.0),
    (3, "scattering asymptotics", 60.0),
    (4, "determinant identities", 300.0),
    (5, "xi sum", 120.0),
    (6, "variational upper bound", 600.0),
    (7, "first-order exactness", 60.0),
    (8, "error scaling", 60.0),
    (9, "polarization curve", 60.0),
    (10, "sampled quotient", 600.0),
];

type Outcome = Result<(bool, String)>;

/// Runs criterion `id` (1 through 10).
pub fn run(id: usize, level: Level) -> Check {
    let (_, name, budget) = CRITERIA[id - 1];
    let start = Instant::now();
    let outcome = match id {
        1 => gamma_consistency(),
        2 => flux_identity(),
        3 => asymptotics(),
        4 => determinant_identities(level),
        5 => xi_sum_bounds(level),
        6 => upper_bound_property(level),
        7 => first_order_exactness(),
        8 => error_scaling(),
        9 => polarization(),
        10 => sampled_agreement(level),
        _ => panic!("no criterion {id}"),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if seconds > budget {
        passed = false;
        detail.push_str(&format!("; exceeded {budget} s budget"));
    }
    Check { id, name, passed, detail, seconds, budget_seconds: budget }
}

pub fn run_all(level: Level) -> Vec<Check> {
    (1..=CRITERIA.len()).map(|id| run(id, level)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn gamma_consistency() -> Outcome {
    let mid = gamma_midpoint_richardson(GammaOptions::default())?;
    let gl = gamma_gauss_legendre(8, 128, 1e-11)?;
    let frozen = Registry::frozen().get(constants::GAMMA)?;
    let spread = rel(mid.value, gl.value);
    let drift = rel(frozen, mid.value);
    Ok((
        spread <= 1e-6 && drift <= 1e-10,
        format!(
            "midpoint {:.15} gauss-legendre {:.15} rel diff {spread:.2e}, registry drift {drift:.2e}",
            mid.value, gl.value
        ),
    ))
}

fn flux_identity() -> Outcome {
    let regions = [
        ("cube", LatticeRegion::cube(3)),
        ("ball", LatticeRegion::ball(7.5)),
        ("ellipsoid", LatticeRegion::ellipsoid([3.0, 5.0, 9.0])),
    ];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for u in [Repulsion::Finite(0.5), Repulsion::Finite(1.0), Repulsion::Finite(5.0), Repulsion::HardCore] {
        let profile = ScatteringProfile::new(u, &Default::default(), 12.0)?;
        let target = 4.0 * PI * profile.scattering_length();
        for (_, region) in &regions {
            worst = worst.max(rel(flux_through(region, &profile)?, target));
            count += 1;
        }
    }
    Ok((worst <= 1e-4, format!("{count} domains, worst |flux/4πa − 1| = {worst:.2e}")))
}

fn asymptotics() -> Outcome {
    let profile = ScatteringProfile::new(Repulsion::Finite(1.0), &Default::default(), DEFAULT_TAB_RADIUS)?;
    let a = profile.scattering_length();
    let points: [[i64; 3]; 4] = [[50, 0, 0], [0, 30, 40], [14, 48, 0], [0, 0, 50]];
    let mut ratios = Vec::new();
    for x in points {
        ratios.push((1.0 - profile.phi(x)?) * 50.0 / a);
    }
    let ok = ratios.iter().all(|r| (0.98..=1.02).contains(r));
    Ok((ok, format!("(1 − φ)|x|/a at |x| = 50: {ratios:.5?}")))
}

fn random_basis(rng: &mut ChaCha8Rng, lattice: &BoxSpec, n: usize) -> OrbitalBasis {
    let modes = spectrum(lattice);
    let pool = modes.len().min(3 * n + 4);
    let picks = sample(rng, pool, n);
    OrbitalBasis::from_modes(lattice, picks.iter().map(|i| modes[i]).collect())
}

fn determinant_identities(level: Level) -> Outcome {
    let instances = if level == Level::Full { 60 } else { 12 };
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e44a);
    let shapes: [([usize; 3], usize); 4] = [([2, 2, 2], 4), ([3, 3, 3], 5), ([3, 3, 4], 5), ([4, 4, 4], 4)];
    let mut worst: f64 = 0.0;
    let mut comparisons = 0;
    for i in 0..instances {
        let (sites, n_max) = shapes[i % shapes.len()];
        let boundary = if rng.random_bool(0.5) { Boundary::Dirichlet } else { Boundary::Periodic };
        let lattice = BoxSpec::new(sites, boundary, 1.0)?;
        let v = lattice.volume();
        let n = rng.random_range(1..=n_max);
        let basis = random_basis(&mut rng, &lattice, n);
        let h: Vec<f64> = (0..v).map(|_| rng.random_range(0.1..=1.0)).collect();

        let ex = exhaustive::norm(&basis, &h)?;
        worst = worst.max(rel(weighted_norm(&basis, &h)?, ex));
        comparisons += 1;

        for k in 1..=n.min(3) {
            // Redraw points sitting on a node of the density.
            for _ in 0..20 {
                let points: Vec<usize> = sample(&mut rng, v, k).into_vec();
                let e = exhaustive::marginal_density(&basis, &h, &points)?;
                if e.abs() > 1e-10 {
                    worst = worst.max(rel(k_particle_density(&basis, &h, &points)?, e));
                    comparisons += 1;
                    break;
                }
            }
        }

        let kw: Vec<f64> = (0..v).map(|_| rng.random_range(0.0..=1.0)).collect();
        let (lhs, rhs) = trace_identity(&basis, &h, &kw)?;
        worst = worst.max(rel(rhs, lhs));
        comparisons += 1;
    }
    Ok((
        worst <= 1e-9,
        format!("{instances} instances, {comparisons} comparisons, worst relative error {worst:.2e}"),
    ))
}

fn xi_sum_bounds(level: Level) -> Outcome {
    let radii: &[f64] = if level == Level::Full { &[5.0, 10.0, 20.0] } else { &[5.0, 10.0] };
    let profile = ScatteringProfile::new(Repulsion::Finite(1.0), &Default::default(), 2.0 * radii[radii.len() - 1] + 2.0)?;
    let a = profile.scattering_length();
    let mut ok = true;
    let mut parts = Vec::new();
    for &r in radii {
        let rep = xi_sum(&build_f(&profile, r, DEFAULT_DELTA)?)?;
        let gap = (rep.total - rep.flux_closed_form).abs();
        let allowed = 10.0 * a * a / (r * r);
        ok &= gap <= allowed && rep.measured_constant <= 10.0;
        parts.push(format!("R={r}: gap {gap:.2e} ≤ {allowed:.2e}, constant {:.3}", rep.measured_constant));
    }
    Ok((ok, parts.join("; ")))
}

fn upper_bound_property(level: Level) -> Outcome {
    let mut cases: Vec<(usize, usize, usize)> = vec![(3, 1, 1), (3, 2, 1), (3, 2, 2), (3, 3, 1)];
    if level == Level::Full {
        cases.extend([(4, 1, 1), (4, 2, 1)]);
    }
    let opts = LanczosOptions::default();
    let spec = Default::default();
    let g = build_g(2.0, RampShape::Linear, 1.0)?;
    let mut worst_slack = f64::INFINITY;
    let mut instances = 0;
    for u in [Repulsion::Finite(1.0), Repulsion::HardCore] {
        let f = build_f(&ScatteringProfile::new(u, &spec, 12.0)?, 2.0, DEFAULT_DELTA)?;
        for &(m, n_up, n_down) in &cases {
            let lattice = BoxSpec::cubic(m, Boundary::Dirichlet, 1.0)?;
            let state = TrialState::lowest(&lattice, n_up, n_down, f.clone(), g)?;
            let q = rayleigh_exhaustive(&state, u)?.quotient;
            let e = ground_energy(&lattice, n_up, n_down, u, &opts)?.energy;
            worst_slack = worst_slack.min(q - e);
            instances += 1;
        }
    }
    let mut worst_free: f64 = 0.0;
    for &(m, n_up, n_down) in &cases {
        let lattice = BoxSpec::cubic(m, Boundary::Dirichlet, 1.0)?;
        let state = TrialState::lowest(&lattice, n_up, n_down, JastrowF::identity(1.0), JastrowG::identity(1.0))?;
        let q = rayleigh_exhaustive(&state, Repulsion::zero())?.quotient;
        let sums = sum_lowest(&lattice, n_up)?.energy + sum_lowest(&lattice, n_down)?.energy;
        worst_free = worst_free.max((q - sums).abs());
    }
    Ok((
        worst_slack >= -1e-9 && worst_free <= 1e-10,
        format!("{instances} instances, smallest quotient − ground energy {worst_slack:.3e}; free reduction error {worst_free:.2e}"),
    ))
}

fn first_order_exactness() -> Outcome {
    let overlap = bound::periodic_overlap(4, 2, 2)?;
    let c = BoundConstants::frozen();
    let mut worst: f64 = 0.0;
    for u in [0.01, 0.1, 1.0, 10.0, 100.0, 1e4] {
        let report = bound::assemble_weak(5e-4, 5e-4, Repulsion::Finite(u), 1.0, &c)?;
        worst = worst.max(report.identity_residual.unwrap_or(f64::INFINITY));
    }
    Ok((
        overlap.residual <= 1e-10 && worst <= 1e-8,
        format!(
            "4³ periodic overlap {:.15} vs NM/V {:.15} (residual {:.1e}); worst identity residual {worst:.1e}",
            overlap.overlap, overlap.expected, overlap.residual
        ),
    ))
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..points).map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64)).collect()
}

fn error_scaling() -> Outcome {
    let c = BoundConstants::frozen();
    let a = scattering_length_with_gamma(Repulsion::HardCore, c.gamma, 1.0)?;
    let xs = log_grid(1e-5, 1e-2, 13);
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    let mut ordered = true;
    for &x in &xs {
        let rho = (x / a).powi(3);
        let r = bound::evaluate_strong(0.5 * rho, 0.5 * rho, Repulsion::HardCore, 1.0, &c)?;
        ordered &= r.total >= r.e0_asymptote;
        lx.push(x.ln());
        ly.push(r.epsilon.ln());
    }
    let slope = linear_fit(&lx, &ly).1;
    Ok((
        (slope - 2.0 / 9.0).abs() <= 0.02 && ordered,
        format!("fitted exponent {slope:.5} over x ∈ [1e-5, 1e-2] at U = ∞ (target 2/9 = 0.22222)"),
    ))
}

fn polarization() -> Outcome {
    let c = BoundConstants::frozen();
    let xs = log_grid(1e-5, 1e-2, 13);
    let pts = bound::polarization_curve(Repulsion::Finite(1.0), 1.0, &xs, &c)?;
    let lx: Vec<f64> = pts.iter().map(|p| p.x.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.polarization_bound.ln()).collect();
    let slope = linear_fit(&lx, &ly).1;
    let monotone = pts.windows(2).all(|w| w[0].polarization_bound < w[1].polarization_bound);
    let smallest = pts[0].polarization_bound;
    Ok((
        (0.45..=0.55).contains(&slope) && monotone && smallest < 1e-2,
        format!("fitted exponent {slope:.5}, monotone {monotone}, bound {smallest:.3e} at x = 1e-5"),
    ))
}

fn sampled_agreement(level: Level) -> Outcome {
    let spec = Default::default();
    let g = build_g(2.0, RampShape::Linear, 1.0)?;
    let cases = [
        (3, 1, 1, Repulsion::Finite(1.0)),
        (3, 2, 1, Repulsion::Finite(1.0)),
        (3, 2, 2, Repulsion::Finite(1.0)),
        (3, 2, 2, Repulsion::HardCore),
        (4, 2, 1, Repulsion::HardCore),
    ];
    let steps = if level == Level::Full { 400_000 } else { 100_000 };
    let mut zs = Vec::new();
    for (i, &(m, n_up, n_down, u)) in cases.iter().enumerate() {
        let f = build_f(&ScatteringProfile::new(u, &spec, 12.0)?, 2.0, DEFAULT_DELTA)?;
        let lattice = BoxSpec::cubic(m, Boundary::Dirichlet, 1.0)?;
        let state = TrialState::lowest(&lattice, n_up, n_down, f, g)?;
        let exact = rayleigh_exhaustive(&state, u)?.quotient;
        let opts = SamplerOptions { steps, seed: 100 + i as u64, ..SamplerOptions::default() };
        let sampled = rayleigh_sampled(&state, u, &opts)?;
        let diff = sampled.quotient - exact;
        let z = if sampled.error_bar > 0.0 {
            diff / sampled.error_bar
        } else if diff.abs() <= 1e-10 * exact.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        };
        zs.push(z);
    }
    let ok = zs.iter().all(|z| z.abs() <= 3.0);
    Ok((ok, format!("z-scores {zs:.2?}")))
}
