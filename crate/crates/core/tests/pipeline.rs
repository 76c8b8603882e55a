use hubbard_core::bound::{finite_bound, localize, polarization_curve, BoundConstants, Regime};
use hubbard_core::constants::{Registry, FINAL_TERM, GAMMA};
use hubbard_core::exact_diag::{ground_energy, spin_sector_scan, LanczosOptions};
use hubbard_core::lattice::{BoxSpec, Boundary};
use hubbard_core::scattering::{Repulsion, ScatteringProfile};
use hubbard_core::trial_state::{build_f, build_g, RampShape, TrialState, DEFAULT_DELTA};
use hubbard_core::variational::{rayleigh_exhaustive, rayleigh_sampled, SamplerOptions};

fn trial(lattice: &BoxSpec, n_up: usize, n_down: usize, u: Repulsion, gamma: f64) -> TrialState {
    let profile = ScatteringProfile::with_gamma(u, gamma, 1.0, 12.0).unwrap();
    let f = build_f(&profile, 2.0, DEFAULT_DELTA).unwrap();
    let g = build_g(2.0, RampShape::Smoothstep, 1.0).unwrap();
    TrialState::lowest(lattice, n_up, n_down, f, g).unwrap()
}

#[test]
fn trial_energy_bounds_exact_ground_state() {
    let gamma = Registry::frozen().get(GAMMA).unwrap();
    let lattice = BoxSpec::cubic(3, Boundary::Dirichlet, 1.0).unwrap();
    for u in [0.5, 4.0, f64::INFINITY] {
        let u = Repulsion::new(u).unwrap();
        for (n_up, n_down) in [(1, 1), (2, 1)] {
            let exact = ground_energy(&lattice, n_up, n_down, u, &LanczosOptions::default()).unwrap();
            let rayleigh = rayleigh_exhaustive(&trial(&lattice, n_up, n_down, u, gamma), u).unwrap();
            assert!(
                rayleigh.quotient >= exact.energy - 1e-9,
                "U={:?} ({n_up},{n_down}): {} < {}",
                u,
                rayleigh.quotient,
                exact.energy
            );
        }
    }
}

#[test]
fn sampler_agrees_with_exhaustive_sum() {
    let gamma = Registry::frozen().get(GAMMA).unwrap();
    let lattice = BoxSpec::cubic(3, Boundary::Dirichlet, 1.0).unwrap();
    let u = Repulsion::new(2.0).unwrap();
    let state = trial(&lattice, 2, 1, u, gamma);
    let exact = rayleigh_exhaustive(&state, u).unwrap().quotient;
    let opts = SamplerOptions { steps: 200_000, seed: 11, ..SamplerOptions::default() };
    let sampled = rayleigh_sampled(&state, u, &opts).unwrap();
    let z = (sampled.quotient - exact) / sampled.error_bar;
    assert!(z.abs() < 4.0, "z = {z}");
    let again = rayleigh_sampled(&state, u, &opts).unwrap();
    assert_eq!(sampled.quotient.to_bits(), again.quotient.to_bits());
}

#[test]
fn spin_scan_matches_single_sectors() {
    let lattice = BoxSpec::cubic(2, Boundary::Periodic, 1.0).unwrap();
    let u = Repulsion::new(3.0).unwrap();
    let opts = LanczosOptions::default();
    let scan = spin_sector_scan(&lattice, 3, u, 1 << 20, &opts).unwrap();
    let mut lowest = f64::INFINITY;
    for sector in &scan.sectors {
        let direct = ground_energy(&lattice, sector.n_up, sector.n_down, u, &opts).unwrap().energy;
        let e = sector.energy.expect("small sectors are not skipped");
        assert!((e - direct).abs() < 1e-8, "{e} vs {direct}");
        lowest = lowest.min(e);
    }
    assert_eq!(scan.minimum, lowest);
}

#[test]
fn registry_round_trips_through_toml() {
    let reg = Registry::frozen();
    let back = Registry::from_toml_str(&reg.to_toml_string()).unwrap();
    assert_eq!(reg.get(FINAL_TERM).unwrap(), back.get(FINAL_TERM).unwrap());
    let c = BoundConstants::from_registry(&back).unwrap();
    assert_eq!(c.gamma, reg.get(GAMMA).unwrap());
}

#[test]
fn bound_localizes_to_the_same_density() {
    let c = BoundConstants::frozen();
    let report = finite_bound(1e-4, 5e-5, Repulsion::new(1.0).unwrap(), 1.0, &c).unwrap();
    assert_eq!(report.branch, Regime::Weak);
    let ell: f64 = 40.0;
    let loc = localize(report.total * ell.powi(3), ell, 3.0 * ell).unwrap();
    assert!((loc.density - report.total).abs() <= 1e-12 * report.total);
    assert_eq!(loc.boxes, 27.0);
}

#[test]
fn polarization_shrinks_with_density() {
    let c = BoundConstants::frozen();
    let grid = [1e-5, 1e-4, 1e-3];
    let curve = polarization_curve(Repulsion::new(1.0).unwrap(), 1.0, &grid, &c).unwrap();
    assert_eq!(curve.len(), 3);
    for w in curve.windows(2) {
        assert!(w[0].polarization_bound < w[1].polarization_bound);
    }
    for p in &curve {
        assert!(p.argmin_split <= p.polarization_bound + 1e-12);
        assert!(p.upper_bound.is_finite());
    }
}
