//! One handler per subcommand. Each resolves its defaults, runs the library
//! call and renders the result.

use std::path::PathBuf;

use serde::Serialize;

use hubbard_core::bound::{self, BoundConstants, BoundReport, PolarizationPoint, Regime};
use hubbard_core::constants::{self, Registry};
use hubbard_core::determinantal::{
    exhaustive, k_particle_density, lemma2_bound, lemma3_ratio, trace_identity_rhs, trace_k_y, weighted_norm, Lemma2Report,
    Lemma3Report,
};
use hubbard_core::exact_diag::{build_hamiltonian_capped, ground_state_energy, spin_sector_scan, LanczosOptions};
use hubbard_core::free_fermi::{free_gas_energy_density, kinetic_constant, sum_lowest, FermiSea, FreeGasEnergy, OrbitalBasis};
use hubbard_core::lattice::{Boundary, BoxSpec, LatticeRegion};
use hubbard_core::scattering::{
    compute_gamma, flux_through, scattering_length_with_gamma, verify_zero_energy_equation, GammaEstimate, LatticeSpec,
    Repulsion, ScatteringProfile, ZeroEnergyResidual,
};
use hubbard_core::trial_state::{build_f, build_g, xi_sum, JastrowF, JastrowG, RampShape, TrialState, XiReport, DEFAULT_DELTA};
use hubbard_core::variational::{decompose_terms, rayleigh_exhaustive, rayleigh_sampled, RayleighReport, SamplerOptions, TermDecomposition};
use hubbard_core::verify::{self, Level};

use crate::config::{
    BoundArgs, EdArgs, Format, FreeArgs, GlobalArgs, LemmasArgs, ScatterArgs, TrialArgs, VarArgs, VerifyArgs,
};
use crate::emit::{self, Cell};
use crate::CliError;

/// Settings shared by every subcommand after defaults are applied.
pub struct Context {
    pub spec: LatticeSpec,
    pub tol: f64,
    pub seed: u64,
    pub registry: Registry,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
}

impl Context {
    pub fn new(g: &GlobalArgs) -> Result<Self, CliError> {
        let spec = LatticeSpec::new(g.r0.unwrap_or(1.0), g.quad_order.unwrap_or(32))?;
        let registry = match &g.constants {
            Some(path) => Registry::load(path)?,
            None => Registry::frozen(),
        };
        Ok(Self {
            spec,
            tol: g.tol.unwrap_or(1e-8),
            seed: g.seed.unwrap_or(1),
            registry,
            format: g.format,
            output: g.output.clone(),
        })
    }

    fn r0(&self) -> f64 {
        self.spec.r0
    }

    fn json_only(&self) -> Result<(), CliError> {
        match self.format {
            Some(Format::Csv) => Err(CliError::Usage("CSV output is only available for `bound`".into())),
            _ => Ok(()),
        }
    }
}

/// Rendered result: the main body plus optional side files.
pub struct Emission {
    pub body: String,
    pub side_files: Vec<(PathBuf, String)>,
}

impl Emission {
    fn json<T: Serialize>(value: &T) -> Self {
        Self { body: emit::json(value), side_files: Vec::new() }
    }
}

fn repulsion(text: Option<&str>, default: &str) -> Result<Repulsion, CliError> {
    Ok(text.unwrap_or(default).parse::<Repulsion>()?)
}

fn boundary(text: Option<&str>) -> Result<Boundary, CliError> {
    Ok(text.unwrap_or("dirichlet").parse::<Boundary>()?)
}

fn shape(text: Option<&str>) -> Result<RampShape, CliError> {
    Ok(text.unwrap_or("linear").parse::<RampShape>()?)
}

fn jastrow_f(ctx: &Context, u: Repulsion, radius: f64) -> Result<JastrowF, CliError> {
    if u == Repulsion::zero() {
        return Ok(JastrowF::identity(ctx.r0()));
    }
    let profile = ScatteringProfile::new(u, &ctx.spec, 2.0 * radius + 2.0 * ctx.r0())?;
    Ok(build_f(&profile, radius, DEFAULT_DELTA)?)
}

#[derive(Serialize)]
struct FluxRow {
    region: &'static str,
    sites: usize,
    flux: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct ScatterReport {
    u: Repulsion,
    gamma: GammaEstimate,
    a: f64,
    phi_origin: f64,
    /// Largest residual of the zero-energy equation on the table.
    residual_max: f64,
    zero_energy: ZeroEnergyResidual,
    flux_checks: Vec<FluxRow>,
    asymptote_distance: i64,
    /// `(1 − φ)|x|/a` along the first axis.
    asymptote_ratio: Option<f64>,
}

pub fn scatter(ctx: &Context, a: &ScatterArgs) -> Result<Emission, CliError> {
    ctx.json_only()?;
    let u = repulsion(a.u.as_deref(), "1")?;
    let r0 = ctx.r0();
    let radius = a.radius.unwrap_or(20.0 * r0);
    if radius < 8.0 * r0 {
        return Err(CliError::Usage(format!("--radius must be at least 8 r0, got {radius}")));
    }
    let profile = ScatteringProfile::new(u, &ctx.spec, radius)?;
    let gamma = compute_gamma(&ctx.spec)?;
    let zero_energy = verify_zero_energy_equation(&profile, radius - r0)?;
    let scale = radius / r0;
    let regions = [
        ("cube", LatticeRegion::cube((scale / 4.0).floor().max(1.0) as i64)),
        ("ball", LatticeRegion::ball(scale / 2.0)),
        ("ellipsoid", LatticeRegion::ellipsoid([scale / 6.0, scale / 4.0, scale / 2.0])),
    ];
    let target = 4.0 * std::f64::consts::PI * profile.scattering_length();
    let mut flux = Vec::new();
    for (name, region) in regions {
        let value = flux_through(&region, &profile)?;
        flux.push(FluxRow {
            region: name,
            sites: region.len(),
            flux: value,
            ratio: if target > 0.0 { value / target } else { 1.0 },
        });
    }
    let distance = a.distance.unwrap_or((scale - 2.0).floor() as i64);
    let sa = profile.scattering_length();
    let asymptote_ratio = if sa > 0.0 {
        Some((1.0 - profile.phi([distance, 0, 0])?) * distance as f64 * r0 / sa)
    } else {
        None
    };
    Ok(Emission::json(&ScatterReport {
        u,
        gamma,
        a: sa,
        phi_origin: profile.phi([0, 0, 0])?,
        residual_max: zero_energy.max_residual,
        zero_energy,
        flux_checks: flux,
        asymptote_distance: distance,
        asymptote_ratio,
    }))
}

#[derive(Serialize)]
struct FreeReport {
    lattice: BoxSpec,
    up: FermiSea,
    down: FermiSea,
    total_energy: f64,
    /// Finite-size kinetic constant of the spin-up sea.
    kinetic_constant: Option<f64>,
    continuum: Option<FreeGasEnergy>,
}

pub fn free(ctx: &Context, a: &FreeArgs) -> Result<Emission, CliError> {
    ctx.json_only()?;
    let lattice = BoxSpec::cubic(a.sites.unwrap_or(6), boundary(a.boundary.as_deref())?, ctx.r0())?;
    let up = sum_lowest(&lattice, a.n_up.unwrap_or(4))?;
    let down = sum_lowest(&lattice, a.n_down.unwrap_or(4))?;
    let kinetic = if up.n >= 2 && lattice.boundary == Boundary::Dirichlet {
        Some(kinetic_constant(&lattice, up.n)?)
    } else {
        None
    };
    let continuum = match (a.rho_up, a.rho_down) {
        (None, None) => None,
        (ru, rd) => {
            let sizes = a.sizes.clone().unwrap_or_else(|| vec![8, 12, 16]);
            Some(free_gas_energy_density(ru.unwrap_or(0.0), rd.unwrap_or(0.0), ctx.r0(), &sizes)?)
        }
    };
    Ok(Emission::json(&FreeReport {
        lattice,
        total_energy: up.energy + down.energy,
        up,
        down,
        kinetic_constant: kinetic,
        continuum,
    }))
}

/// A formula compared with an independent evaluation.
#[derive(Serialize)]
struct Comparison {
    quantity: String,
    lhs: f64,
    /// Absent when the oracle is out of reach.
    rhs: Option<f64>,
    ratio: Option<f64>,
    passed: Option<bool>,
}

impl Comparison {
    fn new(quantity: impl Into<String>, lhs: f64, rhs: Option<f64>, rel: f64) -> Self {
        let ratio = rhs.map(|r| lhs / r);
        let passed = rhs.map(|r| (lhs - r).abs() <= rel * lhs.abs().max(r.abs()).max(f64::MIN_POSITIVE));
        Self { quantity: quantity.into(), lhs, rhs, ratio, passed }
    }
}

#[derive(Serialize)]
struct LemmasReport {
    lattice: BoxSpec,
    n: usize,
    seed: u64,
    y: [i64; 3],
    /// Determinant norm, k-particle densities and the trace identity.
    identities: Option<Vec<Comparison>>,
    matrix_norm: Option<Lemma2Report>,
    /// `Tr K_Y` from the matrix against the ξ convolution.
    trace_k_y: Option<Comparison>,
    cutoff_loss: Option<Lemma3Report>,
    passed: bool,
}

/// Relative agreement demanded of the determinant identities.
const IDENTITY_TOL: f64 = 1e-9;

fn identities(basis: &OrbitalBasis, seed: u64) -> Result<Vec<Comparison>, CliError> {
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    let v = basis.lattice().volume();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h: Vec<f64> = (0..v).map(|_| rng.random_range(0.1..=1.0)).collect();
    let k: Vec<f64> = (0..v).map(|_| rng.random_range(0.0..=1.0)).collect();
    let oracle = |r: hubbard_core::Result<f64>| r.ok();
    let mut out = vec![Comparison::new("norm", weighted_norm(basis, &h)?, oracle(exhaustive::norm(basis, &h)), IDENTITY_TOL)];
    for order in 1..=basis.n().min(3) {
        let points = sample(&mut rng, v, order).into_vec();
        out.push(Comparison::new(
            format!("density_{order}"),
            k_particle_density(basis, &h, &points)?,
            oracle(exhaustive::marginal_density(basis, &h, &points)),
            IDENTITY_TOL,
        ));
    }
    out.push(Comparison::new(
        "trace",
        trace_identity_rhs(basis, &h, &k)?,
        oracle(exhaustive::trace_identity_lhs(basis, &h, &k)),
        IDENTITY_TOL,
    ));
    Ok(out)
}

pub fn lemmas(ctx: &Context, a: &LemmasArgs) -> Result<Emission, CliError> {
    ctx.json_only()?;
    let sites = a.sites.unwrap_or(6);
    let n = a.n.unwrap_or(2);
    let lattice = BoxSpec::cubic(sites, Boundary::Dirichlet, ctx.r0())?;
    let basis = OrbitalBasis::lowest(&lattice, n)?;
    let run = |family: u8| a.which.is_none_or(|w| w == family);
    let centre = (sites / 2) as i64;
    let y = [centre; 3];

    let identities = if run(1) { Some(identities(&basis, ctx.seed)?) } else { None };
    let needs_f = run(2) || run(3);
    let f = if needs_f {
        Some(jastrow_f(ctx, repulsion(a.u.as_deref(), "1")?, a.radius.unwrap_or(2.0 * ctx.r0()))?)
    } else {
        None
    };
    let (matrix_norm, trace) = match (&f, run(2)) {
        (Some(f), true) => {
            let s = a.s.unwrap_or(10.0 * ctx.r0());
            let report = lemma2_bound(&basis, f, &[y], s, ctx.registry.get(constants::MATRIX_NORM)?)?;
            let (matrix, conv) = trace_k_y(&basis, f, &[y])?;
            (Some(report), Some(Comparison::new("trace_k_y", matrix, Some(conv), IDENTITY_TOL)))
        }
        _ => (None, None),
    };
    let cutoff_loss = match (&f, run(3)) {
        (Some(f), true) if n <= 4 => {
            let g = build_g(a.cutoff.unwrap_or(2.0 * ctx.r0()), RampShape::Linear, ctx.r0())?;
            Some(lemma3_ratio(&basis, f, &g, &[y], ctx.registry.get(constants::CUTOFF_LOSS)?)?)
        }
        (_, true) if a.which == Some(3) => {
            return Err(CliError::Usage(format!("the cutoff-loss ratio is exhaustive and needs n ≤ 4, got {n}")));
        }
        _ => None,
    };
    let passed = identities.iter().flatten().chain(trace.iter()).all(|c| c.passed != Some(false))
        && matrix_norm.as_ref().is_none_or(|r| r.holds || r.near_singular)
        && cutoff_loss.as_ref().is_none_or(|r| r.holds);
    Ok(Emission::json(&LemmasReport {
        lattice,
        n,
        seed: ctx.seed,
        y,
        identities,
        matrix_norm,
        trace_k_y: trace,
        cutoff_loss,
        passed,
    }))
}

#[derive(Serialize)]
struct FactorSummary {
    radius: f64,
    scattering_length: f64,
    boundary_average: f64,
    effective_radius: f64,
    degenerate: bool,
    omega_sites: usize,
    /// `f` along the first axis, one entry per lattice spacing.
    axis: Vec<f64>,
}

#[derive(Serialize)]
struct CutoffSummary {
    s: f64,
    shape: RampShape,
    axis: Vec<f64>,
}

/// Spot checks of `Ψ` on random configurations.
#[derive(Serialize)]
struct SupportChecks {
    lattice: BoxSpec,
    n_up: usize,
    n_down: usize,
    samples: usize,
    nonzero: usize,
    /// Configurations with a same-spin pair within `s` but `Ψ ≠ 0`.
    support_violations: usize,
    /// Largest `|Ψ(X) + Ψ(τX)|/|Ψ(X)|` under a transposition of two up spins.
    antisymmetry_error: f64,
    passed: bool,
}

#[derive(Serialize)]
struct TrialReport {
    f: FactorSummary,
    g: CutoffSummary,
    xi: Option<XiReport>,
    support: SupportChecks,
}

fn support_checks(state: &TrialState, samples: usize, seed: u64) -> SupportChecks {
    use rand::seq::index::sample;
    use rand::SeedableRng;
    let lattice = *state.lattice();
    let (n_up, n_down) = (state.n_up(), state.n_down());
    let s = state.g().s();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut nonzero, mut violations, mut antisymmetry) = (0, 0, 0.0f64);
    let close = |sites: &[usize]| {
        sites.iter().enumerate().any(|(i, &p)| {
            sites[i + 1..]
                .iter()
                .any(|&q| hubbard_core::lattice::norm(hubbard_core::lattice::sub(lattice.coords(p), lattice.coords(q))) * lattice.r0 <= s)
        })
    };
    for _ in 0..samples {
        let mut xs = sample(&mut rng, lattice.volume(), n_up).into_vec();
        let ys = sample(&mut rng, lattice.volume(), n_down).into_vec();
        let psi = state.amplitude(&xs, &ys);
        if psi == 0.0 {
            continue;
        }
        nonzero += 1;
        if (!state.g().is_identity()) && (close(&xs) || close(&ys)) {
            violations += 1;
        }
        if n_up >= 2 {
            xs.swap(0, 1);
            antisymmetry = antisymmetry.max((psi + state.amplitude(&xs, &ys)).abs() / psi.abs());
        }
    }
    SupportChecks {
        lattice,
        n_up,
        n_down,
        samples,
        nonzero,
        support_violations: violations,
        antisymmetry_error: antisymmetry,
        passed: violations == 0 && antisymmetry <= 1e-12,
    }
}

pub fn trial(ctx: &Context, a: &TrialArgs) -> Result<Emission, CliError> {
    ctx.json_only()?;
    let r0 = ctx.r0();
    let u = repulsion(a.u.as_deref(), "1")?;
    let radius = a.radius.unwrap_or(5.0 * r0);
    let f = jastrow_f(ctx, u, radius)?;
    let g = build_g(a.s.unwrap_or(2.0 * r0), shape(a.shape.as_deref())?, r0)?;
    let reach = (radius / r0).ceil() as i64 + 2;
    let g_reach = (2.0 * g.s() / r0).ceil() as i64 + 1;
    let xi = if f.is_identity() { None } else { Some(xi_sum(&f)?) };
    let summary = FactorSummary {
        radius: f.radius(),
        scattering_length: f.scattering_length(),
        boundary_average: f.boundary_average(),
        effective_radius: f.effective_radius(),
        degenerate: f.is_degenerate(),
        omega_sites: f.omega().len(),
        axis: (0..=reach).map(|d| f.value([d, 0, 0])).collect(),
    };
    let cutoff = CutoffSummary {
        s: g.s(),
        shape: g.shape(),
        axis: (0..=g_reach).map(|d| g.value([d, 0, 0])).collect(),
    };
    let lattice = BoxSpec::cubic(a.sites.unwrap_or(6), Boundary::Dirichlet, r0)?;
    let state = TrialState::lowest(&lattice, a.n_up.unwrap_or(2), a.n_down.unwrap_or(1), f, g)?;
    let support = support_checks(&state, a.samples.unwrap_or(2000), ctx.seed);
    Ok(Emission::json(&TrialReport { f: summary, g: cutoff, xi, support }))
}

fn ed_lattice(ctx: &Context, sites: Option<&[usize]>, b: Option<&str>) -> Result<BoxSpec, CliError> {
    let dims = match sites.unwrap_or(&[3]) {
        [m] => [*m; 3],
        [x, y, z] => [*x, *y, *z],
        other => return Err(CliError::Usage(format!("--sites takes one or three values, got {}", other.len()))),
    };
    Ok(BoxSpec::new(dims, boundary(b)?, ctx.r0())?)
}

pub fn ed(ctx: &Context, a: &EdArgs) -> Result<Emission, CliError> {
    ctx.json_only()?;
    let lattice = ed_lattice(ctx, a.sites.as_deref(), a.boundary.as_deref())?;
    let u = repulsion(a.u.as_deref(), "1")?;
    let cap = a.cap.map(u128::from).unwrap_or(hubbard_core::exact_diag::DEFAULT_DIMENSION_CAP);
    let opts = LanczosOptions { tol: ctx.tol, seed: ctx.seed, ..LanczosOptions::default() };
    if let Some(total) = a.scan {
        return Ok(Emission::json(&spin_sector_scan(&lattice, total, u, cap, &opts)?));
    }
    let h = build_hamiltonian_capped(&lattice, a.n_up.unwrap_or(1), a.n_down.unwrap_or(1), u, cap)?;
    Ok(Emission::json(&ground_state_energy(&h, &opts)?))
}

#[derive(Serialize)]
struct VarReport {
    lattice: BoxSpec,
    n_up: usize,
    n_down: usize,
    u: Repulsion,
    report: RayleighReport,
    /// Term decomposition at the requested ε.
    at_epsilon: Option<TermDecomposition>,
}

pub fn var(ctx: &Context, a: &VarArgs) -> Result<Emission, CliError> {
    ctx.json_only()?;
    let r0 = ctx.r0();
    let lattice = BoxSpec::cubic(a.sites.unwrap_or(3), Boundary::Dirichlet, r0)?;
    let (n_up, n_down) = (a.n_up.unwrap_or(2), a.n_down.unwrap_or(1));
    let u = repulsion(a.u.as_deref(), "1")?;
    let f = jastrow_f(ctx, u, a.radius.unwrap_or(2.0 * r0))?;
    let g = match a.s {
        Some(s) if s == 0.0 => JastrowG::identity(r0),
        s => build_g(s.unwrap_or(2.0 * r0), shape(a.shape.as_deref())?, r0)?,
    };
    let state = TrialState::lowest(&lattice, n_up, n_down, f, g)?;
    let (report, at_epsilon) = match a.method.as_deref().unwrap_or("exhaustive") {
        "exhaustive" => {
            let extra = match a.epsilon {
                Some(eps) => Some(decompose_terms(&state, u, Some(eps))?),
                None => None,
            };
            (rayleigh_exhaustive(&state, u)?, extra)
        }
        "sampled" => {
            let d = SamplerOptions::default();
            let opts = SamplerOptions {
                steps: a.steps.unwrap_or(d.steps),
                walkers: a.walkers.unwrap_or(d.walkers),
                batches: a.batches.unwrap_or(d.batches),
                seed: ctx.seed,
                ..d
            };
            (rayleigh_sampled(&state, u, &opts)?, None)
        }
        other => return Err(CliError::Usage(format!("unknown method `{other}`; expected exhaustive or sampled"))),
    };
    Ok(Emission::json(&VarReport { lattice, n_up, n_down, u, report, at_epsilon }))
}

/// Parses `lo:hi:points` into a logarithmic grid.
pub fn log_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("sweep `{spec}` is not of the form lo:hi:points"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, points] = parts.as_slice() else { return Err(bad()) };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let points: usize = points.parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo) || points == 0 {
        return Err(bad());
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..points).map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64)).collect())
}

fn regime_name(r: Regime) -> String {
    match r {
        Regime::Strong => "strong".into(),
        Regime::Weak => "weak".into(),
    }
}

fn bound_row(r: &BoundReport) -> Vec<(&'static str, Cell)> {
    use Cell::{Float, Opt, Text};
    let p = r.parameters;
    let k = r.kinetic_terms;
    let b = r.bracket;
    vec![
        ("rho_up", Float(r.rho_up)),
        ("rho_down", Float(r.rho_down)),
        ("u", Float(r.u)),
        ("r0", Float(r.r0)),
        ("a", Float(r.a)),
        ("gamma", Float(r.gamma)),
        ("delta", Float(r.delta)),
        ("x", Float(r.x)),
        ("regime", Text(regime_name(r.regime))),
        ("branch", Text(regime_name(r.branch))),
        ("R", Opt(p.map(|p| p.r))),
        ("s", Opt(p.map(|p| p.s))),
        ("ell", Opt(p.map(|p| p.ell))),
        ("n", Opt(p.map(|p| p.n))),
        ("m", Opt(p.map(|p| p.m))),
        ("eps_up", Opt(p.map(|p| p.eps_up))),
        ("eps_down", Opt(p.map(|p| p.eps_down))),
        ("kinetic_fermi_up", Opt(k.map(|k| k.fermi_up))),
        ("kinetic_fermi_down", Opt(k.map(|k| k.fermi_down))),
        ("kinetic_lattice", Opt(k.map(|k| k.lattice))),
        ("scattering_tail", Opt(b.map(|b| b.scattering_tail))),
        ("cutoff_gradient", Opt(b.map(|b| b.cutoff_gradient))),
        ("boundary", Opt(b.map(|b| b.boundary))),
        ("fermi_up", Opt(b.map(|b| b.fermi_up))),
        ("fermi_down", Opt(b.map(|b| b.fermi_down))),
        ("cutoff_loss", Opt(b.map(|b| b.cutoff_loss))),
        ("free_gas", Float(r.free_gas)),
        ("kinetic_correction", Float(r.kinetic_correction)),
        ("interaction", Float(r.interaction)),
        ("interaction_correction", Float(r.interaction_correction)),
        ("remainder", Float(r.remainder)),
        ("total", Float(r.total)),
        ("e0_asymptote", Float(r.e0_asymptote)),
        ("mean_field", Float(r.mean_field)),
        ("epsilon", Float(r.epsilon)),
        ("identity_residual", Opt(r.identity_residual)),
        ("vacuous", Text(r.vacuous.to_string())),
        ("violations", Text(r.violations.join(";"))),
    ]
}

fn polarization_row(p: &PolarizationPoint) -> Vec<(&'static str, Cell)> {
    use Cell::{Float, Text};
    vec![
        ("x", Float(p.x)),
        ("rho", Float(p.rho)),
        ("a", Float(p.a)),
        ("regime", Text(regime_name(p.regime))),
        ("branch", Text(regime_name(p.branch))),
        ("upper_bound", Float(p.upper_bound)),
        ("argmin_split", Float(p.argmin_split)),
        ("polarization_bound", Float(p.polarization_bound)),
    ]
}

#[derive(Serialize)]
struct BoundJson<'a, T: Serialize> {
    constants: &'a Registry,
    rows: Vec<T>,
}

pub fn bound(ctx: &Context, a: &BoundArgs) -> Result<Emission, CliError> {
    let r0 = ctx.r0();
    let mut c = BoundConstants::from_registry(&ctx.registry)?;
    if let Some(delta) = a.delta {
        c = c.with_delta(delta);
    }
    let u = repulsion(a.u.as_deref(), "1")?;
    let strict = a.strict.unwrap_or(false);
    let fraction = match (a.rho_up, a.rho_down) {
        (Some(up), Some(down)) if up + down > 0.0 => up / (up + down),
        _ => 0.5,
    };
    let points: Vec<(f64, f64)> = match &a.sweep {
        Some(spec) => {
            let sa = scattering_length_with_gamma(u, c.gamma, r0)?;
            if sa == 0.0 {
                return Err(CliError::Usage("a sweep over ρ^{1/3}a needs a non-zero repulsion".into()));
            }
            log_grid(spec)?
                .into_iter()
                .map(|x| {
                    let rho = (x / sa).powi(3);
                    (fraction * rho, (1.0 - fraction) * rho)
                })
                .collect()
        }
        None => match (a.rho_up, a.rho_down) {
            (Some(up), Some(down)) => vec![(up, down)],
            _ => return Err(CliError::Usage("bound needs --rho-up and --rho-down, or --sweep".into())),
        },
    };

    let format = ctx.format.unwrap_or(Format::Csv);
    let (body, rows_json) = if a.polarization.unwrap_or(false) {
        let sa = scattering_length_with_gamma(u, c.gamma, r0)?;
        let xs: Vec<f64> = points.iter().map(|(up, down)| (up + down).cbrt() * sa).collect();
        let curve = bound::polarization_curve(u, r0, &xs, &c)?;
        match format {
            Format::Csv => (emit::csv(&curve.iter().map(polarization_row).collect::<Vec<_>>()), None),
            Format::Json => (String::new(), Some(emit::json(&BoundJson { constants: &ctx.registry, rows: curve }))),
        }
    } else {
        let mut reports = Vec::with_capacity(points.len());
        for &(up, down) in &points {
            let report = if strict {
                match bound::assemble(up, down, u, r0, &c)?.regime {
                    Regime::Strong => bound::assemble_strong(up, down, u, r0, &c)?,
                    Regime::Weak => bound::assemble_weak(up, down, u, r0, &c)?,
                }
            } else {
                bound::assemble(up, down, u, r0, &c)?
            };
            reports.push(report);
        }
        match format {
            Format::Csv => (emit::csv(&reports.iter().map(bound_row).collect::<Vec<_>>()), None),
            Format::Json => (String::new(), Some(emit::json(&BoundJson { constants: &ctx.registry, rows: reports }))),
        }
    };
    if let Some(json) = rows_json {
        return Ok(Emission { body: json, side_files: Vec::new() });
    }
    let dump = a
        .constants_dump
        .clone()
        .or_else(|| ctx.output.as_ref().map(|p| p.with_extension("constants.json")));
    let side_files = dump.map(|p| vec![(p, emit::json(&ctx.registry))]).unwrap_or_default();
    Ok(Emission { body, side_files })
}

#[derive(Serialize)]
struct CheckRow {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct SmokeRow {
    command: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
pub struct VerifyReport {
    level: &'static str,
    criteria: Vec<CheckRow>,
    smoke: Vec<SmokeRow>,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<String> {
        self.criteria
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("criterion {} ({})", c.id, c.name))
            .chain(self.smoke.iter().filter(|s| !s.passed).map(|s| format!("smoke run of `{}`", s.command)))
            .collect()
    }
}

fn smoke(ctx: &Context) -> Vec<SmokeRow> {
    let quiet = Context {
        spec: ctx.spec,
        tol: ctx.tol,
        seed: ctx.seed,
        registry: ctx.registry.clone(),
        format: None,
        output: None,
    };
    let runs: Vec<(&'static str, Result<Emission, CliError>)> = vec![
        ("scatter", scatter(&quiet, &ScatterArgs { radius: Some(12.0), ..Default::default() })),
        ("free", free(&quiet, &FreeArgs { rho_up: Some(0.01), rho_down: Some(0.01), ..Default::default() })),
        ("lemmas", lemmas(&quiet, &LemmasArgs::default())),
        ("trial", trial(&quiet, &TrialArgs::default())),
        ("ed", ed(&quiet, &EdArgs { scan: Some(2), ..Default::default() })),
        ("var", var(&quiet, &VarArgs { epsilon: Some(1.0), ..Default::default() })),
        (
            "var",
            var(&quiet, &VarArgs { method: Some("sampled".into()), steps: Some(20_000), ..Default::default() }),
        ),
        ("bound", bound(&quiet, &BoundArgs { sweep: Some("1e-4:1e-2:3".into()), ..Default::default() })),
        (
            "bound",
            bound(
                &quiet,
                &BoundArgs { sweep: Some("1e-4:1e-2:3".into()), polarization: Some(true), ..Default::default() },
            ),
        ),
    ];
    runs.into_iter()
        .map(|(command, r)| match r {
            Ok(e) => SmokeRow { command, passed: !e.body.is_empty(), detail: format!("{} bytes", e.body.len()) },
            Err(e) => SmokeRow { command, passed: false, detail: e.to_string() },
        })
        .collect()
}

pub fn verify_all(ctx: &Context, a: &VerifyArgs) -> Result<VerifyReport, CliError> {
    ctx.json_only()?;
    let quick = a.quick.unwrap_or(false);
    let level = if quick { Level::Quick } else { Level::Full };
    let mut criteria = Vec::new();
    for (id, _, _) in verify::CRITERIA {
        let check = verify::run(id, level);
        eprintln!(
            "criterion {:>2} {} [{:.1}s] {}",
            id,
            if check.passed { "PASS" } else { "FAIL" },
            check.seconds,
            check.name
        );
        criteria.push(CheckRow { id, name: check.name, passed: check.passed, detail: check.detail });
    }
    Ok(VerifyReport { level: if quick { "quick" } else { "full" }, criteria, smoke: smoke(ctx) })
}

pub fn render_verify(report: &VerifyReport) -> Emission {
    Emission::json(report)
}
