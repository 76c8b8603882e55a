//! Command-line arguments and the declarative run configuration they
//! override.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "hubbard-lab", version, about = "Variational upper bounds for the dilute 3D Hubbard model")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Zero-energy scattering solution, scattering length and flux identity.
    Scatter(ScatterArgs),
    /// Free-fermion Fermi seas on a box and the continuum energy density.
    Free(FreeArgs),
    /// Determinant identities and the overlap-matrix estimates.
    Lemmas(LemmasArgs),
    /// Jastrow factors of the trial state and the xi sum.
    Trial(TrialArgs),
    /// Exact ground-state energy of a small box.
    Ed(EdArgs),
    /// Rayleigh quotient of the trial state.
    Var(VarArgs),
    /// Assembled energy upper bound, optionally swept over densities.
    Bound(BoundArgs),
    /// Release checks plus a smoke run of every subcommand.
    VerifyAll(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalArgs {
    /// TOML run configuration; flags take precedence over its entries.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Lattice spacing.
    #[arg(long, global = true)]
    pub r0: Option<f64>,
    /// Starting midpoint order of the γ quadrature.
    #[arg(long, global = true)]
    pub quad_order: Option<usize>,
    /// Eigensolver residual tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Constants registry replacing the built-in one.
    #[arg(long, global = true)]
    pub constants: Option<PathBuf>,
    /// Worker threads (also read from HUBBARD_LAB_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterArgs {
    /// On-site repulsion; `inf` for hard-core.
    #[arg(long, visible_alias = "U", allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Radius of the tabulated solution.
    #[arg(long, visible_alias = "tab-radius")]
    pub radius: Option<f64>,
    /// Distance along the axis at which `(1 − φ)|x|/a` is reported.
    #[arg(long)]
    pub distance: Option<i64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreeArgs {
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub n_up: Option<usize>,
    #[arg(long)]
    pub n_down: Option<usize>,
    /// Densities for the continuum comparison.
    #[arg(long)]
    pub rho_up: Option<f64>,
    #[arg(long)]
    pub rho_down: Option<f64>,
    /// Box sizes used for the finite-volume extrapolation.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmasArgs {
    /// Run only one family: 1 determinant identities, 2 matrix norm, 3 cutoff loss.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub which: Option<u8>,
    #[arg(long)]
    pub sites: Option<usize>,
    /// Particles in the determinant.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, visible_alias = "U", allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Radius of the opposite-spin Jastrow factor.
    #[arg(long, visible_alias = "R")]
    pub radius: Option<f64>,
    /// Separation scale of the matrix-norm estimate.
    #[arg(long)]
    pub s: Option<f64>,
    /// Same-spin cutoff for the cutoff-loss ratio.
    #[arg(long)]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialArgs {
    #[arg(long, visible_alias = "U", allow_hyphen_values = true)]
    pub u: Option<String>,
    #[arg(long, visible_alias = "R")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    /// Ramp of the same-spin factor: linear or smoothstep.
    #[arg(long)]
    pub shape: Option<String>,
    /// Box for the support and antisymmetry checks.
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub n_up: Option<usize>,
    #[arg(long)]
    pub n_down: Option<usize>,
    /// Random configurations drawn for the checks.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdArgs {
    /// Sites per side: one value for a cube or three.
    #[arg(long, value_delimiter = ',')]
    pub sites: Option<Vec<usize>>,
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub n_up: Option<usize>,
    #[arg(long)]
    pub n_down: Option<usize>,
    #[arg(long, visible_alias = "U", allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Scan every spin split of this many particles instead.
    #[arg(long)]
    pub scan: Option<usize>,
    /// Largest Fock dimension attempted.
    #[arg(long)]
    pub cap: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarArgs {
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub n_up: Option<usize>,
    #[arg(long)]
    pub n_down: Option<usize>,
    #[arg(long, visible_alias = "U", allow_hyphen_values = true)]
    pub u: Option<String>,
    #[arg(long, visible_alias = "R")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub shape: Option<String>,
    /// exhaustive or sampled.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub walkers: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    /// Fixed ε for the term decomposition instead of the optimum.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundArgs {
    #[arg(long)]
    pub rho_up: Option<f64>,
    #[arg(long)]
    pub rho_down: Option<f64>,
    #[arg(long, visible_alias = "U", allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Regime threshold δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Log grid `lo:hi:points` of ρ^{1/3}a at the spin fraction of the
    /// given densities.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Emit the polarization curve over the sweep instead.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub polarization: Option<bool>,
    /// Refuse strong-regime points whose bracket terms are not small.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strict: Option<bool>,
    /// Where to write the constants registry; defaults next to the output.
    #[arg(long)]
    pub constants_dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyArgs {
    /// Reduced instance counts.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub quick: Option<bool>,
}

/// Contents of a `--config` file: one optional table per section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub global: GlobalArgs,
    pub scatter: ScatterArgs,
    pub free: FreeArgs,
    pub lemmas: LemmasArgs,
    pub trial: TrialArgs,
    pub ed: EdArgs,
    pub var: VarArgs,
    pub bound: BoundArgs,
    pub verify_all: VerifyArgs,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Entries set in `flags` replace those of `base`.
pub fn overlay<T: Serialize + DeserializeOwned>(flags: &T, base: &T) -> Result<T, CliError> {
    let table = |v: &T| match toml::Value::try_from(v) {
        Ok(toml::Value::Table(t)) => Ok(t),
        Ok(_) => Err(CliError::Usage("configuration section is not a table".into())),
        Err(e) => Err(CliError::Usage(e.to_string())),
    };
    let mut merged = table(base)?;
    merged.extend(table(flags)?);
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e| CliError::Usage(e.to_string()))
}
