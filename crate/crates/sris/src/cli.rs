//! Command-line interface: `zmat`, `sweep` and `verify`.
//!
//! Exit codes: 0 success, 1 usage, 2 input parse, 3 numerical failure. The only
//! environment variable read is `SRIS_CACHE_DIR`, the store for synthesized matrices.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sris_core::em::LinkGeometry;

use crate::error::{Result, SrisError};
use crate::io::write_atomic;
use crate::report::{self, RunManifest};
use crate::spec::{LoadedSpec, ScenarioSpec};
use crate::sweep::{import_touchstone, run_sweep, total_failure, SweepOptions};
use crate::touchstone::{self, Parameter};
use crate::verify::run_verify;
use crate::zcache::{synthesize, CacheDir, ZCache};

pub const CACHE_ENV: &str = "SRIS_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".sris-cache";

#[derive(Debug, Parser)]
#[command(name = "sris", version, about = "Optimal reactive loading of sparse reconfigurable surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize (or import) a link impedance matrix and write it as JSON or Touchstone.
    Zmat(ZmatArgs),
    /// Run a scenario sweep and write the CSV table, charts and run manifest.
    Sweep(SweepArgs),
    /// Run a scenario and check tightness, round trip, dominance and the brute-force oracle.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ZmatArgs {
    /// Geometry JSON; omitted fields take the standard setup.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file: `.json` cache or `.sNp` Touchstone.
    #[arg(long)]
    pub out: PathBuf,
    /// Read the matrix from a Touchstone file instead of synthesizing it.
    #[arg(long, value_name = "FILE")]
    pub import_touchstone: Option<PathBuf>,
    /// Port roles of the imported file, e.g. `tx=1,rx=102`.
    #[arg(long, requires = "import_touchstone")]
    pub roles: Option<String>,
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the solver's relative duality-gap tolerance.
    #[arg(long)]
    pub tol_gap: Option<f64>,
    /// Worker threads for the (config, angle) pool.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// CSV results file.
    #[arg(long)]
    pub out: PathBuf,
    /// BRCS chart; the tightness chart goes to `<stem>_tightness.svg` beside it.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Zmat(a) => cmd_zmat(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

pub fn cache_dir_from_env() -> CacheDir {
    CacheDir::new(std::env::var_os(CACHE_ENV).map_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR), PathBuf::from))
}

fn read_geometry(path: &Path) -> Result<LinkGeometry> {
    let text = std::fs::read_to_string(path).map_err(|e| SrisError::io(path, e))?;
    let g: LinkGeometry = serde_json::from_str(&text).map_err(|source| SrisError::Json {
        path: path.into(),
        source,
    })?;
    g.validate()?;
    Ok(g)
}

pub fn cmd_zmat(a: &ZmatArgs) -> Result<i32> {
    let cache = match &a.import_touchstone {
        Some(path) => {
            if a.config.is_some() {
                return Err(SrisError::Usage("--config and --import-touchstone are exclusive".into()));
            }
            let c = import_touchstone(path, a.roles.as_deref())?;
            // passivity and symmetry gate
            c.impedance(path)?;
            c
        }
        None => {
            let g = match &a.config {
                Some(p) => read_geometry(p)?,
                None => LinkGeometry::standard(),
            };
            let z_s = sris_core::em::surface_impedance(&g)?;
            let c = synthesize(&g, &z_s)?;
            println!("passivity shift: {:e} ohm", c.passivity_shift);
            c
        }
    };
    write_matrix(&cache, &a.out)?;
    if a.verbose {
        eprintln!("wrote {}x{} matrix to {}", cache.port_count(), cache.port_count(), a.out.display());
    }
    Ok(0)
}

/// Writes `cache` as JSON, or as Touchstone Z data normalized to 1 ohm (exact) when the
/// extension is `.sNp`.
pub fn write_matrix(cache: &ZCache, out: &Path) -> Result<()> {
    if let Some(ports) = touchstone::ports_from_extension(out) {
        if ports != cache.port_count() {
            return Err(SrisError::Usage(format!(
                "{} holds {ports} ports but the matrix has {}",
                out.display(),
                cache.port_count()
            )));
        }
        let z = cache.entries(out)?;
        let comments = vec![
            format!("sris {} link impedance matrix", env!("CARGO_PKG_VERSION")),
            format!("roles: {}", roles_string(cache)),
        ];
        let text = touchstone::write(&z, cache.frequency, Parameter::Z, 1.0, &comments)?;
        write_atomic(out, text.as_bytes())
    } else if out.extension().is_some_and(|e| e == "json") {
        cache.write(out)
    } else {
        Err(SrisError::Usage(format!("{}: output must end in .json or .sNp", out.display())))
    }
}

fn roles_string(cache: &ZCache) -> String {
    use sris_core::network::PortRole;
    let find = |role: PortRole| cache.roles.iter().position(|r| *r == role).map_or(0, |p| p + 1);
    format!("tx={},rx={}", find(PortRole::Transmitter), find(PortRole::Receiver))
}

fn load_spec(a: &RunArgs) -> Result<(LoadedSpec, SweepOptions)> {
    if a.tol_gap.is_some_and(|t| !(t > 0.0)) {
        return Err(SrisError::Usage(format!("--tol-gap must be positive, got {}", a.tol_gap.unwrap())));
    }
    if a.threads == Some(0) {
        return Err(SrisError::Usage("--threads must be at least 1".into()));
    }
    let mut loaded = ScenarioSpec::load(&a.config)?;
    if let Some(seed) = a.seed {
        loaded.spec.seed = seed;
    }
    if let Some(tol) = a.tol_gap {
        loaded.spec.solver.tol_gap = tol;
    }
    let options = SweepOptions {
        threads: a.threads,
        cache: Some(cache_dir_from_env()),
        verbose: a.verbose,
    };
    Ok((loaded, options))
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let started = report::now_utc();
    let (loaded, options) = load_spec(&a.run)?;
    let records = run_sweep(&loaded, &options)?;
    let labels = loaded.spec.labels();

    let mut outputs = vec![a.out.display().to_string()];
    write_atomic(&a.out, report::csv(&records).as_bytes())?;
    if let Some(svg) = &a.svg {
        let tight_path = report::tightness_chart_path(svg);
        write_atomic(svg, report::brcs_svg(&records, &labels).as_bytes())?;
        write_atomic(&tight_path, report::tightness_svg(&records, &labels).as_bytes())?;
        outputs.push(svg.display().to_string());
        outputs.push(tight_path.display().to_string());
    }
    let manifest = RunManifest {
        tool: "sris".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "sweep".into(),
        spec_path: a.run.config.display().to_string(),
        spec_sha256: loaded.spec.hash(),
        started_utc: started,
        finished_utc: report::now_utc(),
        records: records.len(),
        status_counts: report::status_counts(&records),
        non_tight: report::count_non_tight(&records),
        outputs,
    };
    let manifest_path = report::write_manifest(&a.out, &manifest)?;

    let counts: Vec<String> = manifest.status_counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    println!(
        "{} records ({}), {} non-tight; wrote {} and {}",
        records.len(),
        counts.join(", "),
        manifest.non_tight,
        a.out.display(),
        manifest_path.display()
    );
    if total_failure(&records) {
        eprintln!("error: every record failed");
        return Ok(3);
    }
    Ok(0)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let (loaded, options) = load_spec(&a.run)?;
    let report = run_verify(&loaded, &options)?;
    print!("{}", report.table());
    if report.passed() {
        println!("verify: all checks passed");
        Ok(0)
    } else {
        println!("verify: FAILED");
        Ok(3)
    }
}
