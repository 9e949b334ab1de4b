//! Sweep orchestration: link matrices per angle, then one record per (config, angle) on a
//! bounded worker pool, collected and ordered by a single thread.

use std::path::Path;

use rayon::prelude::*;
use sris_core::em::{surface_impedance, LinkGeometry};
use sris_core::linalg::CMatrix;
use sris_core::network::ImpedanceMatrix;
use sris_core::scenario::{evaluate_record, make_config, ConfigKind, RecordStatus, SweepRecord};

use crate::error::{Result, SrisError};
use crate::spec::{LoadedSpec, ZSource};
use crate::touchstone;
use crate::zcache::{synthesize, CacheDir, ZCache};

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Store for synthesized matrices; `None` disables caching.
    pub cache: Option<CacheDir>,
    pub verbose: bool,
}

/// Link matrix for one angle, as stored (not yet validated).
#[derive(Debug, Clone)]
pub struct AngleLink {
    pub alpha_deg: f64,
    pub geometry: LinkGeometry,
    pub cache: ZCache,
    /// File the matrix came from, for messages.
    pub origin: String,
}

/// Loads or synthesizes the link matrix of every angle of the scenario. The surface block
/// of a synthetic source is computed once and shared by all angles.
pub fn load_links(loaded: &LoadedSpec, options: &SweepOptions) -> Result<Vec<AngleLink>> {
    let spec = &loaded.spec;
    let mut surface: Option<CMatrix> = None;
    let mut out = Vec::with_capacity(spec.alphas.len());
    for &alpha in &spec.alphas {
        let geometry = spec.geometry.with_alpha(alpha);
        let (cache, origin) = match &spec.z_source {
            ZSource::Synthetic => {
                let hit = options.cache.as_ref().and_then(|c| c.load(&geometry));
                let origin = options
                    .cache
                    .as_ref()
                    .map_or_else(|| "synthetic".to_string(), |c| c.path_for(&geometry).display().to_string());
                match hit {
                    Some(c) => (c, origin),
                    None => {
                        if surface.is_none() {
                            surface = Some(surface_impedance(&spec.geometry)?);
                        }
                        let c = synthesize(&geometry, surface.as_ref().unwrap())?;
                        if let Some(store) = &options.cache {
                            store.store(&geometry, &c)?;
                        }
                        (c, origin)
                    }
                }
            }
            ZSource::CacheFile { .. } => {
                let path = spec.z_source.path_for(alpha, &loaded.base_dir).unwrap();
                (ZCache::read(&path)?, path.display().to_string())
            }
            ZSource::Touchstone { roles, .. } => {
                let path = spec.z_source.path_for(alpha, &loaded.base_dir).unwrap();
                (import_touchstone(&path, Some(roles))?, path.display().to_string())
            }
        };
        out.push(AngleLink {
            alpha_deg: alpha,
            geometry,
            cache,
            origin,
        });
    }
    Ok(out)
}

/// Reads a Touchstone file into an (unvalidated) cache entry. `roles` defaults to the
/// transmitter on the first and the receiver on the last port.
pub fn import_touchstone(path: &Path, roles: Option<&str>) -> Result<ZCache> {
    let ts = touchstone::read(path)?;
    let default_roles = format!("tx=1,rx={}", ts.ports);
    let roles = touchstone::parse_roles(roles.unwrap_or(&default_roles), ts.ports)?;
    let (frequency, z) = ts.impedance_at(None)?;
    Ok(ZCache::from_matrix(&z, roles, frequency))
}

/// Runs every (config, angle) pair of the scenario. Records come back sorted by the
/// scenario's configuration order, then by angle.
pub fn run_sweep(loaded: &LoadedSpec, options: &SweepOptions) -> Result<Vec<SweepRecord>> {
    let links = load_links(loaded, options)?;
    let matrices = links
        .iter()
        .map(|l| l.cache.impedance(Path::new(&l.origin)))
        .collect::<Result<Vec<ImpedanceMatrix>>>()?;
    evaluate_all(loaded, &links, &matrices, options)
}

pub fn evaluate_all(
    loaded: &LoadedSpec,
    links: &[AngleLink],
    matrices: &[ImpedanceMatrix],
    options: &SweepOptions,
) -> Result<Vec<SweepRecord>> {
    Ok(evaluate_all_timed(loaded, links, matrices, options)?.into_iter().map(|(r, _)| r).collect())
}

/// [`evaluate_all`] with the wall time of each record in seconds.
pub fn evaluate_all_timed(
    loaded: &LoadedSpec,
    links: &[AngleLink],
    matrices: &[ImpedanceMatrix],
    options: &SweepOptions,
) -> Result<Vec<(SweepRecord, f64)>> {
    let spec = &loaded.spec;
    let kinds = spec.kinds();
    let configs = kinds
        .iter()
        .map(|k| make_config(k, spec.geometry.grid_nx, spec.geometry.grid_ny))
        .collect::<sris_core::Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..links.len())
        .flat_map(|a| (0..configs.len()).map(move |c| (a, c)))
        .collect();
    let solver = spec.solver.options();
    let work = || -> Vec<(SweepRecord, f64)> {
        jobs.par_iter()
            .map(|&(a, c)| {
                let start = std::time::Instant::now();
                let mut r = evaluate_record(&matrices[a], &links[a].geometry, &configs[c], &solver);
                if !matches!(kinds[c], ConfigKind::Random { .. }) {
                    r.seed = spec.seed;
                }
                if options.verbose {
                    eprintln!(
                        "{:>20} alpha {:>5}: {} eta {:.6e} eps {:.2e} ({:.1} s)",
                        r.config,
                        r.alpha_deg,
                        r.status.as_str(),
                        r.eta,
                        r.tightness,
                        start.elapsed().as_secs_f64()
                    );
                }
                (r, start.elapsed().as_secs_f64())
            })
            .collect()
    };
    let mut records = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SrisError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(work),
        None => work(),
    };
    let labels = spec.labels();
    let pos = |l: &str| labels.iter().position(|x| x == l).unwrap_or(usize::MAX);
    records.sort_by(|(a, _), (b, _)| pos(&a.config).cmp(&pos(&b.config)).then(a.alpha_deg.total_cmp(&b.alpha_deg)));
    Ok(records)
}

/// True when no record produced a usable result.
pub fn total_failure(records: &[SweepRecord]) -> bool {
    records
        .iter()
        .all(|r| matches!(r.status, RecordStatus::NumericalFailure | RecordStatus::Error))
}
