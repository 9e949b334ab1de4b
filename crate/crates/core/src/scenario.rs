//! Surface configuration families, per-record evaluation and the dominance check.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::em::LinkGeometry;
use crate::error::{Error, Result};
use crate::metrics::{brcs_from_pte, LinkBudget};
use crate::network::{loaded_solve, ElementState, ImpedanceMatrix, SurfaceConfig};
use crate::sdp::{SdpOptions, SdpStatus};
use crate::sdr::{solve_sdr, TIGHTNESS_THRESHOLD};

/// Receiver angles of the default sweep, degrees.
pub const DEFAULT_ALPHAS: [f64; 9] = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0];

/// Margin allowed by [`dominance_check`].
pub const DOMINANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ConfigKind {
    Full,
    /// Parallel-connected 2×2 clusters sharing one reactance.
    Clusters2x2,
    /// Open-circuited `size × size` block at the center.
    CenterRemoved { size: usize },
    /// Tunable random subset of the given fraction; the rest is open.
    Random { fraction: f64, seed: u64 },
    /// Nine 2×2 tunable blocks on a 3×3 super-grid; the rest is shorted.
    Subarrays2x2x9,
    /// All elements open: the unloaded reference plate.
    ReferenceOpen,
}

impl ConfigKind {
    pub fn label(&self) -> String {
        match self {
            ConfigKind::Full => "full".into(),
            ConfigKind::Clusters2x2 => "clusters_2x2".into(),
            ConfigKind::CenterRemoved { size } => format!("center_removed_{size}x{size}"),
            ConfigKind::Random { fraction, .. } => format!("random_{}", libm::round(fraction * 100.0) as i64),
            ConfigKind::Subarrays2x2x9 => "subarrays_2x2x9".into(),
            ConfigKind::ReferenceOpen => "reference_open".into(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ConfigKind::Random { seed, .. } => *seed,
            _ => 0,
        }
    }

    /// Every non-tunable element is open or shorted, so the configuration's optimum is
    /// feasible for the fully tunable problem.
    pub fn is_open_short_based(&self) -> bool {
        matches!(
            self,
            ConfigKind::CenterRemoved { .. } | ConfigKind::Random { .. } | ConfigKind::Subarrays2x2x9
        )
    }
}

/// The eight configurations of the default sweep.
pub fn default_kinds(seed: u64) -> Vec<ConfigKind> {
    alloc::vec![
        ConfigKind::Full,
        ConfigKind::Clusters2x2,
        ConfigKind::CenterRemoved { size: 2 },
        ConfigKind::CenterRemoved { size: 4 },
        ConfigKind::Random { fraction: 0.75, seed },
        ConfigKind::Random { fraction: 0.5, seed },
        ConfigKind::Subarrays2x2x9,
        ConfigKind::ReferenceOpen,
    ]
}

fn starts_2x2x9(n: usize) -> Result<[usize; 3]> {
    if n < 6 {
        return Err(Error::InvalidConfig(format!("subarrays need at least 6 elements per side, got {n}")));
    }
    let gap = (n - 6) as f64 / 4.0;
    let mut out = [0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        *o = libm::round(gap * (k as f64 + 1.0) + 2.0 * k as f64) as usize;
    }
    Ok(out)
}

/// Element states for `kind` on an `nx × ny` grid (element index `iy·nx + ix`).
pub fn make_config(kind: &ConfigKind, nx: usize, ny: usize) -> Result<SurfaceConfig> {
    let n = nx * ny;
    if n == 0 {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    let label = kind.label();
    let states: Vec<ElementState> = match kind {
        ConfigKind::Full => alloc::vec![ElementState::Tunable; n],
        ConfigKind::ReferenceOpen => alloc::vec![ElementState::Open; n],
        ConfigKind::Clusters2x2 => {
            if nx % 2 != 0 || ny % 2 != 0 {
                return Err(Error::InvalidConfig(format!("2x2 clusters need even grid dimensions, got {nx}x{ny}")));
            }
            (0..n)
                .map(|i| ElementState::Cluster(((i / nx / 2) * (nx / 2) + (i % nx) / 2) as u32))
                .collect()
        }
        ConfigKind::CenterRemoved { size } => {
            let size = *size;
            if size == 0 || size >= nx || size >= ny || (nx - size) % 2 != 0 || (ny - size) % 2 != 0 {
                return Err(Error::InvalidConfig(format!("cannot center a {size}x{size} block on a {nx}x{ny} grid")));
            }
            let (x0, y0) = ((nx - size) / 2, (ny - size) / 2);
            (0..n)
                .map(|i| {
                    let (ix, iy) = (i % nx, i / nx);
                    if (x0..x0 + size).contains(&ix) && (y0..y0 + size).contains(&iy) {
                        ElementState::Open
                    } else {
                        ElementState::Tunable
                    }
                })
                .collect()
        }
        ConfigKind::Random { fraction, seed } => {
            let f = *fraction;
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidFraction(f));
            }
            let k = (libm::round(f * n as f64) as usize).clamp(1, n);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut states = alloc::vec![ElementState::Open; n];
            for i in rand::seq::index::sample(&mut rng, n, k) {
                states[i] = ElementState::Tunable;
            }
            states
        }
        ConfigKind::Subarrays2x2x9 => {
            let xs = starts_2x2x9(nx)?;
            let ys = starts_2x2x9(ny)?;
            let inside = |v: usize, starts: &[usize; 3]| starts.iter().any(|&s| v == s || v == s + 1);
            (0..n)
                .map(|i| {
                    if inside(i % nx, &xs) && inside(i / nx, &ys) {
                        ElementState::Tunable
                    } else {
                        ElementState::Shorted
                    }
                })
                .collect()
        }
    };
    SurfaceConfig::new(states, kind.seed(), label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordStatus {
    Optimal,
    MaxIter,
    NumericalFailure,
    /// Reference configuration, solved directly.
    Linear,
    /// Model or network error; the record carries no result.
    Error,
}

impl RecordStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordStatus::Optimal => "optimal",
            RecordStatus::MaxIter => "max_iter",
            RecordStatus::NumericalFailure => "numerical_failure",
            RecordStatus::Linear => "linear",
            RecordStatus::Error => "error",
        }
    }
}

impl From<SdpStatus> for RecordStatus {
    fn from(s: SdpStatus) -> Self {
        match s {
            SdpStatus::Optimal => RecordStatus::Optimal,
            SdpStatus::MaxIter => RecordStatus::MaxIter,
            SdpStatus::NumericalFailure => RecordStatus::NumericalFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub config: String,
    pub alpha_deg: f64,
    pub eta: f64,
    pub brcs_dbsm: f64,
    pub tightness: f64,
    /// W per W received.
    pub p_t_min: f64,
    pub iterations: usize,
    pub status: RecordStatus,
    pub reactances: Vec<f64>,
    /// Efficiency of the recovered reactances re-solved as a loaded network.
    pub eta_round_trip: f64,
    pub seed: u64,
    pub message: Option<String>,
}

impl SweepRecord {
    pub fn is_tight(&self) -> bool {
        self.status == RecordStatus::Optimal && self.tightness <= TIGHTNESS_THRESHOLD
    }
}

fn failed(config: &SurfaceConfig, alpha: f64, status: RecordStatus, message: String) -> SweepRecord {
    SweepRecord {
        config: config.label.clone(),
        alpha_deg: alpha,
        eta: f64::NAN,
        brcs_dbsm: f64::NAN,
        tightness: f64::NAN,
        p_t_min: f64::NAN,
        iterations: 0,
        status,
        reactances: Vec::new(),
        eta_round_trip: f64::NAN,
        seed: config.seed,
        message: Some(message),
    }
}

/// Solves one (configuration, angle) pair on the link matrix `z` of `geometry`. Failures
/// are reported in the record status.
pub fn evaluate_record(
    z: &ImpedanceMatrix,
    geometry: &LinkGeometry,
    config: &SurfaceConfig,
    options: &SdpOptions,
) -> SweepRecord {
    let alpha = geometry.alpha_deg;
    let budget = match LinkBudget::from_geometry(geometry) {
        Ok(b) => b,
        Err(e) => return failed(config, alpha, RecordStatus::Error, e.to_string()),
    };
    if config.is_reference() {
        return match loaded_solve(z, config, &[]).and_then(|r| Ok((r.eta, brcs_from_pte(r.eta, &budget)?))) {
            Ok((eta, brcs)) => SweepRecord {
                config: config.label.clone(),
                alpha_deg: alpha,
                eta,
                brcs_dbsm: brcs.dbsm,
                tightness: 0.0,
                p_t_min: 1.0 / eta,
                iterations: 0,
                status: RecordStatus::Linear,
                reactances: Vec::new(),
                eta_round_trip: eta,
                seed: config.seed,
                message: None,
            },
            Err(e) => failed(config, alpha, RecordStatus::Error, e.to_string()),
        };
    }
    match solve_sdr(z, config, options) {
        Ok(out) => match brcs_from_pte(out.eta, &budget) {
            Ok(brcs) => SweepRecord {
                config: config.label.clone(),
                alpha_deg: alpha,
                eta: out.eta,
                brcs_dbsm: brcs.dbsm,
                tightness: out.tightness,
                p_t_min: out.p_t_min,
                iterations: out.iterations,
                status: out.status.into(),
                reactances: out.reactances,
                eta_round_trip: out.eta_round_trip,
                seed: config.seed,
                message: None,
            },
            Err(e) => failed(config, alpha, RecordStatus::Error, e.to_string()),
        },
        Err(Error::SolverFailed(m)) => failed(config, alpha, RecordStatus::NumericalFailure, m),
        Err(e) => failed(config, alpha, RecordStatus::Error, e.to_string()),
    }
}

/// Orders records by configuration position in `labels`, then by angle.
pub fn sort_records(records: &mut [SweepRecord], labels: &[String]) {
    let pos = |l: &str| labels.iter().position(|x| x == l).unwrap_or(usize::MAX);
    records.sort_by(|a, b| {
        pos(&a.config)
            .cmp(&pos(&b.config))
            .then(a.alpha_deg.total_cmp(&b.alpha_deg))
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceRow {
    pub config: String,
    pub alpha_deg: f64,
    /// `η_full - η_config`
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub rows: Vec<DominanceRow>,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.passed)
    }

    pub fn violations(&self) -> impl Iterator<Item = &DominanceRow> {
        self.rows.iter().filter(|r| !r.passed)
    }
}

/// Compares every open/short-based configuration against the fully tunable one at each
/// angle: `η_full ≥ η_config - 1e-6` (absolute). `open_short_labels` selects
/// the configurations to check; other labels (clusters, the reference) are ignored.
pub fn dominance_check(records: &[SweepRecord], full_label: &str, open_short_labels: &[String]) -> Result<DominanceReport> {
    let full: Vec<&SweepRecord> = records.iter().filter(|r| r.config == full_label).collect();
    if full.is_empty() {
        return Err(Error::InvalidConfig(format!("no '{full_label}' records")));
    }
    let mut rows = Vec::new();
    for r in records.iter().filter(|r| open_short_labels.contains(&r.config)) {
        let Some(f) = full.iter().find(|f| f.alpha_deg == r.alpha_deg) else {
            continue;
        };
        let margin = f.eta - r.eta;
        rows.push(DominanceRow {
            config: r.config.clone(),
            alpha_deg: r.alpha_deg,
            margin,
            passed: margin >= -DOMINANCE_TOLERANCE,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no open/short-based records to compare".into()));
    }
    Ok(DominanceReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_counts() {
        let full = make_config(&ConfigKind::Full, 10, 10).unwrap();
        assert_eq!(full.count(ElementState::Tunable), 100);
        let c4 = make_config(&ConfigKind::CenterRemoved { size: 4 }, 10, 10).unwrap();
        assert_eq!((c4.count(ElementState::Tunable), c4.count(ElementState::Open)), (84, 16));
        let c2 = make_config(&ConfigKind::CenterRemoved { size: 2 }, 10, 10).unwrap();
        assert_eq!(c2.indices(ElementState::Open), alloc::vec![44, 45, 54, 55]);
        let cl = make_config(&ConfigKind::Clusters2x2, 10, 10).unwrap();
        assert_eq!(cl.dofs().len(), 25);
        assert!(cl.clusters().values().all(|m| m.len() == 4));
        assert_eq!(cl.clusters()[&0], alloc::vec![0, 1, 10, 11]);
        let sub = make_config(&ConfigKind::Subarrays2x2x9, 10, 10).unwrap();
        assert_eq!(sub.count(ElementState::Tunable), 36);
        assert_eq!(sub.count(ElementState::Shorted), 64);
        for i in [11, 12, 21, 22, 14, 15, 88, 87, 78] {
            assert_eq!(sub.states[i], ElementState::Tunable, "element {i}");
        }
        assert!(make_config(&ConfigKind::ReferenceOpen, 10, 10).unwrap().is_reference());
    }

    #[test]
    fn subarrays_are_mirror_symmetric() {
        let sub = make_config(&ConfigKind::Subarrays2x2x9, 10, 10).unwrap();
        for i in 0..100 {
            let (ix, iy) = (i % 10, i / 10);
            assert_eq!(sub.states[i], sub.states[iy * 10 + 9 - ix]);
            assert_eq!(sub.states[i], sub.states[(9 - iy) * 10 + ix]);
        }
    }

    #[test]
    fn random_masks_are_reproducible() {
        let k = ConfigKind::Random { fraction: 0.5, seed: 7 };
        let a = make_config(&k, 10, 10).unwrap();
        assert_eq!(a, make_config(&k, 10, 10).unwrap());
        assert_eq!(a.count(ElementState::Tunable), 50);
        assert_eq!(a.seed, 7);
        let b = make_config(&ConfigKind::Random { fraction: 0.5, seed: 8 }, 10, 10).unwrap();
        assert_ne!(a.states, b.states);
        let c = make_config(&ConfigKind::Random { fraction: 0.75, seed: 7 }, 10, 10).unwrap();
        assert_eq!(c.count(ElementState::Tunable), 75);
        assert_eq!(c.label, "random_75");
    }

    #[test]
    fn invalid_kinds_are_rejected() {
        for f in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                make_config(&ConfigKind::Random { fraction: f, seed: 1 }, 10, 10),
                Err(Error::InvalidFraction(_))
            ));
        }
        assert!(make_config(&ConfigKind::Clusters2x2, 9, 10).is_err());
        assert!(make_config(&ConfigKind::CenterRemoved { size: 3 }, 10, 10).is_err());
    }

    #[test]
    fn default_labels() {
        let labels: Vec<String> = default_kinds(1).iter().map(|k| k.label()).collect();
        assert_eq!(
            labels,
            [
                "full",
                "clusters_2x2",
                "center_removed_2x2",
                "center_removed_4x4",
                "random_75",
                "random_50",
                "subarrays_2x2x9",
                "reference_open"
            ]
        );
    }

    fn rec(config: &str, alpha: f64, eta: f64) -> SweepRecord {
        SweepRecord {
            config: config.into(),
            alpha_deg: alpha,
            eta,
            brcs_dbsm: 0.0,
            tightness: 0.0,
            p_t_min: 1.0 / eta,
            iterations: 0,
            status: RecordStatus::Optimal,
            reactances: Vec::new(),
            eta_round_trip: eta,
            seed: 0,
            message: None,
        }
    }

    #[test]
    fn dominance_report() {
        let records = alloc::vec![
            rec("full", 0.0, 1e-4),
            rec("full", 10.0, 2e-4),
            rec("sparse", 0.0, 0.5e-4),
            rec("sparse", 10.0, 2.1e-4),
            rec("clusters", 0.0, 5.0),
        ];
        let r = dominance_check(&records, "full", &["sparse".into()]).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(!r.passed());
        let bad: Vec<_> = r.violations().collect();
        assert_eq!((bad[0].config.as_str(), bad[0].alpha_deg), ("sparse", 10.0));

        let same = dominance_check(&records, "full", &["full".into()]).unwrap();
        assert!(same.passed());
        assert!(same.rows.iter().all(|r| r.margin == 0.0));
        assert!(dominance_check(&records, "nope", &["sparse".into()]).is_err());
    }

    #[test]
    fn records_sort_by_config_then_angle() {
        let mut r = alloc::vec![rec("b", 10.0, 1.0), rec("a", 20.0, 1.0), rec("b", 0.0, 1.0), rec("a", 0.0, 1.0)];
        sort_records(&mut r, &["b".into(), "a".into()]);
        let keys: Vec<_> = r.iter().map(|r| (r.config.as_str(), r.alpha_deg)).collect();
        assert_eq!(keys, [("b", 0.0), ("b", 10.0), ("a", 0.0), ("a", 20.0)]);
    }
}
