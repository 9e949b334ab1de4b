//! Automated check suite over a scenario: passivity gate, solver status, tightness,
//! round trip, dominance and a brute-force comparison on a reduced surface.

use std::fmt::Write as _;
use std::path::Path;

use sris_core::network::ImpedanceMatrix;
use sris_core::scenario::{dominance_check, make_config, ConfigKind, RecordStatus, SweepRecord};
use sris_core::sdr::{oracle_search, solve_sdr, OracleOptions, TIGHTNESS_THRESHOLD};

use crate::error::Result;
use crate::spec::{LoadedSpec, ZSource};
use crate::sweep::{evaluate_all, load_links, SweepOptions};
use crate::zcache::synthesize;

/// Relative tolerance of the round-trip identity.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-6;
/// Relative tolerance of the brute-force comparison.
pub const ORACLE_TOLERANCE: f64 = 1e-3;
/// Surfaces with at most this many elements are compared against the brute-force search
/// directly; larger ones are compared on a 3×1 copy of their geometry.
pub const ORACLE_MAX_ELEMENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skipped => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
    pub records: Vec<SweepRecord>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.outcome != Outcome::Fail)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            writeln!(s, "{:<12} {}  {}", r.name, r.outcome.as_str(), r.detail).unwrap();
        }
        s
    }
}

fn row(name: &'static str, ok: bool, detail: String) -> CheckRow {
    CheckRow {
        name,
        outcome: if ok { Outcome::Pass } else { Outcome::Fail },
        detail,
    }
}

const LATER: [&str; 5] = ["solver", "tightness", "round_trip", "dominance", "oracle"];

pub fn run_verify(loaded: &LoadedSpec, options: &SweepOptions) -> Result<VerifyReport> {
    let links = load_links(loaded, options)?;

    // passivity gate: Re Z must be positive semidefinite for every angle
    let mut matrices = Vec::with_capacity(links.len());
    let mut gate_failures = Vec::new();
    let mut worst = f64::INFINITY;
    for l in &links {
        let origin = Path::new(&l.origin);
        let z = ImpedanceMatrix::new_unchecked_passivity(l.cache.entries(origin)?, l.cache.roles.clone(), l.cache.frequency)?;
        let (min, tol) = z.passivity_margin();
        worst = worst.min(min);
        if min < -tol {
            gate_failures.push(format!("alpha {}: min eig Re Z = {min:.3e} ({})", l.alpha_deg, l.origin));
        }
        matrices.push(z);
    }
    let mut rows = vec![row(
        "passivity",
        gate_failures.is_empty(),
        if gate_failures.is_empty() {
            format!("{} matrices, min eig Re Z = {worst:.3e} ohm", links.len())
        } else {
            gate_failures.join("; ")
        },
    )];
    if !gate_failures.is_empty() {
        rows.extend(LATER.iter().map(|&name| CheckRow {
            name,
            outcome: Outcome::Skipped,
            detail: "passivity gate failed".into(),
        }));
        return Ok(VerifyReport { rows, records: Vec::new() });
    }

    let records = evaluate_all(loaded, &links, &matrices, options)?;

    let bad: Vec<&SweepRecord> = records
        .iter()
        .filter(|r| !matches!(r.status, RecordStatus::Optimal | RecordStatus::Linear))
        .collect();
    rows.push(row(
        "solver",
        bad.is_empty(),
        match bad.first() {
            None => format!("{} records optimal or linear", records.len()),
            Some(r) => format!("{} of {} records failed, first {} at {}: {}", bad.len(), records.len(), r.config, r.alpha_deg, r.status.as_str()),
        },
    ));

    let optimal: Vec<&SweepRecord> = records.iter().filter(|r| r.status == RecordStatus::Optimal).collect();
    let loose: Vec<&&SweepRecord> = optimal.iter().filter(|r| !(r.tightness <= TIGHTNESS_THRESHOLD)).collect();
    let worst = optimal.iter().copied().max_by(|a, b| a.tightness.total_cmp(&b.tightness));
    rows.push(row(
        "tightness",
        loose.is_empty(),
        match worst {
            None => "no relaxed records".into(),
            Some(w) => format!(
                "{} of {} optimal records above {TIGHTNESS_THRESHOLD:.0e}; max {:.2e} ({} at {})",
                loose.len(),
                optimal.len(),
                w.tightness,
                w.config,
                w.alpha_deg
            ),
        },
    ));

    let tight: Vec<&&SweepRecord> = optimal.iter().filter(|r| r.is_tight()).collect();
    let rt_err = |r: &SweepRecord| (r.eta_round_trip - r.eta).abs() / r.eta.abs();
    let rt_bad = tight.iter().filter(|r| !(rt_err(r) <= ROUND_TRIP_TOLERANCE)).count();
    let rt_max = tight.iter().map(|r| rt_err(r)).fold(0.0, f64::max);
    rows.push(row(
        "round_trip",
        rt_bad == 0,
        format!("{} tight records, max relative error {rt_max:.2e}, {rt_bad} above {ROUND_TRIP_TOLERANCE:.0e}", tight.len()),
    ));

    let kinds = loaded.spec.kinds();
    let open_short: Vec<String> = kinds.iter().filter(|k| k.is_open_short_based()).map(ConfigKind::label).collect();
    let has_full = kinds.contains(&ConfigKind::Full);
    rows.push(if has_full && !open_short.is_empty() {
        let report = dominance_check(&records, &ConfigKind::Full.label(), &open_short)?;
        let v: Vec<String> = report.violations().map(|r| format!("{} at {} ({:.3e})", r.config, r.alpha_deg, r.margin)).collect();
        row(
            "dominance",
            v.is_empty(),
            if v.is_empty() {
                format!("{} comparisons, min margin {:.3e}", report.rows.len(), report.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min))
            } else {
                format!("violations: {}", v.join(", "))
            },
        )
    } else {
        CheckRow {
            name: "dominance",
            outcome: Outcome::Skipped,
            detail: "needs the full configuration and an open/short-based one".into(),
        }
    });

    rows.push(oracle_check(loaded, &matrices)?);
    Ok(VerifyReport { rows, records })
}

/// Compares the relaxation against brute force for every tunable configuration of a small
/// surface, or for the fully tunable 3×1 reduction of a large synthetic one.
fn oracle_check(loaded: &LoadedSpec, matrices: &[ImpedanceMatrix]) -> Result<CheckRow> {
    let spec = &loaded.spec;
    let solver = spec.solver.options();
    let mut cases: Vec<(String, ImpedanceMatrix, sris_core::network::SurfaceConfig)> = Vec::new();
    if spec.geometry.element_count() <= ORACLE_MAX_ELEMENTS {
        for (z, &alpha) in matrices.iter().zip(&spec.alphas) {
            for k in spec.kinds().iter().filter(|k| **k != ConfigKind::ReferenceOpen) {
                let cfg = make_config(k, spec.geometry.grid_nx, spec.geometry.grid_ny)?;
                cases.push((format!("{} at {alpha}", k.label()), z.clone(), cfg));
            }
        }
    } else {
        if spec.z_source != ZSource::Synthetic {
            return Ok(CheckRow {
                name: "oracle",
                outcome: Outcome::Skipped,
                detail: "reduced-size comparison needs a synthetic source".into(),
            });
        }
        let mut small = spec.geometry.clone();
        small.grid_nx = 3;
        small.grid_ny = 1;
        let z_s = sris_core::em::surface_impedance(&small)?;
        for &alpha in &spec.alphas {
            let g = small.with_alpha(alpha);
            let z = synthesize(&g, &z_s)?.impedance(Path::new("reduced"))?;
            cases.push((format!("full 3x1 at {alpha}"), z, make_config(&ConfigKind::Full, 3, 1)?));
        }
    }
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (name, z, cfg) in &cases {
        let sdr = solve_sdr(z, cfg, &solver)?;
        let oracle = oracle_search(z, cfg, &OracleOptions::default())?;
        let rel = (sdr.eta - oracle.eta).abs() / oracle.eta;
        worst = worst.max(rel);
        if !(rel <= ORACLE_TOLERANCE && sdr.eta >= oracle.eta - 1e-9) {
            failures.push(format!("{name}: sdr {:.6e} vs oracle {:.6e}", sdr.eta, oracle.eta));
        }
    }
    Ok(row(
        "oracle",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} cases, max relative difference {worst:.2e}", cases.len())
        } else {
            failures.join("; ")
        },
    ))
}
