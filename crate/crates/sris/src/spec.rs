//! Scenario files: geometry, configuration list, angle grid, solver settings and the
//! source of the impedance matrices. Every field has a default, so `{}` is the standard
//! 10×10 setup swept over all eight configurations at 0..80°.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sris_core::em::LinkGeometry;
use sris_core::scenario::{default_kinds, ConfigKind, DEFAULT_ALPHAS};
use sris_core::sdp::SdpOptions;

use crate::error::{Result, SrisError};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub geometry: LinkGeometry,
    pub configs: Vec<ConfigEntry>,
    /// Receiver angles, degrees.
    pub alphas: Vec<f64>,
    /// Seed of random selections that do not carry their own.
    pub seed: u64,
    pub solver: SolverSpec,
    pub z_source: ZSource,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            geometry: LinkGeometry::standard(),
            configs: default_kinds(DEFAULT_SEED)
                .iter()
                .map(|k| ConfigEntry::from_kind(k, false))
                .collect(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            seed: DEFAULT_SEED,
            solver: SolverSpec::default(),
            z_source: ZSource::Synthetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ConfigEntry {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "clusters_2x2")]
    Clusters2x2,
    #[serde(rename = "center_removed")]
    CenterRemoved { size: usize },
    #[serde(rename = "random")]
    Random {
        fraction: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    #[serde(rename = "subarrays_2x2x9")]
    Subarrays2x2x9,
    #[serde(rename = "reference_open")]
    ReferenceOpen,
}

impl ConfigEntry {
    fn from_kind(kind: &ConfigKind, keep_seed: bool) -> Self {
        match *kind {
            ConfigKind::Full => Self::Full,
            ConfigKind::Clusters2x2 => Self::Clusters2x2,
            ConfigKind::CenterRemoved { size } => Self::CenterRemoved { size },
            ConfigKind::Random { fraction, seed } => Self::Random {
                fraction,
                seed: keep_seed.then_some(seed),
            },
            ConfigKind::Subarrays2x2x9 => Self::Subarrays2x2x9,
            ConfigKind::ReferenceOpen => Self::ReferenceOpen,
        }
    }

    pub fn kind(&self, default_seed: u64) -> ConfigKind {
        match *self {
            Self::Full => ConfigKind::Full,
            Self::Clusters2x2 => ConfigKind::Clusters2x2,
            Self::CenterRemoved { size } => ConfigKind::CenterRemoved { size },
            Self::Random { fraction, seed } => ConfigKind::Random {
                fraction,
                seed: seed.unwrap_or(default_seed),
            },
            Self::Subarrays2x2x9 => ConfigKind::Subarrays2x2x9,
            Self::ReferenceOpen => ConfigKind::ReferenceOpen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let o = SdpOptions::default();
        Self {
            tol_gap: o.tol_gap,
            tol_feas: o.tol_feas,
            max_iter: o.max_iter,
        }
    }
}

impl SolverSpec {
    pub fn options(&self) -> SdpOptions {
        SdpOptions {
            tol_gap: self.tol_gap,
            tol_feas: self.tol_feas,
            max_iter: self.max_iter,
            record_history: false,
        }
    }
}

/// Where the link matrix of each angle comes from. `pattern` may contain `{alpha}`, which
/// is replaced by the angle in shortest decimal form (`10`, `12.5`). Relative paths are
/// resolved against the scenario file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZSource {
    Synthetic,
    CacheFile { pattern: String },
    Touchstone { pattern: String, roles: String },
}

impl ZSource {
    pub fn path_for(&self, alpha: f64, base: &Path) -> Option<PathBuf> {
        let pattern = match self {
            ZSource::Synthetic => return None,
            ZSource::CacheFile { pattern } | ZSource::Touchstone { pattern, .. } => pattern,
        };
        Some(base.join(pattern.replace("{alpha}", &format_alpha(alpha))))
    }
}

pub fn format_alpha(alpha: f64) -> String {
    format!("{alpha}")
}

/// A parsed scenario with the directory its relative paths refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSpec {
    pub spec: ScenarioSpec,
    pub base_dir: PathBuf,
}

impl ScenarioSpec {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text).map_err(|source| SrisError::Json {
            path: origin.into(),
            source,
        })?;
        spec.validate(origin)?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<LoadedSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| SrisError::io(path, e))?;
        let spec = Self::from_json(&text, path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedSpec { spec, base_dir })
    }

    pub fn validate(&self, origin: &Path) -> Result<()> {
        let invalid = |m: String| SrisError::parse(origin, 0, m);
        self.geometry.validate()?;
        if self.alphas.is_empty() {
            return Err(invalid("alphas must not be empty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !a.is_finite() || a.abs() >= 90.0) {
            return Err(invalid(format!("alpha {a} outside (-90, 90) degrees")));
        }
        let mut seen = BTreeSet::new();
        if let Some(a) = self.alphas.iter().find(|a| !seen.insert(a.to_bits())) {
            return Err(invalid(format!("alpha {a} listed twice")));
        }
        if self.configs.is_empty() {
            return Err(invalid("configs must not be empty".into()));
        }
        let mut labels = BTreeSet::new();
        for kind in self.kinds() {
            if !labels.insert(kind.label()) {
                return Err(invalid(format!("configuration '{}' listed twice", kind.label())));
            }
            sris_core::scenario::make_config(&kind, self.geometry.grid_nx, self.geometry.grid_ny)?;
        }
        let s = &self.solver;
        if !(s.tol_gap > 0.0 && s.tol_feas > 0.0 && s.max_iter > 0) {
            return Err(invalid("solver tolerances and max_iter must be positive".into()));
        }
        if let ZSource::Touchstone { roles, .. } = &self.z_source {
            crate::touchstone::parse_roles(roles, self.geometry.element_count() + 2).map_err(|e| invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn kinds(&self) -> Vec<ConfigKind> {
        self.configs.iter().map(|c| c.kind(self.seed)).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.kinds().iter().map(ConfigKind::label).collect()
    }

    /// SHA-256 of the canonical JSON of the effective scenario (after overrides).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("spec.json")
    }

    #[test]
    fn empty_object_is_the_default_sweep() {
        let s = ScenarioSpec::from_json("{}", p()).unwrap();
        assert_eq!(s, ScenarioSpec::default());
        assert_eq!(s.labels().len(), 8);
        assert_eq!(s.alphas.len(), 9);
        assert_eq!(s.geometry.beta_deg, -10.0);
    }

    #[test]
    fn random_seed_defaults_to_spec_seed() {
        let s = ScenarioSpec::from_json(
            r#"{"seed": 9, "configs": [{"kind": "random", "fraction": 0.5}, {"kind": "random", "fraction": 0.75, "seed": 3}]}"#,
            p(),
        )
        .unwrap();
        assert_eq!(s.kinds()[0], ConfigKind::Random { fraction: 0.5, seed: 9 });
        assert_eq!(s.kinds()[1], ConfigKind::Random { fraction: 0.75, seed: 3 });
    }

    #[test]
    fn z_sources() {
        let s = ScenarioSpec::from_json(
            r#"{"z_source": {"type": "touchstone", "pattern": "z_{alpha}.s102p", "roles": "tx=1,rx=102"}}"#,
            p(),
        )
        .unwrap();
        assert_eq!(s.z_source.path_for(12.5, Path::new("d")), Some(PathBuf::from("d/z_12.5.s102p")));
        assert_eq!(s.z_source.path_for(10.0, Path::new("")), Some(PathBuf::from("z_10.s102p")));
        assert_eq!(ZSource::Synthetic.path_for(1.0, Path::new("")), None);
    }

    #[test]
    fn invalid_specs_are_parse_errors() {
        for bad in [
            r#"{"alphas": []}"#,
            r#"{"alphas": [10, 10]}"#,
            r#"{"alphas": [95]}"#,
            r#"{"configs": []}"#,
            r#"{"configs": [{"kind": "full"}, {"kind": "full"}]}"#,
            r#"{"configs": [{"kind": "random", "fraction": 1.5}]}"#,
            r#"{"configs": [{"kind": "bogus"}]}"#,
            r#"{"unknown": 1}"#,
            r#"{"geometry": {"spacing": -1}}"#,
            r#"{"solver": {"tol_gap": 0}}"#,
            r#"{"z_source": {"type": "touchstone", "pattern": "x", "roles": "tx=1"}}"#,
            "not json",
        ] {
            let e = ScenarioSpec::from_json(bad, p()).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}: {e}");
        }
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ScenarioSpec::default();
        let mut b = a.clone();
        b.seed = 2;
        assert_eq!(a.hash(), ScenarioSpec::default().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
