//! JSON cache of link impedance matrices, keyed by a content hash of the geometry.
//!
//! Numbers are written by serde_json's shortest round-trip formatter and parsed with
//! `float_roundtrip`, so a matrix survives a write/read cycle bit for bit.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sris_core::em::{assemble_link, LinkGeometry};
use sris_core::linalg::CMatrix;
use sris_core::network::{ImpedanceMatrix, PortRole};

use crate::error::{Result, SrisError};
use crate::io::write_atomic;

pub const FORMAT: &str = "sris-zcache";
/// Bumped whenever the impedance model changes, which invalidates old cache entries.
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZCache {
    pub format: String,
    pub version: u32,
    /// Geometry hash for synthesized matrices; absent for imported ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    /// Hz
    pub frequency: f64,
    pub roles: Vec<PortRole>,
    /// Diagonal shift added to make `Re Z` positive semidefinite, ohm.
    #[serde(default)]
    pub passivity_shift: f64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ZCache {
    pub fn from_matrix(entries: &CMatrix, roles: Vec<PortRole>, frequency: f64) -> Self {
        let n = entries.nrows();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|r| (0..n).map(|c| f(&entries[(r, c)])).collect()).collect()
        };
        Self {
            format: FORMAT.into(),
            version: VERSION,
            key: None,
            frequency,
            roles,
            passivity_shift: 0.0,
            re: rows(|v| v.re),
            im: rows(|v| v.im),
        }
    }

    pub fn port_count(&self) -> usize {
        self.roles.len()
    }

    /// The stored matrix, checked for shape only.
    pub fn entries(&self, origin: &Path) -> Result<CMatrix> {
        let n = self.roles.len();
        let shape_ok = self.re.len() == n
            && self.im.len() == n
            && self.re.iter().chain(&self.im).all(|row| row.len() == n);
        if !shape_ok {
            return Err(SrisError::parse(origin, 0, format!("matrix is not {n}x{n} as the roles require")));
        }
        Ok(CMatrix::from_fn(n, n, |r, c| Complex64::new(self.re[r][c], self.im[r][c])))
    }

    /// Validated impedance matrix (symmetry, roles, passivity).
    pub fn impedance(&self, origin: &Path) -> Result<ImpedanceMatrix> {
        Ok(ImpedanceMatrix::new(self.entries(origin)?, self.roles.clone(), self.frequency)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("cache serializes");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SrisError::io(path, e))?;
        let cache: ZCache = serde_json::from_str(&text).map_err(|source| SrisError::Json {
            path: path.into(),
            source,
        })?;
        if cache.format != FORMAT {
            return Err(SrisError::parse(path, 0, format!("not a {FORMAT} file")));
        }
        if cache.version != VERSION {
            return Err(SrisError::parse(
                path,
                0,
                format!("cache version {} (this build reads {VERSION})", cache.version),
            ));
        }
        Ok(cache)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }
}

/// Hex SHA-256 over the cache format version and the canonical JSON of `geometry`.
pub fn geometry_key(geometry: &LinkGeometry) -> String {
    let json = serde_json::to_string(geometry).expect("geometry serializes");
    let mut h = Sha256::new();
    h.update(format!("{FORMAT}/{VERSION}\n").as_bytes());
    h.update(json.as_bytes());
    hex::encode(h.finalize())
}

/// Synthesizes the link matrix of `geometry` from a precomputed surface block `z_s`.
pub fn synthesize(geometry: &LinkGeometry, z_s: &CMatrix) -> Result<ZCache> {
    let link = assemble_link(geometry, z_s)?;
    let z = &link.impedance;
    let mut cache = ZCache::from_matrix(z.entries(), z.roles().to_vec(), z.frequency());
    cache.key = Some(geometry_key(geometry));
    cache.passivity_shift = link.passivity_shift;
    Ok(cache)
}

/// Directory-backed store of synthesized matrices, one `<key>.json` per geometry.
#[derive(Debug, Clone)]
pub struct CacheDir {
    pub root: PathBuf,
}

impl CacheDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_for(&self, geometry: &LinkGeometry) -> PathBuf {
        self.root.join(format!("{}.json", geometry_key(geometry)))
    }

    /// Cached matrix for `geometry`, or `None` when absent or stale. Unreadable entries are
    /// treated as absent and overwritten by the next [`store`](Self::store).
    pub fn load(&self, geometry: &LinkGeometry) -> Option<ZCache> {
        let cache = ZCache::read(&self.path_for(geometry)).ok()?;
        (cache.key.as_deref() == Some(geometry_key(geometry).as_str())).then_some(cache)
    }

    pub fn store(&self, geometry: &LinkGeometry, cache: &ZCache) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| SrisError::io(&self.root, e))?;
        cache.write(&self.path_for(geometry))
    }
}
