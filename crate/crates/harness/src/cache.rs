//! Versioned JSON cache of profiles and set families.
//!
//! An entry is keyed by the source tables, block length, β, profile method,
//! sample count and seed. Entries with another format version, or whose
//! stored key disagrees with the requested one, are treated as absent by
//! [`load_or_build`] and as errors by [`load`].

use std::fs;
use std::path::{Path, PathBuf};

use polarsec_core::sets::{build_sets_unchecked, PrimarySets};
use polarsec_core::{EntropyProfile, IndexSetFamily, JointSource, Layer, Method, ProfileSet};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::parallel;
use crate::spec::{method_tag, parse_method, sha256_hex, source_hash};

pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub source_hash: String,
    pub n: usize,
    pub beta: f64,
    pub method: String,
    pub samples: usize,
    pub seed: u64,
}

impl CacheKey {
    pub fn new(source: &JointSource, n: usize, beta: f64, method: Method, samples: usize, seed: u64) -> Self {
        // Exact profiles use neither samples nor randomness.
        let (samples, seed) = if method == Method::Exact { (0, 0) } else { (samples, seed) };
        CacheKey { source_hash: source_hash(source), n, beta, method: method_tag(method).into(), samples, seed }
    }

    pub fn file_name(&self) -> String {
        let id = sha256_hex(serde_json::to_string(self).expect("serializable").as_bytes());
        format!("family-n{}-{}.json", self.n, &id[..16])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileRecord {
    layer: String,
    entropies: Vec<f64>,
    std_errors: Vec<f64>,
    samples: usize,
    aggregate_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SetsRecord {
    h_u: Vec<usize>,
    v_u: Vec<usize>,
    h_u_y: Vec<usize>,
    h_u_z: Vec<usize>,
    v_v_u: Vec<usize>,
    v_v_uz: Vec<usize>,
    h_v_uy: Vec<usize>,
    v_v_uy: Vec<usize>,
    v_x_v: Vec<usize>,
    v_x_vz: Vec<usize>,
    delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    key: CacheKey,
    profiles: Vec<ProfileRecord>,
    sets: SetsRecord,
}

/// Profiles and the (possibly infeasible) set family built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedFamily {
    pub key: CacheKey,
    pub profiles: ProfileSet,
    pub family: IndexSetFamily,
}

impl CachedFamily {
    pub fn build(source: &JointSource, n: usize, beta: f64, method: Method, samples: usize, seed: u64) -> Result<Self, HarnessError> {
        let profiles = parallel::profiles(source, n, method, samples, seed)?;
        let family = build_sets_unchecked(&profiles, beta)?;
        Ok(CachedFamily { key: CacheKey::new(source, n, beta, method, samples, seed), profiles, family })
    }

    fn to_file(&self) -> CacheFile {
        let f = &self.family;
        CacheFile {
            version: CACHE_VERSION,
            key: self.key.clone(),
            profiles: self
                .profiles
                .profiles
                .iter()
                .map(|p| ProfileRecord {
                    layer: p.layer.tag().into(),
                    entropies: p.entropies.clone(),
                    std_errors: p.std_errors.clone(),
                    samples: p.samples,
                    aggregate_se: p.aggregate_se,
                })
                .collect(),
            sets: SetsRecord {
                h_u: f.h_u.clone(),
                v_u: f.v_u.clone(),
                h_u_y: f.h_u_y.clone(),
                h_u_z: f.h_u_z.clone(),
                v_v_u: f.v_v_u.clone(),
                v_v_uz: f.v_v_uz.clone(),
                h_v_uy: f.h_v_uy.clone(),
                v_v_uy: f.v_v_uy.clone(),
                v_x_v: f.v_x_v.clone(),
                v_x_vz: f.v_x_vz.clone(),
                delta: f.delta,
            },
        }
    }

    fn from_file(file: CacheFile) -> Result<Self, String> {
        if file.version != CACHE_VERSION {
            return Err(format!("format version {} (expected {CACHE_VERSION})", file.version));
        }
        let method = parse_method(&file.key.method).ok_or_else(|| format!("unknown method {}", file.key.method))?;
        let n = file.key.n;
        let profiles = file
            .profiles
            .into_iter()
            .map(|r| {
                let layer = Layer::from_tag(&r.layer).ok_or_else(|| format!("unknown layer {}", r.layer))?;
                if r.entropies.len() != n || r.std_errors.len() != n {
                    return Err(format!("profile {} has the wrong length", r.layer));
                }
                Ok(EntropyProfile {
                    layer,
                    n_len: n,
                    entropies: r.entropies,
                    std_errors: r.std_errors,
                    samples: r.samples,
                    method,
                    aggregate_se: r.aggregate_se,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let profiles = ProfileSet::new(profiles).map_err(|e| e.to_string())?;
        let s = file.sets;
        let primary = PrimarySets {
            n_len: n,
            h_u: s.h_u,
            v_u: s.v_u,
            h_u_y: s.h_u_y,
            h_u_z: s.h_u_z,
            v_v_u: s.v_v_u,
            v_v_uz: s.v_v_uz,
            h_v_uy: s.h_v_uy,
            v_v_uy: s.v_v_uy,
            v_x_v: s.v_x_v,
            v_x_vz: s.v_x_vz,
        };
        let family = IndexSetFamily::from_primary(primary, file.key.beta, s.delta);
        let bad = family.invariant_violations();
        if !bad.is_empty() {
            return Err(format!("stored sets violate {}", bad.join(", ")));
        }
        Ok(CachedFamily { key: file.key, profiles, family })
    }
}

pub fn cache_dir(out: &Path) -> PathBuf {
    out.join("cache")
}

pub fn path_for(out: &Path, key: &CacheKey) -> PathBuf {
    cache_dir(out).join(key.file_name())
}

pub fn store(out: &Path, entry: &CachedFamily) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(cache_dir(out))?;
    let path = path_for(out, &entry.key);
    let text = serde_json::to_string_pretty(&entry.to_file()).expect("serializable");
    fs::write(&path, text + "\n")?;
    Ok(path)
}

/// Reads the entry for `key`; a missing file is [`HarnessError::MissingCache`].
pub fn load(out: &Path, key: &CacheKey) -> Result<CachedFamily, HarnessError> {
    let path = path_for(out, key);
    let shown = path.display().to_string();
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(HarnessError::MissingCache { n: key.n, path: shown })
        }
        Err(e) => return Err(e.into()),
    };
    let file: CacheFile =
        serde_json::from_str(&text).map_err(|e| HarnessError::BadCache { path: shown.clone(), reason: e.to_string() })?;
    if &file.key != key {
        return Err(HarnessError::BadCache { path: shown, reason: "stored key differs from the request".into() });
    }
    CachedFamily::from_file(file).map_err(|reason| HarnessError::BadCache { path: shown, reason })
}

/// Returns the cached entry for `key`, building and storing it when absent
/// or unusable. The flag is `true` on a cache hit.
pub fn load_or_build(
    out: &Path,
    source: &JointSource,
    n: usize,
    beta: f64,
    method: Method,
    samples: usize,
    seed: u64,
) -> Result<(CachedFamily, bool), HarnessError> {
    let key = CacheKey::new(source, n, beta, method, samples, seed);
    match load(out, &key) {
        Ok(entry) => Ok((entry, true)),
        Err(HarnessError::MissingCache { .. } | HarnessError::BadCache { .. }) => {
            let entry = CachedFamily::build(source, n, beta, method, samples, seed)?;
            store(out, &entry)?;
            Ok((entry, false))
        }
        Err(e) => Err(e),
    }
}
