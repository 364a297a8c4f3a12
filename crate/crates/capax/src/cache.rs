//! Content-addressed JSON cache for oracle and calibration results.
//!
//! Entries live under `$CAPAX_CACHE_DIR/<kind>/<sha256>.json`, keyed by the
//! SHA-256 of the instance description. Without the variable the cache is
//! disabled and every lookup misses.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use capax_core::oracle::{exact_equilibrium, self_energy_constant, SelfEnergyEstimate};
use capax_core::{GramForm, Kernel, SubsetMask};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "CAPAX_CACHE_DIR";

#[derive(Debug, Clone, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    instance: Value,
    value: Value,
}

fn hex_bits(xs: impl IntoIterator<Item = f64>) -> Vec<String> {
    xs.into_iter().map(|x| format!("{:016x}", x.to_bits())).collect()
}

impl Cache {
    pub fn from_env() -> Self {
        Cache { dir: std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from) }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: Some(dir.into()) }
    }

    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn key(instance: &Value) -> String {
        hex::encode(Sha256::digest(instance.to_string().as_bytes()))
    }

    fn path(&self, kind: &str, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(kind).join(format!("{key}.json")))
    }

    pub fn get(&self, kind: &str, instance: &Value) -> Option<Value> {
        let key = Self::key(instance);
        let text = fs::read_to_string(self.path(kind, &key)?).ok()?;
        let entry: Entry = serde_json::from_str(&text).ok()?;
        // guard against hash collisions and hand-edited files
        (entry.key == key && &entry.instance == instance).then_some(entry.value)
    }

    pub fn put(&self, kind: &str, instance: &Value, value: &Value) -> Result<()> {
        let key = Self::key(instance);
        let Some(path) = self.path(kind, &key) else { return Ok(()) };
        let dir = path.parent().expect("cache paths have a parent");
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let entry = Entry { key, instance: instance.clone(), value: value.clone() };
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_string(&entry)?)?;
        fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// Self-energy constant, computed once per `(kernel, cell_dim, samples, seed)`.
    pub fn self_energy(&self, kernel: &Kernel, cell_dim: usize, samples: usize, seed: u64) -> Result<(SelfEnergyEstimate, bool)> {
        let instance = serde_json::json!({
            "kernel": format!("{kernel:?}"),
            "cell_dim": cell_dim,
            "samples": samples,
            "seed": seed,
        });
        if let Some(v) = self.get("self_energy", &instance) {
            if let (Some(value), Some(stderr)) = (v["value"].as_u64(), v["stderr"].as_u64()) {
                let est = SelfEnergyEstimate { value: f64::from_bits(value), stderr: f64::from_bits(stderr), samples };
                return Ok((est, true));
            }
        }
        let est = self_energy_constant(kernel, cell_dim, samples, seed)?;
        let value = serde_json::json!({ "value": est.value.to_bits(), "stderr": est.stderr.to_bits() });
        self.put("self_energy", &instance, &value)?;
        Ok((est, false))
    }

    /// Capacity and equilibrium weights of `A` from the enumeration oracle.
    pub fn exact_equilibrium(&self, gram: &GramForm, a: &SubsetMask) -> Result<(f64, Vec<f64>, bool)> {
        let m = gram.matrix();
        let instance = serde_json::json!({
            "matrix": hex_bits((0..m.rows()).flat_map(|i| m.row(i).to_vec())),
            "n": m.rows(),
            "subset": a.indices(),
        });
        if let Some(v) = self.get("exact_equilibrium", &instance) {
            let bits: Option<Vec<u64>> = v["weights"].as_array().map(|a| a.iter().filter_map(Value::as_u64).collect());
            if let (Some(c), Some(bits)) = (v["capacity"].as_u64(), bits) {
                if bits.len() == m.rows() {
                    return Ok((f64::from_bits(c), bits.into_iter().map(f64::from_bits).collect(), true));
                }
            }
        }
        let eq = exact_equilibrium(gram, a, &SubsetMask::all(gram.len()))?;
        let weights = eq.gamma.weights().to_vec();
        let value = serde_json::json!({
            "capacity": eq.capacity.to_bits(),
            "weights": weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
        });
        self.put("exact_equilibrium", &instance, &value)?;
        Ok((eq.capacity, weights, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use capax_core::Matrix;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path());
        let g = GramForm::from_matrix(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap();
        let a = SubsetMask::all(2);
        let (c1, w1, hit1) = cache.exact_equilibrium(&g, &a).unwrap();
        let (c2, w2, hit2) = cache.exact_equilibrium(&g, &a).unwrap();
        assert!(!hit1 && hit2);
        assert_eq!(c1.to_bits(), c2.to_bits());
        assert_eq!(w1, w2);
        assert!((c1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disabled_cache_never_hits() {
        let cache = Cache::disabled();
        let instance = serde_json::json!({"x": 1});
        cache.put("k", &instance, &serde_json::json!(2)).unwrap();
        assert!(cache.get("k", &instance).is_none());
    }

    #[test]
    fn mismatched_instance_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path());
        let a = serde_json::json!({"x": 1});
        cache.put("k", &a, &serde_json::json!(2)).unwrap();
        let key = Cache::key(&a);
        let path = dir.path().join("k").join(format!("{key}.json"));
        let text = fs::read_to_string(&path).unwrap().replace("\"x\":1", "\"x\":3");
        fs::write(&path, text).unwrap();
        assert!(cache.get("k", &a).is_none());
    }

    #[test]
    fn self_energy_is_cached() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path());
        let k = Kernel::newtonian(3).unwrap();
        let (a, hit_a) = cache.self_energy(&k, 3, 100_000, 1).unwrap();
        let (b, hit_b) = cache.self_energy(&k, 3, 100_000, 1).unwrap();
        assert!(!hit_a && hit_b);
        assert_eq!(a, b);
    }
}
