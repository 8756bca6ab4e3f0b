//! Named, seeded parameter storage.
//!
//! [`ParamStore`] is a `candle_nn` variable backend whose fresh parameters are
//! drawn from a ChaCha stream keyed by `(seed, parameter name)`, so
//! initialization is reproducible and independent of construction order.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use candle_core::{DType, Device, Shape, Tensor, Var};
use candle_nn::init::{FanInOut, NonLinearity, NormalOrUniform};
use candle_nn::var_builder::SimpleBackend;
use candle_nn::{Init, VarBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

struct Inner {
    vars: Mutex<BTreeMap<String, Var>>,
    seed: u64,
    dtype: DType,
    device: Device,
}

/// Named parameter values in name order.
pub type Snapshot = Vec<(String, Tensor)>;

#[derive(Clone)]
pub struct ParamStore {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for ParamStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParamStore")
            .field("seed", &self.inner.seed)
            .field("params", &self.len())
            .finish()
    }
}

fn name_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn init_values(init: Init, shape: &Shape, rng: &mut ChaCha8Rng) -> candle_core::Result<Vec<f64>> {
    let n = shape.elem_count();
    let normal = |mean: f64, std: f64, rng: &mut ChaCha8Rng| -> candle_core::Result<Vec<f64>> {
        let d = Normal::new(mean, std).map_err(candle_core::Error::wrap)?;
        Ok((0..n).map(|_| d.sample(rng)).collect())
    };
    match init {
        Init::Const(v) => Ok(vec![v; n]),
        Init::Randn { mean, stdev } => normal(mean, stdev, rng),
        Init::Uniform { lo, up } => Ok((0..n).map(|_| rng.gen_range(lo..up)).collect()),
        Init::Kaiming {
            dist,
            fan,
            non_linearity,
        } => {
            let dims = shape.dims();
            let receptive: usize = dims.iter().skip(2).product();
            let fan_size = match fan {
                FanInOut::FanIn => dims.get(1).copied().unwrap_or(1) * receptive,
                FanInOut::FanOut => dims.first().copied().unwrap_or(1) * receptive,
            };
            let gain = match non_linearity {
                NonLinearity::ReLU => 2f64.sqrt(),
                NonLinearity::Tanh => 5.0 / 3.0,
                NonLinearity::Linear | NonLinearity::Sigmoid => 1.0,
                NonLinearity::SELU => 0.75,
                NonLinearity::ExplicitGain(g) => g,
            };
            let std = gain / (fan_size.max(1) as f64).sqrt();
            match dist {
                NormalOrUniform::Normal => normal(0.0, std, rng),
                NormalOrUniform::Uniform => {
                    let bound = 3f64.sqrt() * std;
                    Ok((0..n).map(|_| rng.gen_range(-bound..bound)).collect())
                }
            }
        }
    }
}

impl ParamStore {
    pub fn new(seed: u64, dtype: DType, device: Device) -> Self {
        ParamStore {
            inner: Arc::new(Inner {
                vars: Mutex::new(BTreeMap::new()),
                seed,
                dtype,
                device,
            }),
        }
    }

    pub fn cpu(seed: u64) -> Self {
        ParamStore::new(seed, DType::F32, Device::Cpu)
    }

    pub fn dtype(&self) -> DType {
        self.inner.dtype
    }

    pub fn device(&self) -> &Device {
        &self.inner.device
    }

    /// Builder that creates missing parameters with seeded values.
    pub fn var_builder(&self) -> VarBuilder<'static> {
        self.builder(false)
    }

    /// Builder for which a missing parameter is an error. Used when a model
    /// must come entirely from loaded weights.
    pub fn strict_builder(&self) -> VarBuilder<'static> {
        self.builder(true)
    }

    fn builder(&self, strict: bool) -> VarBuilder<'static> {
        let backend = Backend {
            store: self.clone(),
            strict,
        };
        VarBuilder::from_backend(Box::new(backend), self.inner.dtype, self.inner.device.clone())
    }

    pub fn len(&self) -> usize {
        self.inner.vars.lock().expect("param lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, name: &str) -> bool {
        self.inner.vars.lock().expect("param lock").contains_key(name)
    }

    /// Inserts (or replaces) trainable parameters, converting to the store
    /// dtype and device.
    pub fn insert_tensors<I>(&self, tensors: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, Tensor)>,
    {
        let mut vars = self.inner.vars.lock().expect("param lock");
        for (name, t) in tensors {
            let t = t.to_dtype(self.inner.dtype)?.to_device(&self.inner.device)?;
            vars.insert(name, Var::from_tensor(&t)?);
        }
        Ok(())
    }

    /// Loads a safetensors file, keeping tensors whose name passes `keep` and
    /// storing them under `prefix` + original name.
    pub fn load_safetensors(&self, path: &Path, prefix: &str, keep: impl Fn(&str) -> bool) -> Result<usize> {
        let tensors = candle_core::safetensors::load(path, &self.inner.device)
            .map_err(|e| Error::load("safetensors weights", path, e))?;
        let kept: Vec<(String, Tensor)> = tensors
            .into_iter()
            .filter(|(n, _)| keep(n))
            .map(|(n, t)| (format!("{prefix}{n}"), t))
            .collect();
        let count = kept.len();
        self.insert_tensors(kept)?;
        Ok(count)
    }

    /// Saves every parameter whose name starts with `prefix`, with the prefix
    /// stripped, to a safetensors file.
    pub fn save_safetensors(&self, path: &Path, prefix: &str) -> Result<()> {
        let map: HashMap<String, Tensor> = self
            .named_tensors()
            .into_iter()
            .filter_map(|(n, t)| n.strip_prefix(prefix).map(|s| (s.to_string(), t)))
            .collect();
        let tmp = crate::corpus::tmp_sibling(path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        candle_core::safetensors::save(&map, &tmp)?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// All parameters sorted by name.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.inner
            .vars
            .lock()
            .expect("param lock")
            .iter()
            .map(|(n, v)| (n.clone(), v.as_tensor().clone()))
            .collect()
    }

    pub fn vars(&self) -> Vec<Var> {
        self.inner.vars.lock().expect("param lock").values().cloned().collect()
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.inner.vars.lock().expect("param lock").get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.inner.vars.lock().expect("param lock").keys().cloned().collect()
    }

    /// Checksum over every parameter whose name starts with `prefix`.
    pub fn checksum(&self, prefix: &str) -> Result<String> {
        let named: Vec<(String, Tensor)> = self
            .named_tensors()
            .into_iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .collect();
        tensor_checksum(&named)
    }

    /// Deep copy of current parameter values.
    pub fn snapshot(&self) -> Result<Snapshot> {
        self.named_tensors()
            .into_iter()
            .map(|(n, t)| Ok((n, t.copy()?)))
            .collect()
    }

    /// Restores values captured by [`ParamStore::snapshot`].
    pub fn restore(&self, snapshot: &[(String, Tensor)]) -> Result<()> {
        let vars = self.inner.vars.lock().expect("param lock");
        for (name, t) in snapshot {
            if let Some(v) = vars.get(name) {
                v.set(t)?;
            }
        }
        Ok(())
    }
}

/// SHA-256 over names, shapes and little-endian values, in the given order.
pub fn tensor_checksum(named: &[(String, Tensor)]) -> Result<String> {
    let mut h = Sha256::new();
    for (name, t) in named {
        h.update(name.as_bytes());
        for d in t.dims() {
            h.update((*d as u64).to_le_bytes());
        }
        match t.dtype() {
            DType::F64 => {
                for v in t.flatten_all()?.to_vec1::<f64>()? {
                    h.update(v.to_le_bytes());
                }
            }
            _ => {
                for v in t.flatten_all()?.to_dtype(DType::F32)?.to_vec1::<f32>()? {
                    h.update(v.to_le_bytes());
                }
            }
        }
    }
    Ok(hex::encode(h.finalize()))
}

struct Backend {
    store: ParamStore,
    strict: bool,
}

impl SimpleBackend for Backend {
    fn get(&self, s: Shape, name: &str, h: Init, dtype: DType, dev: &Device) -> candle_core::Result<Tensor> {
        let inner = &self.store.inner;
        let mut vars = inner.vars.lock().expect("param lock");
        if let Some(v) = vars.get(name) {
            if v.shape() != &s {
                candle_core::bail!("shape mismatch on {name}: expected {s:?}, stored {:?}", v.shape())
            }
            return Ok(v.as_tensor().clone());
        }
        if self.strict {
            candle_core::bail!("missing parameter `{name}`")
        }
        let mut rng = ChaCha8Rng::seed_from_u64(name_seed(inner.seed, name));
        let values = init_values(h, &s, &mut rng)?;
        let t = Tensor::from_vec(values, s, dev)?.to_dtype(dtype)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        vars.insert(name.to_string(), var);
        Ok(out)
    }

    fn get_unchecked(&self, name: &str, dtype: DType, dev: &Device) -> candle_core::Result<Tensor> {
        let vars = self.store.inner.vars.lock().expect("param lock");
        match vars.get(name) {
            Some(v) => v.as_tensor().to_dtype(dtype)?.to_device(dev),
            None => candle_core::bail!("missing parameter `{name}`"),
        }
    }

    fn contains_tensor(&self, name: &str) -> bool {
        self.store.contains(name)
    }
}
