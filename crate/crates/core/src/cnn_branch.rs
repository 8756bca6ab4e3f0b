//! Convolutional text branch over word vectors.
//!
//! Token indices are gathered from a trainable embedding matrix, convolved
//! with filters of several widths, passed through ReLU and reduced by
//! max-over-time pooling to one scalar per filter.

use candle_core::{DType, Module, Tensor, D};
use candle_nn::{Embedding, VarBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexical::EmbeddingTable;
use crate::nn::{Conv1d, ParamStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub filter_sizes: Vec<usize>,
    pub filters_per_size: usize,
    pub embedding_dim: usize,
    pub max_words: usize,
    pub dropout_rate: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            filter_sizes: vec![3, 4, 5],
            filters_per_size: 100,
            embedding_dim: 300,
            max_words: 36,
            dropout_rate: 0.5,
        }
    }
}

impl CnnConfig {
    pub fn output_dim(&self) -> usize {
        self.filter_sizes.len() * self.filters_per_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.filter_sizes.is_empty() {
            return Err(Error::config("filter_sizes", "must not be empty"));
        }
        if let Some(&k) = self.filter_sizes.iter().find(|&&k| k == 0 || k > self.max_words) {
            return Err(Error::config(
                "filter_sizes",
                format!("filter size {k} must lie in 1..={}", self.max_words),
            ));
        }
        if self.filters_per_size == 0 {
            return Err(Error::config("filters_per_size", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Maximum of a feature map.
pub fn max_over_time_pool(feature_map: &[f32]) -> Result<f32> {
    feature_map
        .iter()
        .copied()
        .reduce(f32::max)
        .ok_or_else(|| Error::Contract("max-over-time pooling of an empty feature map".into()))
}

#[derive(Clone, Debug)]
pub struct CnnBranch {
    embedding: Embedding,
    convs: Vec<Conv1d>,
    config: CnnConfig,
    rows: usize,
}

impl CnnBranch {
    /// Builds the branch with its embedding matrix initialized from `table`,
    /// stored under `{prefix}.embedding.weight`.
    pub fn with_embeddings(table: &EmbeddingTable, config: &CnnConfig, store: &ParamStore, prefix: &str) -> Result<Self> {
        if table.dim() != config.embedding_dim {
            return Err(Error::Shape {
                branch: "cnn".into(),
                message: format!("embedding table has dimension {}, config expects {}", table.dim(), config.embedding_dim),
            });
        }
        let weight = Tensor::from_slice(table.data(), (table.rows(), table.dim()), store.device())?;
        store.insert_tensors([(format!("{prefix}.embedding.weight"), weight)])?;
        CnnBranch::build(config, table.rows(), store.var_builder().pp(prefix))
    }

    /// Builds from whatever `vb` provides (loaded or freshly initialized).
    pub fn build(config: &CnnConfig, rows: usize, vb: VarBuilder) -> Result<Self> {
        config.validate()?;
        let weight = vb.get_with_hints(
            (rows, config.embedding_dim),
            "embedding.weight",
            candle_nn::Init::Uniform { lo: -0.25, up: 0.25 },
        )?;
        let embedding = Embedding::new(weight, config.embedding_dim);
        let convs = config
            .filter_sizes
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                Conv1d::load(config.embedding_dim, config.filters_per_size, k, 0, vb.pp("convs").pp(i))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CnnBranch {
            embedding,
            convs,
            config: config.clone(),
            rows,
        })
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn vocab_rows(&self) -> usize {
        self.rows
    }

    /// Index tensor of shape `(batch, max_words)` after range checks.
    pub fn index_tensor(&self, token_indices: &[Vec<u32>]) -> Result<Tensor> {
        let w = self.config.max_words;
        for row in token_indices {
            if row.len() != w {
                return Err(Error::Shape {
                    branch: "cnn".into(),
                    message: format!("expected {w} token indices, got {}", row.len()),
                });
            }
            if let Some(&bad) = row.iter().find(|&&i| i as usize >= self.rows) {
                return Err(Error::Index {
                    index: bad as usize,
                    rows: self.rows,
                });
            }
        }
        Ok(Tensor::from_vec(
            token_indices.concat(),
            (token_indices.len(), w),
            self.embedding.embeddings().device(),
        )?)
    }

    /// Embedding rows for each position, shape `(batch, max_words, dim)`.
    pub fn gather(&self, indices: &Tensor) -> Result<Tensor> {
        Ok(self.embedding.forward(indices)?)
    }

    /// Pooled features, shape `(batch, |filter_sizes| × filters_per_size)`,
    /// ordered by filter size then filter index.
    pub fn forward(&self, indices: &Tensor) -> Result<Tensor> {
        let x = self.gather(indices)?.transpose(1, 2)?.contiguous()?;
        let pooled = self
            .convs
            .iter()
            .map(|conv| {
                let act = conv.forward(&x)?.relu()?;
                // gradient flows to the first maximising position only
                let at = act.argmax_keepdim(D::Minus1)?;
                Ok(act.gather(&at, D::Minus1)?.squeeze(D::Minus1)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Tensor::cat(&pooled, 1)?)
    }

    pub fn cnn_forward(&self, token_indices: &[Vec<u32>]) -> Result<Tensor> {
        self.forward(&self.index_tensor(token_indices)?)
    }

    pub fn dtype(&self) -> DType {
        self.embedding.embeddings().dtype()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexical::Provenance;
    use candle_core::Device;
    use proptest::prelude::*;

    fn table(rows: usize, dim: usize, f: impl Fn(usize, usize) -> f32) -> EmbeddingTable {
        let data = (0..rows * dim).map(|i| if i < dim { 0.0 } else { f(i / dim, i % dim) }).collect();
        let mut prov = vec![Provenance::Random; rows];
        prov[0] = Provenance::PadZero;
        EmbeddingTable::from_rows(dim, data, prov).unwrap()
    }

    fn cfg(sizes: &[usize], n: usize, dim: usize, w: usize) -> CnnConfig {
        CnnConfig {
            filter_sizes: sizes.to_vec(),
            filters_per_size: n,
            embedding_dim: dim,
            max_words: w,
            dropout_rate: 0.5,
        }
    }

    #[test]
    fn pool_examples() {
        assert_eq!(max_over_time_pool(&[1.0, 3.0, 2.0]).unwrap(), 3.0);
        assert_eq!(max_over_time_pool(&[-2.0]).unwrap(), -2.0);
        assert!(matches!(max_over_time_pool(&[]), Err(Error::Contract(_))));
    }

    proptest! {
        #[test]
        fn pool_equals_linear_scan(v in proptest::collection::vec(-1e3f32..1e3, 50)) {
            let mut best = v[0];
            for &x in &v { if x > best { best = x; } }
            prop_assert_eq!(max_over_time_pool(&v).unwrap(), best);
        }
    }

    #[test]
    fn all_pad_input_with_zero_bias_pools_to_zero() {
        let store = ParamStore::cpu(0);
        let c = cfg(&[3, 4, 5], 100, 300, 8);
        let branch = CnnBranch::with_embeddings(&table(4, 300, |_, _| 0.3), &c, &store, "cnn").unwrap();
        for i in 0..3 {
            let b = store.var(&format!("cnn.convs.{i}.bias")).unwrap();
            b.set(&b.zeros_like().unwrap()).unwrap();
        }
        let out = branch.cnn_forward(&[vec![0; 8]]).unwrap();
        assert_eq!(out.dims(), &[1, 300]);
        assert!(out.flatten_all().unwrap().to_vec1::<f32>().unwrap().iter().all(|&v| v == 0.0));
        let gathered = branch.gather(&branch.index_tensor(&[vec![1; 8]]).unwrap()).unwrap();
        assert_eq!(gathered.dims(), &[1, 8, 300]);
    }

    #[test]
    fn single_coordinate_filter_picks_the_maximum() {
        // positions carry 0.2, -0.5, 0.9 at coordinate 0
        let vals = [0.0, 0.2, -0.5, 0.9];
        let t = table(4, 300, |r, c| if c == 0 { vals[r] } else { 0.0 });
        let dev = Device::Cpu;
        let store = ParamStore::cpu(0);
        let mut w = vec![0f32; 300];
        w[0] = 1.0;
        store
            .insert_tensors([
                ("cnn.convs.0.weight".to_string(), Tensor::from_vec(w, (1, 300, 1), &dev).unwrap()),
                ("cnn.convs.0.bias".to_string(), Tensor::zeros(1, DType::F32, &dev).unwrap()),
            ])
            .unwrap();
        let branch = CnnBranch::with_embeddings(&t, &cfg(&[1], 1, 300, 3), &store, "cnn").unwrap();
        let out = branch.cnn_forward(&[vec![1, 2, 3]]).unwrap().to_vec2::<f32>().unwrap();
        assert!((out[0][0] - 0.9).abs() < 1e-7);
    }

    #[test]
    fn out_of_range_index_is_an_index_error() {
        let store = ParamStore::cpu(0);
        let branch = CnnBranch::with_embeddings(&table(4, 6, |_, _| 0.1), &cfg(&[2], 3, 6, 4), &store, "cnn").unwrap();
        assert!(matches!(branch.cnn_forward(&[vec![1, 9, 0, 0]]), Err(Error::Index { index: 9, rows: 4 })));
    }

    #[test]
    fn width_one_filters_ignore_word_order_width_two_do_not() {
        let t = table(6, 5, |r, c| ((r * 7 + c * 3) % 11) as f32 / 5.0 - 1.0);
        let store = ParamStore::cpu(3);
        let one = CnnBranch::with_embeddings(&t, &cfg(&[1], 8, 5, 5), &store, "a").unwrap();
        let two = CnnBranch::with_embeddings(&t, &cfg(&[2], 8, 5, 5), &store, "b").unwrap();
        let x = vec![vec![2, 3, 4, 5, 1], vec![5, 4, 1, 3, 2]];
        let a = one.cnn_forward(&x).unwrap().to_vec2::<f32>().unwrap();
        assert_eq!(a[0], a[1]);
        let b = two.cnn_forward(&x).unwrap().to_vec2::<f32>().unwrap();
        assert_ne!(b[0], b[1]);
    }
}
