//! Small building blocks shared by every network in the crate.

use std::sync::Mutex;

use candle_core::{DType, Tensor, D};
use candle_nn::{Init, Linear, VarBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Seeded source of dropout masks. Masks are drawn in call order, so a fixed
/// seed and a fixed batch order give identical masks.
#[derive(Debug)]
pub struct DropoutRng(Mutex<ChaCha8Rng>);

impl DropoutRng {
    pub fn new(seed: u64) -> Self {
        DropoutRng(Mutex::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    fn mask(&self, n: usize, keep: f64) -> Vec<f32> {
        let mut rng = self.0.lock().expect("dropout rng lock");
        let scale = (1.0 / keep) as f32;
        (0..n)
            .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
            .collect()
    }
}

/// Forward-pass mode. Dropout is active only in `Train`.
#[derive(Clone, Copy, Debug)]
pub enum Mode<'a> {
    Eval,
    Train(&'a DropoutRng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Inverted dropout: kept activations are scaled by `1 / (1 - rate)`.
pub fn dropout(xs: &Tensor, rate: f64, mode: Mode<'_>) -> Result<Tensor> {
    match mode {
        Mode::Train(rng) if rate > 0.0 => {
            let mask = rng.mask(xs.elem_count(), 1.0 - rate);
            let mask = Tensor::from_vec(mask, xs.shape(), xs.device())?.to_dtype(xs.dtype())?;
            Ok(xs.mul(&mask)?)
        }
        _ => Ok(xs.clone()),
    }
}

/// 1-D convolution over `(batch, channels, length)` inputs, computed as a
/// window unfold and a matmul. Parameter names and shapes follow
/// `candle_nn::conv1d` (`weight` is `(out, in, kernel)`, `bias` is `(out)`).
#[derive(Clone, Debug)]
pub struct Conv1d {
    weight: Tensor,
    bias: Tensor,
    padding: usize,
}

impl Conv1d {
    pub fn load(in_channels: usize, out_channels: usize, kernel: usize, padding: usize, vb: VarBuilder) -> Result<Self> {
        let weight = vb.get_with_hints((out_channels, in_channels, kernel), "weight", candle_nn::init::DEFAULT_KAIMING_NORMAL)?;
        let bound = 1.0 / (in_channels as f64).sqrt();
        let bias = vb.get_with_hints(out_channels, "bias", Init::Uniform { lo: -bound, up: bound })?;
        Ok(Conv1d { weight, bias, padding })
    }

    pub fn kernel_size(&self) -> usize {
        self.weight.dims()[2]
    }

    /// Output length is `length + 2 * padding - kernel + 1`.
    pub fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        let (out_c, in_c, k) = self.weight.dims3()?;
        let xs = if self.padding > 0 {
            xs.pad_with_zeros(2, self.padding, self.padding)?
        } else {
            xs.clone()
        };
        let (b, _, l) = xs.dims3()?;
        if l < k {
            return Err(crate::Error::Contract(format!("sequence of length {l} is shorter than kernel {k}")));
        }
        let out_len = l - k + 1;
        let windows: Vec<Tensor> = (0..k).map(|j| xs.narrow(2, j, out_len)).collect::<candle_core::Result<_>>()?;
        // (b, in, out_len, k) -> (b, out_len, in, k)
        let cols = Tensor::stack(&windows, 3)?.permute((0, 2, 1, 3))?.reshape((b * out_len, in_c * k))?;
        let w = self.weight.reshape((out_c, in_c * k))?;
        let ys = cols.matmul(&w.t()?)?.broadcast_add(&self.bias)?;
        Ok(ys.reshape((b, out_len, out_c))?.transpose(1, 2)?.contiguous()?)
    }
}

/// Layer normalization over the last dimension, composed from primitive ops
/// so that it is differentiable.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    weight: Tensor,
    bias: Tensor,
    eps: f64,
}

impl LayerNorm {
    pub fn new(weight: Tensor, bias: Tensor, eps: f64) -> Self {
        LayerNorm { weight, bias, eps }
    }

    pub fn load(dim: usize, eps: f64, vb: VarBuilder) -> Result<Self> {
        let weight = vb.get_with_hints(dim, "weight", Init::Const(1.0))?;
        let bias = vb.get_with_hints(dim, "bias", Init::Const(0.0))?;
        Ok(LayerNorm::new(weight, bias, eps))
    }

    pub fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        let internal = match xs.dtype() {
            DType::F16 | DType::BF16 => DType::F32,
            d => d,
        };
        let x = xs.to_dtype(internal)?;
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed
            .to_dtype(xs.dtype())?
            .broadcast_mul(&self.weight)?
            .broadcast_add(&self.bias)?)
    }
}

/// Linear layer whose weight and bias start at zero-mean normal values with
/// the given standard deviation.
pub fn linear_normal(in_dim: usize, out_dim: usize, std: f64, vb: VarBuilder) -> Result<Linear> {
    let weight = vb.get_with_hints(
        (out_dim, in_dim),
        "weight",
        Init::Randn {
            mean: 0.0,
            stdev: std,
        },
    )?;
    let bias = vb.get_with_hints(out_dim, "bias", Init::Const(0.0))?;
    Ok(Linear::new(weight, Some(bias)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn conv1d_matches_library_forward() {
        let dev = Device::Cpu;
        let store = crate::nn::ParamStore::cpu(4);
        for padding in [0, 1] {
            let conv = Conv1d::load(3, 4, 2, padding, store.var_builder().pp(format!("c{padding}"))).unwrap();
            let x = Tensor::arange(0f32, 30., &dev).unwrap().reshape((2, 3, 5)).unwrap().sin().unwrap();
            let want = x.conv1d(&conv.weight, padding, 1, 1, 1).unwrap().broadcast_add(&conv.bias.reshape((1, 4, 1)).unwrap()).unwrap();
            let got = conv.forward(&x).unwrap();
            assert_eq!(got.dims(), want.dims());
            let gap = (got - want).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
            assert!(gap < 1e-5, "{gap}");
        }
    }

    #[test]
    fn dropout_is_identity_in_eval() {
        let x = Tensor::arange(0f32, 10., &Device::Cpu).unwrap();
        let y = dropout(&x, 0.5, Mode::Eval).unwrap();
        assert_eq!(x.to_vec1::<f32>().unwrap(), y.to_vec1::<f32>().unwrap());
    }

    #[test]
    fn dropout_masks_are_seeded() {
        let x = Tensor::ones(64, DType::F32, &Device::Cpu).unwrap();
        let a = DropoutRng::new(5);
        let b = DropoutRng::new(5);
        let ya = dropout(&x, 0.5, Mode::Train(&a)).unwrap().to_vec1::<f32>().unwrap();
        let yb = dropout(&x, 0.5, Mode::Train(&b)).unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(ya, yb);
        assert!(ya.iter().all(|&v| v == 0.0 || v == 2.0));
        assert!(ya.contains(&0.0));
    }

    #[test]
    fn layer_norm_matches_hand_computation() {
        let dev = Device::Cpu;
        let ln = LayerNorm::new(
            Tensor::new(&[1f64, 1.0], &dev).unwrap(),
            Tensor::new(&[0f64, 0.0], &dev).unwrap(),
            0.0,
        );
        let y = ln.forward(&Tensor::new(&[[1f64, 3.0]], &dev).unwrap()).unwrap();
        let y = y.to_vec2::<f64>().unwrap();
        assert!((y[0][0] + 1.0).abs() < 1e-12 && (y[0][1] - 1.0).abs() < 1e-12);
    }
}
