//! Minimal CPU neural-network toolkit used by the map regressors.
//!
//! Every layer owns its parameters and caches whatever it needs from the
//! forward pass so that [`Layer::backward`] can propagate gradients without a
//! global tape. Tensors are always 4-D and channel-major (`[n, c, h, w]`);
//! sequence stages use `h == 1` and treat the `w` axis as token positions.

mod activation;
mod attention;
mod conv;
mod dense;
mod gemm;
mod norm;
mod optim;
mod param;
mod pool;
mod reshape;
mod tensor;

pub use activation::{Activation, ActivationLayer, Dropout};
pub use attention::{AddPositional, MultiHeadAttention};
pub use conv::Conv2d;
pub use dense::Dense;
pub use gemm::{matmul, Mat};
pub use norm::{SampleNorm, TokenNorm};
pub use optim::{sgd_step, Adam};
pub use param::Param;
pub use pool::{AdaptiveAvgPool, GlobalAvgPool, Pool2d, PoolMode};
pub use reshape::{Flatten, Patchify};
pub use tensor::{Dims, Tensor};

use rand_chacha::ChaCha8Rng;

/// Per-call execution context: train/eval switch and the RNG used by
/// stochastic layers.
pub struct Ctx {
    pub train: bool,
    pub rng: ChaCha8Rng,
}

impl Ctx {
    pub fn new(train: bool, seed: u64) -> Self {
        use rand::SeedableRng;
        Self {
            train,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// A differentiable block.
///
/// `forward` must be called before `backward`; the layer keeps the cache of
/// the most recent forward call only.
pub trait Layer: Send {
    fn forward(&mut self, x: &Tensor, ctx: &mut Ctx) -> Tensor;
    fn backward(&mut self, grad: &Tensor) -> Tensor;
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param));

    /// Drops forward caches (used after inference to release memory).
    fn clear_cache(&mut self) {}
}

/// Runs layers one after another.
#[derive(Default)]
pub struct Sequential {
    pub layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: impl Layer + 'static) {
        self.layers.push(Box::new(layer));
    }

    pub fn push_boxed(&mut self, layer: Box<dyn Layer>) {
        self.layers.push(layer);
    }
}

impl Layer for Sequential {
    fn forward(&mut self, x: &Tensor, ctx: &mut Ctx) -> Tensor {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, ctx);
        }
        cur
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g);
        }
        g
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for layer in &mut self.layers {
            layer.visit_params(f);
        }
    }

    fn clear_cache(&mut self) {
        for layer in &mut self.layers {
            layer.clear_cache();
        }
    }
}

/// Pass-through.
#[derive(Default)]
pub struct Identity;

impl Layer for Identity {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        x.clone()
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        grad.clone()
    }

    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut Param)) {}
}

/// `y = x + inner(x)`; `inner` must preserve the shape.
pub struct Residual {
    inner: Box<dyn Layer>,
}

impl Residual {
    pub fn new(inner: impl Layer + 'static) -> Self {
        Self {
            inner: Box::new(inner),
        }
    }
}

impl Layer for Residual {
    fn forward(&mut self, x: &Tensor, ctx: &mut Ctx) -> Tensor {
        let mut y = self.inner.forward(x, ctx);
        assert_eq!(y.dims(), x.dims(), "residual branch changed shape");
        y.add_assign(x);
        y
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let mut g = self.inner.backward(grad);
        g.add_assign(grad);
        g
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.inner.visit_params(f);
    }

    fn clear_cache(&mut self) {
        self.inner.clear_cache();
    }
}

/// Total number of scalar parameters in a layer tree.
pub fn param_count(layer: &mut dyn Layer) -> usize {
    let mut n = 0;
    layer.visit_params(&mut |p| n += p.value.len());
    n
}

/// Resets every gradient buffer to zero.
pub fn zero_grads(layer: &mut dyn Layer) {
    layer.visit_params(&mut |p| p.zero_grad());
}

#[cfg(test)]
pub(crate) mod gradcheck;
