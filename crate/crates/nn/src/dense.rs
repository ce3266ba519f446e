use rand_chacha::ChaCha8Rng;

use crate::gemm::{matmul, Mat};
use crate::{Ctx, Dims, Layer, Param, Tensor};

/// Fully connected layer over the whole per-sample feature vector;
/// output is `[n, out, 1, 1]`.
pub struct Dense {
    fan_in: usize,
    fan_out: usize,
    weight: Param,
    bias: Param,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            fan_in,
            fan_out,
            weight: Param::glorot("weight", &[fan_in, fan_out], fan_in, fan_out, rng),
            bias: Param::zeros("bias", &[fan_out]),
            input: None,
        }
    }
}

impl Layer for Dense {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        assert_eq!(x.sample_len(), self.fan_in, "dense input width");
        let mut out = Tensor::zeros(x.n, Dims::new(self.fan_out, 1, 1));
        for b in 0..x.n {
            out.sample_mut(b).copy_from_slice(&self.bias.value);
        }
        matmul(
            Mat::new(&x.data, x.n, self.fan_in),
            Mat::new(&self.weight.value, self.fan_in, self.fan_out),
            &mut out.data,
            self.fan_out,
            1.0,
        );
        self.input = Some(x.clone());
        out
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let x = self.input.take().expect("dense backward before forward");
        matmul(
            Mat::new(&x.data, x.n, self.fan_in).t(),
            Mat::new(&grad.data, x.n, self.fan_out),
            &mut self.weight.grad,
            self.fan_out,
            1.0,
        );
        for b in 0..x.n {
            for (g, v) in self.bias.grad.iter_mut().zip(grad.sample(b)) {
                *g += v;
            }
        }
        let mut gx = Tensor::zeros(x.n, x.dims);
        matmul(
            Mat::new(&grad.data, x.n, self.fan_out),
            Mat::new(&self.weight.value, self.fan_in, self.fan_out).t(),
            &mut gx.data,
            self.fan_in,
            0.0,
        );
        gx
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }

    fn clear_cache(&mut self) {
        self.input = None;
    }
}
