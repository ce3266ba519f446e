use crate::{Ctx, Layer, Param, Tensor};

const EPS: f32 = 1e-5;

/// Normalizes each sample over all of its features, then applies a
/// per-channel affine map. The epsilon keeps constant inputs finite.
pub struct SampleNorm {
    gamma: Param,
    beta: Param,
    cache: Option<(Tensor, Vec<f32>)>,
}

impl SampleNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::filled("gamma", &[channels], 1.0),
            beta: Param::zeros("beta", &[channels]),
            cache: None,
        }
    }
}

impl Layer for SampleNorm {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        let (n, d) = x.dims();
        let l = d.positions();
        let len = d.len() as f32;
        let mut xhat = Tensor::zeros(n, d);
        let mut inv = Vec::with_capacity(n);
        let mut y = Tensor::zeros(n, d);
        for b in 0..n {
            let s = x.sample(b);
            let mean = s.iter().sum::<f32>() / len;
            let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / len;
            let iv = 1.0 / (var + EPS).sqrt();
            inv.push(iv);
            let xh = xhat.sample_mut(b);
            for (o, v) in xh.iter_mut().zip(s) {
                *o = (v - mean) * iv;
            }
            let ys = y.sample_mut(b);
            for c in 0..d.c {
                let (g, be) = (self.gamma.value[c], self.beta.value[c]);
                for p in 0..l {
                    ys[c * l + p] = g * xh[c * l + p] + be;
                }
            }
        }
        self.cache = Some((xhat, inv));
        y
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let (xhat, inv) = self.cache.take().expect("norm backward before forward");
        let (n, d) = xhat.dims();
        let l = d.positions();
        let len = d.len() as f32;
        let mut gx = Tensor::zeros(n, d);
        let mut dxh = vec![0.0f32; d.len()];
        for b in 0..n {
            let g = grad.sample(b);
            let xh = xhat.sample(b);
            for c in 0..d.c {
                for p in 0..l {
                    let i = c * l + p;
                    self.gamma.grad[c] += g[i] * xh[i];
                    self.beta.grad[c] += g[i];
                    dxh[i] = g[i] * self.gamma.value[c];
                }
            }
            let sum: f32 = dxh.iter().sum();
            let dot: f32 = dxh.iter().zip(xh).map(|(a, b)| a * b).sum();
            let out = gx.sample_mut(b);
            for i in 0..d.len() {
                out[i] = inv[b] / len * (len * dxh[i] - sum - xh[i] * dot);
            }
        }
        gx
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Layer normalization over channels at every position (transformer style).
pub struct TokenNorm {
    gamma: Param,
    beta: Param,
    cache: Option<(Tensor, Vec<f32>)>,
}

impl TokenNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::filled("gamma", &[channels], 1.0),
            beta: Param::zeros("beta", &[channels]),
            cache: None,
        }
    }
}

impl Layer for TokenNorm {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        let (n, d) = x.dims();
        let (c, l) = (d.c, d.positions());
        let mut xhat = Tensor::zeros(n, d);
        let mut inv = vec![0.0f32; n * l];
        let mut y = Tensor::zeros(n, d);
        for b in 0..n {
            let s = x.sample(b);
            for p in 0..l {
                let mean = (0..c).map(|ch| s[ch * l + p]).sum::<f32>() / c as f32;
                let var = (0..c)
                    .map(|ch| (s[ch * l + p] - mean).powi(2))
                    .sum::<f32>()
                    / c as f32;
                let iv = 1.0 / (var + EPS).sqrt();
                inv[b * l + p] = iv;
                for ch in 0..c {
                    let xh = (s[ch * l + p] - mean) * iv;
                    xhat.sample_mut(b)[ch * l + p] = xh;
                    y.sample_mut(b)[ch * l + p] = self.gamma.value[ch] * xh + self.beta.value[ch];
                }
            }
        }
        self.cache = Some((xhat, inv));
        y
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let (xhat, inv) = self.cache.take().expect("norm backward before forward");
        let (n, d) = xhat.dims();
        let (c, l) = (d.c, d.positions());
        let mut gx = Tensor::zeros(n, d);
        let mut dxh = vec![0.0f32; c];
        for b in 0..n {
            let g = grad.sample(b);
            let xh = xhat.sample(b);
            for p in 0..l {
                let mut sum = 0.0;
                let mut dot = 0.0;
                for ch in 0..c {
                    let i = ch * l + p;
                    self.gamma.grad[ch] += g[i] * xh[i];
                    self.beta.grad[ch] += g[i];
                    dxh[ch] = g[i] * self.gamma.value[ch];
                    sum += dxh[ch];
                    dot += dxh[ch] * xh[i];
                }
                let iv = inv[b * l + p];
                let out = gx.sample_mut(b);
                for ch in 0..c {
                    let i = ch * l + p;
                    out[i] = iv / c as f32 * (c as f32 * dxh[ch] - sum - xh[i] * dot);
                }
            }
        }
        gx
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::check_layer;
    use crate::Dims;

    #[test]
    fn constant_input_stays_finite() {
        let mut norm = SampleNorm::new(2);
        let x = Tensor::zeros(3, Dims::new(2, 4, 4));
        let y = norm.forward(&x, &mut Ctx::new(false, 0));
        assert!(y.is_finite());
        let g = norm.backward(&Tensor::from_vec(3, y.dims, vec![1.0; y.data.len()]));
        assert!(g.is_finite());
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_layer(Box::new(SampleNorm::new(2)), 2, Dims::new(2, 3, 3));
        check_layer(Box::new(TokenNorm::new(4)), 2, Dims::new(4, 1, 5));
    }
}
