use rand_chacha::ChaCha8Rng;

use crate::gemm::{matmul, Mat};
use crate::{Ctx, Dims, Layer, Param, Tensor};

/// Multi-head scaled dot-product self-attention over the positions of a
/// `[n, dim, h, w]` tensor (positions are tokens, channels are features).
pub struct MultiHeadAttention {
    dim: usize,
    heads: usize,
    wq: Param,
    wk: Param,
    wv: Param,
    wo: Param,
    bq: Param,
    bk: Param,
    bv: Param,
    bo: Param,
    cache: Option<AttnCache>,
}

struct AttnCache {
    n: usize,
    dims: Dims,
    x: Vec<f32>,
    q: Vec<f32>,
    k: Vec<f32>,
    v: Vec<f32>,
    p: Vec<f32>,
    o: Vec<f32>,
}

impl MultiHeadAttention {
    pub fn new(dim: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(heads >= 1 && dim % heads == 0, "dim must be divisible by heads");
        let w = |name: &str, rng: &mut ChaCha8Rng| Param::glorot(name, &[dim, dim], dim, dim, rng);
        Self {
            dim,
            heads,
            wq: w("wq", rng),
            wk: w("wk", rng),
            wv: w("wv", rng),
            wo: w("wo", rng),
            bq: Param::zeros("bq", &[dim]),
            bk: Param::zeros("bk", &[dim]),
            bv: Param::zeros("bv", &[dim]),
            bo: Param::zeros("bo", &[dim]),
            cache: None,
        }
    }

    fn project(x: &[f32], rows: usize, dim: usize, w: &Param, b: &Param) -> Vec<f32> {
        let mut out = vec![0.0f32; rows * dim];
        for r in 0..rows {
            out[r * dim..(r + 1) * dim].copy_from_slice(&b.value);
        }
        matmul(Mat::new(x, rows, dim), Mat::new(&w.value, dim, dim), &mut out, dim, 1.0);
        out
    }

    fn accumulate_proj_grad(x: &[f32], g: &[f32], rows: usize, dim: usize, w: &mut Param, b: &mut Param) {
        matmul(Mat::new(x, rows, dim).t(), Mat::new(g, rows, dim), &mut w.grad, dim, 1.0);
        for r in 0..rows {
            for (bg, v) in b.grad.iter_mut().zip(&g[r * dim..(r + 1) * dim]) {
                *bg += v;
            }
        }
    }
}

impl Layer for MultiHeadAttention {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        let (n, d) = x.dims();
        assert_eq!(d.c, self.dim, "attention feature width");
        let (e, l) = (self.dim, d.positions());
        let dh = e / self.heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let rows = n * l;
        let xt = x.to_tokens();
        let q = Self::project(&xt, rows, e, &self.wq, &self.bq);
        let k = Self::project(&xt, rows, e, &self.wk, &self.bk);
        let v = Self::project(&xt, rows, e, &self.wv, &self.bv);
        let mut p = vec![0.0f32; n * self.heads * l * l];
        let mut o = vec![0.0f32; rows * e];
        for b in 0..n {
            for h in 0..self.heads {
                let off = b * l * e + h * dh;
                let pm = &mut p[(b * self.heads + h) * l * l..(b * self.heads + h + 1) * l * l];
                matmul(
                    Mat::with_stride(&q[off..], l, dh, e),
                    Mat::with_stride(&k[off..], l, dh, e).t(),
                    pm,
                    l,
                    0.0,
                );
                for row in pm.chunks_mut(l) {
                    let mut mx = f32::NEG_INFINITY;
                    for s in row.iter_mut() {
                        *s *= scale;
                        mx = mx.max(*s);
                    }
                    let mut sum = 0.0;
                    for s in row.iter_mut() {
                        *s = (*s - mx).exp();
                        sum += *s;
                    }
                    for s in row.iter_mut() {
                        *s /= sum;
                    }
                }
                matmul(
                    Mat::new(pm, l, l),
                    Mat::with_stride(&v[off..], l, dh, e),
                    &mut o[off..],
                    e,
                    0.0,
                );
            }
        }
        let y = Self::project(&o, rows, e, &self.wo, &self.bo);
        let out = Tensor::from_tokens(n, d, &y);
        self.cache = Some(AttnCache {
            n,
            dims: d,
            x: xt,
            q,
            k,
            v,
            p,
            o,
        });
        out
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let c = self.cache.take().expect("attention backward before forward");
        let (n, e, l) = (c.n, self.dim, c.dims.positions());
        let dh = e / self.heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let rows = n * l;
        let gy = grad.to_tokens();
        Self::accumulate_proj_grad(&c.o, &gy, rows, e, &mut self.wo, &mut self.bo);
        let mut go = vec![0.0f32; rows * e];
        matmul(Mat::new(&gy, rows, e), Mat::new(&self.wo.value, e, e).t(), &mut go, e, 0.0);

        let mut gq = vec![0.0f32; rows * e];
        let mut gk = vec![0.0f32; rows * e];
        let mut gv = vec![0.0f32; rows * e];
        let mut gp = vec![0.0f32; l * l];
        for b in 0..n {
            for h in 0..self.heads {
                let off = b * l * e + h * dh;
                let pm = &c.p[(b * self.heads + h) * l * l..(b * self.heads + h + 1) * l * l];
                // dV = P^T dO
                matmul(
                    Mat::new(pm, l, l).t(),
                    Mat::with_stride(&go[off..], l, dh, e),
                    &mut gv[off..],
                    e,
                    0.0,
                );
                // dP = dO V^T
                matmul(
                    Mat::with_stride(&go[off..], l, dh, e),
                    Mat::with_stride(&c.v[off..], l, dh, e).t(),
                    &mut gp,
                    l,
                    0.0,
                );
                // softmax backward, folded with the score scale
                for (grow, prow) in gp.chunks_mut(l).zip(pm.chunks(l)) {
                    let dot: f32 = grow.iter().zip(prow).map(|(a, b)| a * b).sum();
                    for (g, pv) in grow.iter_mut().zip(prow) {
                        *g = pv * (*g - dot) * scale;
                    }
                }
                matmul(
                    Mat::new(&gp, l, l),
                    Mat::with_stride(&c.k[off..], l, dh, e),
                    &mut gq[off..],
                    e,
                    0.0,
                );
                matmul(
                    Mat::new(&gp, l, l).t(),
                    Mat::with_stride(&c.q[off..], l, dh, e),
                    &mut gk[off..],
                    e,
                    0.0,
                );
            }
        }
        Self::accumulate_proj_grad(&c.x, &gq, rows, e, &mut self.wq, &mut self.bq);
        Self::accumulate_proj_grad(&c.x, &gk, rows, e, &mut self.wk, &mut self.bk);
        Self::accumulate_proj_grad(&c.x, &gv, rows, e, &mut self.wv, &mut self.bv);
        let mut gx = vec![0.0f32; rows * e];
        matmul(Mat::new(&gq, rows, e), Mat::new(&self.wq.value, e, e).t(), &mut gx, e, 0.0);
        matmul(Mat::new(&gk, rows, e), Mat::new(&self.wk.value, e, e).t(), &mut gx, e, 1.0);
        matmul(Mat::new(&gv, rows, e), Mat::new(&self.wv.value, e, e).t(), &mut gx, e, 1.0);
        Tensor::from_tokens(n, c.dims, &gx)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for p in [
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
        ] {
            f(p);
        }
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Learned additive embedding, one vector per position.
pub struct AddPositional {
    pos: Param,
    frozen: bool,
}

impl AddPositional {
    pub fn new(dims: Dims, rng: &mut ChaCha8Rng) -> Self {
        let mut pos = Param::glorot("pos", &[dims.c, dims.h, dims.w], dims.positions(), dims.c, rng);
        for v in &mut pos.value {
            *v *= 0.1;
        }
        Self { pos, frozen: false }
    }

    /// Fixed (untrained) 2-D sin-cos table.
    pub fn sincos(dims: Dims) -> Self {
        let mut pos = Param::zeros("pos", &[dims.c, dims.h, dims.w]);
        let quarter = (dims.c / 4).max(1);
        for y in 0..dims.h {
            for x in 0..dims.w {
                for ch in 0..dims.c {
                    let band = ch % quarter;
                    let omega = 1.0 / 10000f32.powf(band as f32 / quarter as f32);
                    let v = match (ch / quarter) % 4 {
                        0 => (x as f32 * omega).sin(),
                        1 => (x as f32 * omega).cos(),
                        2 => (y as f32 * omega).sin(),
                        _ => (y as f32 * omega).cos(),
                    };
                    pos.value[(ch * dims.h + y) * dims.w + x] = v;
                }
            }
        }
        Self { pos, frozen: true }
    }
}

impl Layer for AddPositional {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        assert_eq!(x.sample_len(), self.pos.value.len(), "positional table size");
        let mut y = x.clone();
        for b in 0..y.n {
            for (v, p) in y.sample_mut(b).iter_mut().zip(&self.pos.value) {
                *v += p;
            }
        }
        y
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        if !self.frozen {
            for b in 0..grad.n {
                for (g, v) in self.pos.grad.iter_mut().zip(grad.sample(b)) {
                    *g += v;
                }
            }
        }
        grad.clone()
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        if !self.frozen {
            f(&mut self.pos);
        }
    }
}
