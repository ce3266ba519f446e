use rand_chacha::ChaCha8Rng;

use crate::gemm::{matmul, Mat};
use crate::{Ctx, Dims, Layer, Param, Tensor};

/// Stride-1 convolution with "same" zero padding (odd kernels only).
///
/// A `1 x k` kernel on `h == 1` inputs is the sequence-stage conv1d; a
/// `1 x 1` kernel is a per-position linear projection.
pub struct Conv2d {
    cin: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    weight: Param,
    bias: Param,
    cache: Option<(usize, Dims, Vec<f32>)>,
}

impl Conv2d {
    pub fn new(cin: usize, cout: usize, kh: usize, kw: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(kh % 2 == 1 && kw % 2 == 1, "same padding needs odd kernels");
        let k = cin * kh * kw;
        Self {
            cin,
            cout,
            kh,
            kw,
            weight: Param::glorot("weight", &[cout, cin, kh, kw], k, cout * kh * kw, rng),
            bias: Param::zeros("bias", &[cout]),
            cache: None,
        }
    }

    pub fn pointwise(cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::new(cin, cout, 1, 1, rng)
    }

    fn im2col(&self, x: &Tensor) -> Vec<f32> {
        let (n, d) = x.dims();
        let (h, w) = (d.h, d.w);
        let l = h * w;
        let cols = n * l;
        let (ph, pw) = ((self.kh / 2) as isize, (self.kw / 2) as isize);
        let mut col = vec![0.0f32; self.cin * self.kh * self.kw * cols];
        for ci in 0..self.cin {
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (ci * self.kh + ky) * self.kw + kx;
                    let dst_row = &mut col[row * cols..(row + 1) * cols];
                    let dx = kx as isize - pw;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                    for b in 0..n {
                        let src = &x.sample(b)[ci * l..(ci + 1) * l];
                        for y in 0..h {
                            let sy = y as isize + ky as isize - ph;
                            if sy < 0 || sy >= h as isize || x0 >= x1 {
                                continue;
                            }
                            let sy = sy as usize;
                            let d0 = b * l + y * w;
                            let s0 = (sy * w) as isize + dx;
                            for xx in x0..x1 {
                                dst_row[d0 + xx] = src[(s0 + xx as isize) as usize];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[f32], n: usize, d: Dims) -> Tensor {
        let (h, w) = (d.h, d.w);
        let l = h * w;
        let cols = n * l;
        let (ph, pw) = ((self.kh / 2) as isize, (self.kw / 2) as isize);
        let mut dx_t = Tensor::zeros(n, d);
        for ci in 0..self.cin {
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (ci * self.kh + ky) * self.kw + kx;
                    let src_row = &col[row * cols..(row + 1) * cols];
                    let dx = kx as isize - pw;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                    for b in 0..n {
                        let dst = &mut dx_t.sample_mut(b)[ci * l..(ci + 1) * l];
                        for y in 0..h {
                            let sy = y as isize + ky as isize - ph;
                            if sy < 0 || sy >= h as isize || x0 >= x1 {
                                continue;
                            }
                            let sy = sy as usize;
                            let s0 = b * l + y * w;
                            let d0 = (sy * w) as isize + dx;
                            for xx in x0..x1 {
                                dst[(d0 + xx as isize) as usize] += src_row[s0 + xx];
                            }
                        }
                    }
                }
            }
        }
        dx_t
    }
}

impl Layer for Conv2d {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        let (n, d) = x.dims();
        assert_eq!(d.c, self.cin, "conv input channels");
        let l = d.positions();
        let cols = n * l;
        let k = self.cin * self.kh * self.kw;
        let col = self.im2col(x);
        let mut out_mat = vec![0.0f32; self.cout * cols];
        matmul(
            Mat::new(&self.weight.value, self.cout, k),
            Mat::new(&col, k, cols),
            &mut out_mat,
            cols,
            0.0,
        );
        let od = Dims::new(self.cout, d.h, d.w);
        let mut out = Tensor::zeros(n, od);
        for b in 0..n {
            let dst = out.sample_mut(b);
            for co in 0..self.cout {
                let bias = self.bias.value[co];
                let src = &out_mat[co * cols + b * l..co * cols + (b + 1) * l];
                for (o, s) in dst[co * l..(co + 1) * l].iter_mut().zip(src) {
                    *o = s + bias;
                }
            }
        }
        self.cache = Some((n, d, col));
        out
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let (n, d, col) = self.cache.take().expect("conv backward before forward");
        let l = d.positions();
        let cols = n * l;
        let k = self.cin * self.kh * self.kw;
        let mut g_mat = vec![0.0f32; self.cout * cols];
        for b in 0..n {
            let src = grad.sample(b);
            for co in 0..self.cout {
                let s = &src[co * l..(co + 1) * l];
                g_mat[co * cols + b * l..co * cols + (b + 1) * l].copy_from_slice(s);
                self.bias.grad[co] += s.iter().sum::<f32>();
            }
        }
        matmul(
            Mat::new(&g_mat, self.cout, cols),
            Mat::new(&col, k, cols).t(),
            &mut self.weight.grad,
            k,
            1.0,
        );
        let mut dcol = col;
        matmul(
            Mat::new(&self.weight.value, self.cout, k).t(),
            Mat::new(&g_mat, self.cout, cols),
            &mut dcol,
            cols,
            0.0,
        );
        self.col2im(&dcol, n, d)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }
}
