use serde::{Deserialize, Serialize};

use crate::{Ctx, Dims, Layer, Param, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Avg,
    Max,
}

/// Non-overlapping pooling with stride equal to the window.
///
/// Output size is `floor(h / kh)` (at least 1); when the input is smaller
/// than the window, the window is clipped to the input.
pub struct Pool2d {
    mode: PoolMode,
    kh: usize,
    kw: usize,
    cache: Option<(usize, Dims, Vec<usize>)>,
}

fn windows(len: usize, k: usize) -> Vec<(usize, usize)> {
    let out = (len / k).max(1);
    (0..out).map(|i| (i * k, (i * k + k).min(len))).collect()
}

impl Pool2d {
    pub fn new(mode: PoolMode, kh: usize, kw: usize) -> Self {
        assert!(kh >= 1 && kw >= 1);
        Self {
            mode,
            kh,
            kw,
            cache: None,
        }
    }

    pub fn output_dims(input: Dims, kh: usize, kw: usize) -> Dims {
        Dims::new(input.c, (input.h / kh).max(1), (input.w / kw).max(1))
    }
}

impl Layer for Pool2d {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        let (n, d) = x.dims();
        let od = Self::output_dims(d, self.kh, self.kw);
        let (rows, cols) = (windows(d.h, self.kh), windows(d.w, self.kw));
        let mut out = Tensor::zeros(n, od);
        let mut argmax = Vec::new();
        if self.mode == PoolMode::Max {
            argmax.resize(out.data.len(), 0);
        }
        for b in 0..n {
            let src = x.sample(b);
            for c in 0..d.c {
                let plane = &src[c * d.h * d.w..(c + 1) * d.h * d.w];
                for (oy, &(y0, y1)) in rows.iter().enumerate() {
                    for (ox, &(x0, x1)) in cols.iter().enumerate() {
                        let oi = b * od.len() + (c * od.h + oy) * od.w + ox;
                        match self.mode {
                            PoolMode::Avg => {
                                let mut s = 0.0;
                                for yy in y0..y1 {
                                    for xx in x0..x1 {
                                        s += plane[yy * d.w + xx];
                                    }
                                }
                                out.data[oi] = s / ((y1 - y0) * (x1 - x0)) as f32;
                            }
                            PoolMode::Max => {
                                let mut best = f32::NEG_INFINITY;
                                let mut at = 0;
                                for yy in y0..y1 {
                                    for xx in x0..x1 {
                                        let v = plane[yy * d.w + xx];
                                        if v > best {
                                            best = v;
                                            at = c * d.h * d.w + yy * d.w + xx;
                                        }
                                    }
                                }
                                out.data[oi] = best;
                                argmax[oi] = at;
                            }
                        }
                    }
                }
            }
        }
        self.cache = Some((n, d, argmax));
        out
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let (n, d, argmax) = self.cache.take().expect("pool backward before forward");
        let od = grad.dims;
        let mut gx = Tensor::zeros(n, d);
        let (rows, cols) = (windows(d.h, self.kh), windows(d.w, self.kw));
        for b in 0..n {
            let g = grad.sample(b);
            let dst = gx.sample_mut(b);
            for c in 0..d.c {
                for (oy, &(y0, y1)) in rows.iter().enumerate() {
                    for (ox, &(x0, x1)) in cols.iter().enumerate() {
                        let li = (c * od.h + oy) * od.w + ox;
                        let gv = g[li];
                        match self.mode {
                            PoolMode::Avg => {
                                let share = gv / ((y1 - y0) * (x1 - x0)) as f32;
                                for yy in y0..y1 {
                                    for xx in x0..x1 {
                                        dst[c * d.h * d.w + yy * d.w + xx] += share;
                                    }
                                }
                            }
                            PoolMode::Max => dst[argmax[b * od.len() + li]] += gv,
                        }
                    }
                }
            }
        }
        gx
    }

    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut Param)) {}

    fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Averages every channel over all positions: `[n, c, h, w] -> [n, c, 1, 1]`.
#[derive(Default)]
pub struct GlobalAvgPool {
    input: Option<(usize, Dims)>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for GlobalAvgPool {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        let (n, d) = x.dims();
        let l = d.positions();
        let mut out = Tensor::zeros(n, Dims::new(d.c, 1, 1));
        for b in 0..n {
            let src = x.sample(b);
            for c in 0..d.c {
                out.data[b * d.c + c] = src[c * l..(c + 1) * l].iter().sum::<f32>() / l as f32;
            }
        }
        self.input = Some((n, d));
        out
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let (n, d) = self.input.take().expect("pool backward before forward");
        let l = d.positions();
        let mut gx = Tensor::zeros(n, d);
        for b in 0..n {
            for c in 0..d.c {
                let v = grad.data[b * d.c + c] / l as f32;
                gx.sample_mut(b)[c * l..(c + 1) * l].fill(v);
            }
        }
        gx
    }

    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut Param)) {}
}

/// Averages input regions down to a fixed `out_h x out_w` grid.
pub struct AdaptiveAvgPool {
    out_h: usize,
    out_w: usize,
    input: Option<(usize, Dims)>,
}

fn adaptive_bounds(len: usize, out: usize) -> Vec<(usize, usize)> {
    (0..out)
        .map(|i| (i * len / out, ((i + 1) * len).div_ceil(out)))
        .collect()
}

impl AdaptiveAvgPool {
    pub fn new(out_h: usize, out_w: usize) -> Self {
        assert!(out_h >= 1 && out_w >= 1);
        Self {
            out_h,
            out_w,
            input: None,
        }
    }
}

impl Layer for AdaptiveAvgPool {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        let (n, d) = x.dims();
        let od = Dims::new(d.c, self.out_h, self.out_w);
        let (rows, cols) = (adaptive_bounds(d.h, self.out_h), adaptive_bounds(d.w, self.out_w));
        let mut out = Tensor::zeros(n, od);
        for b in 0..n {
            let src = x.sample(b);
            let dst = out.sample_mut(b);
            for c in 0..d.c {
                for (oy, &(y0, y1)) in rows.iter().enumerate() {
                    for (ox, &(x0, x1)) in cols.iter().enumerate() {
                        let mut s = 0.0;
                        for yy in y0..y1 {
                            for xx in x0..x1 {
                                s += src[(c * d.h + yy) * d.w + xx];
                            }
                        }
                        dst[(c * od.h + oy) * od.w + ox] = s / ((y1 - y0) * (x1 - x0)) as f32;
                    }
                }
            }
        }
        self.input = Some((n, d));
        out
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let (n, d) = self.input.take().expect("pool backward before forward");
        let od = grad.dims;
        let (rows, cols) = (adaptive_bounds(d.h, self.out_h), adaptive_bounds(d.w, self.out_w));
        let mut gx = Tensor::zeros(n, d);
        for b in 0..n {
            let g = grad.sample(b);
            let dst = gx.sample_mut(b);
            for c in 0..d.c {
                for (oy, &(y0, y1)) in rows.iter().enumerate() {
                    for (ox, &(x0, x1)) in cols.iter().enumerate() {
                        let share = g[(c * od.h + oy) * od.w + ox] / ((y1 - y0) * (x1 - x0)) as f32;
                        for yy in y0..y1 {
                            for xx in x0..x1 {
                                dst[(c * d.h + yy) * d.w + xx] += share;
                            }
                        }
                    }
                }
            }
        }
        gx
    }

    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut Param)) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::check_layer;

    #[test]
    fn floor_division_and_clipping() {
        assert_eq!(Pool2d::output_dims(Dims::new(4, 16, 16), 2, 2), Dims::new(4, 8, 8));
        assert_eq!(Pool2d::output_dims(Dims::new(4, 5, 1), 2, 2), Dims::new(4, 2, 1));
        let mut p = Pool2d::new(PoolMode::Max, 2, 2);
        let x = Tensor::from_vec(1, Dims::new(1, 1, 3), vec![1.0, 5.0, 2.0]);
        let y = p.forward(&x, &mut Ctx::new(false, 0));
        assert_eq!(y.dims, Dims::new(1, 1, 1));
        assert_eq!(y.data, vec![5.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_layer(Box::new(Pool2d::new(PoolMode::Avg, 2, 2)), 2, Dims::new(2, 5, 4));
        check_layer(Box::new(Pool2d::new(PoolMode::Max, 2, 3)), 2, Dims::new(2, 4, 7));
        check_layer(Box::new(GlobalAvgPool::new()), 2, Dims::new(3, 3, 2));
        check_layer(Box::new(AdaptiveAvgPool::new(2, 3)), 2, Dims::new(2, 5, 7));
    }
}
