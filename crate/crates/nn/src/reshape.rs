use crate::{Ctx, Dims, Layer, Param, Tensor};

/// `[n, c, h, w] -> [n, c, 1, h*w]`: the spatial grid becomes a sequence
/// of positions with `c` features each (the element order is unchanged).
#[derive(Default)]
pub struct Flatten {
    input: Option<Dims>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn output_dims(d: Dims) -> Dims {
        Dims::new(d.c, 1, d.h * d.w)
    }
}

impl Layer for Flatten {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        self.input = Some(x.dims);
        x.clone().reshaped(Self::output_dims(x.dims))
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let d = self.input.take().expect("flatten backward before forward");
        grad.clone().reshaped(d)
    }

    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut Param)) {}
}

/// Cuts a map into `p x p` patches after edge-replication padding to a
/// multiple of `p`: `[n, c, h, w] -> [n, c*p*p, 1, (H/p)*(W/p)]`.
pub struct Patchify {
    p: usize,
    input: Option<Dims>,
}

impl Patchify {
    pub fn new(p: usize) -> Self {
        assert!(p >= 1);
        Self { p, input: None }
    }

    /// Padded grid size and patch count for an input.
    pub fn layout(d: Dims, p: usize) -> (usize, usize, usize) {
        let (ph, pw) = (d.h.div_ceil(p), d.w.div_ceil(p));
        (ph * p, pw * p, ph * pw)
    }

    pub fn output_dims(d: Dims, p: usize) -> Dims {
        let (_, _, count) = Self::layout(d, p);
        Dims::new(d.c * p * p, 1, count)
    }

    fn index_map(&self, d: Dims) -> Vec<usize> {
        // for each output element (per sample), the source element index
        let p = self.p;
        let (_, wp, count) = Self::layout(d, p);
        let per_row = wp / p;
        let od = Self::output_dims(d, p);
        let mut map = vec![0usize; od.len()];
        for c in 0..d.c {
            for dy in 0..p {
                for dx in 0..p {
                    let feat = (c * p + dy) * p + dx;
                    for t in 0..count {
                        let (py, px) = (t / per_row, t % per_row);
                        let y = (py * p + dy).min(d.h - 1);
                        let x = (px * p + dx).min(d.w - 1);
                        map[feat * count + t] = (c * d.h + y) * d.w + x;
                    }
                }
            }
        }
        map
    }
}

impl Layer for Patchify {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        let d = x.dims;
        let map = self.index_map(d);
        let od = Self::output_dims(d, self.p);
        let mut out = Tensor::zeros(x.n, od);
        for b in 0..x.n {
            let src = x.sample(b);
            for (o, &i) in out.sample_mut(b).iter_mut().zip(&map) {
                *o = src[i];
            }
        }
        self.input = Some(d);
        out
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let d = self.input.take().expect("patchify backward before forward");
        let map = self.index_map(d);
        let mut gx = Tensor::zeros(grad.n, d);
        for b in 0..grad.n {
            let g = grad.sample(b);
            let dst = gx.sample_mut(b);
            for (gv, &i) in g.iter().zip(&map) {
                dst[i] += gv;
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
    fn patch_counts_with_padding() {
        assert_eq!(Patchify::output_dims(Dims::new(1, 16, 16), 4).w, 16);
        assert_eq!(Patchify::layout(Dims::new(1, 17, 23), 4), (20, 24, 30));
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_layer(Box::new(Patchify::new(2)), 2, Dims::new(2, 3, 5));
        check_layer(Box::new(Flatten::new()), 2, Dims::new(2, 3, 5));
    }
}
