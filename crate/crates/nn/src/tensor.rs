use serde::{Deserialize, Serialize};

/// Per-sample feature shape (channels, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub const fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of spatial positions (tokens in sequence stages).
    pub fn positions(&self) -> usize {
        self.h * self.w
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.c, self.h, self.w)
    }
}

/// Dense `[n, c, h, w]` f32 tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub dims: Dims,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(n: usize, dims: Dims) -> Self {
        Self {
            n,
            dims,
            data: vec![0.0; n * dims.len()],
        }
    }

    pub fn from_vec(n: usize, dims: Dims, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), n * dims.len(), "tensor data length mismatch");
        Self { n, dims, data }
    }

    pub fn dims(&self) -> (usize, Dims) {
        (self.n, self.dims)
    }

    pub fn sample_len(&self) -> usize {
        self.dims.len()
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let l = self.sample_len();
        &self.data[i * l..(i + 1) * l]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [f32] {
        let l = self.sample_len();
        &mut self.data[i * l..(i + 1) * l]
    }

    /// Same data, new per-sample shape with equal element count.
    pub fn reshaped(mut self, dims: Dims) -> Self {
        assert_eq!(dims.len(), self.dims.len(), "reshape must keep size");
        self.dims = dims;
        self
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.dims(), other.dims());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `[n, c, L]` channel-major to `[n, L, c]` token-major.
    pub fn to_tokens(&self) -> Vec<f32> {
        let (c, l) = (self.dims.c, self.dims.positions());
        let mut out = vec![0.0; self.data.len()];
        for b in 0..self.n {
            let src = self.sample(b);
            let dst = &mut out[b * c * l..(b + 1) * c * l];
            for ch in 0..c {
                for p in 0..l {
                    dst[p * c + ch] = src[ch * l + p];
                }
            }
        }
        out
    }

    /// Inverse of [`Tensor::to_tokens`].
    pub fn from_tokens(n: usize, dims: Dims, tokens: &[f32]) -> Self {
        let (c, l) = (dims.c, dims.positions());
        let mut t = Tensor::zeros(n, dims);
        for b in 0..n {
            let src = &tokens[b * c * l..(b + 1) * c * l];
            let dst = t.sample_mut(b);
            for p in 0..l {
                for ch in 0..c {
                    dst[ch * l + p] = src[p * c + ch];
                }
            }
        }
        t
    }

    /// Concatenates along channels; all inputs share `n`, `h`, `w`.
    pub fn concat_channels(parts: &[&Tensor]) -> Tensor {
        let n = parts[0].n;
        let (h, w) = (parts[0].dims.h, parts[0].dims.w);
        let c: usize = parts.iter().map(|p| p.dims.c).sum();
        let dims = Dims::new(c, h, w);
        let mut out = Tensor::zeros(n, dims);
        for b in 0..n {
            let mut off = 0;
            let dst = out.sample_mut(b);
            for p in parts {
                assert_eq!((p.n, p.dims.h, p.dims.w), (n, h, w));
                let s = p.sample(b);
                dst[off..off + s.len()].copy_from_slice(s);
                off += s.len();
            }
        }
        out
    }

    /// Splits along channels into pieces of the given channel counts.
    pub fn split_channels(&self, channels: &[usize]) -> Vec<Tensor> {
        let (h, w) = (self.dims.h, self.dims.w);
        let mut out: Vec<Tensor> = channels
            .iter()
            .map(|&c| Tensor::zeros(self.n, Dims::new(c, h, w)))
            .collect();
        for b in 0..self.n {
            let src = self.sample(b);
            let mut off = 0;
            for t in out.iter_mut() {
                let dst = t.sample_mut(b);
                dst.copy_from_slice(&src[off..off + dst.len()]);
                off += dst.len();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_transpose_round_trips() {
        let dims = Dims::new(3, 2, 2);
        let t = Tensor::from_vec(2, dims, (0..24).map(|v| v as f32).collect());
        let tok = t.to_tokens();
        assert_eq!(tok[1], 4.0);
        assert_eq!(Tensor::from_tokens(2, dims, &tok), t);
    }

    #[test]
    fn concat_then_split_is_identity() {
        let a = Tensor::from_vec(2, Dims::new(1, 1, 2), vec![1.0, 2.0, 3.0, 4.0]);
        let b = Tensor::from_vec(2, Dims::new(2, 1, 2), (10..18).map(|v| v as f32).collect());
        let c = Tensor::concat_channels(&[&a, &b]);
        assert_eq!(c.sample(1), &[3.0, 4.0, 14.0, 15.0, 16.0, 17.0]);
        let parts = c.split_channels(&[1, 2]);
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }
}
