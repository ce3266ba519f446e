use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Ctx, Layer, Param, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Gelu,
    Tanh,
    Identity,
}

const GELU_C: f32 = 0.797_884_6; // sqrt(2 / pi)

impl Activation {
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    pub fn derivative(self, x: f32) -> f32 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let u = GELU_C * (x + 0.044715 * x * x * x);
                let t = u.tanh();
                let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "gelu" => Some(Activation::Gelu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Elementwise nonlinearity.
pub struct ActivationLayer {
    act: Activation,
    input: Option<Tensor>,
}

impl ActivationLayer {
    pub fn new(act: Activation) -> Self {
        Self { act, input: None }
    }
}

impl Layer for ActivationLayer {
    fn forward(&mut self, x: &Tensor, _ctx: &mut Ctx) -> Tensor {
        let mut y = x.clone();
        if self.act != Activation::Identity {
            for v in &mut y.data {
                *v = self.act.apply(*v);
            }
        }
        self.input = Some(x.clone());
        y
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let x = self.input.take().expect("activation backward before forward");
        let mut g = grad.clone();
        if self.act != Activation::Identity {
            for (gv, xv) in g.data.iter_mut().zip(&x.data) {
                *gv *= self.act.derivative(*xv);
            }
        }
        g
    }

    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut Param)) {}

    fn clear_cache(&mut self) {
        self.input = None;
    }
}

/// Inverted dropout; identity outside training.
pub struct Dropout {
    rate: f32,
    mask: Option<Vec<f32>>,
}

impl Dropout {
    pub fn new(rate: f32) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        Self { rate, mask: None }
    }
}

impl Layer for Dropout {
    fn forward(&mut self, x: &Tensor, ctx: &mut Ctx) -> Tensor {
        if !ctx.train || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f32> = (0..x.data.len())
            .map(|_| if ctx.rng.random::<f32>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let mut y = x.clone();
        for (v, m) in y.data.iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        y
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        let mut g = grad.clone();
        if let Some(mask) = self.mask.take() {
            for (v, m) in g.data.iter_mut().zip(&mask) {
                *v *= m;
            }
        }
        g
    }

    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut Param)) {}

    fn clear_cache(&mut self) {
        self.mask = None;
    }
}
