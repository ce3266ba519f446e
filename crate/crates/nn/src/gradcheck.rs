//! Finite-difference gradient oracle for layer tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Ctx, Dims, Layer, Tensor};

fn loss(layer: &mut dyn Layer, x: &Tensor, r: &[f32]) -> f64 {
    let y = layer.forward(x, &mut Ctx::new(false, 0));
    y.data.iter().zip(r).map(|(a, b)| (*a as f64) * (*b as f64)).sum()
}

fn bump(layer: &mut dyn Layer, which: usize, j: usize, delta: f32) {
    let mut k = 0;
    layer.visit_params(&mut |p| {
        if k == which {
            p.value[j] += delta;
        }
        k += 1;
    });
}

/// Compares analytic input and parameter gradients of `sum(r * layer(x))`
/// against central differences.
pub fn check_layer(mut layer: Box<dyn Layer>, n: usize, dims: Dims) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let x = Tensor::from_vec(
        n,
        dims,
        (0..n * dims.len()).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
    );
    let y = layer.forward(&x, &mut Ctx::new(false, 0));
    let r: Vec<f32> = (0..y.data.len()).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    crate::zero_grads(layer.as_mut());
    let gx = layer.backward(&Tensor::from_vec(y.n, y.dims, r.clone()));

    let eps = 1e-2f32;
    let tol = |a: f64, b: f64| (a - b).abs() <= 2e-2 * (1.0 + a.abs().max(b.abs()));
    for i in 0..x.data.len() {
        let mut xp = x.clone();
        xp.data[i] += eps;
        let lp = loss(layer.as_mut(), &xp, &r);
        xp.data[i] -= 2.0 * eps;
        let lm = loss(layer.as_mut(), &xp, &r);
        let fd = (lp - lm) / (2.0 * eps as f64);
        assert!(tol(fd, gx.data[i] as f64), "input grad {i}: fd {fd} vs analytic {}", gx.data[i]);
    }

    let mut grads = Vec::new();
    layer.visit_params(&mut |p| grads.push(p.grad.clone()));
    for (pi, g) in grads.iter().enumerate() {
        for j in 0..g.len() {
            let fd = {
                bump(layer.as_mut(), pi, j, eps);
                let lp = loss(layer.as_mut(), &x, &r);
                bump(layer.as_mut(), pi, j, -2.0 * eps);
                let lm = loss(layer.as_mut(), &x, &r);
                bump(layer.as_mut(), pi, j, eps);
                (lp - lm) / (2.0 * eps as f64)
            };
            assert!(tol(fd, g[j] as f64), "param {pi}[{j}]: fd {fd} vs analytic {}", g[j]);
        }
    }
}
