//! Scalar GRU evaluated straight from the update equations.

use losnet_core::nn::{gru_cell_step, GruCell};
use losnet_core::{Rng, Tensor};

fn s(v: f64) -> Tensor {
    Tensor::new(&[1, 1], vec![v]).unwrap()
}

fn b(v: f64) -> Tensor {
    Tensor::new(&[1], vec![v]).unwrap()
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Returns the largest absolute deviation over `trials` random scalar cells.
pub fn max_deviation(trials: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let p: Vec<f64> = (0..11).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
        let [wz, wr, wh, uz, ur, uh, bz, br, bh, x, h] = p[..] else { unreachable!() };
        let z = logistic(wz * x + uz * h + bz);
        let r = logistic(wr * x + ur * h + br);
        let c = (wh * x + uh * (r * h) + bh).tanh();
        let expected = (1.0 - z) * h + z * c;
        let cell = GruCell::new(s(wz), s(wr), s(wh), s(uz), s(ur), s(uh), b(bz), b(br), b(bh)).unwrap();
        let (got, _) = gru_cell_step(&cell, &s(x), &s(h)).unwrap();
        worst = worst.max((got.data()[0] - expected).abs());
    }
    worst
}
