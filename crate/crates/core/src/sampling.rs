//! Random elements used by the property checks.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{Element, Model, Vector};
use crate::error::Result;

/// Coefficients with real and imaginary parts uniform in `[-1, 1]`.
pub fn random_element<R: Rng>(model: &Arc<Model>, rng: &mut R) -> Element {
    let coeffs = Vector::from_fn(model.dim(), |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    Element::from_parts(model, coeffs)
}

/// A J-real element of operator norm 1.
pub fn random_real<R: Rng>(model: &Arc<Model>, rng: &mut R) -> Element {
    let y = random_element(model, rng).real_part();
    let n = y.operator_norm();
    if n > 0.0 {
        &y * (1.0 / n)
    } else {
        Element::one(model)
    }
}

/// `a·1 + s·y` with `y` J-real of norm 1; spectra straddle 1 often enough to exercise `ξ ∧ 1`.
pub fn random_markov_sample<R: Rng>(model: &Arc<Model>, rng: &mut R) -> Element {
    let a = rng.gen_range(-1.0..2.0);
    let s = rng.gen_range(0.5..3.0);
    let y = random_real(model, rng);
    &Element::scalar(model, Complex64::new(a, 0.0)) + &(&y * s)
}

/// `y* y` scaled to operator norm 1.
pub fn random_positive<R: Rng>(model: &Arc<Model>, rng: &mut R) -> Element {
    let y = random_element(model, rng);
    let p = y.adjoint().product(&y).expect("same model").real_part();
    let n = p.operator_norm();
    if n > 0.0 {
        &p * (1.0 / n)
    } else {
        Element::one(model)
    }
}

/// Spectral projection onto the positive eigenspace of a random J-real element.
pub fn random_projection<R: Rng>(model: &Arc<Model>, rng: &mut R) -> Result<Element> {
    let y = random_real(model, rng);
    y.functional_calculus(|t| if t > 0.0 { 1.0 } else { 0.0 })
}

/// A random positive density normalized to `τ(h) = 1`.
pub fn random_state<R: Rng>(model: &Arc<Model>, rng: &mut R) -> Element {
    let p = random_positive(model, rng);
    let t = p.trace().re;
    &p * (1.0 / t)
}

/// Positive test elements that alternate between full-rank and projection samples.
pub fn random_positive_mixed<R: Rng>(model: &Arc<Model>, rng: &mut R, index: usize) -> Element {
    if index % 4 == 3 {
        if let Ok(p) = random_projection(model, rng) {
            return p;
        }
    }
    random_positive(model, rng)
}
