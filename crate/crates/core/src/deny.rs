//! Embedding of the Dirichlet space into the GNS space of a finite-energy
//! functional, the regularized inequality `τ(h b*(G+δ)⁻¹b) ≤ ‖b‖_F²` with its
//! saturation at `b = G`, and the approximating potentials `G_ε`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{Element, Matrix};
use crate::dirichlet::DirichletGenerator;
use crate::error::{Error, Result};
use crate::potential::{potential_of, FiniteEnergyFunctional, Potential};
use crate::report::{par_trials, CheckReport, VIOLATION_TOL};
use crate::sampling;

pub const DEFAULT_DELTA_GRID: [f64; 4] = [1.0, 1e-2, 1e-4, 1e-6];

/// Outcome of the embedding check `ω(b*b) ≤ ‖G(ω)‖·‖b‖_F²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenyReport {
    /// Largest sampled `ω(b*b)/(‖G(ω)‖·‖b‖_F²)`.
    pub ratio_max: f64,
    pub inequality_pass: bool,
    /// Norm of `b ↦ b` from `(F, ‖·‖_F)` to `L²(A, ω)`.
    pub embedding_norm: f64,
    /// `√‖G(ω)‖`.
    pub embedding_bound: f64,
    pub potential_norm: f64,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
}

/// One sampled row: `‖b‖_F²`, `ω(b*b)` and their ratio against `‖G(ω)‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenySample {
    pub graph_norm_sq: f64,
    pub omega_bb: f64,
    pub ratio: f64,
}

fn embedding_sample(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional, g_norm: f64, b: &Element) -> DenySample {
    let graph_norm_sq = gen.graph_norm(b).powi(2);
    let omega_bb = omega.evaluate(&b.adjoint().product(b).expect("same model")).re;
    let denom = g_norm * graph_norm_sq;
    let ratio = if omega_bb.abs() <= 1e-300 { 0.0 } else { omega_bb / denom };
    DenySample { graph_norm_sq, omega_bb, ratio }
}

/// Sampled ratios over `trials` random elements followed by every basis element.
pub fn deny_samples(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional, trials: usize, seed: u64) -> Vec<DenySample> {
    let model = gen.model();
    let g_norm = potential_of(gen, omega).operator_norm();
    let mut rows = par_trials(seed, trials, |rng, _| embedding_sample(gen, omega, g_norm, &sampling::random_element(model, rng)));
    rows.extend((0..model.dim()).map(|j| embedding_sample(gen, omega, g_norm, &Element::basis(model, j))));
    rows
}

/// Largest `μ` with `W v = μ F v`, where `W_ij = ω(b_i* b_j)` and `F_ij = ⟨b_i, b_j⟩_F`.
pub fn embedding_norm(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional) -> f64 {
    let model = gen.model();
    let dim = model.dim();
    let basis: Vec<Element> = (0..dim).map(|j| Element::basis(model, j)).collect();
    let mut w = Matrix::zeros(dim, dim);
    let mut f = Matrix::zeros(dim, dim);
    for i in 0..dim {
        let bi = basis[i].adjoint();
        for j in 0..dim {
            w[(i, j)] = omega.evaluate(&bi.product(&basis[j]).expect("same model"));
            f[(i, j)] = gen.graph_inner(&basis[i], &basis[j]);
        }
    }
    let chol = crate::algebra::hermitize(&f).cholesky().expect("graph inner product is positive definite");
    let l = chol.l();
    let linv = l.clone().try_inverse().expect("invertible factor");
    let reduced = &linv * crate::algebra::hermitize(&w) * linv.adjoint();
    let (values, _) = crate::algebra::hermitian_eigen(&reduced);
    values.max().max(0.0).sqrt()
}

pub fn deny_embedding_check(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional, trials: usize, seed: u64) -> DenyReport {
    let rows = deny_samples(gen, omega, trials, seed);
    let ratio_max = rows.iter().map(|r| r.ratio).fold(0.0_f64, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    let inequality_pass = ratio_max <= 1.0 + VIOLATION_TOL;
    let potential_norm = potential_of(gen, omega).operator_norm();
    let embedding_norm = embedding_norm(gen, omega);
    let embedding_bound = potential_norm.sqrt();
    let pass = inequality_pass && embedding_norm <= embedding_bound + 1e-8;
    DenyReport { ratio_max, inequality_pass, embedding_norm, embedding_bound, potential_norm, samples: rows.len(), seed, pass }
}

/// The δ-regularized quadratic expression `τ(h b*(G+δ)⁻¹b)` along a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenyInequalityReport {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    /// `‖b‖_F²`.
    pub bound: f64,
    pub monotone: bool,
    pub max_excess: f64,
    /// Value at the smallest δ, a certified lower bound for the limit.
    pub final_value: f64,
    /// `δ → 0` estimate by linear extrapolation through the two smallest δ;
    /// the value is smooth in δ whenever `G(ω)` is invertible.
    pub limit: f64,
    pub pass: bool,
}

pub fn deny_inequality_check(
    gen: &DirichletGenerator,
    omega: &FiniteEnergyFunctional,
    b: &Element,
    deltas: &[f64],
) -> Result<DenyInequalityReport> {
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("δ grid must be positive and strictly decreasing".into()));
    }
    let g = potential_of(gen, omega);
    let b_star = b.adjoint();
    let mut values = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let inv = g.vector().functional_calculus(|t| 1.0 / (t + d))?;
        let q = b_star.product(&inv)?.product(b)?;
        values.push(omega.evaluate(&q).re);
    }
    let bound = gen.graph_norm(b).powi(2);
    let slack = VIOLATION_TOL * bound.max(1.0);
    let monotone = values.windows(2).all(|w| w[1] >= w[0] - slack);
    let max_excess = values.iter().map(|v| v - bound).fold(f64::NEG_INFINITY, f64::max);
    let final_value = *values.last().expect("nonempty grid");
    let limit = match (deltas, values.as_slice()) {
        ([.., d1, d2], [.., v1, v2]) => v2 + (v2 - v1) * d2 / (d1 - d2),
        _ => final_value,
    };
    let pass = monotone && max_excess <= slack;
    Ok(DenyInequalityReport { deltas: deltas.to_vec(), values, bound, monotone, max_excess, final_value, limit, pass })
}

/// Gap between the `δ → 0` value at `b = G(ω)` and `‖G(ω)‖_F²`, and the raw gap at the smallest δ.
pub fn saturation_gap(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional, deltas: &[f64]) -> Result<(f64, f64)> {
    let g = potential_of(gen, omega);
    let r = deny_inequality_check(gen, omega, g.vector(), deltas)?;
    Ok(((r.limit - r.bound).abs(), (r.final_value - r.bound).abs()))
}

/// The inequality and saturation over random `b`, plus `b = 0` and `b = G`.
pub fn check_deny_inequality(
    gen: &DirichletGenerator,
    omega: &FiniteEnergyFunctional,
    deltas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    let model = gen.model();
    let rows = par_trials(seed, trials, |rng, _| {
        let b = sampling::random_element(model, rng);
        deny_inequality_check(gen, omega, &b, deltas).map(|r| (r.max_excess / r.bound.max(1.0), r.monotone))
    });
    let mut excess = Vec::with_capacity(trials + 1);
    let mut monotone = true;
    for r in rows {
        let (e, m) = r?;
        excess.push(e);
        monotone &= m;
    }
    let zero = deny_inequality_check(gen, omega, &crate::algebra::Element::zero(model), deltas)?;
    excess.push(zero.max_excess);
    let (gap, raw) = saturation_gap(gen, omega, deltas)?;
    Ok(CheckReport::from_excess("deny_inequality", seed, VIOLATION_TOL, &excess)
        .require(monotone && gap <= 1e-6)
        .with_metric("saturation_gap", gap)
        .with_metric("saturation_gap_smallest_delta", raw))
}

/// `⟨G, b*b⟩_F ≤ ‖G‖·‖b‖_F²` for a bounded potential.
pub fn bounded_potential_bound_check(gen: &DirichletGenerator, g: &Potential, trials: usize, seed: u64) -> CheckReport {
    let model = gen.model();
    let g_norm = g.operator_norm();
    let one = Element::one(model);
    let eval = |b: &Element| {
        let lhs = gen.graph_inner(g.vector(), &b.adjoint().product(b).expect("same model")).re;
        lhs - g_norm * gen.graph_norm(b).powi(2)
    };
    let mut excess = par_trials(seed, trials, |rng, _| eval(&sampling::random_element(model, rng)));
    excess.push(eval(&one));
    CheckReport::from_excess("bounded_potential", seed, VIOLATION_TOL, &excess)
}

/// The E_ε-potential of `b ↦ ω((I + εL)⁻¹b)` against the closed form
/// `G/(1+ε) + ε/(1+ε)·(I + (1+ε)L)⁻¹G`, and `‖G_ε‖ ≤ ‖G‖`.
pub fn approx_potential_formula_check(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional, eps: f64) -> Result<CheckReport> {
    let af = gen.approx_form(eps)?;
    let g = potential_of(gen, omega);
    let h_eps = gen.resolvent(eps, omega.density())?;
    let g_eps = af.solve_one_plus(&h_eps);
    let tail = gen.apply_operator(&gen.spectral_operator(|l| 1.0 / (1.0 + (1.0 + eps) * l)), g.vector());
    let closed = &(g.vector() * (1.0 / (1.0 + eps))) + &(&tail * (eps / (1.0 + eps)));
    let scale = g.vector().norm2().max(1.0);
    let residual = (&g_eps - &closed).norm2() / scale;
    let norm_excess = g_eps.operator_norm() - g.operator_norm();
    let direct = gen.apply_operator(&gen.spectral_operator(|l| 1.0 / (1.0 + (1.0 + eps) * l)), omega.density());
    let direct_residual = (&g_eps - &direct).norm2() / scale;
    Ok(CheckReport::from_excess("approx_potential", 0, 1e-10, &[residual, direct_residual, norm_excess])
        .with_metric("epsilon", eps)
        .with_metric("residual", residual))
}

/// `ω(b*b)` for `b = c·1` is `|c|²ω(1)`; used by the scaling checks.
pub fn omega_on_scalar(omega: &FiniteEnergyFunctional, c: Complex64) -> f64 {
    c.norm_sqr() * omega.mass()
}
