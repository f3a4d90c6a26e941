//! Dirichlet forms `E[ξ] = ⟨ξ, Lξ⟩₂` on the GNS space, their semigroups,
//! resolvents and approximating forms, and sampling verifiers for the
//! real, Markovian and completely Dirichlet properties.
//!
//! At finite dimension the form domain is the whole GNS space, so form
//! cores and regularity hold trivially.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::algebra::{hermitian_eigen, hermitize, Element, Matrix, Model};
use crate::error::{Error, Result};
use crate::report::{par_trials, CheckReport, VIOLATION_TOL};
use crate::sampling;

const HERMITIAN_TOL: f64 = 1e-10;

/// Positive self-adjoint generator `L`, stored in basis coordinates with its
/// spectral decomposition in an orthonormal frame.
#[derive(Clone, Debug)]
pub struct DirichletGenerator {
    model: Arc<Model>,
    matrix: Matrix,
    values: DVector<f64>,
    vectors: Matrix,
    one_plus_inv: Matrix,
}

impl DirichletGenerator {
    /// `L b_i = values_i b_i`.
    pub fn diagonal(model: &Arc<Model>, values: &[f64]) -> Result<Self> {
        if values.len() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: values.len() });
        }
        let diag = DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)));
        Self::from_matrix(model, Matrix::from_diagonal(&diag))
    }

    /// Any operator that is self-adjoint for `⟨·,·⟩₂` and positive semidefinite.
    /// J-reality and Markovianity are not required here; they are what the checks test.
    pub fn from_matrix(model: &Arc<Model>, matrix: Matrix) -> Result<Self> {
        let dim = model.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: matrix.nrows() });
        }
        let on = model.operator_to_orthonormal(&matrix);
        let scale = on.norm().max(1.0);
        let defect = (&on - on.adjoint()).norm();
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::InvalidModel(format!("generator is not self-adjoint (defect {defect:.3e})")));
        }
        let (values, vectors) = hermitian_eigen(&hermitize(&on));
        let min = values.min();
        if min < -HERMITIAN_TOL * scale {
            return Err(Error::InvalidModel(format!("generator is not positive (min eigenvalue {min:.3e})")));
        }
        let values = values.map(|v| v.max(0.0));
        let mut gen = Self { model: Arc::clone(model), matrix, values, vectors, one_plus_inv: Matrix::zeros(0, 0) };
        gen.one_plus_inv = gen.spectral_operator(|l| 1.0 / (1.0 + l));
        Ok(gen)
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    /// `L` in basis coordinates.
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Spectrum of `L`, ascending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.max()
    }

    /// `f(L)` in basis coordinates.
    pub fn spectral_operator<F: Fn(f64) -> f64>(&self, f: F) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(v));
        }
        self.model.operator_from_orthonormal(&(scaled * self.vectors.adjoint()))
    }

    /// `f(L)` in the orthonormal frame, where it is a Hermitian matrix.
    pub(crate) fn spectral_operator_orthonormal<F: Fn(f64) -> f64>(&self, f: F) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(v));
        }
        scaled * self.vectors.adjoint()
    }

    fn check(&self, x: &Element) {
        assert!(Arc::ptr_eq(&self.model, x.model()), "element belongs to a different model");
    }

    pub fn apply_operator(&self, op: &Matrix, x: &Element) -> Element {
        self.check(x);
        x.with_coeffs(op * x.coeffs())
    }

    /// `Lx`.
    pub fn apply(&self, x: &Element) -> Element {
        self.apply_operator(&self.matrix, x)
    }

    /// `(I + L)⁻¹ x`.
    pub fn solve_one_plus(&self, x: &Element) -> Element {
        self.apply_operator(&self.one_plus_inv, x)
    }

    /// `(I + L) x`.
    pub fn one_plus(&self, x: &Element) -> Element {
        x + &self.apply(x)
    }

    /// `E(x, y) = ⟨x, Ly⟩₂`.
    pub fn energy_bilinear(&self, x: &Element, y: &Element) -> Complex64 {
        x.inner(&self.apply(y)).expect("same model")
    }

    pub fn energy(&self, x: &Element) -> f64 {
        self.energy_bilinear(x, x).re
    }

    /// `⟨x, y⟩_F = E(x, y) + ⟨x, y⟩₂`.
    pub fn graph_inner(&self, x: &Element, y: &Element) -> Complex64 {
        x.inner(&self.one_plus(y)).expect("same model")
    }

    pub fn graph_norm(&self, x: &Element) -> f64 {
        self.graph_inner(x, x).re.max(0.0).sqrt()
    }

    /// `e^{−tL} x`.
    pub fn semigroup(&self, t: f64, x: &Element) -> Result<Element> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("semigroup time must be nonnegative, got {t}")));
        }
        Ok(self.apply_operator(&self.spectral_operator(|l| (-t * l).exp()), x))
    }

    /// `(I + εL)⁻¹ x`.
    pub fn resolvent(&self, eps: f64, x: &Element) -> Result<Element> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("resolvent parameter must be nonnegative, got {eps}")));
        }
        Ok(self.apply_operator(&self.spectral_operator(|l| 1.0 / (1.0 + eps * l)), x))
    }

    /// The bounded form with generator `L_ε = L(I + εL)⁻¹`.
    pub fn approx_form(&self, eps: f64) -> Result<ApproxForm> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("approximation parameter must be positive, got {eps}")));
        }
        let l_eps = self.spectral_operator(|l| l / (1.0 + eps * l));
        let one_plus_l_eps = self.spectral_operator(|l| 1.0 + l / (1.0 + eps * l));
        let one_plus_inv = self.spectral_operator(|l| 1.0 / (1.0 + l / (1.0 + eps * l)));
        let top = self.max_eigenvalue();
        Ok(ApproxForm { epsilon: eps, l_eps, one_plus_l_eps, one_plus_inv, max_eigenvalue: top / (1.0 + eps * top) })
    }

    /// Generator of the canonical extension to `M_n(A)`, scaled so that
    /// `E_n[[ξ_ij]] = Σ E[ξ_ij]` with respect to the normalized trace `τ ⊗ tr_n`.
    pub fn ampliate(&self, n: usize) -> Result<Self> {
        let big = self.model.ampliate(n)?;
        let dim = self.model.dim();
        let mut m = Matrix::zeros(big.dim(), big.dim());
        let scaled = &self.matrix * Complex64::new(n as f64, 0.0);
        for block in 0..n * n {
            m.view_mut((block * dim, block * dim), (dim, dim)).copy_from(&scaled);
        }
        Self::from_matrix(&big, m)
    }
}

/// The approximating form `E_ε` with bounded generator `L_ε`.
#[derive(Clone, Debug)]
pub struct ApproxForm {
    pub epsilon: f64,
    l_eps: Matrix,
    one_plus_l_eps: Matrix,
    one_plus_inv: Matrix,
    max_eigenvalue: f64,
}

impl ApproxForm {
    pub fn l_eps(&self) -> &Matrix {
        &self.l_eps
    }

    /// Largest eigenvalue of `L_ε`, at most `1/ε`.
    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    pub fn energy(&self, x: &Element) -> f64 {
        x.inner(&x.with_coeffs(&self.l_eps * x.coeffs())).expect("same model").re
    }

    /// `‖x‖_{F_ε}² = ⟨x, (I + L_ε)x⟩₂`.
    pub fn graph_norm(&self, x: &Element) -> f64 {
        x.inner(&x.with_coeffs(&self.one_plus_l_eps * x.coeffs())).expect("same model").re.max(0.0).sqrt()
    }

    /// `(I + L_ε)⁻¹ x`.
    pub fn solve_one_plus(&self, x: &Element) -> Element {
        x.with_coeffs(&self.one_plus_inv * x.coeffs())
    }
}

/// `|E[Jξ] − E[ξ]|` over random ξ, relative to `max(1, E[ξ])`.
pub fn check_real(gen: &DirichletGenerator, samples: usize, seed: u64) -> CheckReport {
    let model = gen.model();
    let excess = par_trials(seed, samples, |rng, _| {
        let x = sampling::random_element(model, rng);
        let e = gen.energy(&x);
        (gen.energy(&x.adjoint()) - e).abs() / e.max(1.0)
    });
    CheckReport::from_excess("real", seed, 1e-10, &excess)
}

/// `E[ξ ∧ 1] ≤ E[ξ]` on random J-real ξ.
pub fn check_markovian(gen: &DirichletGenerator, samples: usize, seed: u64) -> CheckReport {
    markovian_report("markovian", gen, samples, seed)
}

fn markovian_report(property: &str, gen: &DirichletGenerator, samples: usize, seed: u64) -> CheckReport {
    let model = gen.model();
    let excess = par_trials(seed, samples, |rng, _| {
        let x = sampling::random_markov_sample(model, rng);
        match x.meet_one() {
            Ok(m) => gen.energy(&m) - gen.energy(&x),
            Err(_) => f64::NAN,
        }
    });
    CheckReport::from_excess(property, seed, VIOLATION_TOL, &excess)
}

/// Markovianity of the ampliated form on `M_n(A)`.
pub fn check_completely_dirichlet(gen: &DirichletGenerator, n: usize, samples: usize, seed: u64) -> Result<CheckReport> {
    let big = if n == 1 { gen.clone() } else { gen.ampliate(n)? };
    Ok(markovian_report(&format!("completely_dirichlet_n{n}"), &big, samples, seed).with_metric("n", n as f64))
}

/// `e^{−tL}x` against `(I + (t/k)L)^{−k}x` at `k = 64, 256`.
///
/// The error must decrease with `k`, and the Richardson combination
/// `(4 r₂₅₆ − r₆₄)/3`, which cancels the `1/k` term, must be within `tol`.
pub fn check_semigroup_resolvent(gen: &DirichletGenerator, ts: &[f64], samples: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let model = gen.model();
    let mut ops = Vec::with_capacity(ts.len());
    for &t in ts {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("semigroup time must be nonnegative, got {t}")));
        }
        let exact = gen.spectral_operator(|l| (-t * l).exp());
        let r64 = gen.spectral_operator(|l| (1.0 + t * l / 64.0).powi(-64));
        let r256 = gen.spectral_operator(|l| (1.0 + t * l / 256.0).powi(-256));
        ops.push((exact, r64, r256));
    }
    let rows = par_trials(seed, samples, |rng, _| {
        let x = sampling::random_element(model, rng);
        let x = &x * (1.0 / x.norm2());
        let mut worst: f64 = 0.0;
        let mut decreasing = true;
        for (exact, r64, r256) in &ops {
            let e = gen.apply_operator(exact, &x);
            let a = gen.apply_operator(r64, &x);
            let b = gen.apply_operator(r256, &x);
            let (err64, err256) = ((&e - &a).norm2(), (&e - &b).norm2());
            decreasing &= err256 <= err64 || err64 < 1e-14;
            let rich = &(&b * (4.0 / 3.0)) - &(&a * (1.0 / 3.0));
            worst = worst.max((&e - &rich).norm2());
        }
        (worst, decreasing)
    });
    let excess: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let decreasing = rows.iter().all(|r| r.1);
    Ok(CheckReport::from_excess("semigroup_resolvent", seed, tol, &excess).require(decreasing))
}

/// Positivity preservation of `(I + εL)⁻¹` and `e^{−tL}` on `M_n(A)` for `n = 1..=max_n`.
pub fn check_complete_positivity(
    gen: &DirichletGenerator,
    max_n: usize,
    ts: &[f64],
    epss: &[f64],
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let mut excess = Vec::new();
    for n in 1..=max_n {
        let big = if n == 1 { gen.clone() } else { gen.ampliate(n)? };
        let model = big.model();
        let mut ops: Vec<Matrix> = ts.iter().map(|&t| big.spectral_operator(|l| (-t * l).exp())).collect();
        ops.extend(epss.iter().map(|&e| big.spectral_operator(|l| 1.0 / (1.0 + e * l))));
        let level = par_trials(seed.wrapping_add(n as u64), samples, |rng, i| {
            let x = sampling::random_positive_mixed(model, rng, i);
            ops.iter()
                .map(|op| match big.apply_operator(op, &x).real_part().min_eigenvalue() {
                    Ok(m) => -m,
                    Err(_) => f64::NAN,
                })
                .fold(f64::NEG_INFINITY, f64::max)
        });
        excess.extend(level);
    }
    Ok(CheckReport::from_excess("complete_positivity", seed, VIOLATION_TOL, &excess))
}

/// `‖x‖_{F_ε}` increases to `‖x‖_F` as `ε` decreases along the grid.
///
/// The violation collects monotonicity failures and overshoot of `‖x‖_F`, both
/// relative to `‖x‖_F`; the metric `final_gap` is the largest relative gap left
/// at the smallest `ε`.
pub fn check_approx_monotone(gen: &DirichletGenerator, epss: &[f64], samples: usize, seed: u64) -> Result<CheckReport> {
    let mut grid = epss.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let forms = grid.iter().map(|&e| gen.approx_form(e)).collect::<Result<Vec<_>>>()?;
    let model = gen.model();
    let rows = par_trials(seed, samples, |rng, _| {
        let x = sampling::random_element(model, rng);
        let full = gen.graph_norm(&x);
        let norms: Vec<f64> = forms.iter().map(|f| f.graph_norm(&x)).collect();
        let drop = norms.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
        let over = norms.iter().map(|n| n - full).fold(f64::NEG_INFINITY, f64::max);
        let gap = norms.last().map_or(0.0, |n| (full - n) / full);
        (drop.max(over) / full, gap)
    });
    let excess: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let gap = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(CheckReport::from_excess("approx_form_monotone", seed, VIOLATION_TOL, &excess).with_metric("final_gap", gap))
}

/// `‖(I + εL)⁻¹x − x‖_F` for each `ε`, which must decrease toward zero.
pub fn resolvent_convergence(gen: &DirichletGenerator, x: &Element, epss: &[f64]) -> Result<Vec<f64>> {
    epss.iter().map(|&e| Ok(gen.graph_norm(&(&gen.resolvent(e, x)? - x)))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_generator, build_twisted_group_algebra, coboundary_length, sine2_length, GroupSpec, LengthFunction};
    use crate::report::trial_rng;
    use approx::assert_abs_diff_eq;

    fn z4() -> DirichletGenerator {
        let spec = GroupSpec::untwisted(vec![4]).unwrap();
        let model = build_twisted_group_algebra(&spec).unwrap();
        let (ell, _) = coboundary_length(&spec, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        build_generator(&model, &ell).unwrap()
    }

    fn torus() -> DirichletGenerator {
        let spec = GroupSpec::torus(5, 1).unwrap();
        let model = build_twisted_group_algebra(&spec).unwrap();
        let (ell, _) = sine2_length(&spec, &[1.0, 1.0]).unwrap();
        build_generator(&model, &ell).unwrap()
    }

    #[test]
    fn energy_of_basis_and_sums() {
        let gen = z4();
        let model = gen.model();
        let ell = [0.0, 2.0, 4.0, 2.0];
        for s in 0..4 {
            let b = Element::basis(model, s);
            assert_abs_diff_eq!(gen.energy(&b), ell[s], epsilon = 1e-12);
            assert_abs_diff_eq!(gen.graph_norm(&b).powi(2), 1.0 + ell[s], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(gen.energy(&Element::one(model)), 0.0, epsilon = 1e-14);
        let mut rng = trial_rng(3, 0);
        for _ in 0..20 {
            let x = sampling::random_element(model, &mut rng);
            let oracle: f64 = (0..4).map(|s| ell[s] * x.coeffs()[s].norm_sqr()).sum();
            assert_abs_diff_eq!(gen.energy(&x), oracle, epsilon = 1e-12);
            let y = sampling::random_element(model, &mut rng);
            let lhs = gen.graph_inner(&x, &y);
            let rhs = gen.one_plus(&x).inner(&y).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn torus_energy_is_weighted_sum() {
        let gen = torus();
        let model = gen.model();
        let g = model.group().unwrap().clone();
        let mut rng = trial_rng(4, 0);
        let x = sampling::random_element(model, &mut rng);
        let oracle: f64 = (0..g.size())
            .map(|s| {
                let r = g.minimal_residues(s);
                let l = 4.0 * ((std::f64::consts::PI * r[0] as f64 / 5.0).sin().powi(2)
                    + (std::f64::consts::PI * r[1] as f64 / 5.0).sin().powi(2));
                l * x.coeffs()[s].norm_sqr()
            })
            .sum();
        assert_abs_diff_eq!(gen.energy(&x), oracle, epsilon = 1e-11);
    }

    #[test]
    fn semigroup_and_resolvent_on_basis() {
        let gen = z4();
        let model = gen.model();
        let b = Element::basis(model, 1);
        let st = gen.semigroup(0.3, &b).unwrap();
        assert_abs_diff_eq!(st.coeffs()[1].re, (-0.6f64).exp(), epsilon = 1e-14);
        let r = gen.resolvent(1.0, &b).unwrap();
        assert_abs_diff_eq!(r.coeffs()[1].re, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!((&gen.semigroup(0.0, &b).unwrap() - &b).norm2(), 0.0, epsilon = 1e-14);
        assert!(gen.semigroup(-1.0, &b).is_err());
        let one = Element::one(model);
        assert_abs_diff_eq!((&gen.resolvent(0.7, &one).unwrap() - &one).norm2(), 0.0, epsilon = 1e-14);
        // semigroup law
        let mut rng = trial_rng(5, 0);
        let x = sampling::random_element(model, &mut rng);
        let a = gen.semigroup(0.2, &gen.semigroup(0.5, &x).unwrap()).unwrap();
        let c = gen.semigroup(0.7, &x).unwrap();
        assert!((&a - &c).norm2() < 1e-13);
    }

    #[test]
    fn resolvent_converges_in_graph_norm() {
        let gen = torus();
        let mut rng = trial_rng(6, 0);
        let x = sampling::random_element(gen.model(), &mut rng);
        let errs = resolvent_convergence(&gen, &x, &[1.0, 0.1, 0.01]).unwrap();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn approx_form_eigenvalues_and_monotonicity() {
        let gen = z4();
        let model = gen.model();
        let af = gen.approx_form(0.5).unwrap();
        for (s, l) in [0.0, 2.0, 4.0, 2.0].iter().enumerate() {
            let b = Element::basis(model, s);
            assert_abs_diff_eq!(af.energy(&b), l / (1.0 + 0.5 * l), epsilon = 1e-13);
        }
        assert!(af.max_eigenvalue() <= 2.0);
        let mut rng = trial_rng(7, 0);
        let x = sampling::random_element(model, &mut rng);
        let full = gen.graph_norm(&x);
        let mut prev = 0.0;
        for eps in [1.0, 0.1, 0.01, 0.001] {
            let v = gen.approx_form(eps).unwrap().graph_norm(&x);
            assert!(v >= prev && v <= full + 1e-12);
            prev = v;
        }
        assert!(gen.approx_form(0.0).is_err());
    }

    #[test]
    fn shipped_forms_are_markovian() {
        for gen in [z4(), torus()] {
            assert!(check_real(&gen, 100, 1).pass);
            let r = check_markovian(&gen, 200, 1);
            assert!(r.pass, "{r:?}");
            let r = check_completely_dirichlet(&gen, 2, 100, 1).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn bump_length_is_not_markovian() {
        let spec = GroupSpec::untwisted(vec![4]).unwrap();
        let model = build_twisted_group_algebra(&spec).unwrap();
        let ell = LengthFunction::explicit(model.group().unwrap(), vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let gen = build_generator(&model, &ell).unwrap();
        let r = check_markovian(&gen, 500, 1);
        assert!(!r.pass, "{r:?}");
    }

    #[test]
    fn ampliated_energy_of_diagonal_is_sum() {
        let gen = z4();
        let big = gen.ampliate(2).unwrap();
        let mut rng = trial_rng(8, 0);
        let x1 = sampling::random_element(gen.model(), &mut rng);
        let x2 = sampling::random_element(gen.model(), &mut rng);
        let mut coeffs = crate::algebra::Vector::zeros(big.model().dim());
        for k in 0..4 {
            coeffs[k] = x1.coeffs()[k];
            coeffs[3 * 4 + k] = x2.coeffs()[k];
        }
        let d = Element::new(big.model(), coeffs).unwrap();
        assert_abs_diff_eq!(big.energy(&d), gen.energy(&x1) + gen.energy(&x2), epsilon = 1e-12);
    }

    #[test]
    fn semigroup_resolvent_consistency() {
        let gen = torus();
        let r = check_semigroup_resolvent(&gen, &[0.01, 0.05], 50, 2, 1e-6).unwrap();
        assert!(r.pass, "{r:?}");
        let r = check_complete_positivity(&gen, 2, &[0.1, 1.0], &[0.1, 1.0], 30, 2).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn rejects_non_hermitian_generators() {
        let gen = z4();
        let mut m = gen.matrix().clone();
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(DirichletGenerator::from_matrix(gen.model(), m).is_err());
        let neg = Matrix::from_diagonal_element(4, 4, Complex64::new(-1.0, 0.0));
        assert!(DirichletGenerator::from_matrix(gen.model(), neg).is_err());
    }
}
