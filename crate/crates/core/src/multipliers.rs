//! Exact norms of multiplication operators on the Dirichlet space and the
//! bound `√[(‖G(Γ[g])‖^{1/2} + ‖g‖)² + ‖g‖²]` for potentials `g`.
//!
//! Every element is a multiplier at finite dimension, so what is checked here
//! is quantitative.

use serde::{Deserialize, Serialize};

use crate::algebra::{Element, Matrix};
use crate::carre_du_champ::potential_of_gamma;
use crate::dirichlet::DirichletGenerator;
use crate::error::Result;
use crate::potential::{is_potential, Potential};
use crate::report::{par_trials, CheckReport, VIOLATION_TOL};
use crate::sampling;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    /// Norm of `b ↦ gb` on `(F, ‖·‖_F)`.
    pub left_norm: f64,
    /// Norm of `b ↦ bg`.
    pub right_norm: f64,
    pub norm_bound: f64,
    pub gamma_potential_norm: f64,
    pub operator_norm: f64,
    /// Largest sampled `‖gb‖_F/‖b‖_F`, when sampling was run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_max: Option<f64>,
    pub pass: bool,
}

impl MultiplierReport {
    /// `max(left_norm, right_norm)`.
    pub fn norm(&self) -> f64 {
        self.left_norm.max(self.right_norm)
    }

    pub fn margin(&self) -> f64 {
        self.norm_bound - self.norm()
    }
}

fn multiplication_matrix(g: &Element, left: bool) -> Matrix {
    let model = g.model();
    let dim = model.dim();
    let mut m = Matrix::zeros(dim, dim);
    for j in 0..dim {
        let b = Element::basis(model, j);
        let p = if left { g.product(&b) } else { b.product(g) }.expect("same model");
        m.set_column(j, p.coeffs());
    }
    m
}

fn f_operator_norm(gen: &DirichletGenerator, m: &Matrix) -> f64 {
    let on = gen.model().operator_to_orthonormal(m);
    let s = gen.spectral_operator_orthonormal(|l| (1.0 + l).sqrt());
    let s_inv = gen.spectral_operator_orthonormal(|l| 1.0 / (1.0 + l).sqrt());
    (s * on * s_inv).svd(false, false).singular_values.max()
}

/// `(left, right)` norms: largest singular values of `(I+L)^{1/2} M (I+L)^{−1/2}`.
pub fn multiplier_norms(gen: &DirichletGenerator, g: &Element) -> (f64, f64) {
    (f_operator_norm(gen, &multiplication_matrix(g, true)), f_operator_norm(gen, &multiplication_matrix(g, false)))
}

/// `√[(‖G(Γ[g])‖^{1/2} + ‖g‖)² + ‖g‖²]`.
pub fn norm_bound(gen: &DirichletGenerator, g: &Element) -> Result<(f64, f64)> {
    let gp = potential_of_gamma(gen, g)?.operator_norm();
    let gn = g.operator_norm();
    Ok((((gp.sqrt() + gn).powi(2) + gn * gn).sqrt(), gp))
}

/// Exact norms together with the bound; `pass` compares them.
pub fn multiplier_norm(gen: &DirichletGenerator, g: &Element) -> Result<MultiplierReport> {
    let (left_norm, right_norm) = multiplier_norms(gen, g);
    let (bound, gp) = norm_bound(gen, g)?;
    let pass = left_norm <= bound + 1e-8 && right_norm <= bound + 1e-8;
    Ok(MultiplierReport {
        left_norm,
        right_norm,
        norm_bound: bound,
        gamma_potential_norm: gp,
        operator_norm: g.operator_norm(),
        sampled_max: None,
        pass,
    })
}

/// The bound for a potential, checked exactly and on random `b`.
pub fn check_multiplier_bound(gen: &DirichletGenerator, g: &Potential, trials: usize, seed: u64) -> Result<MultiplierReport> {
    let mut report = multiplier_norm(gen, g.vector())?;
    let model = gen.model();
    let gv = g.vector();
    let ratios = par_trials(seed, trials, |rng, _| {
        let b = sampling::random_element(model, rng);
        let nb = gen.graph_norm(&b);
        let l = gen.graph_norm(&gv.product(&b).expect("same model"));
        let r = gen.graph_norm(&b.product(gv).expect("same model"));
        l.max(r) / nb
    });
    let sampled = ratios.into_iter().fold(0.0_f64, f64::max);
    let symmetric = !gv.is_real() || (report.left_norm - report.right_norm).abs() <= 1e-9 * report.left_norm.max(1.0);
    report.pass &= sampled <= report.norm_bound * (1.0 + VIOLATION_TOL) && sampled <= report.norm() * (1.0 + 1e-9) && symmetric;
    report.sampled_max = Some(sampled);
    Ok(report)
}

/// For `G = (I + L)⁻¹h`: each `(I + εL)⁻¹G` is a potential satisfying the
/// multiplier bound, and `‖(I + εL)⁻¹G − G‖_F` decreases to zero along the grid.
pub fn check_resolvent_multiplier(
    gen: &DirichletGenerator,
    h: &Element,
    epss: &[f64],
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    let g = gen.solve_one_plus(h);
    let mut excess = Vec::with_capacity(epss.len());
    let mut distances = Vec::with_capacity(epss.len());
    let mut ok = true;
    for &e in epss {
        let ge = gen.resolvent(e, &g)?;
        let cert = is_potential(gen, &ge);
        ok &= cert.is_potential;
        excess.push(-cert.min_eigenvalue);
        let pot = Potential::new(gen, ge.clone()).unwrap_or_else(|_| Potential::from_parts(ge.clone(), gen.one_plus(&ge)));
        let r = check_multiplier_bound(gen, &pot, trials, seed)?;
        ok &= r.pass;
        excess.push(r.norm() - r.norm_bound);
        distances.push(gen.graph_norm(&(&ge - &g)));
    }
    let mut sorted: Vec<(f64, f64)> = epss.iter().copied().zip(distances.iter().copied()).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let decreasing = sorted.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let mut report = CheckReport::from_excess("resolvent_multiplier", seed, VIOLATION_TOL, &excess).require(ok && decreasing);
    if let Some(&(_, last)) = sorted.last() {
        report = report.with_metric("final_distance", last);
    }
    Ok(report)
}

/// The bound over `count` random potentials `(I + L)⁻¹h`, `h ≥ 0`, each with
/// `trials` sampled `b`. Violations are relative to the bound; the metric
/// `min_margin` is the smallest relative slack seen.
pub fn check_multiplier_potentials(gen: &DirichletGenerator, count: usize, trials: usize, seed: u64) -> Result<CheckReport> {
    let model = gen.model();
    let rows = par_trials(seed, count, |rng, i| -> Result<(f64, bool, bool)> {
        let h = sampling::random_positive_mixed(model, rng, i);
        let g = Potential::new(gen, gen.solve_one_plus(&h))?;
        let r = check_multiplier_bound(gen, &g, trials, seed.wrapping_add(i as u64))?;
        Ok((r.margin() / r.norm_bound.max(1.0), r.norm_bound > 0.0, r.pass))
    });
    let mut excess = Vec::with_capacity(count);
    let mut all = true;
    let mut min_margin = f64::INFINITY;
    for row in rows {
        let (m, nonzero, p) = row?;
        excess.push(-m);
        if nonzero {
            min_margin = min_margin.min(m);
        }
        all &= p;
    }
    let mut report = CheckReport::from_excess("multiplier_bound", seed, 1e-9, &excess).require(all);
    if min_margin.is_finite() {
        report = report.with_metric("min_margin", min_margin);
    }
    Ok(report)
}

/// Submultiplicativity, involution invariance and the unit on random elements.
pub fn check_multiplier_algebra(gen: &DirichletGenerator, trials: usize, seed: u64) -> CheckReport {
    let model = gen.model();
    let unit = multiplier_norms(gen, &Element::one(model));
    let mut excess = par_trials(seed, trials, |rng, _| {
        let a = sampling::random_element(model, rng);
        let b = sampling::random_element(model, rng);
        let na = multiplier_norms(gen, &a);
        let nb = multiplier_norms(gen, &b);
        let nab = multiplier_norms(gen, &a.product(&b).expect("same model"));
        let nstar = multiplier_norms(gen, &a.adjoint());
        let (ma, mb, mab) = (na.0.max(na.1), nb.0.max(nb.1), nab.0.max(nab.1));
        let sub = (mab - ma * mb) / (ma * mb).max(1.0);
        let inv = (nstar.0.max(nstar.1) - ma).abs() / ma.max(1.0);
        let swap = (nstar.0 - na.1).abs().max((nstar.1 - na.0).abs()) / ma.max(1.0);
        sub.max(inv).max(swap)
    });
    excess.push((unit.0 - 1.0).abs().max((unit.1 - 1.0).abs()));
    CheckReport::from_excess("multiplier_algebra", seed, 1e-9, &excess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_generator, build_twisted_group_algebra, coboundary_length, sine2_length, GroupSpec};
    use crate::report::trial_rng;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

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
    fn unit_and_scalars() {
        let gen = z4();
        let model = gen.model();
        let r = multiplier_norm(&gen, &Element::one(model)).unwrap();
        assert_abs_diff_eq!(r.left_norm, 1.0, epsilon = 1e-12);
        assert!(r.pass && r.norm_bound >= 1.0);
        let c = Complex64::new(-1.5, 2.0);
        let (l, rt) = multiplier_norms(&gen, &Element::scalar(model, c));
        assert_abs_diff_eq!(l, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rt, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn translation_norms_on_cyclic_four() {
        let gen = z4();
        let ell: [f64; 4] = [0.0, 2.0, 4.0, 2.0];
        for s in 0..4 {
            let (l, _) = multiplier_norms(&gen, &Element::basis(gen.model(), s));
            let oracle = (0..4).map(|t| ((1.0 + ell[(s + t) % 4]) / (1.0 + ell[t])).sqrt()).fold(0.0, f64::max);
            assert_abs_diff_eq!(l, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn bound_holds_for_potentials() {
        for gen in [z4(), torus()] {
            let mut rng = trial_rng(1, 0);
            for _ in 0..5 {
                let h = sampling::random_positive(gen.model(), &mut rng);
                let g = Potential::new(&gen, gen.solve_one_plus(&h)).unwrap();
                let r = check_multiplier_bound(&gen, &g, 100, 2).unwrap();
                assert!(r.pass, "{r:?}");
            }
            let zero = Potential::new(&gen, Element::zero(gen.model())).unwrap();
            let r = check_multiplier_bound(&gen, &zero, 10, 2).unwrap();
            assert_eq!(r.norm(), 0.0);
        }
    }

    #[test]
    fn resolvent_multipliers() {
        let gen = torus();
        let mut rng = trial_rng(3, 0);
        let h = sampling::random_positive(gen.model(), &mut rng);
        let r = check_resolvent_multiplier(&gen, &h, &[1.0, 0.1, 0.01, 0.001], 50, 4).unwrap();
        assert!(r.pass, "{r:?}");
        let one = Element::one(gen.model());
        assert!((&gen.resolvent(0.3, &one).unwrap() - &one).norm2() < 1e-14);
    }

    #[test]
    fn algebra_properties() {
        for gen in [z4(), torus()] {
            let r = check_multiplier_algebra(&gen, 50, 5);
            assert!(r.pass, "{r:?}");
        }
    }
}
