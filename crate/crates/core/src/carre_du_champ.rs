//! The carré du champ `Γ[a]`, computed from the form alone and through the
//! derivation of a group 1-cocycle, and potentials of `Γ[g]`.
//!
//! The bimodule is `ℂ^d ⊗ ℓ²(G)` with
//! `λ_u(ξ ⊗ δ_s) = σ(u,s) π(u)ξ ⊗ δ_{us}`, `(ξ ⊗ δ_s)λ_u = σ(s,u) ξ ⊗ δ_{su}`
//! and `∂a = Σ_s a(s) c(s) ⊗ δ_s`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{Element, Matrix, Model, Vector, ONE};
use crate::dirichlet::DirichletGenerator;
use crate::error::{Error, Result};
use crate::models::Cocycle;
use crate::potential::Potential;
use crate::report::{par_trials, CheckReport, VIOLATION_TOL};
use crate::sampling;

/// A vector of the bimodule: column `s` holds the `ℂ^d` component at `δ_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct BimoduleVector {
    data: Matrix,
}

impl BimoduleVector {
    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }
}

impl std::ops::Add for &BimoduleVector {
    type Output = BimoduleVector;
    fn add(self, rhs: Self) -> BimoduleVector {
        BimoduleVector { data: &self.data + &rhs.data }
    }
}

impl std::ops::Sub for &BimoduleVector {
    type Output = BimoduleVector;
    fn sub(self, rhs: Self) -> BimoduleVector {
        BimoduleVector { data: &self.data - &rhs.data }
    }
}

/// The derivation `∂` of a cocycle over a group model.
#[derive(Clone, Debug)]
pub struct Derivation {
    model: Arc<Model>,
    cocycle: Cocycle,
}

impl Derivation {
    pub fn new(model: &Arc<Model>, cocycle: Cocycle) -> Result<Self> {
        let group = model.group().ok_or(Error::NotGroupModel)?;
        if cocycle.group_size() != group.size() {
            return Err(Error::DimensionMismatch { expected: group.size(), found: cocycle.group_size() });
        }
        Ok(Self { model: Arc::clone(model), cocycle })
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn cocycle(&self) -> &Cocycle {
        &self.cocycle
    }

    fn size(&self) -> usize {
        self.model.dim()
    }

    pub fn zero_vector(&self) -> BimoduleVector {
        BimoduleVector { data: Matrix::zeros(self.cocycle.dim(), self.size()) }
    }

    fn check(&self, a: &Element) {
        assert!(Arc::ptr_eq(&self.model, a.model()), "element belongs to a different model");
    }

    /// `∂a`.
    pub fn apply(&self, a: &Element) -> BimoduleVector {
        self.check(a);
        let mut out = self.zero_vector();
        for s in 0..self.size() {
            let coeff = a.coeffs()[s];
            out.data.column_mut(s).copy_from(&(self.cocycle.c(s) * coeff));
        }
        out
    }

    /// `a · ξ`.
    pub fn left_action(&self, a: &Element, xi: &BimoduleVector) -> BimoduleVector {
        self.check(a);
        let g = self.model.group().expect("group model");
        let mut out = self.zero_vector();
        for u in 0..self.size() {
            let au = a.coeffs()[u];
            if au == Complex64::new(0.0, 0.0) {
                continue;
            }
            let pi = self.cocycle.pi(u);
            for s in 0..self.size() {
                let target = g.mul(u, s);
                let v = pi * xi.data.column(s) * (au * g.sigma(u, s));
                let mut col = out.data.column_mut(target);
                col += v;
            }
        }
        out
    }

    /// `ξ · a`.
    pub fn right_action(&self, xi: &BimoduleVector, a: &Element) -> BimoduleVector {
        self.check(a);
        let g = self.model.group().expect("group model");
        let mut out = self.zero_vector();
        for u in 0..self.size() {
            let au = a.coeffs()[u];
            if au == Complex64::new(0.0, 0.0) {
                continue;
            }
            for s in 0..self.size() {
                let target = g.mul(s, u);
                let v = xi.data.column(s) * (au * g.sigma(s, u));
                let mut col = out.data.column_mut(target);
                col += v;
            }
        }
        out
    }

    /// The symmetry `𝒥(ξ ⊗ δ_s) = −π(s)⁻¹ξ̄ ⊗ J(λ_s)`.
    pub fn symmetry(&self, xi: &BimoduleVector) -> BimoduleVector {
        let g = self.model.group().expect("group model");
        let mut out = self.zero_vector();
        for s in 0..self.size() {
            let inv = g.inv(s);
            let phase = g.sigma(s, inv).conj();
            let conj: Vector = xi.data.column(s).map(|z| z.conj());
            let v = self.cocycle.pi(inv) * conj * (-phase);
            let mut col = out.data.column_mut(inv);
            col += v;
        }
        out
    }

    /// `⟨ξ, η⟩_ℋ`, antilinear in `ξ`.
    pub fn inner(&self, xi: &BimoduleVector, eta: &BimoduleVector) -> Complex64 {
        xi.data.iter().zip(eta.data.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `‖∂(ab) − (∂a)b − a(∂b)‖`.
    pub fn leibniz_residual(&self, a: &Element, b: &Element) -> f64 {
        let ab = a.product(b).expect("same model");
        let lhs = self.apply(&ab);
        let rhs = &self.right_action(&self.apply(a), b) + &self.left_action(a, &self.apply(b));
        (&lhs - &rhs).norm()
    }

    fn c_scale(&self) -> f64 {
        (0..self.size()).map(|s| self.cocycle.c(s).norm()).fold(1.0_f64, f64::max)
    }
}

/// `Γ[a]` as a density `h` with `Γ[a](b) = τ(hb)`.
#[derive(Clone, Debug)]
pub struct CdCFunctional {
    density: Element,
}

impl CdCFunctional {
    pub fn density(&self) -> &Element {
        &self.density
    }

    pub fn evaluate(&self, b: &Element) -> Complex64 {
        self.density.product(b).expect("same model").trace()
    }

    /// `Γ[a](1)`.
    pub fn mass(&self) -> f64 {
        self.density.trace().re
    }
}

fn from_basis_values(model: &Arc<Model>, values: Vector) -> Result<CdCFunctional> {
    let h = model.density_from_values(&values)?;
    Ok(CdCFunctional { density: Element::from_parts(model, h) })
}

/// Self-adjoint parts `(b + b*)/2` and `(b − b*)/2i` of a basis element.
fn hermitian_parts(b: &Element) -> (Element, Element) {
    let bs = b.adjoint();
    let re = &(b + &bs) * 0.5;
    let im = &(b - &bs) * Complex64::new(0.0, -0.5);
    (re, im)
}

/// `½(E(a, ab*) + E(ab*, a) − E(b*, a*a))`, evaluated on the self-adjoint
/// parts of each basis element and extended linearly.
pub fn gamma(gen: &DirichletGenerator, a: &Element) -> Result<CdCFunctional> {
    let model = gen.model();
    let a_star_a = a.adjoint().product(a)?;
    let eval = |b: &Element| -> Result<Complex64> {
        let ab = a.product(b)?;
        Ok((gen.energy_bilinear(a, &ab) + gen.energy_bilinear(&ab, a) - gen.energy_bilinear(b, &a_star_a)) * 0.5)
    };
    let mut values = Vector::zeros(model.dim());
    for j in 0..model.dim() {
        let (re, im) = hermitian_parts(&Element::basis(model, j));
        values[j] = eval(&re)? + Complex64::new(0.0, 1.0) * eval(&im)?;
    }
    from_basis_values(model, values)
}

/// `Γ[a](b) = ⟨∂a, (∂a)·b⟩_ℋ`.
pub fn gamma_via_derivation(der: &Derivation, a: &Element) -> Result<CdCFunctional> {
    let model = der.model();
    let da = der.apply(a);
    let values = Vector::from_iterator(
        model.dim(),
        (0..model.dim()).map(|j| der.inner(&da, &der.right_action(&da, &Element::basis(model, j)))),
    );
    from_basis_values(model, values)
}

/// `G(Γ[g]) = (I + L)⁻¹h_Γ`.
pub fn potential_of_gamma(gen: &DirichletGenerator, g: &Element) -> Result<Potential> {
    let h = gamma(gen, g)?.density;
    Ok(Potential::from_parts(gen.solve_one_plus(&h), h))
}

/// With `g = (I + L)⁻¹h`: `G(Γ[g]) = ½[(I + L)⁻¹(hg + gh − g²) − g²]`.
pub fn closed_form_gamma_potential(gen: &DirichletGenerator, h: &Element) -> Result<Potential> {
    if !h.is_real() {
        return Err(Error::NotReal { defect: h.real_defect() });
    }
    let g = gen.solve_one_plus(h);
    let hg = h.product(&g)?;
    let gh = g.product(h)?;
    let g2 = g.product(&g)?;
    let inner = gen.solve_one_plus(&(&(&hg + &gh) - &g2));
    let vector = &(&inner - &g2) * 0.5;
    let density = gen.one_plus(&vector);
    Ok(Potential::from_parts(vector, density))
}

/// Cross-route agreement, norm identity and positivity of `Γ` on random inputs.
pub fn check_gamma(gen: &DirichletGenerator, der: &Derivation, trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let model = gen.model();
    let rows = par_trials(seed, trials, |rng, _| -> Result<(f64, f64, f64)> {
        let a = sampling::random_element(model, rng);
        let g1 = gamma(gen, &a)?;
        let g2 = gamma_via_derivation(der, &a)?;
        let cross = (g1.density() - g2.density()).norm2();
        let e = gen.energy(&a);
        let norm = (g1.mass() - e).abs() / e.max(1.0);
        let psd = -g1.density().real_part().min_eigenvalue()?;
        Ok((cross, norm, psd))
    });
    let mut cross = Vec::with_capacity(trials);
    let mut norm = Vec::with_capacity(trials);
    let mut psd = Vec::with_capacity(trials);
    for r in rows {
        let (c, n, p) = r?;
        cross.push(c);
        norm.push(n);
        psd.push(p);
    }
    Ok(vec![
        CheckReport::from_excess("gamma_cross_route", seed, 1e-9, &cross),
        CheckReport::from_excess("gamma_norm_identity", seed, 1e-10, &norm),
        CheckReport::from_excess("gamma_positivity", seed, VIOLATION_TOL, &psd),
    ])
}

/// Leibniz residuals on random pairs, relative to `max(1, ‖a‖₂‖b‖₂·max‖c‖)`.
pub fn check_leibniz(der: &Derivation, trials: usize, seed: u64) -> CheckReport {
    let model = der.model();
    let cs = der.c_scale();
    let excess = par_trials(seed, trials, |rng, _| {
        let a = sampling::random_element(model, rng);
        let b = sampling::random_element(model, rng);
        der.leibniz_residual(&a, &b) / (a.norm2() * b.norm2() * cs).max(1.0)
    });
    CheckReport::from_excess("leibniz", seed, 1e-10, &excess)
}

/// `∂(a*) = 𝒥∂a` and `‖𝒥ξ‖ = ‖ξ‖`.
pub fn check_symmetry(der: &Derivation, trials: usize, seed: u64) -> CheckReport {
    let model = der.model();
    let excess = par_trials(seed, trials, |rng, _| {
        let a = sampling::random_element(model, rng);
        let da = der.apply(&a);
        let j = der.symmetry(&da);
        let r1 = (&der.apply(&a.adjoint()) - &j).norm();
        let r2 = (j.norm() - da.norm()).abs();
        r1.max(r2) / da.norm().max(1.0)
    });
    CheckReport::from_excess("bimodule_symmetry", seed, 1e-12, &excess)
}

/// For a bounded potential `G`, with `ω_G(b) = ⟨G, b⟩_F`:
/// `|ω_G(b*c)|² ≤ ω_G(b*b)ω_G(c*c)`, `|⟨G, Gb⟩_F| ≤ ‖G‖‖G‖_F‖b‖_F`,
/// and `Γ[G](b) ≤ 2‖G‖‖G‖_F‖b‖_F` for positive `b`.
pub fn gamma_bound_check(gen: &DirichletGenerator, g: &Potential, trials: usize, seed: u64) -> Result<CheckReport> {
    let model = gen.model();
    let gv = g.vector();
    let g_norm = g.operator_norm();
    let g_f = gen.graph_norm(gv);
    let cdc = gamma(gen, gv)?;
    let omega_g = |x: &Element| gen.graph_inner(gv, x);
    let rows = par_trials(seed, trials, |rng, i| -> Result<f64> {
        let b = sampling::random_element(model, rng);
        let c = sampling::random_element(model, rng);
        let bc = omega_g(&b.adjoint().product(&c)?).norm_sqr();
        let bb = omega_g(&b.adjoint().product(&b)?).re;
        let cc = omega_g(&c.adjoint().product(&c)?).re;
        let cs = (bc - bb * cc) / (bb * cc).max(1.0);
        let step = omega_g(&gv.product(&b)?).norm() - g_norm * g_f * gen.graph_norm(&b);
        let p = sampling::random_positive_mixed(model, rng, i);
        let gamma_excess = cdc.evaluate(&p).re - 2.0 * g_norm * g_f * gen.graph_norm(&p);
        Ok(cs.max(step).max(gamma_excess))
    });
    let excess = rows.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(CheckReport::from_excess("gamma_bound", seed, VIOLATION_TOL, &excess))
}

/// `G(Γ[(I + L)⁻¹h])` against the closed form on random positive `h`.
pub fn check_closed_form(gen: &DirichletGenerator, trials: usize, seed: u64) -> Result<CheckReport> {
    let model = gen.model();
    let rows = par_trials(seed, trials, |rng, i| -> Result<f64> {
        let h = sampling::random_positive_mixed(model, rng, i);
        let g = gen.solve_one_plus(&h);
        let direct = potential_of_gamma(gen, &g)?;
        let closed = closed_form_gamma_potential(gen, &h)?;
        Ok((direct.vector() - closed.vector()).norm2())
    });
    let excess = rows.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(CheckReport::from_excess("gamma_closed_form", seed, 1e-9, &excess))
}

/// Riesz consistency `Γ[g](b) = ⟨G(Γ[g]), b⟩_F` on the basis.
pub fn gamma_riesz_residual(gen: &DirichletGenerator, g: &Element) -> Result<f64> {
    let model = gen.model();
    let cdc = gamma(gen, g)?;
    let pot = gen.solve_one_plus(cdc.density());
    let scale = cdc.density().norm2().max(1.0);
    Ok((0..model.dim())
        .map(|j| {
            let b = Element::basis(model, j);
            (cdc.evaluate(&b) - gen.graph_inner(&pot, &b)).norm() / scale
        })
        .fold(0.0, f64::max))
}

/// `Γ[c·1]` vanishes for every scalar `c`.
pub fn gamma_of_scalar_vanishes(gen: &DirichletGenerator, c: Complex64) -> Result<bool> {
    let x = Element::scalar(gen.model(), c * ONE);
    Ok(gamma(gen, &x)?.density().norm2() < 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_generator, build_twisted_group_algebra, coboundary_length, sine2_length, GroupSpec};
    use crate::report::trial_rng;
    use approx::assert_abs_diff_eq;

    fn setup(spec: GroupSpec, weights: &[f64], sine: bool) -> (DirichletGenerator, Derivation) {
        let model = build_twisted_group_algebra(&spec).unwrap();
        let (ell, cocycle) = if sine { sine2_length(&spec, weights).unwrap() } else { coboundary_length(&spec, weights).unwrap() };
        let gen = build_generator(&model, &ell).unwrap();
        let der = Derivation::new(&model, cocycle).unwrap();
        (gen, der)
    }

    fn z4() -> (DirichletGenerator, Derivation) {
        setup(GroupSpec::untwisted(vec![4]).unwrap(), &[0.0, 1.0, 0.0, 0.0], false)
    }

    fn torus() -> (DirichletGenerator, Derivation) {
        setup(GroupSpec::torus(5, 1).unwrap(), &[1.0, 1.0], true)
    }

    fn z2() -> (DirichletGenerator, Derivation) {
        setup(GroupSpec::untwisted(vec![2]).unwrap(), &[0.0, 1.0], false)
    }

    #[test]
    fn derivation_norms_match_energy() {
        let (gen, der) = torus();
        let model = gen.model();
        assert!(der.apply(&Element::one(model)).norm() < 1e-14);
        let ell = sine2_length(&GroupSpec::torus(5, 1).unwrap(), &[1.0, 1.0]).unwrap().0;
        for s in 0..model.dim() {
            assert_abs_diff_eq!(der.apply(&Element::basis(model, s)).norm().powi(2), ell.values[s], epsilon = 1e-12);
        }
        let mut rng = trial_rng(1, 0);
        for _ in 0..20 {
            let a = sampling::random_element(model, &mut rng);
            let e = gen.energy(&a);
            assert!((der.apply(&a).norm().powi(2) - e).abs() <= 1e-11 * e.max(1.0));
        }
    }

    #[test]
    fn leibniz_and_symmetry() {
        for (gen, der) in [z4(), torus()] {
            let model = gen.model();
            let one = Element::one(model);
            let mut rng = trial_rng(2, 0);
            let a = sampling::random_element(model, &mut rng);
            assert!(der.leibniz_residual(&one, &a) < 1e-12);
            for s in 0..model.dim() {
                for t in 0..model.dim() {
                    let r = der.leibniz_residual(&Element::basis(model, s), &Element::basis(model, t));
                    assert!(r < 1e-12, "{s} {t} {r}");
                }
            }
            assert!(check_leibniz(&der, 200, 3).pass);
            assert!(check_symmetry(&der, 200, 3).pass);
        }
    }

    #[test]
    fn actions_commute_and_symmetry_reverses_them() {
        let (gen, der) = torus();
        let model = gen.model();
        let mut rng = trial_rng(4, 0);
        let a = sampling::random_element(model, &mut rng);
        let b = sampling::random_element(model, &mut rng);
        let xi = der.apply(&sampling::random_element(model, &mut rng));
        let left_first = der.right_action(&der.left_action(&a, &xi), &b);
        let right_first = der.left_action(&a, &der.right_action(&xi, &b));
        assert!((&left_first - &right_first).norm() < 1e-11);
        let lhs = der.symmetry(&left_first);
        let rhs = der.right_action(&der.left_action(&b.adjoint(), &der.symmetry(&xi)), &a.adjoint());
        assert!((&lhs - &rhs).norm() < 1e-11);
    }

    #[test]
    fn gamma_routes_agree() {
        for (gen, der) in [z4(), torus()] {
            let model = gen.model();
            assert!(gamma(&gen, &Element::one(model)).unwrap().density().norm2() < 1e-13);
            for s in 0..model.dim() {
                let b = Element::basis(model, s);
                let d = (gamma(&gen, &b).unwrap().density() - gamma_via_derivation(&der, &b).unwrap().density()).norm2();
                assert!(d < 1e-12);
            }
            let mut rng = trial_rng(5, 0);
            let a = sampling::random_element(model, &mut rng);
            let c = Complex64::new(0.3, -1.2);
            let scaled = gamma(&gen, &(&a * c)).unwrap();
            let base = gamma(&gen, &a).unwrap();
            assert!((scaled.density() - &(base.density() * c.norm_sqr())).norm2() < 1e-11);
            for r in check_gamma(&gen, &der, 100, 6).unwrap() {
                assert!(r.pass, "{r:?}");
            }
            assert!(gamma_of_scalar_vanishes(&gen, c).unwrap());
        }
    }

    #[test]
    fn derivation_route_is_positive_on_positive_b() {
        let (gen, der) = torus();
        let model = gen.model();
        let mut rng = trial_rng(7, 0);
        let a = sampling::random_element(model, &mut rng);
        let da = der.apply(&a);
        for _ in 0..50 {
            let p = sampling::random_positive(model, &mut rng);
            assert!(der.inner(&da, &der.right_action(&da, &p)).re >= -1e-12);
        }
    }

    /// Brute-force normalization on ℤ₂: evaluates `Γ[g]` from the form and
    /// compares it with candidate potentials for `g = (I + L)⁻¹h`.
    #[test]
    fn closed_form_normalization_oracle() {
        let (gen, _) = z2();
        let model = gen.model();
        // ℓ = [0, 4] on ℤ₂
        assert_abs_diff_eq!(gen.energy(&Element::basis(model, 1)), 4.0, epsilon = 1e-14);
        let h = &Element::one(model) + &(&Element::basis(model, 1) * 0.5);
        assert!(h.min_eigenvalue().unwrap() > 0.0);
        let g = gen.solve_one_plus(&h);
        let target = potential_of_gamma(&gen, &g).unwrap();
        // direct evaluation of the functional on both basis elements
        let cdc = gamma(&gen, &g).unwrap();
        for j in 0..2 {
            let b = Element::basis(model, j);
            assert!((cdc.evaluate(&b) - gen.graph_inner(target.vector(), &b)).norm() < 1e-13);
        }
        let hg = h.product(&g).unwrap();
        let gh = g.product(&h).unwrap();
        let g2 = g.product(&g).unwrap();
        let literal = &gen.solve_one_plus(&(&hg + &gh)) - &g2;
        let half_literal = &literal * 0.5;
        let corrected = closed_form_gamma_potential(&gen, &h).unwrap();
        assert!((&literal - target.vector()).norm2() > 1e-2);
        assert!((&half_literal - target.vector()).norm2() > 1e-2);
        assert!((corrected.vector() - target.vector()).norm2() < 1e-13);
        // h = 1 gives g = 1 and Γ[1] = 0
        let unit = closed_form_gamma_potential(&gen, &Element::one(model)).unwrap();
        assert!(unit.vector().norm2() < 1e-14);
        assert!(closed_form_gamma_potential(&gen, &Element::zero(model)).unwrap().vector().norm2() == 0.0);
    }

    #[test]
    fn closed_form_on_shipped_models() {
        for (gen, _) in [z4(), torus()] {
            let r = check_closed_form(&gen, 100, 8).unwrap();
            assert!(r.pass, "{r:?}");
            let mut rng = trial_rng(9, 0);
            let h = sampling::random_positive(gen.model(), &mut rng);
            let p = closed_form_gamma_potential(&gen, &h).unwrap();
            assert!(p.vector().is_real());
            assert!(crate::potential::is_potential(&gen, p.vector()).is_potential);
            assert!(gamma_riesz_residual(&gen, &gen.solve_one_plus(&h)).unwrap() < 1e-11);
        }
    }

    #[test]
    fn gamma_bound_on_potentials() {
        for (gen, _) in [z4(), torus()] {
            let mut rng = trial_rng(10, 0);
            let h = sampling::random_positive(gen.model(), &mut rng);
            let g = Potential::new(&gen, gen.solve_one_plus(&h)).unwrap();
            let r = gamma_bound_check(&gen, &g, 200, 11).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn missing_group_is_rejected() {
        let (gen, der) = z4();
        let big = gen.model().ampliate(2).unwrap();
        assert!(matches!(Derivation::new(&big, der.cocycle().clone()), Err(Error::NotGroupModel)));
    }
}
