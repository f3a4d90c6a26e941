//! Finite-energy functionals, potentials and energy contents.
//!
//! Every positive functional is normal at finite dimension, so it is stored as
//! a positive density `h` with `ω(b) = τ(hb)`. Its potential is the Riesz
//! representative in the graph inner product, `G(ω) = (I + L)⁻¹h`, and a
//! vector is a potential exactly when `(I + L)x` is positive.

use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{Element, Model, Vector, ONE};
use crate::dirichlet::DirichletGenerator;
use crate::error::{Error, Result};
use crate::models::LengthFunction;
use crate::report::{par_trials, CheckReport, VIOLATION_TOL};
use crate::sampling;

/// Tolerance on the smallest eigenvalue of a density.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Default grids; all overridable from the command line.
pub const DEFAULT_T_GRID: [f64; 6] = [1e-6, 1e-4, 1e-2, 0.1, 1.0, 10.0];
pub const DEFAULT_EPS_GRID: [f64; 6] = [1e-6, 1e-4, 1e-2, 0.1, 0.5, 0.9];

/// A positive functional `ω(b) = τ(hb)`.
#[derive(Clone, Debug)]
pub struct FiniteEnergyFunctional {
    density: Element,
    pd_coeffs: Option<Vec<Complex64>>,
}

impl FiniteEnergyFunctional {
    /// Rejects densities that are not J-real or have an eigenvalue below `−1e−10·max(1, ‖h‖)`.
    pub fn from_density(density: Element) -> Result<Self> {
        let min_eigenvalue = density.min_eigenvalue()?;
        if min_eigenvalue < -POSITIVITY_TOL * density.operator_norm().max(1.0) {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        let pd_coeffs = coefficient_function(&density);
        Ok(Self { density, pd_coeffs })
    }

    /// The functional with values `ω(b_i) = φ(i)` on the basis.
    pub fn from_pd_coeffs(model: &Arc<Model>, phi: &[Complex64]) -> Result<Self> {
        if phi.len() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: phi.len() });
        }
        let h = model.density_from_values(&Vector::from_column_slice(phi))?;
        Self::from_density(Element::from_parts(model, h))
    }

    /// The trace itself, `h = 1`.
    pub fn trace(model: &Arc<Model>) -> Self {
        Self::from_density(Element::one(model)).expect("the unit is positive")
    }

    pub fn zero(model: &Arc<Model>) -> Self {
        Self::from_density(Element::zero(model)).expect("zero is positive")
    }

    /// The state `λ_s ↦ 1` of an untwisted group algebra.
    pub fn trivial_character(model: &Arc<Model>) -> Result<Self> {
        let group = model.group().ok_or(Error::NotGroupModel)?;
        if group.spec().twist.is_some() {
            return Err(Error::InvalidParameter("the trivial character is not a state of a twisted algebra".into()));
        }
        Self::from_pd_coeffs(model, &vec![ONE; model.dim()])
    }

    pub fn density(&self) -> &Element {
        &self.density
    }

    pub fn model(&self) -> &Arc<Model> {
        self.density.model()
    }

    /// `φ_ω(s) = ω(λ_s)` for group models.
    pub fn pd_coeffs(&self) -> Option<&[Complex64]> {
        self.pd_coeffs.as_deref()
    }

    pub fn evaluate(&self, b: &Element) -> Complex64 {
        self.density.product(b).expect("same model").trace()
    }

    /// `ω(1) = τ(h)`.
    pub fn mass(&self) -> f64 {
        self.density.trace().re
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_density(&self.density * c)
    }
}

fn coefficient_function(h: &Element) -> Option<Vec<Complex64>> {
    let model = h.model();
    model.group()?;
    Some((0..model.dim()).map(|s| h.product(&Element::basis(model, s)).expect("same model").trace()).collect())
}

/// A potential `G` together with its density certificate `(I + L)G`.
#[derive(Clone, Debug)]
pub struct Potential {
    vector: Element,
    density: Element,
}

impl Potential {
    /// Wraps `x` after confirming that `(I + L)x` is positive.
    pub fn new(gen: &DirichletGenerator, x: Element) -> Result<Self> {
        let cert = is_potential(gen, &x);
        if !cert.is_potential {
            return Err(Error::NotPositive { min_eigenvalue: cert.min_eigenvalue });
        }
        let density = gen.one_plus(&x);
        Ok(Self { vector: x, density })
    }

    pub(crate) fn from_parts(vector: Element, density: Element) -> Self {
        Self { vector, density }
    }

    pub fn vector(&self) -> &Element {
        &self.vector
    }

    pub fn density(&self) -> &Element {
        &self.density
    }

    pub fn operator_norm(&self) -> f64 {
        self.vector.operator_norm()
    }
}

/// `G(ω) = (I + L)⁻¹h`.
pub fn potential_of(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional) -> Potential {
    Potential::from_parts(gen.solve_one_plus(omega.density()), omega.density().clone())
}

/// `E[ω] = ω(G(ω))`.
pub fn energy_content(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional) -> f64 {
    omega.evaluate(potential_of(gen, omega).vector()).re
}

/// The same quantity evaluated as `‖G(ω)‖_F²`.
pub fn energy_content_graph(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional) -> f64 {
    gen.graph_norm(potential_of(gen, omega).vector()).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialCertificate {
    pub is_potential: bool,
    /// Smallest eigenvalue of `(I + L)x` (of its real part when `x` is not J-real).
    pub min_eigenvalue: f64,
    pub real_defect: f64,
}

/// Whether `(I + L)x ≥ −1e−9`.
pub fn is_potential(gen: &DirichletGenerator, x: &Element) -> PotentialCertificate {
    let h = gen.one_plus(x);
    let real_defect = h.real_defect();
    let real = h.is_real();
    let min_eigenvalue = h.real_part().min_eigenvalue().expect("real part is J-real");
    PotentialCertificate { is_potential: real && min_eigenvalue >= -VIOLATION_TOL, min_eigenvalue, real_defect }
}

/// `ω(b) = ⟨G(ω), b⟩_F` on every basis element, relative residual.
pub fn check_riesz(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional) -> CheckReport {
    let model = gen.model();
    let g = potential_of(gen, omega);
    let scale = omega.density().norm2().max(1.0);
    let excess: Vec<f64> = (0..model.dim())
        .map(|j| {
            let b = Element::basis(model, j);
            (omega.evaluate(&b) - gen.graph_inner(g.vector(), &b)).norm() / scale
        })
        .collect();
    CheckReport::from_excess("riesz", 0, 1e-11, &excess)
}

/// `|ω(b)| ≤ √E[ω]·‖b‖_F` on random `b`.
pub fn check_energy_bound(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional, trials: usize, seed: u64) -> CheckReport {
    let e = energy_content(gen, omega).max(0.0).sqrt();
    let model = gen.model();
    let excess = par_trials(seed, trials, |rng, _| {
        let b = sampling::random_element(model, rng);
        omega.evaluate(&b).norm() - e * gen.graph_norm(&b)
    });
    CheckReport::from_excess("energy_bound", seed, VIOLATION_TOL, &excess)
}

/// Potentials of random positive densities are positive operators.
pub fn check_positivity_of_potentials(gen: &DirichletGenerator, trials: usize, seed: u64) -> CheckReport {
    let model = gen.model();
    let excess = par_trials(seed, trials, |rng, i| {
        let h = sampling::random_positive_mixed(model, rng, i);
        match gen.solve_one_plus(&h).real_part().min_eigenvalue() {
            Ok(m) => -m,
            Err(_) => f64::NAN,
        }
    });
    CheckReport::from_excess("potential_positivity", seed, VIOLATION_TOL, &excess)
}

/// For `h' ≤ h`: `G(ω) − G(ω') ≥ 0` and `E[ω'] ≤ E[ω]`.
pub fn check_domination(
    gen: &DirichletGenerator,
    small: &FiniteEnergyFunctional,
    big: &FiniteEnergyFunctional,
) -> Result<CheckReport> {
    let gap = big.density() - small.density();
    let m = gap.min_eigenvalue()?;
    if m < -POSITIVITY_TOL * big.density().operator_norm().max(1.0) {
        return Err(Error::Precondition(format!("functionals are not ordered (min eigenvalue {m:.3e})")));
    }
    let g_gap = potential_of(gen, big).vector() - potential_of(gen, small).vector();
    let order = -g_gap.real_part().min_eigenvalue()?;
    let energy = energy_content(gen, small) - energy_content(gen, big);
    Ok(CheckReport::from_excess("domination", 0, VIOLATION_TOL, &[order, energy]))
}

/// Worst normalized violation of `e^{−t(1+L)}x ≤ x` and `(I + εL)⁻¹x ≤ (1 − ε)⁻¹x`.
///
/// Differences are divided by `t` and `ε`, which keeps small grid points
/// informative; the result is relative to `‖x‖ + ‖(I + L)x‖`.
pub fn domination_violation(gen: &DirichletGenerator, x: &Element, ts: &[f64], epss: &[f64]) -> Result<f64> {
    let scale = (x.operator_norm() + gen.one_plus(x).operator_norm()).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for &t in ts {
        let s = gen.semigroup(t, x)?;
        let d = &(x - &(&s * (-t).exp())) * (1.0 / t);
        worst = worst.max(operator_violation(&d)? / scale);
    }
    for &e in epss {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::InvalidParameter(format!("resolvent grid points must lie in (0, 1), got {e}")));
        }
        let r = gen.resolvent(e, x)?;
        let d = &(&(x * (1.0 / (1.0 - e))) - &r) * (1.0 / e);
        worst = worst.max(operator_violation(&d)? / scale);
    }
    Ok(worst)
}

fn operator_violation(d: &Element) -> Result<f64> {
    if !d.is_real() {
        return Ok(f64::INFINITY);
    }
    Ok((-d.min_eigenvalue()?).max(0.0))
}

/// Relative tolerance for [`domination_violation`].
pub const DOMINATION_TOL: f64 = 1e-7;

/// Semigroup and resolvent domination for a single potential.
pub fn check_semigroup_domination(gen: &DirichletGenerator, g: &Potential, ts: &[f64], epss: &[f64]) -> Result<CheckReport> {
    let v = domination_violation(gen, g.vector(), ts, epss)?;
    Ok(CheckReport::from_excess("semigroup_domination", 0, DOMINATION_TOL, &[v]))
}

/// Agreement of [`is_potential`] with the domination criteria on random
/// potentials and non-potentials; the violation is the number of disagreements.
pub fn check_potential_characterization(
    gen: &DirichletGenerator,
    trials: usize,
    seed: u64,
    ts: &[f64],
    epss: &[f64],
) -> Result<CheckReport> {
    let model = gen.model();
    let rows = par_trials(seed, trials, |rng, i| -> Result<(bool, bool)> {
        let h = if i % 2 == 0 {
            sampling::random_positive_mixed(model, rng, i / 2)
        } else {
            non_positive_density(model, rng)
        };
        let x = gen.solve_one_plus(&h);
        let cert = is_potential(gen, &x);
        let dominated = domination_violation(gen, &x, ts, epss)? <= DOMINATION_TOL;
        Ok((cert.is_potential, dominated))
    });
    let mut disagreements = 0usize;
    let mut potentials = 0usize;
    for r in rows {
        let (p, d) = r?;
        potentials += p as usize;
        disagreements += (p != d) as usize;
    }
    let mut report = CheckReport::from_excess("potential_characterization", seed, 0.0, &[disagreements as f64]);
    report.samples = trials;
    Ok(report.with_metric("potentials", potentials as f64).with_metric("disagreements", disagreements as f64))
}

/// A J-real density whose smallest eigenvalue is at most `−0.05` times its norm.
fn non_positive_density<R: rand::Rng>(model: &Arc<Model>, rng: &mut R) -> Element {
    loop {
        let y = sampling::random_real(model, rng);
        let shift = rng.gen_range(-0.5..0.8);
        let h = &y + &Element::scalar(model, Complex64::new(shift, 0.0));
        let m = h.min_eigenvalue().expect("J-real");
        if m <= -0.05 * h.operator_norm() {
            return h;
        }
    }
}

/// Central-difference check of `d/dt ⟨e^{−t(1+L)}ξ, η⟩₂ = −⟨e^{−t(1+L)}ξ, η⟩_F`.
///
/// The error at `dt` must respect the Taylor bound `M₃dt²/6`, and halving `dt`
/// must shrink it by close to four unless it is already at roundoff level.
pub fn check_derivative_identity(gen: &DirichletGenerator, xi: &Element, eta: &Element, t: f64, dt: f64) -> Result<CheckReport> {
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidParameter("need t ≥ 0 and dt > 0".into()));
    }
    let flow = |s: f64| -> Element { gen.apply_operator(&gen.spectral_operator(|l| (-s * (1.0 + l)).exp()), xi) };
    let f = |s: f64| flow(s).inner(eta).expect("same model");
    let rhs = -gen.graph_inner(&flow(t), eta);
    let err = |h: f64| ((f(t + h) - f(t - h)) / (2.0 * h) - rhs).norm();
    let (e1, e2) = (err(dt), err(dt / 2.0));
    let third = gen.apply_operator(&gen.spectral_operator(|l| (1.0 + l).powi(3) * (-(t - dt) * (1.0 + l)).exp()), xi);
    let m3 = third.norm2() * eta.norm2();
    let floor = 1e-11 * (xi.norm2() * eta.norm2()).max(1.0) / dt;
    let taylor = e1 - (m3 * dt * dt / 6.0 * 1.01 + floor);
    let c = e1 / (dt * dt);
    let halving = e2 - (1.1 * c * (dt / 2.0).powi(2) + floor);
    Ok(CheckReport::from_excess("derivative_identity", 0, 0.0, &[taylor, halving])
        .with_metric("error_dt", e1)
        .with_metric("error_half_dt", e2))
}

/// The functional `b ↦ ω((I + εL)⁻¹b)` has density `(I + εL)⁻¹h ≥ 0` and
/// potential `(I + εL)⁻¹G(ω)`.
pub fn check_resolvent_pushforward(gen: &DirichletGenerator, omega: &FiniteEnergyFunctional, eps: f64) -> Result<CheckReport> {
    let model = gen.model();
    let h_eps = gen.resolvent(eps, omega.density())?;
    let scale = omega.density().operator_norm().max(1.0);
    let mut excess = Vec::with_capacity(model.dim() + 2);
    for j in 0..model.dim() {
        let b = Element::basis(model, j);
        let direct = omega.evaluate(&gen.resolvent(eps, &b)?);
        let via = h_eps.product(&b)?.trace();
        excess.push((direct - via).norm() / scale);
    }
    let positive = h_eps.real_part().min_eigenvalue()? >= -VIOLATION_TOL * scale;
    let g = potential_of(gen, omega);
    let pushed = gen.solve_one_plus(&h_eps);
    excess.push((&pushed - &gen.resolvent(eps, g.vector())?).norm2() / scale);
    Ok(CheckReport::from_excess("resolvent_pushforward", 0, 1e-10, &excess).require(positive))
}

/// `φ_λ(s) = λ/(λ + √ℓ(s))·φ_ω(s)`.
pub fn interpolation_family(omega: &FiniteEnergyFunctional, ell: &LengthFunction, lambda: f64) -> Result<Vec<Complex64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("λ must be positive, got {lambda}")));
    }
    let phi = omega.pd_coeffs().ok_or(Error::NotGroupModel)?;
    if phi.len() != ell.values.len() {
        return Err(Error::DimensionMismatch { expected: phi.len(), found: ell.values.len() });
    }
    Ok(phi.iter().zip(&ell.values).map(|(&p, &l)| p * (lambda / (lambda + l.sqrt()))).collect())
}

/// `φ_λ` is positive definite for every `λ` on the grid, and `|φ_λ − φ_ω|`
/// shrinks pointwise as `λ` grows.
pub fn check_interpolation(omega: &FiniteEnergyFunctional, ell: &LengthFunction, lambdas: &[f64]) -> Result<CheckReport> {
    let phi = omega.pd_coeffs().ok_or(Error::NotGroupModel)?;
    let mut grid = lambdas.to_vec();
    grid.sort_by(f64::total_cmp);
    let scale = omega.mass().max(1.0);
    let mut excess = Vec::with_capacity(grid.len());
    let mut previous: Option<Vec<f64>> = None;
    let mut monotone = true;
    for &l in &grid {
        let fam = interpolation_family(omega, ell, l)?;
        excess.push(-pd_min_eigenvalue(omega.model(), &fam)? / scale);
        let dist: Vec<f64> = fam.iter().zip(phi).map(|(a, b)| (a - b).norm()).collect();
        if let Some(prev) = &previous {
            monotone &= dist.iter().zip(prev).all(|(d, p)| *d <= p + 1e-15);
        }
        previous = Some(dist);
    }
    Ok(CheckReport::from_excess("interpolation_family", 0, VIOLATION_TOL, &excess).require(monotone))
}

/// Smallest eigenvalue of the density whose coefficient function is `phi`;
/// nonnegative exactly when `phi` is positive definite.
pub fn pd_min_eigenvalue(model: &Arc<Model>, phi: &[Complex64]) -> Result<f64> {
    if phi.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: phi.len() });
    }
    let h = model.density_from_values(&Vector::from_column_slice(phi))?;
    Element::from_parts(model, h).min_eigenvalue()
}

/// `(G + δ)^{−1/2}`.
pub fn regularized_inv_sqrt(g: &Element, delta: f64) -> Result<Element> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("δ must be positive, got {delta}")));
    }
    g.functional_calculus(|t| (t + delta).powf(-0.5))
}
