//! Finite-dimensional tracial *-algebras, their GNS spaces, and spectral calculus.
//!
//! A [`Model`] is a *-algebra with a distinguished basis `b_0, …, b_{d-1}`,
//! a faithful trace and a faithful matrix representation. Elements are stored
//! as coefficient vectors over the basis; the same vector is read both as an
//! operator `a ∈ A` and as a GNS vector `ξ ∈ L²(A, τ)`.
//!
//! Sesquilinear forms are antilinear in the first argument:
//! `⟨x, y⟩₂ = τ(x* y)`.
//!
//! Cone operations (positive part, `ξ ∧ 1`) and the functional calculus are
//! computed spectrally in the representation and mapped back to coefficients.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::GroupStructure;

pub type Matrix = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;

/// Sparse linear combination `Σ c · b_k` as `(k, c)` pairs.
pub type Sparse = Vec<(usize, Complex64)>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative tolerance on `‖Jx − x‖₂` for an element to count as J-real.
pub const REALITY_TOL: f64 = 1e-9;

/// Relative residual allowed when mapping a matrix back into the algebra span.
const SPAN_TOL: f64 = 1e-8;

/// Raw data for [`Model::new`].
pub struct ModelParts {
    pub labels: Vec<String>,
    /// `products[i * dim + j]` expands `b_i b_j` in the basis.
    pub products: Vec<Sparse>,
    /// `star[i]` expands `b_i*` in the basis.
    pub star: Vec<Sparse>,
    /// `τ(b_i)`.
    pub trace: Vec<Complex64>,
    pub rep_dim: usize,
    /// One `rep_dim × rep_dim` matrix per basis element.
    pub rep: Vec<Matrix>,
    pub group: Option<GroupStructure>,
}

/// A finite-dimensional tracial *-algebra with a faithful representation.
#[derive(Debug)]
pub struct Model {
    labels: Vec<String>,
    products: Vec<Sparse>,
    star: Vec<Sparse>,
    trace: Vector,
    rep_dim: usize,
    rep: Vec<Matrix>,
    unit: Vector,
    gram: Matrix,
    // gram = chol^H chol, chol upper triangular
    chol: Matrix,
    chol_inv: Matrix,
    to_rep: Matrix,
    from_rep: Matrix,
    pairing_inv: Matrix,
    pairing_cond: f64,
    group: Option<GroupStructure>,
}

impl Model {
    /// Validates the parts and precomputes the Gram and projection data.
    pub fn new(parts: ModelParts) -> Result<Arc<Model>> {
        let model = Self::assemble(parts)?;
        model.verify_representation()?;
        Ok(Arc::new(model))
    }

    /// Builds a model from representation matrices alone; the product table and
    /// involution are recovered by projecting matrix products back onto the span.
    pub fn from_representation(
        labels: Vec<String>,
        rep: Vec<Matrix>,
        trace: Vec<Complex64>,
    ) -> Result<Arc<Model>> {
        let dim = rep.len();
        if dim == 0 {
            return Err(Error::InvalidModel("empty basis".into()));
        }
        let rep_dim = rep[0].nrows();
        let (to_rep, from_rep) = projection_data(&rep, rep_dim)?;
        let project = |m: &Matrix| -> Result<Sparse> {
            let v = matrix_to_vec(m);
            let c = &from_rep * &v;
            let residual = (&to_rep * &c - &v).norm();
            if residual > SPAN_TOL * v.norm().max(1.0) {
                return Err(Error::InvalidModel(format!(
                    "representation span is not closed (residual {residual:.3e})"
                )));
            }
            Ok(sparsify(&c))
        };
        let mut products = Vec::with_capacity(dim * dim);
        for a in &rep {
            for b in &rep {
                products.push(project(&(a * b))?);
            }
        }
        let star = rep.iter().map(|a| project(&a.adjoint())).collect::<Result<_>>()?;
        Self::new(ModelParts { labels, products, star, trace, rep_dim, rep, group: None })
    }

    fn assemble(parts: ModelParts) -> Result<Model> {
        let ModelParts { labels, products, star, trace, rep_dim, rep, group } = parts;
        let dim = labels.len();
        if dim == 0 {
            return Err(Error::InvalidModel("empty basis".into()));
        }
        for (name, len, want) in [
            ("products", products.len(), dim * dim),
            ("star", star.len(), dim),
            ("trace", trace.len(), dim),
            ("rep", rep.len(), dim),
        ] {
            if len != want {
                return Err(Error::InvalidModel(format!("{name}: expected {want} entries, found {len}")));
            }
        }
        if rep.iter().any(|m| m.nrows() != rep_dim || m.ncols() != rep_dim) {
            return Err(Error::InvalidModel("representation matrices must be rep_dim × rep_dim".into()));
        }
        let (to_rep, from_rep) = projection_data(&rep, rep_dim)?;
        let trace = Vector::from_vec(trace);

        let mut model = Model {
            labels,
            products,
            star,
            trace,
            rep_dim,
            rep,
            unit: Vector::zeros(dim),
            gram: Matrix::zeros(dim, dim),
            chol: Matrix::zeros(dim, dim),
            chol_inv: Matrix::zeros(dim, dim),
            to_rep,
            from_rep,
            pairing_inv: Matrix::zeros(dim, dim),
            pairing_cond: f64::INFINITY,
            group,
        };

        let identity = Matrix::identity(rep_dim, rep_dim);
        let (unit, residual) = model.project_matrix(&identity);
        if residual > SPAN_TOL * identity.norm() {
            return Err(Error::InvalidModel("the algebra has no unit".into()));
        }
        model.unit = unit;

        // tp[i * dim + j] = τ(b_i b_j)
        let tp: Vec<Complex64> = model
            .products
            .iter()
            .map(|s| s.iter().map(|&(r, c)| c * model.trace[r]).sum())
            .collect();
        let tscale = tp.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        for i in 0..dim {
            for j in 0..i {
                let d = (tp[i * dim + j] - tp[j * dim + i]).norm();
                if d > 1e-10 * tscale {
                    return Err(Error::InvalidModel(format!("trace is not tracial on b_{i}, b_{j} (defect {d:.3e})")));
                }
            }
        }
        let mut gram = Matrix::zeros(dim, dim);
        let mut pairing = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                gram[(i, j)] = model.star[i].iter().map(|&(k, c)| c * tp[k * dim + j]).sum();
                // τ(h b_j) = (pairing · h)_j
                pairing[(j, i)] = tp[i * dim + j];
            }
        }
        let gram = hermitize(&gram);
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidModel("trace is not faithful (Gram matrix not positive definite)".into()))?
            .l()
            .adjoint();
        let chol_inv = chol
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("singular Gram factor".into()))?;
        model.gram = gram;
        model.chol = chol;
        model.chol_inv = chol_inv;

        let sv = pairing.clone().svd(false, false).singular_values;
        let (smax, smin) = sv.iter().fold((0.0_f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
        model.pairing_cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        model.pairing_inv = pairing.try_inverse().unwrap_or_else(|| Matrix::zeros(dim, dim));

        let tau_one = model.trace_of(&model.unit);
        if !(tau_one.re > 0.0 && tau_one.re.is_finite()) || tau_one.im.abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("τ(1) = {tau_one} is not finite and positive")));
        }
        Ok(model)
    }

    /// Checks that the product table and involution agree with the representation.
    pub fn verify_representation(&self) -> Result<()> {
        let dim = self.dim();
        let scale = self.rep.iter().map(|m| m.norm()).fold(1.0_f64, f64::max);
        for i in 0..dim {
            for j in 0..dim {
                let mut expected = &self.rep[i] * &self.rep[j];
                for &(k, c) in &self.products[i * dim + j] {
                    expected -= &self.rep[k] * c;
                }
                let r = expected.norm();
                if r > 1e-9 * scale * scale {
                    return Err(Error::InvalidModel(format!(
                        "product b_{i} b_{j} disagrees with the representation (residual {r:.3e})"
                    )));
                }
            }
            let mut adj = self.rep[i].adjoint();
            for &(k, c) in &self.star[i] {
                adj -= &self.rep[k] * c;
            }
            if adj.norm() > 1e-9 * scale {
                return Err(Error::InvalidModel(format!("involution of b_{i} disagrees with the representation")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rep_dim(&self) -> usize {
        self.rep_dim
    }

    pub fn rep_matrices(&self) -> &[Matrix] {
        &self.rep
    }

    /// `τ(b_i)` for each basis element.
    pub fn trace_vector(&self) -> &Vector {
        &self.trace
    }

    pub fn products(&self) -> &[Sparse] {
        &self.products
    }

    pub fn star_table(&self) -> &[Sparse] {
        &self.star
    }

    /// `τ(b_i* b_j)`.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn group(&self) -> Option<&GroupStructure> {
        self.group.as_ref()
    }

    /// Condition number of the pairing `(i, j) ↦ τ(b_i b_j)` used for Riesz recovery.
    pub fn pairing_condition(&self) -> f64 {
        self.pairing_cond
    }

    /// Solves `τ(h b_j) = values_j` for the density `h`.
    pub(crate) fn density_from_values(&self, values: &Vector) -> Result<Vector> {
        if self.pairing_cond > 1e8 {
            return Err(Error::IllConditioned(self.pairing_cond));
        }
        Ok(&self.pairing_inv * values)
    }

    pub(crate) fn trace_of(&self, x: &Vector) -> Complex64 {
        self.trace.iter().zip(x.iter()).map(|(t, c)| t * c).sum()
    }

    pub(crate) fn product_coeffs(&self, x: &Vector, y: &Vector) -> Vector {
        let dim = self.dim();
        let mut out = Vector::zeros(dim);
        for (i, &xi) in x.iter().enumerate() {
            if xi == ZERO {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                if yj == ZERO {
                    continue;
                }
                let w = xi * yj;
                for &(k, c) in &self.products[i * dim + j] {
                    out[k] += w * c;
                }
            }
        }
        out
    }

    pub(crate) fn star_coeffs(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for (i, &xi) in x.iter().enumerate() {
            if xi == ZERO {
                continue;
            }
            let xc = xi.conj();
            for &(k, c) in &self.star[i] {
                out[k] += xc * c;
            }
        }
        out
    }

    pub(crate) fn inner_coeffs(&self, x: &Vector, y: &Vector) -> Complex64 {
        (x.adjoint() * &self.gram * y)[(0, 0)]
    }

    /// Coordinates in a `⟨·,·⟩₂`-orthonormal frame.
    pub(crate) fn to_orthonormal(&self, x: &Vector) -> Vector {
        &self.chol * x
    }

    /// Conjugates a coefficient-space operator into the orthonormal frame.
    pub(crate) fn operator_to_orthonormal(&self, op: &Matrix) -> Matrix {
        &self.chol * op * &self.chol_inv
    }

    pub(crate) fn operator_from_orthonormal(&self, op: &Matrix) -> Matrix {
        &self.chol_inv * op * &self.chol
    }

    pub(crate) fn coeffs_to_matrix(&self, x: &Vector) -> Matrix {
        let v = &self.to_rep * x;
        Matrix::from_column_slice(self.rep_dim, self.rep_dim, v.as_slice())
    }

    /// Least-squares coefficients of `m` and the relative residual of the fit.
    fn project_matrix(&self, m: &Matrix) -> (Vector, f64) {
        let v = matrix_to_vec(m);
        let c = &self.from_rep * &v;
        let residual = (&self.to_rep * &c - &v).norm();
        (c, residual)
    }

    /// Matrix ampliation `M_n(A)` with trace `τ ⊗ tr_n` (`tr_n` normalized).
    ///
    /// Basis element `b_k ⊗ e_ij` has index `(i n + j) dim + k`.
    pub fn ampliate(&self, n: usize) -> Result<Arc<Model>> {
        if n == 0 {
            return Err(Error::InvalidParameter("ampliation level must be at least 1".into()));
        }
        let dim = self.dim();
        let index = |k: usize, i: usize, j: usize| (i * n + j) * dim + k;
        let big = dim * n * n;
        let mut labels = vec![String::new(); big];
        let mut trace = vec![ZERO; big];
        let mut star = vec![Vec::new(); big];
        let mut rep = vec![Matrix::zeros(0, 0); big];
        let rd = self.rep_dim;
        for i in 0..n {
            for j in 0..n {
                for k in 0..dim {
                    let idx = index(k, i, j);
                    labels[idx] = format!("{}⊗e{}{}", self.labels[k], i, j);
                    if i == j {
                        trace[idx] = self.trace[k] / n as f64;
                    }
                    star[idx] = self.star[k].iter().map(|&(r, c)| (index(r, j, i), c)).collect();
                    let mut m = Matrix::zeros(n * rd, n * rd);
                    m.view_mut((i * rd, j * rd), (rd, rd)).copy_from(&self.rep[k]);
                    rep[idx] = m;
                }
            }
        }
        let mut products = vec![Vec::new(); big * big];
        for i in 0..n {
            for j in 0..n {
                for jp in 0..n {
                    for k in 0..dim {
                        for l in 0..dim {
                            let entry = self.products[k * dim + l]
                                .iter()
                                .map(|&(r, c)| (index(r, i, jp), c))
                                .collect();
                            products[index(k, i, j) * big + index(l, j, jp)] = entry;
                        }
                    }
                }
            }
        }
        let parts = ModelParts { labels, products, star, trace, rep_dim: n * rd, rep, group: None };
        // exact by construction from a verified model
        Ok(Arc::new(Self::assemble(parts)?))
    }
}

fn basis_vec(dim: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(dim);
    v[i] = ONE;
    v
}

fn matrix_to_vec(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

fn sparsify(c: &Vector) -> Sparse {
    let scale = c.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    c.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-13 * scale.max(1.0))
        .map(|(k, &z)| (k, z))
        .collect()
}

fn projection_data(rep: &[Matrix], rep_dim: usize) -> Result<(Matrix, Matrix)> {
    let dim = rep.len();
    let mut to_rep = Matrix::zeros(rep_dim * rep_dim, dim);
    for (k, m) in rep.iter().enumerate() {
        if m.nrows() != rep_dim || m.ncols() != rep_dim {
            return Err(Error::InvalidModel("representation matrices must share one size".into()));
        }
        to_rep.set_column(k, &matrix_to_vec(m));
    }
    let hs = to_rep.adjoint() * &to_rep;
    let chol = hermitize(&hs)
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("representation is not faithful".into()))?;
    let from_rep = chol.solve(&to_rep.adjoint());
    Ok((to_rep, from_rep))
}

pub(crate) fn hermitize(m: &Matrix) -> Matrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub(crate) fn hermitian_eigen(m: &Matrix) -> (DVector<f64>, Matrix) {
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Matrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (values, vectors)
}

/// `Q diag(values) Q^H`.
pub(crate) fn from_spectrum(values: &DVector<f64>, vectors: &Matrix) -> Matrix {
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    scaled * vectors.adjoint()
}

/// An element of the algebra, equivalently a vector of its GNS space.
#[derive(Clone, Debug)]
pub struct Element {
    model: Arc<Model>,
    coeffs: Vector,
}

impl Element {
    pub fn new(model: &Arc<Model>, coeffs: Vector) -> Result<Self> {
        if coeffs.len() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: coeffs.len() });
        }
        Ok(Self { model: Arc::clone(model), coeffs })
    }

    pub(crate) fn from_parts(model: &Arc<Model>, coeffs: Vector) -> Self {
        debug_assert_eq!(coeffs.len(), model.dim());
        Self { model: Arc::clone(model), coeffs }
    }

    pub fn zero(model: &Arc<Model>) -> Self {
        Self::from_parts(model, Vector::zeros(model.dim()))
    }

    pub fn one(model: &Arc<Model>) -> Self {
        Self::from_parts(model, model.unit.clone())
    }

    pub fn basis(model: &Arc<Model>, i: usize) -> Self {
        Self::from_parts(model, basis_vec(model.dim(), i))
    }

    pub fn scalar(model: &Arc<Model>, c: Complex64) -> Self {
        Self::from_parts(model, &model.unit * c)
    }

    /// Maps a matrix in the representation back to the algebra.
    pub fn from_matrix(model: &Arc<Model>, m: &Matrix) -> Result<Self> {
        if m.nrows() != model.rep_dim || m.ncols() != model.rep_dim {
            return Err(Error::DimensionMismatch { expected: model.rep_dim, found: m.nrows() });
        }
        let (c, residual) = model.project_matrix(m);
        if residual > SPAN_TOL * m.norm().max(1.0) {
            return Err(Error::OutsideAlgebra { residual });
        }
        Ok(Self::from_parts(model, c))
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn coeffs(&self) -> &Vector {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vector {
        self.coeffs
    }

    pub(crate) fn with_coeffs(&self, coeffs: Vector) -> Self {
        Self::from_parts(&self.model, coeffs)
    }

    pub fn same_model(&self, other: &Element) -> bool {
        Arc::ptr_eq(&self.model, &other.model)
    }

    fn check_model(&self, other: &Element) -> Result<()> {
        if self.same_model(other) {
            Ok(())
        } else {
            Err(Error::ModelMismatch)
        }
    }

    /// `⟨self, other⟩₂ = τ(self* other)`.
    pub fn inner(&self, other: &Element) -> Result<Complex64> {
        self.check_model(other)?;
        Ok(self.model.inner_coeffs(&self.coeffs, &other.coeffs))
    }

    pub fn norm2(&self) -> f64 {
        self.model.to_orthonormal(&self.coeffs).norm()
    }

    pub fn trace(&self) -> Complex64 {
        self.model.trace_of(&self.coeffs)
    }

    /// Algebra product `self · other`.
    pub fn product(&self, other: &Element) -> Result<Element> {
        self.check_model(other)?;
        Ok(self.with_coeffs(self.model.product_coeffs(&self.coeffs, &other.coeffs)))
    }

    /// Modular conjugation `J`, which on the algebra is `a ↦ a*`.
    pub fn adjoint(&self) -> Element {
        self.with_coeffs(self.model.star_coeffs(&self.coeffs))
    }

    pub fn real_defect(&self) -> f64 {
        (self.adjoint().coeffs - &self.coeffs).norm_in(&self.model)
    }

    pub fn is_real(&self) -> bool {
        self.real_defect() <= REALITY_TOL * self.norm2().max(1.0)
    }

    fn require_real(&self) -> Result<()> {
        let defect = self.real_defect();
        if defect <= REALITY_TOL * self.norm2().max(1.0) {
            Ok(())
        } else {
            Err(Error::NotReal { defect })
        }
    }

    /// `(x + Jx)/2`.
    pub fn real_part(&self) -> Element {
        self.with_coeffs((&self.coeffs + self.model.star_coeffs(&self.coeffs)).scale(0.5))
    }

    pub fn to_matrix(&self) -> Matrix {
        self.model.coeffs_to_matrix(&self.coeffs)
    }

    /// Spectrum and eigenvectors of a J-real element in the representation.
    pub fn spectrum(&self) -> Result<(DVector<f64>, Matrix)> {
        self.require_real()?;
        Ok(hermitian_eigen(&self.to_matrix()))
    }

    pub fn eigenvalues(&self) -> Result<DVector<f64>> {
        Ok(self.spectrum()?.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.min())
    }

    /// Applies `f` spectrally to a J-real element.
    pub fn functional_calculus<F: Fn(f64) -> f64>(&self, f: F) -> Result<Element> {
        let (values, vectors) = self.spectrum()?;
        let mut mapped = values.clone();
        for (m, &v) in mapped.iter_mut().zip(values.iter()) {
            *m = f(v);
            if !m.is_finite() {
                return Err(Error::Undefined { eigenvalue: v });
            }
        }
        Element::from_matrix(&self.model, &from_spectrum(&mapped, &vectors))
    }

    /// `ξ₊`, the Hilbert projection onto the positive cone.
    pub fn positive_part(&self) -> Result<Element> {
        self.functional_calculus(|t| t.max(0.0))
    }

    pub fn negative_part(&self) -> Result<Element> {
        self.functional_calculus(|t| (-t).max(0.0))
    }

    /// `ξ ∧ 1 = 1 − (1 − ξ)₊`, the projection onto `{a ≤ 1}`.
    pub fn meet_one(&self) -> Result<Element> {
        self.require_real()?;
        let one = Element::one(&self.model);
        let complement = (&one - self).positive_part()?;
        Ok(&one - &complement)
    }

    /// Largest singular value of the representing matrix.
    pub fn operator_norm(&self) -> f64 {
        let m = self.to_matrix();
        m.svd(false, false).singular_values.max()
    }
}

trait NormIn {
    fn norm_in(&self, model: &Model) -> f64;
}

impl NormIn for Vector {
    fn norm_in(&self, model: &Model) -> f64 {
        model.to_orthonormal(self).norm()
    }
}

/// `⟨x, y⟩₂`, antilinear in `x`.
pub fn hs_inner(x: &Element, y: &Element) -> Result<Complex64> {
    x.inner(y)
}

/// The modular conjugation `J`.
pub fn modular_conjugation(x: &Element) -> Element {
    x.adjoint()
}

impl Add for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        assert!(self.same_model(rhs), "model mismatch");
        self.with_coeffs(&self.coeffs + &rhs.coeffs)
    }
}

impl Sub for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        assert!(self.same_model(rhs), "model mismatch");
        self.with_coeffs(&self.coeffs - &rhs.coeffs)
    }
}

impl Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        self.with_coeffs(-&self.coeffs)
    }
}

impl Mul<Complex64> for &Element {
    type Output = Element;
    fn mul(self, rhs: Complex64) -> Element {
        self.with_coeffs(&self.coeffs * rhs)
    }
}

impl Mul<f64> for &Element {
    type Output = Element;
    fn mul(self, rhs: f64) -> Element {
        self.with_coeffs(self.coeffs.scale(rhs))
    }
}

/// Traciality `τ(ab) = τ(ba)` and faithfulness `τ(a*a) > 0` on random pairs.
pub fn check_trace(model: &Arc<Model>, samples: usize, seed: u64) -> crate::report::CheckReport {
    let excess = crate::report::par_trials(seed, samples, |rng, _| {
        let a = crate::sampling::random_element(model, rng);
        let b = crate::sampling::random_element(model, rng);
        let ab = a.product(&b).expect("same model").trace();
        let ba = b.product(&a).expect("same model").trace();
        let positivity = a.adjoint().product(&a).expect("same model").trace().re;
        let faithful = if positivity > 0.0 { 0.0 } else { 1.0 };
        ((ab - ba).norm() / a.norm2().max(1.0) / b.norm2().max(1.0)).max(faithful)
    });
    crate::report::CheckReport::from_excess("trace", seed, 1e-10, &excess)
}
