//! JSON model and functional files.
//!
//! Complex numbers are written as `[re, im]` pairs. Model files keep the
//! parameters they were built from, so saving a loaded file reproduces it.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{Element, Matrix, Model};
use crate::carre_du_champ::Derivation;
use crate::dirichlet::DirichletGenerator;
use crate::error::{Error, Result};
use crate::models::{
    build_generator, build_twisted_group_algebra, coboundary_length, sine2_length, GroupSpec, LengthFunction,
};
use crate::potential::FiniteEnergyFunctional;

pub type ComplexPair = [f64; 2];

fn to_c(p: &ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn from_c(c: Complex64) -> ComplexPair {
    [c.re, c.im]
}

fn to_matrix(rows: &[Vec<ComplexPair>], what: &str) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidModel(format!("{what} must be a nonempty square matrix")));
    }
    Ok(Matrix::from_fn(n, n, |i, j| to_c(&rows[i][j])))
}

fn from_matrix(m: &Matrix) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| from_c(m[(i, j)])).collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LengthSpec {
    Coboundary { weights: Vec<f64> },
    Sine2 { weights: Vec<f64> },
    Explicit { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    TwistedGroup {
        orders: Vec<u32>,
        /// `[p, q]`: twist `exp(2πi p/q · s₂t₁)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        twist: Option<[i64; 2]>,
        length: LengthSpec,
    },
    /// Arbitrary algebra given by faithful representation matrices of a basis,
    /// the trace on that basis and the generator in basis coordinates.
    Explicit {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        labels: Vec<String>,
        rep: Vec<Vec<Vec<ComplexPair>>>,
        trace: Vec<ComplexPair>,
        generator: Vec<Vec<ComplexPair>>,
    },
}

/// A loaded model with its generator, and the length and derivation when the
/// model came from a group.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub spec: ModelSpec,
    pub model: Arc<Model>,
    pub generator: DirichletGenerator,
    pub length: Option<LengthFunction>,
    derivation: Option<Derivation>,
}

impl ModelBundle {
    pub fn build(spec: ModelSpec) -> Result<Self> {
        match &spec {
            ModelSpec::TwistedGroup { orders, twist, length } => {
                let group = GroupSpec::new(orders.clone(), twist.map(|[p, q]| (p, q)))?;
                let model = build_twisted_group_algebra(&group)?;
                let (ell, cocycle) = match length {
                    LengthSpec::Coboundary { weights } => {
                        let (l, c) = coboundary_length(&group, weights)?;
                        (l, Some(c))
                    }
                    LengthSpec::Sine2 { weights } => {
                        let (l, c) = sine2_length(&group, weights)?;
                        (l, Some(c))
                    }
                    LengthSpec::Explicit { values } => {
                        let g = model.group().ok_or(Error::NotGroupModel)?;
                        (LengthFunction::explicit(g, values.clone())?, None)
                    }
                };
                let generator = build_generator(&model, &ell)?;
                let derivation = cocycle.map(|c| Derivation::new(&model, c)).transpose()?;
                Ok(Self { spec, model, generator, length: Some(ell), derivation })
            }
            ModelSpec::Explicit { labels, rep, trace, generator } => {
                let mats = rep.iter().map(|m| to_matrix(m, "representation matrix")).collect::<Result<Vec<_>>>()?;
                if let Some(m) = mats.first() {
                    if mats.iter().any(|x| x.nrows() != m.nrows()) {
                        return Err(Error::InvalidModel("representation matrices differ in size".into()));
                    }
                }
                let labels = if labels.is_empty() { (0..mats.len()).map(|i| format!("b{i}")).collect() } else { labels.clone() };
                if labels.len() != mats.len() {
                    return Err(Error::DimensionMismatch { expected: mats.len(), found: labels.len() });
                }
                let tr = trace.iter().map(to_c).collect();
                let model = Model::from_representation(labels, mats, tr)?;
                let l = to_matrix(generator, "generator")?;
                if l.nrows() != model.dim() {
                    return Err(Error::DimensionMismatch { expected: model.dim(), found: l.nrows() });
                }
                let generator = DirichletGenerator::from_matrix(&model, l)?;
                Ok(Self { spec, model, generator, length: None, derivation: None })
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::build(parse_model(&fs::read_to_string(path)?)?)
    }

    /// Fails with [`Error::MissingCocycle`] unless the length came from a cocycle.
    pub fn derivation(&self) -> Result<&Derivation> {
        self.derivation.as_ref().ok_or(Error::MissingCocycle)
    }

    pub fn has_derivation(&self) -> bool {
        self.derivation.is_some()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)?)
    }
}

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    Ok(serde_json::from_str(text)?)
}

/// Explicit model file for an existing model and generator.
pub fn explicit_spec(gen: &DirichletGenerator) -> ModelSpec {
    let model = gen.model();
    ModelSpec::Explicit {
        labels: model.labels().to_vec(),
        rep: model.rep_matrices().iter().map(from_matrix).collect(),
        trace: model.trace_vector().iter().map(|&c| from_c(c)).collect(),
        generator: from_matrix(gen.matrix()),
    }
}

/// `{"density": [...]}` (basis coefficients of `h`) or `{"pd_coeffs": [...]}` (values `ω(b_i)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    Density(Vec<ComplexPair>),
    PdCoeffs(Vec<ComplexPair>),
}

impl FunctionalSpec {
    pub fn build(&self, model: &Arc<Model>) -> Result<FiniteEnergyFunctional> {
        match self {
            FunctionalSpec::Density(d) => {
                let coeffs = crate::algebra::Vector::from_iterator(d.len(), d.iter().map(to_c));
                FiniteEnergyFunctional::from_density(Element::new(model, coeffs)?)
            }
            FunctionalSpec::PdCoeffs(p) => {
                let phi: Vec<Complex64> = p.iter().map(to_c).collect();
                FiniteEnergyFunctional::from_pd_coeffs(model, &phi)
            }
        }
    }

    pub fn from_functional(omega: &FiniteEnergyFunctional) -> Self {
        FunctionalSpec::Density(omega.density().coeffs().iter().map(|&c| from_c(c)).collect())
    }
}

pub fn parse_functional(text: &str) -> Result<FunctionalSpec> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_functional(path: &Path, model: &Arc<Model>) -> Result<FiniteEnergyFunctional> {
    parse_functional(&fs::read_to_string(path)?)?.build(model)
}

/// An element from a JSON list of `[re, im]` basis coefficients.
pub fn parse_element(model: &Arc<Model>, text: &str) -> Result<Element> {
    let pairs: Vec<ComplexPair> = serde_json::from_str(text)?;
    Element::new(model, crate::algebra::Vector::from_iterator(pairs.len(), pairs.iter().map(to_c)))
}

pub fn element_json(x: &Element) -> Vec<ComplexPair> {
    x.coeffs().iter().map(|&c| from_c(c)).collect()
}

/// A density element as a JSON matrix of `[re, im]` pairs in the representation.
pub fn element_matrix_json(x: &Element) -> Vec<Vec<ComplexPair>> {
    from_matrix(&x.to_matrix())
}
