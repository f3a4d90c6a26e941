//! Twisted group algebras of finite abelian groups, conditionally negative
//! definite length functions, and their 1-cocycles.
//!
//! The group is `ℤ_{q₁} × ⋯ × ℤ_{q_k}`. A twist `θ = p/q` multiplies the basis
//! by the bicharacter `σ(s, t) = exp(2πiθ · s₂t₁)` on the first two factors,
//! so with `U = λ_(1,0)` and `V = λ_(0,1)` one has `VU = e^{2πiθ} UV` and
//! `λ_(n,m) = U^n V^m`. For `ℤ_q²` with a reduced twist `p/q` the model uses
//! the `q × q` clock/shift representation; otherwise the regular one.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{Matrix, Model, ModelParts, Vector, ONE, ZERO};
use crate::dirichlet::DirichletGenerator;
use crate::error::{Error, Result};

/// Product of cyclic groups with an optional rational twist.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub orders: Vec<u32>,
    /// Reduced `(p, q)` with `0 < p < q`; `None` for the untwisted algebra.
    pub twist: Option<(u32, u32)>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl GroupSpec {
    pub fn new(orders: Vec<u32>, twist: Option<(i64, i64)>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidSpec("orders must be nonempty".into()));
        }
        if orders.iter().any(|&q| q == 0) {
            return Err(Error::InvalidSpec("orders must be positive".into()));
        }
        let twist = match twist {
            None => None,
            Some((_, q)) if q <= 0 => return Err(Error::InvalidSpec("twist denominator must be positive".into())),
            Some((p, q)) => {
                let p = p.rem_euclid(q) as u64;
                let q = q as u64;
                if p == 0 {
                    None
                } else {
                    let g = gcd(p, q);
                    let (p, q) = ((p / g) as u32, (q / g) as u32);
                    if orders.len() < 2 {
                        return Err(Error::InvalidSpec("a twist needs at least two cyclic factors".into()));
                    }
                    if orders[0] % q != 0 || orders[1] % q != 0 {
                        return Err(Error::InvalidSpec(format!(
                            "twist {p}/{q} is incompatible with orders {:?}: {q} must divide the first two orders",
                            orders
                        )));
                    }
                    Some((p, q))
                }
            }
        };
        Ok(Self { orders, twist })
    }

    pub fn untwisted(orders: Vec<u32>) -> Result<Self> {
        Self::new(orders, None)
    }

    /// `ℤ_q²` with twist `p/q`: the rational noncommutative torus.
    pub fn torus(q: u32, p: i64) -> Result<Self> {
        Self::new(vec![q, q], Some((p, q as i64)))
    }
}

/// Multiplication data of a finite abelian group together with its twist.
#[derive(Clone, Debug)]
pub struct GroupStructure {
    spec: GroupSpec,
    elements: Vec<Vec<u32>>,
    mul: Vec<usize>,
    inv: Vec<usize>,
}

impl GroupStructure {
    pub fn new(spec: &GroupSpec) -> Self {
        let size: usize = spec.orders.iter().map(|&q| q as usize).product();
        let mut elements = Vec::with_capacity(size);
        for idx in 0..size {
            let mut rem = idx;
            let mut e = vec![0u32; spec.orders.len()];
            for (j, &q) in spec.orders.iter().enumerate().rev() {
                e[j] = (rem % q as usize) as u32;
                rem /= q as usize;
            }
            elements.push(e);
        }
        let mut g = Self { spec: spec.clone(), elements, mul: Vec::new(), inv: Vec::new() };
        let mut mul = vec![0; size * size];
        let mut inv = vec![0; size];
        for s in 0..size {
            for t in 0..size {
                let sum: Vec<i64> = g.elements[s]
                    .iter()
                    .zip(&g.elements[t])
                    .map(|(&a, &b)| a as i64 + b as i64)
                    .collect();
                mul[s * size + t] = g.index_of(&sum);
            }
            let neg: Vec<i64> = g.elements[s].iter().map(|&a| -(a as i64)).collect();
            inv[s] = g.index_of(&neg);
        }
        g.mul = mul;
        g.inv = inv;
        g
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn orders(&self) -> &[u32] {
        &self.spec.orders
    }

    pub fn size(&self) -> usize {
        self.elements.len()
    }

    pub fn identity(&self) -> usize {
        0
    }

    /// Exponents of element `s`, each in `0..q_j`.
    pub fn exponents(&self, s: usize) -> &[u32] {
        &self.elements[s]
    }

    /// Exponents read as minimal residues in `(−q/2, q/2]`.
    pub fn minimal_residues(&self, s: usize) -> Vec<i64> {
        self.elements[s]
            .iter()
            .zip(&self.spec.orders)
            .map(|(&n, &q)| {
                let (n, q) = (n as i64, q as i64);
                if 2 * n > q {
                    n - q
                } else {
                    n
                }
            })
            .collect()
    }

    pub fn label(&self, s: usize) -> String {
        let r = self.minimal_residues(s);
        if r.len() == 1 {
            r[0].to_string()
        } else {
            let parts: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            format!("({})", parts.join(","))
        }
    }

    /// Index of the element with the given (unreduced) exponents.
    pub fn index_of(&self, exps: &[i64]) -> usize {
        exps.iter()
            .zip(&self.spec.orders)
            .fold(0usize, |acc, (&n, &q)| acc * q as usize + n.rem_euclid(q as i64) as usize)
    }

    pub fn mul(&self, s: usize, t: usize) -> usize {
        self.mul[s * self.size() + t]
    }

    pub fn inv(&self, s: usize) -> usize {
        self.inv[s]
    }

    /// Twist 2-cocycle `σ(s, t)`.
    pub fn sigma(&self, s: usize, t: usize) -> Complex64 {
        match self.spec.twist {
            None => ONE,
            Some((p, q)) => {
                let e = self.elements[s][1] as u64 * self.elements[t][0] as u64 * p as u64 % q as u64;
                Complex64::from_polar(1.0, 2.0 * PI * e as f64 / q as f64)
            }
        }
    }

    /// Phase angle of the character `χ_k(s) = exp(2πi Σ k_j s_j / q_j)`.
    pub fn character_angle(&self, k: usize, s: usize) -> f64 {
        let turns: f64 = self.elements[k]
            .iter()
            .zip(&self.elements[s])
            .zip(&self.spec.orders)
            .map(|((&a, &b), &q)| ((a as u64 * b as u64) % q as u64) as f64 / q as f64)
            .sum();
        2.0 * PI * turns
    }

    pub fn character(&self, k: usize, s: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.character_angle(k, s))
    }

    /// Fourier transform `f̂(k) = Σ_s f(s) conj(χ_k(s))` on the dual group.
    pub fn fourier(&self, f: &[Complex64]) -> Vec<Complex64> {
        (0..self.size())
            .map(|k| (0..self.size()).map(|s| f[s] * self.character(k, s).conj()).sum())
            .collect()
    }

    fn uses_clock_shift(&self) -> bool {
        matches!(self.spec.twist, Some((_, q)) if self.spec.orders == [q, q])
    }
}

/// Builds the twisted group algebra with `τ(λ_s) = δ_{s,e}`.
pub fn build_twisted_group_algebra(spec: &GroupSpec) -> Result<Arc<Model>> {
    let g = GroupStructure::new(spec);
    let n = g.size();
    let labels = (0..n).map(|s| g.label(s)).collect();
    let mut products = Vec::with_capacity(n * n);
    for s in 0..n {
        for t in 0..n {
            products.push(vec![(g.mul(s, t), g.sigma(s, t))]);
        }
    }
    let star = (0..n).map(|s| vec![(g.inv(s), g.sigma(s, g.inv(s)).conj())]).collect();
    let mut trace = vec![ZERO; n];
    trace[g.identity()] = ONE;

    let (rep_dim, rep) = if g.uses_clock_shift() {
        let (p, q) = spec.twist.expect("clock/shift needs a twist");
        let q = q as usize;
        let omega = |e: usize| Complex64::from_polar(1.0, 2.0 * PI * ((e * p as usize) % q) as f64 / q as f64);
        let mut shift = Matrix::zeros(q, q);
        let mut clock = Matrix::zeros(q, q);
        for k in 0..q {
            shift[((k + 1) % q, k)] = ONE;
            clock[(k, k)] = omega(k);
        }
        let rep = (0..n)
            .map(|s| {
                let e = g.exponents(s);
                matrix_power(&shift, e[0] as usize) * matrix_power(&clock, e[1] as usize)
            })
            .collect();
        (q, rep)
    } else {
        let rep = (0..n)
            .map(|s| {
                let mut m = Matrix::zeros(n, n);
                for t in 0..n {
                    m[(g.mul(s, t), t)] = g.sigma(s, t);
                }
                m
            })
            .collect();
        (n, rep)
    };
    Model::new(ModelParts { labels, products, star, trace, rep_dim, rep, group: Some(g) })
}

fn matrix_power(m: &Matrix, k: usize) -> Matrix {
    (0..k).fold(Matrix::identity(m.nrows(), m.ncols()), |acc, _| acc * m)
}

/// How a length function was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LengthProvenance {
    /// `ℓ(s) = Σ_k w_k |χ_k(s) − 1|²`; `weights` is indexed by dual character.
    Coboundary { weights: Vec<f64> },
    /// Coboundary of the coordinate characters: `ℓ(n) = Σ_j w_j 4 sin²(π n_j / q_j)`.
    Sine2 { weights: Vec<f64> },
    Explicit,
}

/// A length function `ℓ` on the group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthFunction {
    pub values: Vec<f64>,
    pub provenance: LengthProvenance,
}

/// Result of the Schoenberg test: `exp(−tℓ)` positive definite for each sampled `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CndReport {
    pub ts: Vec<f64>,
    /// Smallest Fourier coefficient of `exp(−tℓ)` per `t`.
    pub min_fourier: Vec<f64>,
    pub pass: bool,
}

pub const CND_TS: [f64; 3] = [0.1, 1.0, 10.0];

impl LengthFunction {
    /// An explicit table; checks `ℓ(e) = 0`, `ℓ ≥ 0` and `ℓ(s⁻¹) = ℓ(s)`.
    /// Conditional negative definiteness is reported by [`Self::cnd_test`], not enforced.
    pub fn explicit(group: &GroupStructure, values: Vec<f64>) -> Result<Self> {
        if values.len() != group.size() {
            return Err(Error::DimensionMismatch { expected: group.size(), found: values.len() });
        }
        if values[group.identity()].abs() > 1e-12 {
            return Err(Error::InvalidParameter("length must vanish at the identity".into()));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("length values must be finite and nonnegative".into()));
        }
        for s in 0..group.size() {
            if (values[s] - values[group.inv(s)]).abs() > 1e-12 * values[s].abs().max(1.0) {
                return Err(Error::InvalidParameter(format!("length is not symmetric at {}", group.label(s))));
            }
        }
        Ok(Self { values, provenance: LengthProvenance::Explicit })
    }

    pub fn value(&self, s: usize) -> f64 {
        self.values[s]
    }

    /// Positive definiteness of `s ↦ exp(−tℓ(s))` via nonnegativity of its Fourier transform.
    pub fn cnd_test(&self, group: &GroupStructure, ts: &[f64]) -> CndReport {
        let min_fourier: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let f: Vec<Complex64> = self.values.iter().map(|&l| Complex64::new((-t * l).exp(), 0.0)).collect();
                group.fourier(&f).iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
            })
            .collect();
        let pass = min_fourier.iter().all(|&m| m >= -1e-10);
        CndReport { ts: ts.to_vec(), min_fourier, pass }
    }
}

/// A 1-cocycle `(π, c)` on `ℂ^d`, the complexification of a real orthogonal representation.
#[derive(Clone, Debug)]
pub struct Cocycle {
    dim: usize,
    pi: Vec<Matrix>,
    c: Vec<Vector>,
}

impl Cocycle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pi(&self, s: usize) -> &Matrix {
        &self.pi[s]
    }

    pub fn c(&self, s: usize) -> &Vector {
        &self.c[s]
    }

    pub fn group_size(&self) -> usize {
        self.c.len()
    }

    /// Largest residual of `c(st) = c(s) + π(s)c(t)`.
    pub fn identity_residual(&self, group: &GroupStructure) -> f64 {
        let n = group.size();
        let mut worst = 0.0_f64;
        for s in 0..n {
            for t in 0..n {
                let r = &self.c[group.mul(s, t)] - &self.c[s] - &self.pi[s] * &self.c[t];
                worst = worst.max(r.norm());
            }
        }
        worst
    }

    /// `‖c(s)‖²` for each element.
    pub fn norms_squared(&self) -> Vec<f64> {
        self.c.iter().map(|v| v.norm_squared()).collect()
    }
}

/// Coboundary length and cocycle from weights on the dual characters.
///
/// Each weighted character `χ_k` contributes a rotation block with
/// `c(s) = √w_k (cos θ_k(s) − 1, sin θ_k(s))`, so `‖c(s)‖² = w_k |χ_k(s) − 1|²`.
pub fn coboundary_length(spec: &GroupSpec, char_weights: &[f64]) -> Result<(LengthFunction, Cocycle)> {
    let g = GroupStructure::new(spec);
    let (values, cocycle) = coboundary_parts(&g, char_weights)?;
    Ok((LengthFunction { values, provenance: LengthProvenance::Coboundary { weights: char_weights.to_vec() } }, cocycle))
}

/// Coboundary of the coordinate characters with one weight per cyclic factor.
pub fn sine2_length(spec: &GroupSpec, weights: &[f64]) -> Result<(LengthFunction, Cocycle)> {
    let g = GroupStructure::new(spec);
    if weights.len() != spec.orders.len() {
        return Err(Error::DimensionMismatch { expected: spec.orders.len(), found: weights.len() });
    }
    let mut dense = vec![0.0; g.size()];
    for (j, &w) in weights.iter().enumerate() {
        let mut k = vec![0i64; spec.orders.len()];
        k[j] = 1;
        dense[g.index_of(&k)] += w;
    }
    let (values, cocycle) = coboundary_parts(&g, &dense)?;
    Ok((LengthFunction { values, provenance: LengthProvenance::Sine2 { weights: weights.to_vec() } }, cocycle))
}

fn coboundary_parts(g: &GroupStructure, weights: &[f64]) -> Result<(Vec<f64>, Cocycle)> {
    let n = g.size();
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: weights.len() });
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("character weights must be finite and nonnegative".into()));
    }
    let active: Vec<(usize, f64)> = weights.iter().copied().enumerate().filter(|&(_, w)| w > 0.0).collect();
    if active.is_empty() {
        return Err(Error::InvalidParameter("at least one character weight must be positive".into()));
    }
    let d = 2 * active.len();
    let mut pi = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for s in 0..n {
        let mut m = Matrix::zeros(d, d);
        let mut v = Vector::zeros(d);
        for (b, &(k, w)) in active.iter().enumerate() {
            let theta = g.character_angle(k, s);
            let (sin, cos) = theta.sin_cos();
            let r = 2 * b;
            m[(r, r)] = Complex64::new(cos, 0.0);
            m[(r, r + 1)] = Complex64::new(-sin, 0.0);
            m[(r + 1, r)] = Complex64::new(sin, 0.0);
            m[(r + 1, r + 1)] = Complex64::new(cos, 0.0);
            let sw = w.sqrt();
            v[r] = Complex64::new(sw * (cos - 1.0), 0.0);
            v[r + 1] = Complex64::new(sw * sin, 0.0);
        }
        pi.push(m);
        c.push(v);
    }
    let values = (0..n)
        .map(|s| active.iter().map(|&(k, w)| w * (g.character(k, s) - ONE).norm_sqr()).sum())
        .collect();
    Ok((values, Cocycle { dim: d, pi, c }))
}

/// The generator `L λ_s = ℓ(s) λ_s`.
pub fn build_generator(model: &Arc<Model>, ell: &LengthFunction) -> Result<DirichletGenerator> {
    let group = model.group().ok_or(Error::NotGroupModel)?;
    if ell.values.len() != group.size() {
        return Err(Error::DimensionMismatch { expected: group.size(), found: ell.values.len() });
    }
    DirichletGenerator::diagonal(model, &ell.values)
}
