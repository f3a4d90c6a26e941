//! The full property suite over one model.
//!
//! Each property draws from its own seed, `derive_seed(master, property)`, so
//! reports do not depend on which other properties ran or in what order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::check_trace;
use crate::carre_du_champ::{check_closed_form, check_gamma, check_leibniz, check_symmetry, gamma_bound_check};
use crate::deny::{
    approx_potential_formula_check, bounded_potential_bound_check, check_deny_inequality, deny_embedding_check,
    DEFAULT_DELTA_GRID,
};
use crate::dirichlet::{
    check_approx_monotone, check_complete_positivity, check_completely_dirichlet, check_markovian, check_real,
    check_semigroup_resolvent,
};
use crate::error::{Error, Result};
use crate::io::ModelBundle;
use crate::models::CND_TS;
use crate::multipliers::{check_multiplier_algebra, check_multiplier_potentials, check_resolvent_multiplier};
use crate::potential::{
    check_derivative_identity, check_domination, check_energy_bound, check_interpolation,
    check_positivity_of_potentials, check_potential_characterization, check_resolvent_pushforward, check_riesz,
    check_semigroup_domination, potential_of, FiniteEnergyFunctional, DEFAULT_EPS_GRID, DEFAULT_T_GRID,
};
use crate::report::{derive_seed, trial_rng, CheckReport};
use crate::sampling;

pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
/// Times for the semigroup/resolvent comparison, where `t‖L‖` stays small.
pub const DEFAULT_SEMIGROUP_TS: [f64; 2] = [0.01, 0.05];
pub const DEFAULT_SEMIGROUP_TOL: f64 = 1e-6;

fn default_ampliation() -> usize {
    3
}

fn default_multiplier_count() -> usize {
    100
}

/// Suite configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Relative paths are resolved against the config file's directory.
    pub model_path: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functionals: Vec<PathBuf>,
    pub seed: u64,
    pub trials: usize,
    /// Replacement tolerances keyed by property name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_ampliation")]
    pub max_ampliation: usize,
    /// Number of random potentials for the multiplier bound.
    #[serde(default = "default_multiplier_count")]
    pub multiplier_potentials: usize,
}

impl SuiteConfig {
    pub fn new(model_path: impl Into<PathBuf>, seed: u64, trials: usize) -> Self {
        Self {
            model_path: model_path.into(),
            functionals: Vec::new(),
            seed,
            trials,
            tolerances: BTreeMap::new(),
            grid_t: None,
            grid_eps: None,
            grid_delta: None,
            grid_lambda: None,
            out: None,
            max_ampliation: default_ampliation(),
            multiplier_potentials: default_multiplier_count(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.max_ampliation < 1 {
            return Err(Error::InvalidParameter("max_ampliation must be at least 1".into()));
        }
        for (name, &tol) in &self.tolerances {
            if !(tol > 0.0) || !tol.is_finite() {
                return Err(Error::InvalidParameter(format!("tolerance for {name} must be positive, got {tol}")));
            }
        }
        let positive = |name: &str, grid: &Option<Vec<f64>>| -> Result<()> {
            match grid {
                Some(g) if g.is_empty() || g.iter().any(|&x| !(x > 0.0) || !x.is_finite()) => {
                    Err(Error::InvalidParameter(format!("{name} grid must be nonempty and positive")))
                }
                _ => Ok(()),
            }
        };
        positive("t", &self.grid_t)?;
        positive("ε", &self.grid_eps)?;
        positive("δ", &self.grid_delta)?;
        positive("λ", &self.grid_lambda)?;
        if let Some(e) = &self.grid_eps {
            if e.iter().any(|&x| x >= 1.0) {
                return Err(Error::InvalidParameter("ε grid must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }

    /// Reads a config, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: SuiteConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.model_path.is_relative() {
            cfg.model_path = base.join(&cfg.model_path);
        }
        for f in &mut cfg.functionals {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        self.grid_t.clone().unwrap_or_else(|| DEFAULT_T_GRID.to_vec())
    }

    pub fn eps_grid(&self) -> Vec<f64> {
        self.grid_eps.clone().unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec())
    }

    /// Sorted decreasing, as the Deny check requires.
    pub fn delta_grid(&self) -> Vec<f64> {
        let mut g = self.grid_delta.clone().unwrap_or_else(|| DEFAULT_DELTA_GRID.to_vec());
        g.sort_by(|a, b| b.total_cmp(a));
        g.dedup();
        g
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        self.grid_lambda.clone().unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec())
    }
}

/// Functionals exercised by the suite: `τ`, the trivial character when the
/// model admits it, a seeded random state, and any supplied ones.
pub fn suite_functionals(bundle: &ModelBundle, extra: Vec<FiniteEnergyFunctional>, seed: u64) -> Vec<(String, FiniteEnergyFunctional)> {
    let model = &bundle.model;
    let mut out = vec![("trace".to_string(), FiniteEnergyFunctional::trace(model))];
    if let Ok(tc) = FiniteEnergyFunctional::trivial_character(model) {
        out.push(("trivial_character".into(), tc));
    }
    let mut rng = trial_rng(derive_seed(seed, "random_state"), 0);
    if let Ok(st) = FiniteEnergyFunctional::from_density(sampling::random_state(model, &mut rng)) {
        out.push(("random_state".into(), st));
    }
    out.extend(extra.into_iter().enumerate().map(|(i, f)| (format!("file{i}"), f)));
    out
}

/// A property that could not be evaluated is reported as failed, with the
/// error kept alongside.
#[derive(Clone, Debug, Default)]
pub struct SuiteOutcome {
    pub reports: Vec<CheckReport>,
    pub errors: BTreeMap<String, String>,
}

impl SuiteOutcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.reports.iter().filter(|r| !r.pass).map(|r| r.property.as_str()).collect()
    }

    fn push(&mut self, property: &str, seed: u64, r: Result<CheckReport>) {
        match r {
            Ok(r) => self.reports.push(r),
            Err(e) => {
                self.errors.insert(property.to_string(), e.to_string());
                self.reports.push(CheckReport::failed(property, seed));
            }
        }
    }

    fn extend(&mut self, property: &str, seed: u64, r: Result<Vec<CheckReport>>) {
        match r {
            Ok(rs) => self.reports.extend(rs),
            Err(e) => {
                self.errors.insert(property.to_string(), e.to_string());
                self.reports.push(CheckReport::failed(property, seed));
            }
        }
    }
}

fn collect(property: &str, seed: u64, parts: impl IntoIterator<Item = Result<CheckReport>>) -> Result<CheckReport> {
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::merge(property, seed, &parts))
}

/// Runs every check on the bundle.
pub fn run_suite(bundle: &ModelBundle, extra: Vec<FiniteEnergyFunctional>, cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let gen = &bundle.generator;
    let model = &bundle.model;
    let n = cfg.trials;
    let ts = cfg.t_grid();
    let epss = cfg.eps_grid();
    let deltas = cfg.delta_grid();
    let seed = |name: &str| derive_seed(cfg.seed, name);
    let functionals = suite_functionals(bundle, extra, cfg.seed);
    let mut out = SuiteOutcome::default();

    out.reports.push(check_trace(model, n, seed("trace")));
    if let (Some(ell), Some(group)) = (&bundle.length, model.group()) {
        let c = ell.cnd_test(group, &CND_TS);
        let excess: Vec<f64> = c.min_fourier.iter().map(|m| -m).collect();
        out.reports.push(CheckReport::from_excess("cnd", 0, 1e-10, &excess));
    }

    // Dirichlet form.
    out.reports.push(check_real(gen, n, seed("real")));
    out.reports.push(check_markovian(gen, n, seed("markovian")));
    for k in 2..=cfg.max_ampliation {
        let name = format!("completely_dirichlet_n{k}");
        out.push(&name, seed(&name), check_completely_dirichlet(gen, k, n, seed(&name)));
    }
    out.push(
        "complete_positivity",
        seed("complete_positivity"),
        check_complete_positivity(gen, cfg.max_ampliation, &ts, &epss, n, seed("complete_positivity")),
    );
    let sr_tol = cfg.tolerances.get("semigroup_resolvent").copied().unwrap_or(DEFAULT_SEMIGROUP_TOL);
    out.push(
        "semigroup_resolvent",
        seed("semigroup_resolvent"),
        check_semigroup_resolvent(gen, &DEFAULT_SEMIGROUP_TS, n, seed("semigroup_resolvent"), sr_tol),
    );
    out.push("approx_form_monotone", seed("approx_form_monotone"), check_approx_monotone(gen, &epss, n, seed("approx_form_monotone")));

    // Potentials.
    out.reports.push(check_positivity_of_potentials(gen, n, seed("potential_positivity")));
    out.push(
        "potential_characterization",
        seed("potential_characterization"),
        check_potential_characterization(gen, n, seed("potential_characterization"), &ts, &epss),
    );
    out.reports.push(CheckReport::merge("riesz", 0, &functionals.iter().map(|(_, f)| check_riesz(gen, f)).collect::<Vec<_>>()));
    out.reports.push(CheckReport::merge(
        "energy_bound",
        seed("energy_bound"),
        &functionals.iter().map(|(_, f)| check_energy_bound(gen, f, n, seed("energy_bound"))).collect::<Vec<_>>(),
    ));
    out.push(
        "domination",
        0,
        collect(
            "domination",
            0,
            functionals.iter().map(|(_, f)| f.scaled(0.5).and_then(|half| check_domination(gen, &half, f))),
        ),
    );
    out.push(
        "semigroup_domination",
        0,
        collect(
            "semigroup_domination",
            0,
            functionals.iter().map(|(_, f)| check_semigroup_domination(gen, &potential_of(gen, f), &ts, &epss)),
        ),
    );
    out.push(
        "resolvent_pushforward",
        0,
        collect(
            "resolvent_pushforward",
            0,
            functionals.iter().flat_map(|(_, f)| epss.iter().map(move |&e| check_resolvent_pushforward(gen, f, e))),
        ),
    );
    let dseed = seed("derivative_identity");
    let dcount = n.min(50);
    out.push(
        "derivative_identity",
        dseed,
        collect(
            "derivative_identity",
            dseed,
            (0..dcount).map(|i| {
                let mut rng = trial_rng(dseed, i);
                let xi = sampling::random_element(model, &mut rng);
                let eta = sampling::random_element(model, &mut rng);
                let t = ts[i % ts.len()].min(1.0);
                check_derivative_identity(gen, &xi, &eta, t, 1e-3 * t.max(1e-2))
            }),
        ),
    );
    if let Some(ell) = &bundle.length {
        let lambdas = cfg.lambda_grid();
        out.push(
            "interpolation_family",
            0,
            collect(
                "interpolation_family",
                0,
                functionals.iter().filter(|(_, f)| f.pd_coeffs().is_some()).map(|(_, f)| check_interpolation(f, ell, &lambdas)),
            ),
        );
    }

    // Deny.
    let emb: Vec<CheckReport> = functionals
        .iter()
        .map(|(_, f)| {
            let r = deny_embedding_check(gen, f, n, seed("deny_embedding"));
            let mut c = CheckReport::from_excess("deny_embedding", r.seed, 1e-9, &[r.ratio_max - 1.0]).require(r.pass);
            c.samples = r.samples;
            c
                .with_metric("ratio_max", r.ratio_max)
                .with_metric("embedding_slack", r.embedding_bound - r.embedding_norm)
        })
        .collect();
    out.reports.push(CheckReport::merge("deny_embedding", seed("deny_embedding"), &emb));
    out.push(
        "deny_inequality",
        seed("deny_inequality"),
        collect(
            "deny_inequality",
            seed("deny_inequality"),
            functionals
                .iter()
                .filter(|(_, f)| f.mass() > 0.0)
                .map(|(_, f)| check_deny_inequality(gen, f, &deltas, n, seed("deny_inequality"))),
        ),
    );
    out.reports.push(CheckReport::merge(
        "bounded_potential",
        seed("bounded_potential"),
        &functionals
            .iter()
            .map(|(_, f)| bounded_potential_bound_check(gen, &potential_of(gen, f), n, seed("bounded_potential")))
            .collect::<Vec<_>>(),
    ));
    out.push(
        "approx_potential",
        0,
        collect(
            "approx_potential",
            0,
            functionals.iter().flat_map(|(_, f)| epss.iter().map(move |&e| approx_potential_formula_check(gen, f, e))),
        ),
    );

    // Carré du champ.
    if let Ok(der) = bundle.derivation() {
        out.extend("gamma", seed("gamma"), check_gamma(gen, der, n, seed("gamma")));
        out.reports.push(check_leibniz(der, n, seed("leibniz")));
        out.reports.push(check_symmetry(der, n, seed("bimodule_symmetry")));
    }
    out.push(
        "gamma_bound",
        seed("gamma_bound"),
        collect(
            "gamma_bound",
            seed("gamma_bound"),
            functionals.iter().map(|(_, f)| gamma_bound_check(gen, &potential_of(gen, f), n, seed("gamma_bound"))),
        ),
    );
    out.push("gamma_closed_form", seed("gamma_closed_form"), check_closed_form(gen, n, seed("gamma_closed_form")));

    // Multipliers.
    let mcount = cfg.multiplier_potentials.max(1);
    let mtrials = (n / 10).max(1);
    out.push(
        "multiplier_bound",
        seed("multiplier_bound"),
        check_multiplier_potentials(gen, mcount, mtrials, seed("multiplier_bound")),
    );
    let rseed = seed("resolvent_multiplier");
    let mut rng = trial_rng(rseed, 0);
    let h = sampling::random_positive(model, &mut rng);
    out.push("resolvent_multiplier", rseed, check_resolvent_multiplier(gen, &h, &epss, mtrials, rseed));
    out.reports.push(check_multiplier_algebra(gen, mcount.min(n), seed("multiplier_algebra")));

    for r in &mut out.reports {
        if let Some(&tol) = cfg.tolerances.get(&r.property) {
            if r.property != "semigroup_resolvent" {
                *r = r.clone().with_tolerance(tol);
            }
        }
    }
    Ok(out)
}
