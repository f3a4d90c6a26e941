//! Verifier reports and deterministic trial scheduling.
//!
//! Every randomized check draws its samples from a per-trial generator seeded
//! by `(seed, trial index)`, so a report is identical no matter how the trials
//! are scheduled across threads.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Absolute slack for cone and energy inequalities.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Outcome of a property check: `{property, samples, max_violation, seed, pass}`.
///
/// `max_violation` is the largest amount by which the checked inequality was
/// exceeded (zero when it held everywhere); for identities it is the largest
/// absolute residual. Extra named quantities go to `metrics`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub property: String,
    pub samples: usize,
    pub max_violation: f64,
    pub seed: u64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    /// Whether the non-numeric requirements held; kept so a tolerance can be
    /// replaced after the fact.
    #[serde(skip, default = "yes")]
    requirements_met: bool,
}

fn yes() -> bool {
    true
}

impl CheckReport {
    /// Builds a report from per-sample excesses `lhs - rhs` (or residuals).
    pub fn from_excess(property: &str, seed: u64, tol: f64, excess: &[f64]) -> Self {
        let max_violation = excess.iter().fold(0.0_f64, |m, &e| {
            if e.is_nan() {
                f64::MAX
            } else {
                m.max(e)
            }
        });
        Self {
            property: property.to_string(),
            samples: excess.len(),
            max_violation,
            seed,
            pass: max_violation <= tol,
            metrics: BTreeMap::new(),
            requirements_met: true,
        }
    }

    pub fn with_metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    /// Marks the report failed unless `ok` holds.
    pub fn require(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self.requirements_met &= ok;
        self
    }

    /// Re-judges `max_violation` against a different tolerance.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.pass = self.requirements_met && self.max_violation <= tol;
        self.with_metric("tolerance", tol)
    }

    /// A failed report for a check that could not be carried out.
    pub fn failed(property: &str, seed: u64) -> Self {
        Self::from_excess(property, seed, 0.0, &[f64::NAN])
    }

    /// Combines reports of the same property over several inputs.
    pub fn merge(property: &str, seed: u64, reports: &[CheckReport]) -> Self {
        let mut out = Self::from_excess(property, seed, f64::INFINITY, &[]);
        out.pass = true;
        for r in reports {
            out.samples += r.samples;
            out.max_violation = out.max_violation.max(r.max_violation);
            out.pass &= r.pass;
            out.requirements_met &= r.requirements_met;
            for (k, v) in &r.metrics {
                out.metrics.entry(k.clone()).and_modify(|m| *m = m.max(*v)).or_insert(*v);
            }
        }
        out
    }
}

fn digest_u64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    let out = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&out[..8]);
    u64::from_le_bytes(bytes)
}

/// Seed for a named property derived from a master seed.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    digest_u64(&[&master.to_le_bytes(), name.as_bytes()])
}

/// Generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(digest_u64(&[&seed.to_le_bytes(), &(index as u64).to_le_bytes()]))
}

/// Runs `count` independent trials in parallel, returning results in trial order.
pub fn par_trials<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            f(&mut rng, i)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn trials_are_schedule_independent() {
        let a = par_trials(7, 64, |rng, _| rng.gen::<u64>());
        let b: Vec<u64> = (0..64).map(|i| trial_rng(7, i).gen::<u64>()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_differ_by_name() {
        assert_ne!(derive_seed(1, "markovian"), derive_seed(1, "leibniz"));
        assert_eq!(derive_seed(1, "markovian"), derive_seed(1, "markovian"));
    }

    #[test]
    fn excess_report() {
        let r = CheckReport::from_excess("p", 0, 1e-9, &[-1.0, 0.5e-9, -3.0]);
        assert!(r.pass);
        assert_eq!(r.samples, 3);
        let r = CheckReport::from_excess("p", 0, 1e-9, &[f64::NAN]);
        assert!(!r.pass);
    }
}
