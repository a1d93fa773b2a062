//! Runnable resilience and learning experiments with machine-checkable
//! verdicts.
//!
//! Every experiment is a pure function of its parameter struct: given the
//! same parameters and seeds it reproduces the same report bit for bit.
//! Contrast experiments reuse identical honest datasets across arms (query
//! streams are keyed by distribution seeds, label streams by generation
//! seeds), so arms differ only in the adversarial data. Each report
//! carries named metrics, per-seed metrics, and explicit checks with their
//! thresholds; the verdict is the conjunction of the checks and can be
//! recomputed from the emitted numbers alone.

mod byzantine_absolute;
mod byzantine_majority;
mod gradient_pac;
mod manipulability;
mod negative_example;
mod pac_curve;
mod strategyproof_1d;

pub use byzantine_absolute::{exp_byzantine_absolute, ByzantineAbsoluteParams};
pub use byzantine_majority::{exp_byzantine_majority, ByzantineMajorityParams};
pub use gradient_pac::{exp_gradient_pac, GradientPacParams};
pub use manipulability::{exp_manipulability, ManipulabilityParams};
pub use negative_example::{exp_negative_example, NegativeExampleParams};
pub use pac_curve::{exp_pac_curve, PacCurveParams, PacMode};
pub use strategyproof_1d::{exp_strategyproof_1d, Strategyproof1dParams};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AttackError;
use crate::datagen::DataGenError;
use crate::losses::LossError;
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// A precondition of the claim under test is not met by the parameters.
    #[error("precondition not met: {0}")]
    Gate(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Data(#[from] DataGenError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// How an observed value is compared against its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    LessEq,
    GreaterEq,
}

/// One named assertion with the tolerance it was checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub observed: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl CheckOutcome {
    pub fn le(name: &str, observed: f64, threshold: f64) -> Self {
        CheckOutcome {
            name: name.to_string(),
            observed,
            threshold,
            comparison: Comparison::LessEq,
            pass: observed <= threshold,
        }
    }

    pub fn ge(name: &str, observed: f64, threshold: f64) -> Self {
        CheckOutcome {
            name: name.to_string(),
            observed,
            threshold,
            comparison: Comparison::GreaterEq,
            pass: observed >= threshold,
        }
    }
}

/// Metrics attributable to a single seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub values: BTreeMap<String, f64>,
}

/// Outcome of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    /// Flat echo of every parameter the run depended on.
    pub parameters: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    /// Aggregate metrics across seeds.
    pub metrics: BTreeMap<String, f64>,
    pub seed_metrics: Vec<SeedMetrics>,
    pub checks: Vec<CheckOutcome>,
    /// True iff every check passed.
    pub verdict: bool,
    pub runtime_seconds: f64,
}

/// Accumulates an experiment report; `finish` derives the verdict.
pub(crate) struct ReportBuilder {
    name: String,
    parameters: BTreeMap<String, String>,
    seeds: Vec<u64>,
    metrics: BTreeMap<String, f64>,
    seed_metrics: Vec<SeedMetrics>,
    checks: Vec<CheckOutcome>,
    started: Instant,
}

impl ReportBuilder {
    pub fn new(name: &str, seeds: &[u64]) -> Self {
        ReportBuilder {
            name: name.to_string(),
            parameters: BTreeMap::new(),
            seeds: seeds.to_vec(),
            metrics: BTreeMap::new(),
            seed_metrics: Vec::new(),
            checks: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn seed_metrics(&mut self, seed: u64, values: BTreeMap<String, f64>) {
        self.seed_metrics.push(SeedMetrics { seed, values });
    }

    pub fn check(&mut self, check: CheckOutcome) {
        self.checks.push(check);
    }

    pub fn finish(self) -> ExperimentReport {
        let verdict = self.checks.iter().all(|c| c.pass);
        ExperimentReport {
            name: self.name,
            parameters: self.parameters,
            seeds: self.seeds,
            metrics: self.metrics,
            seed_metrics: self.seed_metrics,
            checks: self.checks,
            verdict,
            runtime_seconds: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// Applies `f` to every item, fanning out over up to `jobs` threads.
/// Results come back in input order regardless of scheduling.
pub fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let mut slots: Vec<Option<R>> = Vec::with_capacity(items.len());
    slots.resize_with(items.len(), || None);
    let f = &f;
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(jobs);
        let mut rest: &mut [Option<R>] = &mut slots;
        let chunk = items.len().div_ceil(jobs);
        for batch in items.chunks(chunk) {
            let (head, tail) = rest.split_at_mut(batch.len());
            rest = tail;
            handles.push(scope.spawn(move || {
                for (slot, item) in head.iter_mut().zip(batch) {
                    *slot = Some(f(item));
                }
            }));
        }
        for h in handles {
            h.join().expect("worker thread panicked");
        }
    });
    slots.into_iter().map(|s| s.expect("all slots filled")).collect()
}

/// Derives an independent seed from a base seed and a fixed salt, so one
/// configured seed can key several unrelated random draws without overlap.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(6364136223846793005)
        .wrapping_add(salt)
        .rotate_left(17)
        .wrapping_mul(2862933555777941757)
}

pub(crate) fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn l2_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn join_floats(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

pub(crate) fn join_ints(values: &[u64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

pub(crate) fn join_usizes(values: &[usize]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}
