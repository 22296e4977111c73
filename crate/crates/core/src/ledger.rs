//! Primitive-operation counters and the scaling fits run over them.
//!
//! One "operation" is a Pauli rotation applied to the statevector, an
//! expectation value requested by the algorithm, or a linear solve (whose
//! dimension is recorded). Ledgers are plain values: concurrent work keeps
//! one per thread and merges them at the end.

use serde::{Deserialize, Serialize};

use crate::error::{QiteError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Rotation,
    /// An expectation value requested by the algorithm (M entry, r entry,
    /// normalization, site expectation).
    Expectation,
    /// A distinct Pauli string actually evaluated on the state; repeated
    /// requests for the same string within one step are served from cache.
    DistinctExpectation,
    LinearSolve,
    TrotterStep,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub rotations: u64,
    pub expectations: u64,
    pub distinct_expectations: u64,
    pub linear_solves: Vec<usize>,
    pub trotter_steps: u64,
    /// Informational only; never compared.
    pub wall_time: f64,
}

impl CostLedger {
    pub fn new() -> CostLedger {
        CostLedger::default()
    }

    /// Adds `magnitude` to the counter for `kind`; for [`Event::LinearSolve`]
    /// the magnitude is the system dimension and is appended instead.
    pub fn record_event(&mut self, kind: Event, magnitude: u64) {
        match kind {
            Event::Rotation => self.rotations += magnitude,
            Event::Expectation => self.expectations += magnitude,
            Event::DistinctExpectation => self.distinct_expectations += magnitude,
            Event::LinearSolve => self.linear_solves.push(magnitude as usize),
            Event::TrotterStep => self.trotter_steps += magnitude,
        }
    }

    pub fn merge(&mut self, other: &CostLedger) {
        self.rotations += other.rotations;
        self.expectations += other.expectations;
        self.distinct_expectations += other.distinct_expectations;
        self.linear_solves.extend_from_slice(&other.linear_solves);
        self.trotter_steps += other.trotter_steps;
        self.wall_time += other.wall_time;
    }

    /// Difference `self - earlier` for a ledger that has only grown since
    /// `earlier` was taken.
    pub fn since(&self, earlier: &CostLedger) -> CostLedger {
        CostLedger {
            rotations: self.rotations - earlier.rotations,
            expectations: self.expectations - earlier.expectations,
            distinct_expectations: self.distinct_expectations - earlier.distinct_expectations,
            linear_solves: self.linear_solves[earlier.linear_solves.len()..].to_vec(),
            trotter_steps: self.trotter_steps - earlier.trotter_steps,
            wall_time: self.wall_time - earlier.wall_time,
        }
    }

    pub fn max_solve_dim(&self) -> usize {
        self.linear_solves.iter().copied().max().unwrap_or(0)
    }

    /// `true` when every counter of `self` is at least the matching counter of
    /// `earlier`.
    pub fn dominates(&self, earlier: &CostLedger) -> bool {
        self.rotations >= earlier.rotations
            && self.expectations >= earlier.expectations
            && self.distinct_expectations >= earlier.distinct_expectations
            && self.linear_solves.len() >= earlier.linear_solves.len()
            && self.trotter_steps >= earlier.trotter_steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    Power,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: GrowthModel,
    /// `count ~ a * n^exponent`
    pub power_exponent: f64,
    /// `count ~ a * base^n`
    pub exponential_base: f64,
    /// Residual sums of squares in log space.
    pub power_rss: f64,
    pub exponential_rss: f64,
}

impl ScalingFit {
    pub fn parameter(&self) -> f64 {
        match self.model {
            GrowthModel::Power => self.power_exponent,
            GrowthModel::Exponential => self.exponential_base,
        }
    }

    pub fn goodness(&self) -> f64 {
        match self.model {
            GrowthModel::Power => self.power_rss,
            GrowthModel::Exponential => self.exponential_rss,
        }
    }
}

/// Least-squares line `y = a + b x`, returning `(a, b, rss)`.
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    (a, b, rss)
}

/// Fits `log(count)` against both `log(n)` and `n` and keeps the model with
/// the smaller residual. Ties go to the power law.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(QiteError::DegenerateFit("need at least 3 points"));
    }
    if points.iter().any(|&(n, c)| !(n > 0.0) || !(c > 0.0) || !n.is_finite() || !c.is_finite()) {
        return Err(QiteError::DegenerateFit("sizes and counts must be positive and finite"));
    }
    let first = points[0].0;
    if points.iter().all(|&(n, _)| n == first) {
        return Err(QiteError::DegenerateFit("all sizes equal"));
    }
    let ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    let log_ns: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let log_cs: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (_, exponent, power_rss) = line_fit(&log_ns, &log_cs);
    let (_, log_base, exponential_rss) = line_fit(&ns, &log_cs);
    let model = if exponential_rss < power_rss { GrowthModel::Exponential } else { GrowthModel::Power };
    Ok(ScalingFit { model, power_exponent: exponent, exponential_base: log_base.exp(), power_rss, exponential_rss })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_examples() {
        let mut l = CostLedger::new();
        l.record_event(Event::Rotation, 3);
        assert_eq!(l.rotations, 3);
        l.record_event(Event::LinearSolve, 15);
        assert_eq!(l.linear_solves, vec![15]);
        l.record_event(Event::Expectation, 1);
        assert_eq!(l.expectations, 1);
    }

    #[test]
    fn merge_is_exact() {
        let mut a = CostLedger::new();
        a.record_event(Event::Rotation, 2);
        a.record_event(Event::LinearSolve, 3);
        let mut b = CostLedger::new();
        b.record_event(Event::Rotation, 5);
        b.record_event(Event::TrotterStep, 1);
        b.record_event(Event::LinearSolve, 7);
        let snapshot = a.clone();
        a.merge(&b);
        assert_eq!(a.rotations, 7);
        assert_eq!(a.linear_solves, vec![3, 7]);
        assert!(a.dominates(&snapshot));
        let delta = a.since(&snapshot);
        assert_eq!(delta.rotations, 5);
        assert_eq!(delta.linear_solves, vec![7]);
    }

    #[test]
    fn fit_geometric_sequence() {
        let fit = scaling_fit(&[(2.0, 16.0), (3.0, 64.0), (4.0, 256.0)]).unwrap();
        assert_eq!(fit.model, GrowthModel::Exponential);
        assert!((fit.exponential_base - 4.0).abs() < 1e-12);
        assert!(fit.exponential_rss < 1e-20);
    }

    #[test]
    fn fit_squares() {
        let fit = scaling_fit(&[(2.0, 4.0), (3.0, 9.0), (4.0, 16.0)]).unwrap();
        assert_eq!(fit.model, GrowthModel::Power);
        assert!((fit.power_exponent - 2.0).abs() < 1e-12);
        assert!((fit.parameter() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert!(scaling_fit(&[(2.0, 4.0), (3.0, 9.0)]).is_err());
        assert!(scaling_fit(&[(2.0, 4.0), (2.0, 9.0), (2.0, 1.0)]).is_err());
        assert!(scaling_fit(&[(2.0, 0.0), (3.0, 9.0), (4.0, 1.0)]).is_err());
    }
}
