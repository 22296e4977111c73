//! First-order Trotter driver shared by the standard and fast methods.

use std::collections::HashMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QiteError, Result};
use crate::fast::{self, FastStepResult, SiteOrder};
use crate::ledger::{CostLedger, Event};
use crate::measure::ExpectationMode;
use crate::oracle::{self, Spectrum, DEFAULT_ORACLE_CAP};
use crate::pauli::{PauliString, PauliTerm, WeightedPauliSum};
use crate::standard::{self, DomainPolicy, OperatorDomain, DEFAULT_CUTOFF};
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    Fast,
    Oracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Fast => "fast",
            Method::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = QiteError;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "standard" => Ok(Method::Standard),
            "fast" => Ok(Method::Fast),
            "oracle" => Ok(Method::Oracle),
            other => Err(QiteError::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// How the per-step normalization `c_a` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// `(1 - tau h <sigma>)^-2` built from measured expectations.
    FirstOrder,
    /// `||exp(tau h sigma) psi||^2` read directly off the statevector.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub domain: DomainPolicy,
    pub expectation: ExpectationMode,
    pub normalization: NormalizationMode,
    pub site_order: SiteOrder,
    pub svd_cutoff: f64,
    pub seed: u64,
    /// Compare against the dense oracle at the end of every sweep.
    pub oracle_check: bool,
    pub oracle_cap: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            domain: DomainPolicy::FullMinusIdentity,
            expectation: ExpectationMode::Exact,
            normalization: NormalizationMode::FirstOrder,
            site_order: SiteOrder::Ascending,
            svd_cutoff: DEFAULT_CUTOFF,
            seed: 0,
            oracle_check: false,
            oracle_cap: DEFAULT_ORACLE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterStepSolution {
    pub step_index: usize,
    pub sweep: usize,
    pub term_index: usize,
    pub term_label: String,
    /// Generator coefficients; for the fast method the concatenated
    /// per-site `(x_X, x_Y, x_Z)` triples.
    pub x: Vec<f64>,
    pub c_a: f64,
    /// Running product of `c_a` up to and including this step.
    pub c_total: f64,
    /// Norm mismatch between the step's output and the exact normalized map.
    pub residual: f64,
    /// `||M x + r||` of the linear solve (largest over sites for fast steps).
    pub solve_residual: f64,
    /// Fidelity against the oracle, filled at the last term of a sweep when
    /// oracle checking is on.
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub final_state: StateVector,
    pub c_total: f64,
    pub tau: f64,
    pub sweeps: usize,
    pub steps: Vec<TrotterStepSolution>,
    /// Per-step reduction records; empty for the standard method.
    pub reductions: Vec<FastStepResult>,
    pub ledger: CostLedger,
}

/// Number of sweeps, uniform step `tau > 0`, and the sign applied to every
/// coefficient (`-1` realizes `exp(-|t| H)`).
pub fn schedule(total_time: f64, steps_per_unit: usize) -> Result<(usize, f64, f64)> {
    if steps_per_unit == 0 {
        return Err(QiteError::InvalidStep("steps_per_unit must be at least 1".into()));
    }
    if !total_time.is_finite() {
        return Err(QiteError::NonFinite("total_time"));
    }
    let sweeps = (total_time.abs() * steps_per_unit as f64).round() as usize;
    if sweeps == 0 {
        return Ok((0, 1.0 / steps_per_unit as f64, 1.0));
    }
    Ok((sweeps, total_time.abs() / sweeps as f64, if total_time < 0.0 { -1.0 } else { 1.0 }))
}

/// Mutable state threaded through one evolution.
pub(crate) struct StepContext<'c> {
    pub config: &'c EvolutionConfig,
    pub ledger: CostLedger,
    pub rng: ChaCha8Rng,
    domains: HashMap<PauliString, OperatorDomain>,
}

impl<'c> StepContext<'c> {
    pub fn new(config: &'c EvolutionConfig) -> StepContext<'c> {
        StepContext {
            config,
            ledger: CostLedger::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            domains: HashMap::new(),
        }
    }

    pub fn domain_for(&mut self, term: &PauliString) -> Result<OperatorDomain> {
        if let Some(d) = self.domains.get(term) {
            return Ok(d.clone());
        }
        let d = OperatorDomain::for_term(&self.config.domain, term)?;
        self.domains.insert(*term, d.clone());
        Ok(d)
    }
}

fn check_qubits(psi: &StateVector, h: &WeightedPauliSum) -> Result<()> {
    if psi.qubit_count() != h.qubit_count() {
        return Err(QiteError::Dimension { expected: h.qubit_count(), found: psi.qubit_count() });
    }
    Ok(())
}

pub fn evolve(
    method: Method,
    psi0: &StateVector,
    h: &WeightedPauliSum,
    total_time: f64,
    steps_per_unit: usize,
    config: &EvolutionConfig,
) -> Result<EvolutionResult> {
    match method {
        Method::Standard => standard::qite_evolve(psi0, h, total_time, steps_per_unit, config),
        Method::Fast => fast::fast_qite_evolve(psi0, h, total_time, steps_per_unit, config),
        Method::Oracle => oracle_evolve(psi0, h, total_time, config),
    }
}

/// Dense `exp(t H)` in one shot, packaged as an evolution result.
pub fn oracle_evolve(
    psi0: &StateVector,
    h: &WeightedPauliSum,
    total_time: f64,
    config: &EvolutionConfig,
) -> Result<EvolutionResult> {
    check_qubits(psi0, h)?;
    let start = Instant::now();
    let spectrum = oracle::to_dense(h, config.oracle_cap)?.spectrum()?;
    let (final_state, c_total) = spectrum.exp_apply(psi0, total_time)?;
    let mut ledger = CostLedger::new();
    ledger.wall_time = start.elapsed().as_secs_f64();
    Ok(EvolutionResult { final_state, c_total, tau: total_time.abs(), sweeps: 0, steps: vec![], reductions: vec![], ledger })
}

/// Output of one Trotter step as seen by the driver.
pub(crate) struct StepOutput {
    pub state: StateVector,
    pub c_a: f64,
    pub x: Vec<f64>,
    pub residual: f64,
    pub solve_residual: f64,
    pub reduction: Option<FastStepResult>,
}

/// Runs `sweeps` first-order sweeps over the terms of `h` in stored order.
pub(crate) fn run_sweeps<F>(
    psi0: &StateVector,
    h: &WeightedPauliSum,
    total_time: f64,
    steps_per_unit: usize,
    config: &EvolutionConfig,
    mut step: F,
) -> Result<EvolutionResult>
where
    F: FnMut(&mut StepContext<'_>, &StateVector, &PauliTerm, f64) -> Result<StepOutput>,
{
    check_qubits(psi0, h)?;
    if !psi0.is_normalized() {
        return Err(QiteError::InvalidStep("initial state must be normalized".into()));
    }
    let start = Instant::now();
    let (sweeps, tau, sign) = schedule(total_time, steps_per_unit)?;
    let spectrum: Option<Spectrum> = if config.oracle_check {
        Some(oracle::to_dense(h, config.oracle_cap)?.spectrum()?)
    } else {
        None
    };

    let mut ctx = StepContext::new(config);
    let mut psi = psi0.clone();
    let mut c_total = 1.0;
    let mut steps = Vec::with_capacity(sweeps * h.terms().len());
    let mut reductions = Vec::new();
    for sweep in 0..sweeps {
        for (term_index, term) in h.terms().iter().enumerate() {
            let signed = PauliTerm { coeff: sign * term.coeff, string: term.string };
            let out = step(&mut ctx, &psi, &signed, tau)?;
            ctx.ledger.record_event(Event::TrotterStep, 1);
            c_total *= out.c_a;
            psi = out.state;
            let step_index = steps.len();
            let fidelity = match &spectrum {
                Some(sp) if term_index + 1 == h.terms().len() => {
                    let t = sign * tau * (sweep + 1) as f64;
                    let (exact, _) = sp.exp_apply(psi0, t)?;
                    Some(psi.overlap(&exact)?.norm())
                }
                _ => None,
            };
            if let Some(mut r) = out.reduction {
                r.step_index = step_index;
                r.term_index = term_index;
                reductions.push(r);
            }
            steps.push(TrotterStepSolution {
                step_index,
                sweep,
                term_index,
                term_label: term.string.to_string(),
                x: out.x,
                c_a: out.c_a,
                c_total,
                residual: out.residual,
                solve_residual: out.solve_residual,
                fidelity,
            });
        }
    }
    ctx.ledger.wall_time = start.elapsed().as_secs_f64();
    Ok(EvolutionResult { final_state: psi, c_total, tau, sweeps, steps, reductions, ledger: ctx.ledger })
}

/// First-order normalization estimate `(1 - tau h e)^-2` for `<sigma> = e`.
pub fn first_order_c(coeff: f64, expectation: f64, tau: f64) -> Result<f64> {
    let base = 1.0 - tau * coeff * expectation;
    if !(base > 0.0) {
        return Err(QiteError::StepSize { value: base, tau });
    }
    Ok(base.powi(-2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_rounds_and_signs() {
        assert_eq!(schedule(1.0, 100).unwrap(), (100, 0.01, 1.0));
        let (s, tau, sign) = schedule(-0.5, 10).unwrap();
        assert_eq!((s, sign), (5, -1.0));
        assert!((tau - 0.1).abs() < 1e-15);
        assert_eq!(schedule(0.0, 10).unwrap().0, 0);
        assert!(schedule(1.0, 0).is_err());
    }

    #[test]
    fn first_order_c_examples() {
        assert_eq!(first_order_c(1.0, 0.0, 0.1).unwrap(), 1.0);
        assert!((first_order_c(1.0, 1.0, 0.1).unwrap() - 0.9f64.powi(-2)).abs() < 1e-15);
        assert_eq!(first_order_c(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(matches!(first_order_c(2.0, 1.0, 0.5), Err(QiteError::StepSize { .. })));
    }

    #[test]
    fn method_parse() {
        assert_eq!("fast".parse::<Method>().unwrap(), Method::Fast);
        assert!("slow".parse::<Method>().is_err());
    }
}
