//! Finite-temperature averages by Metropolis sampling over computational
//! basis labels `i` with weights `w_i = <i|exp(-beta H)|i>`.
//!
//! Two estimators are provided:
//! - eigenbasis: `O` is diagonal in the computational basis and the sample at
//!   label `i` is its eigenvalue `O_i`;
//! - METTS ratio: the sample at label `i` is
//!   `<i|exp(-beta H/2) O exp(-beta H/2)|i> / w_i`, with the numerator
//!   obtained as `c_half * <phi_i|O|phi_i>` from the half-time evolution
//!   `phi_i ~ exp(-beta H/2)|i>`.
//!
//! The partition function never appears: acceptance uses weight ratios only.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QiteError, Result};
use crate::evolve::{evolve, EvolutionConfig, Method};
use crate::ledger::CostLedger;
use crate::oracle::{self, Spectrum, DEFAULT_ORACLE_CAP};
use crate::pauli::WeightedPauliSum;
use crate::sampler::{estimate_diagonal_at, ProjectionMode};
use crate::state::StateVector;

/// Relative mismatch between `w_i` and the half-evolution normalization above
/// which a label is flagged.
pub const CONSISTENCY_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    /// Weights from an imaginary-time evolution with exact-overlap projection.
    Qite { method: Method, steps_per_unit: usize, config: EvolutionConfig },
    /// Exact weights from the dense spectrum.
    Oracle { cap: usize },
}

impl WeightSource {
    pub fn fast(steps_per_unit: usize) -> WeightSource {
        WeightSource::Qite { method: Method::Fast, steps_per_unit, config: EvolutionConfig::default() }
    }

    pub fn oracle() -> WeightSource {
        WeightSource::Oracle { cap: DEFAULT_ORACLE_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    /// Flip one uniformly chosen bit; accept with `min(1, w'/w)`.
    BitFlip,
    /// METTS collapse (Stoudenmire and White): the next label is a
    /// computational-basis measurement of `phi_i`, always accepted. Only
    /// meaningful for the METTS-ratio estimator.
    MettsCollapse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub steps: usize,
    /// Defaults to `max(steps / 10, 100)`.
    pub burn_in: Option<usize>,
    pub batches: usize,
    pub chains: usize,
    pub seed: u64,
    pub proposal: Proposal,
    pub record_trace: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            steps: 20_000,
            burn_in: None,
            batches: 20,
            chains: 1,
            seed: 0,
            proposal: Proposal::BitFlip,
            record_trace: false,
        }
    }
}

impl ChainConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| (self.steps / 10).max(100))
    }

    fn validate(&self) -> Result<()> {
        if self.batches < 10 {
            return Err(QiteError::Config("at least 10 batches are required".into()));
        }
        if self.chains == 0 {
            return Err(QiteError::Config("at least one chain is required".into()));
        }
        if self.steps <= self.burn_in() + self.batches {
            return Err(QiteError::Config(format!(
                "chain of {} steps leaves too few samples after a burn-in of {}",
                self.steps,
                self.burn_in()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Eigenbasis,
    MettsRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub acceptance_rate: f64,
    pub burn_in: usize,
    pub estimator: Estimator,
    pub seed: u64,
    pub chains: usize,
    /// Proposals rejected because the weight estimate was not positive.
    pub nonpositive_weights: u64,
    /// Labels whose `w_i` and half-evolution normalization disagree by more
    /// than [`CONSISTENCY_TOL`].
    pub consistency_anomalies: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub chain: usize,
    pub step: usize,
    pub label: usize,
    pub weight: f64,
    pub accepted: bool,
    pub sample: f64,
}

#[derive(Debug, Clone)]
pub struct ThermalRun {
    pub estimate: ThermalEstimate,
    pub trace: Vec<TraceRow>,
    /// Post-burn-in visit counts per label, summed over chains.
    pub histogram: Vec<u64>,
    pub ledger: CostLedger,
}

struct LabelData {
    weight: f64,
    sample: f64,
    /// Normalized `phi_i`, kept for the collapse proposal.
    half_state: Option<StateVector>,
    anomalous: bool,
}

enum Observable<'a> {
    Diagonal(&'a [f64]),
    Pauli(&'a WeightedPauliSum),
}

struct Problem<'a> {
    h: &'a WeightedPauliSum,
    beta: f64,
    observable: Observable<'a>,
    source: &'a WeightSource,
    spectrum: Option<Spectrum>,
    keep_half_state: bool,
}

impl Problem<'_> {
    fn label_data(&self, label: usize, ledger: &mut CostLedger) -> Result<LabelData> {
        let n = self.h.qubit_count();
        let basis = StateVector::basis(n, label)?;
        let weight = match (self.source, &self.spectrum) {
            (WeightSource::Oracle { .. }, Some(sp)) => sp.exp_diagonal(-self.beta)[label],
            (WeightSource::Qite { method, steps_per_unit, config }, _) => {
                let est = estimate_diagonal_at(
                    self.h,
                    &basis,
                    -self.beta,
                    *steps_per_unit,
                    *method,
                    ProjectionMode::ExactOverlap,
                    config,
                )?;
                ledger.merge(&est.ledger);
                est.value
            }
            (WeightSource::Oracle { .. }, None) => unreachable!("oracle spectrum is built up front"),
        };
        match &self.observable {
            Observable::Diagonal(values) => {
                Ok(LabelData { weight, sample: values[label], half_state: None, anomalous: false })
            }
            Observable::Pauli(o) => {
                let (phi, c_half) = match (self.source, &self.spectrum) {
                    (WeightSource::Oracle { .. }, Some(sp)) => sp.exp_apply(&basis, -self.beta / 2.0)?,
                    (WeightSource::Qite { method, steps_per_unit, config }, _) => {
                        let run = evolve(*method, &basis, self.h, -self.beta / 2.0, *steps_per_unit, config)?;
                        ledger.merge(&run.ledger);
                        (run.final_state, run.c_total)
                    }
                    (WeightSource::Oracle { .. }, None) => unreachable!("oracle spectrum is built up front"),
                };
                let numerator = c_half * phi.expectation_sum(o)?;
                let anomalous = weight > 0.0 && ((weight - c_half) / weight).abs() > CONSISTENCY_TOL;
                Ok(LabelData {
                    weight,
                    sample: numerator / weight,
                    half_state: self.keep_half_state.then_some(phi),
                    anomalous,
                })
            }
        }
    }
}

struct ChainOutput {
    samples: Vec<f64>,
    accepted: u64,
    proposals: u64,
    nonpositive: u64,
    anomalies: u64,
    trace: Vec<TraceRow>,
    histogram: Vec<u64>,
    ledger: CostLedger,
}

fn run_chain(problem: &Problem<'_>, chain_cfg: &ChainConfig, chain: usize, seed: u64) -> Result<ChainOutput> {
    let n = problem.h.qubit_count();
    let dim = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ledger = CostLedger::new();
    let mut cache: HashMap<usize, LabelData> = HashMap::new();
    let mut anomalies = 0u64;
    let mut fetch = |label: usize, ledger: &mut CostLedger, cache: &mut HashMap<usize, LabelData>| -> Result<()> {
        if let std::collections::hash_map::Entry::Vacant(slot) = cache.entry(label) {
            let data = problem.label_data(label, ledger)?;
            if data.anomalous {
                anomalies += 1;
            }
            slot.insert(data);
        }
        Ok(())
    };

    let burn_in = chain_cfg.burn_in();
    let mut current = rng.gen_range(0..dim);
    fetch(current, &mut ledger, &mut cache)?;
    let mut out = ChainOutput {
        samples: Vec::with_capacity(chain_cfg.steps - burn_in),
        accepted: 0,
        proposals: 0,
        nonpositive: 0,
        anomalies: 0,
        trace: Vec::new(),
        histogram: vec![0; dim],
        ledger: CostLedger::new(),
    };
    for step in 0..chain_cfg.steps {
        let accepted = match chain_cfg.proposal {
            Proposal::BitFlip => {
                let proposal = current ^ (1usize << rng.gen_range(0..n));
                fetch(proposal, &mut ledger, &mut cache)?;
                let w_new = cache[&proposal].weight;
                let w_old = cache[&current].weight;
                out.proposals += 1;
                if !(w_new > 0.0) || !w_new.is_finite() {
                    out.nonpositive += 1;
                    false
                } else if w_new >= w_old || rng.gen::<f64>() < w_new / w_old {
                    current = proposal;
                    true
                } else {
                    false
                }
            }
            Proposal::MettsCollapse => {
                let phi = cache[&current]
                    .half_state
                    .as_ref()
                    .ok_or_else(|| QiteError::Config("collapse proposal needs the METTS estimator".into()))?;
                current = phi.sample_basis(&mut rng);
                fetch(current, &mut ledger, &mut cache)?;
                out.proposals += 1;
                true
            }
        };
        if accepted {
            out.accepted += 1;
        }
        let data = &cache[&current];
        if step >= burn_in {
            out.samples.push(data.sample);
            out.histogram[current] += 1;
        }
        if chain_cfg.record_trace {
            out.trace.push(TraceRow { chain, step, label: current, weight: data.weight, accepted, sample: data.sample });
        }
    }
    out.anomalies = anomalies;
    out.ledger = ledger;
    Ok(out)
}

fn batch_means(samples: &[f64], batches: usize) -> Vec<f64> {
    let size = samples.len() / batches;
    (0..batches)
        .map(|b| samples[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect()
}

fn run(problem: Problem<'_>, estimator: Estimator, chain_cfg: &ChainConfig) -> Result<ThermalRun> {
    chain_cfg.validate()?;
    if !(problem.beta >= 0.0) || !problem.beta.is_finite() {
        return Err(QiteError::Config(format!("beta must be finite and non-negative, got {}", problem.beta)));
    }
    if chain_cfg.proposal == Proposal::MettsCollapse && estimator != Estimator::MettsRatio {
        return Err(QiteError::Config("collapse proposal needs the METTS estimator".into()));
    }
    let mut seeder = ChaCha8Rng::seed_from_u64(chain_cfg.seed);
    let seeds: Vec<u64> = (0..chain_cfg.chains).map(|_| seeder.gen()).collect();
    let outputs: Vec<Result<ChainOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .enumerate()
            .map(|(chain, &seed)| {
                let problem = &problem;
                scope.spawn(move || run_chain(problem, chain_cfg, chain, seed))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });

    let dim = 1usize << problem.h.qubit_count();
    let mut means = Vec::new();
    let mut trace = Vec::new();
    let mut histogram = vec![0u64; dim];
    let mut ledger = CostLedger::new();
    let (mut accepted, mut proposals, mut nonpositive, mut anomalies, mut samples) = (0, 0, 0, 0, 0);
    for out in outputs {
        let out = out?;
        means.extend(batch_means(&out.samples, chain_cfg.batches));
        samples += out.samples.len();
        accepted += out.accepted;
        proposals += out.proposals;
        nonpositive += out.nonpositive;
        anomalies += out.anomalies;
        trace.extend(out.trace);
        histogram.iter_mut().zip(&out.histogram).for_each(|(a, b)| *a += b);
        ledger.merge(&out.ledger);
    }
    let b = means.len() as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let estimate = ThermalEstimate {
        mean,
        stderr: (var / b).sqrt(),
        samples,
        acceptance_rate: if proposals == 0 { 0.0 } else { accepted as f64 / proposals as f64 },
        burn_in: chain_cfg.burn_in(),
        estimator,
        seed: chain_cfg.seed,
        chains: chain_cfg.chains,
        nonpositive_weights: nonpositive,
        consistency_anomalies: anomalies,
    };
    Ok(ThermalRun { estimate, trace, histogram, ledger })
}

fn spectrum_for(h: &WeightedPauliSum, source: &WeightSource) -> Result<Option<Spectrum>> {
    match source {
        WeightSource::Oracle { cap } => Ok(Some(oracle::to_dense(h, *cap)?.spectrum()?)),
        WeightSource::Qite { .. } => Ok(None),
    }
}

/// Thermal average of an observable diagonal in the computational basis,
/// given by its eigenvalue at each basis label.
pub fn eigenbasis_thermal(
    h: &WeightedPauliSum,
    eigenvalues: &[f64],
    beta: f64,
    source: &WeightSource,
    chain: &ChainConfig,
) -> Result<ThermalRun> {
    let dim = 1usize << h.qubit_count();
    if eigenvalues.len() != dim {
        return Err(QiteError::AmplitudeCount { qubits: h.qubit_count(), found: eigenvalues.len() });
    }
    let problem = Problem {
        h,
        beta,
        observable: Observable::Diagonal(eigenvalues),
        source,
        spectrum: spectrum_for(h, source)?,
        keep_half_state: false,
    };
    run(problem, Estimator::Eigenbasis, chain)
}

/// Eigenvalues of an I/Z-only observable at every computational basis label.
pub fn diagonal_eigenvalues(o: &WeightedPauliSum) -> Result<Vec<f64>> {
    let dim = 1usize << o.qubit_count();
    (0..dim)
        .map(|i| o.diagonal_value(i).ok_or_else(|| QiteError::Config("observable is not diagonal".into())))
        .collect()
}

/// METTS-style ratio estimator for a general Pauli-sum observable.
pub fn metts_ratio_thermal(
    h: &WeightedPauliSum,
    o: &WeightedPauliSum,
    beta: f64,
    source: &WeightSource,
    chain: &ChainConfig,
) -> Result<ThermalRun> {
    if o.qubit_count() != h.qubit_count() {
        return Err(QiteError::Dimension { expected: h.qubit_count(), found: o.qubit_count() });
    }
    let problem = Problem {
        h,
        beta,
        observable: Observable::Pauli(o),
        source,
        spectrum: spectrum_for(h, source)?,
        keep_half_state: chain.proposal == Proposal::MettsCollapse,
    };
    run(problem, Estimator::MettsRatio, chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_thermal_average;

    fn h(n: usize, terms: &[(f64, &str)]) -> WeightedPauliSum {
        WeightedPauliSum::from_labels(n, terms).unwrap()
    }

    fn within(est: &ThermalEstimate, target: f64) -> bool {
        (est.mean - target).abs() <= 3.0 * est.stderr
    }

    #[test]
    fn single_qubit_eigenbasis() {
        let ham = h(1, &[(-1.0, "Z")]);
        let run = eigenbasis_thermal(&ham, &[1.0, -1.0], 1.0, &WeightSource::fast(100), &ChainConfig::default())
            .unwrap();
        assert!(within(&run.estimate, 1f64.tanh()), "{:?}", run.estimate);
        assert!(run.estimate.acceptance_rate > 0.0 && run.estimate.acceptance_rate <= 1.0);
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let ham = WeightedPauliSum::transverse_ising(2, 1.0, 0.5).unwrap();
        let o = h(2, &[(1.0, "ZI"), (0.5, "IZ"), (0.3, "ZZ"), (0.25, "II")]);
        let values = diagonal_eigenvalues(&o).unwrap();
        let run = eigenbasis_thermal(&ham, &values, 0.0, &WeightSource::fast(50), &ChainConfig::default()).unwrap();
        assert!(within(&run.estimate, 0.25), "{:?}", run.estimate);
        assert_eq!(run.estimate.acceptance_rate, 1.0);

        let run = metts_ratio_thermal(&ham, &ham, 0.0, &WeightSource::fast(50), &ChainConfig::default()).unwrap();
        // Tr(H)/4 = 0 and every sample is <i|H|i>.
        assert!(within(&run.estimate, 0.0), "{:?}", run.estimate);
    }

    #[test]
    fn metts_single_qubit_energy() {
        let ham = h(1, &[(-1.0, "Z")]);
        let run = metts_ratio_thermal(&ham, &ham, 1.0, &WeightSource::fast(100), &ChainConfig::default()).unwrap();
        assert!(within(&run.estimate, -(1f64.tanh())), "{:?}", run.estimate);
        assert_eq!(run.estimate.consistency_anomalies, 0);
    }

    #[test]
    fn oracle_weights_match_exact_average() {
        let ham = WeightedPauliSum::transverse_ising(2, 1.0, 0.5).unwrap();
        let zz = h(2, &[(1.0, "ZZ")]);
        let exact = exact_thermal_average(&ham, &zz, 1.0, 12).unwrap();
        let values = diagonal_eigenvalues(&zz).unwrap();
        let run = eigenbasis_thermal(&ham, &values, 1.0, &WeightSource::oracle(), &ChainConfig::default()).unwrap();
        assert!(within(&run.estimate, exact), "{:?} vs {exact}", run.estimate);
    }

    #[test]
    fn collapse_proposal_with_oracle() {
        let ham = WeightedPauliSum::transverse_ising(2, 1.0, 0.5).unwrap();
        let exact = exact_thermal_average(&ham, &ham, 1.0, 12).unwrap();
        let cfg = ChainConfig { proposal: Proposal::MettsCollapse, ..ChainConfig::default() };
        let run = metts_ratio_thermal(&ham, &ham, 1.0, &WeightSource::oracle(), &cfg).unwrap();
        assert!(within(&run.estimate, exact), "{:?} vs {exact}", run.estimate);
        assert!(eigenbasis_thermal(&ham, &[0.0; 4], 1.0, &WeightSource::oracle(), &cfg).is_err());
    }

    #[test]
    fn partition_weights_sum_to_one() {
        for n in 1..=4 {
            let ham = WeightedPauliSum::transverse_ising(n, 1.0, 0.7).unwrap();
            let sp = oracle::to_dense(&ham, 12).unwrap().spectrum().unwrap();
            let w = sp.exp_diagonal(-1.3);
            let z: f64 = sp.values.iter().map(|e| (-1.3 * e).exp()).sum();
            let total: f64 = w.iter().map(|wi| wi / z).sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let ham = WeightedPauliSum::transverse_ising(2, 1.0, 0.5).unwrap();
        let cfg = ChainConfig { steps: 2000, chains: 2, seed: 9, ..ChainConfig::default() };
        let a = metts_ratio_thermal(&ham, &ham, 0.5, &WeightSource::fast(20), &cfg).unwrap();
        let b = metts_ratio_thermal(&ham, &ham, 0.5, &WeightSource::fast(20), &cfg).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.ledger.rotations, b.ledger.rotations);
    }

    #[test]
    fn config_validation() {
        let ham = h(1, &[(-1.0, "Z")]);
        let short = ChainConfig { steps: 50, ..ChainConfig::default() };
        assert!(eigenbasis_thermal(&ham, &[1.0, -1.0], 1.0, &WeightSource::oracle(), &short).is_err());
        assert!(eigenbasis_thermal(&ham, &[1.0], 1.0, &WeightSource::oracle(), &ChainConfig::default()).is_err());
        assert!(eigenbasis_thermal(&ham, &[1.0, -1.0], -1.0, &WeightSource::oracle(), &ChainConfig::default()).is_err());
    }

    #[test]
    fn estimator_gauge() {
        let ham = WeightedPauliSum::transverse_ising(2, 1.0, 0.5).unwrap();
        let shifted = ham.shifted(0.8).unwrap();
        let zz = h(2, &[(1.0, "ZZ")]);
        let cfg = ChainConfig { steps: 5000, seed: 4, ..ChainConfig::default() };
        let src = WeightSource::oracle();
        let a = metts_ratio_thermal(&ham, &ham, 1.0, &src, &cfg).unwrap().estimate;
        let b = metts_ratio_thermal(&shifted, &shifted, 1.0, &src, &cfg).unwrap().estimate;
        assert!((b.mean - a.mean - 0.8).abs() < 1e-9, "{} {}", a.mean, b.mean);
        let a = metts_ratio_thermal(&ham, &zz, 1.0, &src, &cfg).unwrap().estimate;
        let b = metts_ratio_thermal(&shifted, &zz, 1.0, &src, &cfg).unwrap().estimate;
        assert!((b.mean - a.mean).abs() < 1e-9);

        let src = WeightSource::fast(50);
        let a = metts_ratio_thermal(&ham, &ham, 0.5, &src, &cfg).unwrap().estimate;
        let b = metts_ratio_thermal(&shifted, &shifted, 0.5, &src, &cfg).unwrap().estimate;
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((b.mean - a.mean - 0.8).abs() < 4.0 * se + 1e-3, "{a:?} {b:?}");
    }
}
