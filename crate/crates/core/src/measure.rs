//! Expectation values as the algorithms request them: cached per state
//! snapshot, optionally replaced by finite-shot binomial estimates.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QiteError, Result};
use crate::ledger::{CostLedger, Event};
use crate::pauli::PauliString;
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMode {
    Exact,
    /// Each distinct expectation is replaced by a binomial estimate over
    /// `shots` single-shot measurements of the string.
    Shots { shots: u64 },
}

/// Serves `<psi|P|psi>` for one fixed state. Each distinct string is
/// evaluated (or sampled) once; later requests reuse the value.
pub(crate) struct Meter<'a> {
    state: &'a StateVector,
    cache: HashMap<PauliString, f64>,
    shots: Option<(u64, &'a mut ChaCha8Rng)>,
    requests: u64,
}

impl<'a> Meter<'a> {
    pub fn exact(state: &'a StateVector) -> Meter<'a> {
        Meter { state, cache: HashMap::new(), shots: None, requests: 0 }
    }

    pub fn new(state: &'a StateVector, mode: ExpectationMode, rng: &'a mut ChaCha8Rng) -> Result<Meter<'a>> {
        let shots = match mode {
            ExpectationMode::Exact => None,
            ExpectationMode::Shots { shots: 0 } => return Err(QiteError::ZeroShots),
            ExpectationMode::Shots { shots } => Some((shots, rng)),
        };
        Ok(Meter { state, cache: HashMap::new(), shots, requests: 0 })
    }

    pub fn state(&self) -> &StateVector {
        self.state
    }

    /// `<psi|P|psi>`; the identity is 1 and is not counted as a request.
    pub fn expectation(&mut self, p: &PauliString) -> Result<f64> {
        if p.qubit_count() != self.state.qubit_count() {
            return Err(QiteError::Dimension { expected: self.state.qubit_count(), found: p.qubit_count() });
        }
        if p.is_identity() {
            return Ok(1.0);
        }
        self.requests += 1;
        if let Some(v) = self.cache.get(p) {
            return Ok(*v);
        }
        let exact = self.state.expectation(p)?;
        let value = match self.shots.as_mut() {
            None => exact,
            Some((shots, rng)) => {
                let prob = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
                let dist = Binomial::new(*shots, prob).map_err(|e| QiteError::Config(e.to_string()))?;
                let ups = dist.sample(*rng) as f64;
                2.0 * ups / *shots as f64 - 1.0
            }
        };
        self.cache.insert(*p, value);
        Ok(value)
    }

    pub fn flush(self, ledger: &mut CostLedger) {
        ledger.record_event(Event::Expectation, self.requests);
        ledger.record_event(Event::DistinctExpectation, self.cache.len() as u64);
    }
}
