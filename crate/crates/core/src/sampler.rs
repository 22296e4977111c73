//! Diagonal elements `<psi|exp(t H)|psi>` from an imaginary-time evolution:
//! the evolved normalized state is projected back onto `|psi>` and the
//! projection probability is rescaled by the accumulated normalization.

use serde::{Deserialize, Serialize};

use crate::error::{QiteError, Result};
use crate::evolve::{evolve, EvolutionConfig, Method};
use crate::ledger::CostLedger;
use crate::pauli::WeightedPauliSum;
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    ExactOverlap,
    ShotSampled { shots: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEstimate {
    /// `sqrt(p * c_total)`; zero only when a finite-shot run saw no hits.
    pub value: f64,
    pub c_total: f64,
    pub projection_probability: f64,
    pub mode: ProjectionMode,
    pub method: Method,
    pub steps_per_unit: usize,
    pub time: f64,
    /// Set when shot sampling returned zero hits.
    pub zero_floor: bool,
    pub ledger: CostLedger,
}

/// Estimates `<psi|exp(time H)|psi>`. The element is real and positive
/// because `exp(time H)` is positive definite, so no phase is recovered.
pub fn estimate_diagonal_at(
    h: &WeightedPauliSum,
    psi: &StateVector,
    time: f64,
    steps_per_unit: usize,
    method: Method,
    mode: ProjectionMode,
    config: &EvolutionConfig,
) -> Result<DiagonalEstimate> {
    if let ProjectionMode::ShotSampled { shots: 0, .. } = mode {
        return Err(QiteError::ZeroShots);
    }
    let run = evolve(method, psi, h, time, steps_per_unit, config)?;
    let p = match mode {
        ProjectionMode::ExactOverlap => run.final_state.overlap(psi)?.norm_sqr().min(1.0),
        ProjectionMode::ShotSampled { shots, seed } => run.final_state.sample_projection_seeded(psi, shots, seed)?,
    };
    let value = (p * run.c_total).sqrt();
    Ok(DiagonalEstimate {
        value,
        c_total: run.c_total,
        projection_probability: p,
        mode,
        method,
        steps_per_unit,
        time,
        zero_floor: p == 0.0 && matches!(mode, ProjectionMode::ShotSampled { .. }),
        ledger: run.ledger,
    })
}

/// `<psi|exp(H)|psi>`.
pub fn estimate_diagonal(
    h: &WeightedPauliSum,
    psi: &StateVector,
    steps_per_unit: usize,
    method: Method,
    mode: ProjectionMode,
    config: &EvolutionConfig,
) -> Result<DiagonalEstimate> {
    estimate_diagonal_at(h, psi, 1.0, steps_per_unit, method, mode, config)
}

/// Standard, fast and oracle estimates of `<psi|exp(H)|psi>`, in that order.
pub fn compare_methods(
    h: &WeightedPauliSum,
    psi: &StateVector,
    steps_per_unit: usize,
    config: &EvolutionConfig,
) -> Result<Vec<DiagonalEstimate>> {
    [Method::Standard, Method::Fast, Method::Oracle]
        .into_iter()
        .map(|m| estimate_diagonal(h, psi, steps_per_unit, m, ProjectionMode::ExactOverlap, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(n: usize, terms: &[(f64, &str)]) -> WeightedPauliSum {
        WeightedPauliSum::from_labels(n, terms).unwrap()
    }

    #[test]
    fn zero_hamiltonian_gives_one() {
        let cfg = EvolutionConfig::default();
        let psi = StateVector::basis(2, 3).unwrap();
        for est in compare_methods(&WeightedPauliSum::zero(2).unwrap(), &psi, 10, &cfg).unwrap() {
            assert!((est.value - 1.0).abs() < 1e-12, "{:?}", est.method);
        }
    }

    #[test]
    fn z_on_zero_gives_e() {
        let cfg = EvolutionConfig::default();
        let zero = StateVector::zero(1).unwrap();
        for method in [Method::Standard, Method::Fast, Method::Oracle] {
            let est =
                estimate_diagonal(&h(1, &[(1.0, "Z")]), &zero, 200, method, ProjectionMode::ExactOverlap, &cfg).unwrap();
            assert!((est.value / 1f64.exp() - 1.0).abs() < 0.01, "{method:?} {}", est.value);
            assert!((est.projection_probability - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn x_on_zero_gives_cosh() {
        let cfg = EvolutionConfig::default();
        let zero = StateVector::zero(1).unwrap();
        for method in [Method::Standard, Method::Fast] {
            let est =
                estimate_diagonal(&h(1, &[(1.0, "X")]), &zero, 200, method, ProjectionMode::ExactOverlap, &cfg).unwrap();
            assert!((est.value / 1f64.cosh() - 1.0).abs() < 0.02, "{method:?} {}", est.value);
        }
    }

    #[test]
    fn shot_mode_zero_floor() {
        let cfg = EvolutionConfig::default();
        let zero = StateVector::zero(1).unwrap();
        // exp(t X) with large t drives |0> close to |+>, p ~ 1/2; a single shot
        // may miss.
        let mut saw_floor = false;
        for seed in 0..20 {
            let est = estimate_diagonal(
                &h(1, &[(1.0, "X")]),
                &zero,
                50,
                Method::Fast,
                ProjectionMode::ShotSampled { shots: 1, seed },
                &cfg,
            )
            .unwrap();
            if est.zero_floor {
                saw_floor = true;
                assert_eq!(est.value, 0.0);
            }
        }
        assert!(saw_floor);
        let err = estimate_diagonal(
            &h(1, &[(1.0, "X")]),
            &zero,
            50,
            Method::Fast,
            ProjectionMode::ShotSampled { shots: 0, seed: 0 },
            &cfg,
        );
        assert!(matches!(err, Err(QiteError::ZeroShots)));
    }

    #[test]
    fn weight_n_term_eigenstate() {
        let cfg = EvolutionConfig::default();
        let n = 3;
        let zz = h(n, &[(1.0, "ZZZ")]);
        let psi = StateVector::zero(n).unwrap();
        let rows = compare_methods(&zz, &psi, 50, &cfg).unwrap();
        let fast = &rows[1];
        assert!((fast.value - 1f64.exp()).abs() < 1e-9);
        assert_eq!(fast.ledger.rotations, 3 * 3 * 50);
        let standard = &rows[0];
        assert_eq!(standard.ledger.max_solve_dim(), 4usize.pow(3) - 1);
        assert!((rows[2].value - 1f64.exp()).abs() < 1e-12);
    }
}
