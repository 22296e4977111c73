//! Fast QITE: one Trotter step `exp(tau h sigma_a)` is reduced site by site.
//!
//! At each non-identity site `s` of the current term `h P`, with
//! `P = sigma_s (x) R`, a three-parameter fit
//! `i sum_b x_b sigma_b |psi> ~ (sigma_s - <sigma_s>) |psi>` over
//! `b in {X, Y, Z}` at `s` yields the unitary
//! `U = exp(i tau h' sum_b x_b sigma_b (x) R)`, applied as three Pauli
//! rotations in X, Y, Z order. The remaining imaginary-time problem is
//! `h <sigma_s> R` on the rotated state. After the last site the term is a
//! multiple of the identity and only rescales the norm.
//!
//! `h'` carries the first-order normalization `(1 - tau h <P>)` of the
//! current stage, so a weight-1 term reproduces standard QITE on the
//! single-site domain exactly.

use serde::{Deserialize, Serialize};

use crate::error::{QiteError, Result};
use crate::evolve::{first_order_c, run_sweeps, EvolutionConfig, EvolutionResult, NormalizationMode, StepContext, StepOutput};
use crate::ledger::{CostLedger, Event};
use crate::measure::Meter;
use crate::pauli::{Pauli, PauliString, PauliTerm, WeightedPauliSum};
use crate::standard::{build_m_with, build_r_with, solve_step_with_cutoff, OperatorDomain, DEFAULT_CUTOFF};
use crate::state::StateVector;

/// Reductions stop once the carried coefficient falls below this magnitude.
pub const COEFF_UNDERFLOW: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteOrder {
    Ascending,
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteSolution {
    /// Coefficients of X, Y, Z at the site.
    pub x: [f64; 3],
    /// `||i sum_b x_b sigma_b psi - (sigma_t - <sigma_t>) psi||`
    pub residual: f64,
    pub solve_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionRecord {
    pub site: usize,
    pub target: Pauli,
    pub x_site: [f64; 3],
    /// `<sigma_site>` on the state entering this reduction.
    pub expectation_used: f64,
    /// `<P>` of the full current term on the same state.
    pub term_expectation: f64,
    pub coefficient_in: f64,
    pub coefficient_out: f64,
    pub residual: f64,
    /// This reduction's share of `c_a` (first-order mode; 1 in exact mode).
    pub c_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastStepResult {
    pub step_index: usize,
    pub term_index: usize,
    pub term_label: String,
    pub reductions: Vec<ReductionRecord>,
    pub c_a: f64,
    /// Coefficient of the identity left after the last reduction.
    pub final_scalar: f64,
    /// Reductions stopped early because the coefficient underflowed.
    pub truncated: bool,
}

fn site_fit(meter: &mut Meter<'_>, site: usize, target: Pauli, cutoff: f64, ledger: &mut CostLedger) -> Result<SiteSolution> {
    let psi = meter.state();
    let n = psi.qubit_count();
    if site >= n {
        return Err(QiteError::SiteOutOfRange { site, qubits: n });
    }
    if target == Pauli::I {
        return Ok(SiteSolution { x: [0.0; 3], residual: 0.0, solve_residual: 0.0 });
    }
    let domain = OperatorDomain::single_site(n, site)?;
    let target_string = PauliString::single(n, site, target)?;
    let m = build_m_with(meter, &domain)?;
    let r = build_r_with(meter, &PauliTerm { coeff: 1.0, string: target_string }, 0.0, &domain)?;
    let solve = solve_step_with_cutoff(&m, &r, cutoff)?;
    ledger.record_event(Event::LinearSolve, 3);
    let x = [solve.x[0], solve.x[1], solve.x[2]];

    let psi = meter.state();
    let e = psi.expectation(&target_string)?;
    let mut lhs = StateVector::from_amplitudes(n, vec![Default::default(); psi.dim()])?;
    for (b, &xb) in domain.strings().iter().zip(&x) {
        if xb != 0.0 {
            lhs.axpy(num_complex::Complex64::new(0.0, xb), &psi.apply_pauli(b)?)?;
        }
    }
    let mut rhs = psi.apply_pauli(&target_string)?;
    rhs.axpy(num_complex::Complex64::new(-e, 0.0), psi)?;
    Ok(SiteSolution { x, residual: lhs.distance(&rhs)?, solve_residual: solve.residual })
}

/// Least-squares fit of `i sum_b x_b sigma_b |psi> = (sigma_t - <sigma_t>)|psi>`
/// over `b in {X, Y, Z}` at `site`.
pub fn solve_site(psi: &StateVector, site: usize, target: Pauli) -> Result<SiteSolution> {
    site_fit(&mut Meter::exact(psi), site, target, DEFAULT_CUTOFF, &mut CostLedger::new())
}

fn reduce_with(
    ctx: &mut StepContext<'_>,
    psi: &StateVector,
    term: &PauliTerm,
    site: usize,
    tau: f64,
) -> Result<(StateVector, PauliTerm, ReductionRecord)> {
    let n = term.string.qubit_count();
    if site >= n {
        return Err(QiteError::SiteOutOfRange { site, qubits: n });
    }
    let (target, rest) = term.string.restrict_site(site)?;
    if target == Pauli::I {
        return Err(QiteError::SiteNotInSupport { site, string: term.string.to_string() });
    }
    let config = ctx.config;
    let (solution, e_site, e_term) = {
        let mut meter = Meter::new(psi, config.expectation, &mut ctx.rng)?;
        let e_site = meter.expectation(&PauliString::single(n, site, target)?)?;
        let e_term = meter.expectation(&term.string)?;
        let solution = site_fit(&mut meter, site, target, config.svd_cutoff, &mut ctx.ledger)?;
        meter.flush(&mut ctx.ledger);
        (solution, e_site, e_term)
    };
    let h = term.coeff;
    let scale = tau * h * (1.0 - tau * h * e_term);
    let mut state = psi.clone();
    for (b, &xb) in Pauli::NON_IDENTITY.iter().zip(&solution.x) {
        state.rotate(&rest.with_site(site, *b)?, scale * xb)?;
    }
    ctx.ledger.record_event(Event::Rotation, 3);
    let next = PauliTerm { coeff: h * e_site, string: rest };
    let record = ReductionRecord {
        site,
        target,
        x_site: solution.x,
        expectation_used: e_site,
        term_expectation: e_term,
        coefficient_in: h,
        coefficient_out: next.coeff,
        residual: solution.residual,
        c_factor: 1.0,
    };
    Ok((state, next, record))
}

/// One reduction: eliminates `site` from `term`, returning the rotated state,
/// the shrunken term `(h <sigma_site>, rest)`, and the record.
pub fn reduce_once(
    psi: &StateVector,
    term: &PauliTerm,
    site: usize,
    tau: f64,
    config: &EvolutionConfig,
) -> Result<(StateVector, PauliTerm, ReductionRecord)> {
    let mut ctx = StepContext::new(config);
    reduce_with(&mut ctx, psi, term, site, tau)
}

pub(crate) fn fast_step_with(
    ctx: &mut StepContext<'_>,
    psi: &StateVector,
    term: &PauliTerm,
    tau: f64,
) -> Result<(StateVector, FastStepResult)> {
    if term.string.qubit_count() != psi.qubit_count() {
        return Err(QiteError::Dimension { expected: psi.qubit_count(), found: term.string.qubit_count() });
    }
    let mut sites = term.string.support();
    if ctx.config.site_order == SiteOrder::Descending {
        sites.reverse();
    }
    let exact_c = match ctx.config.normalization {
        NormalizationMode::Exact => Some(psi.imaginary_step_exact(&term.string, tau * term.coeff)?.1),
        NormalizationMode::FirstOrder => None,
    };

    let mut state = psi.clone();
    let mut current = *term;
    let mut reductions: Vec<ReductionRecord> = Vec::with_capacity(sites.len());
    let mut truncated = false;
    for (k, &site) in sites.iter().enumerate() {
        let (next_state, next_term, record) = reduce_with(ctx, &state, &current, site, tau)?;
        state = next_state;
        current = next_term;
        reductions.push(record);
        if current.coeff.abs() < COEFF_UNDERFLOW && k + 1 < sites.len() {
            truncated = true;
            break;
        }
    }

    let final_scalar = if truncated || current.coeff.abs() < COEFF_UNDERFLOW { 0.0 } else { current.coeff };
    let c_a = match exact_c {
        Some(c) => c,
        None => {
            // Stage j estimates ||exp(tau h_j P_j) psi_j||^2; consecutive
            // stages are equal to first order, so each reduction contributes
            // the ratio of its entering and leaving estimates, and the
            // identity remainder contributes exp(2 tau h_m) exactly.
            let mut estimates = reductions
                .iter()
                .map(|r| first_order_c(r.coefficient_in, r.term_expectation, tau))
                .collect::<Result<Vec<f64>>>()?;
            estimates.push(first_order_c(final_scalar, 1.0, tau)?);
            for (j, r) in reductions.iter_mut().enumerate() {
                r.c_factor = estimates[j] / estimates[j + 1];
            }
            let remainder = (2.0 * tau * final_scalar).exp();
            reductions.iter().map(|r| r.c_factor).product::<f64>() * remainder
        }
    };
    Ok((
        state,
        FastStepResult {
            step_index: 0,
            term_index: 0,
            term_label: term.string.to_string(),
            reductions,
            c_a,
            final_scalar,
            truncated,
        },
    ))
}

/// Implements `exp(tau h sigma_a)` as the sequence of reductions over the
/// support of `sigma_a`.
pub fn fast_trotter_step(
    psi: &StateVector,
    term: &PauliTerm,
    tau: f64,
    config: &EvolutionConfig,
) -> Result<(StateVector, FastStepResult, CostLedger)> {
    let mut ctx = StepContext::new(config);
    let (state, result) = fast_step_with(&mut ctx, psi, term, tau)?;
    Ok((state, result, ctx.ledger))
}

fn driver_step(ctx: &mut StepContext<'_>, psi: &StateVector, term: &PauliTerm, tau: f64) -> Result<StepOutput> {
    let (state, result) = fast_step_with(ctx, psi, term, tau)?;
    let (target, _) = psi.imaginary_step_exact(&term.string, tau * term.coeff)?;
    let residual = state.distance(&target)?;
    let solve_residual = result.reductions.iter().map(|r| r.residual).fold(0.0, f64::max);
    let x = result.reductions.iter().flat_map(|r| r.x_site).collect();
    Ok(StepOutput { state, c_a: result.c_a, x, residual, solve_residual, reduction: Some(result) })
}

/// Fast QITE over `exp(total_time H)`.
pub fn fast_qite_evolve(
    psi0: &StateVector,
    h: &WeightedPauliSum,
    total_time: f64,
    steps_per_unit: usize,
    config: &EvolutionConfig,
) -> Result<EvolutionResult> {
    run_sweeps(psi0, h, total_time, steps_per_unit, config, driver_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::pauli_matrix;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn term(h: f64, s: &str) -> PauliTerm {
        PauliTerm { coeff: h, string: ps(s) }
    }

    fn bell() -> StateVector {
        let z = Complex64::new(0.0, 0.0);
        let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
        StateVector::from_amplitudes(2, vec![a, z, z, a]).unwrap()
    }

    /// Real least squares over the stacked real/imaginary parts, solved by
    /// normal equations on dense matrices.
    fn brute_force_site(psi: &StateVector, site: usize, target: Pauli) -> ([f64; 3], f64) {
        let n = psi.qubit_count();
        let v = DVector::from_column_slice(psi.amplitudes());
        let dim = v.len();
        let mut a = DMatrix::<f64>::zeros(2 * dim, 3);
        for (k, p) in Pauli::NON_IDENTITY.iter().enumerate() {
            let col = pauli_matrix(&PauliString::single(n, site, *p).unwrap()) * &v * Complex64::new(0.0, 1.0);
            for j in 0..dim {
                a[(j, k)] = col[j].re;
                a[(dim + j, k)] = col[j].im;
            }
        }
        let t = pauli_matrix(&PauliString::single(n, site, target).unwrap());
        let e = v.dotc(&(&t * &v)).re;
        let rhs_c = &t * &v - &v * Complex64::new(e, 0.0);
        let mut rhs = DVector::<f64>::zeros(2 * dim);
        for j in 0..dim {
            rhs[j] = rhs_c[j].re;
            rhs[dim + j] = rhs_c[j].im;
        }
        let x = a.clone().svd(true, true).solve(&rhs, 1e-12).unwrap();
        let res = (&a * &x - &rhs).norm();
        ([x[0], x[1], x[2]], res)
    }

    #[test]
    fn solve_site_examples() {
        let zero = StateVector::zero(1).unwrap();
        let s = solve_site(&zero, 0, Pauli::X).unwrap();
        assert_eq!(s.x, [0.0, -1.0, 0.0]);
        assert!(s.residual < 1e-15);

        let s = solve_site(&zero, 0, Pauli::Z).unwrap();
        assert_eq!(s.x, [0.0, 0.0, 0.0]);
        assert_eq!(s.residual, 0.0);

        let s = solve_site(&zero, 0, Pauli::I).unwrap();
        assert_eq!(s.x, [0.0; 3]);

        // Bell state: every i sigma_b psi is real-orthogonal to X_0 psi.
        let s = solve_site(&bell(), 0, Pauli::X).unwrap();
        assert_eq!(s.x, [0.0, 0.0, 0.0]);
        assert!((s.residual - 1.0).abs() < 1e-12);

        assert!(solve_site(&zero, 1, Pauli::X).is_err());
    }

    #[test]
    fn solve_site_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for n in 1..=3 {
            for site in 0..n {
                for target in Pauli::NON_IDENTITY {
                    let psi = StateVector::random(n, &mut rng).unwrap();
                    let s = solve_site(&psi, site, target).unwrap();
                    let (x, res) = brute_force_site(&psi, site, target);
                    for (a, b) in s.x.iter().zip(&x) {
                        assert!((a - b).abs() < 1e-10, "n={n} site={site} {target:?}");
                    }
                    assert!((s.residual - res).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn reduce_once_examples() {
        let cfg = EvolutionConfig::default();
        let zero2 = StateVector::zero(2).unwrap();
        let (s, t, rec) = reduce_once(&zero2, &term(1.0, "ZZ"), 0, 0.1, &cfg).unwrap();
        assert_eq!(s, zero2);
        assert_eq!(t, term(1.0, "IZ"));
        assert_eq!(rec.expectation_used, 1.0);
        assert_eq!(rec.x_site, [0.0; 3]);

        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let plus0 = StateVector::from_amplitudes(2, vec![h, h, z, z]).unwrap();
        let (s, t, rec) = reduce_once(&plus0, &term(1.0, "XZ"), 0, 0.1, &cfg).unwrap();
        assert!(s.distance(&plus0).unwrap() < 1e-15);
        assert_eq!(t.string, ps("IZ"));
        assert!((t.coeff - 1.0).abs() < 1e-15);
        assert!((rec.expectation_used - 1.0).abs() < 1e-15);

        let tau = 0.05;
        let (s, t, rec) = reduce_once(&zero2, &term(1.0, "XZ"), 0, tau, &cfg).unwrap();
        assert_eq!(rec.expectation_used, 0.0);
        assert_eq!(rec.x_site, [0.0, -1.0, 0.0]);
        assert_eq!(t.coeff, 0.0);
        assert_eq!(t.string, ps("IZ"));
        let expected_u = zero2.pauli_rotation(&ps("YZ"), -tau).unwrap();
        assert!(s.distance(&expected_u).unwrap() < 1e-15);
        let (exact, _) = zero2.imaginary_step_exact(&ps("XZ"), tau).unwrap();
        assert!(s.distance(&exact).unwrap() < tau * tau);

        assert!(matches!(
            reduce_once(&zero2, &term(1.0, "IZ"), 0, 0.1, &cfg),
            Err(QiteError::SiteNotInSupport { .. })
        ));
    }

    #[test]
    fn eigenstate_fixed_point() {
        let cfg = EvolutionConfig::default();
        let zero2 = StateVector::zero(2).unwrap();
        let (s, res, ledger) = fast_trotter_step(&zero2, &term(1.0, "ZZ"), 0.1, &cfg).unwrap();
        assert_eq!(s, zero2);
        assert!((res.c_a - 0.2f64.exp()).abs() < 1e-10);
        assert_eq!(res.reductions.len(), 2);
        assert_eq!(ledger.rotations, 6);
        let exact = zero2.imaginary_step_exact(&ps("ZZ"), 0.1).unwrap().1;
        assert!((res.c_a - exact).abs() < 1e-10);
    }

    #[test]
    fn weight_one_matches_single_site_standard() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = EvolutionConfig::default();
        for (label, site) in [("IXI", 1), ("ZII", 0), ("IIY", 2)] {
            let psi = StateVector::random(3, &mut rng).unwrap();
            let t = term(-0.7, label);
            let tau = 0.05;
            let (fast, _, _) = fast_trotter_step(&psi, &t, tau, &cfg).unwrap();
            let d = OperatorDomain::single_site(3, site).unwrap();
            let m = crate::standard::build_m(&psi, &d).unwrap();
            let r = crate::standard::build_r(&psi, &t, tau, &d).unwrap();
            let x = crate::standard::solve_step(&m, &r).unwrap().x;
            let std = crate::standard::apply_step(&psi, &x, tau, &d).unwrap();
            assert!(fast.distance(&std).unwrap() < 1e-12, "{label}");
        }
    }

    #[test]
    fn bell_xx_step_is_close_to_exact() {
        let cfg = EvolutionConfig::default();
        let psi = bell();
        for tau in [0.1, 0.05] {
            let (s, _, _) = fast_trotter_step(&psi, &term(1.0, "XX"), tau, &cfg).unwrap();
            let (exact, _) = psi.imaginary_step_exact(&ps("XX"), tau).unwrap();
            let fid = s.overlap(&exact).unwrap().norm();
            // Bell is an XX eigenstate: the step is a fixed point.
            assert!(1.0 - fid < 1e-12, "tau {tau}: {fid}");
        }
    }

    #[test]
    fn coefficient_cascade_and_rotation_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let cfg = EvolutionConfig::default();
        for label in ["XYZ", "ZIX", "YYY", "IZI"] {
            let psi = StateVector::random(3, &mut rng).unwrap();
            let t = term(0.9, label);
            let (_, res, ledger) = fast_trotter_step(&psi, &t, 0.02, &cfg).unwrap();
            assert_eq!(res.reductions.len(), t.string.weight());
            assert_eq!(ledger.rotations as usize, 3 * t.string.weight());
            let product: f64 = res.reductions.iter().map(|r| r.expectation_used).product();
            assert!((res.reductions.last().unwrap().coefficient_out - 0.9 * product).abs() < 1e-15);
            assert!((res.final_scalar - 0.9 * product).abs() < 1e-15);
            for r in &res.reductions {
                assert!(r.expectation_used.abs() <= 1.0 + 1e-12);
                assert_eq!(r.coefficient_out, r.coefficient_in * r.expectation_used);
            }
        }
    }

    #[test]
    fn first_order_on_product_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cfg = EvolutionConfig::default();
        let factor = |rng: &mut ChaCha8Rng| {
            let v = StateVector::random(1, rng).unwrap();
            [v.amplitudes()[0], v.amplitudes()[1]]
        };
        for label in ["XI", "YZ", "XX"] {
            let psi = StateVector::product(&[factor(&mut rng), factor(&mut rng)]).unwrap();
            let t = term(0.8, label);
            let err = |tau: f64| {
                let (s, _, _) = fast_trotter_step(&psi, &t, tau, &cfg).unwrap();
                let (exact, _) = psi.imaginary_step_exact(&t.string, tau * t.coeff).unwrap();
                s.distance(&exact).unwrap()
            };
            let (e1, e2) = (err(0.02), err(0.01));
            assert!(e1 < 0.02 * 0.02 * 10.0, "{label}: {e1}");
            let slope = (e1 / e2).log2();
            assert!((slope - 2.0).abs() < 0.3, "{label}: slope {slope}");
        }
    }

    #[test]
    fn underflow_truncates() {
        let cfg = EvolutionConfig::default();
        let zero3 = StateVector::zero(3).unwrap();
        // <X_0> = 0 on |000>, so the carried coefficient vanishes after site 0.
        let (_, res, ledger) = fast_trotter_step(&zero3, &term(1.0, "XZZ"), 0.05, &cfg).unwrap();
        assert!(res.truncated);
        assert_eq!(res.reductions.len(), 1);
        assert_eq!(res.final_scalar, 0.0);
        assert_eq!(ledger.rotations, 3);
    }

    #[test]
    fn exact_normalization_mode() {
        let cfg = EvolutionConfig { normalization: NormalizationMode::Exact, ..EvolutionConfig::default() };
        let psi = StateVector::random(2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let t = term(0.5, "ZX");
        let (_, res, _) = fast_trotter_step(&psi, &t, 0.1, &cfg).unwrap();
        let exact = psi.imaginary_step_exact(&t.string, 0.05).unwrap().1;
        assert_eq!(res.c_a, exact);
    }
}
