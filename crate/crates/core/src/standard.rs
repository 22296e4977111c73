//! Standard QITE: for each Trotter term, build the Gram matrix `M` and the
//! vector `r` over an operator domain, solve `M x + r = 0`, and apply
//! `prod_b exp(i tau x_b sigma_b)`.
//!
//! Sign convention: with the ansatz exponent `+i tau sum_b x_b sigma_b`,
//! `r_b = h Im<psi|sigma_a sigma_b|psi> (1 - tau h <sigma_a>)` and
//! `x = -M^+ r`. For `|0>` and `sigma_a = X` this gives `x_Y = -1`, i.e.
//! `exp(-i tau Y)|0> = cos(tau)|0> + sin(tau)|1>`, which is the direction of
//! `exp(tau X)|0>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QiteError, Result};
use crate::evolve::{first_order_c, run_sweeps, EvolutionConfig, EvolutionResult, NormalizationMode, StepContext, StepOutput};
use crate::ledger::{CostLedger, Event};
use crate::measure::Meter;
use crate::pauli::{Pauli, PauliString, PauliTerm, WeightedPauliSum};
use crate::state::StateVector;

/// Relative cutoff on `|eigenvalue| / max |eigenvalue|` in the pseudo-inverse.
pub const DEFAULT_CUTOFF: f64 = 1e-8;

/// Largest register for which the full domain (`4^n - 1` strings) is built.
pub const MAX_FULL_DOMAIN_QUBITS: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainPolicy {
    /// Every non-identity string on all qubits.
    FullMinusIdentity,
    /// Every non-identity string supported on sites within `radius` (chain
    /// distance) of the term's support.
    KLocalSupport { radius: usize },
    Custom(Vec<PauliString>),
}

/// Ordered index set of the generator strings `sigma_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDomain {
    strings: Vec<PauliString>,
}

/// All non-identity strings on `sites` (ascending), enumerated with the
/// first listed site varying fastest.
fn strings_on_sites(n: usize, sites: &[usize]) -> Result<Vec<PauliString>> {
    let count = 1usize << (2 * sites.len());
    let mut out = Vec::with_capacity(count.saturating_sub(1));
    for k in 1..count {
        let mut s = PauliString::identity(n)?;
        for (i, &site) in sites.iter().enumerate() {
            s = s.with_site(site, Pauli::from_code(((k >> (2 * i)) & 3) as u8))?;
        }
        out.push(s);
    }
    Ok(out)
}

impl OperatorDomain {
    pub fn new(strings: Vec<PauliString>) -> Result<OperatorDomain> {
        if let Some(first) = strings.first() {
            let n = first.qubit_count();
            for (i, s) in strings.iter().enumerate() {
                if s.qubit_count() != n {
                    return Err(QiteError::Dimension { expected: n, found: s.qubit_count() });
                }
                if s.is_identity() {
                    return Err(QiteError::Domain("identity string is excluded from domains".into()));
                }
                if strings[..i].contains(s) {
                    return Err(QiteError::Domain(format!("duplicate string {s}")));
                }
            }
        }
        Ok(OperatorDomain { strings })
    }

    pub fn full(qubit_count: usize) -> Result<OperatorDomain> {
        if qubit_count > MAX_FULL_DOMAIN_QUBITS {
            return Err(QiteError::Domain(format!(
                "full domain on {qubit_count} qubits exceeds the limit of {MAX_FULL_DOMAIN_QUBITS}"
            )));
        }
        let sites: Vec<usize> = (0..qubit_count).collect();
        Ok(OperatorDomain { strings: strings_on_sites(qubit_count, &sites)? })
    }

    /// `{X, Y, Z}` at `site`, in that order.
    pub fn single_site(qubit_count: usize, site: usize) -> Result<OperatorDomain> {
        let strings = Pauli::NON_IDENTITY
            .iter()
            .map(|&p| PauliString::single(qubit_count, site, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(OperatorDomain { strings })
    }

    pub fn for_term(policy: &DomainPolicy, term: &PauliString) -> Result<OperatorDomain> {
        let n = term.qubit_count();
        match policy {
            DomainPolicy::FullMinusIdentity => OperatorDomain::full(n),
            DomainPolicy::KLocalSupport { radius } => {
                let support = term.support();
                let sites: Vec<usize> = (0..n)
                    .filter(|&i| support.iter().any(|&s| s.abs_diff(i) <= *radius))
                    .collect();
                if sites.len() > MAX_FULL_DOMAIN_QUBITS {
                    return Err(QiteError::Domain(format!("domain support of {} sites is too large", sites.len())));
                }
                Ok(OperatorDomain { strings: strings_on_sites(n, &sites)? })
            }
            DomainPolicy::Custom(list) => {
                let d = OperatorDomain::new(list.clone())?;
                if let Some(s) = d.strings.first() {
                    if s.qubit_count() != n {
                        return Err(QiteError::Dimension { expected: n, found: s.qubit_count() });
                    }
                }
                Ok(d)
            }
        }
    }

    pub fn strings(&self) -> &[PauliString] {
        &self.strings
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    fn check(&self, psi: &StateVector) -> Result<()> {
        match self.strings.first() {
            Some(s) if s.qubit_count() != psi.qubit_count() => {
                Err(QiteError::Dimension { expected: psi.qubit_count(), found: s.qubit_count() })
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSolve {
    pub x: Vec<f64>,
    /// `||M x + r||`
    pub residual: f64,
}

pub(crate) fn build_m_with(meter: &mut Meter<'_>, domain: &OperatorDomain) -> Result<DMatrix<f64>> {
    domain.check(meter.state())?;
    let d = domain.len();
    let s = domain.strings();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let prod = s[i].multiply(&s[j])?;
            let value = if prod.phase.is_real() {
                prod.phase.sign() * meter.expectation(&prod.string)?
            } else {
                0.0
            };
            m[(i, j)] = value;
            m[(j, i)] = value;
        }
    }
    Ok(m)
}

pub(crate) fn build_r_with(
    meter: &mut Meter<'_>,
    term: &PauliTerm,
    tau: f64,
    domain: &OperatorDomain,
) -> Result<Vec<f64>> {
    domain.check(meter.state())?;
    let h = term.coeff;
    let factor = 1.0 - tau * h * meter.expectation(&term.string)?;
    domain
        .strings()
        .iter()
        .map(|b| {
            let prod = term.string.multiply(b)?;
            let im = if prod.phase.is_real() { 0.0 } else { prod.phase.sign() * meter.expectation(&prod.string)? };
            Ok(h * im * factor)
        })
        .collect()
}

/// `M[b'][b] = Re<psi|sigma_b' sigma_b|psi>`.
pub fn build_m(psi: &StateVector, domain: &OperatorDomain) -> Result<DMatrix<f64>> {
    build_m_with(&mut Meter::exact(psi), domain)
}

/// `r[b] = h Im<psi|sigma_a sigma_b|psi> (1 - tau h <psi|sigma_a|psi>)`.
pub fn build_r(psi: &StateVector, term: &PauliTerm, tau: f64, domain: &OperatorDomain) -> Result<Vec<f64>> {
    build_r_with(&mut Meter::exact(psi), term, tau, domain)
}

pub fn solve_step(m: &DMatrix<f64>, r: &[f64]) -> Result<StepSolve> {
    solve_step_with_cutoff(m, r, DEFAULT_CUTOFF)
}

/// Minimum-norm least-squares solution of `M x = -r` through the spectral
/// pseudo-inverse of the symmetric matrix `M`.
pub fn solve_step_with_cutoff(m: &DMatrix<f64>, r: &[f64], cutoff: f64) -> Result<StepSolve> {
    let d = r.len();
    if m.nrows() != d || m.ncols() != d {
        return Err(QiteError::InvalidStep(format!("M is {}x{}, r has {d} entries", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(QiteError::NonFinite("M matrix"));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(QiteError::NonFinite("r vector"));
    }
    if d == 0 {
        return Ok(StepSolve { x: vec![], residual: 0.0 });
    }
    let rv = DVector::from_column_slice(r);
    let eig = m.clone().symmetric_eigen();
    let largest = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut x = DVector::zeros(d);
    if largest > 0.0 {
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda.abs() > cutoff * largest {
                let v = eig.eigenvectors.column(k);
                x -= v * (v.dot(&rv) / lambda);
            }
        }
    }
    let residual = (m * &x + &rv).norm();
    Ok(StepSolve { x: x.as_slice().to_vec(), residual })
}

pub(crate) fn apply_step_in_place(
    psi: &mut StateVector,
    x: &[f64],
    tau: f64,
    domain: &OperatorDomain,
    ledger: &mut CostLedger,
) -> Result<()> {
    if x.len() != domain.len() {
        return Err(QiteError::InvalidStep(format!("{} coefficients for a domain of {}", x.len(), domain.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(QiteError::NonFinite("step coefficients"));
    }
    for (b, &xb) in domain.strings().iter().zip(x) {
        psi.rotate(b, tau * xb)?;
    }
    ledger.record_event(Event::Rotation, x.len() as u64);
    Ok(())
}

/// Applies `exp(i tau x_b sigma_b)` for each domain string, first string first.
pub fn apply_step(psi: &StateVector, x: &[f64], tau: f64, domain: &OperatorDomain) -> Result<StateVector> {
    let mut out = psi.clone();
    apply_step_in_place(&mut out, x, tau, domain, &mut CostLedger::new())?;
    Ok(out)
}

/// First-order normalization `c_a = (1 - tau h <sigma_a>)^-2`.
pub fn estimate_c(psi: &StateVector, term: &PauliTerm, tau: f64) -> Result<f64> {
    first_order_c(term.coeff, psi.expectation(&term.string)?, tau)
}

/// `||(1 + i tau sum_b x_b sigma_b) psi - exp(tau h sigma_a) psi / sqrt(c)||`
/// evaluated directly on the statevector.
pub fn linearized_residual(
    psi: &StateVector,
    term: &PauliTerm,
    tau: f64,
    domain: &OperatorDomain,
    x: &[f64],
) -> Result<f64> {
    let mut lin = psi.clone();
    for (b, &xb) in domain.strings().iter().zip(x) {
        if xb != 0.0 {
            lin.axpy(Complex64::new(0.0, tau * xb), &psi.apply_pauli(b)?)?;
        }
    }
    let (target, _) = psi.imaginary_step_exact(&term.string, tau * term.coeff)?;
    lin.distance(&target)
}

/// One standard QITE Trotter step for `term` with the domain chosen by the
/// context's policy.
pub(crate) fn trotter_step(ctx: &mut StepContext<'_>, psi: &StateVector, term: &PauliTerm, tau: f64) -> Result<StepOutput> {
    let domain = ctx.domain_for(&term.string)?;
    let config = ctx.config;
    let (m, r, e_a) = {
        let mut meter = Meter::new(psi, config.expectation, &mut ctx.rng)?;
        let m = build_m_with(&mut meter, &domain)?;
        let r = build_r_with(&mut meter, term, tau, &domain)?;
        let e_a = meter.expectation(&term.string)?;
        meter.flush(&mut ctx.ledger);
        (m, r, e_a)
    };
    let solve = solve_step_with_cutoff(&m, &r, config.svd_cutoff)?;
    ctx.ledger.record_event(Event::LinearSolve, domain.len() as u64);
    let c_a = match config.normalization {
        NormalizationMode::FirstOrder => first_order_c(term.coeff, e_a, tau)?,
        NormalizationMode::Exact => psi.imaginary_step_exact(&term.string, tau * term.coeff)?.1,
    };
    let residual = linearized_residual(psi, term, tau, &domain, &solve.x)?;
    let mut state = psi.clone();
    apply_step_in_place(&mut state, &solve.x, tau, &domain, &mut ctx.ledger)?;
    Ok(StepOutput { state, c_a, x: solve.x, residual, solve_residual: solve.residual, reduction: None })
}

/// Standard QITE over `exp(total_time H)`; a negative time realizes
/// `exp(-|t| H)` by negating every coefficient.
pub fn qite_evolve(
    psi0: &StateVector,
    h: &WeightedPauliSum,
    total_time: f64,
    steps_per_unit: usize,
    config: &EvolutionConfig,
) -> Result<EvolutionResult> {
    run_sweeps(psi0, h, total_time, steps_per_unit, config, trotter_step)
}
