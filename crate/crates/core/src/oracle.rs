//! Dense classical baselines: spectral matrix exponential, forward-Euler
//! stepping, and exact thermal traces.
//!
//! Matrices here are built from Kronecker products of 2x2 Pauli matrices and
//! share no code path with the statevector engine.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QiteError, Result};
use crate::pauli::{Pauli, PauliString, WeightedPauliSum};
use crate::state::StateVector;

pub const DEFAULT_ORACLE_CAP: usize = 12;

const HERMITIAN_TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single_matrix(p: Pauli) -> DMatrix<Complex64> {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let entries = match p {
        Pauli::I => [one, z, z, one],
        Pauli::X => [z, one, one, z],
        Pauli::Y => [z, c(0.0, -1.0), c(0.0, 1.0), z],
        Pauli::Z => [one, z, z, -one],
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// `2^n x 2^n` matrix of `p`, qubit 0 being the least significant index bit.
pub fn pauli_matrix(p: &PauliString) -> DMatrix<Complex64> {
    let mut m = single_matrix(p.get(0));
    for site in 1..p.qubit_count() {
        m = single_matrix(p.get(site)).kronecker(&m);
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    qubit_count: usize,
    matrix: DMatrix<Complex64>,
}

/// Eigendecomposition `H = U D U^dagger` of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct Spectrum {
    qubit_count: usize,
    pub values: DVector<f64>,
    pub vectors: DMatrix<Complex64>,
}

pub fn to_dense(h: &WeightedPauliSum, cap: usize) -> Result<DenseOperator> {
    let n = h.qubit_count();
    if n > cap {
        return Err(QiteError::OracleCap { qubits: n, cap });
    }
    let dim = 1usize << n;
    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    for t in h.terms() {
        matrix += pauli_matrix(&t.string) * c(t.coeff, 0.0);
    }
    Ok(DenseOperator { qubit_count: n, matrix })
}

impl DenseOperator {
    pub fn from_matrix(qubit_count: usize, matrix: DMatrix<Complex64>) -> Result<DenseOperator> {
        let dim = 1usize << qubit_count;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(QiteError::AmplitudeCount { qubits: qubit_count, found: matrix.nrows() });
        }
        Ok(DenseOperator { qubit_count, matrix })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn hermitian_deviation(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(QiteError::NonHermitian(dev));
        }
        let eig = self.matrix.clone().symmetric_eigen();
        Ok(Spectrum { qubit_count: self.qubit_count, values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check(psi)?;
        let v = &self.matrix * DVector::from_column_slice(psi.amplitudes());
        StateVector::from_amplitudes(self.qubit_count, v.as_slice().to_vec())
    }

    fn check(&self, psi: &StateVector) -> Result<()> {
        if psi.qubit_count() != self.qubit_count {
            return Err(QiteError::Dimension { expected: self.qubit_count, found: psi.qubit_count() });
        }
        Ok(())
    }
}

impl Spectrum {
    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    /// `U D U^dagger`, for self-consistency checks.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let d = DMatrix::from_diagonal(&self.values.map(|v| c(v, 0.0)));
        &self.vectors * d * self.vectors.adjoint()
    }

    /// Unnormalized `exp(t H)|psi>`.
    pub fn exp_apply_raw(&self, psi: &StateVector, t: f64) -> Result<DVector<Complex64>> {
        if psi.qubit_count() != self.qubit_count {
            return Err(QiteError::Dimension { expected: self.qubit_count, found: psi.qubit_count() });
        }
        let v = DVector::from_column_slice(psi.amplitudes());
        let mut coeffs = self.vectors.adjoint() * v;
        for (k, a) in coeffs.iter_mut().enumerate() {
            *a *= (t * self.values[k]).exp();
        }
        Ok(&self.vectors * coeffs)
    }

    /// Normalized `exp(t H)|psi>` and `c = ||exp(t H)|psi>||^2`.
    pub fn exp_apply(&self, psi: &StateVector, t: f64) -> Result<(StateVector, f64)> {
        let raw = self.exp_apply_raw(psi, t)?;
        let c = raw.norm_squared();
        let state = StateVector::from_amplitudes(self.qubit_count, raw.as_slice().to_vec())?.normalized();
        Ok((state, c))
    }

    /// Diagonal elements `<i|exp(t H)|i>` for every basis label `i`.
    pub fn exp_diagonal(&self, t: f64) -> Vec<f64> {
        let dim = self.values.len();
        (0..dim)
            .map(|i| (0..dim).map(|k| self.vectors[(i, k)].norm_sqr() * (t * self.values[k]).exp()).sum())
            .collect()
    }

    /// `Tr(O exp(-beta H)) / Tr(exp(-beta H))` with `O` given densely.
    pub fn thermal_average(&self, observable: &DenseOperator, beta: f64) -> Result<f64> {
        if observable.qubit_count != self.qubit_count {
            return Err(QiteError::Dimension { expected: self.qubit_count, found: observable.qubit_count });
        }
        let shift = self.values.min();
        let weights: Vec<f64> = self.values.iter().map(|e| (-beta * (e - shift)).exp()).collect();
        let rotated = self.vectors.adjoint() * observable.matrix() * &self.vectors;
        let num: f64 = weights.iter().enumerate().map(|(k, w)| w * rotated[(k, k)].re).sum();
        let den: f64 = weights.iter().sum();
        Ok(num / den)
    }
}

/// Normalized `exp(t H)|psi>` and `c = ||exp(t H)|psi>||^2` via `H = U D U^dagger`.
pub fn expm_apply(h: &DenseOperator, psi: &StateVector, t: f64) -> Result<(StateVector, f64)> {
    h.check(psi)?;
    h.spectrum()?.exp_apply(psi, t)
}

/// Repeats `psi <- psi + dt * H psi` for `t / dt` steps. Returns the
/// unnormalized state and its norm. A negative `t` steps with `-dt`.
pub fn euler_evolve(h: &DenseOperator, psi: &StateVector, t: f64, dt: f64) -> Result<(StateVector, f64)> {
    h.check(psi)?;
    if !(dt > 0.0) || !dt.is_finite() || !t.is_finite() {
        return Err(QiteError::InvalidStep(format!("step {dt} must be positive and finite")));
    }
    let ratio = t.abs() / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(QiteError::InvalidStep(format!("step {dt} does not divide {t}")));
    }
    let signed = c(dt * t.signum(), 0.0);
    let mut v = DVector::from_column_slice(psi.amplitudes());
    for _ in 0..steps as u64 {
        let hv = &h.matrix * &v;
        v += hv * signed;
    }
    let norm = v.norm();
    Ok((StateVector::from_amplitudes(h.qubit_count, v.as_slice().to_vec())?, norm))
}

/// `Tr(O exp(-beta H)) / Tr(exp(-beta H))`.
pub fn exact_thermal_average(h: &WeightedPauliSum, o: &WeightedPauliSum, beta: f64, cap: usize) -> Result<f64> {
    if o.qubit_count() != h.qubit_count() {
        return Err(QiteError::Dimension { expected: h.qubit_count(), found: o.qubit_count() });
    }
    let spectrum = to_dense(h, cap)?.spectrum()?;
    spectrum.thermal_average(&to_dense(o, cap)?, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h(n: usize, terms: &[(f64, &str)]) -> WeightedPauliSum {
        WeightedPauliSum::from_labels(n, terms).unwrap()
    }

    #[test]
    fn to_dense_examples() {
        let z = to_dense(&h(1, &[(1.0, "Z")]), 12).unwrap();
        assert_eq!(z.matrix()[(0, 0)], c(1.0, 0.0));
        assert_eq!(z.matrix()[(1, 1)], c(-1.0, 0.0));
        assert_eq!(z.matrix()[(0, 1)], c(0.0, 0.0));

        let xx = to_dense(&h(2, &[(1.0, "XX")]), 12).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i + j == 3 { 1.0 } else { 0.0 };
                assert_eq!(xx.matrix()[(i, j)], c(expected, 0.0));
            }
        }

        let empty = to_dense(&WeightedPauliSum::zero(2).unwrap(), 12).unwrap();
        assert_eq!(empty.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);

        assert!(matches!(to_dense(&h(3, &[(1.0, "ZZZ")]), 2), Err(QiteError::OracleCap { .. })));
    }

    #[test]
    fn qubit_zero_is_low_bit() {
        // Z on qubit 0 flips sign of odd indices.
        let m = pauli_matrix(&"ZI".parse().unwrap());
        assert_eq!(m[(1, 1)], c(-1.0, 0.0));
        assert_eq!(m[(2, 2)], c(1.0, 0.0));
    }

    #[test]
    fn expm_apply_examples() {
        let zero = StateVector::zero(1).unwrap();
        let (s, cval) = expm_apply(&to_dense(&h(1, &[(1.0, "Z")]), 12).unwrap(), &zero, 1.0).unwrap();
        assert!(s.distance(&zero).unwrap() < 1e-12);
        assert!((cval - 1f64.exp().powi(2)).abs() < 1e-12);

        let (s, cval) = expm_apply(&to_dense(&h(1, &[(1.0, "X")]), 12).unwrap(), &zero, 1.0).unwrap();
        let norm = 2f64.cosh().sqrt();
        let expected =
            StateVector::from_amplitudes(1, vec![c(1f64.cosh() / norm, 0.0), c(1f64.sinh() / norm, 0.0)]).unwrap();
        assert!(s.phase_aligned_distance(&expected).unwrap() < 1e-12);
        assert!((cval - 2f64.cosh()).abs() < 1e-12);

        let tfim = to_dense(&WeightedPauliSum::transverse_ising(3, 1.0, 0.5).unwrap(), 12).unwrap();
        let psi = StateVector::random(3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let (s, cval) = expm_apply(&tfim, &psi, 0.0).unwrap();
        assert!(s.distance(&psi).unwrap() < 1e-12);
        assert!((cval - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        let op = DenseOperator::from_matrix(1, m).unwrap();
        assert!(matches!(expm_apply(&op, &StateVector::zero(1).unwrap(), 1.0), Err(QiteError::NonHermitian(_))));
    }

    #[test]
    fn spectrum_reconstructs() {
        let op = to_dense(&WeightedPauliSum::transverse_ising(3, 1.0, 0.5).unwrap(), 12).unwrap();
        let sp = op.spectrum().unwrap();
        assert!((sp.reconstruct() - op.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn euler_examples() {
        let zero = StateVector::zero(1).unwrap();
        let (s, norm) = euler_evolve(&to_dense(&WeightedPauliSum::zero(1).unwrap(), 12).unwrap(), &zero, 1.0, 0.1)
            .unwrap();
        assert_eq!(s, zero);
        assert_eq!(norm, 1.0);

        let (s, _) = euler_evolve(&to_dense(&h(1, &[(1.0, "Z")]), 12).unwrap(), &zero, 1.0, 1e-3).unwrap();
        let amp = s.amplitudes()[0].re;
        assert!((amp - 1.001f64.powi(1000)).abs() < 1e-10);
        assert!((amp / 1f64.exp() - 1.0).abs() < 2e-3);

        assert!(euler_evolve(&to_dense(&h(1, &[(1.0, "Z")]), 12).unwrap(), &zero, 1.0, 0.3).is_err());
        assert!(euler_evolve(&to_dense(&h(1, &[(1.0, "Z")]), 12).unwrap(), &zero, 1.0, 0.0).is_err());
    }

    #[test]
    fn thermal_examples() {
        let v = exact_thermal_average(&h(1, &[(-1.0, "Z")]), &h(1, &[(1.0, "Z")]), 1.0, 12).unwrap();
        assert!((v - 1f64.tanh()).abs() < 1e-12);

        let ham = WeightedPauliSum::transverse_ising(2, 1.0, 0.5).unwrap();
        let o = h(2, &[(0.7, "ZI"), (2.0, "II"), (0.3, "XX")]);
        let v = exact_thermal_average(&ham, &o, 0.0, 12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_gauge_invariance() {
        let ham = WeightedPauliSum::transverse_ising(3, 1.0, 0.5).unwrap();
        let o = h(3, &[(1.0, "ZZI"), (0.5, "XIX")]);
        let a = exact_thermal_average(&ham, &o, 1.3, 12).unwrap();
        let b = exact_thermal_average(&ham.shifted(4.2).unwrap(), &o, 1.3, 12).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn tfim2_thermal_fixture() {
        // Frozen from an independent dense matrix-exponential evaluation.
        let ham = WeightedPauliSum::transverse_ising(2, 1.0, 0.5).unwrap();
        let zz = h(2, &[(1.0, "ZZ")]);
        let cases = [
            (0.5, -0.672692811185026, 0.4454435124637467),
            (1.0, -1.0512016176320624, 0.6835042971456452),
            (2.0, -1.269143586145894, 0.7825928599860434),
        ];
        for (beta, energy, corr) in cases {
            assert!((exact_thermal_average(&ham, &ham, beta, 12).unwrap() - energy).abs() < 1e-12);
            assert!((exact_thermal_average(&ham, &zz, beta, 12).unwrap() - corr).abs() < 1e-12);
        }
    }

    #[test]
    fn semigroup() {
        let ham = WeightedPauliSum::transverse_ising(3, 1.0, 0.5).unwrap();
        let sp = to_dense(&ham, 12).unwrap().spectrum().unwrap();
        let psi = StateVector::random(3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let joint = sp.exp_apply_raw(&psi, 0.7).unwrap();
        let half = sp.exp_apply_raw(&psi, 0.3).unwrap();
        let half = StateVector::from_amplitudes(3, half.as_slice().to_vec()).unwrap();
        let two = sp.exp_apply_raw(&half, 0.4).unwrap();
        assert!((joint - two).norm() < 1e-12);
    }

    #[test]
    fn euler_is_first_order() {
        let ham = WeightedPauliSum::transverse_ising(2, 1.0, 0.5).unwrap();
        let dense = to_dense(&ham, 12).unwrap();
        let psi = StateVector::zero(2).unwrap();
        let exact = dense.spectrum().unwrap().exp_apply_raw(&psi, -1.0).unwrap();
        let err = |dt: f64| {
            let (v, _) = euler_evolve(&dense, &psi, -1.0, dt).unwrap();
            (DVector::from_column_slice(v.amplitudes()) - &exact).norm()
        };
        let slope = (err(0.002) / err(0.001)).log2();
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
        assert!(euler_evolve(&dense, &psi, 1.0, 0.3).is_err());
    }
}
