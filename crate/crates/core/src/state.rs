//! Dense statevector with exact Pauli, rotation and imaginary-time maps.
//!
//! Amplitude `j` is the coefficient of the basis state whose bit `i` is the
//! value of qubit `i` (qubit 0 is the least significant bit).

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QiteError, Result};
use crate::pauli::{PauliString, WeightedPauliSum, MAX_QUBITS};

/// Allowed deviation of `||psi||^2` from 1 for a normalized state.
pub const NORM_SLACK: f64 = 1e-12;

/// Largest register the dense engine will allocate.
pub const MAX_DENSE_QUBITS: usize = 26;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubit_count: usize,
    amps: Vec<Complex64>,
}

/// `i^k`
fn i_pow(k: u32) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Phase picked up by basis state `j` under `p`: `P|j> = phase * |j ^ x>`.
#[inline]
fn action_phase(p: &PauliString, j: usize, y_phase: Complex64) -> Complex64 {
    if (j as u64 & p.z_mask()).count_ones().is_multiple_of(2) {
        y_phase
    } else {
        -y_phase
    }
}

impl StateVector {
    pub fn basis(qubit_count: usize, index: usize) -> Result<StateVector> {
        if qubit_count == 0 || qubit_count > MAX_DENSE_QUBITS.min(MAX_QUBITS) {
            return Err(QiteError::QubitCount(qubit_count));
        }
        let dim = 1usize << qubit_count;
        if index >= dim {
            return Err(QiteError::InvalidStep(format!("basis index {index} out of range for {qubit_count} qubits")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { qubit_count, amps })
    }

    pub fn zero(qubit_count: usize) -> Result<StateVector> {
        StateVector::basis(qubit_count, 0)
    }

    /// Wraps raw amplitudes without normalizing them.
    pub fn from_amplitudes(qubit_count: usize, amps: Vec<Complex64>) -> Result<StateVector> {
        if qubit_count == 0 || qubit_count > MAX_DENSE_QUBITS {
            return Err(QiteError::QubitCount(qubit_count));
        }
        if amps.len() != 1usize << qubit_count {
            return Err(QiteError::AmplitudeCount { qubits: qubit_count, found: amps.len() });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QiteError::NonFinite("amplitude"));
        }
        Ok(StateVector { qubit_count, amps })
    }

    /// Tensor product of single-qubit states, `factors[i]` on qubit `i`.
    pub fn product(factors: &[[Complex64; 2]]) -> Result<StateVector> {
        let n = factors.len();
        if n == 0 || n > MAX_DENSE_QUBITS {
            return Err(QiteError::QubitCount(n));
        }
        let amps = (0..1usize << n)
            .map(|j| factors.iter().enumerate().map(|(i, f)| f[(j >> i) & 1]).product())
            .collect();
        StateVector::from_amplitudes(n, amps)
    }

    /// A Haar-ish random normalized state from Gaussian amplitudes.
    pub fn random(qubit_count: usize, rng: &mut impl Rng) -> Result<StateVector> {
        use rand_distr::StandardNormal;
        let dim = 1usize << qubit_count;
        let amps = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Ok(StateVector::from_amplitudes(qubit_count, amps)?.normalized())
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_SLACK
    }

    pub fn normalized(mut self) -> StateVector {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
        self
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: Complex64, other: &StateVector) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    }

    /// Distance after removing the best global phase: `sqrt(2 - 2|<self|other>|)`
    /// for normalized inputs.
    pub fn phase_aligned_distance(&self, other: &StateVector) -> Result<f64> {
        let ov = self.overlap(other)?.norm();
        Ok((self.norm_sqr() + other.norm_sqr() - 2.0 * ov).max(0.0).sqrt())
    }

    fn check_dim(&self, p: &PauliString) -> Result<()> {
        if p.qubit_count() != self.qubit_count {
            return Err(QiteError::Dimension { expected: self.qubit_count, found: p.qubit_count() });
        }
        Ok(())
    }

    fn check_same(&self, other: &StateVector) -> Result<()> {
        if other.qubit_count != self.qubit_count {
            return Err(QiteError::Dimension { expected: self.qubit_count, found: other.qubit_count });
        }
        Ok(())
    }

    /// `P|psi>` in a single pass over the amplitudes.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<StateVector> {
        self.check_dim(p)?;
        let x = p.x_mask() as usize;
        let y_phase = i_pow(p.y_count());
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (j, a) in self.amps.iter().enumerate() {
            out[j ^ x] = action_phase(p, j, y_phase) * a;
        }
        Ok(StateVector { qubit_count: self.qubit_count, amps: out })
    }

    /// `<psi|P|psi>`; real for every Pauli string.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        self.check_dim(p)?;
        let x = p.x_mask() as usize;
        let y_phase = i_pow(p.y_count());
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, a) in self.amps.iter().enumerate() {
            acc += self.amps[j ^ x].conj() * action_phase(p, j, y_phase) * a;
        }
        Ok(acc.re)
    }

    /// `<psi|O|psi>` for a weighted Pauli sum.
    pub fn expectation_sum(&self, o: &WeightedPauliSum) -> Result<f64> {
        o.terms().iter().map(|t| Ok(t.coeff * self.expectation(&t.string)?)).sum()
    }

    /// Applies `exp(i theta P) = cos(theta) + i sin(theta) P` in place.
    pub fn rotate(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        self.check_dim(p)?;
        let (s, c) = theta.sin_cos();
        let is = Complex64::new(0.0, s);
        let x = p.x_mask() as usize;
        let y_phase = i_pow(p.y_count());
        if x == 0 {
            for (j, a) in self.amps.iter_mut().enumerate() {
                *a *= c + is * action_phase(p, j, y_phase);
            }
            return Ok(());
        }
        for j in 0..self.amps.len() {
            let k = j ^ x;
            if j > k {
                continue;
            }
            let (aj, ak) = (self.amps[j], self.amps[k]);
            // (P psi)[k] = phase(j) psi[j], (P psi)[j] = phase(k) psi[k]
            self.amps[k] = c * ak + is * action_phase(p, j, y_phase) * aj;
            self.amps[j] = c * aj + is * action_phase(p, k, y_phase) * ak;
        }
        Ok(())
    }

    pub fn pauli_rotation(&self, p: &PauliString, theta: f64) -> Result<StateVector> {
        let mut out = self.clone();
        out.rotate(p, theta)?;
        Ok(out)
    }

    /// Exact `exp(lambda P)|psi>` normalized, with `c = ||exp(lambda P)|psi>||^2`.
    pub fn imaginary_step_exact(&self, p: &PauliString, lambda: f64) -> Result<(StateVector, f64)> {
        let mut out = self.apply_pauli(p)?;
        out.scale(Complex64::new(lambda.sinh(), 0.0));
        out.axpy(Complex64::new(lambda.cosh(), 0.0), self)?;
        let c = out.norm_sqr();
        Ok((out.normalized(), c))
    }

    /// `<other|self>`.
    pub fn overlap(&self, other: &StateVector) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(other.amps.iter().zip(&self.amps).map(|(b, a)| b.conj() * a).sum())
    }

    /// Fraction of `shots` Bernoulli draws accepted with probability
    /// `|<other|self>|^2`.
    pub fn sample_projection(&self, other: &StateVector, shots: u64, rng: &mut impl Rng) -> Result<f64> {
        if shots == 0 {
            return Err(QiteError::ZeroShots);
        }
        let p = self.overlap(other)?.norm_sqr().clamp(0.0, 1.0);
        let hits = (0..shots).filter(|_| rng.gen::<f64>() < p).count();
        Ok(hits as f64 / shots as f64)
    }

    pub fn sample_projection_seeded(&self, other: &StateVector, shots: u64, seed: u64) -> Result<f64> {
        self.sample_projection(other, shots, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Samples a computational basis index with probability `|amp|^2`.
    pub fn sample_basis(&self, rng: &mut impl Rng) -> usize {
        let total = self.norm_sqr();
        let mut u = rng.gen::<f64>() * total;
        for (j, a) in self.amps.iter().enumerate() {
            u -= a.norm_sqr();
            if u < 0.0 {
                return j;
            }
        }
        self.amps.len() - 1
    }

    /// CSV rows `basis,re,im`; basis printed in binary with qubit 0 rightmost.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("basis,re,im\n");
        for (j, a) in self.amps.iter().enumerate() {
            let _ = writeln!(out, "{:0width$b},{:e},{:e}", j, a.re, a.im, width = self.qubit_count);
        }
        out
    }

    /// Inverse of [`StateVector::to_csv`]; unlisted basis states are zero.
    pub fn from_csv(text: &str) -> Result<StateVector> {
        let mut rows = Vec::new();
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("basis")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(QiteError::Parse(format!("line {}: expected 3 fields", lineno + 1)));
            }
            let w = fields[0].len();
            if *width.get_or_insert(w) != w {
                return Err(QiteError::Parse(format!("line {}: inconsistent basis width", lineno + 1)));
            }
            let idx = usize::from_str_radix(fields[0], 2)
                .map_err(|e| QiteError::Parse(format!("line {}: {e}", lineno + 1)))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| QiteError::Parse(format!("line {}: {e}", lineno + 1)));
            rows.push((idx, Complex64::new(num(fields[1])?, num(fields[2])?)));
        }
        let n = width.ok_or_else(|| QiteError::Parse("no amplitude rows".into()))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n];
        for (idx, a) in rows {
            amps[idx] = a;
        }
        StateVector::from_amplitudes(n, amps)
    }
}
