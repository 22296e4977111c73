//! Pauli strings, their products, and real-weighted sums of them.
//!
//! A string is stored as two bit masks: bit `i` of `x` is set when site `i`
//! carries X or Y, bit `i` of `z` when it carries Z or Y. Text form is
//! `"XZI"` with the leftmost character acting on qubit 0.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QiteError, Result};

pub const MAX_QUBITS: usize = 64;

/// Coefficients with magnitude below this are dropped from a [`WeightedPauliSum`].
pub const COEFF_DROP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_code(code: u8) -> Pauli {
        match code & 3 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-site product `self * other = i^k * result`, returning `(k, result)`.
    fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }
}

/// A fourth root of unity, stored as the exponent `k` of `i^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    PlusOne,
    PlusI,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_exponent(k: u8) -> Phase {
        match k & 3 {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn exponent(self) -> u8 {
        match self {
            Phase::PlusOne => 0,
            Phase::PlusI => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self {
            Phase::PlusOne => Complex64::new(1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Phase::PlusOne | Phase::MinusOne)
    }

    /// `+1` for `{+1, +i}`, `-1` for `{-1, -i}`.
    pub fn sign(self) -> f64 {
        match self {
            Phase::PlusOne | Phase::PlusI => 1.0,
            Phase::MinusOne | Phase::MinusI => -1.0,
        }
    }

    pub fn mul(self, other: Phase) -> Phase {
        Phase::from_exponent(self.exponent() + other.exponent())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hermiticity {
    Hermitian,
    AntiHermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    qubit_count: usize,
    x: u64,
    z: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub phase: Phase,
    pub string: PauliString,
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(QiteError::QubitCount(n));
    }
    Ok(())
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(qubit_count: usize) -> Result<PauliString> {
        check_qubits(qubit_count)?;
        Ok(PauliString { qubit_count, x: 0, z: 0 })
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Result<PauliString> {
        check_qubits(paulis.len())?;
        let mut s = PauliString { qubit_count: paulis.len(), x: 0, z: 0 };
        for (site, p) in paulis.iter().enumerate() {
            s.set(site, *p);
        }
        Ok(s)
    }

    pub fn from_codes(codes: &[u8]) -> Result<PauliString> {
        let paulis: Vec<Pauli> = codes.iter().map(|&c| Pauli::from_code(c)).collect();
        if let Some(pos) = codes.iter().position(|&c| c > 3) {
            return Err(QiteError::Parse(format!("Pauli code {} at site {pos} is not in 0..=3", codes[pos])));
        }
        PauliString::from_paulis(&paulis)
    }

    /// A string with `pauli` at `site` and identity elsewhere.
    pub fn single(qubit_count: usize, site: usize, pauli: Pauli) -> Result<PauliString> {
        let mut s = PauliString::identity(qubit_count)?;
        if site >= qubit_count {
            return Err(QiteError::SiteOutOfRange { site, qubits: qubit_count });
        }
        s.set(site, pauli);
        Ok(s)
    }

    /// Builds from raw masks; bits above `qubit_count` are rejected.
    pub fn from_masks(qubit_count: usize, x: u64, z: u64) -> Result<PauliString> {
        check_qubits(qubit_count)?;
        let m = mask(qubit_count);
        if x & !m != 0 || z & !m != 0 {
            return Err(QiteError::Domain("mask bits beyond qubit count".into()));
        }
        Ok(PauliString { qubit_count, x, z })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Number of sites carrying Y.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Non-identity sites in ascending order.
    pub fn support(&self) -> Vec<usize> {
        let mut bits = self.x | self.z;
        let mut out = Vec::with_capacity(bits.count_ones() as usize);
        while bits != 0 {
            let site = bits.trailing_zeros() as usize;
            out.push(site);
            bits &= bits - 1;
        }
        out
    }

    /// Pauli at `site`; panics when out of range.
    pub fn get(&self, site: usize) -> Pauli {
        assert!(site < self.qubit_count, "site {site} out of range");
        Pauli::from_bits(self.x >> site & 1 == 1, self.z >> site & 1 == 1)
    }

    fn set(&mut self, site: usize, p: Pauli) {
        let (xb, zb) = p.bits();
        let bit = 1u64 << site;
        self.x = if xb { self.x | bit } else { self.x & !bit };
        self.z = if zb { self.z | bit } else { self.z & !bit };
    }

    pub fn with_site(&self, site: usize, p: Pauli) -> Result<PauliString> {
        if site >= self.qubit_count {
            return Err(QiteError::SiteOutOfRange { site, qubits: self.qubit_count });
        }
        let mut s = *self;
        s.set(site, p);
        Ok(s)
    }

    pub fn codes(&self) -> Vec<u8> {
        (0..self.qubit_count).map(|i| self.get(i).code()).collect()
    }

    /// Splits off the Pauli at `site`, returning it and the string with that
    /// site replaced by identity.
    pub fn restrict_site(&self, site: usize) -> Result<(Pauli, PauliString)> {
        if site >= self.qubit_count {
            return Err(QiteError::SiteOutOfRange { site, qubits: self.qubit_count });
        }
        let mut rest = *self;
        rest.set(site, Pauli::I);
        Ok((self.get(site), rest))
    }

    /// Exact product `self * other = phase * string`.
    pub fn multiply(&self, other: &PauliString) -> Result<PhasedPauli> {
        if self.qubit_count != other.qubit_count {
            return Err(QiteError::Dimension { expected: self.qubit_count, found: other.qubit_count });
        }
        let mut k = 0u8;
        let mut bits = self.x | self.z | other.x | other.z;
        while bits != 0 {
            let site = bits.trailing_zeros() as usize;
            let (dk, _) = self.get(site).mul(other.get(site));
            k = (k + dk) & 3;
            bits &= bits - 1;
        }
        let string = PauliString { qubit_count: self.qubit_count, x: self.x ^ other.x, z: self.z ^ other.z };
        Ok(PhasedPauli { phase: Phase::from_exponent(k), string })
    }

    pub fn hermiticity_of_product(&self, other: &PauliString) -> Result<Hermiticity> {
        Ok(if self.multiply(other)?.phase.is_real() {
            Hermiticity::Hermitian
        } else {
            Hermiticity::AntiHermitian
        })
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }
}

impl PhasedPauli {
    /// `(phase * s) * (other.phase * t)` with phases combined.
    pub fn multiply(&self, other: &PhasedPauli) -> Result<PhasedPauli> {
        let prod = self.string.multiply(&other.string)?;
        Ok(PhasedPauli { phase: self.phase.mul(other.phase).mul(prod.phase), string: prod.string })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for site in 0..self.qubit_count {
            write!(f, "{}", self.get(site).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = QiteError;

    fn from_str(s: &str) -> Result<PauliString> {
        let paulis = s
            .chars()
            .enumerate()
            .map(|(position, ch)| match ch {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(QiteError::InvalidPauliChar { ch, position }),
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::from_paulis(&paulis)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}

/// A Hermitian operator `sum_a h_a sigma_a` with real coefficients.
///
/// Construction merges duplicate strings by adding coefficients, keeps the
/// order of first occurrence, and drops terms whose merged coefficient is
/// below [`COEFF_DROP`] in magnitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedPauliSum {
    qubit_count: usize,
    terms: Vec<PauliTerm>,
}

impl WeightedPauliSum {
    pub fn new<I>(qubit_count: usize, terms: I) -> Result<WeightedPauliSum>
    where
        I: IntoIterator<Item = (f64, PauliString)>,
    {
        check_qubits(qubit_count)?;
        let mut merged: Vec<PauliTerm> = Vec::new();
        for (coeff, string) in terms {
            if !coeff.is_finite() {
                return Err(QiteError::NonFinite("Pauli coefficient"));
            }
            if string.qubit_count() != qubit_count {
                return Err(QiteError::Dimension { expected: qubit_count, found: string.qubit_count() });
            }
            match merged.iter_mut().find(|t| t.string == string) {
                Some(t) => t.coeff += coeff,
                None => merged.push(PauliTerm { coeff, string }),
            }
        }
        merged.retain(|t| t.coeff.abs() >= COEFF_DROP);
        Ok(WeightedPauliSum { qubit_count, terms: merged })
    }

    pub fn zero(qubit_count: usize) -> Result<WeightedPauliSum> {
        WeightedPauliSum::new(qubit_count, std::iter::empty())
    }

    /// Convenience constructor from `(coeff, "XZI")` pairs.
    pub fn from_labels(qubit_count: usize, terms: &[(f64, &str)]) -> Result<WeightedPauliSum> {
        let parsed = terms
            .iter()
            .map(|(c, s)| Ok((*c, s.parse::<PauliString>()?)))
            .collect::<Result<Vec<_>>>()?;
        WeightedPauliSum::new(qubit_count, parsed)
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Locality `k`: the largest term weight (0 for an empty sum).
    pub fn max_weight(&self) -> usize {
        self.terms.iter().map(|t| t.string.weight()).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: f64) -> WeightedPauliSum {
        WeightedPauliSum {
            qubit_count: self.qubit_count,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm { coeff: t.coeff * factor, string: t.string })
                .filter(|t| t.coeff.abs() >= COEFF_DROP)
                .collect(),
        }
    }

    /// `self + shift * Identity`, merged under the usual rules.
    pub fn shifted(&self, shift: f64) -> Result<WeightedPauliSum> {
        let id = PauliString::identity(self.qubit_count)?;
        WeightedPauliSum::new(
            self.qubit_count,
            self.terms.iter().map(|t| (t.coeff, t.string)).chain(std::iter::once((shift, id))),
        )
    }

    /// True when every term is built from I and Z only.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.string.x_mask() == 0)
    }

    /// Eigenvalue of a diagonal operator on computational basis state `index`.
    pub fn diagonal_value(&self, index: usize) -> Option<f64> {
        if !self.is_diagonal() {
            return None;
        }
        Some(
            self.terms
                .iter()
                .map(|t| {
                    let parity = (index as u64 & t.string.z_mask()).count_ones() % 2;
                    if parity == 0 { t.coeff } else { -t.coeff }
                })
                .sum(),
        )
    }

    /// Transverse-field Ising chain `-J sum Z_i Z_{i+1} - g sum X_i` with open
    /// boundaries, ZZ terms first.
    pub fn transverse_ising(qubit_count: usize, coupling: f64, field: f64) -> Result<WeightedPauliSum> {
        check_qubits(qubit_count)?;
        let mut terms = Vec::new();
        for i in 0..qubit_count.saturating_sub(1) {
            let s = PauliString::single(qubit_count, i, Pauli::Z)?.with_site(i + 1, Pauli::Z)?;
            terms.push((-coupling, s));
        }
        for i in 0..qubit_count {
            terms.push((-field, PauliString::single(qubit_count, i, Pauli::X)?));
        }
        WeightedPauliSum::new(qubit_count, terms)
    }
}
