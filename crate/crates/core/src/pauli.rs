//! Pauli strings as a basis of u(2^N).
//!
//! Site 1 is the leftmost tensor factor and the most significant bit of the
//! computational-basis index.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, CMatrix, C64, I, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];

    pub fn to_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(ch: char) -> Option<Letter> {
        match ch {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }

    pub fn matrix(self) -> CMatrix {
        let m = match self {
            Letter::I => [ONE, ZERO, ZERO, ONE],
            Letter::X => [ZERO, ONE, ONE, ZERO],
            Letter::Y => [ZERO, -I, I, ZERO],
            Letter::Z => [ONE, ZERO, ZERO, -ONE],
        };
        CMatrix::from_row_slice(2, 2, &m)
    }

    fn flips(self) -> bool {
        matches!(self, Letter::X | Letter::Y)
    }

    /// Entry `σ[b, b ^ flip]` for input bit `b`.
    fn phase(self, b: usize) -> C64 {
        match (self, b) {
            (Letter::I, _) | (Letter::X, _) => ONE,
            (Letter::Y, 0) => -I,
            (Letter::Y, _) => I,
            (Letter::Z, 0) => ONE,
            (Letter::Z, _) => -ONE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString(Vec<Letter>);

impl PauliString {
    pub fn new(letters: Vec<Letter>) -> Self {
        PauliString(letters)
    }

    pub fn identity(n: usize) -> Self {
        PauliString(vec![Letter::I; n])
    }

    /// The string with `letter` at 1-based `site` and identity elsewhere.
    pub fn single(n: usize, site: usize, letter: Letter) -> Self {
        let mut v = vec![Letter::I; n];
        v[site - 1] = letter;
        PauliString(v)
    }

    /// The `index`-th string in lexicographic order (I<X<Y<Z, site 1 most significant).
    pub fn from_index(n: usize, mut index: usize) -> Self {
        let mut v = vec![Letter::I; n];
        for k in (0..n).rev() {
            v[k] = Letter::ALL[index % 4];
            index /= 4;
        }
        PauliString(v)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&l| l != Letter::I).count()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    pub fn concat(&self, other: &PauliString) -> PauliString {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        PauliString(v)
    }

    /// Combinatorial commutation rule: strings commute iff they anticommute
    /// on an even number of sites.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self.0.iter().zip(&other.0).filter(|(a, b)| **a != Letter::I && **b != Letter::I && a != b).count();
        anti % 2 == 0
    }

    fn x_mask(&self) -> usize {
        let n = self.0.len();
        self.0.iter().enumerate().filter(|(_, l)| l.flips()).fold(0, |m, (k, _)| m | (1 << (n - 1 - k)))
    }

    /// Nonzero entry of row `r`: `(column, value)`.
    fn row_entry(&self, r: usize) -> (usize, C64) {
        let n = self.0.len();
        let mut phase = ONE;
        for (k, l) in self.0.iter().enumerate() {
            let bit = (r >> (n - 1 - k)) & 1;
            phase *= l.phase(bit);
        }
        (r ^ self.x_mask(), phase)
    }

    /// Dense Hermitian matrix `σ_{s1} ⊗ … ⊗ σ_{sN}`.
    pub fn matrix(&self) -> CMatrix {
        let dim = 1usize << self.0.len();
        let mut m = CMatrix::zeros(dim, dim);
        for r in 0..dim {
            let (col, v) = self.row_entry(r);
            m[(r, col)] = v;
        }
        m
    }

    /// `tr(M · P_s)` without forming `P_s`.
    pub fn trace_with(&self, m: &CMatrix) -> C64 {
        let dim = m.nrows();
        let mut acc = ZERO;
        for r in 0..dim {
            let (col, v) = self.row_entry(r);
            // P[r, col] = v contributes M[col, r] * v
            acc += m[(col, r)] * v;
        }
        acc
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| Letter::from_char(ch).ok_or_else(|| Error::Parse(format!("bad Pauli letter {ch:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
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

/// All 4^N strings in lexicographic order.
pub fn all_strings(n: usize) -> Vec<PauliString> {
    (0..1usize << (2 * n)).map(|i| PauliString::from_index(n, i)).collect()
}

/// Element of u(n): either Σ c_s · i·P_s over Pauli strings, or a raw
/// skew-Hermitian matrix when n is not a power of two.
#[derive(Clone, Debug, PartialEq)]
pub enum AlgebraElement {
    Pauli { n_sites: usize, coeffs: BTreeMap<PauliString, f64> },
    Raw(CMatrix),
}

impl AlgebraElement {
    pub fn zero(n_sites: usize) -> Self {
        AlgebraElement::Pauli { n_sites, coeffs: BTreeMap::new() }
    }

    pub fn from_terms(n_sites: usize, terms: impl IntoIterator<Item = (PauliString, f64)>) -> Self {
        let mut coeffs = BTreeMap::new();
        for (s, c) in terms {
            *coeffs.entry(s).or_insert(0.0) += c;
        }
        AlgebraElement::Pauli { n_sites, coeffs }
    }

    pub fn dim(&self) -> usize {
        match self {
            AlgebraElement::Pauli { n_sites, .. } => 1 << n_sites,
            AlgebraElement::Raw(m) => m.nrows(),
        }
    }

    /// Drop Pauli coefficients with magnitude at or below `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        match self {
            AlgebraElement::Pauli { n_sites, coeffs } => AlgebraElement::Pauli {
                n_sites: *n_sites,
                coeffs: coeffs.iter().filter(|(_, c)| c.abs() > tol).map(|(s, c)| (s.clone(), *c)).collect(),
            },
            raw => raw.clone(),
        }
    }

    pub fn matrix(&self) -> CMatrix {
        assemble(self)
    }
}

/// Pauli coefficients of a skew-Hermitian matrix in the basis i·P_s.
pub fn expand(m: &CMatrix, tol: f64) -> Result<AlgebraElement> {
    let dim = m.nrows();
    if !m.is_square() || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch { expected: dim.next_power_of_two(), got: dim });
    }
    let scale = matcore::max_abs(m).max(1.0);
    matcore::check_skew_hermitian(m, tol * scale)?;
    let n = dim.trailing_zeros() as usize;
    let mut coeffs = BTreeMap::new();
    for s in all_strings(n) {
        // tr(M (iP)†) = tr(M · (−i) P)
        let v = (s.trace_with(m) * (-I)).re / dim as f64;
        if v.abs() > 1e-15 {
            coeffs.insert(s, v);
        }
    }
    Ok(AlgebraElement::Pauli { n_sites: n, coeffs })
}

/// Σ c_s · i·P_s as a dense matrix.
pub fn assemble(e: &AlgebraElement) -> CMatrix {
    match e {
        AlgebraElement::Raw(m) => m.clone(),
        AlgebraElement::Pauli { n_sites, coeffs } => {
            let dim = 1usize << n_sites;
            let mut m = CMatrix::zeros(dim, dim);
            for (s, &cf) in coeffs {
                let v = I * cf;
                for r in 0..dim {
                    let (col, ph) = s.row_entry(r);
                    m[(r, col)] += ph * v;
                }
            }
            m
        }
    }
}

/// Strings of odd weight and of even weight (identity included).
pub fn parity_split(n: usize) -> (Vec<PauliString>, Vec<PauliString>) {
    all_strings(n).into_iter().partition(|s| s.weight() % 2 == 1)
}

/// The l-fold tensor power of {XX, YY, ZZ, II}.
pub fn commuting_family(l: usize) -> Vec<PauliString> {
    let base: Vec<PauliString> = ["XX", "YY", "ZZ", "II"].iter().map(|s| s.parse().unwrap()).collect();
    let mut out = vec![PauliString::new(Vec::new())];
    for _ in 0..l {
        out = out.iter().flat_map(|a| base.iter().map(move |b| a.concat(b))).collect();
    }
    out
}

/// Orthonormal basis matrix i·P_s / √(2^N).
pub fn normalized_basis_matrix(s: &PauliString) -> CMatrix {
    let dim = 1usize << s.len();
    s.matrix() * (I / (dim as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn matrices_match_kronecker_products() {
        for s in all_strings(3) {
            let mut k = CMatrix::identity(1, 1);
            for l in s.letters() {
                k = matcore::kron(&k, &l.matrix());
            }
            assert!(matcore::max_abs(&(k - s.matrix())) < 1e-15, "{s}");
        }
    }

    #[test]
    fn expand_examples() {
        let m = ps("ZII").matrix() * I;
        let e = expand(&m, 1e-9).unwrap();
        assert_eq!(e, AlgebraElement::from_terms(3, [(ps("ZII"), 1.0)]));

        assert_eq!(expand(&CMatrix::zeros(8, 8), 1e-9).unwrap(), AlgebraElement::zero(3));

        // log of exp(−iπ/4 YZX)
        let gen = ps("YZX").matrix() * (I * (-PI / 4.0));
        let u = matcore::expm_skew(&gen);
        let h = matcore::principal_log_unitary(&u, 1e-9).unwrap();
        let e = expand(&h, 1e-9).unwrap().pruned(1e-12);
        match e {
            AlgebraElement::Pauli { coeffs, .. } => {
                assert_eq!(coeffs.len(), 1);
                assert!((coeffs[&ps("YZX")] + PI / 4.0).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn expand_rejects_hermitian() {
        let m = ps("XI").matrix();
        assert!(matches!(expand(&m, 1e-9), Err(Error::NotSkewHermitian { .. })));
    }

    #[test]
    fn parity_split_examples() {
        let (odd, even) = parity_split(1);
        assert_eq!(odd, vec![ps("X"), ps("Y"), ps("Z")]);
        assert_eq!(even, vec![ps("I")]);
        let (odd, even) = parity_split(2);
        assert_eq!((odd.len(), even.len()), (6, 10));
        let (odd, even) = parity_split(3);
        assert_eq!((odd.len(), even.len()), (36, 28));
    }

    #[test]
    fn odd_count_formula() {
        for n in 1..=6u32 {
            let (odd, even) = parity_split(n as usize);
            let expected = (4i64.pow(n) - (-2i64).pow(n)) / 2;
            assert_eq!(odd.len() as i64, expected);
            assert_eq!(odd.len() + even.len(), 4usize.pow(n));
        }
    }

    #[test]
    fn commuting_family_examples() {
        assert_eq!(commuting_family(0), vec![PauliString::new(vec![])]);
        assert_eq!(commuting_family(1), vec![ps("XX"), ps("YY"), ps("ZZ"), ps("II")]);
        let fam = commuting_family(2);
        assert_eq!(fam.len(), 16);
        assert!(fam.contains(&ps("XXYY")));
        for a in &fam {
            for b in &fam {
                let c = matcore::commutator(&a.matrix(), &b.matrix());
                assert!(matcore::max_abs(&c) < 1e-15);
            }
        }
    }

    #[test]
    fn display_and_parse_round_trip() {
        let s = ps("XYZI");
        assert_eq!(s.to_string(), "XYZI");
        assert_eq!(serde_json::to_string(&s).unwrap(), "\"XYZI\"");
        assert!("XQ".parse::<PauliString>().is_err());
    }

    fn letter() -> impl Strategy<Value = Letter> {
        prop_oneof![Just(Letter::I), Just(Letter::X), Just(Letter::Y), Just(Letter::Z)]
    }

    proptest! {
        #[test]
        fn commutation_rule_matches_matrices(
            (a, b) in (1usize..=4).prop_flat_map(|n| (
                proptest::collection::vec(letter(), n),
                proptest::collection::vec(letter(), n),
            ))
        ) {
            let (a, b) = (PauliString::new(a), PauliString::new(b));
            let c = matcore::commutator(&a.matrix(), &b.matrix());
            prop_assert_eq!(matcore::max_abs(&c) < 1e-12, a.commutes_with(&b));
        }

        #[test]
        fn expand_inverts_assemble(
            (n, terms) in (1usize..=5).prop_flat_map(|n| (
                Just(n),
                proptest::collection::vec((0usize..(1 << (2 * n)), -3.0f64..3.0), 0..8),
            ))
        ) {
            let e = AlgebraElement::from_terms(n, terms.into_iter().map(|(i, c)| (PauliString::from_index(n, i), c)));
            let m = assemble(&e);
            prop_assert!(matcore::skew_hermitian_residual(&m) < 1e-12);
            let back = expand(&m, 1e-9).unwrap();
            let diff = assemble(&back) - &m;
            prop_assert!(matcore::max_abs(&diff) < 1e-12);
            if let (AlgebraElement::Pauli { coeffs: a, .. }, AlgebraElement::Pauli { coeffs: b, .. }) = (&e, &back) {
                for (s, c) in a {
                    prop_assert!((b.get(s).copied().unwrap_or(0.0) - c).abs() < 1e-12);
                }
            }
        }
    }
}
