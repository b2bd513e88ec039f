//! Involutive automorphisms θ(X) = W·g(X)·W† of u(n) and their eigenspaces.

use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matcore::{self, CMatrix, RMatrix, C64, I, ONE};
use crate::pauli;

/// Tolerance for the involution record invariants.
pub const RECORD_TOL: f64 = 1e-10;

/// Relative threshold below which a Gram–Schmidt remainder counts as dependent.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StandardKind {
    AI,
    AII,
    AIII { p: usize, q: usize },
}

impl fmt::Display for StandardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StandardKind::AI => write!(f, "AI"),
            StandardKind::AII => write!(f, "AII"),
            StandardKind::AIII { p, q } => write!(f, "AIII({p},{q})"),
        }
    }
}

/// Which standard form an involution is conjugate to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvolutionClass {
    /// Antiunitary with W·conj(W) = +1 (W symmetric).
    Symmetric,
    /// Antiunitary with W·conj(W) = −1 (W antisymmetric).
    Antisymmetric,
    /// No conjugation, W² = c·1.
    Linear,
}

/// `J = [[0, 1_m], [−1_m, 0]]`.
pub fn symplectic_j(n: usize) -> CMatrix {
    let m = n / 2;
    let mut j = CMatrix::zeros(n, n);
    for k in 0..m {
        j[(k, m + k)] = ONE;
        j[(m + k, k)] = -ONE;
    }
    j
}

/// `diag(1_p, −1_q)`.
pub fn block_z(p: usize, q: usize) -> CMatrix {
    let d: Vec<C64> = (0..p + q).map(|k| if k < p { ONE } else { -ONE }).collect();
    matcore::diag(&d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Involution {
    pub n: usize,
    pub conjugate_entries: bool,
    pub w: CMatrix,
}

impl Involution {
    /// Validated constructor.
    pub fn new(w: CMatrix, conjugate_entries: bool) -> Result<Self> {
        let n = w.nrows();
        matcore::check_unitary(&w, RECORD_TOL)?;
        let sq = if conjugate_entries { &w * matcore::conj(&w) } else { &w * &w };
        let c = sq[(0, 0)];
        let residual = matcore::max_abs(&(&sq - matcore::identity(n) * c));
        if residual > RECORD_TOL || (c.norm() - 1.0).abs() > RECORD_TOL {
            return Err(Error::BadParams(format!("W does not define an involution (residual {residual:.3e})")));
        }
        if conjugate_entries && c.im.abs() > RECORD_TOL {
            return Err(Error::BadParams("W·conj(W) must be ±1".into()));
        }
        Ok(Involution { n, conjugate_entries, w })
    }

    pub fn standard(kind: StandardKind, n: usize) -> Result<Self> {
        match kind {
            StandardKind::AI => Involution::new(matcore::identity(n), true),
            StandardKind::AII => {
                if !n.is_multiple_of(2) || n == 0 {
                    return Err(Error::BadParams(format!("AII needs even dimension, got {n}")));
                }
                Involution::new(symplectic_j(n), true)
            }
            StandardKind::AIII { p, q } => {
                if p + q != n || p == 0 || q == 0 {
                    return Err(Error::BadParams(format!("AIII needs p+q = {n} with p,q ≥ 1, got ({p},{q})")));
                }
                Involution::new(block_z(p, q), false)
            }
        }
    }

    /// `W·conj(W)` (antiunitary) or `W²` (linear) as a scalar.
    pub fn square_scalar(&self) -> C64 {
        let sq = if self.conjugate_entries { &self.w * matcore::conj(&self.w) } else { &self.w * &self.w };
        sq[(0, 0)]
    }

    pub fn class(&self) -> InvolutionClass {
        if !self.conjugate_entries {
            InvolutionClass::Linear
        } else if self.square_scalar().re > 0.0 {
            InvolutionClass::Symmetric
        } else {
            InvolutionClass::Antisymmetric
        }
    }

    fn g(&self, x: &CMatrix) -> CMatrix {
        if self.conjugate_entries {
            matcore::conj(x)
        } else {
            x.clone()
        }
    }

    pub fn apply_algebra(&self, x: &CMatrix) -> CMatrix {
        &self.w * self.g(x) * self.w.adjoint()
    }

    pub fn apply_group(&self, u: &CMatrix, tol: f64) -> Result<CMatrix> {
        matcore::check_unitary(u, tol)?;
        Ok(self.apply_algebra(u))
    }

    /// θ′(X) = S·θ(S†XS)·S†.
    pub fn conjugate(&self, s: &CMatrix) -> Involution {
        let w = if self.conjugate_entries { s * &self.w * s.transpose() } else { s * &self.w * s.adjoint() };
        Involution { n: self.n, conjugate_entries: self.conjugate_entries, w }
    }

    /// Residual of θ∘θ = id on `x`.
    pub fn involutivity_residual(&self, x: &CMatrix) -> f64 {
        matcore::max_abs(&(self.apply_algebra(&self.apply_algebra(x)) - x))
    }

    /// Residual of θ∘θ′ = θ′∘θ on `x`.
    pub fn commutes_on(&self, other: &Involution, x: &CMatrix) -> f64 {
        let a = self.apply_algebra(&other.apply_algebra(x));
        let b = other.apply_algebra(&self.apply_algebra(x));
        matcore::max_abs(&(a - b))
    }

    /// (+1, −1) eigenspaces.
    pub fn split(&self) -> (Subspace, Subspace) {
        let basis = unitary_algebra_basis(self.n);
        let half = C64::new(0.5, 0.0);
        let mut plus = Vec::with_capacity(basis.len());
        let mut minus = Vec::with_capacity(basis.len());
        for b in &basis {
            let t = self.apply_algebra(b);
            plus.push((b + &t) * half);
            minus.push((b - &t) * half);
        }
        (Subspace::from_spanning(self.n, plus, "K"), Subspace::from_spanning(self.n, minus, "P"))
    }
}

/// Orthonormal basis of u(n): normalized i·Pauli strings when n is a power of
/// two, otherwise i·E_jj, (E_jk − E_kj)/√2 and i(E_jk + E_kj)/√2.
pub fn unitary_algebra_basis(n: usize) -> Vec<CMatrix> {
    if n.is_power_of_two() && n > 1 {
        let sites = n.trailing_zeros() as usize;
        return pauli::all_strings(sites).iter().map(pauli::normalized_basis_matrix).collect();
    }
    let mut out = Vec::with_capacity(n * n);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..n {
        let mut m = CMatrix::zeros(n, n);
        m[(j, j)] = I;
        out.push(m);
    }
    for j in 0..n {
        for k in j + 1..n {
            let mut a = CMatrix::zeros(n, n);
            a[(j, k)] = C64::new(r, 0.0);
            a[(k, j)] = C64::new(-r, 0.0);
            out.push(a);
            let mut s = CMatrix::zeros(n, n);
            s[(j, k)] = C64::new(0.0, r);
            s[(k, j)] = C64::new(0.0, r);
            out.push(s);
        }
    }
    out
}

/// Real coordinates (Re, Im column-major) of a matrix; the Euclidean inner
/// product of coordinates equals `Re tr(A B†)`.
pub fn coords(x: &CMatrix) -> DVector<f64> {
    let len = x.len();
    let mut v = DVector::zeros(2 * len);
    for (k, z) in x.iter().enumerate() {
        v[k] = z.re;
        v[len + k] = z.im;
    }
    v
}

pub fn from_coords(n: usize, v: &DVector<f64>) -> CMatrix {
    let len = n * n;
    CMatrix::from_fn(n, n, |r, c| {
        let k = c * n + r;
        C64::new(v[k], v[len + k])
    })
}

/// Real subspace of u(n) with an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    pub n: usize,
    pub label: String,
    pub basis: Vec<CMatrix>,
    /// Basis coordinates as columns, `2n² × dim`.
    frame: RMatrix,
}

impl Subspace {
    pub fn empty(n: usize, label: impl Into<String>) -> Self {
        Subspace { n, label: label.into(), basis: Vec::new(), frame: RMatrix::zeros(2 * n * n, 0) }
    }

    /// Orthonormalize `vectors` (two-pass Gram–Schmidt), dropping remainders
    /// below `RANK_TOL` relative to the largest input norm.
    pub fn from_spanning(n: usize, vectors: impl IntoIterator<Item = CMatrix>, label: impl Into<String>) -> Self {
        let vs: Vec<DVector<f64>> = vectors.into_iter().map(|v| coords(&v)).collect();
        let scale = vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for v in vs {
            let mut r = v;
            for _ in 0..2 {
                for q in &cols {
                    let d = q.dot(&r);
                    r.axpy(-d, q, 1.0);
                }
            }
            let norm = r.norm();
            if norm > RANK_TOL * scale && norm > 1e-14 {
                cols.push(r / norm);
            }
        }
        Self::from_orthonormal_coords(n, label, cols)
    }

    fn from_orthonormal_coords(n: usize, label: impl Into<String>, cols: Vec<DVector<f64>>) -> Self {
        let frame = if cols.is_empty() { RMatrix::zeros(2 * n * n, 0) } else { RMatrix::from_columns(&cols) };
        let basis = cols.iter().map(|c| from_coords(n, c)).collect();
        Subspace { n, label: label.into(), basis, frame }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Basis coordinates as columns.
    pub fn frame(&self) -> &RMatrix {
        &self.frame
    }

    /// Coefficients of the orthogonal projection in this basis.
    pub fn components(&self, x: &CMatrix) -> DVector<f64> {
        self.frame.transpose() * coords(x)
    }

    pub fn combine(&self, coeffs: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.n, self.n);
        for (b, &c) in self.basis.iter().zip(coeffs) {
            out += b * C64::new(c, 0.0);
        }
        out
    }

    pub fn project(&self, x: &CMatrix) -> CMatrix {
        if self.dim() == 0 {
            return CMatrix::zeros(self.n, self.n);
        }
        from_coords(self.n, &(&self.frame * self.components(x)))
    }

    /// `max |x − proj(x)|`.
    pub fn residual(&self, x: &CMatrix) -> f64 {
        matcore::max_abs(&(x - self.project(x)))
    }

    pub fn contains(&self, x: &CMatrix, tol: f64) -> bool {
        self.residual(x) <= tol
    }

    /// Direct sum of mutually orthogonal subspaces.
    pub fn direct_sum<'a>(n: usize, parts: impl IntoIterator<Item = &'a Subspace>, label: impl Into<String>) -> Self {
        let cols: Vec<DVector<f64>> = parts
            .into_iter()
            .flat_map(|s| s.frame.column_iter().map(|c| c.clone_owned()).collect::<Vec<_>>())
            .collect();
        Self::from_orthonormal_coords(n, label, cols)
    }

    /// Largest residual of the brackets of all basis pairs of `self` with `other`,
    /// measured against `target`.
    pub fn bracket_residual(&self, other: &Subspace, target: &Subspace) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in other.basis.iter().enumerate() {
                if std::ptr::eq(self, other) && j < i {
                    continue;
                }
                let c = matcore::commutator(a, b);
                if matcore::max_abs(&c) < 1e-15 {
                    continue;
                }
                worst = worst.max(target.residual(&c));
            }
        }
        worst
    }

    /// Largest |⟨a, b⟩| over basis pairs.
    pub fn overlap(&self, other: &Subspace) -> f64 {
        if self.dim() == 0 || other.dim() == 0 {
            return 0.0;
        }
        let g = self.frame.transpose() * &other.frame;
        matcore::max_abs_real(&g)
    }

    /// Image under `X ↦ S X S†`.
    pub fn conjugated(&self, s: &CMatrix) -> Subspace {
        let sd = s.adjoint();
        Subspace::from_spanning(self.n, self.basis.iter().map(|b| s * b * &sd), self.label.clone())
    }

    /// Pauli expansion of each basis element (qubit dimensions only).
    pub fn pauli_basis(&self) -> Result<Vec<pauli::AlgebraElement>> {
        self.basis.iter().map(|b| pauli::expand(b, 1e-9).map(|e| e.pruned(1e-12))).collect()
    }

    /// True when `other` spans the same space (mutual containment).
    pub fn same_span(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim()
            && other.basis.iter().all(|b| self.contains(b, tol))
            && self.basis.iter().all(|b| other.contains(b, tol))
    }
}

/// Worst residual of the three Cartan-pair bracket relations.
pub fn cartan_pair_residual(k: &Subspace, p: &Subspace) -> f64 {
    let kk = k.bracket_residual(k, k);
    let kp = k.bracket_residual(p, p);
    let pp = p.bracket_residual(p, k);
    kk.max(kp).max(pp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn span_of(n_sites: usize, strings: &[&str]) -> Subspace {
        Subspace::from_spanning(
            1 << n_sites,
            strings.iter().map(|s| s.parse::<pauli::PauliString>().unwrap().matrix() * I),
            "expected",
        )
    }

    #[test]
    fn standard_fixed_dimensions() {
        let (k, p) = Involution::standard(StandardKind::AI, 2).unwrap().split();
        assert_eq!((k.dim(), p.dim()), (1, 3));
        assert!(k.same_span(&span_of(1, &["Y"]), 1e-12));

        let (k, p) = Involution::standard(StandardKind::AII, 4).unwrap().split();
        assert_eq!((k.dim(), p.dim()), (10, 6));

        let (k, p) = Involution::standard(StandardKind::AIII { p: 4, q: 4 }, 8).unwrap().split();
        assert_eq!((k.dim(), p.dim()), (32, 32));

        let (k, p) = Involution::standard(StandardKind::AIII { p: 1, q: 1 }, 2).unwrap().split();
        assert!(k.same_span(&span_of(1, &["I", "Z"]), 1e-12));
        assert!(p.same_span(&span_of(1, &["X", "Y"]), 1e-12));
    }

    #[test]
    fn standard_rejects_bad_params() {
        assert!(Involution::standard(StandardKind::AII, 3).is_err());
        assert!(Involution::standard(StandardKind::AIII { p: 2, q: 0 }, 2).is_err());
        assert!(Involution::standard(StandardKind::AIII { p: 1, q: 2 }, 4).is_err());
    }

    #[test]
    fn identity_of_u_n_sits_in_k_only_for_linear_types() {
        let one = matcore::identity(4) * I;
        let ai = Involution::standard(StandardKind::AI, 4).unwrap();
        let aii = Involution::standard(StandardKind::AII, 4).unwrap();
        let aiii = Involution::standard(StandardKind::AIII { p: 1, q: 3 }, 4).unwrap();
        assert!(matcore::max_abs(&(ai.apply_algebra(&one) + &one)) < 1e-15);
        assert!(matcore::max_abs(&(aii.apply_algebra(&one) + &one)) < 1e-15);
        assert!(matcore::max_abs(&(aiii.apply_algebra(&one) - &one)) < 1e-15);
    }

    #[test]
    fn apply_direct_evaluations() {
        let x = span_of(1, &["X"]).basis[0].clone();
        let ai = Involution::standard(StandardKind::AI, 2).unwrap();
        // conj(iσx) = −iσx
        assert!(matcore::max_abs(&(ai.apply_algebra(&x) + &x)) < 1e-15);
        let aiii = Involution::standard(StandardKind::AIII { p: 1, q: 1 }, 2).unwrap();
        assert!(matcore::max_abs(&(aiii.apply_algebra(&x) + &x)) < 1e-15);
        let aii = Involution::standard(StandardKind::AII, 2).unwrap();
        assert!(matcore::max_abs(&(aii.apply_algebra(&x) - &x)) < 1e-15);
        assert!(aii.apply_group(&matcore::identity(2), 1e-9).is_ok());
        assert!(aii.apply_group(&(matcore::identity(2) * C64::new(2.0, 0.0)), 1e-9).is_err());
    }

    #[test]
    fn cartan_relations_of_standard_pairs() {
        for (kind, n) in [
            (StandardKind::AI, 4),
            (StandardKind::AI, 6),
            (StandardKind::AII, 6),
            (StandardKind::AII, 8),
            (StandardKind::AIII { p: 2, q: 3 }, 5),
            (StandardKind::AIII { p: 3, q: 5 }, 8),
        ] {
            let (k, p) = Involution::standard(kind, n).unwrap().split();
            assert_eq!(k.dim() + p.dim(), n * n);
            assert!(k.overlap(&p) < 1e-12);
            assert!(cartan_pair_residual(&k, &p) < 1e-9, "{kind}");
        }
    }

    #[test]
    fn cartan_relations_sampled_n16() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [StandardKind::AI, StandardKind::AII, StandardKind::AIII { p: 6, q: 10 }] {
            let th = Involution::standard(kind, 16).unwrap();
            let (k, p) = th.split();
            assert_eq!(k.dim() + p.dim(), 256);
            for _ in 0..20 {
                let a = k.project(&matcore::random_skew_hermitian(16, &mut rng));
                let b = p.project(&matcore::random_skew_hermitian(16, &mut rng));
                let c = p.project(&matcore::random_skew_hermitian(16, &mut rng));
                let a2 = k.project(&matcore::random_skew_hermitian(16, &mut rng));
                assert!(k.residual(&matcore::commutator(&a, &a2)) < 1e-9);
                assert!(p.residual(&matcore::commutator(&a, &b)) < 1e-9);
                assert!(k.residual(&matcore::commutator(&b, &c)) < 1e-9);
            }
        }
    }

    #[test]
    fn conjugation_transports_eigenspaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [StandardKind::AI, StandardKind::AII, StandardKind::AIII { p: 1, q: 3 }] {
            let th = Involution::standard(kind, 4).unwrap();
            let same = th.conjugate(&matcore::identity(4));
            assert!(matcore::max_abs(&(same.w.clone() - &th.w)) < 1e-15);

            let s = matcore::haar_unitary(4, &mut rng);
            let th2 = th.conjugate(&s);
            let check = Involution::new(th2.w.clone(), th2.conjugate_entries).unwrap();
            assert_eq!(check.class(), th.class());
            let (k, p) = th.split();
            let (k2, p2) = th2.split();
            assert!(k2.same_span(&k.conjugated(&s), 1e-10));
            assert!(p2.same_span(&p.conjugated(&s), 1e-10));
            // automorphism on random pairs
            let x = matcore::random_skew_hermitian(4, &mut rng);
            let y = matcore::random_skew_hermitian(4, &mut rng);
            let lhs = th2.apply_algebra(&matcore::commutator(&x, &y));
            let rhs = matcore::commutator(&th2.apply_algebra(&x), &th2.apply_algebra(&y));
            assert!(matcore::max_abs(&(lhs - rhs)) < 1e-10);
            assert!(th2.involutivity_residual(&x) < 1e-10);
        }
    }

    #[test]
    fn classes() {
        assert_eq!(Involution::standard(StandardKind::AI, 3).unwrap().class(), InvolutionClass::Symmetric);
        assert_eq!(Involution::standard(StandardKind::AII, 4).unwrap().class(), InvolutionClass::Antisymmetric);
        assert_eq!(
            Involution::standard(StandardKind::AIII { p: 1, q: 2 }, 3).unwrap().class(),
            InvolutionClass::Linear
        );
    }

    #[test]
    fn non_qubit_basis_is_orthonormal() {
        let b = unitary_algebra_basis(3);
        assert_eq!(b.len(), 9);
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((matcore::inner(x, y) - expect).abs() < 1e-14);
            }
        }
    }
}
