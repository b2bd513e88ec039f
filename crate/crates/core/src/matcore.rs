//! Dense complex matrix kernel.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>` and is pure: no
//! global state, every tolerance is passed in explicitly.

use std::f64::consts::PI;

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

/// Tolerance used when the caller does not override it.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Eigenvalues closer than this are treated as one cluster.
pub const CLUSTER_GAP: f64 = 1e-8;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

pub fn from_real(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn real_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.im)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `max |U†U − 1|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    max_abs(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn skew_hermitian_residual(m: &CMatrix) -> f64 {
    max_abs(&(m + m.adjoint()))
}

pub fn is_unitary(u: &CMatrix, tol: f64) -> bool {
    u.is_square() && unitarity_residual(u) <= tol
}

pub fn check_unitary(u: &CMatrix, tol: f64) -> Result<()> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch { expected: u.nrows(), got: u.ncols() });
    }
    let residual = unitarity_residual(u);
    if residual > tol {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

pub fn check_skew_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    let residual = skew_hermitian_residual(m);
    if residual > tol {
        return Err(Error::NotSkewHermitian { residual });
    }
    Ok(())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Real trace inner product `Re tr(A B†)`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn frob_norm(a: &CMatrix) -> f64 {
    inner(a, a).sqrt()
}

/// Entrywise complex conjugate.
pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

/// Phase of `z` folded into (−π, π].
pub fn principal_arg(z: C64) -> f64 {
    let a = z.arg();
    if a <= -PI + 1e-15 {
        PI
    } else {
        a
    }
}

pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))
}

/// `V diag(d) V†`.
pub fn reassemble(v: &CMatrix, d: &[C64]) -> CMatrix {
    let mut vd = v.clone();
    for (j, mut col) in vd.column_iter_mut().enumerate() {
        col *= d[j];
    }
    vd * v.adjoint()
}

/// Eigenvector phase convention applied after diagonalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhasePolicy {
    /// Leave vectors as the iteration produced them.
    None,
    /// Rotate each vector so its first non-negligible entry is real positive.
    #[default]
    FirstEntryReal,
}

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn reconstruct(&self) -> CMatrix {
        reassemble(&self.vectors, &self.values)
    }
}

fn first_significant(v: &[C64]) -> C64 {
    v.iter().copied().find(|z| z.norm() > 1e-8).unwrap_or(ZERO)
}

/// Modified Gram–Schmidt on the listed columns of `v`, in place.
fn orthonormalize_columns(v: &mut CMatrix, cols: &[usize]) {
    for (idx, &j) in cols.iter().enumerate() {
        for &k in &cols[..idx] {
            let proj = v.column(k).dotc(&v.column(j));
            let ck = v.column(k).clone_owned();
            let mut cj = v.column_mut(j);
            cj -= ck * proj;
        }
        let norm = v.column(j).norm();
        if norm > 0.0 {
            let mut cj = v.column_mut(j);
            cj /= C64::new(norm, 0.0);
        }
    }
}

/// Eigendecomposition of a normal matrix, `M = V diag(λ) V†`.
///
/// Eigenvalues are sorted by descending principal phase; equal phases are
/// ordered by descending modulus of the eigenvector's first significant entry.
pub fn eig_normal(m: &CMatrix, tol: f64) -> Result<Eigen> {
    eig_normal_with(m, tol, PhasePolicy::default())
}

/// Unsorted eigenpairs of a normal matrix: complex Schur form, falling back to
/// the eigenbasis of a generic real combination of its commuting Hermitian
/// parts when the Schur iteration stalls (it can on near-scalar input).
fn normal_eigvecs(m: &CMatrix, tol: f64) -> Result<(CMatrix, Vec<C64>)> {
    let n = m.nrows();
    if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, 10_000 * n.max(1)) {
        let (q, t) = schur.unpack();
        return Ok((q, (0..n).map(|i| t[(i, i)]).collect()));
    }
    let re = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let im = (m - m.adjoint()) * C64::new(0.0, -0.5);
    for (a, b) in [(1.0, 0.618_033_988_749_895), (0.414_213_562_373_095, 1.0), (1.0, -0.302_775_637_731_995)] {
        let (_, v) = eigh(&(&re * C64::new(a, 0.0) + &im * C64::new(b, 0.0)));
        let d = v.adjoint() * m * &v;
        let mut off = d.clone();
        off.fill_diagonal(ZERO);
        if max_abs(&off) <= tol.max(1e-12) {
            let vals = (0..n).map(|i| d[(i, i)]).collect();
            return Ok((v, vals));
        }
    }
    Err(Error::NoConvergence("eigendecomposition of a normal matrix".into()))
}

pub fn eig_normal_with(m: &CMatrix, tol: f64, policy: PhasePolicy) -> Result<Eigen> {
    let n = m.nrows();
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    let scale = max_abs(m).max(1.0);
    let residual = max_abs(&(m * m.adjoint() - m.adjoint() * m));
    if residual > tol * scale * scale {
        return Err(Error::NotNormal { residual });
    }
    let (q, raw) = normal_eigvecs(m, tol * scale)?;

    let mut order: Vec<usize> = (0..n).collect();
    let keys: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let col: Vec<C64> = q.column(j).iter().copied().collect();
            (principal_arg(raw[j]), first_significant(&col).norm())
        })
        .collect();
    order.sort_by(|&a, &b| {
        let (pa, ma) = keys[a];
        let (pb, mb) = keys[b];
        if (pa - pb).abs() > CLUSTER_GAP {
            pb.partial_cmp(&pa).unwrap()
        } else {
            mb.partial_cmp(&ma).unwrap().then(a.cmp(&b))
        }
    });

    let values: Vec<C64> = order.iter().map(|&j| raw[j]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        vectors.set_column(new, &q.column(old));
    }

    // re-orthonormalize inside clusters of (numerically) equal eigenvalues
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end] - values[start]).norm() < CLUSTER_GAP {
            end += 1;
        }
        if end - start > 1 {
            let cols: Vec<usize> = (start..end).collect();
            orthonormalize_columns(&mut vectors, &cols);
        }
        start = end;
    }

    if policy == PhasePolicy::FirstEntryReal {
        for j in 0..n {
            let col: Vec<C64> = vectors.column(j).iter().copied().collect();
            let f = first_significant(&col);
            if f.norm() > 0.0 {
                let phase = f.conj() / f.norm();
                let mut cj = vectors.column_mut(j);
                cj *= phase;
            }
        }
    }
    Ok(Eigen { values, vectors })
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let se = SymmetricEigen::new(herm);
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&j| se.eigenvalues[j]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        vecs.set_column(new, &se.eigenvectors.column(old));
    }
    (vals, vecs)
}

/// Real symmetric eigen-decomposition, eigenvalues ascending.
pub fn eigh_real(a: &RMatrix) -> (Vec<f64>, RMatrix) {
    let sym = (a + a.transpose()) * 0.5;
    let se = SymmetricEigen::new(sym);
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| se.eigenvalues[x].partial_cmp(&se.eigenvalues[y]).unwrap());
    let vals = order.iter().map(|&j| se.eigenvalues[j]).collect();
    let mut vecs = RMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        vecs.set_column(new, &se.eigenvectors.column(old));
    }
    (vals, vecs)
}

/// Real orthogonal `Q` (det +1) with `QᵀAQ` and `QᵀBQ` both diagonal.
///
/// Columns are ordered by ascending eigenvalue of `A`, then of `B` inside
/// each `A`-cluster; each column has its first significant entry positive,
/// except that the last column absorbs the sign needed for det Q = +1.
pub fn simdiag_commuting_symmetric(a: &RMatrix, b: &RMatrix, tol: f64) -> Result<RMatrix> {
    let n = a.nrows();
    let scale = max_abs_real(a).max(max_abs_real(b)).max(1.0);
    for m in [a, b] {
        let residual = max_abs_real(&(m - m.transpose()));
        if residual > tol * scale {
            return Err(Error::NotSymmetric { residual });
        }
    }
    let residual = max_abs_real(&(a * b - b * a));
    if residual > tol * scale * scale {
        return Err(Error::NotCommuting { residual });
    }

    let (avals, mut q) = eigh_real(a);
    let gap = CLUSTER_GAP * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && avals[end] - avals[end - 1] < gap {
            end += 1;
        }
        if end - start > 1 {
            let qc = q.columns(start, end - start).clone_owned();
            let bc = qc.transpose() * b * &qc;
            let (_, r) = eigh_real(&bc);
            let rotated = qc * r;
            q.columns_mut(start, end - start).copy_from(&rotated);
        }
        start = end;
    }
    for j in 0..n {
        let f = q.column(j).iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
        if f < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    if n > 0 && q.determinant() < 0.0 {
        let mut col = q.column_mut(n - 1);
        col *= -1.0;
    }
    Ok(q)
}

fn check_branch(phases: &[f64], tol: f64, cut: f64) -> Result<()> {
    for &p in phases {
        let d = (p - cut).rem_euclid(2.0 * PI);
        if d < tol || 2.0 * PI - d < tol {
            return Err(Error::BranchAmbiguity { phase: p });
        }
    }
    Ok(())
}

/// Eigenphases of a unitary lifted into `(offset − π, offset + π]`.
fn lifted_phases(values: &[C64], offset: f64) -> Vec<f64> {
    values
        .iter()
        .map(|z| {
            let p = principal_arg(*z);
            let mut shifted = p - offset;
            while shifted <= -PI {
                shifted += 2.0 * PI;
            }
            while shifted > PI {
                shifted -= 2.0 * PI;
            }
            shifted + offset
        })
        .collect()
}

/// Principal logarithm of a unitary: skew-Hermitian `H` with `exp(H) = U`
/// and every eigenvalue of `H` in `i·(−π, π]`.
pub fn principal_log_unitary(u: &CMatrix, tol: f64) -> Result<CMatrix> {
    log_unitary_branch(u, tol, 0.0)
}

/// Logarithm with the branch cut rotated to `offset + π`.
pub fn log_unitary_branch(u: &CMatrix, tol: f64, offset: f64) -> Result<CMatrix> {
    check_unitary(u, tol.max(1e-12) * 10.0)?;
    let e = eig_normal_with(u, tol.max(1e-10), PhasePolicy::None)?;
    let phases = lifted_phases(&e.values, offset);
    check_branch(&phases, tol, offset + PI)?;
    let d: Vec<C64> = phases.iter().map(|&p| C64::new(0.0, p)).collect();
    let h = reassemble(&e.vectors, &d);
    Ok((&h - h.adjoint()) * C64::new(0.5, 0.0))
}

/// Principal square root of a unitary.
///
/// With `det_adjust`, if the principal root has determinant −1 the branch of
/// the eigenvalue with the largest phase is flipped so that det S = +1.
pub fn sqrt_unitary_principal(u: &CMatrix, tol: f64, det_adjust: bool) -> Result<CMatrix> {
    check_unitary(u, tol.max(1e-12) * 10.0)?;
    let e = eig_normal_with(u, tol.max(1e-10), PhasePolicy::None)?;
    let phases = lifted_phases(&e.values, 0.0);
    check_branch(&phases, tol, PI)?;
    let mut half: Vec<f64> = phases.iter().map(|p| p / 2.0).collect();
    if det_adjust && !half.is_empty() {
        let det = C64::from_polar(1.0, half.iter().sum());
        if (det + ONE).norm() < 1e-6 {
            // eigenvalues are sorted by descending phase
            half[0] -= PI;
        } else if (det - ONE).norm() >= 1e-6 {
            return Err(Error::BadParams(format!(
                "det-adjusted root needs det U = 1, got phase {:.6}",
                2.0 * principal_arg(det)
            )));
        }
    }
    let d: Vec<C64> = half.iter().map(|&p| C64::from_polar(1.0, p)).collect();
    Ok(reassemble(&e.vectors, &d))
}

/// `exp(H)` for skew-Hermitian `H`, evaluated through the Hermitian
/// eigendecomposition of `−iH`.
pub fn expm_skew(h: &CMatrix) -> CMatrix {
    let herm = h * C64::new(0.0, -1.0);
    let (vals, vecs) = eigh(&herm);
    let d: Vec<C64> = vals.iter().map(|&l| C64::from_polar(1.0, l)).collect();
    reassemble(&vecs, &d)
}

/// Nearest unitary in Frobenius norm (polar factor).
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Haar-distributed unitary from the QR decomposition of a complex Gaussian.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = q.column_mut(j);
        col *= ph;
    }
    q
}

/// Random skew-Hermitian matrix with Gaussian entries.
pub fn random_skew_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    (&g - g.adjoint()) * C64::new(0.5, 0.0)
}

/// Complete the orthonormal columns of `v` (n×k) to an n×n unitary.
pub fn complete_unitary(v: &CMatrix) -> CMatrix {
    let n = v.nrows();
    let k = v.ncols();
    let mut out = CMatrix::zeros(n, n);
    out.columns_mut(0, k).copy_from(v);
    let mut filled = k;
    for e in 0..n {
        if filled == n {
            break;
        }
        let mut cand = nalgebra::DVector::<C64>::zeros(n);
        cand[e] = ONE;
        for _ in 0..2 {
            for j in 0..filled {
                let proj = out.column(j).dotc(&cand);
                cand -= out.column(j) * proj;
            }
        }
        let norm = cand.norm();
        if norm > 1e-6 {
            out.set_column(filled, &(cand / C64::new(norm, 0.0)));
            filled += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn near_scalar_input_still_diagonalizes() {
        // identity plus round-off noise can stall the Schur iteration
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = random_skew_hermitian(6, &mut rng) * C64::new(3e-16, 0.0);
        let u = expm_skew(&noise) * C64::from_polar(1.0, 0.7);
        let e = eig_normal(&u, 1e-9).unwrap();
        assert!(max_abs(&(e.reconstruct() - &u)) < 1e-12);
        assert!(unitarity_residual(&e.vectors) < 1e-12);
    }

    fn sx() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }
    fn sy() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }
    fn sz() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = eig_normal(&identity(4), 1e-9).unwrap();
        assert!(e.values.iter().all(|v| (v - ONE).norm() < 1e-14));
        assert!(max_abs(&(e.vectors.clone() - identity(4))) < 1e-14);

        let e = eig_normal(&diag(&[I, -I]), 1e-9).unwrap();
        assert!((e.values[0] - I).norm() < 1e-14);
        assert!((e.values[1] + I).norm() < 1e-14);
        assert!(max_abs(&(e.vectors - identity(2))) < 1e-14);
    }

    #[test]
    fn eig_of_quarter_rotation() {
        let m = from_real(&RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let e = eig_normal(&m, 1e-9).unwrap();
        assert!((e.values[0] - I).norm() < 1e-12);
        assert!((e.values[1] + I).norm() < 1e-12);
        assert!(max_abs(&(e.reconstruct() - m)) < 1e-12);
    }

    #[test]
    fn eig_rejects_non_normal() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(eig_normal(&m, 1e-9), Err(Error::NotNormal { .. })));
    }

    #[test]
    fn simdiag_trivial_and_swap_like() {
        let a = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let b = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 4.0]));
        let q = simdiag_commuting_symmetric(&a, &b, 1e-9).unwrap();
        assert!(max_abs_real(&(q - RMatrix::identity(2, 2))) < 1e-14);

        // brute-force 2×2 eigensolve of [[0,1],[1,0]]: eigenvalues −1, +1 with
        // vectors (1,−1)/√2 and (1,1)/√2
        let a = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let q = simdiag_commuting_symmetric(&a, &RMatrix::zeros(2, 2), 1e-9).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let qtaq = q.transpose() * &a * &q;
        assert!((qtaq[(0, 0)] + 1.0).abs() < 1e-14 && (qtaq[(1, 1)] - 1.0).abs() < 1e-14);
        assert!((q[(0, 0)].abs() - h).abs() < 1e-14 && (q[(1, 0)].abs() - h).abs() < 1e-14);
        assert!((q.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn simdiag_rejects_bad_input() {
        let a = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            simdiag_commuting_symmetric(&a, &RMatrix::zeros(2, 2), 1e-9),
            Err(Error::NotSymmetric { .. })
        ));
        let a = RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(simdiag_commuting_symmetric(&a, &b, 1e-9), Err(Error::NotCommuting { .. })));
    }

    #[test]
    fn simdiag_embedded_u2() {
        // X real orthogonal in SO(4) embedding a random U(2) element
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = haar_unitary(2, &mut rng);
            let (re, im) = (real_part(&u), imag_part(&u));
            let mut x = RMatrix::zeros(4, 4);
            x.view_mut((0, 0), (2, 2)).copy_from(&re);
            x.view_mut((0, 2), (2, 2)).copy_from(&im);
            x.view_mut((2, 0), (2, 2)).copy_from(&(-&im));
            x.view_mut((2, 2), (2, 2)).copy_from(&re);
            let xc = from_real(&x);
            let m = xc.transpose() * &xc;
            let q = simdiag_commuting_symmetric(&real_part(&m), &imag_part(&m), 1e-9).unwrap();
            let qa = q.transpose() * real_part(&m) * &q;
            let qb = q.transpose() * imag_part(&m) * &q;
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert!(qa[(i, j)].abs() < 1e-12 && qb[(i, j)].abs() < 1e-12);
                    }
                }
            }
            assert!(max_abs_real(&(q.transpose() * &q - RMatrix::identity(4, 4))) < 1e-12);
        }
    }

    #[test]
    fn log_examples() {
        assert!(max_abs(&principal_log_unitary(&identity(3), 1e-9).unwrap()) < 1e-14);
        let h = principal_log_unitary(&diag(&[I, -I]), 1e-9).unwrap();
        assert!(max_abs(&(h - diag(&[c(0.0, PI / 2.0), c(0.0, -PI / 2.0)]))) < 1e-14);

        let p = kron(&kron(&sx(), &sy()), &sz());
        let gen = &p * c(0.0, PI / 4.0);
        let u = expm_skew(&gen);
        let back = principal_log_unitary(&u, 1e-9).unwrap();
        assert!(max_abs(&(back - gen)) < 1e-12);
    }

    #[test]
    fn log_branch_ambiguity_is_reported() {
        let u = diag(&[-ONE, ONE]);
        assert!(matches!(principal_log_unitary(&u, 1e-9), Err(Error::BranchAmbiguity { .. })));
        let h = log_unitary_branch(&u, 1e-9, 0.5).unwrap();
        assert!(max_abs(&(expm_skew(&h) - u)) < 1e-12);
    }

    #[test]
    fn sqrt_examples() {
        assert!(max_abs(&(sqrt_unitary_principal(&identity(3), 1e-9, false).unwrap() - identity(3))) < 1e-14);
        let m = from_real(&RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let s = sqrt_unitary_principal(&m, 1e-9, false).unwrap();
        assert!(max_abs(&(&s * &s - &m)) < 1e-12);
        let e = eig_normal(&s, 1e-9).unwrap();
        assert!((e.values[0] - C64::from_polar(1.0, PI / 4.0)).norm() < 1e-12);
        assert!((e.values[1] - C64::from_polar(1.0, -PI / 4.0)).norm() < 1e-12);

        let lam = diag(&[I, -I, ONE, ONE]);
        let d = sqrt_unitary_principal(&lam, 1e-9, true).unwrap();
        assert!(max_abs(&(&d * &d - &lam)) < 1e-12);
        assert!((d.determinant() - ONE).norm() < 1e-12);

        // det −1 principal root is flipped by the adjustment
        let lam = diag(&[c(0.0, 1.0) * C64::from_polar(1.0, 0.9), C64::from_polar(1.0, -PI / 2.0 - 0.9)]);
        let lam = &lam * C64::from_polar(1.0, 0.0);
        let d = sqrt_unitary_principal(&lam, 1e-9, true).unwrap();
        assert!(max_abs(&(&d * &d - &lam)) < 1e-12);
        assert!((d.determinant() - ONE).norm() < 1e-12);
    }

    #[test]
    fn expm_examples() {
        assert!(max_abs(&(expm_skew(&zeros(3)) - identity(3))) < 1e-15);
        // exp(iθσy) = cosθ·1 + i sinθ·σy
        let th = PI / 2.0;
        let u = expm_skew(&(sy() * c(0.0, th)));
        let closed = identity(2) * c(th.cos(), 0.0) + sy() * c(0.0, th.sin());
        assert!(max_abs(&(u.clone() - closed)) < 1e-14);
        let expected = from_real(&RMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert!(max_abs(&(u - expected)) < 1e-14);
    }

    #[test]
    fn random_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 5, 8, 16] {
            for _ in 0..5 {
                let u = haar_unitary(n, &mut rng);
                assert!(unitarity_residual(&u) < 1e-12);
                let h = principal_log_unitary(&u, 1e-9).unwrap();
                assert!(skew_hermitian_residual(&h) < 1e-12);
                assert!(max_abs(&(expm_skew(&h) - &u)) < 1e-10);
                let e = eig_normal(&u, 1e-9).unwrap();
                assert!(max_abs(&(e.reconstruct() - &u)) < 1e-10);
                assert!(unitarity_residual(&e.vectors) < 1e-10);
            }
        }
    }
}
