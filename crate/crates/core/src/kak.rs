//! Group-level factorizations X = K1·A·K2 for one Cartan pair.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grading::{self, RecursiveSequence};
use crate::involutions::{symplectic_j, Involution, StandardKind, Subspace};
use crate::matcore::{self, CMatrix, C64, I, ONE, ZERO};
use crate::pauli::{self, PauliString};
use crate::schemes::{self, CartanRecipe, Scheme};

/// Eigenvalues of M closer than this are treated as one cluster.
const PAIR_GAP: f64 = 1e-7;

/// Singular values below this are treated as zero when gluing blocks.
const SINGULAR_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct KakResult {
    pub k1: CMatrix,
    pub a: CMatrix,
    pub k2: CMatrix,
    /// Commuting generators supporting log A.
    pub h_basis: Vec<CMatrix>,
    /// `log A = Σ h_coeffs[i]·h_basis[i]`.
    pub h_coeffs: Vec<f64>,
}

/// Residuals of the factorization contract.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KakCheck {
    pub reconstruction: f64,
    pub k1_fixed: f64,
    pub k2_fixed: f64,
    /// Deviation of θ(log A) from −log A.
    pub log_a_odd: f64,
    /// Largest commutator among the support of log A.
    pub torus_commute: f64,
    /// Deviation of exp(log A) from A.
    pub log_a_exp: f64,
}

impl KakCheck {
    pub fn worst(&self) -> f64 {
        [self.reconstruction, self.k1_fixed, self.k2_fixed, self.log_a_odd, self.torus_commute, self.log_a_exp]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

impl KakResult {
    pub fn log_a(&self) -> CMatrix {
        let n = self.a.nrows();
        let mut out = CMatrix::zeros(n, n);
        for (h, &c) in self.h_basis.iter().zip(&self.h_coeffs) {
            out += h * C64::new(c, 0.0);
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        &self.k1 * &self.a * &self.k2
    }

    pub fn check(&self, theta: &Involution, x: &CMatrix) -> KakCheck {
        let log_a = self.log_a();
        let mut torus_commute: f64 = 0.0;
        for (i, a) in self.h_basis.iter().enumerate() {
            for b in self.h_basis.iter().skip(i + 1) {
                torus_commute = torus_commute.max(matcore::max_abs(&matcore::commutator(a, b)));
            }
        }
        KakCheck {
            reconstruction: matcore::max_abs(&(self.reconstruct() - x)),
            k1_fixed: matcore::max_abs(&(theta.apply_algebra(&self.k1) - &self.k1)),
            k2_fixed: matcore::max_abs(&(theta.apply_algebra(&self.k2) - &self.k2)),
            log_a_odd: matcore::max_abs(&(theta.apply_algebra(&log_a) + &log_a)),
            torus_commute,
            log_a_exp: matcore::max_abs(&(matcore::expm_skew(&log_a) - &self.a)),
        }
    }

    /// Conjugate every factor by `f`: `K ↦ F K F†`.
    fn conjugated(self, f: &CMatrix) -> KakResult {
        let fa = f.adjoint();
        let conj = |m: &CMatrix| f * m * &fa;
        KakResult {
            k1: conj(&self.k1),
            a: conj(&self.a),
            k2: conj(&self.k2),
            h_basis: self.h_basis.iter().map(conj).collect(),
            h_coeffs: self.h_coeffs,
        }
    }
}

fn unit(n: usize, i: usize, j: usize, v: C64) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = v;
    m
}

fn offdiag_residual(m: &CMatrix) -> f64 {
    let mut off = m.clone();
    off.fill_diagonal(ZERO);
    matcore::max_abs(&off)
}

/// Orthogonal-type factorization: K_i real orthogonal (det +1), A diagonal.
pub fn kak_ai(x: &CMatrix, tol: f64) -> Result<KakResult> {
    matcore::check_unitary(x, tol.max(1e-12) * 10.0)?;
    let n = x.nrows();
    let m = x.transpose() * x;
    let re = matcore::real_part(&m);
    let im = matcore::imag_part(&m);
    let mut best: Option<(f64, matcore::RMatrix)> = None;
    for t in [0.0, 0.37, 1.13] {
        let (c, s) = (f64::cos(t), f64::sin(t));
        let a = &re * c + &im * s;
        let b = &im * c - &re * s;
        let q = match matcore::simdiag_commuting_symmetric(&a, &b, tol.max(1e-10)) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let qc = matcore::from_real(&q);
        let residual = offdiag_residual(&(qc.transpose() * &m * &qc));
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, q));
        }
        if residual <= tol {
            break;
        }
    }
    let (_, q) = best.ok_or_else(|| Error::NoConvergence("simultaneous diagonalization of Re M, Im M".into()))?;
    let qc = matcore::from_real(&q);
    let d = qc.transpose() * &m * &qc;
    let mut phases: Vec<f64> = (0..n).map(|k| d[(k, k)].arg() / 2.0).collect();
    let a_of = |ph: &[f64]| matcore::diag(&ph.iter().map(|&p| C64::from_polar(1.0, p)).collect::<Vec<_>>());
    let mut a = a_of(&phases);
    let mut k1 = x * &qc * a.adjoint();
    let imag = matcore::max_abs_real(&matcore::imag_part(&k1));
    if imag > tol.max(1e-9) * 10.0 {
        return Err(Error::RealityViolated { residual: imag });
    }
    let mut k1r = matcore::real_part(&k1);
    if k1r.determinant() < 0.0 {
        k1r.column_mut(0).neg_mut();
        phases[0] += std::f64::consts::PI;
        a = a_of(&phases);
    }
    k1 = matcore::from_real(&k1r);
    let h_basis = (0..n).map(|k| unit(n, k, k, I)).collect();
    Ok(KakResult { k1, a, k2: qc.transpose(), h_basis, h_coeffs: phases })
}

/// Symplectic-type factorization on `2m` dimensions: K_i in Sp(m), A in the
/// torus `diag(d, d)`.
pub fn kak_aii(x: &CMatrix, tol: f64) -> Result<KakResult> {
    matcore::check_unitary(x, tol.max(1e-12) * 10.0)?;
    let n = x.nrows();
    if !n.is_multiple_of(2) || n == 0 {
        return Err(Error::BadParams(format!("symplectic factorization needs even dimension, got {n}")));
    }
    let half = n / 2;
    let j = symplectic_j(n);
    let m = &j * x.transpose() * j.adjoint() * x;
    let eig = matcore::eig_normal(&m, tol.max(1e-10))?;
    // cluster by distance, not by sort position: phases near π wrap around
    let mut cluster_of: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if cluster_of[i].is_some() {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![i];
        cluster_of[i] = Some(id);
        let mut cursor = 0;
        while cursor < members.len() {
            let a = eig.values[members[cursor]];
            for (k, slot) in cluster_of.iter_mut().enumerate() {
                if slot.is_none() && (eig.values[k] - a).norm() < PAIR_GAP {
                    *slot = Some(id);
                    members.push(k);
                }
            }
            cursor += 1;
        }
        clusters.push(members);
    }
    let pair = |v: &DVector<C64>| -(&j * v.map(|z| z.conj()));
    let mut firsts: Vec<DVector<C64>> = Vec::with_capacity(half);
    let mut seconds: Vec<DVector<C64>> = Vec::with_capacity(half);
    for members in &clusters {
        if members.len() % 2 != 0 {
            return Err(Error::PairingFailed { residual: f64::NAN });
        }
        let space: Vec<DVector<C64>> = members.iter().map(|&k| eig.vectors.column(k).clone_owned()).collect();
        let mut chosen: Vec<DVector<C64>> = Vec::new();
        for cand in &space {
            if chosen.len() == members.len() {
                break;
            }
            let mut f = cand.clone();
            for _ in 0..2 {
                for c in &chosen {
                    let proj = c.dotc(&f);
                    f -= c * proj;
                }
            }
            let norm = f.norm();
            if norm < 0.5 {
                continue;
            }
            f /= C64::new(norm, 0.0);
            let g = pair(&f);
            // g must stay inside the cluster's eigenspace
            let mut outside = g.clone();
            for s in &space {
                let proj = s.dotc(&g);
                outside -= s * proj;
            }
            let residual = outside.norm();
            if residual > 1e-6 {
                return Err(Error::PairingFailed { residual });
            }
            chosen.push(f.clone());
            chosen.push(g.clone());
            firsts.push(f);
            seconds.push(g);
        }
        if chosen.len() != members.len() {
            return Err(Error::PairingFailed { residual: f64::NAN });
        }
    }
    let cols: Vec<DVector<C64>> = firsts.into_iter().chain(seconds).collect();
    let s = CMatrix::from_columns(&cols);
    let d = s.adjoint() * &m * &s;
    let mut phases = Vec::with_capacity(half);
    for k in 0..half {
        let mean = (d[(k, k)] + d[(half + k, half + k)]) * 0.5;
        phases.push(mean.arg() / 2.0);
    }
    let diag: Vec<C64> = phases.iter().chain(phases.iter()).map(|&p| C64::from_polar(1.0, p)).collect();
    let a = matcore::diag(&diag);
    let k1 = x * &s * a.adjoint();
    let h_basis = (0..half).map(|k| unit(n, k, k, I) + unit(n, half + k, half + k, I)).collect();
    Ok(KakResult { k1, a, k2: s.adjoint(), h_basis, h_coeffs: phases })
}

fn block_swap(p: usize, q: usize) -> CMatrix {
    // maps a (p, q)-blocked vector to (q, p) blocking
    let n = p + q;
    let mut pi = CMatrix::zeros(n, n);
    for i in 0..q {
        pi[(i, p + i)] = ONE;
    }
    for i in 0..p {
        pi[(q + i, i)] = ONE;
    }
    pi
}

/// Block factorization: K_i in U(p)⊕U(q), A a product of min(p, q) plane
/// rotations between the blocks (cosine–sine form).
pub fn kak_aiii(x: &CMatrix, p: usize, q: usize, tol: f64) -> Result<KakResult> {
    matcore::check_unitary(x, tol.max(1e-12) * 10.0)?;
    let n = x.nrows();
    if p + q != n || p == 0 || q == 0 {
        return Err(Error::BadParams(format!("block split ({p},{q}) does not fit dimension {n}")));
    }
    if p > q {
        let pi = block_swap(p, q);
        let swapped = kak_aiii(&(&pi * x * pi.adjoint()), q, p, tol)?;
        return Ok(swapped.conjugated(&pi.adjoint()));
    }
    let x11 = x.view((0, 0), (p, p)).clone_owned();
    let x12 = x.view((0, p), (p, q)).clone_owned();
    let x21 = x.view((p, 0), (q, p)).clone_owned();
    let x22 = x.view((p, p), (q, q)).clone_owned();
    let svd = x11.svd(true, true);
    let (u_raw, vt_raw) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let u1 = CMatrix::from_columns(&order.iter().map(|&k| u_raw.column(k).clone_owned()).collect::<Vec<_>>());
    let v1 = CMatrix::from_columns(&order.iter().map(|&k| vt_raw.row(k).adjoint()).collect::<Vec<_>>());
    let cos: Vec<f64> = order.iter().map(|&k| svd.singular_values[k].min(1.0)).collect();
    let y = &x21 * &v1;
    let sin: Vec<f64> = (0..p).map(|k| y.column(k).norm().min(1.0)).collect();
    // U2: columns y_k / s_k, strongest first, then completed
    let mut by_sin: Vec<usize> = (0..p).collect();
    by_sin.sort_by(|&a, &b| sin[b].partial_cmp(&sin[a]).unwrap());
    let mut u2_cols: Vec<Option<DVector<C64>>> = vec![None; q];
    let mut placed: Vec<DVector<C64>> = Vec::new();
    for &k in &by_sin {
        if sin[k] < SINGULAR_FLOOR {
            continue;
        }
        let mut v = y.column(k).clone_owned();
        for _ in 0..2 {
            for c in &placed {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm < 0.5 * sin[k] {
            return Err(Error::GluingFailed { residual: 1.0 - norm / sin[k] });
        }
        v /= C64::new(norm, 0.0);
        placed.push(v.clone());
        u2_cols[k] = Some(v);
    }
    let partial = if placed.is_empty() { CMatrix::zeros(q, 0) } else { CMatrix::from_columns(&placed) };
    let full = matcore::complete_unitary(&partial);
    let mut extra = (placed.len()..q).map(|c| full.column(c).clone_owned());
    let u2_cols: Vec<DVector<C64>> =
        u2_cols.into_iter().map(|c| c.unwrap_or_else(|| extra.next().expect("completion fills U2"))).collect();
    let u2 = CMatrix::from_columns(&u2_cols);
    let top = u1.adjoint() * &x12;
    let bottom = u2.adjoint() * &x22;
    let mut v2t = CMatrix::zeros(q, q);
    for k in 0..q {
        let row = if k >= p {
            bottom.row(k).clone_owned()
        } else if sin[k] > cos[k] {
            top.row(k) * C64::new(-1.0 / sin[k], 0.0)
        } else {
            bottom.row(k) * C64::new(1.0 / cos[k], 0.0)
        };
        v2t.row_mut(k).copy_from(&row);
    }
    let v2t = matcore::polar_unitary(&v2t);
    let mut k1 = CMatrix::zeros(n, n);
    k1.view_mut((0, 0), (p, p)).copy_from(&u1);
    k1.view_mut((p, p), (q, q)).copy_from(&u2);
    let mut k2 = CMatrix::zeros(n, n);
    k2.view_mut((0, 0), (p, p)).copy_from(&v1.adjoint());
    k2.view_mut((p, p), (q, q)).copy_from(&v2t);
    let angles: Vec<f64> = (0..p).map(|k| f64::atan2(sin[k], cos[k])).collect();
    let mut a = matcore::identity(n);
    let mut h_basis = Vec::with_capacity(p);
    for (k, &t) in angles.iter().enumerate() {
        a[(k, k)] = C64::new(t.cos(), 0.0);
        a[(p + k, p + k)] = C64::new(t.cos(), 0.0);
        a[(k, p + k)] = C64::new(-t.sin(), 0.0);
        a[(p + k, k)] = C64::new(t.sin(), 0.0);
        h_basis.push(unit(n, p + k, k, ONE) - unit(n, k, p + k, ONE));
    }
    let out = KakResult { k1, a, k2, h_basis, h_coeffs: angles };
    let residual = matcore::max_abs(&(out.reconstruct() - x));
    if residual > tol.max(1e-9) * 10.0 {
        return Err(Error::GluingFailed { residual });
    }
    Ok(out)
}

/// Factorization for an arbitrary involution via its standardizer.
pub fn kak_general(theta: &Involution, x: &CMatrix, tol: f64) -> Result<KakResult> {
    if x.nrows() != theta.n || x.ncols() != theta.n {
        return Err(Error::DimensionMismatch { expected: theta.n, got: x.nrows() });
    }
    let (f, kind) = schemes::build_standardizer(theta)?;
    let xs = f.adjoint() * x * &f;
    let std = match kind {
        StandardKind::AI => kak_ai(&xs, tol)?,
        StandardKind::AII => kak_aii(&xs, tol)?,
        StandardKind::AIII { p, q } => kak_aiii(&xs, p, q, tol)?,
    };
    Ok(std.conjugated(&f))
}

/// Closed-form principal square root of a 2×2 matrix.
fn sqrt_2x2(m: &CMatrix) -> Result<CMatrix> {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    let s = l1.sqrt() * l2.sqrt();
    let denom = (tr + s * 2.0).sqrt();
    if denom.norm() < 1e-12 {
        return Err(Error::NoConvergence("2×2 square root has no closed form".into()));
    }
    Ok((m + matcore::identity(2) * s) / denom)
}

/// Block solution of a real orthogonal 4×4 matrix under the U(2) ↪ SO(4)
/// embedding, with `K2' = 1`: returns `(K1', A')` where
/// `K1' = [[A, B], [−B, A]]` and `A' = diag(E, E⁻¹)`.
pub fn solve_embedded_u2(x: &CMatrix, tol: f64) -> Result<(CMatrix, CMatrix)> {
    if x.nrows() != 4 || x.ncols() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: x.nrows() });
    }
    matcore::check_unitary(x, tol.max(1e-12) * 10.0)?;
    let imag = matcore::max_abs_real(&matcore::imag_part(x));
    if imag > tol {
        return Err(Error::RealityViolated { residual: imag });
    }
    let blk = |r: usize, c: usize| x.view((r, c), (2, 2)).clone_owned();
    let (x11, x12, x21, x22) = (blk(0, 0), blk(0, 2), blk(2, 0), blk(2, 2));
    let lower = &x22 + &x12 * I;
    let sigma = lower.clone().svd(false, false).singular_values.min();
    if sigma < tol {
        return Err(Error::BlockSingular { sigma });
    }
    let upper = &x11 - &x21 * I;
    let e2 = lower.try_inverse().ok_or(Error::BlockSingular { sigma })? * &upper;
    let e = sqrt_2x2(&e2)?;
    let e_inv = e.clone().try_inverse().ok_or(Error::BlockSingular { sigma: 0.0 })?;
    let ab = &upper * &e_inv;
    let (a, b) = (ab.map(|z| C64::new(z.re, 0.0)), ab.map(|z| C64::new(z.im, 0.0)));
    let mut k1 = CMatrix::zeros(4, 4);
    k1.view_mut((0, 0), (2, 2)).copy_from(&a);
    k1.view_mut((0, 2), (2, 2)).copy_from(&b);
    k1.view_mut((2, 0), (2, 2)).copy_from(&(-&b));
    k1.view_mut((2, 2), (2, 2)).copy_from(&a);
    let mut a_out = CMatrix::zeros(4, 4);
    a_out.view_mut((0, 0), (2, 2)).copy_from(&e);
    a_out.view_mut((2, 2), (2, 2)).copy_from(&e_inv);
    let residual = matcore::max_abs(&(&k1 * &a_out - x));
    if residual > tol.max(1e-9) * 10.0 {
        return Err(Error::GluingFailed { residual });
    }
    Ok((k1, a_out))
}

fn strings_subspace(n: usize, strings: &[PauliString], label: &str) -> Subspace {
    Subspace::from_spanning(n, strings.iter().map(pauli::normalized_basis_matrix), label)
}

fn pauli_tail(letters: &str) -> PauliString {
    letters.parse().expect("valid Pauli letters")
}

/// Closed-form torus of level `level` (1-based) of the CCD-based scheme.
pub fn cartan_subalgebra(scheme: &Scheme, level: usize) -> Result<Subspace> {
    let nq = match (scheme.name.as_str(), scheme.qubits()) {
        ("ccd-new", Some(nq)) => nq,
        _ => return Err(Error::UnsupportedScheme(format!("{} level {level}", scheme.name))),
    };
    if level == 0 || level > 2 * nq {
        return Err(Error::UnsupportedScheme(format!("{} level {level}", scheme.name)));
    }
    let k = (level - 1) / 2;
    let m = nq - k;
    let (family, middle, rest) = match schemes::new_scheme_level_type(nq, level).0 {
        schemes::LevelType::AI => (m / 2, "Z", k.saturating_sub(1)),
        schemes::LevelType::AII => ((m - 1) / 2, "IZ", k.saturating_sub(1)),
        schemes::LevelType::DIII => ((m - 2) / 2, "IX", k),
        schemes::LevelType::CI => ((m - 1) / 2, "X", k),
        schemes::LevelType::AIII => unreachable!("the CCD-based scheme has no block levels"),
    };
    let mut suffix = String::new();
    if 2 * family < nq {
        let tail_len = nq - 2 * family;
        // level 1 with AII type: the trailing σz is dropped once the sites run out
        let mid: String = middle.chars().take(tail_len).collect();
        suffix.push_str(&mid);
        suffix.push_str(&"I".repeat(rest.min(tail_len - mid.len())));
        while suffix.len() < tail_len {
            suffix.push('I');
        }
    }
    let tail = pauli_tail(&suffix);
    let strings: Vec<PauliString> = pauli::commuting_family(family).iter().map(|h| h.concat(&tail)).collect();
    Ok(strings_subspace(scheme.n(), &strings, &format!("h{level}")))
}

/// Greedy maximal commuting set of Pauli strings spanning part of `p`,
/// restarted with shuffled orders until it reaches `rank`.
fn commuting_pauli_torus(p: &Subspace, rank: usize, seed: u64) -> Option<Subspace> {
    use rand::seq::SliceRandom;
    let basis = p.pauli_basis().ok()?;
    let mut strings: Vec<PauliString> = Vec::new();
    for e in &basis {
        match e {
            pauli::AlgebraElement::Pauli { coeffs, .. } => {
                let nonzero: Vec<_> = coeffs.iter().filter(|(_, c)| c.abs() > 1e-9).collect();
                if nonzero.len() != 1 {
                    return None;
                }
                strings.push(nonzero[0].0.clone());
            }
            pauli::AlgebraElement::Raw(_) => return None,
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let mut chosen: Vec<PauliString> = Vec::new();
        for s in &strings {
            if chosen.iter().all(|c| c.commutes_with(s)) {
                chosen.push(s.clone());
            }
        }
        if chosen.len() == rank {
            return Some(strings_subspace(p.n, &chosen, "h"));
        }
        strings.shuffle(&mut rng);
    }
    None
}

/// Torus used at recursion level `level`: the catalogued closed form when the
/// scheme has one, else a commuting Pauli set, else a generic centralizer.
pub fn level_torus(scheme: &Scheme, seq: &RecursiveSequence, level: usize) -> Result<Subspace> {
    let p = &seq.s1[level - 1];
    let rank = seq.levels[level - 1].rank;
    let recipe = scheme.hints.get(level - 1).map(|h| h.recipe).unwrap_or(CartanRecipe::Generic);
    let label = format!("h{level}");
    if recipe == CartanRecipe::Catalog {
        if let Ok(h) = cartan_subalgebra(scheme, level) {
            return Ok(h);
        }
    }
    if recipe != CartanRecipe::Generic || scheme.qubits().is_some() {
        if let Some(h) = commuting_pauli_torus(p, rank, level as u64) {
            return Ok(h.with_label(label));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xca27a0 + level as u64);
    for _ in 0..4 {
        let x = grading::random_element(p, &mut rng);
        let h = grading::centralizer_in(&x, p, &label);
        if h.dim() == rank && h.bracket_residual(&h, &Subspace::empty(p.n, "0")) < 1e-9 {
            return Ok(h);
        }
    }
    Err(Error::UnsupportedScheme(format!("{} level {level}: no torus of rank {rank}", scheme.name)))
}
