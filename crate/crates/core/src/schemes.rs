//! Families of compatible involutions and standardizing conjugations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::involutions::{block_z, Involution, InvolutionClass, StandardKind};
use crate::matcore::{self, CMatrix, C64, ONE};
use crate::pauli::Letter;

/// Expected Cartan type of the pair at one recursion level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelType {
    AI,
    AII,
    AIII,
    DIII,
    CI,
}

/// How a level's torus is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CartanRecipe {
    /// Closed-form commuting Pauli families of the CCD-based scheme.
    Catalog,
    /// Greedy maximal commuting set of Pauli strings inside P.
    CommutingPauli,
    /// Centralizer of a random element of P.
    Generic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelHint {
    pub expected: LevelType,
    pub recipe: CartanRecipe,
    /// Torus dimension predicted by the classification, when known.
    pub rank: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Scheme {
    pub name: String,
    /// Subsystem dimensions; the ambient algebra is u(∏ dims).
    pub dims: Vec<usize>,
    pub involutions: Vec<Involution>,
    pub hints: Vec<LevelHint>,
}

impl Scheme {
    pub fn n(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn levels(&self) -> usize {
        self.involutions.len()
    }

    /// Number of qubits, when every subsystem is a qubit.
    pub fn qubits(&self) -> Option<usize> {
        self.dims.iter().all(|&d| d == 2).then_some(self.dims.len())
    }
}

fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors.iter().fold(CMatrix::identity(1, 1), |acc, f| matcore::kron(&acc, f))
}

/// W = σy^⊗N with entrywise conjugation: fixed space = odd Pauli weight.
pub fn build_ccd(n_qubits: usize) -> Involution {
    let w = kron_all(&vec![Letter::Y.matrix(); n_qubits]);
    Involution::new(w, true).expect("σy tensor power defines an involution")
}

/// Per-subsystem antiunitary choice `θ_j(x) = W_j conj(x) W_j†`.
#[derive(Clone, Debug)]
pub enum LocalChoice {
    /// W_j symmetric unitary: local fixed algebra conjugate to so(n_j).
    AI(CMatrix),
    /// W_j antisymmetric unitary: local fixed algebra conjugate to sp(n_j/2).
    AII(CMatrix),
}

impl LocalChoice {
    fn matrix(&self) -> &CMatrix {
        match self {
            LocalChoice::AI(w) | LocalChoice::AII(w) => w,
        }
    }
}

/// Tensor product of local antiunitary involutions.
pub fn build_oed(local: &[LocalChoice]) -> Result<Involution> {
    if local.is_empty() {
        return Err(Error::BadParams("at least one subsystem is required".into()));
    }
    for (j, choice) in local.iter().enumerate() {
        let site = j + 1;
        let w = choice.matrix();
        if !w.is_square() || matcore::unitarity_residual(w) > 1e-10 {
            return Err(Error::BadLocalChoice { site, reason: "W_j is not unitary".into() });
        }
        let sym = matcore::max_abs(&(w - w.transpose()));
        let anti = matcore::max_abs(&(w + w.transpose()));
        match choice {
            LocalChoice::AI(_) if sym > 1e-10 => {
                return Err(Error::BadLocalChoice { site, reason: "AI needs a symmetric W_j".into() })
            }
            LocalChoice::AII(_) if w.nrows() % 2 != 0 => {
                return Err(Error::BadLocalChoice { site, reason: "AII needs even local dimension".into() })
            }
            LocalChoice::AII(_) if anti > 1e-10 => {
                return Err(Error::BadLocalChoice { site, reason: "AII needs an antisymmetric W_j".into() })
            }
            _ => {}
        }
    }
    let ws: Vec<CMatrix> = local.iter().map(|c| c.matrix().clone()).collect();
    Involution::new(kron_all(&ws), true)
}

/// Linear involution W = ⊗ diag(1_{p_l}, −1_{q_l}) together with the
/// permutation R that brings it to diag(1_p, −1_q), and (p, q).
pub fn build_aiii_oed(local_pq: &[(usize, usize)]) -> Result<(Involution, CMatrix, StandardKind)> {
    if local_pq.is_empty() {
        return Err(Error::BadParams("at least one subsystem is required".into()));
    }
    for &(p, q) in local_pq {
        if p == 0 || q == 0 {
            return Err(Error::BadParams(format!("local AIII indices must be positive, got ({p},{q})")));
        }
    }
    let ws: Vec<CMatrix> = local_pq.iter().map(|&(p, q)| block_z(p, q)).collect();
    let theta = Involution::new(kron_all(&ws), false)?;
    let (r, kind) = linear_standardizer(&theta)?;
    Ok((theta, r, kind))
}

/// Linear-type involutions with alternating σz/σx at sites 1..N−1 and a
/// final σz at site N (2N − 1 levels).
pub fn build_kg_sequence(n_qubits: usize) -> Result<Scheme> {
    if n_qubits == 0 {
        return Err(Error::BadParams("need at least one qubit".into()));
    }
    let local = |site: usize, l: Letter| {
        let mut f = vec![Letter::I.matrix(); n_qubits];
        f[site - 1] = l.matrix();
        Involution::new(kron_all(&f), false).expect("Pauli string squares to one")
    };
    let mut involutions = Vec::new();
    for k in 1..n_qubits {
        involutions.push(local(k, Letter::Z));
        involutions.push(local(k, Letter::X));
    }
    involutions.push(local(n_qubits, Letter::Z));
    let hints = vec![
        LevelHint { expected: LevelType::AIII, recipe: CartanRecipe::CommutingPauli, rank: None };
        involutions.len()
    ];
    Ok(Scheme { name: "kg".into(), dims: vec![2; n_qubits], involutions, hints })
}

/// Local AI factors used after the CCD level: `σx` keeps span{iσz},
/// `σz` keeps span{iσx}.
fn new_scheme_local(n_qubits: usize, site: usize, w_site: Letter) -> Involution {
    let mut local: Vec<LocalChoice> = (0..n_qubits).map(|_| LocalChoice::AII(Letter::Y.matrix())).collect();
    local[site - 1] = LocalChoice::AI(w_site.matrix());
    build_oed(&local).expect("Pauli local choices are valid")
}

/// Torus dimension predicted for level `level` (1-based) of the CCD-based
/// scheme on `n_qubits` qubits, together with its type.
pub fn new_scheme_level_type(n_qubits: usize, level: usize) -> (LevelType, usize) {
    let k = (level - 1) / 2;
    let m = n_qubits - k;
    if level % 2 == 1 {
        if m.is_multiple_of(2) {
            (LevelType::AI, 1 << m)
        } else {
            (LevelType::AII, 1 << (m - 1))
        }
    } else if m.is_multiple_of(2) {
        (LevelType::DIII, 1 << (m - 2))
    } else {
        (LevelType::CI, 1 << (m - 1))
    }
}

/// CCD first, then pairs of OEDs with one local AI factor moving from site N
/// down to site 1 (σx-type then σz-type per site), ending with the σx-type
/// at site 1: 2N levels.
pub fn build_new_scheme(n_qubits: usize) -> Result<Scheme> {
    if n_qubits == 0 {
        return Err(Error::BadParams("need at least one qubit".into()));
    }
    let mut involutions = vec![build_ccd(n_qubits)];
    for site in (2..=n_qubits).rev() {
        involutions.push(new_scheme_local(n_qubits, site, Letter::X));
        involutions.push(new_scheme_local(n_qubits, site, Letter::Z));
    }
    involutions.push(new_scheme_local(n_qubits, 1, Letter::X));
    let hints = (1..=involutions.len())
        .map(|level| {
            let (expected, rank) = new_scheme_level_type(n_qubits, level);
            LevelHint { expected, recipe: CartanRecipe::Catalog, rank: Some(rank) }
        })
        .collect();
    Ok(Scheme { name: "ccd-new".into(), dims: vec![2; n_qubits], involutions, hints })
}

/// Default index schedule: one round of halving splits `(⌈n/2⌉, ⌊n/2⌋)`.
pub fn default_pq_schedule(n1: usize, n2: usize) -> Vec<[(usize, usize); 2]> {
    let half = |n: usize| (n.div_ceil(2), n / 2);
    vec![[half(n1), half(n2)]]
}

/// AI-type OED (conjugation only), then per round an AIII-OED
/// `Z_{p1q1} ⊗ Z_{p2q2}` followed by the standard AIII `Z_{p1q1} ⊗ 1`.
pub fn build_bipartite_recursion(n1: usize, n2: usize, pq_schedule: &[[(usize, usize); 2]]) -> Result<Scheme> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::BadParams(format!("subsystem dimensions must be at least 2, got {n1}×{n2}")));
    }
    if pq_schedule.is_empty() {
        return Err(Error::ScheduleExhausted("empty index schedule".into()));
    }
    let n = n1 * n2;
    let mut involutions = vec![Involution::new(matcore::identity(n), true)?];
    let mut hints = vec![LevelHint { expected: LevelType::AI, recipe: CartanRecipe::Generic, rank: Some(n) }];
    let mut previous: Option<[(usize, usize); 2]> = None;
    for (round, pair) in pq_schedule.iter().enumerate() {
        for (&(p, q), dim) in pair.iter().zip([n1, n2]) {
            if p == 0 || q == 0 || p + q != dim {
                return Err(Error::ScheduleExhausted(format!(
                    "round {}: ({p},{q}) is not a proper split of {dim}",
                    round + 1
                )));
            }
        }
        if let Some(prev) = previous {
            if prev[0] == pair[0] || prev[1] == pair[1] {
                return Err(Error::ScheduleExhausted(format!(
                    "round {}: index pair repeats the previous round",
                    round + 1
                )));
            }
        }
        previous = Some(*pair);
        let [(p1, q1), (p2, q2)] = *pair;
        let oed = Involution::new(matcore::kron(&block_z(p1, q1), &block_z(p2, q2)), false)?;
        let std = Involution::new(matcore::kron(&block_z(p1, q1), &matcore::identity(n2)), false)?;
        involutions.push(oed);
        involutions.push(std);
        let generic = LevelHint { expected: LevelType::AIII, recipe: CartanRecipe::Generic, rank: None };
        hints.push(generic.clone());
        hints.push(generic);
    }
    Ok(Scheme { name: "bipartite".into(), dims: vec![n1, n2], involutions, hints })
}

/// Standard kind an involution is conjugate to.
pub fn standard_kind(theta: &Involution) -> StandardKind {
    match theta.class() {
        InvolutionClass::Symmetric => StandardKind::AI,
        InvolutionClass::Antisymmetric => StandardKind::AII,
        InvolutionClass::Linear => {
            // eigenvalues are ±1, so the trace counts p − q
            let tr = normalized_linear_w(theta).trace().re.round() as i64;
            let n = theta.n as i64;
            let p = ((n + tr) / 2) as usize;
            StandardKind::AIII { p, q: theta.n - p }
        }
    }
}

/// `W/√c` with `W² = c·1`, so that the result squares to the identity.
fn normalized_linear_w(theta: &Involution) -> CMatrix {
    let c = theta.square_scalar();
    &theta.w / c.sqrt()
}

/// Gram–Schmidt of `candidates` into at most `n` orthonormal vectors.
fn orthonormal_columns(
    n: usize,
    candidates: impl Iterator<Item = nalgebra::DVector<C64>>,
) -> Vec<nalgebra::DVector<C64>> {
    let mut out: Vec<nalgebra::DVector<C64>> = Vec::new();
    for v in candidates {
        let mut r = v;
        for _ in 0..2 {
            for q in &out {
                let d = q.dotc(&r);
                r -= q * d;
            }
        }
        let norm = r.norm();
        if norm > 1e-6 {
            out.push(r / C64::new(norm, 0.0));
        }
        if out.len() == n {
            break;
        }
    }
    out
}

fn linear_standardizer(theta: &Involution) -> Result<(CMatrix, StandardKind)> {
    let n = theta.n;
    let w = normalized_linear_w(theta);
    let id = matcore::identity(n);
    let half = C64::new(0.5, 0.0);
    let plus = (&id + &w) * half;
    let minus = (&id - &w) * half;
    let pv = orthonormal_columns(n, (0..n).map(|k| plus.column(k).clone_owned()));
    let mv = orthonormal_columns(n, (0..n).map(|k| minus.column(k).clone_owned()));
    if pv.len() + mv.len() != n || pv.is_empty() || mv.is_empty() {
        return Err(Error::FactorizationFailed(format!(
            "eigenspace dimensions {} + {} do not give a proper split of {n}",
            pv.len(),
            mv.len()
        )));
    }
    let cols: Vec<_> = pv.iter().chain(mv.iter()).cloned().collect();
    let f = CMatrix::from_columns(&cols);
    Ok((f, StandardKind::AIII { p: pv.len(), q: mv.len() }))
}

/// `W = Q D Qᵀ` (Q real orthogonal) ⇒ `F = Q D^{1/2}` with `F Fᵀ = W`.
fn symmetric_standardizer(w: &CMatrix) -> Result<CMatrix> {
    let q = matcore::simdiag_commuting_symmetric(&matcore::real_part(w), &matcore::imag_part(w), 1e-8)
        .map_err(|e| Error::FactorizationFailed(format!("symmetric factorization: {e}")))?;
    let qc = matcore::from_real(&q);
    let d = qc.transpose() * w * &qc;
    let mut f = qc;
    for j in 0..w.nrows() {
        let s = d[(j, j)].sqrt();
        let mut col = f.column_mut(j);
        col *= s;
    }
    Ok(f)
}

/// Columns pair as `f_{m+j} = −W conj(f_j)`, which gives `F J Fᵀ = W`.
fn antisymmetric_standardizer(w: &CMatrix) -> Result<CMatrix> {
    let n = w.nrows();
    let m = n / 2;
    let mut firsts: Vec<nalgebra::DVector<C64>> = Vec::new();
    let mut seconds: Vec<nalgebra::DVector<C64>> = Vec::new();
    for e in 0..n {
        if firsts.len() == m {
            break;
        }
        let mut v = nalgebra::DVector::<C64>::zeros(n);
        v[e] = ONE;
        for _ in 0..2 {
            for q in firsts.iter().chain(seconds.iter()) {
                let d = q.dotc(&v);
                v -= q * d;
            }
        }
        let norm = v.norm();
        if norm < 1e-6 {
            continue;
        }
        let f = v / C64::new(norm, 0.0);
        let g = -(w * f.map(|z| z.conj()));
        firsts.push(f);
        seconds.push(g);
    }
    if firsts.len() != m {
        return Err(Error::FactorizationFailed("antisymmetric pairing did not fill the space".into()));
    }
    let cols: Vec<_> = firsts.into_iter().chain(seconds).collect();
    Ok(CMatrix::from_columns(&cols))
}

/// Unitary F such that `θ.conjugate(F†)` acts as the standard involution of
/// `standard_kind(θ)`.
pub fn build_standardizer(theta: &Involution) -> Result<(CMatrix, StandardKind)> {
    let kind = standard_kind(theta);
    let f = match theta.class() {
        InvolutionClass::Symmetric => symmetric_standardizer(&theta.w)?,
        InvolutionClass::Antisymmetric => antisymmetric_standardizer(&theta.w)?,
        InvolutionClass::Linear => return linear_standardizer(theta),
    };
    let residual = matcore::unitarity_residual(&f);
    if residual > 1e-8 {
        return Err(Error::FactorizationFailed(format!("standardizer is not unitary ({residual:.3e})")));
    }
    Ok((f, kind))
}

/// Largest deviation between `θ.conjugate(F†)` and the standard involution
/// over the full u(n) basis.
pub fn standardizer_residual(theta: &Involution, f: &CMatrix, kind: StandardKind) -> Result<f64> {
    let std = Involution::standard(kind, theta.n)?;
    let moved = theta.conjugate(&f.adjoint());
    Ok(crate::involutions::unitary_algebra_basis(theta.n)
        .iter()
        .map(|b| matcore::max_abs(&(moved.apply_algebra(b) - std.apply_algebra(b))))
        .fold(0.0, f64::max))
}

/// Serializable scheme request, as stored in the catalog file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub name: String,
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pq_schedule: Option<Vec<[(usize, usize); 2]>>,
    #[serde(default)]
    pub description: String,
}

const DEFAULT_CATALOG: &str = include_str!("../catalog/schemes.json");

pub fn default_catalog() -> Vec<SchemeSpec> {
    serde_json::from_str(DEFAULT_CATALOG).expect("bundled catalog parses")
}

pub fn load_catalog(text: &str) -> Result<Vec<SchemeSpec>> {
    Ok(serde_json::from_str(text)?)
}

/// Involution record serialized as {kind, p/q, conjugating matrix}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvolutionRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    pub conjugate_entries: bool,
    pub w: Vec<Vec<[f64; 2]>>,
}

impl InvolutionRecord {
    pub fn from_involution(theta: &Involution) -> Self {
        let kind = standard_kind(theta);
        let (p, q) = match kind {
            StandardKind::AIII { p, q } => (Some(p), Some(q)),
            _ => (None, None),
        };
        let w =
            (0..theta.n).map(|r| (0..theta.n).map(|c| [theta.w[(r, c)].re, theta.w[(r, c)].im]).collect()).collect();
        InvolutionRecord { kind: format!("{kind}"), p, q, conjugate_entries: theta.conjugate_entries, w }
    }
}

/// Instantiate a catalog entry, with optional overrides for size and schedule.
pub fn build_from_spec(spec: &SchemeSpec) -> Result<Scheme> {
    let qubits = || {
        spec.qubits
            .or_else(|| spec.dims.as_ref().filter(|d| d.iter().all(|&x| x == 2)).map(|d| d.len()))
            .ok_or_else(|| Error::BadParams(format!("scheme {} needs a qubit count", spec.name)))
    };
    let mut scheme = match spec.family.as_str() {
        "ccd-new" => build_new_scheme(qubits()?)?,
        "kg" => build_kg_sequence(qubits()?)?,
        "bipartite" => {
            let dims = match (&spec.dims, spec.qubits) {
                (Some(d), _) => d.clone(),
                (None, Some(nq)) => vec![2, 1 << (nq - 1)],
                (None, None) => return Err(Error::BadParams("bipartite scheme needs dims".into())),
            };
            if dims.len() != 2 {
                return Err(Error::BadParams(format!("bipartite scheme needs two subsystems, got {}", dims.len())));
            }
            let schedule = spec.pq_schedule.clone().unwrap_or_else(|| default_pq_schedule(dims[0], dims[1]));
            build_bipartite_recursion(dims[0], dims[1], &schedule)?
        }
        "ccd" => {
            let nq = qubits()?;
            Scheme {
                name: "ccd".into(),
                dims: vec![2; nq],
                involutions: vec![build_ccd(nq)],
                hints: vec![LevelHint {
                    expected: if nq % 2 == 0 { LevelType::AI } else { LevelType::AII },
                    recipe: CartanRecipe::Catalog,
                    rank: Some(if nq % 2 == 0 { 1 << nq } else { 1 << (nq - 1) }),
                }],
            }
        }
        other => return Err(Error::UnsupportedScheme(other.to_string())),
    };
    scheme.name = spec.name.clone();
    Ok(scheme)
}
