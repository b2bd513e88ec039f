//! Recursive factorization of a unitary along a scheme's decomposition sequence.

use std::hash::{Hash, Hasher};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grading::{self, RecursiveSequence};
use crate::involutions::{coords, Involution, Subspace};
use crate::kak;
use crate::matcore::{self, CMatrix, RMatrix, C64};
use crate::pauli::{self, AlgebraElement, PauliString};
use crate::schemes::Scheme;
use crate::torus::Torus;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    /// Tolerance handed to the per-level solvers.
    pub tol: f64,
    /// Factors with ‖U − 1‖ at or below this are dropped.
    pub prune_tol: f64,
    /// Verification bound on the reconstruction error.
    pub reconstruction_tol: f64,
    /// Verification bound on each leaf's distance to its labelled subspace.
    pub leaf_tol: f64,
    pub seed: u64,
    /// Random restarts of the torus alignment per factor.
    pub restarts: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            tol: matcore::DEFAULT_TOL,
            prune_tol: 1e-10,
            reconstruction_tol: 1e-8,
            leaf_tol: 1e-9,
            seed: 0x5eed,
            restarts: 24,
        }
    }
}

/// One exponential factor `exp(generator)`.
#[derive(Clone, Debug)]
pub struct Leaf {
    /// Label of the subspace holding the generator, e.g. `L_001`.
    pub label: String,
    /// Branch path in the recursion, e.g. `K1.K2.A3`.
    pub path: String,
    pub generator: AlgebraElement,
    pub matrix: CMatrix,
    /// Distance of the generator to its labelled subspace.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Factorization {
    pub scheme: String,
    pub dims: Vec<usize>,
    pub input_hash: String,
    /// Ordered so that the product left to right reproduces the input.
    pub leaves: Vec<Leaf>,
    pub pruned: usize,
    pub max_leaf_residual: f64,
    pub reconstruction_error: f64,
}

impl Factorization {
    pub fn product(&self) -> CMatrix {
        product_of(self.dims.iter().product(), self.leaves.iter().map(|l| &l.matrix))
    }
}

fn product_of<'a>(n: usize, factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors.into_iter().fold(matcore::identity(n), |acc, m| acc * m)
}

pub fn input_hash(x: &CMatrix) -> String {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    x.nrows().hash(&mut h);
    for z in x.iter() {
        z.re.to_bits().hash(&mut h);
        z.im.to_bits().hash(&mut h);
    }
    format!("{:016x}", h.finish())
}

/// Coordinates of a generator: Pauli terms for qubit dimensions, raw otherwise.
fn to_element(g: &CMatrix, tol: f64) -> Result<AlgebraElement> {
    if g.nrows().is_power_of_two() {
        pauli::expand(g, tol.max(1e-9))
    } else {
        Ok(AlgebraElement::Raw(g.clone()))
    }
}

/// Principal logarithm of `u` projected onto `subspace`; the projection must
/// be lossless up to `tol`.
pub fn factor_to_exponential(u: &CMatrix, subspace: &Subspace, tol: f64) -> Result<AlgebraElement> {
    let h = matcore::principal_log_unitary(u, tol)?;
    let hp = subspace.project(&h);
    let residual = matcore::max_abs(&(matcore::expm_skew(&hp) - u));
    if residual > tol {
        return Err(Error::LogOutsideSubspace { residual });
    }
    to_element(&hp, tol)
}

struct LevelData {
    theta: Involution,
    torus: Torus,
    /// Regular element of the torus, unit norm.
    h0: CMatrix,
}

/// Reusable decomposition engine for one scheme.
pub struct Decomposer {
    pub scheme: Scheme,
    pub seq: RecursiveSequence,
    levels: Vec<LevelData>,
    bottom: Option<Torus>,
    pub opts: SynthOptions,
}

struct Walk {
    leaves: Vec<Leaf>,
    pruned: usize,
}

fn path_seed(seed: u64, path: &str) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    path.hash(&mut h);
    seed ^ h.finish()
}

impl Decomposer {
    pub fn new(scheme: &Scheme, opts: SynthOptions) -> Result<Self> {
        let (_, seq) = grading::scheme_sequences(scheme)?;
        let mut levels = Vec::with_capacity(seq.p());
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for j in 1..=seq.p() {
            let h = kak::level_torus(scheme, &seq, j)?;
            let torus = Torus::new(seq.n, h.basis.clone())?;
            let mut h0 = torus.random_element(&mut rng);
            let norm = matcore::frob_norm(&h0);
            if norm > 0.0 {
                h0 /= C64::new(norm, 0.0);
            }
            levels.push(LevelData { theta: scheme.involutions[j - 1].clone(), torus, h0 });
        }
        let last = &seq.s0[seq.p()];
        let abelian = last.bracket_residual(last, &Subspace::empty(seq.n, "0")) < 1e-9;
        let bottom = if abelian && last.dim() > 0 { Some(Torus::new(seq.n, last.basis.clone())?) } else { None };
        Ok(Decomposer { scheme: scheme.clone(), seq, levels, bottom, opts })
    }

    pub fn decompose(&self, x: &CMatrix) -> Result<Factorization> {
        let n = self.seq.n;
        if x.nrows() != n || x.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.nrows() });
        }
        matcore::check_unitary(x, self.opts.tol.max(1e-12) * 10.0)?;
        let mut walk = Walk { leaves: Vec::new(), pruned: 0 };
        self.descend(x, 1, "", &mut walk)?;
        let mut f = Factorization {
            scheme: self.scheme.name.clone(),
            dims: self.scheme.dims.clone(),
            input_hash: input_hash(x),
            max_leaf_residual: walk.leaves.iter().map(|l| l.residual).fold(0.0, f64::max),
            leaves: walk.leaves,
            pruned: walk.pruned,
            reconstruction_error: 0.0,
        };
        f.reconstruction_error = matcore::max_abs(&(f.product() - x));
        Ok(f)
    }

    fn is_identity(&self, u: &CMatrix) -> bool {
        matcore::max_abs(&(u - matcore::identity(u.nrows()))) <= self.opts.prune_tol
    }

    fn push_leaf(&self, walk: &mut Walk, g: CMatrix, subspace: &Subspace, path: String) -> Result<()> {
        let matrix = matcore::expm_skew(&g);
        if self.is_identity(&matrix) {
            walk.pruned += 1;
            return Ok(());
        }
        let residual = subspace.residual(&g);
        let generator = to_element(&g, self.opts.tol).map_err(|e| e.at(&path))?;
        walk.leaves.push(Leaf { label: subspace.label.clone(), path, generator, matrix, residual });
        Ok(())
    }

    fn descend(&self, u: &CMatrix, level: usize, path: &str, walk: &mut Walk) -> Result<()> {
        if self.is_identity(u) {
            walk.pruned += 1;
            return Ok(());
        }
        let p = self.seq.p();
        if level > p {
            let g = self.bottom_generator(u).map_err(|e| e.at(format!("{path}B")))?;
            return self.push_leaf(walk, g, &self.seq.s0[p], format!("{path}B"));
        }
        let here = format!("{path}A{level}");
        let (k1, a_gen, k2) = self.split(u, level, &here).map_err(|e| e.at(&here))?;
        self.descend(&k1, level + 1, &format!("{path}K1."), walk)?;
        self.push_leaf(walk, a_gen, &self.seq.s1[level - 1], here)?;
        self.descend(&k2, level + 1, &format!("{path}K2."), walk)
    }

    fn bottom_generator(&self, u: &CMatrix) -> Result<CMatrix> {
        let p = self.seq.p();
        match &self.bottom {
            Some(t) => {
                let c = t.log(u, self.opts.tol)?;
                Ok(t.generator(&c))
            }
            None if self.seq.s0[p].dim() == 0 => {
                Err(Error::LogOutsideSubspace { residual: matcore::max_abs(&(u - matcore::identity(u.nrows()))) })
            }
            None => {
                let h = matcore::principal_log_unitary(u, self.opts.tol)?;
                let hp = self.seq.s0[p].project(&h);
                let residual = matcore::max_abs(&(matcore::expm_skew(&hp) - u));
                if residual > self.opts.tol * 10.0 {
                    return Err(Error::LogOutsideSubspace { residual });
                }
                Ok(hp)
            }
        }
    }

    /// `u = K1·exp(a_gen)·K2` with K_i in the connected subgroup of level
    /// `level` and `a_gen` in that level's torus.
    fn split(&self, u: &CMatrix, level: usize, path: &str) -> Result<(CMatrix, CMatrix, CMatrix)> {
        let data = &self.levels[level - 1];
        if level == 1 {
            let r = kak::kak_general(&data.theta, u, self.opts.tol)?;
            return Ok((r.k1.clone(), r.log_a(), r.k2));
        }
        let kspace = &self.seq.s0[level];
        let m = data.theta.apply_algebra(u).adjoint() * u;
        let n = u.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(path_seed(self.opts.seed, path));
        let mut last_err = Error::AlignmentFailed("no attempt".into());
        for attempt in 0..=self.opts.restarts {
            let k0 = if attempt == 0 {
                matcore::identity(n)
            } else {
                matcore::expm_skew(&grading::random_element(kspace, &mut rng))
            };
            let k = if matcore::max_abs(&(&m - matcore::identity(n))) <= 1e-14 {
                k0
            } else {
                let (k, residual) = align(&m, &data.h0, &kspace.basis, k0);
                if residual > 1e-10 {
                    last_err = Error::AlignmentFailed(format!("commutator residual {residual:.3e}"));
                    continue;
                }
                k
            };
            match self.finish_split(u, &m, k, level, &mut rng) {
                Ok(out) => return Ok(out),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    fn finish_split(
        &self,
        u: &CMatrix,
        m: &CMatrix,
        k: CMatrix,
        level: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(CMatrix, CMatrix, CMatrix)> {
        let data = &self.levels[level - 1];
        let d = &k * m * k.adjoint();
        let c = data.torus.log(&d, self.opts.tol)?;
        let half: Vec<f64> = c.iter().map(|x| x / 2.0).collect();
        let a = data.torus.exp(&half);
        let k1 = u * k.adjoint() * a.adjoint();
        let fixed = matcore::max_abs(&(data.theta.apply_algebra(&k1) - &k1));
        if fixed > 1e-8 {
            return Err(Error::AlignmentFailed(format!("K1 is not fixed ({fixed:.3e})")));
        }
        let kspace = &self.seq.s0[level];
        if in_identity_component(&k1, kspace, rng) {
            return Ok((k1, data.torus.generator(&half), k));
        }
        for eps in data.torus.involutive_elements() {
            let e = data.torus.exp(&eps);
            let k1e = &k1 * &e;
            if in_identity_component(&k1e, kspace, rng) {
                let shifted: Vec<f64> = half.iter().zip(&eps).map(|(h, s)| h + s).collect();
                return Ok((k1e, data.torus.generator(&shifted), k));
            }
        }
        Err(Error::AlignmentFailed("K1 lies outside the connected subgroup".into()))
    }
}

/// Whether `g` (already fixed by the level's involutions) lies in `exp(kspace)`:
/// elements of the other components keep an eigenvalue −1 under any right
/// translation, while the identity component generically does not.
fn in_identity_component(g: &CMatrix, kspace: &Subspace, rng: &mut ChaCha8Rng) -> bool {
    let n = g.nrows();
    for _ in 0..3 {
        let probe = g * matcore::expm_skew(&(grading::random_element(kspace, rng) * C64::new(0.7, 0.0)));
        let e = match matcore::eig_normal_with(&probe, 1e-10, matcore::PhasePolicy::None) {
            Ok(e) => e,
            Err(_) => continue,
        };
        let gap = e.values.iter().map(|z| (z + matcore::ONE).norm()).fold(f64::INFINITY, f64::min);
        if gap > 1e-6 {
            let h = match matcore::principal_log_unitary(&probe, 1e-10) {
                Ok(h) => h,
                Err(_) => continue,
            };
            return kspace.residual(&h) < 1e-7 * (n as f64);
        }
    }
    false
}

/// Damped Gauss–Newton search for `k = exp(Σ δ_b κ_b)·k0` making `k m k†`
/// commute with `h0`. Returns the final `k` and the commutator norm.
fn align(m: &CMatrix, h0: &CMatrix, kbasis: &[CMatrix], k0: CMatrix) -> (CMatrix, f64) {
    let nb = kbasis.len();
    let eval = |k: &CMatrix| {
        let d = k * m * k.adjoint();
        let r = coords(&matcore::commutator(&d, h0));
        (d, r)
    };
    let mut k = k0;
    let (mut d, mut r) = eval(&k);
    let mut cost = r.norm();
    let mut lambda = 1e-3;
    for _ in 0..300 {
        if cost < 1e-14 || nb == 0 {
            break;
        }
        let mut jac = RMatrix::zeros(r.len(), nb);
        for (b, kb) in kbasis.iter().enumerate() {
            jac.set_column(b, &coords(&matcore::commutator(&matcore::commutator(kb, &d), h0)));
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &r;
        let mut accepted = false;
        for _ in 0..12 {
            let mut sys = jtj.clone();
            for i in 0..nb {
                sys[(i, i)] += lambda;
            }
            let Some(chol) = sys.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let delta: DVector<f64> = chol.solve(&(-&grad));
            let mut gen = CMatrix::zeros(m.nrows(), m.nrows());
            for (kb, &x) in kbasis.iter().zip(delta.iter()) {
                gen += kb * C64::new(x, 0.0);
            }
            let k_new = matcore::expm_skew(&gen) * &k;
            let (d_new, r_new) = eval(&k_new);
            let cost_new = r_new.norm();
            if cost_new < cost {
                k = k_new;
                d = d_new;
                r = r_new;
                cost = cost_new;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    (k, cost)
}

pub fn decompose(x: &CMatrix, scheme: &Scheme, opts: SynthOptions) -> Result<Factorization> {
    Decomposer::new(scheme, opts)?.decompose(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub reconstruction_error: f64,
    pub leaf_residuals: Vec<f64>,
    pub generator_norms: Vec<f64>,
    pub max_leaf_residual: f64,
    pub leaf_count: usize,
    pub pruned: usize,
    pub reconstruction_tol: f64,
    pub leaf_tol: f64,
    pub passed: bool,
}

fn find_subspace<'a>(seq: &'a RecursiveSequence, label: &str) -> Option<&'a Subspace> {
    seq.s0.iter().chain(seq.s1.iter()).find(|s| s.label == label)
}

/// Multiply the leaves from their generators and compare with `x`; each
/// generator is checked against the subspace named by its label.
pub fn reconstruct_and_verify(f: &Factorization, x: &CMatrix, seq: &RecursiveSequence, opts: &SynthOptions) -> Report {
    let n = x.nrows();
    let mut leaf_residuals = Vec::with_capacity(f.leaves.len());
    let mut generator_norms = Vec::with_capacity(f.leaves.len());
    let mut mats = Vec::with_capacity(f.leaves.len());
    for leaf in &f.leaves {
        let g = leaf.generator.matrix();
        let residual = if g.nrows() != n {
            f64::INFINITY
        } else {
            find_subspace(seq, &leaf.label).map_or(f64::INFINITY, |s| s.residual(&g))
        };
        leaf_residuals.push(residual);
        generator_norms.push(matcore::frob_norm(&g));
        mats.push(if g.nrows() == n {
            matcore::expm_skew(&g)
        } else {
            CMatrix::from_element(n, n, C64::new(f64::NAN, 0.0))
        });
    }
    let product = product_of(n, mats.iter());
    let reconstruction_error = {
        let e = matcore::max_abs(&(product - x));
        if e.is_nan() {
            f64::INFINITY
        } else {
            e
        }
    };
    let max_leaf_residual = leaf_residuals.iter().copied().fold(0.0, f64::max);
    let passed = reconstruction_error <= opts.reconstruction_tol && max_leaf_residual <= opts.leaf_tol;
    Report {
        reconstruction_error,
        leaf_count: f.leaves.len(),
        pruned: f.pruned,
        leaf_residuals,
        generator_norms,
        max_leaf_residual,
        reconstruction_tol: opts.reconstruction_tol,
        leaf_tol: opts.leaf_tol,
        passed,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    /// Row-major `[re, im]` pairs.
    pub entries: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let n = m.nrows();
        let entries =
            (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| [m[(r, c)].re, m[(r, c)].im]).collect();
        MatrixJson { n, entries }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.entries.len() != self.n * self.n {
            return Err(Error::Parse(format!("expected {} entries, got {}", self.n * self.n, self.entries.len())));
        }
        Ok(CMatrix::from_fn(self.n, self.n, |r, c| {
            let [re, im] = self.entries[r * self.n + c];
            C64::new(re, im)
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub pauli: PauliString,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafJson {
    pub label: String,
    pub path: String,
    pub terms: Vec<TermJson>,
    /// Raw generator for dimensions that are not a power of two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<MatrixJson>,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationJson {
    pub scheme: String,
    pub dims: Vec<usize>,
    pub input_hash: String,
    pub pruned: usize,
    pub leaves: Vec<LeafJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<Report>,
}

impl FactorizationJson {
    pub fn from_factorization(f: &Factorization, emit_matrices: bool, report: Option<Report>) -> Self {
        let leaves = f
            .leaves
            .iter()
            .map(|l| {
                let (terms, generator) = match &l.generator {
                    AlgebraElement::Pauli { coeffs, .. } => {
                        (coeffs.iter().map(|(s, &c)| TermJson { pauli: s.clone(), coeff: c }).collect(), None)
                    }
                    AlgebraElement::Raw(m) => (Vec::new(), Some(MatrixJson::from_matrix(m))),
                };
                LeafJson {
                    label: l.label.clone(),
                    path: l.path.clone(),
                    terms,
                    generator,
                    residual: l.residual,
                    matrix: emit_matrices.then(|| MatrixJson::from_matrix(&l.matrix)),
                }
            })
            .collect();
        FactorizationJson {
            scheme: f.scheme.clone(),
            dims: f.dims.clone(),
            input_hash: f.input_hash.clone(),
            pruned: f.pruned,
            leaves,
            report,
        }
    }

    /// Rebuild the factorization from the serialized generators only.
    pub fn to_factorization(&self) -> Result<Factorization> {
        let n: usize = self.dims.iter().product();
        let mut leaves = Vec::with_capacity(self.leaves.len());
        for l in &self.leaves {
            let generator = match &l.generator {
                Some(m) => AlgebraElement::Raw(m.to_matrix()?),
                None => {
                    if !n.is_power_of_two() {
                        return Err(Error::Parse(format!("leaf {} has Pauli terms in dimension {n}", l.path)));
                    }
                    let sites = n.trailing_zeros() as usize;
                    if let Some(t) = l.terms.iter().find(|t| t.pauli.len() != sites) {
                        return Err(Error::Parse(format!("term {} does not act on {sites} qubits", t.pauli)));
                    }
                    AlgebraElement::from_terms(sites, l.terms.iter().map(|t| (t.pauli.clone(), t.coeff)))
                }
            };
            let matrix = matcore::expm_skew(&generator.matrix());
            leaves.push(Leaf { label: l.label.clone(), path: l.path.clone(), generator, matrix, residual: l.residual });
        }
        Ok(Factorization {
            scheme: self.scheme.clone(),
            dims: self.dims.clone(),
            input_hash: self.input_hash.clone(),
            max_leaf_residual: leaves.iter().map(|l| l.residual).fold(0.0, f64::max),
            leaves,
            pruned: self.pruned,
            reconstruction_error: f64::NAN,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::I;
    use crate::schemes::{build_bipartite_recursion, build_kg_sequence, build_new_scheme};

    fn x_sw() -> CMatrix {
        // cyclic left shift |abc⟩ ↦ |bca⟩
        CMatrix::from_fn(8, 8, |r, c| if c == ((r << 1) | (r >> 2)) & 7 { matcore::ONE } else { matcore::ZERO })
    }

    fn check_roundtrip(scheme: &Scheme, x: &CMatrix, recon_tol: f64) -> Factorization {
        let d = Decomposer::new(scheme, SynthOptions::default()).unwrap();
        let f = d.decompose(x).unwrap_or_else(|e| panic!("{}: {e}", scheme.name));
        let report = reconstruct_and_verify(&f, x, &d.seq, &d.opts);
        assert!(report.reconstruction_error <= recon_tol, "{}: {report:?}", scheme.name);
        assert!(report.max_leaf_residual <= 1e-9, "{}: {report:?}", scheme.name);
        f
    }

    #[test]
    fn identity_has_no_leaves() {
        for scheme in [build_new_scheme(3).unwrap(), build_kg_sequence(3).unwrap()] {
            let f = decompose(&matcore::identity(8), &scheme, SynthOptions::default()).unwrap();
            assert!(f.leaves.is_empty());
            assert_eq!(f.pruned, 1);
        }
    }

    #[test]
    fn swap_decomposes_in_new_scheme() {
        let f = check_roundtrip(&build_new_scheme(3).unwrap(), &x_sw(), 1e-10);
        assert!(!f.leaves.is_empty());
    }

    #[test]
    fn swap_decomposes_in_kg_scheme() {
        check_roundtrip(&build_kg_sequence(3).unwrap(), &x_sw(), 1e-10);
    }

    #[test]
    fn random_unitaries_round_trip_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for scheme in [
            build_new_scheme(2).unwrap(),
            build_kg_sequence(2).unwrap(),
            build_new_scheme(1).unwrap(),
            build_bipartite_recursion(2, 2, &[[(1, 1), (1, 1)]]).unwrap(),
        ] {
            for _ in 0..5 {
                let x = matcore::haar_unitary(scheme.n(), &mut rng);
                check_roundtrip(&scheme, &x, 1e-8);
            }
        }
    }

    #[test]
    fn random_unitaries_round_trip_three_qubits() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let scheme = build_new_scheme(3).unwrap();
        let d = Decomposer::new(&scheme, SynthOptions::default()).unwrap();
        for _ in 0..3 {
            let x = matcore::haar_unitary(8, &mut rng);
            let f = d.decompose(&x).unwrap();
            let report = reconstruct_and_verify(&f, &x, &d.seq, &d.opts);
            assert!(report.passed, "{report:?}");
        }
    }

    #[test]
    fn non_qubit_bipartite_round_trip() {
        let scheme = build_bipartite_recursion(2, 3, &[[(1, 1), (2, 1)]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = matcore::haar_unitary(6, &mut rng);
        check_roundtrip(&scheme, &x, 1e-8);
    }

    #[test]
    fn reordered_leaves_fail_verification() {
        let scheme = build_new_scheme(2).unwrap();
        let d = Decomposer::new(&scheme, SynthOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let x = matcore::haar_unitary(4, &mut rng);
        let mut f = d.decompose(&x).unwrap();
        assert!(f.leaves.len() > 2);
        f.leaves.reverse();
        let report = reconstruct_and_verify(&f, &x, &d.seq, &d.opts);
        assert!(!report.passed);
        assert!(report.reconstruction_error > 1e-3);
    }

    #[test]
    fn serialized_round_trip_reconstructs() {
        let scheme = build_kg_sequence(2).unwrap();
        let d = Decomposer::new(&scheme, SynthOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let x = matcore::haar_unitary(4, &mut rng);
        let f = d.decompose(&x).unwrap();
        let text = serde_json::to_string(&FactorizationJson::from_factorization(&f, false, None)).unwrap();
        let back: FactorizationJson = serde_json::from_str(&text).unwrap();
        let g = back.to_factorization().unwrap();
        let report = reconstruct_and_verify(&g, &x, &d.seq, &d.opts);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn factor_to_exponential_examples() {
        let scheme = build_new_scheme(3).unwrap();
        let (g, _) = grading::scheme_sequences(&scheme).unwrap();
        let s: PauliString = "XZY".parse().unwrap();
        let gen = s.matrix() * (I * std::f64::consts::FRAC_PI_4);
        let label = g.blocks.iter().find(|(_, b)| b.residual(&gen) < 1e-12).map(|(k, _)| k.clone()).unwrap();
        let block = g.block(&label).unwrap();
        let e = factor_to_exponential(&matcore::expm_skew(&gen), block, 1e-10).unwrap();
        match e {
            AlgebraElement::Pauli { coeffs, .. } => {
                assert_eq!(coeffs.len(), 1);
                assert!((coeffs[&s] - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
            }
            _ => panic!("expected Pauli terms"),
        }
        let zero = factor_to_exponential(&matcore::identity(8), block, 1e-10).unwrap();
        assert!(matcore::max_abs(&zero.matrix()) < 1e-14);
        // wrong block: the projection loses the generator
        let other = g.blocks.values().find(|b| b.residual(&gen) > 0.5).unwrap();
        assert!(matches!(
            factor_to_exponential(&matcore::expm_skew(&gen), other, 1e-10),
            Err(Error::LogOutsideSubspace { .. })
        ));
    }

    #[test]
    fn factor_to_exponential_recovers_small_generators() {
        let scheme = build_new_scheme(3).unwrap();
        let (g, _) = grading::scheme_sequences(&scheme).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for block in g.blocks.values().filter(|b| b.dim() > 0) {
            let mut h = grading::random_element(block, &mut rng);
            let norm = matcore::frob_norm(&h);
            h *= C64::new(1.0 / norm, 0.0);
            let e = factor_to_exponential(&matcore::expm_skew(&h), block, 1e-10).unwrap();
            assert!(matcore::max_abs(&(e.matrix() - &h)) < 1e-9);
        }
    }
}
