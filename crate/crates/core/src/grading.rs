//! Simultaneous eigenspaces of commuting involutions and the recursive
//! sequences L_{0^j} ⊃ L_{0^{j+1}} they induce.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::involutions::{cartan_pair_residual, coords, unitary_algebra_basis, Involution, Subspace};
use crate::matcore::{self, CMatrix, RMatrix, C64};
use crate::schemes::{LevelType, Scheme};

/// Residual above which two involutions are reported as non-commuting.
pub const COMMUTE_TOL: f64 = 1e-8;

/// Residual allowed for bracket-closure checks.
pub const BRACKET_TOL: f64 = 1e-9;

/// Relative singular-value threshold for null spaces.
pub const NULL_TOL: f64 = 1e-8;

/// Z_2^p-grading: blocks keyed by p-bit labels such as "0110".
#[derive(Clone, Debug)]
pub struct Grading {
    pub p: usize,
    pub n: usize,
    pub blocks: BTreeMap<String, Subspace>,
}

fn xor_labels(a: &str, b: &str) -> String {
    a.chars().zip(b.chars()).map(|(x, y)| if x == y { '0' } else { '1' }).collect()
}

/// Check pairwise commutativity of the involutions as maps on u(n).
pub fn check_commuting(involutions: &[Involution]) -> Result<()> {
    let Some(first) = involutions.first() else { return Ok(()) };
    let basis = unitary_algebra_basis(first.n);
    for (a, ta) in involutions.iter().enumerate() {
        for (b, tb) in involutions.iter().enumerate().skip(a + 1) {
            let residual = basis.iter().map(|x| ta.commutes_on(tb, x)).fold(0.0, f64::max);
            if residual > COMMUTE_TOL {
                return Err(Error::NonCommutingInvolutions { a: a + 1, b: b + 1, residual });
            }
        }
    }
    Ok(())
}

/// Push an orthonormal basis of u(n) through the sign projectors of each
/// involution in turn; label bit j is 0 for the +1 and 1 for the −1 eigenspace
/// of involution j.
pub fn build_grading(involutions: &[Involution]) -> Result<Grading> {
    let Some(first) = involutions.first() else {
        return Err(Error::BadParams("a grading needs at least one involution".into()));
    };
    let n = first.n;
    for th in involutions {
        if th.n != n {
            return Err(Error::DimensionMismatch { expected: n, got: th.n });
        }
    }
    check_commuting(involutions)?;

    let half = C64::new(0.5, 0.0);
    let mut level: Vec<(String, Subspace)> =
        vec![(String::new(), Subspace::from_spanning(n, unitary_algebra_basis(n), ""))];
    for th in involutions {
        let mut next = Vec::with_capacity(level.len() * 2);
        for (label, space) in level {
            let mut plus = Vec::with_capacity(space.dim());
            let mut minus = Vec::with_capacity(space.dim());
            for b in &space.basis {
                let t = th.apply_algebra(b);
                plus.push((b + &t) * half);
                minus.push((b - &t) * half);
            }
            let l0 = format!("{label}0");
            let l1 = format!("{label}1");
            next.push((l0.clone(), Subspace::from_spanning(n, plus, format!("L_{l0}"))));
            next.push((l1.clone(), Subspace::from_spanning(n, minus, format!("L_{l1}"))));
        }
        level = next;
    }
    let total: usize = level.iter().map(|(_, s)| s.dim()).sum();
    if total != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: total });
    }
    Ok(Grading { p: involutions.len(), n, blocks: level.into_iter().collect() })
}

impl Grading {
    pub fn block(&self, label: &str) -> Option<&Subspace> {
        self.blocks.get(label)
    }

    pub fn dims(&self) -> BTreeMap<String, usize> {
        self.blocks.iter().map(|(k, v)| (k.clone(), v.dim())).collect()
    }

    /// Worst residual of [L_a, L_b] ⊆ L_{a⊕b} over all basis pairs, with the
    /// offending label pair.
    pub fn graded_commutation_residual(&self) -> (f64, Option<(String, String)>) {
        let nonempty: Vec<(&String, &Subspace)> = self.blocks.iter().filter(|(_, s)| s.dim() > 0).collect();
        let empty = Subspace::empty(self.n, "");
        let mut worst = 0.0;
        let mut at = None;
        for (i, (la, sa)) in nonempty.iter().enumerate() {
            for (lb, sb) in nonempty.iter().skip(i) {
                let target_label = xor_labels(la, lb);
                let target = self.blocks.get(&target_label).unwrap_or(&empty);
                let r = sa.bracket_residual(sb, target);
                if r > worst {
                    worst = r;
                    at = Some(((*la).clone(), (*lb).clone()));
                }
            }
        }
        (worst, at)
    }

    /// Largest overlap between distinct blocks.
    pub fn orthogonality_residual(&self) -> f64 {
        let blocks: Vec<&Subspace> = self.blocks.values().collect();
        let mut worst: f64 = 0.0;
        for (i, a) in blocks.iter().enumerate() {
            for b in blocks.iter().skip(i + 1) {
                worst = worst.max(a.overlap(b));
            }
        }
        worst
    }

    /// Direct sum of all blocks whose label starts with `prefix`.
    pub fn union_with_prefix(&self, prefix: &str) -> Subspace {
        let parts: Vec<&Subspace> = self.blocks.iter().filter(|(k, _)| k.starts_with(prefix)).map(|(_, v)| v).collect();
        let label = if prefix.is_empty() { "L".to_string() } else { format!("L_{prefix}") };
        Subspace::direct_sum(self.n, parts, label)
    }
}

/// Metadata for one recursion level j (1-based): the pair splitting L_{0^{j−1}}.
#[derive(Clone, Debug)]
pub struct LevelMeta {
    pub level: usize,
    pub expected: Option<LevelType>,
    /// Center of L_{0^{j−1}}.
    pub center: Subspace,
    /// Dimension of a maximal abelian subspace of L_{0^{j−1}1}.
    pub rank: usize,
    pub cartan_residual: f64,
}

/// S0 = (L, L_0, L_00, …, L_{0^p}) and S1 = (L_1, L_01, …, L_{0^{p−1}1}).
#[derive(Clone, Debug)]
pub struct RecursiveSequence {
    pub n: usize,
    /// `s0[j]` is L_{0^j}; `s0[0]` is all of u(n).
    pub s0: Vec<Subspace>,
    /// `s1[j−1]` is L_{0^{j−1}1}.
    pub s1: Vec<Subspace>,
    pub levels: Vec<LevelMeta>,
}

impl RecursiveSequence {
    pub fn p(&self) -> usize {
        self.s1.len()
    }

    /// Dimensions of L_{0^j} for j = 1..p.
    pub fn s0_dims(&self) -> Vec<usize> {
        self.s0.iter().skip(1).map(|s| s.dim()).collect()
    }

    pub fn s1_dims(&self) -> Vec<usize> {
        self.s1.iter().map(|s| s.dim()).collect()
    }
}

/// Build S0/S1 from a grading and verify the Cartan relations at each level.
pub fn recursive_sequences(g: &Grading) -> Result<RecursiveSequence> {
    recursive_sequences_with(g, None)
}

pub fn recursive_sequences_with(g: &Grading, expected: Option<&[LevelType]>) -> Result<RecursiveSequence> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut s0 = vec![g.union_with_prefix("")];
    let mut s1 = Vec::new();
    let mut levels = Vec::new();
    for j in 1..=g.p {
        let zeros = "0".repeat(j);
        let k = g.union_with_prefix(&zeros);
        let p = g.union_with_prefix(&format!("{}1", "0".repeat(j - 1)));
        let parent = &s0[j - 1];
        if k.dim() + p.dim() != parent.dim() {
            return Err(Error::CartanRelationViolated { level: j, residual: f64::NAN });
        }
        let residual = cartan_pair_residual(&k, &p);
        if residual > BRACKET_TOL {
            return Err(Error::CartanRelationViolated { level: j, residual });
        }
        let (_, center) = center_split(parent)?;
        let rank = maximal_abelian_dim(&p, &mut rng);
        levels.push(LevelMeta {
            level: j,
            expected: expected.and_then(|e| e.get(j - 1).copied()),
            center,
            rank,
            cartan_residual: residual,
        });
        s0.push(k);
        s1.push(p);
    }
    Ok(RecursiveSequence { n: g.n, s0, s1, levels })
}

/// Grading and sequences of a scheme in one call.
pub fn scheme_sequences(scheme: &Scheme) -> Result<(Grading, RecursiveSequence)> {
    let g = build_grading(&scheme.involutions)?;
    let expected: Vec<LevelType> = scheme.hints.iter().map(|h| h.expected).collect();
    let seq = recursive_sequences_with(&g, Some(&expected))?;
    Ok((g, seq))
}

/// Elements `Σ c_k s_k` of `space` annihilated by the stacked linear map `f`,
/// as an orthonormal subspace.
pub fn kernel_in(space: &Subspace, f: impl Fn(&CMatrix) -> Vec<CMatrix>, label: &str) -> Subspace {
    let d = space.dim();
    if d == 0 {
        return Subspace::empty(space.n, label);
    }
    let cols: Vec<DVector<f64>> = space
        .basis
        .iter()
        .map(|b| {
            let parts: Vec<f64> = f(b).iter().flat_map(|m| coords(m).iter().copied().collect::<Vec<_>>()).collect();
            DVector::from_vec(parts)
        })
        .collect();
    let rows = cols[0].len();
    let mut m = RMatrix::zeros(rows.max(d), d);
    for (j, c) in cols.iter().enumerate() {
        m.view_mut((0, j), (rows, 1)).copy_from(c);
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let thresh = NULL_TOL * smax.max(1.0);
    let mut out = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= thresh {
            let coeffs: Vec<f64> = v_t.row(i).iter().copied().collect();
            out.push(space.combine(&coeffs));
        }
    }
    Subspace::from_spanning(space.n, out, label)
}

/// Orthogonal complement of `sub` inside `space`.
pub fn complement_in(space: &Subspace, sub: &Subspace, label: &str) -> Subspace {
    let rest = space.basis.iter().map(|b| b - sub.project(b));
    let mut all: Vec<CMatrix> = sub.basis.clone();
    all.extend(rest);
    let joined = Subspace::from_spanning(space.n, all, label);
    Subspace::from_spanning(space.n, joined.basis.into_iter().skip(sub.dim()), label)
}

/// Split a subalgebra into its semisimple part and its center.
pub fn center_split(s: &Subspace) -> Result<(Subspace, Subspace)> {
    let residual = s.bracket_residual(s, s);
    if residual > BRACKET_TOL {
        return Err(Error::NotASubalgebra { residual });
    }
    let basis = s.basis.clone();
    let center = kernel_in(s, |x| basis.iter().map(|b| matcore::commutator(x, b)).collect(), "center");
    let semisimple = complement_in(s, &center, "semisimple");
    Ok((semisimple, center))
}

/// Centralizer of `x` inside `space`.
pub fn centralizer_in(x: &CMatrix, space: &Subspace, label: &str) -> Subspace {
    kernel_in(space, |y| vec![matcore::commutator(x, y)], label)
}

/// Random element of `space` with standard normal coefficients.
pub fn random_element<R: Rng + ?Sized>(space: &Subspace, rng: &mut R) -> CMatrix {
    let coeffs: Vec<f64> = (0..space.dim()).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    space.combine(&coeffs)
}

/// Dimension of the centralizer in `p` of a generic element of `p`.
pub fn maximal_abelian_dim<R: Rng + ?Sized>(p: &Subspace, rng: &mut R) -> usize {
    if p.dim() == 0 {
        return 0;
    }
    let x = random_element(p, rng);
    centralizer_in(&x, p, "h").dim()
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub expected: Option<LevelType>,
    pub k_dim: usize,
    pub p_dim: usize,
    pub rank: usize,
    pub center_dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradingReport {
    pub n: usize,
    pub p: usize,
    pub block_dims: BTreeMap<String, usize>,
    pub levels: Vec<LevelSummary>,
}

pub fn report(g: &Grading, seq: &RecursiveSequence) -> GradingReport {
    GradingReport {
        n: g.n,
        p: g.p,
        block_dims: g.dims(),
        levels: seq
            .levels
            .iter()
            .map(|m| LevelSummary {
                level: m.level,
                expected: m.expected,
                k_dim: seq.s0[m.level].dim(),
                p_dim: seq.s1[m.level - 1].dim(),
                rank: m.rank,
                center_dim: m.center.dim(),
            })
            .collect(),
    }
}
