//! Commuting tori exp(h): joint eigenbasis, exponential and logarithm.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matcore::{self, CMatrix, RMatrix, C64};

/// Lift enumeration stops growing the search box beyond this many candidates.
const MAX_LIFTS: usize = 60_000;

#[derive(Clone, Debug)]
pub struct Torus {
    pub basis: Vec<CMatrix>,
    /// Joint eigenbasis (columns).
    v: CMatrix,
    /// `Λ[k, i]`: eigenvalue of `−i·h_i` on column k of `v`.
    lambda: RMatrix,
    /// Indices of rows of Λ forming an invertible r×r block.
    rows: Vec<usize>,
    rows_inv: RMatrix,
}

impl Torus {
    pub fn new(n: usize, basis: Vec<CMatrix>) -> Result<Self> {
        for (i, a) in basis.iter().enumerate() {
            matcore::check_skew_hermitian(a, 1e-9)?;
            for b in basis.iter().skip(i + 1) {
                let residual = matcore::max_abs(&matcore::commutator(a, b));
                if residual > 1e-9 {
                    return Err(Error::NotCommuting { residual });
                }
            }
        }
        let r = basis.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0x70_7275);
        let mut v = matcore::identity(n);
        let mut lambda = RMatrix::zeros(n, r);
        let mut ok = false;
        for _ in 0..8 {
            let mut h = CMatrix::zeros(n, n);
            for b in &basis {
                let w: f64 = rng.random_range(0.5..1.5);
                h += b * C64::new(0.0, -w);
            }
            let (_, vecs) = matcore::eigh(&h);
            let mut worst: f64 = 0.0;
            for (i, b) in basis.iter().enumerate() {
                let d = vecs.adjoint() * (b * C64::new(0.0, -1.0)) * &vecs;
                for k in 0..n {
                    lambda[(k, i)] = d[(k, k)].re;
                }
                let mut off = d.clone();
                off.fill_diagonal(C64::new(0.0, 0.0));
                worst = worst.max(matcore::max_abs(&off));
            }
            if worst < 1e-9 {
                v = vecs;
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::TorusLog("no joint eigenbasis for the torus generators".into()));
        }
        let mut rows: Vec<usize> = Vec::new();
        let mut kept: Vec<DVector<f64>> = Vec::new();
        for k in 0..n {
            if rows.len() == r {
                break;
            }
            let mut row = lambda.row(k).transpose();
            let norm0 = row.norm();
            for q in &kept {
                let d = q.dot(&row);
                row.axpy(-d, q, 1.0);
            }
            let norm = row.norm();
            if norm0 > 0.0 && norm > 1e-6 * norm0.max(1e-300) && norm > 1e-9 {
                kept.push(row / norm);
                rows.push(k);
            }
        }
        if rows.len() != r {
            return Err(Error::TorusLog("torus generators are linearly dependent".into()));
        }
        let block = DMatrix::from_fn(r, r, |a, b| lambda[(rows[a], b)]);
        let rows_inv = block.try_inverse().ok_or_else(|| Error::TorusLog("singular eigenvalue block".into()))?;
        Ok(Torus { basis, v, lambda, rows, rows_inv })
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn generator(&self, c: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.n(), self.n());
        for (b, &x) in self.basis.iter().zip(c) {
            out += b * C64::new(x, 0.0);
        }
        out
    }

    /// `exp(Σ c_i h_i)` through the joint eigenbasis.
    pub fn exp(&self, c: &[f64]) -> CMatrix {
        let ph = &self.lambda * DVector::from_column_slice(c);
        let d: Vec<C64> = ph.iter().map(|&p| C64::from_polar(1.0, p)).collect();
        matcore::reassemble(&self.v, &d)
    }

    /// Eigenphases of `d` in the joint eigenbasis, or an error when `d` is not
    /// diagonal there.
    fn phases(&self, d: &CMatrix, tol: f64) -> Result<Vec<f64>> {
        let e = self.v.adjoint() * d * &self.v;
        let mut off = e.clone();
        off.fill_diagonal(C64::new(0.0, 0.0));
        let residual = matcore::max_abs(&off);
        if residual > tol {
            return Err(Error::TorusLog(format!("element is not diagonal in the torus eigenbasis ({residual:.3e})")));
        }
        Ok((0..self.n()).map(|k| e[(k, k)].arg()).collect())
    }

    /// Solve `Λ c ≡ target (mod period)` over integer shifts of the pivot rows,
    /// returning every consistent solution found in the search box.
    fn lifts(&self, target: &[f64], period: f64, box_radius: i64, tol: f64) -> Vec<Vec<f64>> {
        let r = self.rank();
        if r == 0 {
            let consistent = target.iter().all(|t| {
                let m = (t / period).round();
                (t - m * period).abs() < tol
            });
            return if consistent { vec![vec![]] } else { vec![] };
        }
        let width = (2 * box_radius + 1) as usize;
        let total = width.checked_pow(r as u32).unwrap_or(usize::MAX);
        let mut shifts: Vec<Vec<i64>> = Vec::new();
        if total <= MAX_LIFTS {
            for idx in 0..total {
                let mut x = idx;
                let z: Vec<i64> = (0..r)
                    .map(|_| {
                        let d = (x % width) as i64 - box_radius;
                        x /= width;
                        d
                    })
                    .collect();
                shifts.push(z);
            }
        } else {
            shifts.push(vec![0; r]);
            for i in 0..r {
                for s in [-1, 1] {
                    let mut z = vec![0; r];
                    z[i] = s;
                    shifts.push(z);
                }
            }
        }
        let mut out = Vec::new();
        for z in shifts {
            let rhs = DVector::from_fn(r, |a, _| target[self.rows[a]] + period * z[a] as f64);
            let c = &self.rows_inv * rhs;
            let lc = &self.lambda * &c;
            let mut m = vec![0.0; self.n()];
            let mut consistent = true;
            for k in 0..self.n() {
                let diff = lc[k] - target[k];
                m[k] = (diff / period).round();
                if (diff - m[k] * period).abs() > tol {
                    consistent = false;
                    break;
                }
            }
            if !consistent {
                continue;
            }
            // least-squares polish against the chosen branch
            let rhs = DVector::from_fn(self.n(), |k, _| target[k] + m[k] * period);
            let lt = self.lambda.transpose();
            let c = (&lt * &self.lambda).lu().solve(&(&lt * rhs)).unwrap_or(c);
            out.push(c.iter().copied().collect());
        }
        out
    }

    fn spread(&self, c: &[f64]) -> f64 {
        let lc = &self.lambda * DVector::from_column_slice(c);
        lc.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
    }

    /// Coefficients `c` with `exp(Σ c_i h_i) = d`, choosing the lift with the
    /// smallest largest eigenphase.
    pub fn log(&self, d: &CMatrix, tol: f64) -> Result<Vec<f64>> {
        let phases = self.phases(d, tol.max(1e-9) * 100.0)?;
        for radius in [1, 2] {
            let cands = self.lifts(&phases, 2.0 * std::f64::consts::PI, radius, 1e-6);
            let best = cands.into_iter().min_by(|a, b| self.spread(a).partial_cmp(&self.spread(b)).unwrap());
            if let Some(c) = best {
                let residual = matcore::max_abs(&(self.exp(&c) - d));
                if residual <= tol.max(1e-9) * 100.0 {
                    return Ok(c);
                }
            }
        }
        Err(Error::TorusLog("no consistent lift of the eigenphases".into()))
    }

    /// Non-trivial torus elements ε = exp(c) with ε² = 1, smallest first.
    pub fn involutive_elements(&self) -> Vec<Vec<f64>> {
        let zeros = vec![0.0; self.n()];
        let mut cands = self.lifts(&zeros, std::f64::consts::PI, 1, 1e-6);
        cands.retain(|c| self.spread(c) > 1e-6);
        cands.sort_by(|a, b| self.spread(a).partial_cmp(&self.spread(b)).unwrap());
        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut seen: Vec<CMatrix> = Vec::new();
        for c in cands {
            let e = self.exp(&c);
            if matcore::max_abs(&(&e - matcore::identity(self.n()))) < 1e-8 {
                continue;
            }
            if seen.iter().any(|s| matcore::max_abs(&(s - &e)) < 1e-8) {
                continue;
            }
            seen.push(e);
            out.push(c);
        }
        out
    }

    /// Random regular element `Σ g_i h_i`.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let c: Vec<f64> = (0..self.rank()).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        self.generator(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::I;
    use crate::pauli::PauliString;

    fn p(s: &str) -> CMatrix {
        s.parse::<PauliString>().unwrap().matrix() * I
    }

    #[test]
    fn exp_log_round_trip_on_pauli_torus() {
        let t = Torus::new(8, vec![p("XXI"), p("YYI"), p("ZZI"), p("III")]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let c: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let d = t.exp(&c);
            assert!(matcore::max_abs(&(matcore::expm_skew(&t.generator(&c)) - &d)) < 1e-12);
            let back = t.log(&d, 1e-9).unwrap();
            assert!(matcore::max_abs(&(t.exp(&back) - &d)) < 1e-11);
        }
    }

    #[test]
    fn log_of_minus_one_phases() {
        // exp(iπ/2 (XX + ZZ)) has eigenvalues ±1 with phase π ambiguity
        let t = Torus::new(4, vec![p("XX"), p("ZZ")]).unwrap();
        let d = t.exp(&[std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2]);
        let c = t.log(&d, 1e-9).unwrap();
        assert!(matcore::max_abs(&(t.exp(&c) - d)) < 1e-12);
        assert!(t.log(&matcore::identity(4), 1e-9).unwrap().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn log_rejects_elements_outside() {
        let t = Torus::new(2, vec![p("Z")]).unwrap();
        let x = matcore::expm_skew(&(p("X") * C64::new(0.3, 0.0)));
        assert!(matches!(t.log(&x, 1e-9), Err(Error::TorusLog(_))));
        // diagonal but not in exp(span{iZ}): global phase
        let g = matcore::identity(2) * C64::from_polar(1.0, 0.4);
        assert!(t.log(&g, 1e-9).is_err());
    }

    #[test]
    fn involutive_elements_square_to_one() {
        let t = Torus::new(4, vec![p("ZI"), p("IZ")]).unwrap();
        let inv = t.involutive_elements();
        assert!(!inv.is_empty());
        for c in &inv {
            let e = t.exp(c);
            assert!(matcore::max_abs(&(&e * &e - matcore::identity(4))) < 1e-12);
        }
    }

    #[test]
    fn non_commuting_generators_rejected() {
        assert!(Torus::new(2, vec![p("X"), p("Z")]).is_err());
    }
}
