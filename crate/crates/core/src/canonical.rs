//! Kalman analysis of the neutral pair `(A₋₁, B)`, feedback regularization,
//! spectrum assignment, and the Frobenius (block-companion) normal form.
//!
//! Convention: the state change is `z = C w`, so
//! `Â₋₁ = C⁻¹(A₋₁ + BP)C`, `B̂ = C⁻¹ B G`, and the control law reads
//! `u(t) = P ż(t−1) + G v(t)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::json;
use crate::kernel::MatrixKernel;
use crate::linalg::{self, c64, re, CMat, CVec};
use crate::system::NeutralSystem;

/// Default rank tolerance relative to the largest singular value.
pub const RANK_TOL: f64 = 1e-10;

/// Relative residual below which a vector counts as lying in a subspace.
const SPAN_TOL: f64 = 1e-8;

/// Targets closer than this are treated as repeated.
const DISTINCT_TOL: f64 = 1e-9;

/// `μ ∈ σ(A₋₁)` with a unit `y`, `A₋₁* y = μ̄ y`, `B* y = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct PairWitness {
    #[serde(serialize_with = "json::complex")]
    pub mu: c64,
    #[serde(serialize_with = "json::cvec")]
    pub y: CVec,
}

impl PairWitness {
    /// Returns `(‖A* y − μ̄ y‖, ‖B* y‖)`.
    pub fn residuals(&self, a: &CMat, b: &CMat) -> (f64, f64) {
        (
            (a.adjoint() * &self.y - &self.y * self.mu.conj()).norm(),
            (b.adjoint() * &self.y).norm(),
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KalmanReport {
    pub rank: usize,
    /// Per input column, from the crate (column selection) procedure.
    pub controllability_indices: Vec<usize>,
    pub n1: usize,
    pub witness: Option<PairWitness>,
}

impl KalmanReport {
    pub fn controllable(&self, n: usize) -> bool {
        self.rank == n
    }
}

/// Orthonormal bases of `V_k = span{A^j B : j < k}` for `k = 0..=n`, built
/// as `V_{k+1} = span{B, A V_k}` so every step is well scaled.
fn krylov_bases(a: &CMat, b: &CMat, tol: f64) -> Vec<CMat> {
    let n = a.nrows();
    let mut bn = b.clone();
    for mut col in bn.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= re(norm);
        }
    }
    let mut out = vec![CMat::zeros(n, 0)];
    for _ in 0..n {
        let prev = out.last().unwrap();
        let aq = a * prev;
        let mut stacked = CMat::zeros(n, bn.ncols() + aq.ncols());
        stacked.columns_mut(0, bn.ncols()).copy_from(&bn);
        stacked.columns_mut(bn.ncols(), aq.ncols()).copy_from(&aq);
        out.push(linalg::range_basis(&stacked, tol));
    }
    out
}

/// Component of `v` orthogonal to the orthonormal columns of `q`, with one
/// reorthogonalization pass.
fn residual_off(q: &CMat, v: &CVec) -> CVec {
    let mut r = v.clone();
    for _ in 0..2 {
        if q.ncols() > 0 {
            let coef = q.adjoint() * &r;
            r -= q * coef;
        }
    }
    r
}

fn in_span(q: &CMat, v: &CVec) -> bool {
    let nv = v.norm();
    nv == 0.0 || residual_off(q, v).norm() <= SPAN_TOL * nv
}

/// Crate procedure: scan `b_1, …, b_r, A b_1, …` keeping vectors independent
/// of those already kept; input `i` stops at its first dependent power.
fn crate_indices(a: &CMat, b: &CMat) -> Vec<usize> {
    let (n, r) = (a.nrows(), b.ncols());
    let mut basis = CMat::zeros(n, 0);
    let mut indices = vec![0usize; r];
    let mut active = vec![true; r];
    let mut powers: Vec<CVec> = (0..r).map(|i| b.column(i).into_owned()).collect();
    for _level in 0..n {
        for i in 0..r {
            if !active[i] {
                continue;
            }
            let v = &powers[i];
            let res = residual_off(&basis, v);
            if v.norm() > 0.0 && res.norm() > SPAN_TOL * v.norm() {
                let q = &res / re(res.norm());
                let last = basis.ncols();
                basis = basis.insert_column(last, c64::new(0.0, 0.0));
                basis.set_column(last, &q);
                indices[i] += 1;
            } else {
                active[i] = false;
            }
        }
        for (i, p) in powers.iter_mut().enumerate() {
            if active[i] {
                *p = a * &*p;
            }
        }
    }
    indices
}

pub fn kalman_analysis(a: &CMat, b: &CMat, tol: f64) -> Result<KalmanReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("rank tolerance must be positive".into()));
    }
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension("A must be n x n and B must have n rows".into()));
    }
    let bases = krylov_bases(a, b, tol);
    let ctrl = &bases[n];
    let rank = ctrl.ncols();
    let controllability_indices = crate_indices(a, b);
    let n1 = controllability_indices.iter().copied().max().unwrap_or(0);
    let witness = if rank < n { Some(pair_witness(a, ctrl)?) } else { None };
    Ok(KalmanReport {
        rank,
        controllability_indices,
        n1,
        witness,
    })
}

/// Orthonormal complement of the columns of `q`.
fn complement(q: &CMat) -> CMat {
    linalg::null_space(&q.adjoint(), 1e-10, 1.0)
}

fn pair_witness(a: &CMat, ctrl: &CMat) -> Result<PairWitness> {
    let n = a.nrows();
    let w = if ctrl.ncols() == 0 { CMat::identity(n, n) } else { complement(ctrl) };
    // the complement of an A-invariant subspace is A*-invariant
    let m = w.adjoint() * a.adjoint() * &w;
    let mut eig = linalg::eigenvalues(&m);
    eig.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    let nu = *eig.first().ok_or_else(|| Error::Numerical("empty uncontrollable subspace".into()))?;
    let k = m.nrows();
    let (_, _, _, v) = linalg::smallest_singular(&(m - CMat::identity(k, k) * nu));
    let y = linalg::normalize_phase(&(&w * v));
    Ok(PairWitness { mu: nu.conj(), y })
}

/// Feedback `P` making `A + BP` nonsingular (zero when `A` already is).
pub fn regularize_neutral(a: &CMat, b: &CMat) -> Result<CMat> {
    let (n, r) = (a.nrows(), b.ncols());
    let sv = linalg::singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax > 0.0 && sv.last().copied().unwrap_or(0.0) > RANK_TOL * smax {
        return Ok(CMat::zeros(r, n));
    }
    let bases = krylov_bases(a, b, RANK_TOL);
    let qc = bases[n].clone();
    let rc = qc.ncols();
    let qu = if rc < n { complement(&qc) } else { CMat::zeros(n, 0) };
    if rc < n {
        // Kalman form: the uncontrollable block must be nonsingular
        let a22 = qu.adjoint() * a * &qu;
        let sv22 = linalg::singular_values(&a22);
        let scale = smax.max(1.0);
        if sv22.last().copied().unwrap_or(0.0) <= RANK_TOL * scale {
            return Err(Error::UncontrollableZero);
        }
    }
    let a11 = qc.adjoint() * a * &qc;
    let b1 = qc.adjoint() * b;
    let targets: Vec<c64> = (0..rc).map(|i| re(2.0 + i as f64)).collect();
    let p1 = frobenius_with(&a11, &b1, Some(&targets))?.p;
    Ok(p1 * qc.adjoint())
}

/// Feedback `P` with `σ(A + BP) = targets`.
pub fn place_spectrum(a: &CMat, b: &CMat, targets: &[c64]) -> Result<CMat> {
    Ok(frobenius_with(a, b, Some(targets))?.p)
}

/// Feedback, similarity and input change reaching Frobenius form.
#[derive(Clone, Debug, Serialize)]
pub struct CanonicalTransform {
    #[serde(rename = "P", serialize_with = "json::cmat")]
    pub p: CMat,
    #[serde(rename = "C", serialize_with = "json::cmat")]
    pub c: CMat,
    #[serde(skip)]
    pub c_inv: CMat,
    /// Input change `u = … + G v`; identity unless the input columns need an
    /// adapted basis.
    #[serde(rename = "G", serialize_with = "json::cmat")]
    pub g: CMat,
    #[serde(rename = "A_hat", serialize_with = "json::cmat")]
    pub a_hat: CMat,
    #[serde(rename = "B_hat", serialize_with = "json::cmat")]
    pub b_hat: CMat,
    pub block_sizes: Vec<usize>,
    #[serde(serialize_with = "json::complex_list")]
    pub assigned_spectrum: Vec<c64>,
}

impl CanonicalTransform {
    /// General feedback-similarity transform (not necessarily Frobenius).
    pub fn from_parts(a: &CMat, b: &CMat, p: CMat, c: CMat, g: CMat) -> Result<Self> {
        let c_inv = c
            .clone()
            .try_inverse()
            .filter(|_| linalg::cond(&c) < 1e12)
            .ok_or_else(|| Error::Numerical("similarity C is singular".into()))?;
        if g.clone().try_inverse().is_none() {
            return Err(Error::Numerical("input change G is singular".into()));
        }
        let a_hat = &c_inv * (a + b * &p) * &c;
        let b_hat = &c_inv * b * &g;
        let assigned_spectrum = linalg::eigenvalues(&a_hat);
        Ok(CanonicalTransform {
            p,
            c,
            c_inv,
            g,
            a_hat,
            b_hat,
            block_sizes: Vec::new(),
            assigned_spectrum,
        })
    }

    /// Transform undoing `self`: `P' = −G⁻¹PC`, `C' = C⁻¹`, `G' = G⁻¹`.
    pub fn inverse(&self) -> CanonicalTransform {
        let g_inv = self.g.clone().try_inverse().expect("validated G");
        let p = -(&g_inv * &self.p * &self.c);
        let a_hat = &self.c * &self.a_hat * &self.c_inv - &self.c * &self.b_hat * &g_inv * &self.p;
        let b_hat = &self.c * &self.b_hat * &g_inv;
        CanonicalTransform {
            p,
            c: self.c_inv.clone(),
            c_inv: self.c.clone(),
            g: g_inv,
            assigned_spectrum: linalg::eigenvalues(&a_hat),
            a_hat,
            b_hat,
            block_sizes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Control law `u(t) = P ż(t−1) + G v(t)` linking a transformed system to
/// the original.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlLaw {
    pub p: CMat,
    pub g: CMat,
    /// `z = C w`.
    pub c: CMat,
}

/// Transformed system `(C⁻¹(A₋₁+BP)C, C⁻¹A₂C, C⁻¹A₃C, C⁻¹BG)`.
pub fn apply_transform(sys: &NeutralSystem, t: &CanonicalTransform) -> Result<(NeutralSystem, ControlLaw)> {
    let n = sys.n();
    if t.c.nrows() != n || t.p.nrows() != sys.r() || t.p.ncols() != n {
        return Err(Error::Dimension("transform does not match the system".into()));
    }
    let conj = |k: &MatrixKernel| k.map_coeffs(|m| &t.c_inv * m * &t.c);
    let a_hat = &t.c_inv * (&sys.a_minus1 + &sys.b * &t.p) * &t.c;
    let b_hat = &t.c_inv * &sys.b * &t.g;
    let mut out = NeutralSystem::new(a_hat, b_hat, conj(&sys.a2), conj(&sys.a3))?;
    out.delay_h = sys.delay_h;
    Ok((
        out,
        ControlLaw {
            p: t.p.clone(),
            g: t.g.clone(),
            c: t.c.clone(),
        },
    ))
}

/// Frobenius form keeping each block's natural characteristic polynomial;
/// only the coupling between blocks is removed by feedback.
pub fn to_frobenius(a: &CMat, b: &CMat) -> Result<CanonicalTransform> {
    frobenius_with(a, b, None)
}

/// Frobenius form with `σ(Â₋₁) = targets`, assigned to blocks in order.
pub fn to_frobenius_with_spectrum(a: &CMat, b: &CMat, targets: &[c64]) -> Result<CanonicalTransform> {
    frobenius_with(a, b, Some(targets))
}

fn check_targets(targets: &[c64], n: usize) -> Result<()> {
    if targets.len() != n {
        return Err(Error::InvalidArgument(format!("expected {n} target eigenvalues, got {}", targets.len())));
    }
    for (i, t) in targets.iter().enumerate() {
        if !(t.re.is_finite() && t.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite target eigenvalue".into()));
        }
        if t.norm() <= DISTINCT_TOL || (t - re(1.0)).norm() <= DISTINCT_TOL {
            return Err(Error::InvalidArgument(format!("target eigenvalue {t} is forbidden (0 and 1 are excluded)")));
        }
        if targets[..i].iter().any(|s| (s - t).norm() <= DISTINCT_TOL * (1.0 + t.norm())) {
            return Err(Error::RepeatedEigenvalue(format!("{t}")));
        }
    }
    Ok(())
}

struct Chains {
    g: CMat,
    sizes: Vec<usize>,
    c: CMat,
    /// `C⁻¹ A C = N + E R`.
    r: CMat,
}

/// Index of input `i`'s vectors: `min{k : A^k b ∈ V_k}`.
fn own_index(a: &CMat, b: &CVec, bases: &[CMat]) -> usize {
    let mut v = b.clone();
    for (k, q) in bases.iter().enumerate().skip(1) {
        v = a * v;
        if in_span(q, &v) {
            return k;
        }
    }
    bases.len()
}

/// Input basis adapted to `U_k = {u : A^k B u ∈ V_k}`, ordered by index.
fn adapted_inputs(a: &CMat, b: &CMat, bases: &[CMat]) -> (CMat, Vec<usize>) {
    let (n, r) = (a.nrows(), b.ncols());
    let mut chosen = CMat::zeros(r, 0);
    let mut sizes = Vec::new();
    let mut akb = b.clone();
    for k in 1..=n {
        akb = a * akb;
        let proj = CMat::from_columns(
            &(0..r).map(|j| residual_off(&bases[k], &akb.column(j).into_owned())).collect::<Vec<_>>(),
        );
        let scale = akb.norm().max(f64::MIN_POSITIVE);
        let kernel = linalg::null_space(&proj, SPAN_TOL, scale);
        for j in 0..kernel.ncols() {
            let v = residual_off(&chosen, &kernel.column(j).into_owned());
            if v.norm() > 1e-6 {
                let v = &v / re(v.norm());
                let last = chosen.ncols();
                chosen = chosen.insert_column(last, c64::new(0.0, 0.0));
                chosen.set_column(last, &v);
                sizes.push(k);
            }
        }
        if chosen.ncols() == r {
            break;
        }
    }
    (chosen, sizes)
}

fn chains(a: &CMat, b: &CMat) -> Result<Chains> {
    let (n, r) = (a.nrows(), b.ncols());
    let bases = krylov_bases(a, b, RANK_TOL);
    if bases[n].ncols() < n {
        return Err(Error::Uncontrollable { rank: bases[n].ncols(), n });
    }
    let own: Vec<usize> = (0..r).map(|i| own_index(a, &b.column(i).into_owned(), &bases)).collect();
    let (g, sizes) = if own.iter().sum::<usize>() == n {
        (CMat::identity(r, r), own)
    } else {
        adapted_inputs(a, b, &bases)
    };
    if sizes.len() != r || sizes.iter().sum::<usize>() != n {
        return Err(Error::Numerical("controllability indices are inconsistent with the rank".into()));
    }
    let bt = b * &g;
    // powers[i][j] = A^j b̃_i for j <= s_i
    let powers: Vec<Vec<CVec>> = (0..r)
        .map(|i| {
            let mut v = vec![bt.column(i).into_owned()];
            for _ in 0..sizes[i] {
                let next = a * v.last().unwrap();
                v.push(next);
            }
            v
        })
        .collect();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let mut c = CMat::zeros(n, n);
    let mut rmat = CMat::zeros(r, n);
    for i in 0..r {
        let s = sizes[i];
        // A^s b̃_i over {A^j b̃_l : j < min(s, s_l)}
        let mut labels = Vec::new();
        let mut cols = Vec::new();
        for j in 0..s {
            for l in 0..r {
                if j < sizes[l] {
                    labels.push((j, l));
                    cols.push(powers[l][j].clone());
                }
            }
        }
        let basis = CMat::from_columns(&cols);
        let target = &powers[i][s];
        let coef = basis
            .clone()
            .svd(true, true)
            .solve(target, 1e-13)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let fit = (&basis * &coef - target).norm();
        if fit > 1e-7 * target.norm().max(1.0) {
            return Err(Error::Numerical(format!("chain decomposition failed (residual {fit:.2e})")));
        }
        // gamma[j][l]
        let mut gamma = vec![CVec::zeros(r); s];
        for (idx, &(j, l)) in labels.iter().enumerate() {
            gamma[j][l] = coef[idx];
        }
        // c_{i,s−l} = A^l b̃_i − Σ_{j<l} A^j B̃ γ_{j+s−l}
        for l in 0..s {
            let mut v = powers[i][l].clone();
            for j in 0..l {
                for m in 0..r {
                    if j < sizes[m] {
                        v -= &powers[m][j] * gamma[j + s - l][m];
                    }
                }
            }
            c.set_column(offsets[i] + s - l - 1, &v);
        }
        for p in 0..s {
            for l in 0..r {
                rmat[(l, offsets[i] + p)] = gamma[p][l];
            }
        }
    }
    Ok(Chains { g, sizes, c, r: rmat })
}

fn frobenius_with(a: &CMat, b: &CMat, targets: Option<&[c64]>) -> Result<CanonicalTransform> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension("A must be n x n and B must have n rows".into()));
    }
    if let Some(t) = targets {
        check_targets(t, n)?;
    }
    let ch = chains(a, b)?;
    let r = b.ncols();
    let offsets: Vec<usize> = ch
        .sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let mut k = CMat::zeros(r, n);
    let mut used = 0;
    for i in 0..r {
        let (o, s) = (offsets[i], ch.sizes[i]);
        match targets {
            None => {
                for p in 0..s {
                    k[(i, o + p)] = ch.r[(i, o + p)];
                }
            }
            Some(t) => {
                let coeffs = linalg::monic_from_roots(&t[used..used + s]);
                used += s;
                for p in 0..s {
                    k[(i, o + p)] = -coeffs[p];
                }
            }
        }
    }
    let c_inv = ch
        .c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("chain basis is singular".into()))?;
    let p = &ch.g * (&k - &ch.r) * &c_inv;
    let mut t = CanonicalTransform::from_parts(a, b, p, ch.c, ch.g)?;
    // exact structure: N + E K and E
    let mut a_hat = CMat::zeros(n, n);
    let mut b_hat = CMat::zeros(n, r);
    for i in 0..r {
        let (o, s) = (offsets[i], ch.sizes[i]);
        for p in 0..s.saturating_sub(1) {
            a_hat[(o + p, o + p + 1)] = re(1.0);
        }
        for q in 0..n {
            a_hat[(o + s - 1, q)] = k[(i, q)];
        }
        b_hat[(o + s - 1, i)] = re(1.0);
    }
    let scale = 1.0 + linalg::max_abs(&a_hat) + linalg::max_abs(a);
    let resid = linalg::max_abs(&(&t.a_hat - &a_hat)).max(linalg::max_abs(&(&t.b_hat - &b_hat)));
    if resid > 1e-6 * scale * linalg::cond(&t.c) {
        return Err(Error::Numerical(format!("Frobenius reduction residual {resid:.2e}")));
    }
    t.a_hat = a_hat;
    t.b_hat = b_hat;
    t.block_sizes = ch.sizes;
    t.assigned_spectrum = match targets {
        Some(v) => v.to_vec(),
        None => linalg::eigenvalues(&t.a_hat),
    };
    Ok(t)
}

/// True when `μ` are pairwise distinct, real, and avoid `{0, 1}`.
pub fn admissible_spectrum(mu: &[c64]) -> bool {
    mu.iter().enumerate().all(|(i, m)| {
        m.im.abs() <= 1e-12 * (1.0 + m.norm())
            && m.norm() > 1e-8
            && (m - re(1.0)).norm() > 1e-8
            && mu[..i].iter().all(|x| (x - m).norm() > 1e-6 * (1.0 + m.norm()))
    })
}

/// Default targets `{2, 3, …, n+1}`.
pub fn default_targets(n: usize) -> Vec<c64> {
    (0..n).map(|i| re(2.0 + i as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_mat;

    fn example() -> (CMat, CMat) {
        (
            real_mat(3, 3, &[-4.0, 6.0, -4.0, 0.0, 2.0, -2.0, -3.0, 3.0, 2.0]),
            real_mat(3, 2, &[1.0, 1.0, 1.0, 0.0, -1.0, 1.0]),
        )
    }

    #[test]
    fn example_indices() {
        let (a, b) = example();
        let k = kalman_analysis(&a, &b, RANK_TOL).unwrap();
        assert_eq!(k.rank, 3);
        assert_eq!(k.controllability_indices, vec![1, 2]);
        assert_eq!(k.n1, 2);
        assert!(k.witness.is_none());
    }

    #[test]
    fn example_closed_loop_reduces_with_printed_similarity() {
        let (a, b) = example();
        let p = real_mat(2, 3, &[1.0, -1.0, 2.0, 3.0, -2.0, 3.0]);
        let t = to_frobenius(&(&a + &b * &p), &b).unwrap();
        let c = real_mat(3, 3, &[1.0, -1.0, 1.0, 1.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
        assert!(t.p.norm() < 1e-12);
        assert!((&t.c - c).norm() < 1e-12);
        assert_eq!(t.block_sizes, vec![1, 2]);
        let a_hat = real_mat(3, 3, &[2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 3.0, 2.0]);
        assert!((&t.a_hat - a_hat).norm() < 1e-12);
    }

    #[test]
    fn decoupled_uncontrollable_witness() {
        let a = CMat::identity(2, 2);
        let b = real_mat(2, 1, &[1.0, 0.0]);
        let k = kalman_analysis(&a, &b, RANK_TOL).unwrap();
        assert_eq!(k.rank, 1);
        let w = k.witness.unwrap();
        assert!((w.mu - re(1.0)).norm() < 1e-12);
        assert!((&w.y - linalg::real_vec(&[0.0, 1.0])).norm() < 1e-12);
        assert!(kalman_analysis(&a, &b, 0.0).is_err());
    }

    #[test]
    fn regularize_cases() {
        let a = real_mat(2, 2, &[0.0, 0.0, 0.0, 2.0]);
        let p = regularize_neutral(&a, &real_mat(2, 1, &[1.0, 1.0])).unwrap();
        let det = (&a + real_mat(2, 1, &[1.0, 1.0]) * &p).determinant();
        assert!(det.norm() > 1e-3, "det {det}");
        assert!(matches!(
            regularize_neutral(&a, &real_mat(2, 1, &[0.0, 1.0])),
            Err(Error::UncontrollableZero)
        ));
        let p0 = regularize_neutral(&real_mat(1, 1, &[0.5]), &real_mat(1, 1, &[1.0])).unwrap();
        assert_eq!(p0, CMat::zeros(1, 1));
    }

    #[test]
    fn scalar_assignment() {
        let p = place_spectrum(&real_mat(1, 1, &[0.5]), &real_mat(1, 1, &[1.0]), &[re(2.0)]).unwrap();
        assert!((p[(0, 0)] - re(1.5)).norm() < 1e-14);
    }

    #[test]
    fn companion_input_is_fixed_point() {
        let a = real_mat(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 6.0, -11.0, 6.0]);
        let b = real_mat(3, 1, &[0.0, 0.0, 1.0]);
        let t = to_frobenius(&a, &b).unwrap();
        assert!((&t.c - CMat::identity(3, 3)).norm() < 1e-12);
        assert!(t.p.norm() < 1e-12);
        assert!((&t.a_hat - &a).norm() < 1e-12);
    }

    #[test]
    fn forbidden_and_repeated_targets() {
        let (a, b) = example();
        assert!(place_spectrum(&a, &b, &[re(2.0), re(1.0), re(3.0)]).is_err());
        assert!(place_spectrum(&a, &b, &[re(2.0), re(2.0), re(3.0)]).is_err());
        assert!(place_spectrum(&a, &b, &[re(2.0), re(3.0)]).is_err());
    }

    #[test]
    fn adapted_input_basis_when_columns_mix() {
        // b_2 = e_1 reaches V_1 only after combining with b_1
        let a = real_mat(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 3.0]);
        let b = real_mat(3, 2, &[0.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let t = to_frobenius_with_spectrum(&a, &b, &[re(2.0), re(-3.0), re(4.0)]).unwrap();
        let lhs = (&a + &b * &t.p) * &t.c;
        assert!((lhs - &t.c * &t.a_hat).norm() < 1e-9);
        assert!((&b * &t.g - &t.c * &t.b_hat).norm() < 1e-9);
        assert!(linalg::multiset_distance(&linalg::eigenvalues(&t.a_hat), &t.assigned_spectrum) < 1e-8);
    }

    #[test]
    fn inverse_round_trip() {
        let (a, b) = example();
        let t = to_frobenius_with_spectrum(&a, &b, &[re(2.0), re(3.0), re(-1.0)]).unwrap();
        let sys = NeutralSystem::new(a.clone(), b.clone(), MatrixKernel::zero(3), MatrixKernel::constant(real_mat(3, 3, &[0.1, 0.0, 0.2, 0.0, -0.1, 0.0, 0.3, 0.0, 0.0]))).unwrap();
        let (hat, _) = apply_transform(&sys, &t).unwrap();
        let (back, _) = apply_transform(&hat, &t.inverse()).unwrap();
        assert!((&back.a_minus1 - &a).norm() < 1e-12);
        assert!((&back.b - &b).norm() < 1e-12);
        let k0 = back.a3.laplace(re(0.3)) - sys.a3.laplace(re(0.3));
        assert!(k0.norm() < 1e-12);
    }
}
