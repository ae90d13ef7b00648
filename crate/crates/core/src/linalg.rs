//! Dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

#[allow(non_camel_case_types)]
pub type c64 = Complex<f64>;
pub type CMat = DMatrix<c64>;
pub type CVec = DVector<c64>;

pub const I: c64 = Complex { re: 0.0, im: 1.0 };

pub fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

/// Builds a complex matrix from real row-major data.
pub fn real_mat(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| re(x)))
}

pub fn real_vec(data: &[f64]) -> CVec {
    CVec::from_iterator(data.len(), data.iter().map(|&x| re(x)))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Numerical rank: singular values above `tol * sigma_max`.
pub fn rank(m: &CMat, tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        None => 0,
        Some(&smax) if smax == 0.0 => 0,
        Some(&smax) => sv.iter().filter(|&&s| s > tol * smax).count(),
    }
}

/// 2-norm condition number.
pub fn cond(m: &CMat) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&a), Some(&b)) if b > 0.0 => a / b,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis of the column space, rank decided at `tol * sigma_max`
/// (computed from right singular vectors of `mᴴ`).
pub fn range_basis(m: &CMat, tol: f64) -> CMat {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return CMat::zeros(n, 0);
    }
    let (sv, v) = full_right_svd(&m.adjoint());
    let smax = sv.last().copied().unwrap_or(0.0);
    let keep = sv.iter().filter(|&&s| smax > 0.0 && s > tol * smax).count();
    // ascending order: the kept vectors are the last `keep` columns
    let mut out = CMat::zeros(n, keep);
    for j in 0..keep {
        out.set_column(j, &v.column(n - 1 - j));
    }
    out
}

/// Right singular vectors of `m` (square-padded so the full V is available),
/// paired with singular values; ascending order of singular value.
fn full_right_svd(m: &CMat) -> (Vec<f64>, CMat) {
    let cols = m.ncols();
    let rows = m.nrows().max(cols);
    let mut padded = CMat::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut idx: Vec<usize> = (0..cols).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let sv = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = CMat::zeros(cols, cols);
    for (j, &i) in idx.iter().enumerate() {
        let row = vt.row(i).adjoint();
        v.set_column(j, &row);
    }
    (sv, v)
}

/// Orthonormal basis of the right null space: singular values at or below
/// `rel_tol * max(sigma_max, scale)`.
pub fn null_space(m: &CMat, rel_tol: f64, scale: f64) -> CMat {
    let cols = m.ncols();
    if cols == 0 {
        return CMat::zeros(0, 0);
    }
    let (sv, v) = full_right_svd(m);
    let smax = sv.last().copied().unwrap_or(0.0).max(scale);
    let k = sv.iter().take_while(|&&s| s <= rel_tol * smax).count();
    v.columns(0, k).into_owned()
}

/// Right singular vector for the smallest singular value, with that value
/// and the next one (infinite for a single column).
fn smallest_right(m: &CMat) -> (f64, f64, CVec) {
    let svd = m.clone().svd(false, true);
    let k = svd.singular_values.len();
    let vt = svd.v_t.expect("V^T");
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let next = if k > 1 {
        svd.singular_values[idx[1]]
    } else {
        f64::INFINITY
    };
    (svd.singular_values[idx[0]], next, vt.row(idx[0]).adjoint())
}

/// Smallest singular triple of a square matrix: returns
/// (sigma_min, sigma_next, u, v) with `m v ≈ sigma_min u` and
/// `mᴴ u ≈ sigma_min v`. The left vector is taken as the right singular
/// vector of `mᴴ`; the U factor of the complex SVD is not accurate enough
/// near a zero singular value.
pub fn smallest_singular(m: &CMat) -> (f64, f64, CVec, CVec) {
    let (s, next, v) = smallest_right(m);
    let (_, _, u) = smallest_right(&m.adjoint());
    (s, next, u, v)
}

/// Unit vector whose largest-magnitude entry is real and positive.
pub fn normalize_phase(v: &CVec) -> CVec {
    let norm = v.norm();
    if norm == 0.0 {
        return v.clone();
    }
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        // first index wins among near-ties so the choice is reproducible
        if z.norm() > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = z.norm();
        }
    }
    let phase = v[best] / v[best].norm();
    v.map(|z| z / (phase * norm))
}

/// Eigenvalues via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<c64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.clone()
        .schur()
        .eigenvalues()
        .map(|e| e.iter().copied().collect())
        .unwrap_or_default()
}

/// Monic polynomial coefficients `c_0..c_{n-1}` of `prod (x - r)`,
/// i.e. `x^n + c_{n-1} x^{n-1} + ... + c_0`.
pub fn monic_from_roots(roots: &[c64]) -> Vec<c64> {
    let mut p = vec![re(1.0)];
    for &r in roots {
        let mut next = vec![c64::new(0.0, 0.0); p.len() + 1];
        for (i, &c) in p.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        p = next;
    }
    p.pop();
    p
}

/// Greedy matching distance between two multisets of complex numbers.
pub fn multiset_distance(a: &[c64], b: &[c64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = f64::INFINITY;
        let mut bi = 0;
        for (j, y) in b.iter().enumerate() {
            if !used[j] && (x - y).norm() < best {
                best = (x - y).norm();
                bi = j;
            }
        }
        used[bi] = true;
        worst = worst.max(best);
    }
    worst
}
