//! Piecewise-polynomial matrix kernels on [-1, 0] and their exponential moments.

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};

/// Highest polynomial degree accepted per piece.
pub const MAX_DEGREE: usize = 8;

/// Breakpoint matching tolerance for the partition check.
const PARTITION_TOL: f64 = 1e-12;

/// Below this value of `|λ| * half_length` the moments are summed as a
/// Taylor series; above it the integration-by-parts recurrence is stable.
const SERIES_SWITCH: f64 = 4.0;

/// One polynomial piece: `K(s) = Σ_j coeffs[j] s^j` for `s ∈ [a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelPiece {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<CMat>,
}

impl KernelPiece {
    pub fn eval(&self, s: f64, n: usize) -> CMat {
        let mut acc = CMat::zeros(n, n);
        // Horner in s
        for c in self.coeffs.iter().rev() {
            acc = acc * c64::new(s, 0.0) + c;
        }
        acc
    }

    fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// Matrix-valued kernel on [-1, 0] given by polynomial pieces. An empty piece
/// list is the zero kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixKernel {
    n: usize,
    pieces: Vec<KernelPiece>,
}

impl MatrixKernel {
    pub fn zero(n: usize) -> Self {
        MatrixKernel { n, pieces: Vec::new() }
    }

    /// Constant kernel `K(s) = m` on [-1, 0].
    pub fn constant(m: CMat) -> Self {
        let n = m.nrows();
        MatrixKernel {
            n,
            pieces: vec![KernelPiece {
                a: -1.0,
                b: 0.0,
                coeffs: vec![m],
            }],
        }
    }

    /// Validates and sorts the pieces. `path` prefixes error messages.
    pub fn new(n: usize, mut pieces: Vec<KernelPiece>, path: &str) -> Result<Self> {
        for (i, p) in pieces.iter().enumerate() {
            if !(p.a < p.b) {
                return Err(Error::schema(
                    format!("{path}[{i}].interval"),
                    "interval must satisfy a < b",
                ));
            }
            if p.coeffs.is_empty() {
                return Err(Error::schema(format!("{path}[{i}].coeffs"), "no coefficients"));
            }
            if p.degree() > MAX_DEGREE {
                return Err(Error::schema(
                    format!("{path}[{i}].coeffs"),
                    format!("degree {} exceeds {MAX_DEGREE}", p.degree()),
                ));
            }
            for (j, c) in p.coeffs.iter().enumerate() {
                if c.nrows() != n || c.ncols() != n {
                    return Err(Error::schema(
                        format!("{path}[{i}].coeffs[{j}]"),
                        format!("expected {n}x{n}, got {}x{}", c.nrows(), c.ncols()),
                    ));
                }
            }
        }
        if pieces.is_empty() {
            return Ok(MatrixKernel::zero(n));
        }
        pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
        if (pieces[0].a + 1.0).abs() > PARTITION_TOL {
            return Err(Error::schema(path, "kernel gap: pieces must start at -1"));
        }
        for w in pieces.windows(2) {
            let (end, start) = (w[0].b, w[1].a);
            if start < end - PARTITION_TOL {
                return Err(Error::schema(
                    path,
                    format!("overlapping kernel intervals at {start} < {end}"),
                ));
            }
            if start > end + PARTITION_TOL {
                return Err(Error::schema(
                    path,
                    format!("kernel gap between {end} and {start}"),
                ));
            }
        }
        if pieces.last().map_or(true, |p| p.b.abs() > PARTITION_TOL) {
            return Err(Error::schema(path, "kernel gap: pieces must end at 0"));
        }
        // snap breakpoints exactly
        pieces[0].a = -1.0;
        let last = pieces.len() - 1;
        pieces[last].b = 0.0;
        for i in 1..pieces.len() {
            pieces[i].a = pieces[i - 1].b;
        }
        Ok(MatrixKernel { n, pieces })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pieces(&self) -> &[KernelPiece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| p.coeffs.iter().all(|c| c.iter().all(|z| z.norm() == 0.0)))
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(KernelPiece::degree).max().unwrap_or(0)
    }

    /// Index of the piece used on the cell `[lo, hi]` (chosen by the midpoint).
    pub fn piece_for_cell(&self, lo: f64, hi: f64) -> Option<usize> {
        if self.pieces.is_empty() {
            return None;
        }
        let mid = 0.5 * (lo + hi);
        Some(
            self.pieces
                .iter()
                .position(|p| mid >= p.a && mid <= p.b)
                .unwrap_or(self.pieces.len() - 1),
        )
    }

    /// Value at `s`; at a breakpoint the piece on the right is used.
    pub fn eval(&self, s: f64) -> CMat {
        match self.pieces.iter().rposition(|p| s >= p.a - PARTITION_TOL) {
            None if self.pieces.is_empty() => CMat::zeros(self.n, self.n),
            None => self.pieces[0].eval(s, self.n),
            Some(i) => self.pieces[i].eval(s, self.n),
        }
    }

    /// Value at `s` using a given piece's polynomial (for one-sided limits).
    pub fn eval_piece(&self, piece: Option<usize>, s: f64) -> CMat {
        match piece {
            None => CMat::zeros(self.n, self.n),
            Some(i) => self.pieces[i].eval(s, self.n),
        }
    }

    /// `∫_lo^hi s^extra e^{λ s} K(s) ds` in closed form, `-1 <= lo <= hi <= 0`.
    pub fn weighted_integral(&self, lambda: c64, lo: f64, hi: f64, extra: usize) -> CMat {
        let mut acc = CMat::zeros(self.n, self.n);
        for p in &self.pieces {
            let a = p.a.max(lo);
            let b = p.b.min(hi);
            if b <= a {
                continue;
            }
            let m = exp_poly_moments(lambda, a, b, p.degree() + extra);
            for (j, c) in p.coeffs.iter().enumerate() {
                acc += c * m[j + extra];
            }
        }
        acc
    }

    /// Laplace-type transform `∫_{-1}^0 e^{λ s} K(s) ds`.
    pub fn laplace(&self, lambda: c64) -> CMat {
        self.weighted_integral(lambda, -1.0, 0.0, 0)
    }

    /// `d/dλ` of [`laplace`](Self::laplace): `∫ s e^{λ s} K(s) ds`.
    pub fn laplace_derivative(&self, lambda: c64) -> CMat {
        self.weighted_integral(lambda, -1.0, 0.0, 1)
    }

    /// Applies `f` to every coefficient matrix (e.g. a similarity transform).
    pub fn map_coeffs(&self, f: impl Fn(&CMat) -> CMat) -> MatrixKernel {
        let pieces: Vec<KernelPiece> = self
            .pieces
            .iter()
            .map(|p| KernelPiece {
                a: p.a,
                b: p.b,
                coeffs: p.coeffs.iter().map(&f).collect(),
            })
            .collect();
        let n = pieces
            .first()
            .and_then(|p| p.coeffs.first())
            .map_or(self.n, |c| c.nrows());
        MatrixKernel { n, pieces }
    }

    /// Rescales the argument: returns `s ↦ factor * K(h s)` for a kernel
    /// originally defined on `[-h, 0]`.
    pub(crate) fn rescaled(pieces: Vec<KernelPiece>, h: f64, factor: f64) -> Vec<KernelPiece> {
        pieces
            .into_iter()
            .map(|p| KernelPiece {
                a: p.a / h,
                b: p.b / h,
                coeffs: p
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * c64::new(factor * h.powi(j as i32), 0.0))
                    .collect(),
            })
            .collect()
    }
}

/// `∫_a^b s^j e^{λ s} ds` for `j = 0..=deg`.
///
/// The interval is recentred at its midpoint `c` with half-length `h`; the
/// centred moments are summed by Taylor series when `|λ h|` is small and by
/// the integration-by-parts recurrence otherwise, then mapped back with the
/// binomial expansion of `(c + σ)^j`.
pub fn exp_poly_moments(lambda: c64, a: f64, b: f64, deg: usize) -> Vec<c64> {
    let zero = c64::new(0.0, 0.0);
    if b <= a {
        return vec![zero; deg + 1];
    }
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let centred = centred_moments(lambda, h, deg);
    let scale = (lambda * c).exp();
    let mut out = vec![zero; deg + 1];
    let mut binom = vec![1.0f64; deg + 1];
    for j in 0..=deg {
        if j > 0 {
            for i in (1..j).rev() {
                binom[i] += binom[i - 1];
            }
            binom[j] = 1.0;
        }
        let mut acc = zero;
        for i in 0..=j {
            acc += centred[i] * (binom[i] * c.powi((j - i) as i32));
        }
        out[j] = acc * scale;
    }
    out
}

/// `J_i = ∫_{-h}^{h} σ^i e^{λ σ} dσ`.
fn centred_moments(lambda: c64, h: f64, deg: usize) -> Vec<c64> {
    let zero = c64::new(0.0, 0.0);
    let mut out = vec![zero; deg + 1];
    if (lambda * h).norm() <= SERIES_SWITCH {
        for (i, slot) in out.iter_mut().enumerate() {
            // Σ_m λ^m / m! * ∫ σ^{i+m}; odd total powers vanish
            let mut term = c64::new(1.0, 0.0); // λ^m / m!
            let mut acc = zero;
            for m in 0..120usize {
                if m > 0 {
                    term *= lambda / m as f64;
                }
                let p = i + m;
                if p % 2 == 0 {
                    let contrib = term * (2.0 * h.powi(p as i32 + 1) / (p as f64 + 1.0));
                    acc += contrib;
                    if m > 8 && contrib.norm() <= 1e-18 * acc.norm().max(f64::MIN_POSITIVE) {
                        break;
                    }
                }
            }
            *slot = acc;
        }
    } else {
        let ep = (lambda * h).exp();
        let em = (-lambda * h).exp();
        out[0] = (ep - em) / lambda;
        for i in 1..=deg {
            let hp = h.powi(i as i32);
            let hm = (-h).powi(i as i32);
            out[i] = (ep * hp - em * hm) / lambda - out[i - 1] * (i as f64) / lambda;
        }
    }
    out
}
