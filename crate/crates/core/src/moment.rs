//! Truncated moment problem
//!
//! ```text
//! s_i = w_i ⟨x_T, ψ_i⟩ = Σ_d ∫₀ᵀ e^{λ_i t} q_i^d ũ_d(t) dt,   q_i^d = w_i ⟨b_d, ψ_i⟩
//! ```
//!
//! over the rows of a computed spectrum, its Gram matrix, and the least-norm
//! solution `ũ_d(t) = Σ_j c_j conj(q_j^d) e^{λ̄_j t}`. The moment variable is
//! the time-reversed control: `x_T = ∫₀ᵀ e^{𝒜t} ℬ ũ(t) dt` is reached by
//! applying `u(t) = ũ(T − t)` from the zero state.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{c64, CMat, CVec};
use crate::spectral::{EigenTriple, ExcludedRoot, Spectrum};
use crate::state::M2State;
use crate::system::NeutralSystem;

/// Default tolerance for the domain condition of targets.
pub const DOMAIN_TOL: f64 = 1e-8;

/// Negative Gram eigenvalues beyond this fraction of the largest one are
/// reported as an indefinite Gram matrix.
const INDEFINITE_TOL: f64 = 1e-8;

/// Relative eigenvalue floor of the fallback solve.
const FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub m: usize,
    pub k: i64,
    #[serde(serialize_with = "json::complex")]
    pub lambda: c64,
    #[serde(serialize_with = "json::cvec")]
    pub q: CVec,
    #[serde(serialize_with = "json::complex")]
    pub s: c64,
}

impl MomentRow {
    pub fn from_triple(t: &EigenTriple, b: &CMat, s: c64) -> Self {
        MomentRow {
            m: t.m,
            k: t.k,
            lambda: t.lambda,
            q: t.moment_row(b),
            s,
        }
    }
}

/// Partial sums `Σ_{|k| <= K} |s_k|²` (exceptional rows count at `K = 0`).
#[derive(Clone, Debug, Serialize)]
pub struct C1Point {
    pub k: usize,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetMoments {
    #[serde(serialize_with = "json::complex_list")]
    pub s: Vec<c64>,
    pub domain_residual: f64,
    pub c1: Vec<C1Point>,
}

/// `s_i = w_i ⟨x_T, ψ_i⟩` for every triple; refuses targets outside the
/// domain.
pub fn target_moments(sys: &NeutralSystem, triples: &[EigenTriple], target: &M2State, tol: f64) -> Result<TargetMoments> {
    let check = target.validate_domain(sys, tol)?;
    if !check.member {
        return Err(Error::NotInDomain {
            residual: check.residual,
            tol,
        });
    }
    let s: Vec<c64> = triples
        .iter()
        .map(|t| t.psi(sys).pair_state(target) * t.row_weight())
        .collect();
    let kmax = triples.iter().filter(|t| !t.exceptional).map(|t| t.k.unsigned_abs() as usize).max().unwrap_or(0);
    let c1 = (0..=kmax)
        .map(|kk| C1Point {
            k: kk,
            partial_sum: triples
                .iter()
                .zip(&s)
                .filter(|(t, _)| t.exceptional || t.k.unsigned_abs() as usize <= kk)
                .map(|(_, v)| v.norm_sqr())
                .sum(),
        })
        .collect();
    Ok(TargetMoments {
        s,
        domain_residual: check.residual,
        c1,
    })
}

/// `∫₀ᵀ e^{z t} dt`.
pub fn exp_integral(z: c64, t: f64) -> c64 {
    let zt = z * t;
    if zt.norm() < 1e-3 {
        // T (1 + zT/2 + (zT)²/6 + (zT)³/24)
        let one = c64::new(1.0, 0.0);
        (one + zt / 2.0 + zt * zt / 6.0 + zt * zt * zt / 24.0) * t
    } else {
        (zt.exp() - 1.0) / z
    }
}

/// `G_ij = Σ_d q_i^d conj(q_j^d) ∫₀ᵀ e^{(λ_i + λ̄_j) t} dt`.
pub fn gram_matrix(rows: &[MomentRow], horizon: f64) -> CMat {
    let n = rows.len();
    let mut g = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let qq = rows[j].q.dotc(&rows[i].q);
            let v = qq * exp_integral(rows[i].lambda + rows[j].lambda.conj(), horizon);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

/// Extreme eigenvalues and condition number of a Hermitian matrix.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Conditioning {
    pub horizon: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub condition: f64,
}

pub fn conditioning(g: &CMat, horizon: f64) -> Conditioning {
    if g.nrows() == 0 {
        return Conditioning {
            horizon,
            min_eigenvalue: 0.0,
            max_eigenvalue: 0.0,
            condition: 1.0,
        };
    }
    let eig = g.clone().symmetric_eigen().eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Conditioning {
        horizon,
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
    }
}

/// Gram conditioning of the rows for each horizon.
pub fn conditioning_report(rows: &[MomentRow], horizons: &[f64]) -> Result<Vec<Conditioning>> {
    horizons
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!("horizon {t} must be positive")));
            }
            Ok(conditioning(&gram_matrix(rows, t), t))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MomentSystem {
    pub rows: Vec<MomentRow>,
    pub horizon: f64,
    pub gram: CMat,
    pub excluded: Vec<ExcludedRoot>,
}

impl MomentSystem {
    /// Rows from every triple of `spectrum` with right-hand sides `s`.
    pub fn new(sys: &NeutralSystem, spectrum: &Spectrum, s: &[c64], horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if s.len() != spectrum.triples.len() {
            return Err(Error::Dimension("one right-hand side per triple".into()));
        }
        let rows: Vec<MomentRow> = spectrum
            .triples
            .iter()
            .zip(s)
            .map(|(t, &v)| MomentRow::from_triple(t, &sys.b, v))
            .collect();
        let gram = gram_matrix(&rows, horizon);
        Ok(MomentSystem {
            rows,
            horizon,
            gram,
            excluded: spectrum.excluded.clone(),
        })
    }

    pub fn rhs(&self) -> CVec {
        CVec::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.s))
    }
}

/// Least-norm solution of a moment system.
#[derive(Clone, Debug, Serialize)]
pub struct SteeringControl {
    pub horizon: f64,
    #[serde(serialize_with = "json::cvec")]
    pub coefficients: CVec,
    #[serde(skip)]
    lambdas: Vec<c64>,
    #[serde(skip)]
    q: Vec<CVec>,
    pub inputs: usize,
    /// `‖G c − s‖ / ‖s‖`.
    pub moment_residual: f64,
    /// `‖u‖_{L2(0,T)}`.
    pub norm: f64,
    pub regularization: f64,
    /// Set when the plain Cholesky solve failed and a floor was applied.
    pub fallback: Option<String>,
}

impl SteeringControl {
    /// Moment-variable control `ũ(t) = Σ_j c_j conj(q_j) e^{λ̄_j t}`.
    pub fn moment_variable(&self, t: f64) -> CVec {
        let mut u = CVec::zeros(self.inputs);
        for ((c, l), q) in self.coefficients.iter().zip(&self.lambdas).zip(&self.q) {
            let e = (l.conj() * t).exp() * c;
            for d in 0..self.inputs {
                u[d] += q[d].conj() * e;
            }
        }
        u
    }

    /// Control to apply at time `t ∈ [0, T]`: `u(t) = ũ(T − t)`.
    pub fn eval(&self, t: f64) -> CVec {
        self.moment_variable(self.horizon - t)
    }

    /// Largest imaginary part relative to the largest modulus over `m` samples.
    pub fn imaginary_fraction(&self, m: usize) -> f64 {
        let (mut im, mut abs) = (0.0f64, 0.0f64);
        for j in 0..=m {
            let u = self.eval(self.horizon * j as f64 / m as f64);
            for z in u.iter() {
                im = im.max(z.im.abs());
                abs = abs.max(z.norm());
            }
        }
        if abs > 0.0 { im / abs } else { 0.0 }
    }

    /// Control CSV on `m` uniform steps: `t,u_1..u_r`, or real and imaginary
    /// columns when the control is complex. Times are multiplied by
    /// `delay_h` and values divided by it.
    pub fn to_csv(&self, m: usize, delay_h: f64) -> String {
        let complex = self.imaginary_fraction(m) > 1e-9;
        let mut s = String::from("t");
        for d in 1..=self.inputs {
            if complex {
                let _ = write!(s, ",u{d}_re,u{d}_im");
            } else {
                let _ = write!(s, ",u{d}");
            }
        }
        s.push('\n');
        for j in 0..=m {
            let t = self.horizon * j as f64 / m as f64;
            let u = self.eval(t) / c64::new(delay_h, 0.0);
            let _ = write!(s, "{:.16e}", t * delay_h);
            for z in u.iter() {
                if complex {
                    let _ = write!(s, ",{:.16e},{:.16e}", z.re, z.im);
                } else {
                    let _ = write!(s, ",{:.16e}", z.re);
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Solves `(G + ρI) c = s` for the least-norm control. With `ρ = 0` a
/// failed Cholesky factorization falls back to the eigenvalue floor
/// `1e-12 · tr(G)/dim`.
pub fn synthesize_control(ms: &MomentSystem, regularization: f64) -> Result<SteeringControl> {
    if !(regularization >= 0.0) {
        return Err(Error::InvalidArgument("regularization must be non-negative".into()));
    }
    let n = ms.rows.len();
    let s = ms.rhs();
    let inputs = ms.rows.first().map_or(0, |r| r.q.len());
    let build = |c: CVec, fallback: Option<String>| {
        let gc = &ms.gram * &c;
        let snorm = s.norm();
        let moment_residual = if snorm > 0.0 { (&gc - &s).norm() / snorm } else { gc.norm() };
        let norm = c.dotc(&gc).re.max(0.0).sqrt();
        SteeringControl {
            horizon: ms.horizon,
            coefficients: c,
            lambdas: ms.rows.iter().map(|r| r.lambda).collect(),
            q: ms.rows.iter().map(|r| r.q.clone()).collect(),
            inputs,
            moment_residual,
            norm,
            regularization,
            fallback,
        }
    };
    if s.iter().all(|z| *z == c64::new(0.0, 0.0)) {
        return Ok(build(CVec::zeros(n), None));
    }
    let id = CMat::identity(n, n);
    let g = &ms.gram + &id * c64::new(regularization, 0.0);
    if let Some(ch) = g.clone().cholesky() {
        return Ok(build(ch.solve(&s), None));
    }
    let eig = g.clone().symmetric_eigen();
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lo < -INDEFINITE_TOL * hi {
        return Err(Error::Numerical(format!(
            "Gram matrix is indefinite (eigenvalues {lo:.3e} .. {hi:.3e})"
        )));
    }
    let floor = FLOOR * g.trace().re / n as f64;
    if let Some(ch) = (&g + &id * c64::new(floor, 0.0)).cholesky() {
        return Ok(build(ch.solve(&s), Some(format!("Cholesky failed; floor {floor:.3e} added"))));
    }
    // spectral solve with eigenvalues clamped to the floor
    let v = &eig.eigenvectors;
    let mut coef = v.adjoint() * &s;
    for (i, z) in coef.iter_mut().enumerate() {
        *z /= eig.eigenvalues[i].max(floor);
    }
    Ok(build(v * coef, Some(format!("eigenvalues clamped at {floor:.3e}"))))
}

/// Moment report written by the steering pipeline.
#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    pub horizon: f64,
    pub moment_residual: f64,
    pub control_norm: f64,
    pub gram: Conditioning,
    pub excluded_rows: Vec<ExcludedRoot>,
    pub fallback: Option<String>,
}

impl MomentReport {
    pub fn new(ms: &MomentSystem, control: &SteeringControl) -> Self {
        MomentReport {
            rows: ms.rows.clone(),
            horizon: ms.horizon,
            moment_residual: control.moment_residual,
            control_norm: control.norm,
            gram: conditioning(&ms.gram, ms.horizon),
            excluded_rows: ms.excluded.clone(),
            fallback: control.fallback.clone(),
        }
    }
}
