//! Characteristic roots near the asymptotic grid `Log μ_m + 2kπi`, their
//! certification, the exceptional roots of the finite part, and the
//! biorthonormal eigenvector families.

pub mod eigen;
pub mod roots;

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{self, c64, CMat, CVec};
use crate::system::NeutralSystem;

pub use eigen::{kernel_vectors, pairing, pairing_matrix, phi_state, KernelVectors, Psi};
pub use roots::{FoundRoot, Rect};

/// Pairings below this magnitude mean the root is defective or the vectors
/// are wrong; such roots cannot be normalized.
const MIN_PAIRING: f64 = 1e-12;

/// Generic offsets keeping the scan rectangle off symmetric root positions.
const RECT_OFFSET_LEFT: f64 = 0.0173;
const RECT_OFFSET_RIGHT: f64 = 0.0291;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumWindow {
    /// Chains are computed for `|k| <= k_max`.
    pub k_max: usize,
    /// Multiplies the certification radius `min(0.4 d, 1/(1+|k|))`.
    pub radius_scale: f64,
    /// Real-part margin `c` of the scan strip `[min ln|μ| − c, max ln|μ| + c]`.
    pub strip_margin: f64,
}

impl Default for SpectrumWindow {
    fn default() -> Self {
        SpectrumWindow {
            k_max: 5,
            radius_scale: 1.0,
            strip_margin: 2.0,
        }
    }
}

impl SpectrumWindow {
    pub fn with_kmax(k_max: usize) -> Self {
        SpectrumWindow {
            k_max,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        if !(self.radius_scale > 0.0 && self.radius_scale <= 1.0) {
            return Err(Error::InvalidArgument("radius_scale must be in (0, 1]".into()));
        }
        if !(self.strip_margin > 0.0 && self.strip_margin.is_finite()) {
            return Err(Error::InvalidArgument("strip_margin must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    /// Branch, 1-based.
    pub m: usize,
    pub k: i64,
    pub lambda_tilde: c64,
}

/// Eigenvalues of `A₋₁` sorted by `(Re Log μ, Im Log μ)`; rejects singular
/// or repeated spectra.
pub fn neutral_eigenvalues(sys: &NeutralSystem) -> Result<Vec<c64>> {
    let sv = linalg::singular_values(&sys.a_minus1);
    if sv.last().copied().unwrap_or(0.0) <= 1e-10 * sv[0].max(f64::MIN_POSITIVE) {
        return Err(Error::SingularNeutral);
    }
    let mut mu = linalg::eigenvalues(&sys.a_minus1);
    if mu.len() != sys.n() {
        return Err(Error::Numerical("eigenvalues of A_minus1 did not converge".into()));
    }
    // real data: snap tiny imaginary parts so conjugate pairs stay exact
    if sys.is_real() {
        for z in mu.iter_mut() {
            if z.im.abs() <= 1e-13 * z.norm() {
                z.im = 0.0;
            }
        }
    }
    mu.sort_by(|a, b| {
        let (la, lb) = (a.ln(), b.ln());
        la.re.total_cmp(&lb.re).then(la.im.total_cmp(&lb.im))
    });
    for i in 1..mu.len() {
        for j in 0..i {
            if (mu[i] - mu[j]).norm() <= 1e-8 * (1.0 + mu[i].norm()) {
                return Err(Error::RepeatedEigenvalue(format!("{}", mu[i])));
            }
        }
    }
    Ok(mu)
}

/// `Log μ_m + 2kπi` for `|k| <= k_max`, ordered by `(m, k)`.
pub fn asymptotic_grid(sys: &NeutralSystem, window: &SpectrumWindow) -> Result<Vec<GridPoint>> {
    window.validate()?;
    let mu = neutral_eigenvalues(sys)?;
    let kmax = window.k_max as i64;
    let mut out = Vec::with_capacity(mu.len() * (2 * window.k_max + 1));
    for (i, m) in mu.iter().enumerate() {
        let base = m.ln();
        for k in -kmax..=kmax {
            out.push(GridPoint {
                m: i + 1,
                k,
                lambda_tilde: base + c64::new(0.0, 2.0 * PI * k as f64),
            });
        }
    }
    Ok(out)
}

/// Smallest distance between distinct points of the (infinite) grid.
pub fn grid_spacing(mu: &[c64]) -> f64 {
    let mut d = 2.0 * PI;
    for i in 0..mu.len() {
        for j in 0..i {
            let diff = mu[i].ln() - mu[j].ln();
            for shift in -1..=1 {
                let z = diff + c64::new(0.0, 2.0 * PI * shift as f64);
                d = d.min(z.norm());
            }
        }
    }
    d
}

/// Certification radius at frequency `k`.
pub fn circle_radius(window: &SpectrumWindow, spacing: f64, k: i64) -> f64 {
    window.radius_scale * (0.4 * spacing).min(1.0 / (1.0 + k.unsigned_abs() as f64))
}

/// Root of `det Δ` near a grid point, with the certification verdict.
#[derive(Clone, Debug)]
pub struct RefinedRoot {
    pub lambda: c64,
    pub certified: bool,
    /// Winding of `det Δ` on the circle around the seed.
    pub winding: Option<i64>,
}

/// Newton from `seed`, certified when the winding number on the circle of
/// radius `radius` around the seed is 1 and the limit lies inside it.
pub fn refine_root(sys: &NeutralSystem, seed: c64, radius: f64) -> Result<RefinedRoot> {
    let lambda = roots::newton(sys, seed, 1.0, 2.0 * radius)?;
    let winding = roots::circle_winding(sys, seed, radius);
    let certified = winding == Some(1) && (lambda - seed).norm() < radius;
    Ok(RefinedRoot {
        lambda,
        certified,
        winding,
    })
}

/// Characteristic root with its kernel vectors and normalization.
#[derive(Clone, Debug, Serialize)]
pub struct EigenTriple {
    /// Branch (1-based); 0 for exceptional roots.
    pub m: usize,
    /// Frequency for chain roots; running index for exceptional roots.
    pub k: i64,
    #[serde(serialize_with = "json::complex")]
    pub lambda: c64,
    #[serde(serialize_with = "json::cvec")]
    pub x: CVec,
    /// Unit left kernel vector; the normalized adjoint head is `norm_factor * y`.
    #[serde(serialize_with = "json::cvec")]
    pub y: CVec,
    #[serde(serialize_with = "json::complex")]
    pub norm_factor: c64,
    pub certified: bool,
    pub exceptional: bool,
    /// `‖Δ(λ)x‖ / ‖Δ(λ)‖_F`.
    pub residual: f64,
    pub near_multiple: bool,
}

impl EigenTriple {
    /// Head of the biorthonormalized `ψ`.
    pub fn psi_head(&self) -> CVec {
        &self.y * self.norm_factor
    }

    pub fn psi<'a>(&self, sys: &'a NeutralSystem) -> Psi<'a> {
        Psi::new(sys, self.lambda, self.psi_head())
    }

    /// Row factor `k` of the moment equations; 1 where `k` vanishes.
    pub fn row_weight(&self) -> f64 {
        if self.exceptional || self.k == 0 {
            1.0
        } else {
            self.k as f64
        }
    }

    /// `q^d = k ⟨b_d, ψ⟩`, `d = 1..r`.
    pub fn moment_row(&self, b: &CMat) -> CVec {
        let head = self.psi_head();
        let w = self.row_weight();
        CVec::from_iterator(b.ncols(), (0..b.ncols()).map(|d| head.dotc(&b.column(d)) * w))
    }

    /// `‖Δ(λ)x‖` and `‖Δ(λ)ᴴy‖`.
    pub fn kernel_residuals(&self, sys: &NeutralSystem) -> (f64, f64) {
        let d = sys.delta(self.lambda);
        ((&d * &self.x).norm(), (d.adjoint() * &self.y).norm())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Uncertified {
    pub m: usize,
    pub k: i64,
    #[serde(serialize_with = "json::complex")]
    pub seed: c64,
    pub reason: String,
}

/// Root excluded from the eigenvector families.
#[derive(Clone, Debug, Serialize)]
pub struct ExcludedRoot {
    #[serde(serialize_with = "json::complex")]
    pub lambda: c64,
    pub multiplicity: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub window: SpectrumWindow,
    #[serde(serialize_with = "json::complex_list")]
    pub mu: Vec<c64>,
    pub triples: Vec<EigenTriple>,
    pub uncertified: Vec<Uncertified>,
    /// Grid points whose circle provably contains no root; a displaced
    /// root inside the scan rectangle appears among the exceptional roots.
    pub vacant: Vec<Uncertified>,
    pub excluded: Vec<ExcludedRoot>,
    pub rectangle: Rect,
    pub rectangle_winding: Option<i64>,
    pub scan_error: Option<String>,
}

impl Spectrum {
    pub fn chain(&self, m: usize, k: i64) -> Option<&EigenTriple> {
        self.triples.iter().find(|t| !t.exceptional && t.m == m && t.k == k)
    }

    pub fn exceptional(&self) -> impl Iterator<Item = &EigenTriple> {
        self.triples.iter().filter(|t| t.exceptional)
    }

    /// Roots accounted for, with multiplicity.
    pub fn accounted(&self) -> usize {
        self.triples.len() + self.excluded.iter().map(|e| e.multiplicity).sum::<usize>()
    }

    /// True when every grid point was resolved, the scan completed and the
    /// rectangle winding matches the roots accounted for.
    pub fn complete(&self) -> bool {
        self.uncertified.is_empty()
            && self.scan_error.is_none()
            && self.rectangle_winding == Some(self.accounted() as i64)
    }

    /// Spectrum CSV: `m,k,re,im,residual,certified,norm_factor_re,norm_factor_im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,k,re,im,residual,certified,norm_factor_re,norm_factor_im\n");
        for t in &self.triples {
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
                t.m, t.k, t.lambda.re, t.lambda.im, t.residual, t.certified, t.norm_factor.re, t.norm_factor.im
            );
        }
        s
    }
}

#[cfg(feature = "parallel")]
fn map_points<T: Send>(pts: &[GridPoint], f: impl Fn(&GridPoint) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    pts.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_points<T>(pts: &[GridPoint], f: impl Fn(&GridPoint) -> T) -> Vec<T> {
    pts.iter().map(f).collect()
}

enum ChainOutcome {
    Root { lambda: c64, extras: Vec<FoundRoot> },
    Missing { reason: String, extras: Vec<FoundRoot> },
    /// Winding 0 on the circle: no root near the grid point.
    Vacant,
}

fn chain_root(sys: &NeutralSystem, p: &GridPoint, radius: f64) -> ChainOutcome {
    let seed = p.lambda_tilde;
    let refined = refine_root(sys, seed, radius);
    if let Ok(r) = &refined {
        if r.certified {
            return ChainOutcome::Root {
                lambda: r.lambda,
                extras: Vec::new(),
            };
        }
    }
    let winding = match &refined {
        Ok(r) => r.winding,
        Err(_) => roots::circle_winding(sys, seed, radius),
    };
    match winding {
        Some(0) => ChainOutcome::Vacant,
        None => ChainOutcome::Missing {
            reason: "winding number not resolved on the certification circle".into(),
            extras: Vec::new(),
        },
        Some(w) => {
            // several roots (or Newton escaped): locate all of them
            let square = Rect {
                re0: seed.re - radius,
                re1: seed.re + radius,
                im0: seed.im - radius,
                im1: seed.im + radius,
            };
            let found = match roots::box_search(sys, square, &[]) {
                Ok(f) => f,
                Err(e) => {
                    return ChainOutcome::Missing {
                        reason: format!("circle winding {w}; {e}"),
                        extras: Vec::new(),
                    }
                }
            };
            let mut inside: Vec<FoundRoot> =
                found.into_iter().filter(|f| (f.lambda - seed).norm() < radius).collect();
            inside.sort_by(|a, b| (a.lambda - seed).norm().total_cmp(&(b.lambda - seed).norm()));
            match inside.first() {
                Some(first) if first.multiplicity == 1 => {
                    let lambda = first.lambda;
                    ChainOutcome::Root {
                        lambda,
                        extras: inside[1..].to_vec(),
                    }
                }
                Some(_) => ChainOutcome::Missing {
                    reason: "multiple root nearest to the grid point".into(),
                    extras: inside,
                },
                None => ChainOutcome::Missing {
                    reason: format!("circle winding {w} but no root located"),
                    extras: Vec::new(),
                },
            }
        }
    }
}

/// Rectangle containing the whole window: real parts in the strip, imaginary
/// edges halfway between the last in-window and first out-of-window levels.
pub fn scan_rectangle(mu: &[c64], window: &SpectrumWindow) -> Rect {
    let logs: Vec<c64> = mu.iter().map(|m| m.ln()).collect();
    let re_min = logs.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
    let re_max = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let kmax = window.k_max as f64;
    let two_pi = 2.0 * PI;
    let arg_min = logs.iter().map(|l| l.im).fold(f64::INFINITY, f64::min);
    let arg_max = logs.iter().map(|l| l.im).fold(f64::NEG_INFINITY, f64::max);
    let top_in = arg_max + two_pi * kmax;
    let top_out = arg_min + two_pi * (kmax + 1.0);
    let bot_in = arg_min - two_pi * kmax;
    let bot_out = arg_max - two_pi * (kmax + 1.0);
    Rect {
        re0: re_min - window.strip_margin - RECT_OFFSET_LEFT,
        re1: re_max + window.strip_margin + RECT_OFFSET_RIGHT,
        im0: 0.5 * (bot_in + bot_out),
        im1: 0.5 * (top_in + top_out),
    }
}

fn make_triple(sys: &NeutralSystem, m: usize, k: i64, lambda: c64, certified: bool, exceptional: bool) -> std::result::Result<EigenTriple, String> {
    let kv = kernel_vectors(sys, lambda);
    let p = pairing(sys, lambda, &kv.x, lambda, &kv.y);
    if p.norm() < MIN_PAIRING {
        return Err(format!("pairing {:.3e} below {MIN_PAIRING:.0e} (defective root)", p.norm()));
    }
    let dnorm = sys.delta(lambda).norm();
    let residual = if dnorm > 0.0 { kv.sigma_min / dnorm } else { 0.0 };
    Ok(EigenTriple {
        m,
        k,
        lambda,
        near_multiple: kv.near_multiple(),
        x: kv.x,
        y: kv.y,
        norm_factor: c64::new(1.0, 0.0) / p.conj(),
        certified,
        exceptional,
        residual,
    })
}

/// Certified chain roots over the window, the exceptional roots inside the
/// scan rectangle, and biorthonormalized kernel vectors for all simple roots.
pub fn compute_spectrum(sys: &NeutralSystem, window: &SpectrumWindow) -> Result<Spectrum> {
    let grid = asymptotic_grid(sys, window)?;
    let mu = neutral_eigenvalues(sys)?;
    let spacing = grid_spacing(&mu);
    let outcomes = map_points(&grid, |p| chain_root(sys, p, circle_radius(window, spacing, p.k)));

    let mut chain_roots: Vec<(GridPoint, c64)> = Vec::new();
    let mut uncertified = Vec::new();
    let mut vacant = Vec::new();
    let mut extras: Vec<FoundRoot> = Vec::new();
    for (p, out) in grid.iter().zip(outcomes) {
        match out {
            ChainOutcome::Root { lambda, extras: e } => {
                chain_roots.push((*p, lambda));
                extras.extend(e);
            }
            ChainOutcome::Missing { reason, extras: e } => {
                uncertified.push(Uncertified {
                    m: p.m,
                    k: p.k,
                    seed: p.lambda_tilde,
                    reason,
                });
                extras.extend(e);
            }
            ChainOutcome::Vacant => vacant.push(Uncertified {
                m: p.m,
                k: p.k,
                seed: p.lambda_tilde,
                reason: "no root inside the certification circle".into(),
            }),
        }
    }

    let rect = scan_rectangle(&mu, window);
    let mut known: Vec<c64> = chain_roots.iter().map(|(_, l)| *l).collect();
    for e in &extras {
        known.extend(std::iter::repeat(e.lambda).take(e.multiplicity));
    }
    let rectangle_winding = rect.winding(sys);
    let mut scan_error = None;
    let mut exceptional: Vec<FoundRoot> = extras;
    match roots::box_search(sys, rect, &known) {
        Ok(found) => exceptional.extend(found),
        Err(e) => scan_error = Some(e.to_string()),
    }
    if rectangle_winding.is_none() && scan_error.is_none() {
        scan_error = Some("winding number of the scan rectangle not resolved".into());
    }
    exceptional.sort_by(|a, b| a.lambda.im.total_cmp(&b.lambda.im).then(a.lambda.re.total_cmp(&b.lambda.re)));
    exceptional.dedup_by(|a, b| (a.lambda - b.lambda).norm() <= 1e-8 * (1.0 + a.lambda.norm()));

    let mut triples = Vec::new();
    let mut excluded = Vec::new();
    for (p, lambda) in chain_roots {
        match make_triple(sys, p.m, p.k, lambda, true, false) {
            Ok(t) => triples.push(t),
            Err(reason) => excluded.push(ExcludedRoot {
                lambda,
                multiplicity: 1,
                reason,
            }),
        }
    }
    let mut s = 0;
    for f in exceptional {
        if f.multiplicity > 1 {
            excluded.push(ExcludedRoot {
                lambda: f.lambda,
                multiplicity: f.multiplicity,
                reason: "multiple root; root vectors are not constructed".into(),
            });
            continue;
        }
        s += 1;
        match make_triple(sys, 0, s, f.lambda, true, true) {
            Ok(t) => triples.push(t),
            Err(reason) => excluded.push(ExcludedRoot {
                lambda: f.lambda,
                multiplicity: 1,
                reason,
            }),
        }
    }
    Ok(Spectrum {
        window: *window,
        mu,
        triples,
        uncertified,
        vacant,
        excluded,
        rectangle: rect,
        rectangle_winding,
        scan_error,
    })
}
