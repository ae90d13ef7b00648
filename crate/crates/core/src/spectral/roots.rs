//! Roots of `det Δ(λ)`: Newton refinement, winding numbers on circles and
//! rectangles, and recursive box search.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::c64;
use crate::system::NeutralSystem;

/// Newton stops once the step is below `NEWTON_TOL * (1 + |λ|)`.
const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 80;

/// Largest phase change accepted between neighbouring contour samples.
const MAX_ARG_STEP: f64 = PI / 4.0;
const MAX_REFINE_DEPTH: usize = 40;

/// Boxes below this size with unexplained winding are reported as multiple roots.
const MIN_BOX: f64 = 1e-6;

/// Split position inside a box; off-centre so symmetric root patterns do not
/// land on the cut.
const SPLIT: f64 = 0.4871;

pub fn det(sys: &NeutralSystem, lambda: c64) -> c64 {
    sys.delta(lambda).determinant()
}

/// Newton's method on `det Δ` with the Jacobi formula
/// `(det Δ)'/det Δ = tr(Δ⁻¹ Δ')`; `mult` scales the step for multiple roots.
/// Fails if the iterate leaves the disk of radius `max_move` around `seed`.
pub fn newton(sys: &NeutralSystem, seed: c64, mult: f64, max_move: f64) -> Result<c64> {
    let mut lambda = seed;
    let diverged = || Error::NewtonDivergence {
        seed: format!("{seed}"),
    };
    for _ in 0..NEWTON_MAX_ITER {
        let d = sys.delta(lambda);
        if d.iter().all(|z| *z == c64::new(0.0, 0.0)) {
            return Ok(lambda);
        }
        let dp = sys.delta_derivative(lambda);
        let Some(x) = d.lu().solve(&dp) else {
            // exactly singular: λ is a root to working precision
            return Ok(lambda);
        };
        let tr = x.trace();
        if !(tr.re.is_finite() && tr.im.is_finite()) {
            return Ok(lambda);
        }
        if tr.norm() == 0.0 {
            return Err(diverged());
        }
        let step = -mult / tr;
        lambda += step;
        if !(lambda.re.is_finite() && lambda.im.is_finite()) || (lambda - seed).norm() > max_move {
            return Err(diverged());
        }
        if step.norm() < NEWTON_TOL * (1.0 + lambda.norm()) {
            return Ok(lambda);
        }
    }
    Err(diverged())
}

/// Winding number of `f` along the closed curve `gamma(s)`, `s ∈ [0, 1]`,
/// sampled initially at `samples` points and refined where the phase jumps.
/// Returns `None` if `f` vanishes on the curve or the phase total is not
/// close to an integer.
pub fn winding_along(
    f: &dyn Fn(c64) -> c64,
    gamma: &dyn Fn(f64) -> c64,
    samples: usize,
) -> Option<i64> {
    fn refine(
        f: &dyn Fn(c64) -> c64,
        gamma: &dyn Fn(f64) -> c64,
        (s0, f0): (f64, c64),
        (s1, f1): (f64, c64),
        depth: usize,
    ) -> Option<f64> {
        let d = (f1 / f0).arg();
        if d.abs() <= MAX_ARG_STEP {
            return Some(d);
        }
        if depth >= MAX_REFINE_DEPTH {
            return None;
        }
        let sm = 0.5 * (s0 + s1);
        let fm = f(gamma(sm));
        if fm.norm() == 0.0 || !fm.re.is_finite() {
            return None;
        }
        Some(refine(f, gamma, (s0, f0), (sm, fm), depth + 1)? + refine(f, gamma, (sm, fm), (s1, f1), depth + 1)?)
    }
    let samples = samples.max(8);
    let mut total = 0.0;
    let first = f(gamma(0.0));
    if first.norm() == 0.0 || !first.re.is_finite() {
        return None;
    }
    let mut prev = (0.0, first);
    for i in 1..=samples {
        let s = i as f64 / samples as f64;
        let fs = if i == samples { first } else { f(gamma(s)) };
        if fs.norm() == 0.0 || !fs.re.is_finite() {
            return None;
        }
        total += refine(f, gamma, prev, (s, fs), 0)?;
        prev = (s, fs);
    }
    let w = total / (2.0 * PI);
    let rounded = w.round();
    ((w - rounded).abs() < 0.1).then_some(rounded as i64)
}

/// Winding number of `det Δ` around a circle.
pub fn circle_winding(sys: &NeutralSystem, center: c64, radius: f64) -> Option<i64> {
    let f = |z: c64| det(sys, z);
    let gamma = |s: f64| center + c64::from_polar(radius, 2.0 * PI * s);
    winding_along(&f, &gamma, 64)
}

/// Axis-aligned rectangle `[re0, re1] x [im0, im1]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Rect {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rect {
    pub fn contains(&self, z: c64) -> bool {
        z.re > self.re0 && z.re < self.re1 && z.im > self.im0 && z.im < self.im1
    }

    fn width(&self) -> f64 {
        self.re1 - self.re0
    }

    fn height(&self) -> f64 {
        self.im1 - self.im0
    }

    fn center(&self) -> c64 {
        c64::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    /// Distance from `z` (inside) to the boundary.
    fn inset(&self, z: c64) -> f64 {
        (z.re - self.re0)
            .min(self.re1 - z.re)
            .min(z.im - self.im0)
            .min(self.im1 - z.im)
    }

    fn split(&self) -> (Rect, Rect) {
        if self.width() >= self.height() {
            let x = self.re0 + SPLIT * self.width();
            (Rect { re1: x, ..*self }, Rect { re0: x, ..*self })
        } else {
            let y = self.im0 + SPLIT * self.height();
            (Rect { im1: y, ..*self }, Rect { im0: y, ..*self })
        }
    }

    /// Winding of `det Δ` along the boundary (counter-clockwise).
    pub fn winding(&self, sys: &NeutralSystem) -> Option<i64> {
        let (w, h) = (self.width(), self.height());
        let per = 2.0 * (w + h);
        let corners = [
            c64::new(self.re0, self.im0),
            c64::new(self.re1, self.im0),
            c64::new(self.re1, self.im1),
            c64::new(self.re0, self.im1),
        ];
        let lens = [w, h, w, h];
        let gamma = |s: f64| {
            let mut t = s * per;
            for i in 0..4 {
                if t <= lens[i] || i == 3 {
                    let a = corners[i];
                    let b = corners[(i + 1) % 4];
                    return a + (b - a) * (t / lens[i]).min(1.0);
                }
                t -= lens[i];
            }
            corners[0]
        };
        let samples = ((per / 0.05).ceil() as usize).clamp(64, 200_000);
        let f = |z: c64| det(sys, z);
        winding_along(&f, &gamma, samples)
    }
}

/// Root found by the box search; `multiplicity > 1` means it could not be
/// separated at the minimal box size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FoundRoot {
    pub lambda: c64,
    pub multiplicity: usize,
}

/// Locates the roots inside `rect` that are not in `known`.
///
/// Fails with a numerical error when a winding number cannot be evaluated
/// reliably (a root on a cut, or phase refinement exhausted).
pub fn box_search(sys: &NeutralSystem, rect: Rect, known: &[c64]) -> Result<Vec<FoundRoot>> {
    let mut found = Vec::new();
    let mut known: Vec<c64> = known.to_vec();
    search(sys, rect, &mut known, &mut found, 0)?;
    found.sort_by(|a, b| {
        a.lambda
            .im
            .total_cmp(&b.lambda.im)
            .then(a.lambda.re.total_cmp(&b.lambda.re))
    });
    Ok(found)
}

fn search(
    sys: &NeutralSystem,
    rect: Rect,
    known: &mut Vec<c64>,
    found: &mut Vec<FoundRoot>,
    depth: usize,
) -> Result<()> {
    let w = rect
        .winding(sys)
        .ok_or_else(|| Error::Numerical(format!("winding number not resolved on box {rect:?}")))?;
    let inside = known.iter().filter(|z| rect.contains(**z)).count() as i64;
    let mut unknown = w - inside;
    if unknown <= 0 {
        return Ok(());
    }
    // try to isolate directly from the centre before subdividing
    let size = rect.width().max(rect.height());
    if size < 4.0 {
        if let Ok(z) = newton(sys, rect.center(), unknown as f64, 2.0 * size) {
            if rect.contains(z) && known.iter().all(|k| (k - z).norm() > 1e-8 * (1.0 + z.norm())) {
                let nearest = known
                    .iter()
                    .map(|k| (k - z).norm())
                    .fold(f64::INFINITY, f64::min);
                let rho = (1e-3 * (1.0 + z.norm())).min(0.5 * rect.inset(z)).min(0.5 * nearest);
                if rho > 0.0 {
                    if let Some(m) = circle_winding(sys, z, rho).filter(|&m| m >= 1 && m <= unknown) {
                        found.push(FoundRoot {
                            lambda: z,
                            multiplicity: m as usize,
                        });
                        known.extend(std::iter::repeat(z).take(m as usize));
                        unknown -= m;
                        if unknown == 0 {
                            return Ok(());
                        }
                    }
                }
            }
        }
    }
    if size <= MIN_BOX || depth > 200 {
        let z = rect.center();
        found.push(FoundRoot {
            lambda: z,
            multiplicity: unknown as usize,
        });
        known.extend(std::iter::repeat(z).take(unknown as usize));
        return Ok(());
    }
    let (a, b) = rect.split();
    search(sys, a, known, found, depth + 1)?;
    search(sys, b, known, found, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{re, real_mat};

    fn scalar(mu: f64) -> NeutralSystem {
        NeutralSystem::pure_neutral(real_mat(1, 1, &[mu]), real_mat(1, 1, &[1.0])).unwrap()
    }

    #[test]
    fn newton_hits_closed_form() {
        let sys = scalar(0.5);
        let target = c64::new(-(2f64).ln(), 2.0 * PI);
        let z = newton(&sys, target + c64::new(0.05, -0.03), 1.0, 1.0).unwrap();
        assert!((z - target).norm() < 1e-13);
    }

    #[test]
    fn circle_counts() {
        let sys = scalar(0.5);
        let root = c64::new(-(2f64).ln(), 0.0);
        assert_eq!(circle_winding(&sys, root, 0.2), Some(1));
        assert_eq!(circle_winding(&sys, root + re(1.0), 0.2), Some(0));
        // λ = 0 and -ln 2 both inside
        assert_eq!(circle_winding(&sys, re(-0.35), 0.5), Some(2));
    }

    #[test]
    fn rectangle_and_search() {
        let sys = scalar(0.5);
        let rect = Rect { re0: -2.0, re1: 1.5, im0: -1.0, im1: 7.0 };
        // roots -ln2, -ln2 + 2πi, and 0
        assert_eq!(rect.winding(&sys), Some(3));
        let found = box_search(&sys, rect, &[c64::new(-(2f64).ln(), 0.0)]).unwrap();
        assert_eq!(found.len(), 2, "{found:?}");
        assert!(found[0].lambda.norm() < 1e-10);
        assert!((found[1].lambda - c64::new(-(2f64).ln(), 2.0 * PI)).norm() < 1e-10);
    }

    #[test]
    fn multiple_root_at_zero() {
        // pure neutral n = 2: det Δ = λ² (1 - e^{-λ}μ1)(1 - e^{-λ}μ2)
        let sys = NeutralSystem::pure_neutral(
            real_mat(2, 2, &[2.0, 0.0, 0.0, 3.0]),
            real_mat(2, 1, &[1.0, 1.0]),
        )
        .unwrap();
        let rect = Rect { re0: -0.3, re1: 0.4, im0: -0.5, im1: 0.6 };
        let found = box_search(&sys, rect, &[]).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].multiplicity, 2);
        assert!(found[0].lambda.norm() < 1e-6);
    }
}
