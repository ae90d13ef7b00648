//! Kernel vectors of `Δ(λ)`, eigenvectors of the system operator and its
//! adjoint, and their M2 pairings.
//!
//! For a root `λ` with `Δ(λ)x = 0` and `Δ(λ)ᴴy = 0`:
//!
//! ```text
//! φ = ((I − e^{−λ}A₋₁) x,  e^{λθ} x)
//! ψ = (y,  [λ̄e^{−λ̄θ} − A₂*(θ) + ∫₀^θ e^{λ̄(s−θ)}(A₃*(s) + λ̄A₂*(s)) ds] y)
//! ```

use crate::linalg::{self, c64, CMat, CVec};
use crate::state::M2State;
use crate::system::NeutralSystem;

/// Below this separation the cross pairing uses its confluent limit.
const CONFLUENT: f64 = 1e-6;

/// Flag threshold on `σ_min / σ_next`.
pub const NEAR_MULTIPLE_RATIO: f64 = 0.1;

/// Unit right/left kernel vectors of `Δ(λ)` with the phase convention
/// applied, and the two smallest singular values.
#[derive(Clone, Debug)]
pub struct KernelVectors {
    pub x: CVec,
    pub y: CVec,
    pub sigma_min: f64,
    pub sigma_next: f64,
}

impl KernelVectors {
    pub fn near_multiple(&self) -> bool {
        self.sigma_next.is_finite() && self.sigma_min > NEAR_MULTIPLE_RATIO * self.sigma_next
    }
}

pub fn kernel_vectors(sys: &NeutralSystem, lambda: c64) -> KernelVectors {
    let d = sys.delta(lambda);
    let (sigma_min, sigma_next, u, v) = linalg::smallest_singular(&d);
    KernelVectors {
        x: linalg::normalize_phase(&v),
        y: linalg::normalize_phase(&u),
        sigma_min,
        sigma_next,
    }
}

/// Head `(I − e^{−λ}A₋₁) x` of `φ`.
pub fn phi_head(sys: &NeutralSystem, lambda: c64, x: &CVec) -> CVec {
    x - &sys.a_minus1 * x * (-lambda).exp()
}

/// Samples `φ` on an `m`-cell grid.
pub fn phi_state(sys: &NeutralSystem, lambda: c64, x: &CVec, m: usize) -> M2State {
    let z = (0..=m)
        .map(|j| x * (lambda * crate::state::node(j, m)).exp())
        .collect();
    M2State {
        y: phi_head(sys, lambda, x),
        z,
    }
}

/// Evaluator of the adjoint eigenvector `ψ` for root `λ` and head `y`.
#[derive(Clone, Debug)]
pub struct Psi<'a> {
    sys: &'a NeutralSystem,
    pub lambda: c64,
    pub y: CVec,
}

impl<'a> Psi<'a> {
    pub fn new(sys: &'a NeutralSystem, lambda: c64, y: CVec) -> Self {
        Psi { sys, lambda, y }
    }

    /// Tail `ψ(θ)`, `θ ∈ [−1, 0]`; at kernel breakpoints `A₂` is taken from
    /// the piece on the right.
    pub fn tail(&self, theta: f64) -> CVec {
        self.tail_with_piece(theta, None)
    }

    /// Tail with `A₂(θ)` evaluated on a given piece (one-sided values).
    pub fn tail_with_piece(&self, theta: f64, a2_piece: Option<Option<usize>>) -> CVec {
        let lam = self.lambda;
        let lbar = lam.conj();
        let e = (-lbar * theta).exp();
        let mut out = &self.y * (lbar * e);
        let a2 = &self.sys.a2;
        let a3 = &self.sys.a3;
        if !a2.is_zero() {
            let a2t = match a2_piece {
                Some(p) => a2.eval_piece(p, theta),
                None => a2.eval(theta),
            };
            out -= a2t.adjoint() * &self.y;
        }
        if !(a2.is_zero() && a3.is_zero()) && theta < 0.0 {
            // ∫₀^θ e^{λ̄(s−θ)} K*(s) ds = −e^{−λ̄θ} (∫_θ^0 e^{λs} K(s) ds)ᴴ
            let mut w = CMat::zeros(self.y.len(), self.y.len());
            if !a3.is_zero() {
                w += a3.weighted_integral(lam, theta, 0.0, 0);
            }
            if !a2.is_zero() {
                w += a2.weighted_integral(lam, theta, 0.0, 0) * lam;
            }
            out -= w.adjoint() * &self.y * e;
        }
        out
    }

    /// `⟨x, ψ⟩ = yᴴ x.y + ∫ ψ(θ)ᴴ x.z(θ) dθ`, with 4-point Gauss–Legendre
    /// on each cell of the state's grid (the tail is linear per cell).
    pub fn pair_state(&self, x: &M2State) -> c64 {
        const GL_X: [f64; 4] = [
            -0.861_136_311_594_052_6,
            -0.339_981_043_584_856_3,
            0.339_981_043_584_856_3,
            0.861_136_311_594_052_6,
        ];
        const GL_W: [f64; 4] = [
            0.347_854_845_137_453_9,
            0.652_145_154_862_546_1,
            0.652_145_154_862_546_1,
            0.347_854_845_137_453_9,
        ];
        let m = x.grid_size();
        let h = x.step();
        let mut acc = self.y.dotc(&x.y);
        for j in 0..m {
            let lo = x.theta(j);
            let hi = lo + h;
            let piece = self.sys.a2.piece_for_cell(lo, hi);
            for (g, w) in GL_X.iter().zip(GL_W) {
                let s = 0.5 * (g + 1.0);
                let theta = lo + s * h;
                let zt = &x.z[j] * c64::new(1.0 - s, 0.0) + &x.z[j + 1] * c64::new(s, 0.0);
                let p = self.tail_with_piece(theta, Some(piece));
                acc += p.dotc(&zt) * (0.5 * w * h);
            }
        }
        acc
    }

    /// Samples `ψ` on an `m`-cell grid.
    pub fn state(&self, m: usize) -> M2State {
        M2State {
            y: self.y.clone(),
            z: (0..=m).map(|j| self.tail(crate::state::node(j, m))).collect(),
        }
    }
}

/// `E(w) = (1 − e^{−w}) / w`, with the series near 0.
fn exp_ratio(w: c64) -> c64 {
    if w.norm() < 1e-4 {
        c64::new(1.0, 0.0) - w / 2.0 + w * w / 6.0
    } else {
        (c64::new(1.0, 0.0) - (-w).exp()) / w
    }
}

/// Matrix `M(λ, ν)` with `⟨φ_{λ,x}, ψ_{ν,y}⟩ = yᴴ M(λ, ν) x`, all integrals
/// in closed form. At `ν = λ` this equals `Δ'(λ) + Δ(λ)`.
pub fn pairing_matrix(sys: &NeutralSystem, lambda: c64, nu: c64) -> CMat {
    let n = sys.n();
    let id = CMat::identity(n, n);
    let mut m = &id - &sys.a_minus1 * (-lambda).exp();
    m += &id * (nu * exp_ratio(lambda - nu));
    let a2 = &sys.a2;
    let a3 = &sys.a3;
    if a2.is_zero() && a3.is_zero() {
        return m;
    }
    let k2l = a2.laplace(lambda);
    m -= &k2l;
    let d = lambda - nu;
    if d.norm() < CONFLUENT * (1.0 + lambda.norm()) {
        // ∫ (1+s) e^{λs} (A₃ + νA₂)(s) ds
        let k = a3.laplace(lambda) + a3.laplace_derivative(lambda) + (&k2l + a2.laplace_derivative(lambda)) * nu;
        m -= k;
    } else {
        let kl = a3.laplace(lambda) + &k2l * nu;
        let kn = a3.laplace(nu) + a2.laplace(nu) * nu;
        m -= (kl - kn * (nu - lambda).exp()) / d;
    }
    m
}

/// `⟨φ_{λ,x}, ψ_{ν,y}⟩` in closed form.
pub fn pairing(sys: &NeutralSystem, lambda: c64, x: &CVec, nu: c64, y: &CVec) -> c64 {
    y.dotc(&(pairing_matrix(sys, lambda, nu) * x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::tests::quad;
    use crate::kernel::{KernelPiece, MatrixKernel};
    use crate::linalg::{re, real_mat, real_vec};

    fn kernel_sys() -> NeutralSystem {
        let a2 = MatrixKernel::new(
            2,
            vec![
                KernelPiece { a: -1.0, b: -0.3, coeffs: vec![real_mat(2, 2, &[0.2, 0.0, 0.1, -0.1]), real_mat(2, 2, &[0.0, 0.1, 0.0, 0.05])] },
                KernelPiece { a: -0.3, b: 0.0, coeffs: vec![real_mat(2, 2, &[0.1, 0.0, 0.0, 0.2])] },
            ],
            "A2",
        )
        .unwrap();
        let a3 = MatrixKernel::new(
            2,
            vec![KernelPiece { a: -1.0, b: 0.0, coeffs: vec![real_mat(2, 2, &[0.3, -0.1, 0.0, 0.2]), real_mat(2, 2, &[0.1, 0.0, 0.2, 0.0])] }],
            "A3",
        )
        .unwrap();
        NeutralSystem::new(real_mat(2, 2, &[0.5, 0.2, 0.0, -2.0]), real_mat(2, 1, &[1.0, 1.0]), a2, a3).unwrap()
    }

    /// ψ tail from the defining integral, by quadrature.
    fn psi_oracle(sys: &NeutralSystem, lam: c64, y: &CVec, theta: f64) -> CVec {
        let lbar = lam.conj();
        let n = y.len();
        let mut out = y * (lbar * (-lbar * theta).exp()) - sys.a2.eval(theta).adjoint() * y;
        for i in 0..n {
            let f = |s: f64| {
                let k = sys.a3.eval(s).adjoint() + sys.a2.eval(s).adjoint() * lbar;
                ((k * y)[i]) * (lbar * (s - theta)).exp()
            };
            // ∫₀^θ = −∫_θ^0, split at the A2 breakpoint
            let mut v = c64::new(0.0, 0.0);
            for (a, b) in [(theta, theta.max(-0.3)), (theta.max(-0.3), 0.0)] {
                if b > a {
                    v += quad(&f, a, b, 1e-14);
                }
            }
            out[i] -= v;
        }
        out
    }

    #[test]
    fn psi_tail_matches_quadrature() {
        let sys = kernel_sys();
        let lam = c64::new(0.4, 5.0);
        let y = CVec::from_vec(vec![c64::new(0.6, 0.1), re(-0.8)]);
        let psi = Psi::new(&sys, lam, y.clone());
        for &t in &[-1.0, -0.8, -0.5, -0.2, -0.05] {
            let diff = (psi.tail(t) - psi_oracle(&sys, lam, &y, t)).norm();
            assert!(diff < 1e-10, "θ={t}: {diff}");
        }
        // endpoint θ = 0: λ̄y − A₂*(0)y
        let at0 = psi.tail(0.0);
        let expect = &y * lam.conj() - sys.a2.eval(0.0).adjoint() * &y;
        assert!((at0 - expect).norm() < 1e-14);
    }

    #[test]
    fn pure_neutral_tail() {
        let sys = NeutralSystem::pure_neutral(real_mat(1, 1, &[0.5]), real_mat(1, 1, &[1.0])).unwrap();
        let lam = c64::new(-0.7, 6.0);
        let psi = Psi::new(&sys, lam, real_vec(&[1.0]));
        let t = -0.37;
        assert!((psi.tail(t)[0] - lam.conj() * (-lam.conj() * t).exp()).norm() < 1e-15);
    }

    #[test]
    fn pairing_matrix_matches_sampled_inner_product() {
        let sys = kernel_sys();
        let lam = c64::new(0.3, 2.0);
        let nu = c64::new(-0.5, 8.0);
        let x = CVec::from_vec(vec![c64::new(1.0, 0.5), re(-0.25)]);
        let y = CVec::from_vec(vec![re(0.3), c64::new(0.2, -1.0)]);
        let psi = Psi::new(&sys, nu, y.clone());
        let head = y.dotc(&phi_head(&sys, lam, &x));
        let tail: c64 = (0..2)
            .map(|i| {
                let f = |t: f64| psi.tail(t)[i].conj() * x[i] * (lam * t).exp();
                quad(&f, -1.0, -0.3, 1e-14) + quad(&f, -0.3, 0.0, 1e-14)
            })
            .sum();
        let closed = pairing(&sys, lam, &x, nu, &y);
        assert!((closed - head - tail).norm() < 1e-10, "{closed} vs {}", head + tail);
        // confluent case against the same oracle
        let psi = Psi::new(&sys, lam, y.clone());
        let tail: c64 = (0..2)
            .map(|i| {
                let f = |t: f64| psi.tail(t)[i].conj() * x[i] * (lam * t).exp();
                quad(&f, -1.0, -0.3, 1e-14) + quad(&f, -0.3, 0.0, 1e-14)
            })
            .sum();
        let head = y.dotc(&phi_head(&sys, lam, &x));
        assert!((pairing(&sys, lam, &x, lam, &y) - head - tail).norm() < 1e-10);
    }

    #[test]
    fn confluent_pairing_is_delta_prime_plus_delta() {
        let sys = kernel_sys();
        let lam = c64::new(0.1, -3.0);
        let m = pairing_matrix(&sys, lam, lam);
        let expect = sys.delta_derivative(lam) + sys.delta(lam);
        assert!((m - expect).norm() < 1e-12);
    }

    #[test]
    fn state_pairing_of_phi_matches_closed_form() {
        let sys = kernel_sys();
        let lam = c64::new(0.2, 3.0);
        let nu = c64::new(-0.1, -2.0);
        let x = real_vec(&[1.0, -0.5]);
        let y = real_vec(&[0.4, 0.9]);
        let psi = Psi::new(&sys, nu, y.clone());
        let closed = pairing(&sys, lam, &x, nu, &y);
        let err = |m: usize| (psi.pair_state(&phi_state(&sys, lam, &x, m)) - closed).norm();
        // linear interpolation of φ: second order in the grid step
        let (e1, e2) = (err(100), err(200));
        assert!(e2 < 1e-3 && e1 / e2 > 3.0, "{e1} {e2}");
    }
}
