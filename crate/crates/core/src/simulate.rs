//! Method-of-steps integrator for
//!
//! ```text
//! ż(t) = A₋₁ ż(t−1) + ∫₋₁⁰ A₂(θ) ż(t+θ) dθ + ∫₋₁⁰ A₃(θ) z(t+θ) dθ + B u(t)
//! ```
//!
//! on the uniform grid `h = 1/M`. Distributed terms use the trapezoid rule
//! over the stored history, `z` the trapezoid update. The `θ = 0` end of the
//! distributed terms couples `ż(t)` to itself; that small linear system is
//! solved exactly with a factorization computed once. `ż` jumps at integer
//! times, so left and right limits are kept at every node.

use std::fmt::Write as _;

use crate::canonical::ControlLaw;
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat, CVec};
use crate::state::{node, M2State};
use crate::system::NeutralSystem;

/// Piecewise-linear control through samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledControl {
    pub times: Vec<f64>,
    pub values: Vec<CVec>,
}

impl SampledControl {
    pub fn new(times: Vec<f64>, values: Vec<CVec>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Dimension("one control sample per time".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("control times must increase".into()));
        }
        let r = values[0].len();
        if values.iter().any(|v| v.len() != r) {
            return Err(Error::Dimension("control samples differ in length".into()));
        }
        Ok(SampledControl { times, values })
    }

    pub fn inputs(&self) -> usize {
        self.values[0].len()
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn eval(&self, t: f64) -> CVec {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.values[0].clone();
        }
        if i == self.times.len() {
            return self.values[i - 1].clone();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        &self.values[i - 1] * c64::new(1.0 - w, 0.0) + &self.values[i] * c64::new(w, 0.0)
    }

    /// Parses `t,u1,..` or `t,u1_re,u1_im,..` with a header line.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::schema("control", e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if header.first().map(String::as_str) != Some("t") || header.len() < 2 {
            return Err(Error::schema("control", "header must start with t and name at least one input"));
        }
        let complex = header[1].ends_with("_re");
        if complex && (header.len() - 1) % 2 != 0 {
            return Err(Error::schema("control", "complex columns come in re/im pairs"));
        }
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::schema(format!("control[{row}]"), e.to_string()))?;
            let nums = record
                .iter()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::schema(format!("control[{row}]"), e.to_string()))?;
            times.push(nums[0]);
            let u: Vec<c64> = if complex {
                nums[1..].chunks(2).map(|p| c64::new(p[0], p[1])).collect()
            } else {
                nums[1..].iter().map(|&x| c64::new(x, 0.0)).collect()
            };
            values.push(CVec::from_vec(u));
        }
        if times.is_empty() {
            return Err(Error::schema("control", "no control samples"));
        }
        Self::new(times, values)
    }
}

/// Control supplied to the integrator (the external input `v` when a
/// feedback law is active).
#[derive(Clone, Copy)]
pub enum ControlInput<'a> {
    Zero,
    Sampled(&'a SampledControl),
    Function(&'a dyn Fn(f64) -> CVec),
}

impl ControlInput<'_> {
    fn eval(&self, t: f64, r: usize) -> CVec {
        match self {
            ControlInput::Zero => CVec::zeros(r),
            ControlInput::Sampled(s) => s.eval(t),
            ControlInput::Function(f) => f(t),
        }
    }
}

/// Initial history on `[-1, 0]` (testing mode); zero otherwise.
#[derive(Clone, Copy)]
pub struct History<'a> {
    pub z: &'a dyn Fn(f64) -> CVec,
    pub dz: &'a dyn Fn(f64) -> CVec,
}

#[derive(Clone, Copy, Default)]
pub struct SimOptions<'a> {
    /// Apply `u(t) = P ż(t−1) + G v(t)` with `v` the supplied control.
    pub feedback: Option<&'a ControlLaw>,
    pub history: Option<History<'a>>,
}

/// Grid trajectory. Node `j` (`-M ≤ j ≤ N`) is stored at index `j + M`, so
/// the history on `[-1, 0]` is included.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub m: usize,
    pub steps: usize,
    pub z: Vec<CVec>,
    /// Left limits of `ż`.
    pub dz_minus: Vec<CVec>,
    /// Right limits of `ż`.
    pub dz_plus: Vec<CVec>,
    /// Applied control (right limits) at nodes `0..=N`.
    pub u: Vec<CVec>,
}

impl Trajectory {
    pub fn step(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 / self.m as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 / self.m as f64
    }

    /// `z` at node `j ≥ 0`.
    pub fn z_node(&self, j: usize) -> &CVec {
        &self.z[j + self.m]
    }

    /// Linear interpolation of `z` at `t ∈ [-1, T]`.
    pub fn z_at(&self, t: f64) -> CVec {
        let last = self.z.len() - 1;
        let x = ((t + 1.0) * self.m as f64).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        let w = x - i as f64;
        &self.z[i] * c64::new(1.0 - w, 0.0) + &self.z[i + 1] * c64::new(w, 0.0)
    }

    /// `(z(T) − A₋₁ z(T−1), z_T)` on an `m`-cell state grid.
    pub fn terminal_state(&self, sys: &NeutralSystem, m: usize) -> Result<M2State> {
        if self.z[0].len() != sys.n() {
            return Err(Error::Dimension("trajectory and system dimensions differ".into()));
        }
        let t = self.horizon();
        let z: Vec<CVec> = if m == self.m {
            self.z[self.steps..=self.steps + self.m].to_vec()
        } else {
            (0..=m).map(|j| self.z_at(t + node(j, m))).collect()
        };
        let y = &z[m] - &sys.a_minus1 * &z[0];
        M2State::new(y, z)
    }

    /// CSV with columns `t, z_i, dz_i, u_d`; complex parts get `_re`/`_im`
    /// columns when any entry is complex. `ż` is the right limit except at
    /// the last node. Times are multiplied by `delay_h`, rates divided by it.
    pub fn to_csv(&self, delay_h: f64) -> String {
        let complex = self
            .z
            .iter()
            .chain(&self.dz_plus)
            .chain(&self.u)
            .any(|v| v.iter().any(|x| x.im != 0.0));
        let (n, r) = (self.z[0].len(), self.u.first().map_or(0, |u| u.len()));
        let mut s = String::from("t");
        let names = (1..=n)
            .map(|i| format!("z{i}"))
            .chain((1..=n).map(|i| format!("dz{i}")))
            .chain((1..=r).map(|d| format!("u{d}")));
        for name in names {
            if complex {
                let _ = write!(s, ",{name}_re,{name}_im");
            } else {
                let _ = write!(s, ",{name}");
            }
        }
        s.push('\n');
        for j in 0..=self.steps {
            let dz = if j == self.steps { &self.dz_minus[j + self.m] } else { &self.dz_plus[j + self.m] };
            let _ = write!(s, "{:.16e}", self.time(j) * delay_h);
            let rate = c64::new(1.0 / delay_h, 0.0);
            let (dz, u) = (dz * rate, &self.u[j] * rate);
            for x in self.z[j + self.m].iter().chain(dz.iter()).chain(u.iter()) {
                if complex {
                    let _ = write!(s, ",{:.16e},{:.16e}", x.re, x.im);
                } else {
                    let _ = write!(s, ",{:.16e}", x.re);
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Number of grid steps in `[0, T]`; `T` must be grid-aligned.
pub fn grid_steps(horizon: f64, m: usize) -> Result<usize> {
    if m == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidArgument("need T > 0 and M ≥ 1".into()));
    }
    let x = horizon * m as f64;
    let n = x.round();
    if (x - n).abs() > 1e-9 * x.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "T = {horizon} is not a multiple of the step 1/{m}"
        )));
    }
    Ok(n as usize)
}

/// Zero-history run without feedback.
pub fn simulate(sys: &NeutralSystem, u: ControlInput, horizon: f64, m: usize) -> Result<Trajectory> {
    simulate_with(sys, u, horizon, m, &SimOptions::default())
}

/// Kernel values at both ends of every history cell, each taken from the
/// piece that owns the cell.
fn cell_values(k: &crate::kernel::MatrixKernel, m: usize) -> Option<Vec<(CMat, CMat)>> {
    if k.is_zero() {
        return None;
    }
    Some(
        (0..m)
            .map(|i| {
                let (lo, hi) = (node(i, m), node(i + 1, m));
                let p = k.piece_for_cell(lo, hi);
                (k.eval_piece(p, lo), k.eval_piece(p, hi))
            })
            .collect(),
    )
}

pub fn simulate_with(sys: &NeutralSystem, u: ControlInput, horizon: f64, m: usize, opts: &SimOptions) -> Result<Trajectory> {
    let steps = grid_steps(horizon, m)?;
    let (n, h) = (sys.n(), 1.0 / m as f64);
    let half = c64::new(0.5 * h, 0.0);
    let (p, g) = match opts.feedback {
        Some(law) => {
            if law.p.shape() != (sys.r(), n) || law.g.nrows() != sys.r() {
                return Err(Error::Dimension("control law does not match the system".into()));
            }
            (Some(&law.p), Some(&law.g))
        }
        None => (None, None),
    };
    let r_in = g.map_or(sys.r(), |g| g.ncols());
    if let ControlInput::Sampled(s) = u {
        if s.inputs() != r_in {
            return Err(Error::Dimension(format!("control has {} inputs, expected {r_in}", s.inputs())));
        }
        if s.end() < horizon - 1e-9 * horizon.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "control ends at t = {} before T = {horizon}",
                s.end()
            )));
        }
    }
    let input = |t: f64| -> Result<CVec> {
        let v = u.eval(t, r_in);
        if v.len() != r_in {
            return Err(Error::Dimension(format!("control has {} inputs, expected {r_in}", v.len())));
        }
        Ok(match g {
            Some(g) => g * v,
            None => v,
        })
    };

    let total = m + steps + 1;
    let mut z = Vec::with_capacity(total);
    let mut dzm = Vec::with_capacity(total);
    let mut dzp = Vec::with_capacity(total);
    for j in 0..=m {
        let s = node(j, m);
        match opts.history {
            Some(hist) => {
                z.push((hist.z)(s));
                let d = (hist.dz)(s);
                dzm.push(d.clone());
                dzp.push(d);
            }
            None => {
                z.push(CVec::zeros(n));
                dzm.push(CVec::zeros(n));
                dzp.push(CVec::zeros(n));
            }
        }
    }
    if z.iter().chain(&dzm).any(|v| v.len() != n) {
        return Err(Error::Dimension("history has the wrong dimension".into()));
    }

    let k2 = cell_values(&sys.a2, m);
    let k3 = cell_values(&sys.a3, m);
    // distributed terms at node `top` (global index), excluding the θ = 0
    // end when `open` is set
    let distributed = |z: &[CVec], dzm: &[CVec], dzp: &[CVec], top: usize, open: bool| -> CVec {
        let mut acc = CVec::zeros(n);
        let base = top - m;
        for (cells, field_l, field_r) in [(&k2, dzp, dzm), (&k3, z, z)] {
            if let Some(cells) = cells {
                for (i, (kl, kr)) in cells.iter().enumerate() {
                    acc += kl * &field_l[base + i] * half;
                    if !(open && i == m - 1) {
                        acc += kr * &field_r[base + i + 1] * half;
                    }
                }
            }
        }
        acc
    };

    // ż(0⁺) from the right-hand side over the history
    let mut controls = Vec::with_capacity(steps + 1);
    let u0 = {
        let mut v = input(0.0)?;
        if let Some(p) = p {
            v += p * &dzp[0];
        }
        v
    };
    let d0 = &sys.a_minus1 * &dzp[0] + distributed(&z, &dzm, &dzp, m, false) + &sys.b * &u0;
    dzp[m] = d0;
    controls.push(u0);

    // implicit part of the θ = 0 end
    let mut lhs = CMat::identity(n, n);
    let (k2_end, k3_end) = (
        k2.as_ref().map(|c| c[m - 1].1.clone()),
        k3.as_ref().map(|c| c[m - 1].1.clone()),
    );
    if let Some(k) = &k2_end {
        lhs -= k * half;
    }
    if let Some(k) = &k3_end {
        lhs -= k * (half * half);
    }
    let lu = lhs.lu();
    if !lu.is_invertible() {
        return Err(Error::Numerical("step matrix is singular; refine the grid".into()));
    }

    for j in 1..=steps {
        let top = m + j;
        let lag = top - m;
        let t = j as f64 * h;
        let mut ext = input(t)?;
        if let Some(p) = p {
            ext += p * &dzm[lag];
        }
        let mut rhs = &sys.a_minus1 * &dzm[lag] + &sys.b * &ext + distributed(&z, &dzm, &dzp, top, true);
        if let Some(k) = &k3_end {
            let pred = &z[top - 1] + &dzp[top - 1] * half;
            rhs += k * pred * half;
        }
        let d = lu.solve(&rhs).ok_or_else(|| Error::Numerical("step solve failed".into()))?;
        let znew = &z[top - 1] + (&dzp[top - 1] + &d) * half;
        // jumps propagate from t − 1 through the neutral term and the feedback
        let lag_jump = &dzp[lag] - &dzm[lag];
        let mut plus = &d + &sys.a_minus1 * &lag_jump;
        if let Some(p) = p {
            let du = p * &lag_jump;
            plus += &sys.b * &du;
            ext += du;
        }
        z.push(znew);
        dzm.push(d);
        dzp.push(plus);
        controls.push(ext);
    }
    Ok(Trajectory {
        m,
        steps,
        z,
        dz_minus: dzm,
        dz_plus: dzp,
        u: controls,
    })
}
