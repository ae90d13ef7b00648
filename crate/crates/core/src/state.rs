//! States of the product space `M2 = C^n x L2(-1, 0; C^n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat, CVec};
use crate::system::{Entry, NeutralSystem};

pub const DEFAULT_GRID: usize = 200;

/// `(y, z(.))` with `z` sampled at `θ_j = -1 + j/M`, `j = 0..=M`, and
/// interpolated linearly between samples.
#[derive(Clone, Debug, PartialEq)]
pub struct M2State {
    pub y: CVec,
    pub z: Vec<CVec>,
}

/// Result of the domain check `y = z(0) - A₋₁ z(-1)`, `z ∈ H¹`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainCheck {
    pub member: bool,
    pub residual: f64,
    /// Discrete H¹ seminorm of `z` on the stored grid.
    pub h1_seminorm: f64,
    /// False when the seminorm grows markedly under refinement (jump-like
    /// history, not in H¹).
    pub h1_bounded: bool,
}

impl M2State {
    pub fn new(y: CVec, z: Vec<CVec>) -> Result<Self> {
        if z.len() < 3 {
            return Err(Error::Dimension("history grid needs M >= 2".into()));
        }
        let n = y.len();
        if let Some(j) = z.iter().position(|v| v.len() != n) {
            return Err(Error::Dimension(format!(
                "history sample {j} has length {}, expected {n}",
                z[j].len()
            )));
        }
        Ok(M2State { y, z })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        M2State {
            y: CVec::zeros(n),
            z: vec![CVec::zeros(n); m + 1],
        }
    }

    /// Samples `f` on the grid.
    pub fn from_fn(y: CVec, m: usize, f: impl Fn(f64) -> CVec) -> Result<Self> {
        let z = (0..=m).map(|j| f(node(j, m))).collect();
        Self::new(y, z)
    }

    /// Samples `f` and sets the head from the domain condition.
    pub fn in_domain(a_minus1: &CMat, m: usize, f: impl Fn(f64) -> CVec) -> Result<Self> {
        let z: Vec<CVec> = (0..=m).map(|j| f(node(j, m))).collect();
        let y = &z[m] - a_minus1 * &z[0];
        Self::new(y, z)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn grid_size(&self) -> usize {
        self.z.len() - 1
    }

    pub fn step(&self) -> f64 {
        1.0 / self.grid_size() as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        node(j, self.grid_size())
    }

    /// Linear interpolation of the history at `θ ∈ [-1, 0]`.
    pub fn tail(&self, theta: f64) -> CVec {
        let m = self.grid_size();
        let x = ((theta + 1.0) * m as f64).clamp(0.0, m as f64);
        let j = (x.floor() as usize).min(m - 1);
        let w = x - j as f64;
        &self.z[j] * c64::new(1.0 - w, 0.0) + &self.z[j + 1] * c64::new(w, 0.0)
    }

    /// Same state resampled onto an `m`-cell grid.
    pub fn resample(&self, m: usize) -> Self {
        if m == self.grid_size() {
            return self.clone();
        }
        M2State {
            y: self.y.clone(),
            z: (0..=m).map(|j| self.tail(node(j, m))).collect(),
        }
    }

    /// `⟨self, other⟩ = other.y^H self.y + ∫ other.z^H self.z` (trapezoid).
    /// `other` is resampled if the grids differ.
    pub fn inner(&self, other: &M2State) -> c64 {
        let other = other.resample(self.grid_size());
        let h = self.step();
        let m = self.grid_size();
        let mut tail = c64::new(0.0, 0.0);
        for j in 0..=m {
            let w = if j == 0 || j == m { 0.5 } else { 1.0 };
            tail += other.z[j].dotc(&self.z[j]) * w;
        }
        other.y.dotc(&self.y) + tail * h
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn scale(&self, a: c64) -> Self {
        M2State {
            y: &self.y * a,
            z: self.z.iter().map(|v| v * a).collect(),
        }
    }

    pub fn sub(&self, other: &M2State) -> Self {
        let other = other.resample(self.grid_size());
        M2State {
            y: &self.y - &other.y,
            z: self.z.iter().zip(&other.z).map(|(a, b)| a - b).collect(),
        }
    }

    /// Maps both components by a constant matrix (`x ↦ M x`).
    pub fn map(&self, m: &CMat) -> Self {
        M2State {
            y: m * &self.y,
            z: self.z.iter().map(|v| m * v).collect(),
        }
    }

    /// `‖y - z(0) + A₋₁ z(-1)‖`.
    pub fn domain_residual(&self, a_minus1: &CMat) -> f64 {
        (&self.y - &self.z[self.grid_size()] + a_minus1 * &self.z[0]).norm()
    }

    fn h1_seminorm_stride(&self, stride: usize) -> f64 {
        let h = self.step() * stride as f64;
        let mut acc = 0.0;
        let mut j = 0;
        while j + stride <= self.grid_size() {
            acc += (&self.z[j + stride] - &self.z[j]).norm_squared() / h;
            j += stride;
        }
        acc.sqrt()
    }

    /// Domain membership at tolerance `tol` (relative to `max(1, ‖x‖)`).
    pub fn validate_domain(&self, sys: &NeutralSystem, tol: f64) -> Result<DomainCheck> {
        if self.n() != sys.n() {
            return Err(Error::Dimension(format!(
                "state has dimension {}, system has {}",
                self.n(),
                sys.n()
            )));
        }
        let residual = self.domain_residual(&sys.a_minus1);
        let fine = self.h1_seminorm_stride(1);
        // a jump of size J gives seminorm ~ J / sqrt(h): it grows by sqrt(2)
        // per halving, while smooth data converge
        let h1_bounded = if self.grid_size() >= 8 && self.grid_size() % 2 == 0 {
            let coarse = self.h1_seminorm_stride(2);
            fine <= 1.2 * coarse + 1e-12
        } else {
            fine.is_finite()
        };
        let member = residual <= tol * self.norm().max(1.0) && h1_bounded;
        Ok(DomainCheck {
            member,
            residual,
            h1_seminorm: fine,
            h1_bounded,
        })
    }

    pub fn from_json(text: &str, n: usize) -> Result<Self> {
        let doc: StateDoc = serde_json::from_str(text)?;
        doc.into_state(n)
    }

    pub fn to_json(&self) -> String {
        let vec = |v: &CVec| v.iter().map(|&z| Entry::from_value(z)).collect();
        let doc = StateDoc {
            y: vec(&self.y),
            grid: self.z.iter().map(vec).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }
}

/// `‖achieved - target‖ / max(‖target‖, 1)`.
pub fn steering_error(achieved: &M2State, target: &M2State) -> f64 {
    let diff = achieved.resample(target.grid_size()).sub(target);
    diff.norm() / target.norm().max(1.0)
}

pub fn node(j: usize, m: usize) -> f64 {
    -1.0 + j as f64 / m as f64
}

/// JSON state document: head `y` and history samples, one row per grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub y: Vec<Entry>,
    pub grid: Vec<Vec<Entry>>,
}

impl StateDoc {
    pub fn into_state(self, n: usize) -> Result<M2State> {
        let parse = |v: &[Entry], path: String| -> Result<CVec> {
            if v.len() != n {
                return Err(Error::schema(path, format!("expected {n} entries, got {}", v.len())));
            }
            Ok(CVec::from_iterator(n, v.iter().map(|e| e.value())))
        };
        let y = parse(&self.y, "y".into())?;
        if self.grid.len() < 3 {
            return Err(Error::schema("grid", "need at least 3 samples (M >= 2)"));
        }
        let z = self
            .grid
            .iter()
            .enumerate()
            .map(|(j, row)| parse(row, format!("grid[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        M2State::new(y, z)
    }
}
