//! Neutral time-delay systems, their JSON documents, and the characteristic
//! matrix `Δ(λ) = λI − λe^{−λ}A₋₁ − λ∫e^{λs}A₂(s)ds − ∫e^{λs}A₃(s)ds`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelPiece, MatrixKernel};
use crate::linalg::{self, c64, CMat};

/// Rank tolerance used to reject redundant input columns.
const INPUT_RANK_TOL: f64 = 1e-10;

/// `z'(t) = A₋₁ z'(t−1) + ∫A₂(θ)z'(t+θ)dθ + ∫A₃(θ)z(t+θ)dθ + B u(t)`,
/// stored with the delay normalized to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct NeutralSystem {
    pub a_minus1: CMat,
    pub b: CMat,
    pub a2: MatrixKernel,
    pub a3: MatrixKernel,
    /// Physical delay. Internal data are already rescaled to unit delay;
    /// reported times are multiplied by this factor.
    pub delay_h: f64,
}

impl NeutralSystem {
    pub fn new(a_minus1: CMat, b: CMat, a2: MatrixKernel, a3: MatrixKernel) -> Result<Self> {
        let n = a_minus1.nrows();
        if a_minus1.ncols() != n {
            return Err(Error::schema("A_minus1", "must be square"));
        }
        if b.nrows() != n {
            return Err(Error::schema(
                "B",
                format!("expected {n} rows, got {}", b.nrows()),
            ));
        }
        if b.ncols() == 0 || b.ncols() > n {
            return Err(Error::schema("B", "input dimension must be in 1..=n"));
        }
        if linalg::rank(&b, INPUT_RANK_TOL) < b.ncols() {
            return Err(Error::schema("B", "columns are linearly dependent (redundant inputs)"));
        }
        if a2.dim() != n {
            return Err(Error::schema("A2", format!("kernel must be {n}x{n}")));
        }
        if a3.dim() != n {
            return Err(Error::schema("A3", format!("kernel must be {n}x{n}")));
        }
        Ok(NeutralSystem {
            a_minus1,
            b,
            a2,
            a3,
            delay_h: 1.0,
        })
    }

    /// Pure neutral system (`A₂ = A₃ ≡ 0`).
    pub fn pure_neutral(a_minus1: CMat, b: CMat) -> Result<Self> {
        let n = a_minus1.nrows();
        Self::new(a_minus1, b, MatrixKernel::zero(n), MatrixKernel::zero(n))
    }

    pub fn n(&self) -> usize {
        self.a_minus1.nrows()
    }

    pub fn r(&self) -> usize {
        self.b.ncols()
    }

    pub fn is_pure_neutral(&self) -> bool {
        self.a2.is_zero() && self.a3.is_zero()
    }

    /// True when every matrix and kernel coefficient is real.
    pub fn is_real(&self) -> bool {
        let real = |m: &CMat| m.iter().all(|z| z.im == 0.0);
        let kreal = |k: &MatrixKernel| k.pieces().iter().all(|p| p.coeffs.iter().all(real));
        real(&self.a_minus1) && real(&self.b) && kreal(&self.a2) && kreal(&self.a3)
    }

    /// Characteristic matrix `Δ(λ)`.
    pub fn delta(&self, lambda: c64) -> CMat {
        let n = self.n();
        let mut d = CMat::identity(n, n) * lambda;
        d -= &self.a_minus1 * (lambda * (-lambda).exp());
        if !self.a2.is_zero() {
            d -= self.a2.laplace(lambda) * lambda;
        }
        if !self.a3.is_zero() {
            d -= self.a3.laplace(lambda);
        }
        d
    }

    /// `dΔ/dλ`.
    pub fn delta_derivative(&self, lambda: c64) -> CMat {
        let n = self.n();
        let e = (-lambda).exp();
        let mut d = CMat::identity(n, n);
        d -= &self.a_minus1 * (e - lambda * e);
        if !self.a2.is_zero() {
            d -= self.a2.laplace(lambda);
            d -= self.a2.laplace_derivative(lambda) * lambda;
        }
        if !self.a3.is_zero() {
            d -= self.a3.laplace_derivative(lambda);
        }
        d
    }

    /// Same system with a different neutral matrix (used for feedback `A₋₁ + BP`).
    pub fn with_neutral(&self, a_minus1: CMat) -> Self {
        NeutralSystem {
            a_minus1,
            ..self.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SystemDoc = serde_json::from_str(text)?;
        doc.into_system()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Document form of the normalized (unit-delay) system.
    pub fn to_document(&self) -> SystemDoc {
        let pieces = |k: &MatrixKernel| {
            k.pieces()
                .iter()
                .map(|p| PieceDoc {
                    interval: [p.a, p.b],
                    coeffs: p.coeffs.iter().map(matrix_to_doc).collect(),
                })
                .collect()
        };
        SystemDoc {
            n: self.n(),
            r: self.r(),
            a_minus1: matrix_to_doc(&self.a_minus1),
            b: matrix_to_doc(&self.b),
            a2: pieces(&self.a2),
            a3: pieces(&self.a3),
            delay_h: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("serializable")
    }
}

/// Matrix entry: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> c64 {
        match self {
            Entry::Real(x) => c64::new(x, 0.0),
            Entry::Complex([x, y]) => c64::new(x, y),
        }
    }

    pub fn from_value(z: c64) -> Self {
        if z.im == 0.0 {
            Entry::Real(z.re)
        } else {
            Entry::Complex([z.re, z.im])
        }
    }
}

pub type MatrixDoc = Vec<Vec<Entry>>;

pub fn matrix_to_doc(m: &CMat) -> MatrixDoc {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Entry::from_value(m[(i, j)])).collect())
        .collect()
}

/// Parses a row-major matrix with the expected shape.
pub fn matrix_from_doc(doc: &MatrixDoc, rows: usize, cols: usize, path: &str) -> Result<CMat> {
    if doc.len() != rows {
        return Err(Error::schema(path, format!("expected {rows} rows, got {}", doc.len())));
    }
    let mut m = CMat::zeros(rows, cols);
    for (i, row) in doc.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::schema(
                format!("{path}[{i}]"),
                format!("expected {cols} entries, got {}", row.len()),
            ));
        }
        for (j, e) in row.iter().enumerate() {
            let z = e.value();
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::schema(format!("{path}[{i}][{j}]"), "non-finite entry"));
            }
            m[(i, j)] = z;
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceDoc {
    pub interval: [f64; 2],
    pub coeffs: Vec<MatrixDoc>,
}

/// JSON system document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    pub n: usize,
    pub r: usize,
    #[serde(rename = "A_minus1")]
    pub a_minus1: MatrixDoc,
    #[serde(rename = "B")]
    pub b: MatrixDoc,
    #[serde(rename = "A2", default)]
    pub a2: Vec<PieceDoc>,
    #[serde(rename = "A3", default)]
    pub a3: Vec<PieceDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_h: Option<f64>,
}

impl SystemDoc {
    pub fn into_system(self) -> Result<NeutralSystem> {
        let (n, r) = (self.n, self.r);
        if n == 0 {
            return Err(Error::schema("n", "must be positive"));
        }
        let h = self.delay_h.unwrap_or(1.0);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::schema("delay_h", "must be a positive real"));
        }
        let a = matrix_from_doc(&self.a_minus1, n, n, "A_minus1")?;
        let b = matrix_from_doc(&self.b, n, r, "B")?;
        let kernel = |docs: &[PieceDoc], name: &str, factor: f64| -> Result<MatrixKernel> {
            let mut pieces = Vec::with_capacity(docs.len());
            for (i, p) in docs.iter().enumerate() {
                let coeffs = p
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| matrix_from_doc(c, n, n, &format!("{name}[{i}].coeffs[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                pieces.push(KernelPiece {
                    a: p.interval[0],
                    b: p.interval[1],
                    coeffs,
                });
            }
            // kernels on [-h, 0] become unit-delay kernels h*A2(h s), h^2*A3(h s)
            let pieces = if h != 1.0 {
                MatrixKernel::rescaled(pieces, h, factor)
            } else {
                pieces
            };
            MatrixKernel::new(n, pieces, name)
        };
        let a2 = kernel(&self.a2, "A2", h)?;
        let a3 = kernel(&self.a3, "A3", h * h)?;
        let mut sys = NeutralSystem::new(a, b, a2, a3)?;
        sys.delay_h = h;
        Ok(sys)
    }
}
