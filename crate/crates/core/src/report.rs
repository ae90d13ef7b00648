//! Controllability verdicts and the analyze / steer / report pipelines.

use serde::Serialize;

use crate::canonical::{
    admissible_spectrum, apply_transform, default_targets, kalman_analysis, regularize_neutral, to_frobenius,
    to_frobenius_with_spectrum, CanonicalTransform, ControlLaw, KalmanReport, RANK_TOL,
};
use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{self, c64, CMat, CVec};
use crate::moment::{
    conditioning_report, synthesize_control, target_moments, Conditioning, MomentReport, MomentRow, MomentSystem,
    SteeringControl, TargetMoments,
};
use crate::simulate::{simulate_with, ControlInput, SimOptions, Trajectory};
use crate::spectral::{compute_spectrum, Spectrum, SpectrumWindow, Uncertified};
use crate::state::{steering_error, M2State};
use crate::system::NeutralSystem;

/// `‖B* y‖ ≤ WITNESS_TOL · ‖B‖` marks a common left kernel vector.
pub const WITNESS_TOL: f64 = 1e-8;

/// Singular values of `Δ(λ)` up to this fraction of the largest count as zero.
const KERNEL_TOL: f64 = 1e-7;

pub const EXIT_CONTROLLABLE: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONTROLLABLE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "exactly-controllable (window-certified)")]
    ExactlyControllable,
    #[serde(rename = "not-controllable")]
    NotControllable,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::ExactlyControllable => EXIT_CONTROLLABLE,
            Verdict::NotControllable => EXIT_NOT_CONTROLLABLE,
            Verdict::Inconclusive => EXIT_INCONCLUSIVE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ExactlyControllable => "exactly-controllable (window-certified)",
            Verdict::NotControllable => "not-controllable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Root `λ` of `det Δ` with a unit `y`, `Δ(λ)* y = 0`, `B* y = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct RootWitness {
    #[serde(serialize_with = "json::complex")]
    pub lambda: c64,
    #[serde(serialize_with = "json::cvec")]
    pub y: CVec,
    /// `‖Δ(λ)* y‖`.
    pub delta_residual: f64,
    /// `‖B* y‖`.
    pub b_residual: f64,
}

impl RootWitness {
    pub fn new(sys: &NeutralSystem, lambda: c64, y: CVec) -> Self {
        let y = linalg::normalize_phase(&y);
        let (delta_residual, b_residual) = witness_residuals(sys, lambda, &y);
        RootWitness {
            lambda,
            y,
            delta_residual,
            b_residual,
        }
    }
}

/// `(‖Δ(λ)* y‖, ‖B* y‖)` evaluated afresh.
pub fn witness_residuals(sys: &NeutralSystem, lambda: c64, y: &CVec) -> (f64, f64) {
    ((sys.delta(lambda).adjoint() * y).norm(), (sys.b.adjoint() * y).norm())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionI {
    /// `None` when the scan could not be run.
    pub pass: Option<bool>,
    pub witness: Option<RootWitness>,
    pub roots_checked: usize,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionII {
    pub pass: bool,
    pub kalman: KalmanReport,
    /// `(‖A₋₁* y − μ̄ y‖, ‖B* y‖)` of the witness.
    pub witness_residuals: Option<(f64, f64)>,
}

/// Newton on `u* [Δ(λ) B] v` with frozen singular vectors; returns the
/// improved root and left vector when the smallest singular value drops.
fn refine_witness(sys: &NeutralSystem, lambda: c64, y: &CVec) -> (c64, CVec) {
    let (n, r) = (sys.n(), sys.r());
    let stacked = |l: c64| {
        let mut m = CMat::zeros(n, n + r);
        m.view_mut((0, 0), (n, n)).copy_from(&sys.delta(l));
        m.view_mut((0, n), (n, r)).copy_from(&sys.b);
        m
    };
    let (mut best_l, mut best_y) = (lambda, y.clone());
    let mut best_s = (stacked(lambda).adjoint() * y).norm();
    let mut l = lambda;
    for _ in 0..20 {
        let (s, _, u, v) = linalg::smallest_singular(&stacked(l));
        if s < best_s {
            best_s = s;
            best_l = l;
            best_y = u.clone();
        }
        let f = u.dotc(&(stacked(l) * &v));
        let fp = u.dotc(&(sys.delta_derivative(l) * v.rows(0, n)));
        if fp.norm() == 0.0 || f.norm() == 0.0 {
            break;
        }
        let step = f / fp;
        l -= step;
        if step.norm() < 1e-15 * (1.0 + l.norm()) {
            let (s, _, u, _) = linalg::smallest_singular(&stacked(l));
            if s < best_s {
                best_l = l;
                best_y = u;
            }
            break;
        }
    }
    (best_l, best_y)
}

/// Searches every computed root (eigen triples and excluded multiple roots)
/// for a unit left kernel vector of `Δ(λ)` orthogonal to the columns of `B`.
pub fn check_condition_i(sys: &NeutralSystem, spectrum: &Spectrum) -> ConditionI {
    let bnorm = sys.b.norm().max(f64::MIN_POSITIVE);
    let roots = spectrum
        .triples
        .iter()
        .map(|t| t.lambda)
        .chain(spectrum.excluded.iter().map(|e| e.lambda));
    let mut checked = 0;
    for lambda in roots {
        checked += 1;
        let d = sys.delta(lambda);
        let scale = 1.0 + lambda.norm();
        let kernel = linalg::null_space(&d.adjoint(), KERNEL_TOL, scale);
        if kernel.ncols() == 0 {
            continue;
        }
        // smallest ‖B* N c‖ over unit c
        let bn = sys.b.adjoint() * &kernel;
        let c = if kernel.ncols() > bn.nrows() {
            linalg::null_space(&bn, 0.0, 1.0).column(0).into_owned()
        } else {
            linalg::smallest_singular(&bn).3
        };
        let y = &kernel * c;
        if (sys.b.adjoint() * &y).norm() <= WITNESS_TOL * bnorm {
            let (l, y) = refine_witness(sys, lambda, &y);
            return ConditionI {
                pass: Some(false),
                witness: Some(RootWitness::new(sys, l, y)),
                roots_checked: checked,
                note: None,
            };
        }
    }
    ConditionI {
        pass: Some(true),
        witness: None,
        roots_checked: checked,
        note: Some("no common left kernel vector among the roots in the window".into()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSummary {
    pub triples: usize,
    pub exceptional: usize,
    pub excluded: Vec<crate::spectral::ExcludedRoot>,
    pub rectangle_winding: Option<i64>,
    pub scan_error: Option<String>,
}

impl SpectrumSummary {
    fn new(sp: &Spectrum) -> Self {
        SpectrumSummary {
            triples: sp.triples.len(),
            exceptional: sp.exceptional().count(),
            excluded: sp.excluded.clone(),
            rectangle_winding: sp.rectangle_winding,
            scan_error: sp.scan_error.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub r: usize,
    pub delay_h: f64,
    pub condition_ii: ConditionII,
    pub condition_i: ConditionI,
    pub n1: Option<usize>,
    pub critical_time: Option<f64>,
    pub verdict: Verdict,
    pub uncertified: Vec<Uncertified>,
    pub transform: Option<CanonicalTransform>,
    pub window: SpectrumWindow,
    pub spectrum: Option<SpectrumSummary>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Analysis with the intermediate objects the other pipelines reuse.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub transformed: Option<NeutralSystem>,
    pub law: Option<ControlLaw>,
    pub spectrum: Option<Spectrum>,
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeOptions {
    pub window: SpectrumWindow,
    /// Requested `σ(A₋₁ + BP)`; otherwise the natural Frobenius spectrum when
    /// admissible, else `{2, …, n+1}`.
    pub spectrum: Option<Vec<c64>>,
}

/// Frobenius transform used by the pipelines.
pub fn choose_transform(sys: &NeutralSystem, spectrum: Option<&[c64]>) -> Result<CanonicalTransform> {
    let (a, b) = (&sys.a_minus1, &sys.b);
    match spectrum {
        Some(t) => to_frobenius_with_spectrum(a, b, t),
        None => {
            let t = to_frobenius(a, b)?;
            if admissible_spectrum(&linalg::eigenvalues(&t.a_hat)) {
                Ok(t)
            } else {
                to_frobenius_with_spectrum(a, b, &default_targets(sys.n()))
            }
        }
    }
}

pub fn analyze(sys: &NeutralSystem, opts: &AnalyzeOptions) -> Result<Analysis> {
    let n = sys.n();
    let kalman = kalman_analysis(&sys.a_minus1, &sys.b, RANK_TOL).map_err(|e| e.at("kalman"))?;
    let pass_ii = kalman.controllable(n);
    let condition_ii = ConditionII {
        pass: pass_ii,
        witness_residuals: kalman.witness.as_ref().map(|w| w.residuals(&sys.a_minus1, &sys.b)),
        kalman,
    };
    let window = opts.window;

    if !pass_ii {
        // condition (i) is still scanned on a feedback-regularized copy when
        // its spectrum is computable
        let condition_i = match regularize_neutral(&sys.a_minus1, &sys.b)
            .and_then(|p| {
                let reg = sys.with_neutral(&sys.a_minus1 + &sys.b * p);
                compute_spectrum(&reg, &window).map(|sp| (reg, sp))
            }) {
            Ok((reg, sp)) => {
                let mut c = check_condition_i(&reg, &sp);
                // B* y = 0 makes the witness valid for the unregularized system
                if let Some(w) = c.witness.take() {
                    c.witness = Some(RootWitness::new(sys, w.lambda, w.y));
                }
                c
            }
            Err(e) => ConditionI {
                pass: None,
                witness: None,
                roots_checked: 0,
                note: Some(format!("not evaluated: {e}")),
            },
        };
        return Ok(Analysis {
            report: AnalysisReport {
                n,
                r: sys.r(),
                delay_h: sys.delay_h,
                condition_ii,
                condition_i,
                n1: None,
                critical_time: None,
                verdict: Verdict::NotControllable,
                uncertified: Vec::new(),
                transform: None,
                window,
                spectrum: None,
            },
            transformed: None,
            law: None,
            spectrum: None,
        });
    }

    let transform = choose_transform(sys, opts.spectrum.as_deref()).map_err(|e| e.at("canonical-transform"))?;
    let (tsys, law) = apply_transform(sys, &transform).map_err(|e| e.at("canonical-transform"))?;
    let spectrum = compute_spectrum(&tsys, &window).map_err(|e| e.at("spectral"))?;
    let mut condition_i = check_condition_i(&tsys, &spectrum);
    if let Some(w) = condition_i.witness.take() {
        // ŷ ↦ C^{-H} ŷ
        let y = transform.c_inv.adjoint() * &w.y;
        condition_i.witness = Some(RootWitness::new(sys, w.lambda, &y / c64::new(y.norm(), 0.0)));
    }
    let verdict = if condition_i.witness.is_some() {
        Verdict::NotControllable
    } else if !spectrum.complete() {
        Verdict::Inconclusive
    } else {
        Verdict::ExactlyControllable
    };
    let n1 = condition_ii.kalman.n1;
    Ok(Analysis {
        report: AnalysisReport {
            n,
            r: sys.r(),
            delay_h: sys.delay_h,
            condition_ii,
            condition_i,
            n1: Some(n1),
            critical_time: (verdict != Verdict::NotControllable).then_some(n1 as f64 * sys.delay_h),
            verdict,
            uncertified: spectrum.uncertified.clone(),
            transform: Some(transform),
            window,
            spectrum: Some(SpectrumSummary::new(&spectrum)),
        },
        transformed: Some(tsys),
        law: Some(law),
        spectrum: Some(spectrum),
    })
}

/// State of the transformed system matching `x` of the original:
/// `ŵ = C⁻¹ z`, `ŷ = C⁻¹ (y − B P z(−1))`.
pub fn to_transformed_state(sys: &NeutralSystem, law: &ControlLaw, x: &M2State) -> Result<M2State> {
    let c_inv = law
        .c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("similarity C is singular".into()))?;
    let y = &c_inv * (&x.y - &sys.b * &law.p * &x.z[0]);
    M2State::new(y, x.z.iter().map(|z| &c_inv * z).collect())
}

#[derive(Clone, Debug)]
pub struct SteerOptions {
    /// Horizon in the system's time units.
    pub horizon: f64,
    pub window: SpectrumWindow,
    pub grid: usize,
    pub allow_subcritical: bool,
    pub regularization: f64,
    pub spectrum: Option<Vec<c64>>,
    pub domain_tol: f64,
}

impl Default for SteerOptions {
    fn default() -> Self {
        SteerOptions {
            horizon: 0.0,
            window: SpectrumWindow::default(),
            grid: 400,
            allow_subcritical: false,
            regularization: 0.0,
            spectrum: None,
            domain_tol: crate::moment::DOMAIN_TOL,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verification {
    pub verdict: Verdict,
    pub horizon: f64,
    pub critical_time: Option<f64>,
    pub k_max: usize,
    pub grid: usize,
    pub rows: usize,
    pub moment_residual: f64,
    pub gram_condition: f64,
    pub control_norm: f64,
    pub terminal_error: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SteerOutcome {
    pub analysis: Analysis,
    pub moments: TargetMoments,
    pub moment_report: MomentReport,
    pub control: SteeringControl,
    pub trajectory: Trajectory,
    pub terminal: M2State,
    pub verification: Verification,
}

impl SteerOutcome {
    pub fn verification_json(&self) -> String {
        serde_json::to_string_pretty(&self.verification).expect("serializable")
    }

    pub fn moment_report_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(flatten)]
            report: &'a MomentReport,
            target: &'a TargetMoments,
        }
        serde_json::to_string_pretty(&Doc {
            report: &self.moment_report,
            target: &self.moments,
        })
        .expect("serializable")
    }
}

/// Steers the zero state to `target` at the given horizon: moments on the
/// transformed system, least-norm control, and a simulation of the original
/// system under `u = P ż(t−1) + G v`.
pub fn steer(sys: &NeutralSystem, target: &M2State, opts: &SteerOptions) -> Result<SteerOutcome> {
    if target.n() != sys.n() {
        return Err(Error::Dimension(format!("target has dimension {}, system has {}", target.n(), sys.n())));
    }
    let analysis = analyze(
        sys,
        &AnalyzeOptions {
            window: opts.window,
            spectrum: opts.spectrum.clone(),
        },
    )?;
    let mut warnings = Vec::new();
    match analysis.report.verdict {
        Verdict::NotControllable => {
            return Err(Error::NotControllable(match &analysis.report.condition_i.witness {
                Some(w) => format!("common left kernel at λ = {}", w.lambda),
                None => "condition on (A₋₁, B) fails".into(),
            }))
        }
        Verdict::Inconclusive => warnings.push("spectrum not fully certified; verdict inconclusive".into()),
        Verdict::ExactlyControllable => {}
    }
    let h = sys.delay_h;
    let horizon = opts.horizon / h;
    let critical = analysis.report.n1.unwrap_or(0) as f64;
    if horizon <= critical * (1.0 + 1e-12) {
        if !opts.allow_subcritical {
            return Err(Error::Subcritical {
                time: opts.horizon,
                critical: critical * h,
            });
        }
        warnings.push(format!("horizon {} is not above the critical time {}", opts.horizon, critical * h));
    }
    let (tsys, law, spectrum) = match (&analysis.transformed, &analysis.law, &analysis.spectrum) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => unreachable!("controllable analysis carries its transform"),
    };

    let check = target.validate_domain(sys, opts.domain_tol)?;
    if !check.member {
        return Err(Error::NotInDomain {
            residual: check.residual,
            tol: opts.domain_tol,
        }
        .at("moment"));
    }
    let that = to_transformed_state(sys, law, target)?;
    // the transformed state meets its own domain condition by construction;
    // scale the tolerance so rounding in C⁻¹ cannot reject it
    let moments = target_moments(tsys, &spectrum.triples, &that, opts.domain_tol.max(1e-12) * 1e3)
        .map_err(|e| e.at("moment"))?;
    if target.norm() > 0.0 && moments.s.iter().all(|s| s.norm() == 0.0) {
        return Err(Error::InvalidArgument("target has no component on the computed eigenvectors".into()).at("moment"));
    }
    let ms = MomentSystem::new(tsys, spectrum, &moments.s, horizon).map_err(|e| e.at("moment"))?;
    let control = synthesize_control(&ms, opts.regularization).map_err(|e| e.at("moment"))?;
    if let Some(f) = &control.fallback {
        warnings.push(f.clone());
    }
    if sys.is_real() && target.y.iter().chain(target.z.iter().flatten()).all(|z| z.im == 0.0) {
        let frac = control.imaginary_fraction(opts.grid);
        if frac > 1e-9 {
            warnings.push(format!("control has relative imaginary part {frac:.2e}"));
        }
    }
    let moment_report = MomentReport::new(&ms, &control);

    let v = |t: f64| control.eval(t);
    let trajectory = simulate_with(
        sys,
        ControlInput::Function(&v),
        horizon,
        opts.grid,
        &SimOptions {
            feedback: Some(law),
            history: None,
        },
    )
    .map_err(|e| e.at("simulate"))?;
    let terminal = trajectory.terminal_state(sys, target.grid_size()).map_err(|e| e.at("simulate"))?;
    let terminal_error = steering_error(&terminal, target);
    let verification = Verification {
        verdict: analysis.report.verdict,
        horizon: opts.horizon,
        critical_time: analysis.report.critical_time,
        k_max: opts.window.k_max,
        grid: opts.grid,
        rows: ms.rows.len(),
        moment_residual: control.moment_residual,
        gram_condition: moment_report.gram.condition,
        control_norm: control.norm,
        terminal_error,
        warnings,
    };
    Ok(SteerOutcome {
        analysis,
        moments,
        moment_report,
        control,
        trajectory,
        terminal,
        verification,
    })
}

/// Moment rows (without right-hand sides) of every triple.
pub fn moment_rows(sys: &NeutralSystem, spectrum: &Spectrum) -> Vec<MomentRow> {
    spectrum
        .triples
        .iter()
        .map(|t| MomentRow::from_triple(t, &sys.b, c64::new(0.0, 0.0)))
        .collect()
}

/// Default horizons of the conditioning table: multiples of the critical time.
pub fn default_horizons(critical: f64) -> Vec<f64> {
    [0.5, 0.75, 1.0, 1.25, 1.5, 2.0].iter().map(|f| f * critical).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub analysis: AnalysisReport,
    /// Horizons in the system's time units.
    pub conditioning: Vec<Conditioning>,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Analysis plus the Gram conditioning table; `horizons` are in the system's
/// time units and default to multiples of the critical time.
pub fn report(sys: &NeutralSystem, opts: &AnalyzeOptions, horizons: Option<&[f64]>) -> Result<(RunRecord, Option<Spectrum>)> {
    let analysis = analyze(sys, opts)?;
    let conditioning = match (&analysis.transformed, &analysis.spectrum) {
        (Some(tsys), Some(sp)) => {
            let hs = match horizons {
                Some(h) => h.to_vec(),
                None => default_horizons(analysis.report.n1.unwrap_or(1).max(1) as f64 * sys.delay_h),
            };
            let rows = moment_rows(tsys, sp);
            let normalized: Vec<f64> = hs.iter().map(|t| t / sys.delay_h).collect();
            conditioning_report(&rows, &normalized)
                .map_err(|e| e.at("moment"))?
                .into_iter()
                .map(|mut c| {
                    c.horizon *= sys.delay_h;
                    c
                })
                .collect()
        }
        _ => Vec::new(),
    };
    Ok((
        RunRecord {
            analysis: analysis.report,
            conditioning,
        },
        analysis.spectrum,
    ))
}
