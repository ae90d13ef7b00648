//! Browser bindings: spectrum, Gram conditioning against the horizon, and
//! steering. Every call takes a system as JSON text and returns JSON text.

use wasm_bindgen::prelude::*;

pub mod api {
    use serde_json::{json, Value};

    use neutral_control::report::{analyze, report, steer, AnalyzeOptions, SteerOptions};
    use neutral_control::spectral::{compute_spectrum, phi_state, SpectrumWindow};
    use neutral_control::state::M2State;
    use neutral_control::system::NeutralSystem;
    use neutral_control::CVec;

    const PRESETS: &[(&str, &str)] = &[
        ("scalar_pilot", include_str!("../../../data/scalar_pilot.json")),
        ("example3d", include_str!("../../../data/example3d.json")),
        ("example3d_a3", include_str!("../../../data/example3d_a3.json")),
        ("common_root", include_str!("../../../data/common_root.json")),
        ("uncontrollable_pair", include_str!("../../../data/uncontrollable_pair.json")),
    ];

    pub fn preset_names() -> Vec<&'static str> {
        PRESETS.iter().map(|p| p.0).collect()
    }

    pub fn preset(name: &str) -> Option<&'static str> {
        PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
    }

    fn load(text: &str) -> Result<NeutralSystem, String> {
        NeutralSystem::from_json(text).map_err(|e| e.to_string())
    }

    fn window(kmax: u32) -> SpectrumWindow {
        SpectrumWindow::with_kmax(kmax as usize)
    }

    fn re_parts(v: &CVec) -> Vec<f64> {
        v.iter().map(|z| z.re).collect()
    }

    pub fn spectrum(system: &str, kmax: u32) -> Result<String, String> {
        let sys = load(system)?;
        let sp = compute_spectrum(&sys, &window(kmax)).map_err(|e| e.to_string())?;
        let a = analyze(&sys, &AnalyzeOptions { window: window(kmax), spectrum: None }).map_err(|e| e.to_string())?;
        let roots: Vec<Value> = sp
            .triples
            .iter()
            .map(|t| json!({"m": t.m, "k": t.k, "re": t.lambda.re, "im": t.lambda.im, "certified": t.certified, "exceptional": t.exceptional}))
            .collect();
        Ok(json!({
            "verdict": a.report.verdict.as_str(),
            "critical_time": a.report.critical_time,
            "complete": sp.complete(),
            "uncertified": sp.uncertified.len(),
            "roots": roots,
        })
        .to_string())
    }

    /// Gram conditioning at `count` horizons spread over `[t_lo, t_hi]`.
    pub fn conditioning(system: &str, kmax: u32, t_lo: f64, t_hi: f64, count: u32) -> Result<String, String> {
        if !(t_lo > 0.0 && t_hi > t_lo) || count < 2 {
            return Err("need 0 < t_lo < t_hi and at least two horizons".into());
        }
        let sys = load(system)?;
        let hs: Vec<f64> = (0..count).map(|i| t_lo + (t_hi - t_lo) * i as f64 / (count - 1) as f64).collect();
        let (record, _) = report(&sys, &AnalyzeOptions { window: window(kmax), spectrum: None }, Some(&hs)).map_err(|e| e.to_string())?;
        Ok(json!({
            "verdict": record.analysis.verdict.as_str(),
            "critical_time": record.analysis.critical_time,
            "points": record.conditioning,
        })
        .to_string())
    }

    /// Steers to `target` (state JSON), or when it is empty to the
    /// eigenfunction of the first chain root.
    pub fn steer_to(system: &str, target: &str, horizon: f64, kmax: u32, grid: u32, allow_subcritical: bool) -> Result<String, String> {
        let sys = load(system)?;
        let grid = grid.max(20) as usize;
        let target = if target.trim().is_empty() {
            let sp = compute_spectrum(&sys, &window(1)).map_err(|e| e.to_string())?;
            let t = sp.chain(1, 0).ok_or("no root on the first chain")?;
            phi_state(&sys, t.lambda, &t.x, grid)
        } else {
            M2State::from_json(target, sys.n()).map_err(|e| e.to_string())?
        };
        let o = steer(
            &sys,
            &target,
            &SteerOptions {
                horizon,
                window: window(kmax),
                grid,
                allow_subcritical,
                ..SteerOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let h = sys.delay_h;
        let steps = 200;
        let t_end = horizon / h;
        let control: Vec<Value> = (0..=steps)
            .map(|j| {
                let s = t_end * j as f64 / steps as f64;
                json!([s * h, re_parts(&(o.control.eval(s) / neutral_control::c64::new(h, 0.0)))])
            })
            .collect();
        let profile = |x: &M2State| -> Vec<Value> {
            (0..=100)
                .map(|j| {
                    let th = -(j as f64) / 100.0;
                    json!([th * h, re_parts(&x.tail(th))])
                })
                .collect()
        };
        Ok(json!({
            "verification": o.verification,
            "control": control,
            "target": profile(&target),
            "achieved": profile(&o.terminal),
        })
        .to_string())
    }
}

#[wasm_bindgen]
pub fn preset_names() -> String {
    api::preset_names().join(",")
}

#[wasm_bindgen]
pub fn preset(name: &str) -> Result<String, JsValue> {
    api::preset(name).map(str::to_owned).ok_or_else(|| JsValue::from_str("unknown preset"))
}

#[wasm_bindgen]
pub fn spectrum(system: &str, kmax: u32) -> Result<String, JsValue> {
    api::spectrum(system, kmax).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn conditioning(system: &str, kmax: u32, t_lo: f64, t_hi: f64, count: u32) -> Result<String, JsValue> {
    api::conditioning(system, kmax, t_lo, t_hi, count).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn steer(system: &str, target: &str, horizon: f64, kmax: u32, grid: u32, allow_subcritical: bool) -> Result<String, JsValue> {
    api::steer_to(system, target, horizon, kmax, grid, allow_subcritical).map_err(|e| JsValue::from_str(&e))
}
