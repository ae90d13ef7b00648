use serde_json::Value;

use neutral_control_demo::api;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn presets_parse() {
    for name in api::preset_names() {
        let r = parse(api::spectrum(api::preset(name).unwrap(), 2));
        assert!(r["roots"].as_array().unwrap().len() >= 5, "{name}");
    }
    assert!(api::preset("missing").is_none());
}

#[test]
fn spectrum_of_the_pilot() {
    let r = parse(api::spectrum(api::preset("scalar_pilot").unwrap(), 3));
    assert_eq!(r["verdict"], "exactly-controllable (window-certified)");
    assert_eq!(r["critical_time"], 1.0);
    // ln 0.5 + 2πik for k = -3..3, plus λ = 0 where λ factors out of Δ
    let roots = r["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 8);
    for p in roots {
        let x = p["re"].as_f64().unwrap();
        if p["exceptional"].as_bool().unwrap() {
            assert!(x.abs() < 1e-10 && p["im"].as_f64().unwrap().abs() < 1e-10);
        } else {
            assert!((x - 0.5f64.ln()).abs() < 1e-10);
        }
    }
}

#[test]
fn conditioning_drops_past_the_critical_time() {
    let r = parse(api::conditioning(api::preset("scalar_pilot").unwrap(), 4, 0.5, 2.0, 4));
    let c: Vec<f64> = r["points"].as_array().unwrap().iter().map(|p| p["condition"].as_f64().unwrap()).collect();
    assert_eq!(c.len(), 4);
    assert!(c[0] > 10.0 * c[3], "{c:?}");
    assert!(api::conditioning(api::preset("scalar_pilot").unwrap(), 4, 2.0, 1.0, 4).is_err());
}

#[test]
fn steering_reaches_the_eigenfunction() {
    let r = parse(api::steer_to(api::preset("scalar_pilot").unwrap(), "", 1.5, 6, 200, false));
    assert!(r["verification"]["terminal_error"].as_f64().unwrap() < 1e-2);
    assert_eq!(r["control"].as_array().unwrap().len(), 201);
    assert_eq!(r["target"].as_array().unwrap().len(), r["achieved"].as_array().unwrap().len());
}

#[test]
fn errors_are_reported_as_text() {
    assert!(api::spectrum("{", 3).is_err());
    let e = api::steer_to(api::preset("uncontrollable_pair").unwrap(), "", 3.0, 3, 50, false).unwrap_err();
    assert!(e.contains("not exactly controllable"), "{e}");
}
