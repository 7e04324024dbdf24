//! Browser bindings. Every export takes and returns strings so the page only
//! deals with JSON and SVG text.

use gyro_core::asymptotics::{make_grid, model_from, sweep_with};
use gyro_core::io::{self, PlotKind, PlotOverlay, SystemFile};
use gyro_core::spectral::{classify_with, identity_suite_with, thresholds_from};
use gyro_core::{netlist, Analyzer, LagrangianSystem, Tolerances};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn load(system_json: &str) -> Result<LagrangianSystem, String> {
    let file = SystemFile::from_json(system_json).map_err(|e| e.to_string())?;
    file.to_system(Tolerances::default()).map_err(|e| e.to_string())
}

pub fn compile_text(netlist_text: &str) -> Result<String, String> {
    let nl = netlist::parse(netlist_text).map_err(|e| e.to_string())?;
    let sys = netlist::compile(&nl).map_err(|e| e.to_string())?;
    Ok(SystemFile::from_system(&sys).to_json())
}

pub fn thresholds_text(system_json: &str) -> Result<String, String> {
    let sys = load(system_json)?;
    let an = Analyzer::new(&sys).map_err(|e| e.to_string())?;
    let rep = thresholds_from(&an).map_err(|e| e.to_string())?;
    Ok(io::to_pretty(&io::thresholds_json(&rep)))
}

pub fn analyze_text(system_json: &str, beta: f64) -> Result<String, String> {
    let sys = load(system_json)?;
    let an = Analyzer::new(&sys).map_err(|e| e.to_string())?;
    let mut modes = an.spectrum(beta).map_err(|e| e.to_string())?.modes;
    if let Ok(rep) = thresholds_from(&an) {
        classify_with(&rep, beta, &mut modes).map_err(|e| e.to_string())?;
    }
    let ids = identity_suite_with(&an, beta).map_err(|e| e.to_string())?;
    let body = json!({
        "beta": beta,
        "modes": modes.iter().map(io::mode_json).collect::<Vec<_>>(),
        "max_identity_residual": ids.max_residual(),
    });
    Ok(io::to_pretty(&body))
}

pub fn sweep_svg_text(system_json: &str, beta_min: f64, beta_max: f64, points: usize, which: &str) -> Result<String, String> {
    let kind = PlotKind::parse(which).ok_or_else(|| format!("unknown plot `{which}`"))?;
    let sys = load(system_json)?;
    let an = Analyzer::new(&sys).map_err(|e| e.to_string())?;
    let grid = make_grid(beta_min, beta_max, points, true).map_err(|e| e.to_string())?;
    let sw = sweep_with(&an, &grid).map_err(|e| e.to_string())?;
    let overlay = match (model_from(&an), thresholds_from(&an)) {
        (Ok(model), Ok(rep)) => Some(PlotOverlay::from_parts(&model, &rep)),
        _ => None,
    };
    io::plot_svg(&io::sweep_rows(&sw), kind, overlay.as_ref()).map_err(|e| e.to_string())
}

/// Netlist text to system JSON.
#[wasm_bindgen]
pub fn compile_netlist(netlist_text: &str) -> Result<String, JsError> {
    compile_text(netlist_text).map_err(|e| JsError::new(&e))
}

/// Characteristic scalars and overdamping thresholds as JSON.
#[wasm_bindgen]
pub fn thresholds(system_json: &str) -> Result<String, JsError> {
    thresholds_text(system_json).map_err(|e| JsError::new(&e))
}

/// Classified spectrum at one `beta` as JSON.
#[wasm_bindgen]
pub fn analyze(system_json: &str, beta: f64) -> Result<String, JsError> {
    analyze_text(system_json, beta).map_err(|e| JsError::new(&e))
}

/// Log-spaced sweep rendered as SVG; `which` is `damping`, `frequency` or `q`.
#[wasm_bindgen]
pub fn sweep_svg(system_json: &str, beta_min: f64, beta_max: f64, points: usize, which: &str) -> Result<String, JsError> {
    sweep_svg_text(system_json, beta_min, beta_max, points, which).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const NET: &str = "loop 1 { L 10 C 25 }\nloop 2 { L 0.5 C 25 R 10 }\ncouple 1 2 { C 8.333333333333334 G 2.5 }\n";

    #[test]
    fn demo_pipeline() {
        let sys = compile_text(NET).unwrap();
        let th: serde_json::Value = serde_json::from_str(&thresholds_text(&sys).unwrap()).unwrap();
        assert!((th["beta0"].as_f64().unwrap() - 0.1258803552).abs() < 1e-9);
        let an: serde_json::Value = serde_json::from_str(&analyze_text(&sys, 10.0).unwrap()).unwrap();
        assert_eq!(an["modes"].as_array().unwrap().len(), 4);
        let svg = sweep_svg_text(&sys, 1e-2, 1e2, 80, "damping").unwrap();
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn errors_are_messages() {
        assert!(compile_text("loop 1 { L -3 }").unwrap_err().contains("-3"));
        assert!(thresholds_text("{").is_err());
        let sys = compile_text(NET).unwrap();
        assert!(sweep_svg_text(&sys, 1.0, 10.0, 10, "phase").is_err());
    }
}
