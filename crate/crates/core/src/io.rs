//! Files and reports: system JSON, sweep CSV, JSON report envelopes and SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::asymptotics::{AsymptoticModel, SweepResult};
use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::model::LagrangianSystem;
use crate::spectral::{DichotomyReport, Mode};
use crate::tolerance::Tolerances;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CSV_HEADER: &str = "beta,branch,re_zeta,im_zeta,q_factor,class";

// ---------------------------------------------------------------- systems

/// On-disk system: row-major `n x n` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub n: usize,
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
    pub r: Vec<f64>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn matrix_field(obj: &Map<String, Value>, key: &str, n: usize) -> Result<Vec<f64>> {
    let arr = obj
        .get(key)
        .ok_or_else(|| schema(key, "missing field"))?
        .as_array()
        .ok_or_else(|| schema(key, "expected an array of numbers"))?;
    if arr.len() != n * n {
        return Err(schema(key, format!("expected {} entries (n = {n}), found {}", n * n, arr.len())));
    }
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| schema(format!("{key}[{i}]"), "expected a finite number"))
        })
        .collect()
}

fn opt_string(obj: &Map<String, Value>, key: &str) -> Result<Option<String>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(schema(key, "expected a string")),
    }
}

impl SystemFile {
    /// Parses and schema-checks JSON text (no physical validation).
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| schema("$", "expected an object"))?;
        let n = obj
            .get("n")
            .ok_or_else(|| schema("n", "missing field"))?
            .as_u64()
            .filter(|&n| n >= 1)
            .ok_or_else(|| schema("n", "expected a positive integer"))? as usize;
        Ok(Self {
            name: opt_string(obj, "name")?,
            description: opt_string(obj, "description")?,
            n,
            alpha: matrix_field(obj, "alpha", n)?,
            eta: matrix_field(obj, "eta", n)?,
            theta: matrix_field(obj, "theta", n)?,
            r: matrix_field(obj, "r", n)?,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("system file serializes");
        s.push('\n');
        s
    }

    pub fn from_system(sys: &LagrangianSystem) -> Self {
        let flat = |m: &RMatrix| -> Vec<f64> {
            let mut out = Vec::with_capacity(m.len());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.push(m[(i, j)]);
                }
            }
            out
        };
        Self {
            name: None,
            description: None,
            n: sys.n(),
            alpha: flat(sys.alpha()),
            eta: flat(sys.eta()),
            theta: flat(sys.theta()),
            r: flat(sys.r()),
        }
    }

    /// Builds and validates the system.
    pub fn to_system(&self, tol: Tolerances) -> Result<LagrangianSystem> {
        let m = |v: &[f64]| RMatrix::from_row_slice(self.n, self.n, v);
        LagrangianSystem::with_tolerances(m(&self.alpha), m(&self.eta), m(&self.theta), m(&self.r), tol)
    }
}

/// Reads a system file; returns the validated system and the raw bytes.
pub fn load_system_with(path: &Path, tol: Tolerances) -> Result<(LagrangianSystem, SystemFile, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| schema("$", "file is not UTF-8"))?;
    let file = SystemFile::from_json(&text)?;
    let sys = file.to_system(tol)?;
    Ok((sys, file, bytes))
}

pub fn load_system(path: &Path) -> Result<LagrangianSystem> {
    Ok(load_system_with(path, Tolerances::default())?.0)
}

pub fn save_system(sys: &LagrangianSystem, path: &Path) -> Result<()> {
    std::fs::write(path, SystemFile::from_system(sys).to_json())?;
    Ok(())
}

// ---------------------------------------------------------------- reports

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// JSON number, or `"inf"` / `"-inf"` / `null` for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        Value::Null
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// Wraps a command result with tool version and input hash.
pub fn envelope(command: &str, input: &[u8], result: Value) -> Value {
    json!({
        "tool": "gyro",
        "version": VERSION,
        "command": command,
        "input_sha256": sha256_hex(input),
        "result": result,
    })
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

pub fn mode_json(m: &Mode) -> Value {
    json!({
        "re_zeta": m.zeta.re,
        "im_zeta": m.zeta.im,
        "frequency": m.frequency,
        "damping": m.damping,
        "q_factor": num(m.q_factor),
        "class": m.klass.as_str(),
    })
}

pub fn thresholds_json(rep: &DichotomyReport) -> Value {
    let mut v = serde_json::to_value(rep).expect("report serializes");
    if let Some(obj) = v.as_object_mut() {
        let absent: Map<String, Value> = rep.absent.iter().map(|(k, why)| (k.clone(), json!(why))).collect();
        obj.insert("absent".into(), Value::Object(absent));
        for (key, field) in [("beta0", rep.beta0), ("beta1", rep.beta1), ("beta2", rep.beta2)] {
            if let Some(x) = field {
                obj.insert(key.into(), num(x));
            }
        }
    }
    v
}

pub fn asymptotics_json(model: &AsymptoticModel, rep: &DichotomyReport, table: Option<Value>) -> Value {
    let mut obj = Map::new();
    obj.insert("model".into(), serde_json::to_value(model).expect("model serializes"));
    obj.insert("thresholds".into(), thresholds_json(rep));
    if let Some(t) = table {
        obj.insert("residuals".into(), t);
    }
    Value::Object(obj)
}

// ---------------------------------------------------------------- sweep CSV

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    /// 1-based.
    pub branch: usize,
    pub re_zeta: f64,
    pub im_zeta: f64,
    pub q_factor: f64,
    pub class: String,
}

/// Shortest round-trip text; `-0` prints as `0`, infinities as `inf`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_num(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

pub fn sweep_rows(sweep: &SweepResult) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(sweep.beta_grid.len() * sweep.branches.len());
    for (k, &beta) in sweep.beta_grid.iter().enumerate() {
        for (j, branch) in sweep.branches.iter().enumerate() {
            let m = &branch[k];
            rows.push(SweepRow {
                beta,
                branch: j + 1,
                re_zeta: m.zeta.re,
                im_zeta: m.zeta.im,
                q_factor: m.q_factor,
                class: m.klass.as_str().into(),
            });
        }
    }
    rows.sort_by(|a, b| a.beta.total_cmp(&b.beta).then(a.branch.cmp(&b.branch)));
    rows
}

pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(r.beta),
            r.branch,
            fmt_num(r.re_zeta),
            fmt_num(r.im_zeta),
            fmt_num(r.q_factor),
            r.class
        );
    }
    out
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        None => return Err(Error::EmptyCsv),
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some(_) => return Err(schema("header", format!("expected `{CSV_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (ln, line) in lines {
        let f: Vec<&str> = line.trim().split(',').collect();
        let at = |col: usize| format!("line {}, column {}", ln + 1, col + 1);
        if f.len() != 6 {
            return Err(schema(format!("line {}", ln + 1), format!("expected 6 fields, found {}", f.len())));
        }
        let number = |col: usize| parse_num(f[col]).ok_or_else(|| schema(at(col), format!("bad number `{}`", f[col])));
        let branch = f[1]
            .parse::<usize>()
            .ok()
            .filter(|&b| b >= 1)
            .ok_or_else(|| schema(at(1), format!("bad branch `{}`", f[1])))?;
        rows.push(SweepRow {
            beta: number(0)?,
            branch,
            re_zeta: number(2)?,
            im_zeta: number(3)?,
            q_factor: number(4)?,
            class: f[5].to_string(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyCsv);
    }
    Ok(rows)
}

// ---------------------------------------------------------------- SVG

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Damping,
    Frequency,
    Q,
}

impl PlotKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "damping" => Some(Self::Damping),
            "frequency" => Some(Self::Frequency),
            "q" => Some(Self::Q),
            _ => None,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Damping => "damping  -Im ζ",
            Self::Frequency => "frequency  Re ζ",
            Self::Q => "Q-factor",
        }
    }

    fn log_y(self) -> bool {
        !matches!(self, Self::Frequency)
    }

    fn value(self, r: &SweepRow) -> f64 {
        match self {
            Self::Damping => -r.im_zeta,
            Self::Frequency => r.re_zeta,
            Self::Q => r.q_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Asymptote {
    /// `c beta`
    Linear(f64),
    /// `c / beta`
    Inverse(f64),
    Constant(f64),
}

impl Asymptote {
    fn eval(&self, beta: f64) -> f64 {
        match *self {
            Self::Linear(c) => c * beta,
            Self::Inverse(c) => c / beta,
            Self::Constant(c) => c,
        }
    }
}

/// Threshold markers and asymptote curves drawn over a plot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotOverlay {
    pub thresholds: Vec<(String, f64)>,
    pub damping: Vec<Asymptote>,
    pub frequency: Vec<Asymptote>,
    pub q: Vec<Asymptote>,
}

fn push_unique(v: &mut Vec<Asymptote>, a: Asymptote) {
    let key = |a: &Asymptote| match *a {
        Asymptote::Linear(c) => (0, c),
        Asymptote::Inverse(c) => (1, c),
        Asymptote::Constant(c) => (2, c),
    };
    let (ka, ca) = key(&a);
    if !v.iter().any(|b| {
        let (kb, cb) = key(b);
        ka == kb && (ca - cb).abs() <= 1e-9 * ca.abs().max(cb.abs()).max(1e-300)
    }) {
        v.push(a);
    }
}

impl PlotOverlay {
    fn build(thresholds: [Option<f64>; 3], model: &AsymptoticModelView) -> Self {
        let mut o = PlotOverlay::default();
        for (name, b) in ["β₀", "β₁", "β₂"].into_iter().zip(thresholds) {
            if let Some(b) = b.filter(|b| b.is_finite() && *b > 0.0) {
                o.thresholds.push((name.into(), b));
            }
        }
        for &b in &model.b_coeffs {
            push_unique(&mut o.damping, Asymptote::Linear(b));
        }
        for &d in model.d_coeffs.iter().chain(model.dual_slopes.iter().flatten()) {
            if d > 0.0 {
                push_unique(&mut o.damping, Asymptote::Inverse(d));
            }
        }
        for &rho in model.rho_lowloss.iter().chain(&model.rho_highloss) {
            push_unique(&mut o.frequency, Asymptote::Constant(rho));
        }
        for (&rho, &d) in model.rho_lowloss.iter().zip(&model.d_coeffs) {
            if rho != 0.0 && d > 0.0 {
                push_unique(&mut o.q, Asymptote::Linear(rho.abs() / (2.0 * d)));
            }
        }
        o
    }

    pub fn from_parts(model: &AsymptoticModel, rep: &DichotomyReport) -> Self {
        let view = AsymptoticModelView {
            b_coeffs: model.b_coeffs.clone(),
            rho_highloss: model.rho_highloss.clone(),
            rho_lowloss: model.rho_lowloss.clone(),
            d_coeffs: model.d_coeffs.clone(),
            dual_slopes: model.dual_slopes.clone(),
        };
        Self::build([rep.beta0, rep.beta1, rep.beta2], &view)
    }

    /// Reads an `asymptotics` report (enveloped or bare).
    pub fn from_json(v: &Value) -> Result<Self> {
        let body = v.get("result").unwrap_or(v);
        let model: AsymptoticModelView = serde_json::from_value(
            body.get("model").cloned().ok_or_else(|| schema("result.model", "missing field"))?,
        )
        .map_err(|e| schema("result.model", e.to_string()))?;
        let th = body.get("thresholds").ok_or_else(|| schema("result.thresholds", "missing field"))?;
        let get = |k: &str| th.get(k).and_then(Value::as_f64);
        Ok(Self::build([get("beta0"), get("beta1"), get("beta2")], &model))
    }

    fn curves(&self, kind: PlotKind) -> &[Asymptote] {
        match kind {
            PlotKind::Damping => &self.damping,
            PlotKind::Frequency => &self.frequency,
            PlotKind::Q => &self.q,
        }
    }
}

#[derive(Deserialize)]
struct AsymptoticModelView {
    b_coeffs: Vec<f64>,
    rho_highloss: Vec<f64>,
    rho_lowloss: Vec<f64>,
    d_coeffs: Vec<f64>,
    dual_slopes: Option<Vec<f64>>,
}

const W: f64 = 800.0;
const H: f64 = 500.0;
const ML: f64 = 80.0;
const MR: f64 = 110.0;
const MT: f64 = 30.0;
const MB: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_y: bool,
}

impl Axes {
    fn px(&self, beta: f64) -> f64 {
        ML + (beta.log10() - self.x0) / (self.x1 - self.x0) * (W - ML - MR)
    }

    fn ty(&self, y: f64) -> f64 {
        if self.log_y { y.log10() } else { y }
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (self.ty(y) - self.y0) / (self.y1 - self.y0) * (H - MT - MB)
    }

    fn plottable(&self, y: f64) -> bool {
        y.is_finite() && (!self.log_y || y > 0.0)
    }

    fn inside(&self, y: f64) -> bool {
        self.plottable(y) && {
            let t = self.ty(y);
            t >= self.y0 - 1e-12 && t <= self.y1 + 1e-12
        }
    }
}

fn tick_label(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{:.3}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if x.abs() >= 1e4 || x.abs() < 1e-2 {
        let e = format!("{x:.2e}");
        let (m, ex) = e.split_once('e').unwrap();
        let m = m.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{ex}")
    } else {
        s.to_string()
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, extra: &str) {
    if pts.len() == 1 {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, pts[0].0, pts[0].1);
        return;
    }
    let mut p = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            p.push(' ');
        }
        let _ = write!(p, "{x:.2},{y:.2}");
    }
    let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{extra} points="{p}"/>"#);
}

/// Renders one quantity of a sweep table as a standalone SVG document.
pub fn plot_svg(rows: &[SweepRow], kind: PlotKind, overlay: Option<&PlotOverlay>) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyCsv);
    }
    let mut rows: Vec<&SweepRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.beta.total_cmp(&b.beta).then(a.branch.cmp(&b.branch)));
    if rows.iter().any(|r| !(r.beta > 0.0 && r.beta.is_finite())) {
        return Err(Error::InvalidGrid("plotting needs positive finite beta values".into()));
    }
    let nb = rows.iter().map(|r| r.branch).max().unwrap_or(1);
    let mut betas: Vec<f64> = rows.iter().map(|r| r.beta).collect();
    betas.dedup();
    let single = betas.len() == 1;

    let (mut x0, mut x1) = (betas[0].log10(), betas[betas.len() - 1].log10());
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let log_y = kind.log_y();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| kind.value(r))
        .filter(|&y| y.is_finite() && (!log_y || y > 0.0))
        .map(|y| if log_y { y.log10() } else { y })
        .collect();
    let (mut y0, mut y1) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-12 {
        let pad = if log_y { 0.5 } else { y0.abs().max(1.0) * 0.5 };
        y0 -= pad;
        y1 += pad;
    } else {
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
    }
    let ax = Axes { x0, x1, y0, y1, log_y };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - ML - MR,
        H - MT - MB
    );

    // x ticks at decades
    for e in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = ML + (e as f64 - x0) / (x1 - x0) * (W - ML - MR);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{MT}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"##,
            H - MB,
            H - MB + 18.0
        );
    }
    // y ticks
    let yticks: Vec<(f64, String)> = if log_y {
        let (a, b) = (y0.ceil() as i32, y1.floor() as i32);
        let step = (((b - a) as f64) / 8.0).ceil().max(1.0) as i32;
        (a..=b).step_by(step as usize).map(|e| (e as f64, format!("1e{e}"))).collect()
    } else {
        (0..=5).map(|k| {
            let t = y0 + (y1 - y0) * k as f64 / 5.0;
            (t, tick_label(t))
        }).collect()
    };
    for (t, label) in yticks {
        let y = H - MB - (t - y0) / (y1 - y0) * (H - MT - MB);
        let _ = writeln!(
            out,
            r##"<line x1="{ML}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
            W - MR,
            ML - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">β</text>"#, ML + (W - ML - MR) / 2.0, H - 12.0);
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0,
        kind.label()
    );

    if let Some(ov) = overlay {
        for (name, b) in &ov.thresholds {
            let t = b.log10();
            if t < x0 || t > x1 {
                continue;
            }
            let x = ax.px(*b);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{MT}" stroke="#555" stroke-dasharray="2,3"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="#555">{name}</text>"##,
                H - MB,
                MT - 6.0
            );
        }
        for a in ov.curves(kind) {
            let mut seg: Vec<(f64, f64)> = Vec::new();
            let steps = 200;
            for k in 0..=steps {
                let b = 10f64.powf(x0 + (x1 - x0) * k as f64 / steps as f64);
                let y = a.eval(b);
                if ax.inside(y) {
                    seg.push((ax.px(b), ax.py(y)));
                } else if !seg.is_empty() {
                    if seg.len() > 1 {
                        polyline(&mut out, &seg, "#888", r#" stroke-dasharray="6,4""#);
                    }
                    seg.clear();
                }
            }
            if seg.len() > 1 {
                polyline(&mut out, &seg, "#888", r#" stroke-dasharray="6,4""#);
            }
        }
    }

    for j in 1..=nb {
        let color = COLORS[(j - 1) % COLORS.len()];
        let pts: Vec<&SweepRow> = rows.iter().copied().filter(|r| r.branch == j).collect();
        if single {
            for r in &pts {
                let y = kind.value(r);
                if ax.plottable(y) {
                    let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#, ax.px(r.beta), ax.py(y));
                }
            }
        } else {
            let mut seg: Vec<(f64, f64)> = Vec::new();
            for r in &pts {
                let y = kind.value(r);
                if ax.plottable(y) {
                    seg.push((ax.px(r.beta), ax.py(y)));
                } else if !seg.is_empty() {
                    polyline(&mut out, &seg, color, "");
                    seg.clear();
                }
            }
            if !seg.is_empty() {
                polyline(&mut out, &seg, color, "");
            }
        }
        let ly = MT + 16.0 * j as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">branch {j}</text>"#,
            W - MR + 10.0,
            W - MR + 30.0,
            W - MR + 35.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circuit() -> SystemFile {
        SystemFile {
            name: Some("circuit".into()),
            description: None,
            n: 2,
            alpha: vec![10.0, 0.0, 0.0, 0.5],
            eta: vec![0.16, -0.12, -0.12, 0.16],
            theta: vec![0.0, -1.25, 1.25, 0.0],
            r: vec![0.0, 0.0, 0.0, 10.0],
        }
    }

    #[test]
    fn system_round_trip() {
        let f = circuit();
        let back = SystemFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let sys = f.to_system(Tolerances::default()).unwrap();
        let mut g = SystemFile::from_system(&sys);
        g.name = f.name.clone();
        assert_eq!(g, f);
    }

    #[test]
    fn schema_errors() {
        let bad = r#"{"n": 2, "alpha": [1, 0, 1], "eta": [1,0,0,1], "theta": [0,0,0,0], "r": [1,0,0,1]}"#;
        match SystemFile::from_json(bad) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "alpha"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"n": 1, "alpha": ["x"], "eta": [1], "theta": [0], "r": [1]}"#;
        assert!(matches!(SystemFile::from_json(bad), Err(Error::Schema { path, .. }) if path == "alpha[0]"));
        assert!(matches!(SystemFile::from_json("{"), Err(Error::Schema { .. })));
        assert!(matches!(SystemFile::from_json(r#"{"alpha": []}"#), Err(Error::Schema { path, .. }) if path == "n"));
        let asym = r#"{"n": 2, "alpha": [1, 0.5, 0, 1], "eta": [1,0,0,1], "theta": [0,0,0,0], "r": [1,0,0,1]}"#;
        let f = SystemFile::from_json(asym).unwrap();
        assert!(f.to_system(Tolerances::default()).is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(1e-20), "1e-20");
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17, 5e-324] {
            assert_eq!(parse_num(&fmt_num(x)), Some(x));
        }
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            SweepRow { beta: 0.5, branch: 1, re_zeta: 0.0, im_zeta: -1.0, q_factor: 0.0, class: "high_loss".into() },
            SweepRow { beta: 0.5, branch: 2, re_zeta: 0.3, im_zeta: -1e-7, q_factor: f64::INFINITY, class: "unclassified".into() },
        ];
        let text = write_sweep_csv(&rows);
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(read_sweep_csv(&text).unwrap(), rows);
        assert!(matches!(read_sweep_csv(""), Err(Error::EmptyCsv)));
        assert!(matches!(read_sweep_csv(&format!("{CSV_HEADER}\n")), Err(Error::EmptyCsv)));
        assert!(read_sweep_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn svg_single_point_has_markers_only() {
        let rows = vec![
            SweepRow { beta: 1.0, branch: 1, re_zeta: 0.0, im_zeta: -2.0, q_factor: 0.0, class: "high_loss".into() },
            SweepRow { beta: 1.0, branch: 2, re_zeta: 0.1, im_zeta: -0.2, q_factor: 0.25, class: "low_loss_high_q".into() },
        ];
        let svg = plot_svg(&rows, PlotKind::Damping, None).unwrap();
        assert!(!svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg, plot_svg(&rows, PlotKind::Damping, None).unwrap());
    }
}
