use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gyro_core::asymptotics::{self, make_grid, model_from, sweep_with};
use gyro_core::io::{self, envelope, num, PlotKind, PlotOverlay, SystemFile};
use gyro_core::linalg::{c64, CVector};
use gyro_core::spectral::{classify_with, identity_suite_with, thresholds_from, DichotomyReport};
use gyro_core::timedomain::{self, energy_balance_residual, stiffness_warning};
use gyro_core::{netlist, validate, Analyzer, Error, ErrorCategory, LagrangianSystem, Tolerances};

#[derive(Parser)]
#[command(name = "gyro", version, about = "Modal analysis of damped gyroscopic Lagrangian systems")]
struct Cli {
    /// Tolerance overrides, e.g. `rank=1e-9,re=1e-8`.
    #[arg(long, env = "GYRO_TOL", global = true, hide_env_values = true)]
    gyro_tol: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct SystemArg {
    /// System JSON file.
    #[arg(long)]
    system: PathBuf,
}

#[derive(Args)]
struct OutArg {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Range {
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Logarithmic spacing.
    #[arg(long)]
    log: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Damping,
    Frequency,
    Q,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the system matrices and report residuals.
    Validate {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Characteristic scalars and overdamping thresholds.
    Thresholds {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Spectrum, classification and identity residuals at one beta.
    Analyze {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long)]
        beta: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Tracked eigenvalue branches over a beta grid, as CSV.
    Sweep {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        range: Range,
        #[command(flatten)]
        out: OutArg,
    },
    /// Expansion coefficients and fitted residual decay at large beta.
    Asymptotics {
        #[command(flatten)]
        sys: SystemArg,
        #[command(flatten)]
        range: Range,
        /// Skip the residual fit.
        #[arg(long)]
        no_residuals: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Time integration with an energy-balance check.
    Simulate {
        #[command(flatten)]
        sys: SystemArg,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Comma-separated initial charges (default: first unit vector).
        #[arg(long)]
        q0: Option<String>,
        /// Comma-separated initial currents (default: zero).
        #[arg(long)]
        qdot0: Option<String>,
        #[arg(long, default_value_t = 1001)]
        samples: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compile a loop netlist to a system file.
    Compile {
        #[arg(long)]
        netlist: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Render a sweep CSV as SVG.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value = "damping")]
        which: Which,
        /// Asymptotics report used for overlays and threshold markers.
        #[arg(long)]
        asymptotics: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Validation => 2,
        ErrorCategory::Numerical => 3,
        ErrorCategory::Io => 4,
    }
}

fn emit(out: &OutArg, text: &str) -> Result<(), Error> {
    match &out.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json(out: &OutArg, v: &Value) -> Result<(), Error> {
    emit(out, &io::to_pretty(v))
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    Ok(std::fs::read(path)?)
}

/// Ten significant digits.
fn sig10(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return io::fmt_num(x);
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..10).contains(&mag) {
        format!("{:.*}", (9 - mag).max(0) as usize, x)
    } else {
        format!("{x:.9e}")
    }
}

fn parse_vector(s: &str, n: usize, what: &str) -> Result<CVector, Error> {
    let vals: Vec<f64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("{what}: bad number `{t}`"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != n {
        return Err(Error::DimensionMismatch(format!("{what} has {} entries, expected {n}", vals.len())));
    }
    Ok(CVector::from_iterator(n, vals.into_iter().map(|x| c64(x, 0.0))))
}

struct Ctx {
    tol: Tolerances,
}

impl Ctx {
    fn load(&self, a: &SystemArg) -> Result<(LagrangianSystem, Vec<u8>), Error> {
        let (sys, _, bytes) = io::load_system_with(&a.system, self.tol)?;
        Ok((sys, bytes))
    }
}

fn print_thresholds(rep: &DichotomyReport) {
    let absent = |k: &str| rep.absent.iter().find(|(f, _)| f == k).map(|(_, why)| why.clone());
    let show = |name: &str, key: &str, v: Option<f64>| match v {
        Some(x) => eprintln!("{name:<14} {}", sig10(x)),
        None => eprintln!("{name:<14} {}", absent(key).unwrap_or_else(|| "unavailable".into())),
    };
    eprintln!("N = {}, N_R = {}", rep.n, rep.n_r);
    show("omega_max", "omega_max", Some(rep.omega_max));
    show("b_min", "b_min", Some(rep.b_min));
    show("d", "d_gap", Some(rep.d_gap));
    show("omega_max_dual", "omega_max_dual", rep.omega_max_dual);
    show("b_min_dual", "b_min_dual", rep.b_min_dual);
    show("d_dual", "d_gap_dual", rep.d_gap_dual);
    show("rho_min", "rho_min", rep.rho_min);
    show("rho_max", "rho_min", rep.rho_max);
    show("beta0", "beta0", rep.beta0);
    show("beta1", "beta1", rep.beta1);
    show("beta2", "beta2", rep.beta2);
}

fn default_window(rep: &DichotomyReport) -> (f64, f64) {
    let s = rep.high_loss_threshold().max(rep.dual_threshold().unwrap_or(0.0)).max(1.0);
    (1e2 * s, 1e4 * s)
}

fn run(cli: Cli) -> Result<(), Error> {
    let tol = match &cli.gyro_tol {
        Some(s) => Tolerances::default().with_overrides(s)?,
        None => Tolerances::default(),
    };
    let ctx = Ctx { tol };
    match cli.cmd {
        Cmd::Validate { sys, out } => {
            let (system, bytes) = ctx.load(&sys)?;
            let rep = validate(&system)?;
            eprintln!(
                "valid: N = {}, N_R = {}, duality {}",
                rep.n,
                rep.n_r,
                if rep.duality_ok { "available" } else { "unavailable" }
            );
            emit_json(&out, &envelope("validate", &bytes, serde_json::to_value(&rep).expect("serializes")))
        }
        Cmd::Thresholds { sys, out } => {
            let (system, bytes) = ctx.load(&sys)?;
            let an = Analyzer::new(&system)?;
            let rep = thresholds_from(&an)?;
            print_thresholds(&rep);
            emit_json(&out, &envelope("thresholds", &bytes, io::thresholds_json(&rep)))
        }
        Cmd::Analyze { sys, beta, out } => {
            let (system, bytes) = ctx.load(&sys)?;
            let an = Analyzer::new(&system)?;
            let rep = thresholds_from(&an)?;
            let mut modes = an.spectrum(beta)?.modes;
            classify_with(&rep, beta, &mut modes)?;
            let ids = identity_suite_with(&an, beta)?;
            for (k, m) in modes.iter().enumerate() {
                eprintln!(
                    "mode {}: zeta = {} {} {}i  Q = {}  {}",
                    k + 1,
                    io::fmt_num(m.zeta.re),
                    if m.zeta.im < 0.0 { "-" } else { "+" },
                    io::fmt_num(m.zeta.im.abs()),
                    io::fmt_num(m.q_factor),
                    m.klass.as_str()
                );
            }
            eprintln!("max identity residual {:e}", ids.max_residual());
            let body = json!({
                "beta": beta,
                "modes": modes.iter().map(io::mode_json).collect::<Vec<_>>(),
                "identities": ids,
                "max_identity_residual": ids.max_residual(),
                "thresholds": io::thresholds_json(&rep),
            });
            emit_json(&out, &envelope("analyze", &bytes, body))
        }
        Cmd::Sweep { sys, range, out } => {
            let (system, _) = ctx.load(&sys)?;
            let lo = range.beta_min.unwrap_or(1e-2);
            let hi = range.beta_max.unwrap_or(1e2);
            let grid = make_grid(lo, hi, range.points.unwrap_or(400), range.log)?;
            let an = Analyzer::new(&system)?;
            let sw = sweep_with(&an, &grid)?;
            let rows = io::sweep_rows(&sw);
            eprintln!("{} beta values x {} branches = {} rows", sw.beta_grid.len(), sw.branch_count(), rows.len());
            for (a, b) in asymptotics::fully_overdamped_intervals(&sw, system.tolerances().re) {
                eprintln!("all modes overdamped for beta in [{}, {}]", sig10(a), sig10(b));
            }
            emit(&out, &io::write_sweep_csv(&rows))
        }
        Cmd::Asymptotics { sys, range, no_residuals, out } => {
            let (system, bytes) = ctx.load(&sys)?;
            let an = Analyzer::new(&system)?;
            let rep = thresholds_from(&an)?;
            let model = model_from(&an)?;
            eprintln!("b     = {:?}", model.b_coeffs);
            eprintln!("rho   = {:?}", model.rho_lowloss);
            eprintln!("d     = {:?}", model.d_coeffs);
            if let Some(s) = &model.dual_slopes {
                eprintln!("dual  = {s:?}");
            }
            let table = if no_residuals {
                None
            } else {
                let (dlo, dhi) = default_window(&rep);
                let lo = range.beta_min.unwrap_or(dlo);
                let hi = range.beta_max.unwrap_or(dhi);
                let grid = make_grid(lo, hi, range.points.unwrap_or(61), true)?;
                let sw = sweep_with(&an, &grid)?;
                let t = asymptotics::asymptotic_residuals(&sw, &model, Some((lo, hi)))?;
                eprintln!("residual decay over [{}, {}]: {}", sig10(lo), sig10(hi), if t.all_pass() { "pass" } else { "FAIL" });
                Some(serde_json::to_value(&t).expect("serializes"))
            };
            emit_json(&out, &envelope("asymptotics", &bytes, io::asymptotics_json(&model, &rep, table)))
        }
        Cmd::Simulate { sys, beta, t_end, tol, q0, qdot0, samples, out } => {
            let (system, bytes) = ctx.load(&sys)?;
            let n = system.n();
            if let Some(w) = stiffness_warning(beta) {
                eprintln!("warning: {w}");
            }
            let q0 = match q0 {
                Some(s) => parse_vector(&s, n, "q0")?,
                None => CVector::from_fn(n, |i, _| c64(if i == 0 { 1.0 } else { 0.0 }, 0.0)),
            };
            let qdot0 = match qdot0 {
                Some(s) => parse_vector(&s, n, "qdot0")?,
                None => CVector::zeros(n),
            };
            let tr = timedomain::integrate(&system, beta, &q0, &qdot0, t_end, tol, samples)?;
            let resid = energy_balance_residual(&tr, &system, beta)?;
            eprintln!(
                "{} steps ({} rejected); H: {} -> {}; energy balance residual {:e}",
                tr.steps,
                tr.rejected,
                sig10(tr.energy[0]),
                sig10(*tr.energy.last().unwrap()),
                resid
            );
            let body = json!({
                "beta": beta,
                "t_end": t_end,
                "tol": tol,
                "steps": tr.steps,
                "rejected": tr.rejected,
                "energy_balance_residual": resid,
                "energy_drift": tr.energy_drift(),
                "max_energy_increase": num(tr.max_energy_increase()),
                "times": tr.times,
                "q": tr.q.iter().map(|v| v.iter().map(|z| z.re).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "qdot": tr.qdot.iter().map(|v| v.iter().map(|z| z.re).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "energy": tr.energy,
                "dissipation": tr.dissipation,
            });
            emit_json(&out, &envelope("simulate", &bytes, body))
        }
        Cmd::Compile { netlist: path, out } => {
            let text = String::from_utf8(read(&path)?).map_err(|_| Error::InvalidArgument("netlist is not UTF-8".into()))?;
            let nl = netlist::parse(&text)?;
            let system = netlist::compile(&nl)?;
            let file = SystemFile::from_system(&system);
            eprintln!("compiled {} loops, {} couplings", nl.loops.len(), nl.couplings.len());
            emit(&out, &file.to_json())
        }
        Cmd::Plot { csv, which, asymptotics, out } => {
            let text = String::from_utf8(read(&csv)?).map_err(|_| Error::EmptyCsv)?;
            let rows = io::read_sweep_csv(&text)?;
            let overlay = match asymptotics {
                Some(p) => {
                    let v: Value = serde_json::from_slice(&read(&p)?).map_err(|e| Error::Schema {
                        path: "$".into(),
                        message: e.to_string(),
                    })?;
                    Some(PlotOverlay::from_json(&v)?)
                }
                None => None,
            };
            let kind = match which {
                Which::Damping => PlotKind::Damping,
                Which::Frequency => PlotKind::Frequency,
                Which::Q => PlotKind::Q,
            };
            emit(&out, &io::plot_svg(&rows, kind, overlay.as_ref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
