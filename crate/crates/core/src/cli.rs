//! Command-line front end.
//!
//! Errors go to stderr as `error_code=<code> <message>`; exit status is 0 on
//! success, 2 on validation errors and 3 on solver failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::circuit::Device;
use crate::design::{
    alpha_core, alpha_mismatch, approx_isat, check_conditions, fg_sat, monte_carlo_alpha, predict_isat,
    predict_isat_from_materials, ConditionOptions, ConditionReport, DesignError, Distribution, ShuntField, Tolerance,
    ToleranceReport, ToleranceSpec,
};
use crate::io::{parse_device, write_sweep_csv, DeviceFile};
use crate::power::{ccw_equivalent, joule_power, solenoid_resistance, wire_length, CcwReference, WireSpec};
use crate::solver::{
    detect_knee, solve_operating_point, sweep, GridSpacing, OperatingPoint, SolveError, SolveOptions, SweepError,
    SweepOptions, SweepOrder, DEFAULT_KNEE_FRACTION,
};
use crate::MU_0;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sers", version, about = "Saturable reluctance switch circuit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DeviceArgs {
    /// Device description file.
    #[arg(long)]
    device: PathBuf,
    /// Use this registered material for every shunt.
    #[arg(long)]
    material: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderArg {
    Descending,
    Ascending,
    Parallel,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one operating point.
    Solve {
        #[command(flatten)]
        dev: DeviceArgs,
        #[arg(long, allow_hyphen_values = true)]
        current: f64,
    },
    /// Sweep the drive current and write a CSV table.
    Sweep {
        #[command(flatten)]
        dev: DeviceArgs,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "descending")]
        order: OrderArg,
        /// Cluster grid points around this current.
        #[arg(long)]
        refine_near: Option<f64>,
    },
    /// Predicted switching current, exact and gap-only approximation.
    Isat {
        #[command(flatten)]
        dev: DeviceArgs,
        /// Override the full-saturation field (A/m).
        #[arg(long)]
        h_sat: Option<f64>,
    },
    /// Evaluate design conditions D1 to D4.
    Check {
        #[command(flatten)]
        dev: DeviceArgs,
        #[arg(long, default_value_t = 10.0)]
        d1_factor: f64,
        #[arg(long, default_value_t = 1e-9)]
        rel_tol: f64,
        /// Common solenoid current for D3 (A).
        #[arg(long, default_value_t = 1.0)]
        current: f64,
        /// Magnet flux density for D1 instead of the loaded OFF value (T).
        #[arg(long)]
        b_m: Option<f64>,
    },
    /// Switching ratio under solenoid mismatch.
    Alpha {
        #[command(flatten)]
        dev: DeviceArgs,
        /// `shunt=k,field=area_sol|length|area,rel=x` (repeatable).
        #[arg(long)]
        perturb: Vec<String>,
    },
    /// Monte-Carlo switching-ratio distribution.
    Montecarlo {
        #[command(flatten)]
        dev: DeviceArgs,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        /// `shunt=k,field=area_sol|length|area,normal=sd|uniform=hw` (repeatable).
        #[arg(long)]
        tol: Vec<String>,
    },
    /// Solenoid Joule losses and the current-carrying-wire comparison.
    Power {
        #[command(flatten)]
        dev: DeviceArgs,
        #[arg(long)]
        current: f64,
        /// Conductor `a,b,c` in metres; defaults to a single-layer fill with
        /// b = 0.5 mm, c = 0.015 mm.
        #[arg(long)]
        wire: Option<String>,
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// `kappa_grad,resistance,gradient` (T/m/A, ohm, T/m).
        #[arg(long)]
        compare_ccw: Option<String>,
    },
}

#[derive(Debug)]
struct CliError {
    code: &'static str,
    exit: i32,
    message: String,
}

impl CliError {
    fn validation(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            exit: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let exit = match e {
            SolveError::Options(_) | SolveError::NonFinite(_) => EXIT_VALIDATION,
            _ => EXIT_SOLVER,
        };
        Self {
            code: if exit == EXIT_SOLVER { "solver" } else { "validation" },
            exit,
            message: e.to_string(),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Solve(s) => s.into(),
            SweepError::NoKnee { .. } => Self {
                code: "no_knee",
                exit: EXIT_SOLVER,
                message: e.to_string(),
            },
            other => Self::validation("validation", other.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::Solve(s) => s.into(),
            other => Self::validation("validation", other.to_string()),
        }
    }
}

/// Run the CLI on `args` (including the program name), writing to `out` and
/// `err`, and return the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            let _ = writeln!(err, "error_code=usage {first}");
            return EXIT_VALIDATION;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error_code={} {}", e.code, e.message);
            e.exit
        }
    }
}

fn num(x: f64) -> String {
    // avoid printing -0
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

fn load(dev: &DeviceArgs) -> Result<DeviceFile, CliError> {
    let text = fs::read_to_string(&dev.device)
        .map_err(|e| CliError::validation("io", format!("{}: {e}", dev.device.display())))?;
    let mut file =
        parse_device(&text).map_err(|e| CliError::validation("parse", format!("{}: {e}", dev.device.display())))?;
    if let Some(name) = &dev.material {
        let m = file.materials.get(name).cloned().ok_or_else(|| {
            CliError::validation("validation", format!("no material named '{name}' in the device file"))
        })?;
        file.device = file.device.with_material(Arc::clone(&m));
    }
    Ok(file)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    let w =
        |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| CliError::validation("io", e.to_string()));
    match command {
        Command::Solve { dev, current } => {
            let file = load(&dev)?;
            let p = solve_operating_point(&file.device, current, &SolveOptions::default())?;
            w(out, format_point(&p))
        }
        Command::Sweep {
            dev,
            from,
            to,
            steps,
            out: path,
            order,
            refine_near,
        } => {
            let file = load(&dev)?;
            let opts = SweepOptions {
                order: match order {
                    OrderArg::Descending => SweepOrder::Descending,
                    OrderArg::Ascending => SweepOrder::Ascending,
                    OrderArg::Parallel => SweepOrder::Parallel,
                },
                spacing: refine_near.map_or(GridSpacing::Uniform, |c| GridSpacing::RefinedNear { center: c }),
                ..Default::default()
            };
            let s = sweep(&file.device, from, to, steps, &opts)?;
            let mut buf = Vec::new();
            write_sweep_csv(&s, &mut buf).map_err(|e| CliError::validation("io", e.to_string()))?;
            fs::write(&path, buf).map_err(|e| CliError::validation("io", format!("{}: {e}", path.display())))?;
            let knee = detect_knee(&s, DEFAULT_KNEE_FRACTION)
                .map(num)
                .unwrap_or_else(|_| "none".into());
            w(
                out,
                format!(
                    "points = {}\nkappa_method = {:?}\nmax_kappa_discrepancy_T_per_A = {}\nknee_A = {knee}\nwrote = {}",
                    s.len(),
                    s.kappa_method,
                    num(s.max_kappa_discrepancy),
                    path.display()
                ),
            )
        }
        Command::Isat { dev, h_sat } => {
            let file = load(&dev)?;
            let d = &file.device;
            let exact = match h_sat {
                Some(h) => predict_isat(d, h)?,
                None => predict_isat_from_materials(d)?,
            };
            let fgs = fg_sat(d);
            let b_g_sat = MU_0 * fgs / d.gap().length();
            let approx = approx_isat(d, b_g_sat)?;
            let h_used = match h_sat {
                Some(h) => h,
                None => d
                    .shunts()
                    .iter()
                    .filter_map(|s| s.material().saturation_field())
                    .fold(0.0, f64::max),
            };
            w(
                out,
                format!(
                    "h_sat_A_per_m = {}\nf_g_sat_A = {}\nb_g_sat_T = {}\nisat_A = {}\nisat_approx_A = {}",
                    num(h_used),
                    num(fgs),
                    num(b_g_sat),
                    num(exact),
                    num(approx)
                ),
            )
        }
        Command::Check {
            dev,
            d1_factor,
            rel_tol,
            current,
            b_m,
        } => {
            let file = load(&dev)?;
            let opts = ConditionOptions {
                d1_factor,
                rel_tol,
                drive_current: current,
                currents: None,
                magnet_flux_density: b_m,
                core: file.core_capacity(),
            };
            let r = check_conditions(&file.device, &opts)?;
            w(out, format_conditions(&r))
        }
        Command::Alpha { dev, perturb } => {
            let file = load(&dev)?;
            let mut d = file.device.clone();
            for p in &perturb {
                d = apply_perturbation(d, p)?;
            }
            let r = alpha_mismatch(&d)?;
            let mut text = format_tolerance(&r);
            if let Some(core) = &file.core {
                if let Ok(a) = alpha_core(&d, core) {
                    text.push_str(&format!("\nalpha_core = {}", num(a)));
                }
            }
            w(out, text)
        }
        Command::Montecarlo {
            dev,
            samples,
            seed,
            tol,
        } => {
            let file = load(&dev)?;
            let spec = ToleranceSpec {
                entries: tol.iter().map(|t| parse_tolerance(t)).collect::<Result<_, _>>()?,
            };
            let s = monte_carlo_alpha(&file.device, &spec, samples, seed)?;
            w(
                out,
                format!(
                    "samples = {}\nseed = {}\nalpha_mean = {}\nalpha_p50 = {}\nalpha_p95 = {}\nalpha_max = {}",
                    s.samples,
                    s.seed,
                    num(s.mean),
                    num(s.p50),
                    num(s.p95),
                    num(s.max)
                ),
            )
        }
        Command::Power {
            dev,
            current,
            wire,
            count,
            compare_ccw,
        } => {
            let file = load(&dev)?;
            let d = &file.device;
            let bad = |e: crate::power::PowerError| CliError::validation("validation", e.to_string());
            let spec = match wire {
                Some(s) => {
                    let v = parse_list(&s, 3, "--wire")?;
                    WireSpec::new(v[0], v[1], v[2]).map_err(bad)?
                }
                None => WireSpec::single_layer_fill(&d.shunts()[0], 0.5e-3, 0.015e-3).map_err(bad)?,
            };
            let len = wire_length(&d.shunts()[0], &spec).map_err(bad)?;
            let res = solenoid_resistance(&d.shunts()[0], &spec).map_err(bad)?;
            let p = joule_power(d, &spec, current, count).map_err(bad)?;
            let mut text = format!(
                "wire_a_m = {}\nwire_b_m = {}\nwire_c_m = {}\nwire_length_m = {}\nresistance_ohm = {}\npower_W = {}",
                num(spec.a),
                num(spec.b),
                num(spec.c),
                num(len),
                num(res),
                num(p)
            );
            if let Some(c) = compare_ccw {
                let v = parse_list(&c, 3, "--compare-ccw")?;
                let r = CcwReference::new(v[0], v[1]).map_err(bad)?;
                let ccw = ccw_equivalent(&r, v[2]);
                text.push_str(&format!(
                    "\nccw_current_A = {}\nccw_power_W = {}\npower_ratio = {}",
                    num(ccw.current),
                    num(ccw.power),
                    num(p / ccw.power)
                ));
            }
            w(out, text)
        }
    }
}

fn parse_list(s: &str, n: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::validation("usage", format!("{flag} expects {n} comma-separated numbers")))?;
    if v.len() != n {
        return Err(CliError::validation(
            "usage",
            format!("{flag} expects {n} comma-separated numbers, got {}", v.len()),
        ));
    }
    Ok(v)
}

/// Split `k=v,k=v` into pairs.
fn key_values(s: &str, flag: &str) -> Result<Vec<(String, String)>, CliError> {
    s.split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::validation("usage", format!("{flag}: '{kv}' is not key=value")))
        })
        .collect()
}

struct FieldSel {
    shunt: usize,
    field: ShuntField,
}

fn field_selection(pairs: &[(String, String)], flag: &str) -> Result<FieldSel, CliError> {
    let get = |k: &str| {
        pairs
            .iter()
            .find(|(key, _)| key == k)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| CliError::validation("usage", format!("{flag}: missing '{k}'")))
    };
    let shunt: usize = get("shunt")?
        .parse()
        .ok()
        .filter(|k| *k >= 1)
        .ok_or_else(|| CliError::validation("usage", format!("{flag}: shunt must be a positive integer")))?;
    let field = ShuntField::from_name(get("field")?)
        .ok_or_else(|| CliError::validation("usage", format!("{flag}: field must be area_sol, length or area")))?;
    Ok(FieldSel {
        shunt: shunt - 1,
        field,
    })
}

fn parse_value(pairs: &[(String, String)], key: &str) -> Option<Result<f64, CliError>> {
    pairs.iter().find(|(k, _)| k == key).map(|(_, v)| {
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::validation("usage", format!("{key}: '{v}' is not a number")))
    })
}

fn apply_perturbation(d: Device, spec: &str) -> Result<Device, CliError> {
    let pairs = key_values(spec, "--perturb")?;
    let sel = field_selection(&pairs, "--perturb")?;
    let rel = parse_value(&pairs, "rel").ok_or_else(|| CliError::validation("usage", "--perturb: missing 'rel'"))??;
    if sel.shunt >= d.shunts().len() {
        return Err(CliError::validation(
            "validation",
            format!("--perturb: shunt {} out of range", sel.shunt + 1),
        ));
    }
    let f = 1.0 + rel;
    d.map_shunt(sel.shunt, |s| match sel.field {
        ShuntField::SolenoidArea => {
            let (a, l) = (s.solenoid_area(), s.solenoid_length());
            s.with_solenoid(a * f, l)
        }
        ShuntField::Length => {
            let l = s.length();
            s.with_length(l * f)
        }
        ShuntField::Area => {
            let a = s.area();
            s.with_area(a * f)
        }
    })
    .map_err(|e| CliError::validation("validation", e.to_string()))
}

fn parse_tolerance(spec: &str) -> Result<Tolerance, CliError> {
    let pairs = key_values(spec, "--tol")?;
    let sel = field_selection(&pairs, "--tol")?;
    let distribution = match (parse_value(&pairs, "normal"), parse_value(&pairs, "uniform")) {
        (Some(sd), None) => Distribution::Normal { rel_sd: sd? },
        (None, Some(hw)) => Distribution::Uniform { rel_half_width: hw? },
        _ => {
            return Err(CliError::validation(
                "usage",
                "--tol: give exactly one of normal=sd or uniform=half_width",
            ))
        }
    };
    Ok(Tolerance {
        shunt: sel.shunt,
        field: sel.field,
        distribution,
    })
}

fn format_point(p: &OperatingPoint) -> String {
    let mut s = format!(
        "I_A = {}\nF_g_A = {}\nB_g_T = {}\nphi_g_Wb = {}\nphi_m_Wb = {}\nphi_leak_Wb = {}",
        num(p.current),
        num(p.gap_mmf),
        num(p.gap_flux_density),
        num(p.gap_flux),
        num(p.magnet_flux),
        num(p.leakage_flux)
    );
    for (k, sh) in p.shunts.iter().enumerate() {
        s.push_str(&format!(
            "\nH_s{0}_A_per_m = {1}\nB_s{0}_T = {2}\nphi_s{0}_Wb = {3}",
            k + 1,
            num(sh.field),
            num(sh.flux_density),
            num(sh.flux)
        ));
    }
    s.push_str(&format!(
        "\nresidual_Wb = {}\niterations = {}",
        num(p.residual),
        p.iterations
    ));
    s
}

fn format_conditions(r: &ConditionReport) -> String {
    let line = |name: &str, c: &crate::design::Condition| {
        format!(
            "{name}: {} lhs = {} rhs = {} margin = {}",
            c.status.as_str(),
            num(c.lhs),
            num(c.rhs),
            num(c.margin)
        )
    };
    [
        format!("D1: {}", r.d1().as_str()),
        line("D1.shunts", &r.d1_shunts),
        line("D1.core", &r.d1_core),
        line("D2", &r.d2),
        line("D3", &r.d3),
        line("D4", &r.d4),
    ]
    .join("\n")
}

fn format_tolerance(r: &ToleranceReport) -> String {
    let mut s = format!(
        "kappa_off_T_per_A = {}\nkappa_on_T_per_A = {}\nalpha = {}\nalpha_numeric = {}\ntotal_reluctance_per_H = {}",
        num(r.kappa_off),
        num(r.kappa_on),
        num(r.alpha),
        num(r.alpha_numeric),
        num(r.total_reluctance)
    );
    if let Some(o) = r.offset {
        s.push_str(&format!(
            "\noffset_Wb = {}\n# offset is A_s2 B_sat2 - A_s1 B_sat1, a flux (Wb), not a flux density",
            num(o)
        ));
    }
    s
}
