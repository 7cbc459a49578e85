//! Closed-form predictors and design checks.
//!
//! These treat the shunts as either fully unsaturated (initial permeability
//! `μ_i`) or fully saturated (`μ0`) and the primary core as ideal, which
//! turns the circuit into a linear reluctance divider.

mod tolerance;

pub use tolerance::{
    alpha_core, alpha_mismatch, alpha_mismatch_numeric, monte_carlo_alpha, output_offset, Distribution,
    MonteCarloSummary, PrimaryCoreModel, ShuntField, Tolerance, ToleranceReport, ToleranceSpec,
};

use log::warn;
use thiserror::Error;

use crate::circuit::{Device, DeviceError};
use crate::materials::{MaterialError, DEFAULT_SATURATION_EPS};
use crate::solver::{solve_operating_point, SolveError, SolveOptions};
use crate::MU_0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("shunt {shunt} has zero turns")]
    ZeroTurns { shunt: usize },
    #[error("initial permeability {0:e} must exceed mu0")]
    Permeability(f64),
    #[error("closed form needs exactly two shunts, device has {0}")]
    NotTwoShunts(usize),
    #[error("shunt {shunt} material '{material}' does not saturate")]
    NonSaturating { shunt: usize, material: String },
    #[error("invalid tolerance spec: {0}")]
    Tolerance(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Ramp sensitivity `μ0 N / ℓ_g` (T/A). Mixed turn counts use the largest.
pub fn kappa_off(device: &Device) -> f64 {
    if device.uniform_turns().is_none() {
        warn!("shunts have different turn counts; kappa_off uses the largest");
    }
    MU_0 * device.max_turns() as f64 / device.gap().length()
}

/// Parallel combination of the shunt section, gap and leakage, in 1/H.
fn load_reluctance(device: &Device, shunt_section: f64) -> f64 {
    1.0 / (1.0 / shunt_section + 1.0 / device.gap_reluctance() + device.leakage_permeance())
}

/// Gap flux when the shunt section has reluctance `r_x`:
/// `Φ_g = R_x R_leak / (R_x R_g + R_g R_leak + R_x R_leak) Φ_m`
/// with `Φ_m = F_m / (R_m + R_load)`.
pub fn divider_flux(device: &Device, r_x: f64) -> f64 {
    let r_load = load_reluctance(device, r_x);
    let phi_m = device.magnet_mmf() / (device.magnet_reluctance() + r_load);
    let rg = device.gap_reluctance();
    let share = match device.leakage_reluctance() {
        Some(rl) => r_x * rl / (r_x * rg + rg * rl + r_x * rl),
        None => r_x / (r_x + rg),
    };
    share * phi_m
}

/// OFF-state gap flux with unsaturated shunts of permeability `mu_i` (H/m).
pub fn off_state_flux(device: &Device, mu_i: f64) -> Result<f64, DesignError> {
    if mu_i.is_nan() || mu_i <= MU_0 {
        return Err(DesignError::Permeability(mu_i));
    }
    Ok(divider_flux(device, device.parallel_reluctance_off(mu_i)))
}

/// ON-state gap flux with every shunt at `μ0`.
pub fn on_state_flux(device: &Device) -> f64 {
    divider_flux(device, device.parallel_reluctance_on())
}

/// Gap mmf with every shunt saturated.
///
/// `F_g,sat = R_on R_leak R_g F_m / Λ`,
/// `Λ = R_on R_leak R_g + R_m R_leak R_g + R_m R_on R_g + R_m R_on R_leak`,
/// reducing to `R_on R_g F_m / (R_on R_g + R_m R_g + R_m R_on)` without leakage.
pub fn fg_sat(device: &Device) -> f64 {
    let ron = device.parallel_reluctance_on();
    let rg = device.gap_reluctance();
    let rm = device.magnet_reluctance();
    let fm = device.magnet_mmf();
    match device.leakage_reluctance() {
        Some(rl) => {
            let lambda = ron * rl * rg + rm * rl * rg + rm * ron * rg + rm * ron * rl;
            ron * rl * rg * fm / lambda
        }
        None => ron * rg * fm / (ron * rg + rm * rg + rm * ron),
    }
}

/// Switching current `(H_sat ℓ_s + F_g,sat) / N`, taken as the largest over
/// the shunts.
pub fn predict_isat(device: &Device, h_sat: f64) -> Result<f64, DesignError> {
    predict_isat_with(device, |_| Ok(h_sat))
}

/// [`predict_isat`] with each shunt's own `H_sat` taken from its material at
/// the default threshold.
pub fn predict_isat_from_materials(device: &Device) -> Result<f64, DesignError> {
    predict_isat_with(device, |k| {
        let m = device.shunts()[k].material();
        if m.saturates() {
            Ok(m.h_sat(DEFAULT_SATURATION_EPS)?)
        } else {
            Err(DesignError::NonSaturating {
                shunt: k + 1,
                material: m.name().to_string(),
            })
        }
    })
}

fn predict_isat_with<F>(device: &Device, h_sat: F) -> Result<f64, DesignError>
where
    F: Fn(usize) -> Result<f64, DesignError>,
{
    let fgs = fg_sat(device);
    let mut worst = f64::NEG_INFINITY;
    for (k, s) in device.shunts().iter().enumerate() {
        if s.turns() == 0 {
            return Err(DesignError::ZeroTurns { shunt: k + 1 });
        }
        let i = (h_sat(k)? * s.length() + fgs) / s.turns() as f64;
        worst = worst.max(i);
        if h_sat(k)? * s.length() > 0.1 * fgs {
            log::debug!("shunt {}: H_sat term is not small against F_g,sat", k + 1);
        }
    }
    Ok(worst)
}

/// Gap-only estimate `ℓ_g B_g,sat / (μ0 N)`.
pub fn approx_isat(device: &Device, b_g_sat: f64) -> Result<f64, DesignError> {
    let n = device.max_turns();
    if n == 0 {
        return Err(DesignError::ZeroTurns { shunt: 1 });
    }
    if let Some(h) = device
        .shunts()
        .iter()
        .filter_map(|s| s.material().saturation_field().map(|h| h * s.length()))
        .reduce(f64::max)
    {
        if h > 0.1 * fg_sat(device) {
            warn!("H_sat l_s = {h:.3e} A is not small against F_g,sat; the gap-only estimate is poor");
        }
    }
    Ok(device.gap().length() * b_g_sat / (MU_0 * n as f64))
}

/// `(1/R_on + 1/R_m + 1/R_leak + 1/R_g)^-1`.
pub fn total_reluctance(device: &Device) -> f64 {
    1.0 / (1.0 / device.parallel_reluctance_on()
        + 1.0 / device.magnet_reluctance()
        + device.leakage_permeance()
        + 1.0 / device.gap_reluctance())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotEvaluated,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotEvaluated => "not evaluated",
        }
    }
}

/// One evaluated inequality or cancellation.
///
/// For inequalities `margin` is `rhs / lhs`; for cancellations `lhs` is the
/// signed sum, `rhs` the largest term magnitude and `margin` their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub status: Status,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl Condition {
    fn not_evaluated() -> Self {
        Self {
            status: Status::NotEvaluated,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
        }
    }

    fn less_than(lhs: f64, rhs: f64) -> Self {
        Self {
            status: Status::from_bool(lhs < rhs),
            lhs,
            rhs,
            margin: rhs / lhs,
        }
    }

    fn cancels(terms: &[f64], rel_tol: f64) -> Self {
        let sum: f64 = terms.iter().sum();
        let scale = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        let margin = if scale > 0.0 { sum.abs() / scale } else { 0.0 };
        Self {
            status: Status::from_bool(sum.abs() <= rel_tol * scale),
            lhs: sum,
            rhs: scale,
            margin,
        }
    }
}

/// Primary-core data for the magnet/core capacity part of D1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreCapacity {
    /// Primary-core cross-section (m²).
    pub area: f64,
    /// Primary-core saturation flux density (T).
    pub b_sat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionOptions {
    /// Factor standing in for "much less than" in D1.
    pub d1_factor: f64,
    /// Relative tolerance for the D3 and D4 cancellations.
    pub rel_tol: f64,
    /// Common solenoid current for D3 (A).
    pub drive_current: f64,
    /// Per-shunt currents overriding `drive_current`.
    pub currents: Option<Vec<f64>>,
    /// Magnet flux density for D1; `None` uses the loaded value at `I = 0`.
    pub magnet_flux_density: Option<f64>,
    pub core: Option<CoreCapacity>,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            d1_factor: 10.0,
            rel_tol: 1e-9,
            drive_current: 1.0,
            currents: None,
            magnet_flux_density: None,
            core: None,
        }
    }
}

/// Design conditions D1 to D4.
///
/// D1 is split in two: `A_m B_m < Σ A_s B_sat` (`d1_shunts`) and
/// `factor · Σ A_s B_sat <= A_p B_sat,p` (`d1_core`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub d1_shunts: Condition,
    pub d1_core: Condition,
    pub d2: Condition,
    pub d3: Condition,
    pub d4: Condition,
}

impl ConditionReport {
    pub fn d1(&self) -> Status {
        match (self.d1_shunts.status, self.d1_core.status) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Pass, Status::Pass) => Status::Pass,
            _ => Status::NotEvaluated,
        }
    }

    /// Statuses in order D1, D2, D3, D4.
    pub fn statuses(&self) -> [Status; 4] {
        [self.d1(), self.d2.status, self.d3.status, self.d4.status]
    }
}

/// Evaluate D1 to D4 for `device`.
pub fn check_conditions(device: &Device, opts: &ConditionOptions) -> Result<ConditionReport, DesignError> {
    let shunts = device.shunts();
    if let Some(c) = &opts.currents {
        if c.len() != shunts.len() {
            return Err(DesignError::Device(DeviceError::MismatchedShunts));
        }
    }
    let b_sats: Option<Vec<f64>> = shunts.iter().map(|s| s.material().b_sat()).collect();

    let (d1_shunts, d1_core) = match &b_sats {
        Some(b) => {
            let capacity: f64 = shunts.iter().zip(b).map(|(s, b)| s.area() * b).sum();
            let b_m = match opts.magnet_flux_density {
                Some(v) => v,
                None => {
                    let p = solve_operating_point(device, 0.0, &SolveOptions::default())?;
                    p.magnet_flux.abs() / device.magnet().area()
                }
            };
            let shunt_side = Condition::less_than(device.magnet().area() * b_m, capacity);
            let core_side = match opts.core {
                Some(core) => {
                    let rhs = core.area * core.b_sat;
                    let lhs = opts.d1_factor * capacity;
                    Condition {
                        status: Status::from_bool(lhs <= rhs),
                        lhs,
                        rhs,
                        margin: rhs / lhs,
                    }
                }
                None => Condition::not_evaluated(),
            };
            (shunt_side, core_side)
        }
        None => (Condition::not_evaluated(), Condition::not_evaluated()),
    };

    let gap_ratio = device.gap().length() / device.gap().area();
    let shunt_ratio = shunts
        .iter()
        .map(|s| s.length() / s.area())
        .fold(f64::INFINITY, f64::min);
    let d2 = Condition::less_than(gap_ratio, shunt_ratio);

    let d3_terms: Vec<f64> = shunts
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let i = opts.currents.as_ref().map_or(opts.drive_current, |c| c[k]);
            s.orientation().sign() * s.turns() as f64 * s.solenoid_area() * i / s.length()
        })
        .collect();
    let d3 = Condition::cancels(&d3_terms, opts.rel_tol);

    let d4 = match &b_sats {
        Some(b) => {
            let terms: Vec<f64> = shunts
                .iter()
                .zip(b)
                .map(|(s, b)| s.orientation().sign() * s.area() * b)
                .collect();
            Condition::cancels(&terms, opts.rel_tol)
        }
        None => Condition::not_evaluated(),
    };

    Ok(ConditionReport {
        d1_shunts,
        d1_core,
        d2,
        d3,
        d4,
    })
}
