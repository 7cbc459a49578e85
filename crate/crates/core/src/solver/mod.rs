//! Operating-point solution of the flux balance, current sweeps, and the
//! gap current sensitivity `κ = dB_g/dI`.

mod brent;
mod sweep;

pub use brent::{brent, BrentRoot};
pub use sweep::{
    analytic_kappa, detect_knee, sensitivity, sweep, GridSpacing, KappaMethod, Sensitivity, Sweep, SweepError,
    SweepOptions, SweepOrder, DEFAULT_KNEE_FRACTION,
};

use thiserror::Error;

use crate::circuit::Device;
use crate::MU_0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(
        "no sign change at I = {current} A after {expansions} expansions: \
         residual({lo:e}) = {f_lo:e}, residual({hi:e}) = {f_hi:e}"
    )]
    Bracketing {
        current: f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        expansions: usize,
    },
    #[error(
        "no convergence at I = {current} A after {iterations} iterations (best F_g = {best:e}, residual {residual:e})"
    )]
    NonConvergence {
        current: f64,
        best: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("non-finite drive current {0}")]
    NonFinite(f64),
    #[error("invalid solver options: {0}")]
    Options(String),
}

/// Root-finder settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Absolute tolerance on `F_g` (A). `None` uses `1e-9 max(1, F_m)`.
    pub abs_tol_fg: Option<f64>,
    /// Residual tolerance relative to the magnet flux at the iterate.
    pub residual_rel_tol: f64,
    pub max_iter: usize,
    /// Initial bracket half-width as a multiple of `F_m`.
    pub bracket_margin: f64,
    pub max_bracket_expansions: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            abs_tol_fg: None,
            residual_rel_tol: 1e-12,
            max_iter: 200,
            bracket_margin: 1.25,
            max_bracket_expansions: 60,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), SolveError> {
        if let Some(t) = self.abs_tol_fg {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SolveError::Options(format!("abs_tol_fg must be positive, got {t}")));
            }
        }
        if self.residual_rel_tol.is_nan() || self.residual_rel_tol <= 0.0 {
            return Err(SolveError::Options("residual_rel_tol must be positive".into()));
        }
        if self.max_iter < 1 {
            return Err(SolveError::Options("max_iter must be >= 1".into()));
        }
        if !(self.bracket_margin > 0.0 && self.bracket_margin.is_finite()) {
            return Err(SolveError::Options("bracket_margin must be positive".into()));
        }
        Ok(())
    }

    pub fn abs_tol_for(&self, device: &Device) -> f64 {
        self.abs_tol_fg.unwrap_or_else(|| 1e-9 * device.magnet_mmf().max(1.0))
    }
}

/// State of one shunt at a solved point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuntState {
    /// Core field `H_n` (A/m).
    pub field: f64,
    /// Core flux density `B_n` (T).
    pub flux_density: f64,
    /// Core flux `Φ_n` (Wb).
    pub flux: f64,
}

/// Solved circuit state at one drive current.
///
/// Element fluxes are signed as flow into the upper pole, so the gap and
/// leakage fluxes are negative when `F_g > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub current: f64,
    /// Node mmf `F_g` (A), signed.
    pub gap_mmf: f64,
    /// `μ0 |F_g| / ℓ_g` (T).
    pub gap_flux_density: f64,
    pub gap_flux: f64,
    pub magnet_flux: f64,
    pub leakage_flux: f64,
    pub shunts: Vec<ShuntState>,
    /// Net flux at the returned `F_g` (Wb).
    pub residual: f64,
    pub iterations: usize,
}

impl OperatingPoint {
    fn assemble(device: &Device, current: f64, gap_mmf: f64, iterations: usize) -> Self {
        let fluxes = device.fluxes(current, gap_mmf);
        let shunts = device
            .shunts()
            .iter()
            .zip(&fluxes.shunts)
            .map(|(s, &flux)| {
                let field = s.field(current, gap_mmf);
                ShuntState {
                    field,
                    flux_density: s.material().b_of_h(field),
                    flux,
                }
            })
            .collect();
        Self {
            current,
            gap_mmf,
            gap_flux_density: MU_0 * gap_mmf.abs() / device.gap().length(),
            gap_flux: fluxes.gap,
            magnet_flux: fluxes.magnet,
            leakage_flux: fluxes.leakage,
            shunts,
            residual: fluxes.net(),
            iterations,
        }
    }

    /// Sum of all element fluxes; equals [`OperatingPoint::residual`].
    pub fn net_flux(&self) -> f64 {
        self.shunts.iter().map(|s| s.flux).sum::<f64>() + self.magnet_flux + self.leakage_flux + self.gap_flux
    }
}

/// Solve the flux balance for `F_g` at drive current `current`.
pub fn solve_operating_point(device: &Device, current: f64, opts: &SolveOptions) -> Result<OperatingPoint, SolveError> {
    solve_near(device, current, opts, None)
}

/// As [`solve_operating_point`], with the initial bracket centred on a
/// previous root when `guess` is given.
pub fn solve_near(
    device: &Device,
    current: f64,
    opts: &SolveOptions,
    guess: Option<f64>,
) -> Result<OperatingPoint, SolveError> {
    opts.validate()?;
    if !current.is_finite() {
        return Err(SolveError::NonFinite(current));
    }
    let f = |fg: f64| device.residual(current, fg);
    let fm = device.magnet_mmf();
    let drive: f64 = device.shunts().iter().map(|s| s.drive_mmf(current).abs()).sum();
    let scale = if fm > 0.0 { fm } else { drive.max(1.0) };

    let (mut lo, mut hi) = match guess {
        Some(g) if g.is_finite() => {
            let w = 1e-3 * scale;
            (g - w, g + w)
        }
        _ => (-opts.bracket_margin * scale, opts.bracket_margin * scale),
    };
    let (mut f_lo, mut f_hi) = (f(lo), f(hi));
    let mut expansions = 0;
    // residual is decreasing: need f(lo) >= 0 >= f(hi)
    while f_lo < 0.0 || f_hi > 0.0 {
        if expansions >= opts.max_bracket_expansions {
            return Err(SolveError::Bracketing {
                current,
                lo,
                hi,
                f_lo,
                f_hi,
                expansions,
            });
        }
        // the far end moves out by twice the current width each time
        let step = 2.0 * (hi - lo);
        if f_lo < 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo -= step;
            f_lo = f(lo);
        } else {
            lo = hi;
            f_lo = f_hi;
            hi += step;
            f_hi = f(hi);
        }
        expansions += 1;
    }

    let xtol = opts.abs_tol_for(device);
    let ftol_at = |fg: f64| opts.residual_rel_tol * ((fm - fg) / device.magnet_reluctance()).abs();
    let ftol = ftol_at(0.5 * (lo + hi));
    let root = brent(f, lo, hi, f_lo, f_hi, xtol, ftol, opts.max_iter);
    if !root.converged {
        return Err(SolveError::NonConvergence {
            current,
            best: root.root,
            residual: root.value,
            iterations: root.iterations,
        });
    }

    let (x, iters) = polish(device, current, root, &ftol_at, opts.max_iter);
    Ok(OperatingPoint::assemble(device, current, x, iters))
}

/// Safeguarded Newton refinement inside the final Brent bracket, driving the
/// residual down to the flux tolerance when the `F_g` tolerance alone leaves
/// it larger.
fn polish<T>(device: &Device, current: f64, root: BrentRoot, ftol_at: &T, max_iter: usize) -> (f64, usize)
where
    T: Fn(f64) -> f64,
{
    let mut best = (root.root, root.value);
    let (mut x, mut fx) = best;
    let (mut lo, mut hi) = root.bracket;
    let mut iters = root.iterations;
    for _ in 0..20 {
        if fx == 0.0 || fx.abs() <= ftol_at(x) || iters >= max_iter {
            break;
        }
        // residual decreasing: positive values lie left of the root
        if fx > 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let slope = device.residual_slope(current, x);
        let mut next = x - fx / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if next == x {
            break;
        }
        x = next;
        fx = device.residual(current, x);
        iters += 1;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
    }
    (best.0, iters)
}

/// Gap sensitivity `dB_g/dI` at a solved point by implicit differentiation
/// of the flux balance.
pub fn point_sensitivity(device: &Device, point: &OperatingPoint) -> f64 {
    let i = point.current;
    let fg = point.gap_mmf;
    let dfg_di = -device.residual_current_derivative(i, fg) / device.residual_slope(i, fg);
    let sign = if fg < 0.0 { -1.0 } else { 1.0 };
    sign * MU_0 * dfg_di / device.gap().length()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Magnet;
    use crate::materials::MaterialModel;
    use crate::presets;

    #[test]
    fn dead_magnet_gives_zero() {
        let d = presets::table1_device(presets::mumetal_class())
            .with_magnet(Magnet::cylindrical(4e-3, 1e-3, 0.0, 1.05).unwrap());
        let p = solve_operating_point(&d, 0.0, &SolveOptions::default()).unwrap();
        assert_eq!(p.gap_mmf, 0.0);
        assert_eq!(p.gap_flux_density, 0.0);
        assert_eq!(p.magnet_flux, 0.0);
        assert!(p.shunts.iter().all(|s| s.flux == 0.0));
    }

    #[test]
    fn deep_saturation_matches_saturated_divider() {
        let d = presets::table1_device(presets::mumetal_class());
        let p = solve_operating_point(&d, 10.0, &SolveOptions::default()).unwrap();
        let ron = d.parallel_reluctance_on();
        let (rm, rg) = (d.magnet_reluctance(), d.gap_reluctance());
        let fgsat = ron * rg / (ron * rg + rm * rg + ron * rm) * d.magnet_mmf();
        let expected = MU_0 * fgsat / d.gap().length();
        assert!((p.gap_flux_density - expected).abs() < 1e-3 * expected);
        assert!((p.gap_flux_density - 0.70).abs() < 0.01);
    }

    #[test]
    fn residual_tolerance_met() {
        let d = presets::table1_device(presets::mumetal_class());
        for i in [0.0, 0.01, 0.5, 2.0, 3.7, 3.8, 8.0, -4.0] {
            let p = solve_operating_point(&d, i, &SolveOptions::default()).unwrap();
            assert!(
                p.residual.abs() <= 1e-9 * p.magnet_flux.abs(),
                "I={i}: {:e}",
                p.residual
            );
            assert!((p.net_flux() - p.residual).abs() <= 1e-18);
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let d = presets::table1_device(presets::ns4750_class());
        let opts = SolveOptions::default();
        let cold = solve_operating_point(&d, 5.0, &opts).unwrap();
        let warm = solve_near(&d, 5.0, &opts, Some(cold.gap_mmf + 40.0)).unwrap();
        assert!((cold.gap_mmf - warm.gap_mmf).abs() <= opts.abs_tol_for(&d));
    }

    #[test]
    fn bracketing_failure_is_reported() {
        let d = presets::table1_device(presets::mumetal_class());
        let opts = SolveOptions {
            bracket_margin: 1e-9,
            max_bracket_expansions: 2,
            ..Default::default()
        };
        let e = solve_operating_point(&d, 0.0, &opts).unwrap_err();
        assert!(matches!(e, SolveError::Bracketing { expansions: 2, .. }));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let d = presets::table1_device(presets::mumetal_class());
        let opts = SolveOptions {
            max_iter: 1,
            abs_tol_fg: Some(1e-300),
            ..Default::default()
        };
        let e = solve_operating_point(&d, 2.0, &opts).unwrap_err();
        assert!(matches!(e, SolveError::NonConvergence { .. }));
    }

    #[test]
    fn point_sensitivity_on_ramp_is_kappa_off() {
        let d = presets::table1_device(presets::mumetal_class());
        let p = solve_operating_point(&d, 2.0, &SolveOptions::default()).unwrap();
        let k = point_sensitivity(&d, &p);
        let koff = MU_0 * 30.0 / d.gap().length();
        assert!((k / koff - 1.0).abs() < 0.02, "{k} vs {koff}");
    }

    #[test]
    fn linear_shunts_follow_off_divider() {
        let lin = MaterialModel::linear("lin", 5e4).unwrap();
        let d = presets::table1_device(lin);
        let p = solve_operating_point(&d, 0.0, &SolveOptions::default()).unwrap();
        let roff = d.parallel_reluctance_off(5e4 * MU_0);
        let fg = d.magnet_mmf()
            / d.magnet_reluctance()
            / (1.0 / roff + 1.0 / d.magnet_reluctance() + 1.0 / d.gap_reluctance());
        assert!((p.gap_mmf - fg).abs() <= 1e-9 * fg);
    }
}
