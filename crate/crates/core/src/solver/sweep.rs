use rayon::prelude::*;
use thiserror::Error;

use super::{point_sensitivity, solve_near, OperatingPoint, SolveError, SolveOptions};
use crate::circuit::Device;
use crate::interp::MonotoneCubic;
use crate::MU_0;

/// Default knee threshold as a fraction of `κ_off`.
pub const DEFAULT_KNEE_FRACTION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
    #[error("solve failed: {0}")]
    Solve(#[from] SolveError),
    #[error("sensitivity needs at least 4 grid points, got {0}")]
    TooFewPoints(usize),
    #[error("knee fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("no knee: sensitivity never falls below {threshold:e} T/A after the ramp")]
    NoKnee { threshold: f64 },
}

/// Order in which grid points are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepOrder {
    /// From the highest current down, warm-starting each bracket.
    #[default]
    Descending,
    /// From the lowest current up, warm-starting each bracket.
    Ascending,
    /// Every point solved independently on the rayon pool.
    Parallel,
}

/// How the current grid is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GridSpacing {
    #[default]
    Uniform,
    /// Points clustered around `center` by a sinh stretch.
    RefinedNear { center: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOptions {
    pub solve: SolveOptions,
    pub order: SweepOrder,
    pub spacing: GridSpacing,
}

/// Which estimator produced [`Sweep::kappa`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaMethod {
    Spline,
    CentralDifference,
}

/// `B_g(I)` and `κ(I)` over an ascending current grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub grid: Vec<f64>,
    pub points: Vec<OperatingPoint>,
    pub kappa: Vec<f64>,
    pub kappa_method: KappaMethod,
    /// Central-difference estimate, always computed.
    pub kappa_central: Vec<f64>,
    /// Largest `|spline - central|` over the grid (0 without a spline).
    pub max_kappa_discrepancy: f64,
    /// `μ0 N / ℓ_g` of the swept device.
    pub kappa_off: f64,
}

impl Sweep {
    pub fn gap_flux_density(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gap_flux_density).collect()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Interpolated sensitivity at an arbitrary current inside the grid.
    pub fn kappa_at(&self, current: f64) -> Option<f64> {
        let spline = MonotoneCubic::new(self.grid.clone(), self.gap_flux_density()).ok()?;
        Some(spline.derivative(current))
    }
}

/// Spline and central-difference sensitivities over a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    pub spline: Vec<f64>,
    pub central: Vec<f64>,
    pub max_discrepancy: f64,
}

pub(crate) fn build_grid(start: f64, end: f64, steps: usize, spacing: GridSpacing) -> Result<Vec<f64>, SweepError> {
    if steps < 2 {
        return Err(SweepError::InvalidGrid(format!("need at least 2 steps, got {steps}")));
    }
    if !start.is_finite() || !end.is_finite() {
        return Err(SweepError::InvalidGrid("non-finite bound".into()));
    }
    let (lo, hi) = if start <= end { (start, end) } else { (end, start) };
    if lo == hi {
        return Err(SweepError::InvalidGrid("start and end coincide".into()));
    }
    let n = steps - 1;
    let mut grid: Vec<f64> = match spacing {
        GridSpacing::Uniform => (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect(),
        GridSpacing::RefinedNear { center } => {
            if !(center > lo && center < hi) {
                return Err(SweepError::InvalidGrid(format!(
                    "refinement centre {center} outside ({lo}, {hi})"
                )));
            }
            stretched(lo, hi, n, center)
        }
    };
    grid[0] = lo;
    grid[n] = hi;
    for i in 1..grid.len() {
        if grid[i] <= grid[i - 1] {
            return Err(SweepError::InvalidGrid("grid is not strictly increasing".into()));
        }
    }
    Ok(grid)
}

/// `x(s) = c + w sinh(β (s - s0))` through both end points.
fn stretched(lo: f64, hi: f64, n: usize, center: f64) -> Vec<f64> {
    const BETA: f64 = 4.0;
    // pick s0 so that (hi - c) / (c - lo) = sinh(β(1 - s0)) / sinh(β s0)
    let target = (hi - center) / (center - lo);
    let ratio = |s0: f64| (BETA * (1.0 - s0)).sinh() / (BETA * s0).sinh();
    let (mut a, mut b) = (1e-9, 1.0 - 1e-9);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if ratio(m) > target {
            a = m;
        } else {
            b = m;
        }
    }
    let s0 = 0.5 * (a + b);
    let w = (center - lo) / (BETA * s0).sinh();
    (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            center + w * (BETA * (s - s0)).sinh()
        })
        .collect()
}

/// Solve the device over `steps` currents between `start` and `end`.
///
/// Results are returned in ascending-current order whatever the solve order.
pub fn sweep(device: &Device, start: f64, end: f64, steps: usize, opts: &SweepOptions) -> Result<Sweep, SweepError> {
    let grid = build_grid(start, end, steps, opts.spacing)?;
    let points = match opts.order {
        SweepOrder::Parallel => grid
            .par_iter()
            .map(|&i| solve_near(device, i, &opts.solve, None))
            .collect::<Result<Vec<_>, _>>()?,
        SweepOrder::Descending => warm_chain(device, grid.iter().rev(), &opts.solve)?
            .into_iter()
            .rev()
            .collect(),
        SweepOrder::Ascending => warm_chain(device, grid.iter(), &opts.solve)?,
    };
    let kappa_off = MU_0 * device.max_turns() as f64 / device.gap().length();
    let b: Vec<f64> = points.iter().map(|p| p.gap_flux_density).collect();
    let central = central_difference(&grid, &b);
    let (kappa, method, disc) = if grid.len() >= 4 {
        let s = spline_derivative(&grid, &b);
        let disc = max_abs_diff(&s, &central);
        (s, KappaMethod::Spline, disc)
    } else {
        (central.clone(), KappaMethod::CentralDifference, 0.0)
    };
    Ok(Sweep {
        grid,
        points,
        kappa,
        kappa_method: method,
        kappa_central: central,
        max_kappa_discrepancy: disc,
        kappa_off,
    })
}

fn warm_chain<'a, I>(device: &Device, currents: I, opts: &SolveOptions) -> Result<Vec<OperatingPoint>, SolveError>
where
    I: Iterator<Item = &'a f64>,
{
    let mut out = Vec::new();
    let mut guess = None;
    for &i in currents {
        let p = solve_near(device, i, opts, guess)?;
        guess = Some(p.gap_mmf);
        out.push(p);
    }
    Ok(out)
}

/// Recompute spline and central-difference `κ` for a sweep.
pub fn sensitivity(sweep: &Sweep) -> Result<Sensitivity, SweepError> {
    if sweep.grid.len() < 4 {
        return Err(SweepError::TooFewPoints(sweep.grid.len()));
    }
    let b = sweep.gap_flux_density();
    let spline = spline_derivative(&sweep.grid, &b);
    let central = central_difference(&sweep.grid, &b);
    let max_discrepancy = max_abs_diff(&spline, &central);
    Ok(Sensitivity {
        spline,
        central,
        max_discrepancy,
    })
}

fn spline_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let p = MonotoneCubic::new(x.to_vec(), y.to_vec()).expect("sweep grid is strictly increasing");
    p.knot_derivatives().to_vec()
}

/// Second-order finite differences on a possibly non-uniform grid.
fn central_difference(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let d = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![d, d];
    }
    let three = |i: usize, j: usize, k: usize, at: usize| {
        // derivative at x[at] of the quadratic through i, j, k
        let (x0, x1, x2) = (x[i], x[j], x[k]);
        let xa = x[at];
        y[i] * (2.0 * xa - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y[j] * (2.0 * xa - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y[k] * (2.0 * xa - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    let mut d = Vec::with_capacity(n);
    d.push(three(0, 1, 2, 0));
    for i in 1..n - 1 {
        d.push(three(i - 1, i, i + 1, i));
    }
    d.push(three(n - 3, n - 2, n - 1, n - 1));
    d
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Onset of the output plateau: the current beyond which `|κ|` stays at or
/// below `fraction κ_off` on the non-negative-current branch, refined by
/// bisection on the spline derivative between the neighbouring grid points.
///
/// A sweep whose `|κ|` never exceeds the threshold (no ramp) or is still
/// above it at the last grid point has no knee.
pub fn detect_knee(sweep: &Sweep, fraction: f64) -> Result<f64, SweepError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SweepError::BadFraction(fraction));
    }
    let threshold = fraction * sweep.kappa_off;
    let no_knee = SweepError::NoKnee { threshold };
    if sweep.grid.len() < 4 || threshold <= 0.0 {
        return Err(no_knee);
    }
    let spline = MonotoneCubic::new(sweep.grid.clone(), sweep.gap_flux_density())
        .map_err(|e| SweepError::InvalidGrid(e.to_string()))?;
    let k = |i: f64| spline.derivative(i).abs();

    let last_above = (0..sweep.grid.len())
        .rfind(|&i| sweep.grid[i] >= 0.0 && sweep.kappa[i].abs() > threshold)
        .ok_or(no_knee.clone())?;
    if last_above + 1 >= sweep.grid.len() {
        return Err(no_knee);
    }
    let (mut lo, mut hi) = (sweep.grid[last_above], sweep.grid[last_above + 1]);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if k(mid) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Sensitivity at every sweep point from implicit differentiation of the
/// flux balance (independent of the grid).
pub fn analytic_kappa(device: &Device, sweep: &Sweep) -> Vec<f64> {
    sweep.points.iter().map(|p| point_sensitivity(device, p)).collect()
}
