use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{kappa_off, total_reluctance, DesignError};
use crate::circuit::{Device, DeviceError, Shunt};
use crate::solver::brent;
use crate::MU_0;

/// Sensitivities and switching ratio of the saturated (ON) device.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceReport {
    pub kappa_off: f64,
    pub kappa_on: f64,
    /// `|κ_on / κ_off|`.
    pub alpha: f64,
    /// Switching ratio from finite differences of the linearised circuit.
    pub alpha_numeric: f64,
    pub total_reluctance: f64,
    /// `A_s,2 B_sat,2 - A_s,1 B_sat,1` (Wb), when both shunts saturate.
    pub offset: Option<f64>,
    pub monte_carlo: Option<MonteCarloSummary>,
}

impl ToleranceReport {
    /// Relative disagreement between the closed-form and numeric `α`.
    pub fn alpha_discrepancy(&self) -> f64 {
        if self.alpha == 0.0 && self.alpha_numeric == 0.0 {
            0.0
        } else {
            (self.alpha - self.alpha_numeric).abs() / self.alpha.abs().max(self.alpha_numeric.abs())
        }
    }
}

fn require_pair(device: &Device) -> Result<(), DesignError> {
    match device.shunts().len() {
        2 => Ok(()),
        n => Err(DesignError::NotTwoShunts(n)),
    }
}

/// Saturated solenoid reluctance `ℓ_s / (μ0 A_sol)`.
fn solenoid_reluctance(s: &Shunt) -> f64 {
    s.length() / (MU_0 * s.solenoid_area())
}

/// Switching ratio of a two-shunt device from its solenoid mismatch.
///
/// `κ_on = (μ0 R_t / ℓ_g) Σ η_n N_n / R_n` with `R_n = ℓ_s,n / (μ0 A_sol,n)`,
/// which for equal turns is `(μ0 R_t N / ℓ_g)(1/R_2 - 1/R_1)`, and
/// `α = |κ_on / κ_off| = μ0 R_t |A_sol,2/ℓ_s,2 - A_sol,1/ℓ_s,1|`.
pub fn alpha_mismatch(device: &Device) -> Result<ToleranceReport, DesignError> {
    require_pair(device)?;
    let k_off = kappa_off(device);
    let rt = total_reluctance(device);
    let drive: f64 = device
        .shunts()
        .iter()
        .map(|s| s.orientation().sign() * s.turns() as f64 / solenoid_reluctance(s))
        .sum();
    let k_on = MU_0 * rt * drive / device.gap().length();
    let alpha = if k_off == 0.0 { 0.0 } else { (k_on / k_off).abs() };
    Ok(ToleranceReport {
        kappa_off: k_off,
        kappa_on: k_on,
        alpha,
        alpha_numeric: alpha_mismatch_numeric(device)?,
        total_reluctance: rt,
        offset: output_offset(device).ok(),
        monte_carlo: None,
    })
}

/// `α` from central differences of the linearised ON-state balance
/// `Σ (η_n N_n δI - δF)/R_n - δF/R_m - δF/R_leak - δF/R_g = 0`,
/// each side solved by Brent.
pub fn alpha_mismatch_numeric(device: &Device) -> Result<f64, DesignError> {
    require_pair(device)?;
    let k_off = kappa_off(device);
    if k_off == 0.0 {
        return Ok(0.0);
    }
    let shunts: Vec<(f64, f64)> = device
        .shunts()
        .iter()
        .map(|s| (s.orientation().sign() * s.turns() as f64, solenoid_reluctance(s)))
        .collect();
    let rm = device.magnet_reluctance();
    let pl = device.leakage_permeance();
    let rg = device.gap_reluctance();
    let balance =
        |di: f64, df: f64| shunts.iter().map(|(en, r)| (en * di - df) / r).sum::<f64>() - df / rm - df * pl - df / rg;
    let h = 1e-3;
    let span = 2.0 * shunts.iter().map(|(en, _)| en.abs()).sum::<f64>() * h;
    let solve = |di: f64| {
        let f = |df: f64| balance(di, df);
        brent(f, -span, span, f(-span), f(span), 1e-15 * span, 0.0, 200).root
    };
    let k_on = MU_0 * (solve(h) - solve(-h)) / (2.0 * h * device.gap().length());
    Ok((k_on / k_off).abs())
}

/// Finite-permeability primary core between the shunts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimaryCoreModel {
    pub mean_path: f64,
    pub area: f64,
    pub mu_rel: f64,
}

impl PrimaryCoreModel {
    pub fn new(mean_path: f64, area: f64, mu_rel: f64) -> Result<Self, DesignError> {
        for (name, v) in [("mean_path", mean_path), ("area", area), ("mu_rel", mu_rel)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DesignError::Device(DeviceError::Invalid {
                    element: "primary_core".into(),
                    field: name,
                    requirement: "finite and > 0",
                    value: v,
                }));
            }
        }
        Ok(Self {
            mean_path,
            area,
            mu_rel,
        })
    }

    /// Series reluctance `δR = ℓ / (μ_rel μ0 A)`.
    pub fn delta_r(&self) -> f64 {
        self.mean_path / (self.mu_rel * MU_0 * self.area)
    }
}

/// Switching ratio set by the core reluctance between the two shunts:
/// `α = R_t δR / (R² + R δR)` with `R = ℓ_s / (μ0 A_s)`.
pub fn alpha_core(device: &Device, core: &PrimaryCoreModel) -> Result<f64, DesignError> {
    require_pair(device)?;
    device.pair_reluctance_on()?;
    let s = &device.shunts()[0];
    let r = s.saturated_reluctance();
    let dr = core.delta_r();
    Ok(total_reluctance(device) * dr / (r * r + r * dr))
}

/// `A_s,2 B_sat,2 - A_s,1 B_sat,1` (Wb): the saturated-shunt flux imbalance
/// that shifts the ON-state output.
pub fn output_offset(device: &Device) -> Result<f64, DesignError> {
    require_pair(device)?;
    let mut capacity = [0.0; 2];
    for (k, s) in device.shunts().iter().enumerate() {
        let b = s.material().b_sat().ok_or_else(|| DesignError::NonSaturating {
            shunt: k + 1,
            material: s.material().name().to_string(),
        })?;
        capacity[k] = s.area() * b;
    }
    Ok(capacity[1] - capacity[0])
}

/// Which shunt quantity a tolerance perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShuntField {
    SolenoidArea,
    Length,
    Area,
}

impl ShuntField {
    pub fn name(self) -> &'static str {
        match self {
            ShuntField::SolenoidArea => "area_sol",
            ShuntField::Length => "length",
            ShuntField::Area => "area",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "area_sol" => Some(ShuntField::SolenoidArea),
            "length" => Some(ShuntField::Length),
            "area" => Some(ShuntField::Area),
            _ => None,
        }
    }
}

/// Relative scatter of one quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Normal { rel_sd: f64 },
    Uniform { rel_half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// 0-based shunt index.
    pub shunt: usize,
    pub field: ShuntField,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToleranceSpec {
    pub entries: Vec<Tolerance>,
}

impl ToleranceSpec {
    pub fn validate(&self, device: &Device) -> Result<(), DesignError> {
        let n = device.shunts().len();
        for t in &self.entries {
            if t.shunt >= n {
                return Err(DesignError::Tolerance(format!(
                    "shunt {} out of range (device has {n})",
                    t.shunt + 1
                )));
            }
            match t.distribution {
                Distribution::Normal { rel_sd } if !(0.0..=0.2).contains(&rel_sd) => {
                    return Err(DesignError::Tolerance(format!(
                        "normal relative sd must lie in [0, 0.2], got {rel_sd}"
                    )))
                }
                Distribution::Uniform { rel_half_width } if !(0.0..1.0).contains(&rel_half_width) => {
                    return Err(DesignError::Tolerance(format!(
                        "uniform relative half-width must lie in [0, 1), got {rel_half_width}"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Statistics of sampled switching ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub samples: usize,
    pub seed: u64,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

/// Apply the perturbations of sample `index` to `device`.
fn perturbed(device: &Device, spec: &ToleranceSpec, seed: u64, index: u64) -> Result<Device, DesignError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut d = device.clone();
    for t in &spec.entries {
        let x = match t.distribution {
            Distribution::Normal { rel_sd } => rel_sd * rng.sample::<f64, _>(StandardNormal),
            Distribution::Uniform { rel_half_width } => rel_half_width * (2.0 * rng.random::<f64>() - 1.0),
        };
        let factor = 1.0 + x;
        if factor <= 0.0 {
            return Err(DesignError::Tolerance(format!(
                "sample {index} drew a non-positive {} factor",
                t.field.name()
            )));
        }
        d = d.map_shunt(t.shunt, |s| match t.field {
            ShuntField::SolenoidArea => {
                let (a, l) = (s.solenoid_area(), s.solenoid_length());
                s.with_solenoid(a * factor, l)
            }
            ShuntField::Length => {
                let l = s.length();
                s.with_length(l * factor)
            }
            ShuntField::Area => {
                let a = s.area();
                s.with_area(a * factor)
            }
        })?;
    }
    Ok(d)
}

/// Switching-ratio distribution under random fabrication errors.
///
/// Sample `i` draws from a ChaCha8 stream keyed by `(seed, i)`, so the
/// result does not depend on how the samples are spread over threads.
pub fn monte_carlo_alpha(
    device: &Device,
    spec: &ToleranceSpec,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloSummary, DesignError> {
    require_pair(device)?;
    spec.validate(device)?;
    if samples == 0 {
        return Err(DesignError::Tolerance("need at least one sample".into()));
    }
    let mut alphas = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let d = perturbed(device, spec, seed, i)?;
            let k_off = kappa_off(&d);
            let rt = total_reluctance(&d);
            let drive: f64 = d
                .shunts()
                .iter()
                .map(|s| s.orientation().sign() * s.turns() as f64 / solenoid_reluctance(s))
                .sum();
            let k_on = MU_0 * rt * drive / d.gap().length();
            Ok(if k_off == 0.0 { 0.0 } else { (k_on / k_off).abs() })
        })
        .collect::<Result<Vec<f64>, DesignError>>()?;
    let mean = alphas.iter().sum::<f64>() / samples as f64;
    alphas.sort_by(f64::total_cmp);
    let rank = |q: f64| alphas[((q * samples as f64).ceil() as usize).clamp(1, samples) - 1];
    Ok(MonteCarloSummary {
        samples,
        seed,
        mean,
        p50: rank(0.5),
        p95: rank(0.95),
        max: alphas[samples - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn table1() -> Device {
        presets::table1_device_with_leakage(presets::mumetal_class())
    }

    fn with_sol_ratio(d: Device, k: usize, f: f64) -> Device {
        d.map_shunt(k, |s| {
            let (a, l) = (s.solenoid_area(), s.solenoid_length());
            s.with_solenoid(a * f, l)
        })
        .unwrap()
    }

    #[test]
    fn matched_shunts_have_zero_alpha() {
        let r = alpha_mismatch(&table1()).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert_eq!(r.kappa_on, 0.0);
        assert_eq!(r.offset, Some(0.0));
    }

    #[test]
    fn closed_form_and_numeric_agree() {
        let r = alpha_mismatch(&with_sol_ratio(table1(), 1, 1.1)).unwrap();
        assert!(r.alpha_discrepancy() < 0.05, "{r:?}");
        assert_eq!(r.alpha, (r.kappa_on / r.kappa_off).abs());
    }

    #[test]
    fn three_shunts_rejected() {
        let d = table1();
        let mut shunts = d.shunts().to_vec();
        shunts.push(shunts[0].clone());
        let d3 = d.with_shunts(shunts).unwrap();
        assert_eq!(alpha_mismatch(&d3), Err(DesignError::NotTwoShunts(3)));
    }

    #[test]
    fn core_limit() {
        let d = presets::table1_device(presets::mumetal_class());
        let core = PrimaryCoreModel::new(5.5e-3, 2.5e-6, 1e4).unwrap();
        let a = alpha_core(&d, &core).unwrap();
        assert!(a > 4e-6 && a < 16e-6, "{a}");
        let stiff = PrimaryCoreModel::new(5.5e-3, 2.5e-6, 1e12).unwrap();
        assert!(alpha_core(&d, &stiff).unwrap() < 1e-12);
    }

    #[test]
    fn offset_of_wider_shunt() {
        let d = table1()
            .map_shunt(1, |s| {
                let a = s.area();
                s.with_area(1.1 * a)
            })
            .unwrap();
        let a1 = d.shunts()[0].area();
        let b = d.shunts()[0].material().b_sat().unwrap();
        let got = output_offset(&d).unwrap();
        assert!((got - 0.1 * a1 * b).abs() <= 1e-12 * a1 * b);
    }

    #[test]
    fn zero_tolerance_gives_zero_alpha() {
        let spec = ToleranceSpec {
            entries: vec![Tolerance {
                shunt: 0,
                field: ShuntField::SolenoidArea,
                distribution: Distribution::Normal { rel_sd: 0.0 },
            }],
        };
        let s = monte_carlo_alpha(&table1(), &spec, 50, 3).unwrap();
        assert_eq!(s.max, 0.0);
    }

    #[test]
    fn bad_specs_rejected() {
        let d = table1();
        let bad = |t| ToleranceSpec { entries: vec![t] };
        let out_of_range = Tolerance {
            shunt: 5,
            field: ShuntField::Area,
            distribution: Distribution::Uniform { rel_half_width: 0.1 },
        };
        assert!(monte_carlo_alpha(&d, &bad(out_of_range), 10, 1).is_err());
        let wide = Tolerance {
            shunt: 0,
            field: ShuntField::Area,
            distribution: Distribution::Uniform { rel_half_width: 1.5 },
        };
        assert!(monte_carlo_alpha(&d, &bad(wide), 10, 1).is_err());
        assert!(monte_carlo_alpha(&d, &ToleranceSpec::default(), 0, 1).is_err());
    }
}
