//! Solenoid wire geometry, Joule losses and the current-carrying-wire
//! baseline.

use std::f64::consts::PI;

use thiserror::Error;

use crate::circuit::{Device, Shunt};

/// Copper at room temperature (Ω·m).
pub const COPPER_RESISTIVITY: f64 = 1.725e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("{field} must be {requirement}, got {value}")]
    Invalid {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("shunt has no radius; the helical wire length needs a cylindrical core")]
    NotCylindrical,
    #[error("wire a + 2c = {needed:e} m exceeds the winding pitch {pitch:e} m by {excess:e} m")]
    Pitch { needed: f64, pitch: f64, excess: f64 },
    #[error("solenoid count must be at least 1")]
    Count,
}

/// Rectangular edgewise-wound conductor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireSpec {
    /// Axial conductor thickness (m).
    pub a: f64,
    /// Radial conductor width (m).
    pub b: f64,
    /// Insulation thickness (m).
    pub c: f64,
    /// Resistivity (Ω·m).
    pub rho: f64,
}

fn check(field: &'static str, value: f64, allow_zero: bool) -> Result<f64, PowerError> {
    let ok = value.is_finite() && (value > 0.0 || (allow_zero && value == 0.0));
    if ok {
        Ok(value)
    } else {
        Err(PowerError::Invalid {
            field,
            requirement: if allow_zero {
                "finite and >= 0"
            } else {
                "finite and > 0"
            },
            value,
        })
    }
}

impl WireSpec {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, PowerError> {
        Ok(Self {
            a: check("a", a, false)?,
            b: check("b", b, false)?,
            c: check("c", c, true)?,
            rho: COPPER_RESISTIVITY,
        })
    }

    pub fn with_resistivity(mut self, rho: f64) -> Result<Self, PowerError> {
        self.rho = check("rho", rho, false)?;
        Ok(self)
    }

    /// Wire filling one tight layer on `shunt`: `a = ℓ_s / N - 2c`.
    pub fn single_layer_fill(shunt: &Shunt, b: f64, c: f64) -> Result<Self, PowerError> {
        let pitch = shunt.length() / shunt.turns() as f64;
        Self::new(pitch - 2.0 * c, b, c)
    }

    /// Conductor thickness `a` for which `count` solenoids on `shunt` dissipate
    /// `power` at `current`, with `b`, `c` and `rho` held fixed.
    pub fn back_solve(
        shunt: &Shunt,
        b: f64,
        c: f64,
        rho: f64,
        current: f64,
        count: usize,
        power: f64,
    ) -> Result<Self, PowerError> {
        if count == 0 {
            return Err(PowerError::Count);
        }
        check("current", current.abs(), false)?;
        check("power", power, false)?;
        let probe = Self::new(f64::MIN_POSITIVE, b, c)?.with_resistivity(rho)?;
        let length = wire_length(shunt, &probe)?;
        let resistance = power / (count as f64 * current * current);
        let wire = Self::new(rho * length / (resistance * b), b, c)?.with_resistivity(rho)?;
        wire_length(shunt, &wire)?;
        Ok(wire)
    }

    /// Conductor cross-section `a b` (m²).
    pub fn conductor_area(&self) -> f64 {
        self.a * self.b
    }
}

/// Helical wire length `N sqrt(4π² (r_s + b/2 + c)² + (ℓ_s/N)²)`.
pub fn wire_length(shunt: &Shunt, wire: &WireSpec) -> Result<f64, PowerError> {
    let r = shunt.radius().ok_or(PowerError::NotCylindrical)?;
    let n = shunt.turns() as f64;
    if n == 0.0 {
        return Ok(0.0);
    }
    let pitch = shunt.length() / n;
    let needed = wire.a + 2.0 * wire.c;
    if needed > pitch * (1.0 + 1e-12) {
        return Err(PowerError::Pitch {
            needed,
            pitch,
            excess: needed - pitch,
        });
    }
    let loop_r = r + 0.5 * wire.b + wire.c;
    Ok(n * (4.0 * PI * PI * loop_r * loop_r + pitch * pitch).sqrt())
}

/// DC resistance `ρ L_w / A_w` of one solenoid.
pub fn solenoid_resistance(shunt: &Shunt, wire: &WireSpec) -> Result<f64, PowerError> {
    Ok(wire.rho * wire_length(shunt, wire)? / wire.conductor_area())
}

/// Joule loss `count ρ L_w I² / A_w` of `count` solenoids at current `current`.
///
/// `L_w` is averaged over the device's shunts, which is exact when they
/// share one geometry.
pub fn joule_power(device: &Device, wire: &WireSpec, current: f64, count: usize) -> Result<f64, PowerError> {
    if count == 0 {
        return Err(PowerError::Count);
    }
    let shunts = device.shunts();
    let mut total = 0.0;
    for s in shunts {
        total += wire_length(s, wire)?;
    }
    let length = total / shunts.len() as f64;
    Ok(count as f64 * wire.rho * length * current * current / wire.conductor_area())
}

/// Current-carrying-wire gradient source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcwReference {
    /// Gradient per unit current (T/m/A).
    pub kappa_grad: f64,
    /// Circuit resistance (Ω).
    pub resistance: f64,
}

impl CcwReference {
    pub fn new(kappa_grad: f64, resistance: f64) -> Result<Self, PowerError> {
        Ok(Self {
            kappa_grad: check("kappa_grad", kappa_grad, false)?,
            resistance: check("resistance", resistance, false)?,
        })
    }
}

/// Drive needed by a current-carrying-wire source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcwDrive {
    pub current: f64,
    pub power: f64,
}

/// Current `gradient / κ_grad` and dissipation `I² R` to reach `gradient`.
pub fn ccw_equivalent(reference: &CcwReference, gradient: f64) -> CcwDrive {
    let current = gradient / reference.kappa_grad;
    CcwDrive {
        current,
        power: current * current * reference.resistance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn shunt() -> Shunt {
        presets::table1_device(presets::mumetal_class()).shunts()[0].clone()
    }

    #[test]
    fn single_turn_helix() {
        let s = shunt().with_turns(1);
        let w = WireSpec {
            a: 1e-4,
            b: 0.0,
            c: 0.0,
            rho: COPPER_RESISTIVITY,
        };
        let want = (4.0 * PI * PI * 1e-6 + 16e-6_f64).sqrt();
        assert!((wire_length(&s, &w).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn table1_length_is_nearly_loops() {
        let s = shunt();
        let w = WireSpec::single_layer_fill(&s, 0.5e-3, 0.015e-3).unwrap();
        let l = wire_length(&s, &w).unwrap();
        let loops = 30.0 * 2.0 * PI * (1e-3 + 0.25e-3 + 0.015e-3);
        assert!((l - loops).abs() <= 1e-3 * loops);
        assert!(l > 30.0 * 2.0 * PI * 1e-3);
    }

    #[test]
    fn pitch_violation_reports_excess() {
        let s = shunt();
        let w = WireSpec::new(0.2e-3, 0.5e-3, 0.0).unwrap();
        match wire_length(&s, &w) {
            Err(PowerError::Pitch { excess, .. }) => assert!((excess - (0.2e-3 - 4e-3 / 30.0)).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_scaling() {
        let d = presets::table1_device(presets::mumetal_class());
        let w = WireSpec::single_layer_fill(&d.shunts()[0], 0.5e-3, 0.015e-3).unwrap();
        assert_eq!(joule_power(&d, &w, 0.0, 4).unwrap(), 0.0);
        let p1 = joule_power(&d, &w, 1.3, 4).unwrap();
        let p2 = joule_power(&d, &w, 2.6, 4).unwrap();
        assert!((p2 - 4.0 * p1).abs() <= 1e-12 * p2);
        assert_eq!(joule_power(&d, &w, 1.0, 0), Err(PowerError::Count));
    }

    #[test]
    fn back_solve_reproduces_power() {
        let d = presets::table1_device(presets::mumetal_class());
        let w = WireSpec::back_solve(&d.shunts()[0], 0.5e-3, 0.015e-3, COPPER_RESISTIVITY, 2.5, 4, 2.05).unwrap();
        assert!((w.a - 1.003e-4).abs() < 1e-6);
        let p = joule_power(&d, &w, 2.5, 4).unwrap();
        assert!((p - 2.05).abs() < 1e-12);
    }

    #[test]
    fn ccw_values() {
        let r = CcwReference::new(11.1, 0.438).unwrap();
        let d = ccw_equivalent(&r, 70.5);
        assert!((d.current - 6.351).abs() < 1e-3);
        assert!((d.power - 17.9).abs() <= 0.03 * 17.9);
        assert_eq!(
            ccw_equivalent(&r, 0.0),
            CcwDrive {
                current: 0.0,
                power: 0.0
            }
        );
        let d2 = ccw_equivalent(&r, 141.0);
        assert!((d2.power - 4.0 * d.power).abs() < 1e-12 * d2.power);
    }
}
