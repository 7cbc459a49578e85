//! Lumped two-pole magnetic circuit of a reluctance switch.
//!
//! A permanent magnet, an air-gap, an optional leakage path and `n >= 2`
//! solenoid-wound shunts are connected in parallel across the two poles of an
//! ideal (zero-reluctance) primary core, so all elements share one node mmf
//! `F_g`. Fluxes are signed with "up" positive:
//!
//! ```text
//! Φ_m    = (F_m - F_g) / R_m
//! Φ_g    = -F_g / R_g
//! Φ_leak = -F_g / R_leak
//! Φ_n    = B(H_n) A_n,     H_n = (η_n N_n I - F_g) / ℓ_n
//! ```
//!
//! With this convention the solved `F_g` is positive for a magnet with
//! positive remanence; the reported gap flux density is `MU_0 |F_g| / ℓ_g`.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::materials::MaterialModel;
use crate::MU_0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("{element}: {field} must be {requirement}, got {value}")]
    Invalid {
        element: String,
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("a device needs at least 2 shunts, got {0}")]
    TooFewShunts(usize),
    #[error("shunts differ in geometry; use the generalized parallel reluctance instead")]
    MismatchedShunts,
}

fn positive(element: &str, field: &'static str, value: f64) -> Result<f64, DeviceError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(DeviceError::Invalid {
            element: element.to_string(),
            field,
            requirement: "finite and > 0",
            value,
        })
    }
}

/// Permanent magnet with linear recoil.
#[derive(Debug, Clone, PartialEq)]
pub struct Magnet {
    length: f64,
    area: f64,
    radius: Option<f64>,
    remanence: f64,
    recoil_mu_r: f64,
}

impl Magnet {
    pub fn new(length: f64, area: f64, remanence: f64, recoil_mu_r: f64) -> Result<Self, DeviceError> {
        positive("magnet", "length", length)?;
        positive("magnet", "area", area)?;
        if !(remanence.is_finite() && remanence >= 0.0) {
            return Err(DeviceError::Invalid {
                element: "magnet".into(),
                field: "remanence",
                requirement: "finite and >= 0",
                value: remanence,
            });
        }
        if !(recoil_mu_r.is_finite() && recoil_mu_r >= 1.0) {
            return Err(DeviceError::Invalid {
                element: "magnet".into(),
                field: "recoil_mu_r",
                requirement: "finite and >= 1",
                value: recoil_mu_r,
            });
        }
        Ok(Self {
            length,
            area,
            radius: None,
            remanence,
            recoil_mu_r,
        })
    }

    /// Cylindrical magnet of radius `radius` (area `π r²`).
    pub fn cylindrical(length: f64, radius: f64, remanence: f64, recoil_mu_r: f64) -> Result<Self, DeviceError> {
        positive("magnet", "radius", radius)?;
        let mut m = Self::new(length, PI * radius * radius, remanence, recoil_mu_r)?;
        m.radius = Some(radius);
        Ok(m)
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn area(&self) -> f64 {
        self.area
    }
    pub fn radius(&self) -> Option<f64> {
        self.radius
    }
    pub fn remanence(&self) -> f64 {
        self.remanence
    }
    pub fn recoil_mu_r(&self) -> f64 {
        self.recoil_mu_r
    }

    /// Source mmf `F_m = ℓ_m B_r / (μ_r μ0)`, in ampere-turns.
    pub fn mmf(&self) -> f64 {
        self.length * self.remanence / (self.recoil_mu_r * MU_0)
    }

    /// Internal reluctance `R_m = ℓ_m / (μ_r μ0 A_m)`.
    pub fn reluctance(&self) -> f64 {
        self.length / (self.recoil_mu_r * MU_0 * self.area)
    }
}

/// The output air-gap.
#[derive(Debug, Clone, PartialEq)]
pub struct AirGap {
    length: f64,
    area: f64,
}

impl AirGap {
    pub fn new(length: f64, area: f64) -> Result<Self, DeviceError> {
        positive("airgap", "length", length)?;
        positive("airgap", "area", area)?;
        Ok(Self { length, area })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn area(&self) -> f64 {
        self.area
    }

    /// `R_g = ℓ_g / (μ0 A_g)`.
    pub fn reluctance(&self) -> f64 {
        self.length / (MU_0 * self.area)
    }
}

/// Winding sense of a shunt solenoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Negative,
    Positive,
}

impl Orientation {
    /// Alternating default `(-1)^k` for the 1-based shunt index `k`.
    pub fn alternating(k: usize) -> Self {
        if k.is_multiple_of(2) {
            Orientation::Positive
        } else {
            Orientation::Negative
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Orientation::Negative => -1.0,
            Orientation::Positive => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Negative => Orientation::Positive,
            Orientation::Positive => Orientation::Negative,
        }
    }

    pub fn from_sign(sign: i32) -> Option<Self> {
        match sign {
            -1 => Some(Orientation::Negative),
            1 => Some(Orientation::Positive),
            _ => None,
        }
    }
}

/// A solenoid-wound shunt core.
#[derive(Debug, Clone, PartialEq)]
pub struct Shunt {
    length: f64,
    area: f64,
    radius: Option<f64>,
    turns: u32,
    orientation: Orientation,
    material: Arc<MaterialModel>,
    solenoid_area: f64,
    solenoid_length: f64,
}

impl Shunt {
    /// Shunt whose solenoid area and length default to the core's.
    pub fn new(
        length: f64,
        area: f64,
        turns: u32,
        orientation: Orientation,
        material: Arc<MaterialModel>,
    ) -> Result<Self, DeviceError> {
        positive("shunt", "length", length)?;
        positive("shunt", "area", area)?;
        Ok(Self {
            length,
            area,
            radius: None,
            turns,
            orientation,
            material,
            solenoid_area: area,
            solenoid_length: length,
        })
    }

    pub fn cylindrical(
        length: f64,
        radius: f64,
        turns: u32,
        orientation: Orientation,
        material: Arc<MaterialModel>,
    ) -> Result<Self, DeviceError> {
        positive("shunt", "radius", radius)?;
        let mut s = Self::new(length, PI * radius * radius, turns, orientation, material)?;
        s.radius = Some(radius);
        Ok(s)
    }

    pub fn with_solenoid(mut self, area: f64, length: f64) -> Result<Self, DeviceError> {
        self.solenoid_area = positive("shunt", "solenoid_area", area)?;
        self.solenoid_length = positive("shunt", "solenoid_length", length)?;
        Ok(self)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn with_turns(mut self, turns: u32) -> Self {
        self.turns = turns;
        self
    }

    pub fn with_material(mut self, material: Arc<MaterialModel>) -> Self {
        self.material = material;
        self
    }

    /// Rescale the core length, keeping the solenoid length matched when it
    /// was matched before.
    pub fn with_length(mut self, length: f64) -> Result<Self, DeviceError> {
        positive("shunt", "length", length)?;
        if self.solenoid_length == self.length {
            self.solenoid_length = length;
        }
        self.length = length;
        Ok(self)
    }

    /// Rescale the core area. A solenoid area tied to the core area follows
    /// it; an explicit radius is dropped unless consistent.
    pub fn with_area(mut self, area: f64) -> Result<Self, DeviceError> {
        positive("shunt", "area", area)?;
        if self.solenoid_area == self.area {
            self.solenoid_area = area;
        }
        self.area = area;
        self.radius = None;
        Ok(self)
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn area(&self) -> f64 {
        self.area
    }
    pub fn radius(&self) -> Option<f64> {
        self.radius
    }
    pub fn turns(&self) -> u32 {
        self.turns
    }
    pub fn orientation(&self) -> Orientation {
        self.orientation
    }
    pub fn material(&self) -> &Arc<MaterialModel> {
        &self.material
    }
    pub fn solenoid_area(&self) -> f64 {
        self.solenoid_area
    }
    pub fn solenoid_length(&self) -> f64 {
        self.solenoid_length
    }

    /// Signed solenoid mmf `η N I`.
    pub fn drive_mmf(&self, current: f64) -> f64 {
        self.orientation.sign() * self.turns as f64 * current
    }

    /// Core field from Ampère's law: `H = (η N I - F_g) / ℓ_s`.
    pub fn field(&self, current: f64, gap_mmf: f64) -> f64 {
        (self.drive_mmf(current) - gap_mmf) / self.length
    }

    /// Core flux `B(H) A_s` at the given drive.
    pub fn flux(&self, current: f64, gap_mmf: f64) -> f64 {
        self.material.b_of_h(self.field(current, gap_mmf)) * self.area
    }

    /// Core reluctance at vacuum permeability, `ℓ_s / (μ0 A_s)`.
    pub fn saturated_reluctance(&self) -> f64 {
        self.length / (MU_0 * self.area)
    }
}

/// Per-element fluxes at one `(I, F_g)` state.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementFluxes {
    pub magnet: f64,
    pub gap: f64,
    pub leakage: f64,
    pub shunts: Vec<f64>,
}

impl ElementFluxes {
    /// Net flux leaving the node (zero at a solution).
    pub fn net(&self) -> f64 {
        self.shunts.iter().sum::<f64>() + self.magnet + self.leakage + self.gap
    }
}

/// A complete switch: magnet, gap, optional leakage, and the shunt section.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    magnet: Magnet,
    gap: AirGap,
    leakage_reluctance: Option<f64>,
    shunts: Vec<Shunt>,
}

impl Device {
    pub fn new(
        magnet: Magnet,
        gap: AirGap,
        leakage_reluctance: Option<f64>,
        shunts: Vec<Shunt>,
    ) -> Result<Self, DeviceError> {
        if shunts.len() < 2 {
            return Err(DeviceError::TooFewShunts(shunts.len()));
        }
        if let Some(r) = leakage_reluctance {
            positive("leakage", "reluctance", r)?;
        }
        Ok(Self {
            magnet,
            gap,
            leakage_reluctance,
            shunts,
        })
    }

    pub fn magnet(&self) -> &Magnet {
        &self.magnet
    }
    pub fn gap(&self) -> &AirGap {
        &self.gap
    }
    pub fn leakage_reluctance(&self) -> Option<f64> {
        self.leakage_reluctance
    }
    pub fn shunts(&self) -> &[Shunt] {
        &self.shunts
    }

    pub fn with_leakage(mut self, reluctance: Option<f64>) -> Result<Self, DeviceError> {
        if let Some(r) = reluctance {
            positive("leakage", "reluctance", r)?;
        }
        self.leakage_reluctance = reluctance;
        Ok(self)
    }

    pub fn with_magnet(mut self, magnet: Magnet) -> Self {
        self.magnet = magnet;
        self
    }

    pub fn with_gap(mut self, gap: AirGap) -> Self {
        self.gap = gap;
        self
    }

    pub fn with_shunts(mut self, shunts: Vec<Shunt>) -> Result<Self, DeviceError> {
        if shunts.len() < 2 {
            return Err(DeviceError::TooFewShunts(shunts.len()));
        }
        self.shunts = shunts;
        Ok(self)
    }

    /// Replace shunt `index` (0-based) through a mapping closure.
    pub fn map_shunt<F>(mut self, index: usize, f: F) -> Result<Self, DeviceError>
    where
        F: FnOnce(Shunt) -> Result<Shunt, DeviceError>,
    {
        let s = self.shunts[index].clone();
        self.shunts[index] = f(s)?;
        Ok(self)
    }

    /// Every shunt switched to `material`.
    pub fn with_material(mut self, material: Arc<MaterialModel>) -> Self {
        for s in &mut self.shunts {
            s.material = material.clone();
        }
        self
    }

    pub fn magnet_mmf(&self) -> f64 {
        self.magnet.mmf()
    }

    pub fn magnet_reluctance(&self) -> f64 {
        self.magnet.reluctance()
    }

    pub fn gap_reluctance(&self) -> f64 {
        self.gap.reluctance()
    }

    /// `1 / R_leak`, zero when leakage is absent.
    pub fn leakage_permeance(&self) -> f64 {
        self.leakage_reluctance.map_or(0.0, |r| 1.0 / r)
    }

    /// Governing flux balance at drive current `current` and node mmf
    /// `gap_mmf`:
    /// `Σ B(H_n) A_n + (F_m - F_g)/R_m - F_g/R_leak - F_g/R_g`.
    ///
    /// Strictly decreasing in `gap_mmf`.
    pub fn residual(&self, current: f64, gap_mmf: f64) -> f64 {
        self.fluxes(current, gap_mmf).net()
    }

    /// Derivative of [`Device::residual`] with respect to `gap_mmf`
    /// (always negative).
    pub fn residual_slope(&self, current: f64, gap_mmf: f64) -> f64 {
        let shunt: f64 = self
            .shunts
            .iter()
            .map(|s| s.material.mu_diff(s.field(current, gap_mmf)) * s.area / s.length)
            .sum();
        -(shunt + 1.0 / self.magnet_reluctance() + self.leakage_permeance() + 1.0 / self.gap_reluctance())
    }

    /// Derivative of [`Device::residual`] with respect to the drive current.
    pub fn residual_current_derivative(&self, current: f64, gap_mmf: f64) -> f64 {
        self.shunts
            .iter()
            .map(|s| {
                s.material.mu_diff(s.field(current, gap_mmf)) * s.area * s.orientation.sign() * s.turns as f64
                    / s.length
            })
            .sum()
    }

    pub fn fluxes(&self, current: f64, gap_mmf: f64) -> ElementFluxes {
        let shunts = self.shunts.iter().map(|s| s.flux(current, gap_mmf)).collect();
        ElementFluxes {
            magnet: (self.magnet_mmf() - gap_mmf) / self.magnet_reluctance(),
            gap: -gap_mmf / self.gap_reluctance(),
            leakage: -gap_mmf * self.leakage_permeance(),
            shunts,
        }
    }

    /// `R_on` for a section of identical shunts, `ℓ_s / (n μ0 A_s)`.
    pub fn pair_reluctance_on(&self) -> Result<f64, DeviceError> {
        self.identical_geometry()?;
        let s = &self.shunts[0];
        Ok(s.length / (self.shunts.len() as f64 * MU_0 * s.area))
    }

    /// `R_off` for a section of identical shunts, `ℓ_s / (n μ_i A_s)`.
    pub fn pair_reluctance_off(&self, mu_i: f64) -> Result<f64, DeviceError> {
        self.identical_geometry()?;
        let s = &self.shunts[0];
        Ok(s.length / (self.shunts.len() as f64 * mu_i * s.area))
    }

    /// Saturated shunt-section reluctance for arbitrary shunts,
    /// `(Σ μ0 A_n / ℓ_n)^-1`.
    pub fn parallel_reluctance_on(&self) -> f64 {
        self.parallel_reluctance(MU_0)
    }

    /// Unsaturated shunt-section reluctance, `(Σ μ_i A_n / ℓ_n)^-1`.
    pub fn parallel_reluctance_off(&self, mu_i: f64) -> f64 {
        self.parallel_reluctance(mu_i)
    }

    fn parallel_reluctance(&self, mu: f64) -> f64 {
        1.0 / self.shunts.iter().map(|s| mu * s.area / s.length).sum::<f64>()
    }

    fn identical_geometry(&self) -> Result<(), DeviceError> {
        let first = &self.shunts[0];
        if self
            .shunts
            .iter()
            .all(|s| s.length == first.length && s.area == first.area)
        {
            Ok(())
        } else {
            Err(DeviceError::MismatchedShunts)
        }
    }

    /// True when the shunt section is a mirror-symmetric pair: identical
    /// geometry, turns and material with opposite orientations.
    pub fn is_symmetric_pair(&self) -> bool {
        if self.shunts.len() != 2 {
            return false;
        }
        let (a, b) = (&self.shunts[0], &self.shunts[1]);
        a.length == b.length
            && a.area == b.area
            && a.turns == b.turns
            && a.solenoid_area == b.solenoid_area
            && a.orientation != b.orientation
            && (Arc::ptr_eq(&a.material, &b.material) || a.material == b.material)
    }

    /// Largest turn count across the shunts.
    pub fn max_turns(&self) -> u32 {
        self.shunts.iter().map(|s| s.turns).max().unwrap_or(0)
    }

    /// The common turn count, if every shunt shares one.
    pub fn uniform_turns(&self) -> Option<u32> {
        let n = self.shunts[0].turns;
        self.shunts.iter().all(|s| s.turns == n).then_some(n)
    }
}
