//! Reference device and material presets.
//!
//! The example device is a permanent-magnet switch with two cylindrical
//! shunts (r = 1 mm, ℓ = 4 mm, 30 turns), a cylindrical magnet
//! (r = 1 mm, ℓ = 4 mm, B_r = 1 T, μ_r = 1.05) and a 4 mm², 0.2 mm air-gap.
//!
//! The three shunt material classes are synthetic BH tables calibrated so
//! that the differential permeability reaches `MU_0` at the full-saturation
//! fields 400 A/m (MuMetal-class), 4e4 A/m (NS-4750-class) and 3e5 A/m
//! (V-Permendur-class). Each curve is a steep initial magnetisation plus a
//! slower approach to saturation that closes at `H_sat`, sampled onto knots
//! that tighten toward `H_sat` and end with a flat-polarisation row at
//! 1e6 A/m.

use std::sync::Arc;

use crate::circuit::{AirGap, Device, Magnet, Orientation, Shunt};
use crate::materials::{BhTable, MaterialModel, DEFAULT_SATURATION_EPS};
use crate::MU_0;

/// Leakage reluctance fitted to the 3D model of the example device (1/H).
pub const TABLE1_LEAKAGE_RELUCTANCE: f64 = 15.9e6;

pub const SHUNT_RADIUS: f64 = 1e-3;
pub const SHUNT_LENGTH: f64 = 4e-3;
pub const SHUNT_TURNS: u32 = 30;
pub const MAGNET_RADIUS: f64 = 1e-3;
pub const MAGNET_LENGTH: f64 = 4e-3;
pub const MAGNET_REMANENCE: f64 = 1.0;
pub const MAGNET_RECOIL: f64 = 1.05;
pub const GAP_AREA: f64 = 4e-6;
pub const GAP_LENGTH: f64 = 0.2e-3;

/// Shape parameters of a synthetic saturating curve.
#[derive(Debug, Clone, Copy)]
struct CurveShape {
    /// Polarisation carried by the steep initial part (T).
    core_j: f64,
    /// Field scale of the steep part (A/m).
    core_h: f64,
    /// Polarisation added by the approach to saturation (T).
    tail_j: f64,
    /// Field where the curve reaches slope `MU_0` (A/m).
    h_sat: f64,
}

impl CurveShape {
    fn polarization(&self, h: f64) -> f64 {
        let u = (h / self.h_sat).min(1.0);
        self.core_j * (h / self.core_h).tanh() + self.tail_j * (1.0 - (1.0 - u).powf(1.5))
    }

    fn table(&self) -> BhTable {
        let mut hs = vec![0.0];
        let first = self.core_h / 8.0;
        let last = 0.5 * self.h_sat;
        let steps = 16;
        let ratio = (last / first).powf(1.0 / (steps - 1) as f64);
        hs.extend((0..steps).map(|i| first * ratio.powi(i)));
        hs.extend(
            [0.6, 0.7, 0.8, 0.9, 0.95, 0.98, 0.99, 0.995, 1.0]
                .iter()
                .map(|u| u * self.h_sat),
        );
        hs.push(1e6);
        let points = hs.into_iter().map(|h| (h, MU_0 * h + self.polarization(h))).collect();
        BhTable::new(points).expect("preset curve is valid")
    }
}

const MUMETAL: CurveShape = CurveShape {
    core_j: 0.70,
    core_h: 15.0,
    tail_j: 0.05,
    h_sat: 400.0,
};

const NS4750: CurveShape = CurveShape {
    core_j: 1.25,
    core_h: 80.0,
    tail_j: 0.25,
    h_sat: 4e4,
};

const VPERMENDUR: CurveShape = CurveShape {
    core_j: 1.60,
    core_h: 150.0,
    tail_j: 0.70,
    h_sat: 3e5,
};

/// MuMetal-class table material (B_sat 0.75 T, H_sat 400 A/m).
pub fn mumetal_class() -> MaterialModel {
    MaterialModel::from_table("mumetal", MUMETAL.table()).expect("preset")
}

/// NS-4750-class table material (B_sat 1.5 T, H_sat 4e4 A/m).
pub fn ns4750_class() -> MaterialModel {
    MaterialModel::from_table("ns4750", NS4750.table()).expect("preset")
}

/// V-Permendur-class table material (B_sat 2.3 T, H_sat 3e5 A/m).
pub fn vpermendur_class() -> MaterialModel {
    MaterialModel::from_table("vpermendur", VPERMENDUR.table()).expect("preset")
}

/// Tanh material calibrated to the MuMetal-class anchors (0.75 T, 400 A/m).
pub fn mumetal_tanh() -> MaterialModel {
    MaterialModel::saturating_calibrated("mumetal_tanh", 400.0, 0.75, DEFAULT_SATURATION_EPS).expect("preset")
}

/// All three table classes with their nominal full-saturation fields.
pub fn material_classes() -> Vec<(MaterialModel, f64)> {
    vec![
        (mumetal_class(), MUMETAL.h_sat),
        (ns4750_class(), NS4750.h_sat),
        (vpermendur_class(), VPERMENDUR.h_sat),
    ]
}

/// The example device without leakage, with both shunts made of `material`.
pub fn table1_device(material: MaterialModel) -> Device {
    let material = Arc::new(material);
    let shunts = (1..=2)
        .map(|k| {
            Shunt::cylindrical(
                SHUNT_LENGTH,
                SHUNT_RADIUS,
                SHUNT_TURNS,
                Orientation::alternating(k),
                material.clone(),
            )
            .expect("preset shunt")
        })
        .collect();
    Device::new(
        Magnet::cylindrical(MAGNET_LENGTH, MAGNET_RADIUS, MAGNET_REMANENCE, MAGNET_RECOIL).expect("preset magnet"),
        AirGap::new(GAP_LENGTH, GAP_AREA).expect("preset gap"),
        None,
        shunts,
    )
    .expect("preset device")
}

/// The example device with its fitted leakage path.
pub fn table1_device_with_leakage(material: MaterialModel) -> Device {
    table1_device(material)
        .with_leakage(Some(TABLE1_LEAKAGE_RELUCTANCE))
        .expect("preset leakage")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_saturate_at_their_anchor() {
        for (m, h) in material_classes() {
            let got = m.saturation_field().unwrap();
            assert!((got - h).abs() <= 0.01 * h, "{}: {got} vs {h}", m.name());
            assert!(m.mu_diff(h * 1.0001) <= MU_0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn class_permeability_never_below_mu0() {
        for (m, h) in material_classes() {
            for i in 0..=20_000 {
                let hq = 2.0 * h * i as f64 / 20_000.0;
                assert!(m.mu_diff(hq) >= MU_0 * (1.0 - 1e-9), "{} at {hq}", m.name());
            }
        }
    }

    #[test]
    fn tanh_preset_anchor() {
        let m = mumetal_tanh();
        assert!((m.saturation_field().unwrap() - 400.0).abs() < 1e-3);
        assert_eq!(m.b_sat(), Some(0.75));
    }
}
