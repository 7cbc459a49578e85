#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sers::circuit::{AirGap, Device, Magnet, Orientation, Shunt};
use sers::materials::MaterialModel;
use sers::presets;

/// Material pool shared by the random generators.
pub struct Pool {
    pub materials: Vec<Arc<MaterialModel>>,
}

impl Pool {
    pub fn new() -> Self {
        let mut materials: Vec<Arc<MaterialModel>> = presets::material_classes()
            .into_iter()
            .map(|(m, _)| Arc::new(m))
            .collect();
        materials.push(Arc::new(presets::mumetal_tanh()));
        materials.push(Arc::new(
            MaterialModel::saturating("soft", 2e4 * sers::MU_0, 1.2).unwrap(),
        ));
        materials.push(Arc::new(MaterialModel::linear("linear", 5e4).unwrap()));
        materials.push(Arc::new(MaterialModel::linear("weak", 20.0).unwrap()));
        Self { materials }
    }

    pub fn pick(&self, rng: &mut ChaCha8Rng) -> Arc<MaterialModel> {
        self.materials[rng.random_range(0..self.materials.len())].clone()
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

pub fn random_magnet(rng: &mut ChaCha8Rng) -> Magnet {
    Magnet::cylindrical(
        rng.random_range(1e-3..1e-2),
        rng.random_range(0.3e-3..3e-3),
        rng.random_range(0.2..1.45),
        rng.random_range(1.0..1.3),
    )
    .unwrap()
}

pub fn random_gap(rng: &mut ChaCha8Rng) -> AirGap {
    AirGap::new(log_uniform(rng, 2e-5, 2e-3), log_uniform(rng, 5e-7, 5e-5)).unwrap()
}

fn random_leakage(rng: &mut ChaCha8Rng, gap: &AirGap) -> Option<f64> {
    if rng.random_bool(0.5) {
        Some(gap.reluctance() * log_uniform(rng, 0.5, 50.0))
    } else {
        None
    }
}

fn random_shunt(rng: &mut ChaCha8Rng, k: usize, material: Arc<MaterialModel>) -> Shunt {
    let orientation = if rng.random_bool(0.8) {
        Orientation::alternating(k)
    } else {
        Orientation::alternating(k + 1)
    };
    Shunt::cylindrical(
        rng.random_range(1e-3..1e-2),
        rng.random_range(0.2e-3..3e-3),
        rng.random_range(0..300),
        orientation,
        material,
    )
    .unwrap()
}

/// Arbitrary device with 2 to 4 unrelated shunts.
pub fn random_device(rng: &mut ChaCha8Rng, pool: &Pool) -> Device {
    let gap = random_gap(rng);
    let leak = random_leakage(rng, &gap);
    let n = rng.random_range(2..=4);
    let shunts = (1..=n)
        .map(|k| {
            let m = pool.pick(rng);
            random_shunt(rng, k, m)
        })
        .collect();
    Device::new(random_magnet(rng), gap, leak, shunts).unwrap()
}

/// Two identical shunts wound in opposite senses, with at least one turn.
pub fn random_symmetric_device(rng: &mut ChaCha8Rng, pool: &Pool) -> Device {
    let gap = random_gap(rng);
    let leak = random_leakage(rng, &gap);
    let m = pool.pick(rng);
    let turns = rng.random_range(1..300);
    let one = random_shunt(rng, 1, m)
        .with_turns(turns)
        .with_orientation(Orientation::Negative);
    let two = one.clone().with_orientation(Orientation::Positive);
    Device::new(random_magnet(rng), gap, leak, vec![one, two]).unwrap()
}

/// Drive current spanning OFF, ramp and deep saturation for `device`.
pub fn random_current(rng: &mut ChaCha8Rng, device: &Device) -> f64 {
    let n = device.max_turns().max(1) as f64;
    let scale = 2.0 * device.magnet_mmf() / n;
    let mag = log_uniform(rng, 1e-4 * scale, 50.0 * scale);
    match rng.random_range(0..10) {
        0 => 0.0,
        1..=4 => -mag,
        _ => mag,
    }
}
