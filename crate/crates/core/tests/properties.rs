mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sers::circuit::Device;
use sers::design::{
    alpha_mismatch, check_conditions, monte_carlo_alpha, ConditionOptions, Distribution, ShuntField, Tolerance,
    ToleranceSpec,
};
use sers::materials::{BhTable, MaterialModel};
use sers::power::{joule_power, solenoid_resistance, WireSpec};
use sers::presets;
use sers::solver::{solve_operating_point, SolveOptions};
use sers::MU_0;

fn table_material() -> impl Strategy<Value = MaterialModel> {
    prop::collection::vec((1e-2f64..5.0, 0.0f64..1.0), 2..12).prop_map(|steps| {
        let (mut h, mut j) = (0.0, 0.0);
        let mut pts = vec![(0.0, 0.0)];
        for (dh_log, dj) in steps {
            h += 10f64.powf(dh_log);
            j += dj;
            pts.push((h, MU_0 * h + j));
        }
        MaterialModel::from_table("t", BhTable::new(pts).unwrap()).unwrap()
    })
}

fn tanh_material() -> impl Strategy<Value = MaterialModel> {
    (1.5f64..6.0, 0.1f64..2.5)
        .prop_map(|(mu_log, js)| MaterialModel::saturating("s", 10f64.powf(mu_log) * MU_0, js).unwrap())
}

fn any_material() -> impl Strategy<Value = MaterialModel> {
    prop_oneof![
        table_material(),
        tanh_material(),
        (1.0f64..1e5).prop_map(|mu| MaterialModel::linear("l", mu).unwrap()),
    ]
}

fn device_from_seed(seed: u64) -> (Device, f64) {
    let pool = common::Pool::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = common::random_device(&mut rng, &pool);
    let i = common::random_current(&mut rng, &d);
    (d, i)
}

fn gap_mmf(d: &Device, i: f64) -> f64 {
    solve_operating_point(d, i, &SolveOptions::default()).unwrap().gap_mmf
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bh_curve_is_odd_and_non_decreasing(m in any_material(), h in 0.0f64..1e6, dh in 1e-3f64..1e4) {
        prop_assert_eq!(m.b_of_h(-h), -m.b_of_h(h));
        prop_assert!(m.b_of_h(h + dh) >= m.b_of_h(h));
        prop_assert!(m.b_of_h(-h - dh) <= m.b_of_h(-h));
    }

    #[test]
    fn differential_permeability_bounds(m in any_material(), h in -1e6f64..1e6) {
        let mu = m.mu_diff(h);
        prop_assert!(mu >= MU_0 * (1.0 - 1e-12), "mu' {mu:e} below mu0");
        prop_assert!(mu.is_finite());
        prop_assert_eq!(mu, m.mu_diff(-h));
    }

    #[test]
    fn differential_permeability_matches_difference_quotient(m in tanh_material(), h in 0.0f64..1e5) {
        let step = 1e-5 * (1.0 + h);
        let fd = (m.b_of_h(h + step) - m.b_of_h(h - step)) / (2.0 * step);
        let mu = m.mu_diff(h);
        prop_assert!((fd - mu).abs() <= 1e-4 * m.initial_permeability(), "fd {fd:e} vs {mu:e}");
    }

    #[test]
    fn table_derivative_matches_difference_quotient(m in table_material(), u in 0.01f64..0.99) {
        let sat = m.saturation_field().unwrap_or(1.0);
        let h = u * sat.max(1.0);
        let step = 1e-7 * (1.0 + h);
        let fd = (m.b_of_h(h + step) - m.b_of_h(h - step)) / (2.0 * step);
        let mu = m.mu_diff(h);
        prop_assert!((fd - mu).abs() <= 1e-3 * m.initial_permeability().max(mu), "fd {fd:e} vs {mu:e}");
    }

    #[test]
    fn residual_is_decreasing(seed in any::<u64>(), lo in -1e4f64..1e4, gap in 1e-6f64..1e3) {
        let (d, i) = device_from_seed(seed);
        prop_assert!(d.residual(i, lo + gap) < d.residual(i, lo));
        prop_assert!(d.residual_slope(i, lo) < 0.0);
    }

    #[test]
    fn solved_points_conserve_flux(seed in any::<u64>()) {
        let (d, i) = device_from_seed(seed);
        let p = solve_operating_point(&d, i, &SolveOptions::default()).unwrap();
        let ok = p.net_flux().abs() <= 1e-9 * p.magnet_flux.abs()
            || [p.gap_mmf.next_down(), p.gap_mmf.next_up()]
                .iter()
                .all(|&x| d.residual(i, x).abs() >= p.residual.abs());
        prop_assert!(ok, "net {:e} phi_m {:e}", p.net_flux(), p.magnet_flux);
    }

    #[test]
    fn flipping_every_winding_negates_the_drive(seed in any::<u64>()) {
        let (d, i) = device_from_seed(seed);
        let n = d.shunts().len();
        let mut flipped = d.clone();
        for k in 0..n {
            flipped = flipped.map_shunt(k, |s| { let o = s.orientation().flipped(); Ok(s.with_orientation(o)) }).unwrap();
        }
        let tol = 2.0 * SolveOptions::default().abs_tol_for(&d);
        prop_assert!(close(gap_mmf(&flipped, i), gap_mmf(&d, -i), tol));
    }

    #[test]
    fn only_ampere_turns_matter(seed in any::<u64>(), k in 2u32..5) {
        let (d, i) = device_from_seed(seed);
        let mut scaled = d.clone();
        for s in 0..d.shunts().len() {
            scaled = scaled.map_shunt(s, |sh| { let n = sh.turns(); Ok(sh.with_turns(n * k)) }).unwrap();
        }
        let tol = 4.0 * SolveOptions::default().abs_tol_for(&d);
        let a = gap_mmf(&d, i);
        let b = gap_mmf(&scaled, i / k as f64);
        prop_assert!(close(a, b, tol + 1e-12 * a.abs()), "{a} vs {b}");
    }

    #[test]
    fn linear_shunts_respond_affinely(
        mu in 2.0f64..1e5, seed in any::<u64>(), a in -50.0f64..50.0, b in -50.0f64..50.0,
    ) {
        let (d, _) = device_from_seed(seed);
        let d = d.with_material(Arc::new(MaterialModel::linear("l", mu).unwrap()));
        let f = |i: f64| gap_mmf(&d, i);
        let lhs = f(a) + f(b);
        let rhs = f(0.0) + f(a + b);
        let scale = f(a).abs() + f(b).abs() + f(0.0).abs() + f(a + b).abs();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * scale.max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn alpha_grows_with_mismatch(x1 in 1e-3f64..0.3, dx in 1e-3f64..0.3, leak in any::<bool>()) {
        let base = if leak {
            presets::table1_device_with_leakage(presets::mumetal_class())
        } else {
            presets::table1_device(presets::mumetal_class())
        };
        let at = |x: f64| {
            let d = base.clone().map_shunt(1, |s| {
                let (a, l) = (s.solenoid_area(), s.solenoid_length());
                s.with_solenoid(a * (1.0 + x), l)
            }).unwrap();
            alpha_mismatch(&d).unwrap().alpha
        };
        prop_assert!(at(x1 + dx) > at(x1));
        prop_assert!(at(0.0) < 1e-12);
    }

    #[test]
    fn mirrored_device_has_the_same_conditions(seed in any::<u64>(), i in 0.1f64..20.0) {
        let (d, _) = device_from_seed(seed);
        let mut reversed: Vec<_> = d.shunts().to_vec();
        reversed.reverse();
        let mirrored = d.clone().with_shunts(reversed).unwrap();
        let opts = ConditionOptions { drive_current: i, ..ConditionOptions::default() };
        let a = check_conditions(&d, &opts);
        let b = check_conditions(&mirrored, &opts);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.statuses(), b.statuses()),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn joule_power_is_count_i2_r(
        a_frac in 0.05f64..0.95, b in 1e-5f64..2e-3, c_frac in 0.0f64..0.5,
        i in -20.0f64..20.0, count in 1usize..8, turns in 1u32..200,
    ) {
        let d = presets::table1_device(presets::mumetal_class());
        let d = d.map_shunt(0, |s| Ok(s.with_turns(turns))).unwrap().map_shunt(1, |s| Ok(s.with_turns(turns))).unwrap();
        let pitch = d.shunts()[0].length() / turns as f64;
        let c = c_frac * pitch * (1.0 - a_frac);
        let w = WireSpec::new(a_frac * pitch, b, c).unwrap();
        let p = joule_power(&d, &w, i, count).unwrap();
        let want = count as f64 * i * i * solenoid_resistance(&d.shunts()[0], &w).unwrap();
        prop_assert!((p - want).abs() <= 1e-12 * want.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn monte_carlo_without_scatter_is_nominal(seed in any::<u64>(), x in 0.0f64..0.2) {
        let d = presets::table1_device(presets::mumetal_class()).map_shunt(1, |s| {
            let (a, l) = (s.solenoid_area(), s.solenoid_length());
            s.with_solenoid(a * (1.0 + x), l)
        }).unwrap();
        let spec = ToleranceSpec {
            entries: vec![Tolerance {
                shunt: 0,
                field: ShuntField::SolenoidArea,
                distribution: Distribution::Normal { rel_sd: 0.0 },
            }],
        };
        let nominal = alpha_mismatch(&d).unwrap().alpha;
        let mc = monte_carlo_alpha(&d, &spec, 16, seed).unwrap();
        for v in [mc.mean, mc.p50, mc.p95, mc.max] {
            prop_assert!((v - nominal).abs() <= 1e-12 * nominal.max(1e-300));
        }
    }
}
