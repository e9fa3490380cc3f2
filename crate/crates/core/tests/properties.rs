mod common;

use common::{channels, random_point, rng};
use duplex::config::{db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm};
use duplex::mode::{all_valid_modes, enumerate_modes, ModeMatrix};
use duplex::rate::{dl_effective, sinr_tables, DesignPoint, LinkModel};
use duplex::sca::{
    build_minorants, dl_lifted_rate, dl_minorant_value, prepare_expansion, ul_lifted_rate, ul_minorant_value, Problem,
    UlMinorantForm,
};
use duplex::SystemConfig;
use num_complex::Complex;
use proptest::prelude::*;

fn small_config() -> SystemConfig {
    SystemConfig {
        half_array_size: 2,
        num_ul: 2,
        num_dl: 2,
        ..SystemConfig::desk()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_fractions_partition_the_frame(mu2 in 1.0001f64..1e4) {
        let mut x = DesignPoint::zeros(1, 1, 2);
        x.mu = [mu2 / (mu2 - 1.0), mu2];
        let f = x.phase_fractions();
        prop_assert!((f[0] + f[1] - 1.0).abs() < 1e-12);
        prop_assert!(f[0] > 0.0 && f[1] > 0.0);
        prop_assert!((1.0 / x.mu[0] - f[0]).abs() < 1e-9);
    }

    #[test]
    fn budget_weights_average_power_over_active_time(mu2 in 1.0001f64..1e4, off1: bool, off2: bool) {
        prop_assume!(!(off1 && off2));
        let k = Problem::budget_weights([off1, off2], mu2);
        let t2 = 1.0 / mu2;
        match (off1, off2) {
            (false, false) => {
                prop_assert!((k[0] - (1.0 - t2)).abs() < 1e-12);
                prop_assert!((k[1] - t2).abs() < 1e-12);
            }
            // the lone active phase carries the whole budget
            (true, false) => prop_assert!((k[1] - 1.0).abs() < 1e-12),
            (false, true) => prop_assert!((k[0] - 1.0).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn decibel_conversions_round_trip(db in -150f64..80.0) {
        prop_assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-9);
        prop_assert!((watts_to_dbm(dbm_to_watts(db)) - db).abs() < 1e-9);
    }

    #[test]
    fn mode_codes_round_trip(c1 in 0u8..4, c2 in 0u8..4) {
        let m = ModeMatrix::from_codes(c1, c2);
        prop_assert_eq!(m.codes(), (c1, c2));
        prop_assert_eq!(m.swapped().swapped(), m);
        prop_assert_eq!(m.is_valid(), all_valid_modes().contains(&m));
    }

    #[test]
    fn louder_downlink_never_helps_the_other_users(seed in 0u64..1000, boost in 1.0f64..10.0) {
        let config = small_config();
        let link = LinkModel::perfect(&channels(&config, seed), config.rho2);
        let x = random_point(&link, &config, &mut rng(seed + 1));
        for m in enumerate_modes() {
            let (ul, dl) = sinr_tables(&link, &m, &x).unwrap();
            let mut y = x.clone();
            for w in y.w[0].iter_mut() {
                *w *= Complex::new(boost, 0.0);
            }
            let (ul2, dl2) = sinr_tables(&link, &m, &y).unwrap();
            for j in 0..2 {
                for u in 0..ul.len() {
                    prop_assert!(ul2[u][j] <= ul[u][j] * (1.0 + 1e-9));
                }
                prop_assert!(dl2[1][j] <= dl[1][j] * (1.0 + 1e-9));
            }
        }
    }
}

/// Rotates each beamformer so its own channel sees a positive real gain,
/// which leaves every SINR unchanged.
fn align(pr: &Problem, x: &mut DesignPoint) {
    for j in 0..2 {
        let h = dl_effective(&pr.link, &pr.masks, j);
        for (k, w) in x.w.iter_mut().enumerate() {
            let g = h[k].dotc(&w[j]);
            if g.norm() > 0.0 {
                w[j] *= g.conj() / g.norm();
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn minorants_never_exceed_the_rates(seed in 0u64..1000, mode_idx in 0usize..8) {
        let config = small_config();
        let link = LinkModel::perfect(&channels(&config, seed), config.rho2).normalized();
        let m = enumerate_modes()[mode_idx];
        let pr = Problem::new(&link, m, &config);
        let mut r = rng(seed ^ 0x5eed);
        let mut at = random_point(&link, &config, &mut r);
        prepare_expansion(&pr, &mut at);
        align(&pr, &mut at);
        prepare_expansion(&pr, &mut at);
        let coeffs = build_minorants(&pr, &at).unwrap();
        for _ in 0..8 {
            let mut q = random_point(&link, &config, &mut r);
            prepare_expansion(&pr, &mut q);
            align(&pr, &mut q);
            prepare_expansion(&pr, &mut q);
            for t in &coeffs.ul {
                let v = ul_minorant_value(t, &q, UlMinorantForm::Certified);
                let exact = ul_lifted_rate(&pr, &q, t.user, t.phase);
                prop_assert!(v <= exact + 1e-9 * exact.abs().max(1.0), "{m} UL {}: {v} > {exact}", t.user);
            }
            for t in &coeffs.dl {
                let v = dl_minorant_value(&pr, t, &q);
                let exact = dl_lifted_rate(&pr, &q, t.user, t.phase);
                prop_assert!(v <= exact + 1e-9 * exact.abs().max(1.0), "{m} DL {}: {v} > {exact}", t.user);
            }
        }
    }
}
