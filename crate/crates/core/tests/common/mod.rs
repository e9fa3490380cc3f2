#![allow(dead_code)]

use duplex::channel::{complex_gaussian, generate_topology, sample_channels, CVector, ChannelSet};
use duplex::mode::ModeMatrix;
use duplex::rate::{DesignPoint, LinkModel};
use duplex::SystemConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn channels(config: &SystemConfig, seed: u64) -> ChannelSet {
    let mut r = rng(seed);
    let topo = generate_topology(config, &mut r);
    sample_channels(&topo, config, &mut r)
}

pub fn desk_link(seed: u64) -> (SystemConfig, LinkModel) {
    let config = SystemConfig::desk();
    let ch = channels(&config, seed);
    let link = LinkModel::perfect(&ch, config.rho2);
    (config, link)
}

pub fn tiny_config() -> SystemConfig {
    SystemConfig {
        half_array_size: 1,
        num_ul: 1,
        num_dl: 1,
        ..SystemConfig::desk()
    }
}

/// Random design with every entry present (masks are applied by the rate
/// functions) and powers around the budgets.
pub fn random_point<R: Rng>(link: &LinkModel, config: &SystemConfig, r: &mut R) -> DesignPoint {
    let n = link.num_antennas();
    let mut point = DesignPoint::zeros(link.num_ul(), link.num_dl(), n);
    let wvar = config.bs_power_w / (n * link.num_dl()) as f64;
    for w in point.w.iter_mut() {
        for wj in w.iter_mut() {
            let v = wvar * r.random_range(0.1..2.0);
            *wj = CVector::from_fn(n, |_, _| complex_gaussian(r, v));
        }
    }
    for p in point.p.iter_mut() {
        for pj in p.iter_mut() {
            *pj = (config.ul_power_w * r.random_range(0.0..1.0)).sqrt();
        }
    }
    let mu2 = r.random_range(1.1..10.0);
    point.mu = [mu2 / (mu2 - 1.0), mu2];
    point
}

pub fn mode(c1: u8, c2: u8) -> ModeMatrix {
    ModeMatrix::from_codes(c1, c2)
}
