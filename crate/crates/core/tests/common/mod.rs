//! Seeded random AR(1) instances shared by the integration suites.

#![allow(dead_code)]

use dynpricing::assumptions::{check_lipschitz, check_mlrp, check_regularity};
use dynpricing::{kernel_from_ar1, Ar1Spec, TwoPeriodGame, TypeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 20_240_617;

#[derive(Clone, Debug)]
pub struct Instance {
    pub alpha: f64,
    pub delta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub noise_sd: f64,
    pub game: TwoPeriodGame,
}

/// Gaussian prior and innovations truncated at three standard deviations.
pub fn build(alpha: f64, delta: f64, mu: f64, sigma: f64, noise_sd: f64, n: usize) -> Instance {
    let prior = TypeGrid::truncated_gaussian(mu, sigma, mu - 3.0 * sigma, mu + 3.0 * sigma, n).unwrap();
    let m = (1.0 - alpha) * mu;
    let noise = TypeGrid::truncated_gaussian(m, noise_sd, m - 3.0 * noise_sd, m + 3.0 * noise_sd, n)
        .unwrap();
    let k = kernel_from_ar1(&Ar1Spec { alpha, noise }, &prior, n).unwrap();
    Instance {
        alpha,
        delta,
        mu,
        sigma,
        noise_sd,
        game: TwoPeriodGame::baseline(k, delta, n).unwrap(),
    }
}

pub fn passes_assumptions(inst: &Instance) -> bool {
    let g = &inst.game;
    let k = &g.kernels.reject;
    check_mlrp(k, true).holds
        && check_lipschitz(k, g.delta).holds
        && check_regularity(g.prior(), k).map(|r| r.holds).unwrap_or(false)
}

/// `count` instances with strict MLRP, the Lipschitz bound and regularity,
/// drawn with a fixed seed; candidates that fail are redrawn.
pub fn random_instances(count: usize, n: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        assert!(tries < 50 * count, "could not draw {count} regular instances");
        let delta = rng.random_range(0.5..=1.0);
        let alpha = rng.random_range(0.05..0.95);
        let mu = rng.random_range(1.0..3.0);
        let sigma = rng.random_range(0.15..0.5);
        let noise_sd = rng.random_range(0.1..0.5);
        let inst = build(alpha, delta, mu, sigma, noise_sd, n);
        if passes_assumptions(&inst) {
            out.push(inst);
        }
    }
    out
}
