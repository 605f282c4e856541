//! Seeded link latencies: uniform jitter on ground FF-ICE links and eASP
//! processing, a lognormal heavy tail on the EFB IP link.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::scenario::{LatencyConfig, UniformLink};

/// One random stream for the whole run; identical seeds draw identical sequences.
#[derive(Debug, Clone)]
pub struct LatencyModel {
    cfg: LatencyConfig,
    rng: ChaCha8Rng,
    efb: LogNormal<f64>,
}

impl LatencyModel {
    pub fn new(cfg: LatencyConfig, seed: u64) -> Self {
        let efb = LogNormal::new(0.0, cfg.efb_downlink.sigma).expect("sigma validated at load");
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            efb,
        }
    }

    fn uniform(&mut self, l: UniformLink) -> i64 {
        (l.base_ms + self.rng.gen_range(0..=l.jitter_ms)).max(1) as i64
    }

    /// One-way FOC ⇄ eASP or eASP ⇄ eASP transport, ms.
    pub fn ground(&mut self) -> i64 {
        self.uniform(self.cfg.ffice_ground)
    }

    /// eASP validation time, ms.
    pub fn processing(&mut self) -> i64 {
        self.uniform(self.cfg.easp_processing)
    }

    /// EFB link, ms.
    pub fn efb(&mut self) -> i64 {
        let l = self.cfg.efb_downlink;
        let x = self.efb.sample(&mut self.rng);
        ((l.base_ms + l.scale_ms * x).round() as i64).max(1)
    }

    /// Smallest possible ground one-way latency.
    pub fn min_ground(&self) -> i64 {
        self.cfg.ffice_ground.base_ms.max(1) as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mad, population_sd};

    #[test]
    fn same_seed_same_draws() {
        let mut a = LatencyModel::new(LatencyConfig::default(), 7);
        let mut b = LatencyModel::new(LatencyConfig::default(), 7);
        let da: Vec<i64> = (0..50).map(|i| if i % 2 == 0 { a.ground() } else { a.efb() }).collect();
        let db: Vec<i64> = (0..50).map(|i| if i % 2 == 0 { b.ground() } else { b.efb() }).collect();
        assert_eq!(da, db);
        let mut c = LatencyModel::new(LatencyConfig::default(), 8);
        let dc: Vec<i64> = (0..50).map(|i| if i % 2 == 0 { c.ground() } else { c.efb() }).collect();
        assert_ne!(da, dc);
    }

    #[test]
    fn ground_within_envelope() {
        let mut m = LatencyModel::new(LatencyConfig::default(), 1);
        for _ in 0..10_000 {
            let g = m.ground();
            let p = m.processing();
            assert!((250..=750).contains(&g) && (150..=450).contains(&p));
        }
    }

    /// The frozen default reproduces the target spread on a large sample.
    #[test]
    fn efb_default_calibration() {
        let mut m = LatencyModel::new(LatencyConfig::default(), 3);
        let xs: Vec<f64> = (0..200_000).map(|_| m.efb() as f64 / 1000.0).collect();
        let (sd, md) = (population_sd(&xs).unwrap(), mad(&xs).unwrap());
        assert!((sd - 7.5).abs() < 0.4, "sd {sd}");
        assert!((md - 2.0).abs() < 0.1, "mad {md}");
        assert!(xs.iter().all(|&x| x > 0.0));
    }
}
