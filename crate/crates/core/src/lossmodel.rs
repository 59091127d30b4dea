//! Seeded packet-loss processes.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    Bernoulli,
    GilbertElliott,
}

/// Long-run loss `rate`; for Gilbert-Elliott, `burst` is the mean run of
/// consecutive losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub model: LossKind,
    pub rate: f64,
    pub burst: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { model: LossKind::Bernoulli, rate: 0.0, burst: 1.0 }
    }
}

impl LossConfig {
    pub fn bernoulli(rate: f64) -> Self {
        LossConfig { model: LossKind::Bernoulli, rate, burst: 1.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(format!("loss rate {} outside [0, 1)", self.rate));
        }
        if self.model == LossKind::GilbertElliott && (self.burst.is_nan() || self.burst < 1.0) {
            return Err(format!("burst {} must be >= 1", self.burst));
        }
        Ok(())
    }

    pub fn process(&self) -> LossProcess {
        match self.model {
            LossKind::Bernoulli => LossProcess::Bernoulli { p: self.rate },
            LossKind::GilbertElliott => {
                // Bad state always drops, good state never does. Mean bad
                // run = 1 / p_bg; stationary P(bad) = rate.
                let p_bg = 1.0 / self.burst;
                let p_gb = if self.rate == 0.0 { 0.0 } else { (self.rate * p_bg / (1.0 - self.rate)).min(1.0) };
                LossProcess::Gilbert { p_gb, p_bg, bad: false }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossProcess {
    Bernoulli { p: f64 },
    Gilbert { p_gb: f64, p_bg: f64, bad: bool },
}

impl LossProcess {
    /// Whether the next packet is dropped.
    pub fn next_lost(&mut self, rng: &mut impl Rng) -> bool {
        match self {
            LossProcess::Bernoulli { p } => *p > 0.0 && rng.random_bool(*p),
            LossProcess::Gilbert { p_gb, p_bg, bad } => {
                let flip = if *bad { *p_bg } else { *p_gb };
                if flip > 0.0 && rng.random_bool(flip) {
                    *bad = !*bad;
                }
                *bad
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn run(cfg: LossConfig, n: usize) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = cfg.process();
        (0..n).map(|_| p.next_lost(&mut rng)).collect()
    }

    #[test]
    fn bernoulli_rate() {
        let v = run(LossConfig::bernoulli(0.05), 200_000);
        let r = v.iter().filter(|&&x| x).count() as f64 / v.len() as f64;
        assert!((r - 0.05).abs() < 0.003, "{r}");
        assert!(run(LossConfig::bernoulli(0.0), 1000).iter().all(|&x| !x));
    }

    #[test]
    fn gilbert_rate_and_burst() {
        let cfg = LossConfig { model: LossKind::GilbertElliott, rate: 0.02, burst: 4.0 };
        let v = run(cfg, 400_000);
        let lost = v.iter().filter(|&&x| x).count();
        let r = lost as f64 / v.len() as f64;
        assert!((r - 0.02).abs() < 0.004, "{r}");
        let runs = v.windows(2).filter(|w| !w[0] && w[1]).count();
        let mean_burst = lost as f64 / runs as f64;
        assert!((mean_burst - 4.0).abs() < 0.4, "{mean_burst}");
    }

    #[test]
    fn validation() {
        assert!(LossConfig::bernoulli(1.0).validate().is_err());
        assert!(LossConfig { model: LossKind::GilbertElliott, rate: 0.1, burst: 0.5 }.validate().is_err());
        assert!(LossConfig::default().validate().is_ok());
    }
}
