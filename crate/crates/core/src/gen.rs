//! Seeded random instances with exact rational values.
//!
//! Output depends only on the configuration, so the same seed always yields
//! byte-identical instance files.

use num_bigint::BigInt;
use rand_core::RngCore;
use rand_core::SeedableRng;
use rand_xoshiro::SplitMix64;
use thiserror::Error;

use crate::instance::Instance;
use crate::scalar::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid range: {0}")]
    InvalidRange(String),
}

/// Sign mix for generated items. Values are drawn from the magnitude range and
/// signed per item: an item is a good for every agent, a chore for every
/// agent, or neutral (all zero), with the given probabilities. Without a mix,
/// every entry is drawn independently from `[value_lo, value_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mix {
    pub goods: f64,
    pub chores: f64,
    pub neutral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub agents: usize,
    pub items: usize,
    pub seed: u64,
    /// Values are multiples of `1/denominator` in `[value_lo, value_hi]`.
    pub value_lo: i64,
    pub value_hi: i64,
    pub denominator: u64,
    /// Integer weights in `[weight_lo, weight_hi]`.
    pub weight_lo: u64,
    pub weight_hi: u64,
    pub mix: Option<Mix>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            agents: 2,
            items: 4,
            seed: 0,
            value_lo: -10,
            value_hi: 10,
            denominator: 1,
            weight_lo: 1,
            weight_hi: 5,
            mix: None,
        }
    }
}

struct Draw(SplitMix64);

impl Draw {
    /// Uniform-ish integer in `[lo, hi]`.
    fn int(&mut self, lo: i128, hi: i128) -> i128 {
        let span = (hi - lo + 1) as u128;
        lo + (self.0.next_u64() as u128 % span) as i128
    }

    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl GenConfig {
    fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::InvalidRange(msg));
        if self.agents == 0 {
            return bad("at least one agent is required".into());
        }
        if self.value_lo > self.value_hi {
            return bad(format!("values {}..{}", self.value_lo, self.value_hi));
        }
        if self.denominator == 0 {
            return bad("denominator must be positive".into());
        }
        if self.weight_lo == 0 || self.weight_lo > self.weight_hi {
            return bad(format!("weights {}..{}", self.weight_lo, self.weight_hi));
        }
        if let Some(mix) = self.mix {
            let parts = [mix.goods, mix.chores, mix.neutral];
            if parts.iter().any(|p| !p.is_finite() || *p < 0.0) || parts.iter().sum::<f64>() <= 0.0
            {
                return bad("mix probabilities must be non-negative with a positive sum".into());
            }
            if self.value_hi <= 0 {
                return bad("a sign mix needs a positive magnitude range".into());
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Instance<Rational>, GenError> {
        self.validate()?;
        let mut rng = Draw(SplitMix64::seed_from_u64(self.seed));
        let den = self.denominator as i128;
        let weights = (0..self.agents)
            .map(|_| {
                Rational::from_integer(BigInt::from(
                    rng.int(self.weight_lo as i128, self.weight_hi as i128),
                ))
            })
            .collect();
        let q = |n: i128| Rational::new(BigInt::from(n), BigInt::from(den));
        let mut values = vec![Vec::with_capacity(self.items); self.agents];
        for _ in 0..self.items {
            match self.mix {
                None => {
                    for row in values.iter_mut() {
                        row.push(q(
                            rng.int(self.value_lo as i128 * den, self.value_hi as i128 * den)
                        ));
                    }
                }
                Some(mix) => {
                    let total = mix.goods + mix.chores + mix.neutral;
                    let u = rng.unit() * total;
                    let sign = if u < mix.goods {
                        1
                    } else if u < mix.goods + mix.chores {
                        -1
                    } else {
                        0
                    };
                    let lo = self.value_lo.max(0) as i128 * den;
                    let lo = lo.max(1);
                    let hi = self.value_hi as i128 * den;
                    for row in values.iter_mut() {
                        row.push(q(sign * rng.int(lo, hi)));
                    }
                }
            }
        }
        Ok(Instance::new(weights, values).expect("generated instance is valid"))
    }
}
