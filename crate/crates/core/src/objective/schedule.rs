//! Three-phase curriculum weight for the long-caption loss.
//!
//! | phase      | steps        | alpha                                              |
//! |------------|--------------|----------------------------------------------------|
//! | warm-up    | `[0, t1)`    | `alpha_start`                                      |
//! | decay      | `[t1, t2]`   | cosine from `alpha_start` down to `alpha_min`      |
//! | refinement | `(t2, T]`    | `alpha_min + eps`, `eps ~ U(+-delta * (1 - t_hat))` |
//!
//! The refinement noise is a pure function of `(seed, t)`, so a schedule can
//! be replayed exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LearningOrder {
    #[default]
    LongToShort,
    /// Same trajectory with the two losses trading places.
    ShortToLong,
}

impl fmt::Display for LearningOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearningOrder::LongToShort => "long-to-short",
            LearningOrder::ShortToLong => "short-to-long",
        })
    }
}

impl FromStr for LearningOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long-to-short" => Ok(LearningOrder::LongToShort),
            "short-to-long" => Ok(LearningOrder::ShortToLong),
            other => Err(Error::Param(format!("unknown learning order {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    WarmUp,
    Decay,
    Refinement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub alpha_start: f64,
    pub alpha_min: f64,
    pub t1: usize,
    pub t2: usize,
    pub total: usize,
    pub delta: f64,
    pub order: LearningOrder,
    pub seed: u64,
}

pub const DEFAULT_ALPHA_START: f64 = 1.0;
pub const DEFAULT_ALPHA_MIN: f64 = 0.2;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_T1_FRAC: f64 = 0.3;
pub const DEFAULT_T2_FRAC: f64 = 0.7;

impl ScheduleConfig {
    /// Default weights with phase boundaries at fractions of `total` steps.
    pub fn with_fractions(total: usize, t1_frac: f64, t2_frac: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            alpha_start: DEFAULT_ALPHA_START,
            alpha_min: DEFAULT_ALPHA_MIN,
            t1: (total as f64 * t1_frac).floor() as usize,
            t2: (total as f64 * t2_frac).floor() as usize,
            total,
            delta: DEFAULT_DELTA,
            order: LearningOrder::LongToShort,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn for_steps(total: usize, seed: u64) -> Result<Self> {
        Self::with_fractions(total, DEFAULT_T1_FRAC, DEFAULT_T2_FRAC, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 < self.t2 && self.t2 < self.total) {
            return Err(Error::Param(format!(
                "phase boundaries need t1 < t2 < T, got t1={} t2={} T={}",
                self.t1, self.t2, self.total
            )));
        }
        if !(0.0 <= self.alpha_min && self.alpha_min <= self.alpha_start && self.alpha_start <= 1.0)
        {
            return Err(Error::Param(format!(
                "need 0 <= alpha_min <= alpha_start <= 1, got {} and {}",
                self.alpha_min, self.alpha_start
            )));
        }
        if !(0.0 <= self.delta && self.delta <= self.alpha_min) {
            return Err(Error::Param(format!(
                "perturbation amplitude {} must lie in [0, alpha_min]",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn phase(&self, t: usize) -> Phase {
        if t < self.t1 {
            Phase::WarmUp
        } else if t <= self.t2 {
            Phase::Decay
        } else {
            Phase::Refinement
        }
    }

    /// Cosine-annealed value at (possibly fractional) step `t` in `[t1, t2]`.
    pub fn decay_value(&self, t: f64) -> f64 {
        let frac = (t - self.t1 as f64) / (self.t2 - self.t1) as f64;
        self.alpha_min + 0.5 * (self.alpha_start - self.alpha_min) * (1.0 + (PI * frac).cos())
    }

    /// Perturbation amplitude `delta * (1 - t_hat)` at step `t > t2`.
    pub fn amplitude(&self, t: usize) -> f64 {
        let t_hat = (t - self.t2) as f64 / (self.total - self.t2) as f64;
        self.delta * (1.0 - t_hat)
    }

    /// Uniform draw in `[0, 1)` keyed on `(seed, t)`.
    fn unit_draw(&self, t: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t as u64);
        rng.gen::<f64>()
    }
}

/// Weight on the long-caption loss at step `t`.
pub fn alpha_schedule(t: usize, cfg: &ScheduleConfig) -> Result<f64> {
    cfg.validate()?;
    if t > cfg.total {
        return Err(Error::Param(format!(
            "step {t} beyond schedule end {}",
            cfg.total
        )));
    }
    let alpha = match cfg.phase(t) {
        Phase::WarmUp => cfg.alpha_start,
        Phase::Decay => cfg.decay_value(t as f64),
        Phase::Refinement => {
            let amp = cfg.amplitude(t);
            let eps = if amp == 0.0 {
                0.0
            } else {
                amp * (2.0 * cfg.unit_draw(t) - 1.0)
            };
            cfg.alpha_min + eps
        }
    };
    Ok(alpha.clamp(0.0, 1.0))
}

/// Effective weight on the long-caption loss once the learning order is applied.
pub fn long_weight(t: usize, cfg: &ScheduleConfig) -> Result<f64> {
    let a = alpha_schedule(t, cfg)?;
    Ok(match cfg.order {
        LearningOrder::LongToShort => a,
        LearningOrder::ShortToLong => 1.0 - a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ScheduleConfig {
        ScheduleConfig::for_steps(200, 7).unwrap()
    }

    #[test]
    fn warm_up_is_fixed_at_one() {
        let c = cfg();
        assert_eq!((c.t1, c.t2), (60, 140));
        for t in 0..c.t1 {
            assert_eq!(alpha_schedule(t, &c).unwrap(), 1.0);
        }
    }

    #[test]
    fn decay_endpoints_and_midpoint() {
        let c = cfg();
        assert!((alpha_schedule(c.t1, &c).unwrap() - c.alpha_start).abs() < 1e-12);
        assert!((alpha_schedule(c.t2, &c).unwrap() - c.alpha_min).abs() < 1e-12);
        let mid = alpha_schedule((c.t1 + c.t2) / 2, &c).unwrap();
        assert!((mid - 0.6).abs() < 1e-12);
    }

    #[test]
    fn end_of_training_is_exactly_alpha_min() {
        let c = cfg();
        assert_eq!(alpha_schedule(c.total, &c).unwrap(), 0.2);
    }

    #[test]
    fn refinement_plateau_is_point_two() {
        assert_eq!(DEFAULT_ALPHA_MIN, 0.2);
    }

    #[test]
    fn rejects_malformed_configs() {
        let mut c = cfg();
        assert!(alpha_schedule(c.total + 1, &c).is_err());
        c.t2 = c.t1;
        assert!(alpha_schedule(0, &c).is_err());
        let mut c = cfg();
        c.delta = 0.3;
        assert!(alpha_schedule(0, &c).is_err());
        let mut c = cfg();
        c.alpha_min = 0.9;
        c.alpha_start = 0.5;
        assert!(alpha_schedule(0, &c).is_err());
    }

    #[test]
    fn continuous_at_phase_boundaries() {
        let c = cfg();
        // Warm-up value meets the cosine at t1.
        assert!((c.decay_value(c.t1 as f64) - c.alpha_start).abs() < 1e-12);
        // Refinement is centred on the decay end point, and with no noise it
        // is exactly continuous.
        let mut quiet = c.clone();
        quiet.delta = 0.0;
        assert!(
            (alpha_schedule(c.t2 + 1, &quiet).unwrap() - c.decay_value(c.t2 as f64)).abs() < 1e-12
        );
        let eps = 1e-9;
        assert!((c.decay_value(c.t2 as f64 - eps) - c.alpha_min).abs() < 1e-12);
    }

    #[test]
    fn short_to_long_swaps_weights() {
        let mut c = cfg();
        c.order = LearningOrder::ShortToLong;
        for t in [0, c.t1, c.t2, c.total] {
            let a = alpha_schedule(t, &c).unwrap();
            assert_eq!(long_weight(t, &c).unwrap(), 1.0 - a);
        }
        assert_eq!(long_weight(0, &c).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn bounded_and_reproducible(seed in any::<u64>(), total in 10usize..500, t_frac in 0.0f64..=1.0) {
            let c = ScheduleConfig::for_steps(total, seed).unwrap();
            let t = (total as f64 * t_frac) as usize;
            let a = alpha_schedule(t, &c).unwrap();
            prop_assert!(a >= c.alpha_min - c.delta && a <= 1.0);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(a.to_bits(), alpha_schedule(t, &c).unwrap().to_bits());
        }

        #[test]
        fn non_increasing_during_decay(total in 10usize..500) {
            let c = ScheduleConfig::for_steps(total, 0).unwrap();
            let mut prev = f64::INFINITY;
            for t in c.t1..=c.t2 {
                let a = alpha_schedule(t, &c).unwrap();
                prop_assert!(a <= prev);
                prev = a;
            }
        }
    }
}
