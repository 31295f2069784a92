//! Reputation and token arithmetic.
//!
//! Everything is integer fixed point: Bateekh in milli-units (mB) and the
//! weight, decay and staff factors in thousandths. Division floors. The
//! nesting order in [`vote_delta`] is part of the consensus rules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Economic constants, read from genesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconParams {
    /// Bateekh every new account starts with (mB).
    pub initial_bateekh: u64,
    pub base_up: u64,
    pub base_down: u64,
    /// Blocks after which a post's votes earn the floor factor.
    pub decay_horizon: u64,
    pub weight_min: u64,
    pub weight_max: u64,
    /// mB per staff rating star.
    pub rate_grant: u64,
    pub award_cost: u64,
    pub award_to_recipient: u64,
    pub award_burn: u64,
    pub award_bateekh: u64,
    /// Lifetime mB per Tofu mint.
    pub mint_threshold: u64,
    pub mint_amount: u64,
    pub max_supply: u64,
    pub rewards_pool: u64,
    pub treasury: u64,
    pub dev_fund: u64,
    pub flag_penalty: u64,
}

impl Default for EconParams {
    fn default() -> Self {
        EconParams {
            initial_bateekh: 1_000,
            base_up: 10_000,
            base_down: 2_000,
            decay_horizon: 10_000,
            weight_min: 500,
            weight_max: 2_000,
            rate_grant: 5_000,
            award_cost: 5,
            award_to_recipient: 4,
            award_burn: 1,
            award_bateekh: 25_000,
            mint_threshold: 100_000,
            mint_amount: 10,
            max_supply: 1_000_000,
            rewards_pool: 600_000,
            treasury: 300_000,
            dev_fund: 100_000,
            flag_penalty: 10_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid economic params: {0}")]
pub struct EconParamsError(pub &'static str);

impl EconParams {
    pub fn validate(&self) -> Result<(), EconParamsError> {
        let buckets = self.rewards_pool.checked_add(self.treasury).and_then(|s| s.checked_add(self.dev_fund));
        if buckets != Some(self.max_supply) {
            return Err(EconParamsError("genesis buckets must sum to max_supply"));
        }
        if self.award_to_recipient + self.award_burn != self.award_cost {
            return Err(EconParamsError("award split must equal award cost"));
        }
        if self.weight_min > self.weight_max {
            return Err(EconParamsError("weight_min exceeds weight_max"));
        }
        if self.decay_horizon == 0 || self.mint_threshold == 0 {
            return Err(EconParamsError("decay_horizon and mint_threshold must be positive"));
        }
        Ok(())
    }
}

pub fn voter_weight(voter_bateekh: u64, p: &EconParams) -> u64 {
    let shift = (voter_bateekh as i128 - p.initial_bateekh as i128).div_euclid(100);
    (1000 + shift).clamp(p.weight_min as i128, p.weight_max as i128) as u64
}

pub fn age_decay(age_blocks: u64, p: &EconParams) -> u64 {
    if age_blocks < p.decay_horizon {
        1000 - (750 * age_blocks as u128 / p.decay_horizon as u128) as u64
    } else {
        250
    }
}

/// Neutral without ratings; otherwise driven by the best star received.
pub fn staff_multiplier(stars: impl IntoIterator<Item = u8>) -> u64 {
    match stars.into_iter().max() {
        None => 1000,
        Some(best) => 600 + 200 * best as u64,
    }
}

pub fn vote_delta(base: u64, weight: u64, decay: u64, staff: u64) -> u64 {
    let step = |x: u128, f: u64| x * f as u128 / 1000;
    step(step(step(base as u128, weight), decay), staff) as u64
}

/// Tofu minted when lifetime earnings move from `before` to `after`, before
/// capping by what the rewards pool still holds.
pub fn mint_crossings(before: u64, after: u64, p: &EconParams) -> u64 {
    after / p.mint_threshold - before / p.mint_threshold
}

/// Splits a redemption price into (burned, to treasury); a tenth burns,
/// rounded up.
pub fn redeem_split(price: u64) -> (u64, u64) {
    let burn = price.div_ceil(10);
    (burn, price - burn)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Expected values below were computed by a standalone evaluation of the
    // formulas (Python integer arithmetic with // for floor division).

    #[test]
    fn weight_pins() {
        let p = EconParams::default();
        assert_eq!(voter_weight(1_000, &p), 1000);
        assert_eq!(voter_weight(101_000, &p), 2000);
        assert_eq!(voter_weight(0, &p), 990);
        assert_eq!(voter_weight(999, &p), 999);
        assert_eq!(voter_weight(10_000_000, &p), 2000);
    }

    #[test]
    fn decay_pins() {
        let p = EconParams::default();
        assert_eq!(age_decay(0, &p), 1000);
        assert_eq!(age_decay(5_000, &p), 625);
        assert_eq!(age_decay(9_999, &p), 251);
        assert_eq!(age_decay(10_000, &p), 250);
        assert_eq!(age_decay(u64::MAX, &p), 250);
    }

    #[test]
    fn staff_pins() {
        assert_eq!(staff_multiplier([]), 1000);
        assert_eq!(staff_multiplier([3, 5]), 1600);
        assert_eq!(staff_multiplier([1]), 800);
        assert_eq!(staff_multiplier([4]), 1400);
    }

    #[test]
    fn delta_pins() {
        assert_eq!(vote_delta(10_000, 1000, 1000, 1000), 10_000);
        assert_eq!(vote_delta(10_000, 1500, 625, 1400), 13_125);
        assert_eq!(vote_delta(10_000, 500, 250, 800), 1_000);
        // floors compound: 333 -> 332 -> 331 -> 330
        assert_eq!(vote_delta(333, 999, 999, 999), 330);
    }

    #[test]
    fn redeem_pins() {
        assert_eq!(redeem_split(25), (3, 22));
        assert_eq!(redeem_split(10), (1, 9));
        assert_eq!(redeem_split(1), (1, 0));
    }

    #[test]
    fn crossings() {
        let p = EconParams::default();
        assert_eq!(mint_crossings(95_000, 108_125, &p), 1);
        assert_eq!(mint_crossings(0, 99_999, &p), 0);
        assert_eq!(mint_crossings(99_999, 300_000, &p), 3);
    }

    #[test]
    fn defaults_valid() {
        EconParams::default().validate().unwrap();
        assert!(EconParams { treasury: 1, ..Default::default() }.validate().is_err());
        assert!(EconParams { award_burn: 2, ..Default::default() }.validate().is_err());
    }
}
