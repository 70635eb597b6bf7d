//! The minting input `M(k) = μ_k v(k)`: block-reward schedules, reward
//! distribution vectors over accounts and integer apportionment of a reward
//! among them.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{CheckedAdd, One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::AccountId;

/// Base units per coin.
pub const COIN: u64 = 100_000_000;

/// Bitcoin's first-interval block reward, in base units.
pub const BITCOIN_INITIAL_REWARD: u64 = 50 * COIN;

/// Blocks per halving interval.
pub const BITCOIN_INTERVAL: u64 = 210_000;

/// Number of intervals with a nonzero reward (indices `0..=32`).
pub const BITCOIN_INTERVALS: u32 = 33;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("reward of {mu} base units has no recipients")]
    EmptyDistribution { mu: u64 },
    #[error("distribution weights sum to {sum}, expected 1")]
    NotStochastic { sum: String },
    #[error("distribution weight for {account} has a zero denominator")]
    BadWeight { account: AccountId },
    #[error("distribution weights overflow rational arithmetic")]
    Overflow,
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

/// A per-block reward schedule `k ↦ μ_k`.
///
/// Heights start at 1; the genesis block (height 0) mints nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RewardSchedule {
    /// `μ_k = ⌊initial / 2^i⌋` for `k` in interval `i < intervals`, else 0.
    Halving {
        initial_reward: u64,
        interval_length: u64,
        intervals: u32,
    },
    /// A fixed reward for `blocks` blocks (forever when `None`).
    Constant { reward: u64, blocks: Option<u64> },
    /// Interval rewards `r_{i+1} = ⌊r_i · numerator / denominator⌋`, starting at
    /// `initial_reward`, for `intervals` intervals.
    Geometric {
        initial_reward: u64,
        interval_length: u64,
        numerator: u64,
        denominator: u64,
        intervals: u32,
    },
    /// One explicit reward per block, starting at height 1; zero afterwards.
    Tabulated { rewards: Vec<u64> },
}

impl Default for RewardSchedule {
    fn default() -> Self {
        Self::bitcoin()
    }
}

impl RewardSchedule {
    pub fn bitcoin() -> Self {
        RewardSchedule::Halving {
            initial_reward: BITCOIN_INITIAL_REWARD,
            interval_length: BITCOIN_INTERVAL,
            intervals: BITCOIN_INTERVALS,
        }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        match self {
            RewardSchedule::Halving {
                interval_length, ..
            } if *interval_length == 0 => Err(RewardError::InvalidSchedule(
                "interval_length must be positive".into(),
            )),
            RewardSchedule::Geometric {
                interval_length,
                numerator,
                denominator,
                ..
            } => {
                if *interval_length == 0 {
                    Err(RewardError::InvalidSchedule(
                        "interval_length must be positive".into(),
                    ))
                } else if *denominator == 0 || numerator > denominator {
                    Err(RewardError::InvalidSchedule(
                        "geometric ratio must lie in [0, 1]".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Reward of interval `i` for interval-based schedules.
    fn interval_reward(&self, i: u64) -> u64 {
        match *self {
            RewardSchedule::Halving {
                initial_reward,
                intervals,
                ..
            } => {
                if i >= u64::from(intervals) || i >= 64 {
                    0
                } else {
                    initial_reward >> i
                }
            }
            RewardSchedule::Geometric {
                initial_reward,
                numerator,
                denominator,
                intervals,
                ..
            } => {
                if i >= u64::from(intervals) {
                    return 0;
                }
                let mut r = initial_reward;
                for _ in 0..i {
                    if r == 0 {
                        break;
                    }
                    r = (u128::from(r) * u128::from(numerator) / u128::from(denominator)) as u64;
                }
                r
            }
            _ => unreachable!("not an interval schedule"),
        }
    }

    /// Scheduled reward `μ_k` for block height `k` (zero for `k = 0`).
    pub fn mu(&self, k: u64) -> u64 {
        if k == 0 {
            return 0;
        }
        match self {
            RewardSchedule::Halving {
                interval_length, ..
            }
            | RewardSchedule::Geometric {
                interval_length, ..
            } => self.interval_reward((k - 1) / interval_length),
            RewardSchedule::Constant { reward, blocks } => match blocks {
                Some(n) if k > *n => 0,
                _ => *reward,
            },
            RewardSchedule::Tabulated { rewards } => {
                rewards.get((k - 1) as usize).copied().unwrap_or(0)
            }
        }
    }

    /// `Σ_{k=1..K} μ_k`, evaluated interval by interval.
    pub fn cumulative(&self, height: u64) -> u128 {
        match self {
            RewardSchedule::Halving {
                interval_length, ..
            }
            | RewardSchedule::Geometric {
                interval_length, ..
            } => {
                let mut total = 0u128;
                let mut i = 0u64;
                loop {
                    let start = i.saturating_mul(*interval_length);
                    if start >= height {
                        break;
                    }
                    let reward = self.interval_reward(i);
                    if reward == 0 {
                        break;
                    }
                    let blocks = (height - start).min(*interval_length);
                    total += u128::from(blocks) * u128::from(reward);
                    i += 1;
                }
                total
            }
            RewardSchedule::Constant { reward, blocks } => {
                let n = blocks.map_or(height, |b| b.min(height));
                u128::from(n) * u128::from(*reward)
            }
            RewardSchedule::Tabulated { rewards } => rewards
                .iter()
                .take(height.min(rewards.len() as u64) as usize)
                .map(|&r| u128::from(r))
                .sum(),
        }
    }

    /// Total quantity ever minted, `y_∞ = Σ_{k≥1} μ_k`; `None` when the
    /// schedule never stops minting.
    pub fn supply_limit(&self) -> Option<u128> {
        match self {
            RewardSchedule::Halving {
                interval_length,
                intervals,
                ..
            }
            | RewardSchedule::Geometric {
                interval_length,
                intervals,
                ..
            } => Some(self.cumulative(u64::from(*intervals).saturating_mul(*interval_length))),
            RewardSchedule::Constant { reward, blocks } => match blocks {
                Some(n) => Some(u128::from(*n) * u128::from(*reward)),
                None if *reward == 0 => Some(0),
                None => None,
            },
            RewardSchedule::Tabulated { rewards } => {
                Some(rewards.iter().map(|&r| u128::from(r)).sum())
            }
        }
    }
}

/// Bitcoin's block reward at height `k`.
pub fn mu(k: u64) -> u64 {
    RewardSchedule::bitcoin().mu(k)
}

/// Bitcoin's terminal supply in base units.
pub fn total_supply_limit() -> u64 {
    let mut total = 0u64;
    for i in 0..BITCOIN_INTERVALS {
        total += BITCOIN_INTERVAL * (BITCOIN_INITIAL_REWARD >> i);
    }
    total
}

/// A stochastic vector over accounts with exact rational weights.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DistributionVector {
    weights: BTreeMap<AccountId, Ratio<u64>>,
}

impl DistributionVector {
    /// The empty distribution; only legal together with a zero reward.
    pub fn empty() -> Self {
        Self::default()
    }

    /// All weight on one account.
    pub fn sole(account: AccountId) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(account, Ratio::one());
        Self { weights }
    }

    /// Equal weight on every listed account (duplicates collapse).
    pub fn uniform<I: IntoIterator<Item = AccountId>>(accounts: I) -> Self {
        let ids: std::collections::BTreeSet<AccountId> = accounts.into_iter().collect();
        let n = ids.len() as u64;
        let weights = ids.into_iter().map(|a| (a, Ratio::new(1, n))).collect();
        Self { weights }
    }

    /// Builds from `(account, numerator, denominator)` triples. The weights
    /// must be nonnegative and sum to exactly one; zero weights are dropped.
    pub fn from_weights<I>(weights: I) -> Result<Self, RewardError>
    where
        I: IntoIterator<Item = (AccountId, u64, u64)>,
    {
        let mut map: BTreeMap<AccountId, Ratio<u64>> = BTreeMap::new();
        let mut sum = Ratio::<u64>::zero();
        for (account, num, den) in weights {
            if den == 0 {
                return Err(RewardError::BadWeight { account });
            }
            let w = Ratio::new(num, den);
            sum = sum.checked_add(&w).ok_or(RewardError::Overflow)?;
            if w.is_zero() {
                continue;
            }
            let slot = map.entry(account).or_insert_with(Ratio::zero);
            *slot = slot.checked_add(&w).ok_or(RewardError::Overflow)?;
        }
        if sum != Ratio::one() {
            return Err(RewardError::NotStochastic {
                sum: sum.to_string(),
            });
        }
        Ok(Self { weights: map })
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> impl Iterator<Item = (AccountId, Ratio<u64>)> + '_ {
        self.weights.iter().map(|(a, w)| (*a, *w))
    }

    pub fn weight(&self, account: AccountId) -> Ratio<u64> {
        self.weights.get(&account).copied().unwrap_or_else(Ratio::zero)
    }
}

/// A scheduled reward together with its distribution over accounts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RewardEvent {
    pub mu: u64,
    pub distribution: DistributionVector,
}

impl RewardEvent {
    /// No minting.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(mu: u64, distribution: DistributionVector) -> Self {
        Self { mu, distribution }
    }

    pub fn to_miner(mu: u64, miner: AccountId) -> Self {
        Self::new(mu, DistributionVector::sole(miner))
    }

    /// Integer allocation of `mu` over the distribution.
    pub fn allocation(&self) -> Result<Vec<(AccountId, u64)>, RewardError> {
        allocate(self.mu, &self.distribution)
    }
}

/// Splits `mu` base units in proportion to `dist` using largest-remainder
/// rounding. Ties on the remainder go to the lower account id. Accounts that
/// end up with nothing are omitted, so `mu = 0` yields an empty list.
pub fn allocate(mu: u64, dist: &DistributionVector) -> Result<Vec<(AccountId, u64)>, RewardError> {
    if mu == 0 {
        return Ok(Vec::new());
    }
    if dist.is_empty() {
        return Err(RewardError::EmptyDistribution { mu });
    }

    struct Share {
        account: AccountId,
        floor: u64,
        // Remainder as the fraction rem / den, with rem < den.
        rem: u128,
        den: u128,
    }

    let mut shares: Vec<Share> = dist
        .weights
        .iter()
        .map(|(&account, w)| {
            let num = u128::from(mu) * u128::from(*w.numer());
            let den = u128::from(*w.denom());
            Share {
                account,
                floor: (num / den) as u64,
                rem: num % den,
                den,
            }
        })
        .collect();

    let assigned: u64 = shares.iter().map(|s| s.floor).sum();
    let mut leftover = mu - assigned;
    debug_assert!(leftover as usize <= shares.len());

    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&shares[a], &shares[b]);
        // Compare sa.rem/sa.den against sb.rem/sb.den without division.
        (sb.rem * sa.den)
            .cmp(&(sa.rem * sb.den))
            .then_with(|| sa.account.cmp(&sb.account))
    });
    for idx in order {
        if leftover == 0 {
            break;
        }
        shares[idx].floor += 1;
        leftover -= 1;
    }

    shares.sort_by(|a, b| a.account.cmp(&b.account));
    Ok(shares
        .into_iter()
        .filter(|s| s.floor > 0)
        .map(|s| (s.account, s.floor))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: u64) -> Vec<AccountId> {
        (0..n).map(AccountId).collect()
    }

    #[test]
    fn bitcoin_reward_at_interval_edges() {
        assert_eq!(mu(1), 5_000_000_000);
        assert_eq!(mu(210_000), 5_000_000_000);
        assert_eq!(mu(210_001), 2_500_000_000);
        assert_eq!(mu(6_930_000), 1);
        assert_eq!(mu(6_930_001), 0);
        assert_eq!(mu(0), 0);
    }

    #[test]
    fn bitcoin_supply_limit() {
        assert_eq!(total_supply_limit(), 2_099_999_997_690_000);
        assert_eq!(
            RewardSchedule::bitcoin().supply_limit(),
            Some(2_099_999_997_690_000)
        );
    }

    #[test]
    fn single_interval_supply() {
        let s = RewardSchedule::Halving {
            initial_reward: BITCOIN_INITIAL_REWARD,
            interval_length: BITCOIN_INTERVAL,
            intervals: 1,
        };
        assert_eq!(s.supply_limit(), Some(210_000 * 5_000_000_000));
        assert_eq!(s.mu(210_001), 0);
    }

    #[test]
    fn cumulative_matches_blockwise_sum() {
        let s = RewardSchedule::Halving {
            initial_reward: 1000,
            interval_length: 7,
            intervals: 5,
        };
        let mut running = 0u128;
        for k in 0..60 {
            running += u128::from(s.mu(k));
            assert_eq!(s.cumulative(k), running, "K = {k}");
        }
        assert_eq!(s.supply_limit(), Some(running));
    }

    #[test]
    fn geometric_and_tabulated() {
        let g = RewardSchedule::Geometric {
            initial_reward: 100,
            interval_length: 2,
            numerator: 3,
            denominator: 4,
            intervals: 4,
        };
        let rewards: Vec<u64> = (1..=10).map(|k| g.mu(k)).collect();
        assert_eq!(rewards, vec![100, 100, 75, 75, 56, 56, 42, 42, 0, 0]);
        assert_eq!(g.supply_limit(), Some(2 * (100 + 75 + 56 + 42)));

        let t = RewardSchedule::Tabulated {
            rewards: vec![5, 4, 3],
        };
        assert_eq!(t.mu(3), 3);
        assert_eq!(t.mu(4), 0);
        assert_eq!(t.cumulative(10), 12);

        let c = RewardSchedule::Constant {
            reward: 9,
            blocks: None,
        };
        assert_eq!(c.supply_limit(), None);
        assert_eq!(c.cumulative(4), 36);
    }

    #[test]
    fn sole_miner_takes_everything() {
        let d = DistributionVector::sole(AccountId(7));
        assert_eq!(allocate(123, &d).unwrap(), vec![(AccountId(7), 123)]);
    }

    #[test]
    fn equal_split_of_ten_over_three() {
        // 10/3 = 3 rem 1/3 each; one leftover unit goes to the lowest id.
        let d = DistributionVector::uniform(ids(3));
        assert_eq!(
            allocate(10, &d).unwrap(),
            vec![(AccountId(0), 4), (AccountId(1), 3), (AccountId(2), 3)]
        );
    }

    #[test]
    fn largest_remainder_beats_index() {
        // mu = 10 over (1/6, 1/3, 1/2): quotas 1.67, 3.33, 5 -> 2, 3, 5.
        let d = DistributionVector::from_weights([
            (AccountId(0), 1, 6),
            (AccountId(1), 1, 3),
            (AccountId(2), 1, 2),
        ])
        .unwrap();
        assert_eq!(
            allocate(10, &d).unwrap(),
            vec![(AccountId(0), 2), (AccountId(1), 3), (AccountId(2), 5)]
        );
    }

    #[test]
    fn zero_reward_allocates_nothing() {
        assert!(allocate(0, &DistributionVector::empty()).unwrap().is_empty());
        assert!(allocate(0, &DistributionVector::uniform(ids(4))).unwrap().is_empty());
    }

    #[test]
    fn empty_distribution_rejected() {
        assert_eq!(
            allocate(5, &DistributionVector::empty()),
            Err(RewardError::EmptyDistribution { mu: 5 })
        );
    }

    #[test]
    fn weights_must_sum_to_one() {
        let err = DistributionVector::from_weights([(AccountId(0), 1, 2), (AccountId(1), 1, 3)]);
        assert!(matches!(err, Err(RewardError::NotStochastic { .. })));
        assert!(matches!(
            DistributionVector::from_weights([(AccountId(0), 1, 0)]),
            Err(RewardError::BadWeight { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn allocation_is_exact(mu in 0u64..1_000_000_000_000, parts in prop::collection::vec(1u64..50, 1..12)) {
                let den: u64 = parts.iter().sum();
                let d = DistributionVector::from_weights(
                    parts.iter().enumerate().map(|(i, &p)| (AccountId(i as u64), p, den)),
                ).unwrap();
                let alloc = allocate(mu, &d).unwrap();
                prop_assert_eq!(alloc.iter().map(|(_, v)| *v).sum::<u64>(), mu);
                for (a, v) in alloc {
                    let exact = mu as f64 * d.weight(a).numer().clone() as f64 / *d.weight(a).denom() as f64;
                    prop_assert!((v as f64 - exact).abs() <= 1.0 + exact * 1e-12);
                }
            }

            #[test]
            fn rewards_never_increase(k in 1u64..8_000_000) {
                prop_assert!(mu(k + 1) <= mu(k));
            }
        }
    }
}
