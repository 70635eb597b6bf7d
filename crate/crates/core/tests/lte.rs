use ledger_dynamics::ledger::{apply_block, AccountId, LedgerState, Rules, TransactionBlock};
use ledger_dynamics::lte::{
    apply_a, apply_b, lower_block, materialize_dense, output_y, step, ExpansionStep, FlowAction,
    InputVector, DEFAULT_DENSE_CAP,
};
use ledger_dynamics::reward::{DistributionVector, RewardEvent, RewardSchedule};
use ledger_dynamics::workload::random_transfers;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `A` and `B` written out from their definitions, independently of the
/// library's edge ordering: row `i` of `B u` is inflow minus outflow.
fn oracle_products(n_k: usize, n_k1: usize, x: &[i64], u: &[FlowAction]) -> (Vec<i64>, Vec<i64>) {
    let mut ax = vec![0; n_k1];
    ax[..n_k].copy_from_slice(x);
    let mut bu = vec![0; n_k1];
    for a in u {
        bu[a.from] -= a.amount as i64;
        bu[a.to] += a.amount as i64;
    }
    (ax, bu)
}

fn inputs(n_k: usize, n_k1: usize) -> impl Strategy<Value = Vec<FlowAction>> {
    let edge = (0..n_k.max(1), 0..n_k1.max(1), 1u64..1_000);
    prop::collection::vec(edge, 0..12).prop_map(move |v| {
        v.into_iter()
            .filter(|(i, j, _)| *i < n_k && i != j)
            .map(|(i, j, a)| FlowAction::new(i, j, a))
            .collect()
    })
}

fn case() -> impl Strategy<Value = (usize, usize, Vec<i64>, Vec<FlowAction>)> {
    (0usize..=12, 0usize..=8).prop_flat_map(|(n_k, grow)| {
        let n_k1 = n_k + grow;
        (
            Just(n_k),
            Just(n_k1),
            prop::collection::vec(-1_000i64..1_000, n_k),
            inputs(n_k, n_k1),
        )
    })
}

proptest! {
    #[test]
    fn sparse_matches_dense((n_k, n_k1, x, u) in case()) {
        let st = ExpansionStep::new(n_k, n_k1).unwrap();
        let dense = materialize_dense(st, DEFAULT_DENSE_CAP).unwrap();
        let input = InputVector::new(u.clone());
        let ax = apply_a(st, &x).unwrap();
        let bu = apply_b(st, &input).unwrap();
        prop_assert_eq!(&ax, &dense.a.mul_vec(&x));
        prop_assert_eq!(&bu, &dense.b.mul_vec(&input.to_dense(st).unwrap()));
        let (oa, ob) = oracle_products(n_k, n_k1, &x, &u);
        prop_assert_eq!(ax, oa);
        prop_assert_eq!(bu, ob);
    }

    #[test]
    fn incidence_columns_sum_to_zero(n_k in 0usize..10, grow in 0usize..6) {
        let st = ExpansionStep::new(n_k, n_k + grow).unwrap();
        let dense = materialize_dense(st, DEFAULT_DENSE_CAP).unwrap();
        prop_assert_eq!(dense.edge_count, st.edge_count());
        for c in 0..dense.edge_count {
            prop_assert_eq!(dense.b.column_sum(c), 0);
        }
    }

    #[test]
    fn flows_conserve_supply((n_k, n_k1, x, u) in case()) {
        let st = ExpansionStep::new(n_k, n_k1).unwrap();
        let bu = apply_b(st, &InputVector::new(u)).unwrap();
        prop_assert_eq!(bu.iter().sum::<i64>(), 0);
        prop_assert_eq!(output_y(&apply_a(st, &x).unwrap()), output_y(&x));
    }
}

#[test]
fn dense_refuses_past_cap() {
    let st = ExpansionStep::new(10, 70).unwrap();
    assert!(materialize_dense(st, DEFAULT_DENSE_CAP).is_err());
}

/// 200 blocks of random transfers and rewards, applied both by the ledger
/// and through `x(k+1) = A x + B u + μ v`; the balance vectors agree.
#[test]
fn ledger_and_lte_trajectories_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let schedule = RewardSchedule::Halving {
        initial_reward: 1_000,
        interval_length: 40,
        intervals: 10,
    };
    let rules = Rules::with_schedule(schedule.clone());
    let mut state = LedgerState::genesis();
    let mut x: Vec<i64> = Vec::new();
    let agents: Vec<AccountId> = (0..25).map(AccountId).collect();

    for k in 1..=200u64 {
        let txs = random_transfers(&state, &agents, &agents, rng.random_range(0..20), &mut rng);
        let winners: Vec<AccountId> = (0..rng.random_range(1..4))
            .map(|_| agents[rng.random_range(0..agents.len())])
            .collect();
        let reward = RewardEvent::new(schedule.mu(k), DistributionVector::uniform(winners));
        let block = TransactionBlock::new(k, txs, reward);

        let lowered = lower_block(&state, &block).unwrap();
        x = step(lowered.step, &x, &lowered.input, &lowered.reward).unwrap();
        state = apply_block(&state, &block, &rules).unwrap();

        assert_eq!(x, state.to_vector(), "diverged at block {k}");
        assert_eq!(output_y(&x) as u128, schedule.cumulative(k));
    }
    assert!(state.account_count() > 1);
}
