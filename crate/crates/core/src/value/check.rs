use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CheckError, CheckReport, Coverage, ValueFunctionSpec, ValueKind, Verdict, Violation, Witness};
use crate::contract::{Action, ContractSpec, TransitionError};
use crate::ledger::{AccountId, Balance, LedgerState};

/// The state domain a checker quantifies over.
///
/// States hold accounts `0..accounts` with balances in `0..=max_balance`
/// and, when `var_range` is set, the contract's variable on every account
/// set to an integer in that range. From each start state the checker
/// follows `depth` transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    pub accounts: u64,
    pub max_balance: Balance,
    pub var_range: Option<(i64, i64)>,
    pub height: u64,
    pub depth: usize,
    pub seed: u64,
    /// Extra multi-step runs for contraction checks.
    pub trajectories: usize,
    pub trajectory_len: usize,
}

impl Default for Sampler {
    fn default() -> Self {
        Self {
            accounts: 3,
            max_balance: 4,
            var_range: None,
            height: 0,
            depth: 2,
            seed: 0,
            trajectories: 0,
            trajectory_len: 30,
        }
    }
}

impl Sampler {
    fn var_values(&self) -> Vec<Option<f64>> {
        match self.var_range {
            Some((lo, hi)) => (lo..=hi).map(|v| Some(v as f64)).collect(),
            None => vec![None],
        }
    }

    /// Number of start states in the domain, if it fits in a `u64`.
    pub fn state_count(&self) -> Option<u64> {
        let per_account = (self.max_balance.max(0) as u64 + 1)
            .checked_mul(self.var_values().len() as u64)?;
        per_account.checked_pow(u32::try_from(self.accounts).ok()?)
    }

    fn build(&self, contract: &ContractSpec, choices: &[(Balance, Option<f64>)]) -> LedgerState {
        let mut state = LedgerState::genesis().with_height(self.height);
        for (i, (b, z)) in choices.iter().enumerate() {
            let id = AccountId(i as u64);
            state.insert_account(id, *b);
            if let Some(z) = z {
                state.set_var(contract.id, id, *z);
            }
        }
        state
    }

    fn random_state<R: Rng>(&self, contract: &ContractSpec, rng: &mut R) -> LedgerState {
        let vars = self.var_values();
        let choices: Vec<(Balance, Option<f64>)> = (0..self.accounts)
            .map(|_| {
                let b = rng.random_range(0..=self.max_balance.max(0));
                let z = vars[rng.random_range(0..vars.len())];
                (b, z)
            })
            .collect();
        self.build(contract, &choices)
    }
}

type Judge<'a> = dyn Fn(f64, f64) -> Option<Violation> + 'a;

enum Step {
    Ok(LedgerState),
    Fail(Verdict),
}

fn step(
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    judge: &Judge<'_>,
    state: &LedgerState,
    method: usize,
    action: &Action,
) -> Step {
    let name = contract.methods[method].name().to_owned();
    let after = match contract.transition(method, action, state) {
        Ok(s) => s,
        Err(TransitionError::Sandbox(e)) => {
            return Step::Fail(Verdict::SandboxViolation {
                method: name,
                action: action.clone(),
                error: e.to_string(),
            })
        }
        // Not a legal action here; nothing to judge.
        Err(_) => return Step::Ok(state.clone()),
    };
    let (before_v, after_v) = (v.eval(state), v.eval(&after));
    let violation = if !(before_v >= 0.0 && after_v >= 0.0) {
        Some(Violation::Negative)
    } else {
        judge(before_v, after_v)
    };
    match violation {
        Some(violation) => Step::Fail(Verdict::Counterexample(Witness {
            state: state.clone(),
            method: name,
            method_index: method,
            action: action.clone(),
            v_before: before_v,
            v_after: after_v,
            violation,
        })),
        None => Step::Ok(after),
    }
}

/// Greedily moves balances, variables and amounts toward zero while the
/// transition keeps failing.
fn shrink(
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    judge: &Judge<'_>,
    mut witness: Witness,
) -> Witness {
    fn toward_zero(x: i64) -> Vec<i64> {
        let mut out = vec![0, x / 2, x - x.signum()];
        out.retain(|c| *c != x);
        out.dedup();
        out
    }
    loop {
        let mut candidates: Vec<(LedgerState, Action)> = Vec::new();
        let ids: Vec<AccountId> = witness.state.account_ids().collect();
        for id in &ids {
            let b = witness.state.balance(*id).unwrap_or(0);
            for c in toward_zero(b) {
                let mut s = witness.state.clone();
                s.insert_account(*id, c);
                candidates.push((s, witness.action.clone()));
            }
            if let Some(z) = witness.state.var(contract.id, *id) {
                if z.fract() == 0.0 && z.abs() < 1e15 {
                    for c in toward_zero(z as i64) {
                        let mut s = witness.state.clone();
                        s.set_var(contract.id, *id, c as f64);
                        candidates.push((s, witness.action.clone()));
                    }
                }
            }
        }
        if let Action::Send { from, to, amount } = witness.action {
            for c in toward_zero(amount as i64) {
                if c > 0 {
                    candidates.push((
                        witness.state.clone(),
                        Action::Send {
                            from,
                            to,
                            amount: c as u64,
                        },
                    ));
                }
            }
        }
        let method = &contract.methods[witness.method_index];
        let better = candidates.into_iter().find_map(|(s, a)| {
            if !method.admits(&s, &a) {
                return None;
            }
            match step(v, contract, judge, &s, witness.method_index, &a) {
                Step::Fail(Verdict::Counterexample(w)) if w.violation == witness.violation => Some(w),
                _ => None,
            }
        });
        match better {
            Some(w) => witness = w,
            None => return witness,
        }
    }
}

fn finish(
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    judge: &Judge<'_>,
    verdict: Verdict,
) -> Verdict {
    match verdict {
        Verdict::Counterexample(w) => Verdict::Counterexample(shrink(v, contract, judge, w)),
        other => other,
    }
}

enum Exhaustive {
    Done(Verdict, u64),
    TooLarge,
}

fn exhaustive(
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    judge: &Judge<'_>,
    sampler: &Sampler,
    budget: u64,
) -> Exhaustive {
    match sampler.state_count() {
        Some(n) if n <= budget => {}
        _ => return Exhaustive::TooLarge,
    }
    let vars = sampler.var_values();
    let radix = (sampler.max_balance.max(0) as usize + 1) * vars.len();
    let n = sampler.accounts as usize;
    let mut digits = vec![0usize; n];
    let mut trials = 0u64;

    fn explore(
        v: &ValueFunctionSpec,
        contract: &ContractSpec,
        judge: &Judge<'_>,
        state: &LedgerState,
        depth: usize,
        trials: &mut u64,
        budget: u64,
    ) -> Result<Option<Verdict>, ()> {
        if depth == 0 {
            return Ok(None);
        }
        for (i, m) in contract.methods.iter().enumerate() {
            let actions = m.actions(state).ok_or(())?;
            for a in actions {
                *trials += 1;
                if *trials > budget {
                    return Err(());
                }
                match step(v, contract, judge, state, i, &a) {
                    Step::Fail(verdict) => return Ok(Some(verdict)),
                    Step::Ok(next) => {
                        if let Some(verdict) =
                            explore(v, contract, judge, &next, depth - 1, trials, budget)?
                        {
                            return Ok(Some(verdict));
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    loop {
        let choices: Vec<(Balance, Option<f64>)> = digits
            .iter()
            .map(|d| ((d / vars.len()) as Balance, vars[d % vars.len()]))
            .collect();
        let state = sampler.build(contract, &choices);
        match explore(v, contract, judge, &state, sampler.depth, &mut trials, budget) {
            Err(()) => return Exhaustive::TooLarge,
            Ok(Some(verdict)) => return Exhaustive::Done(verdict, trials),
            Ok(None) => {}
        }
        // Next state in mixed-radix order.
        let mut i = 0;
        loop {
            if i == n {
                return Exhaustive::Done(Verdict::Pass, trials);
            }
            digits[i] += 1;
            if digits[i] < radix {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn random_move<R: Rng>(
    contract: &ContractSpec,
    state: &LedgerState,
    rng: &mut R,
) -> Option<(usize, Action)> {
    let n = contract.methods.len();
    if n == 0 {
        return None;
    }
    let first = rng.random_range(0..n);
    (0..n).map(|o| (first + o) % n).find_map(|i| {
        contract.methods[i]
            .sample(state, rng)
            .map(|a| (i, a))
    })
}

fn sampled(
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    judge: &Judge<'_>,
    sampler: &Sampler,
    budget: u64,
) -> (Verdict, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut trials = 0u64;
    let mut idle_starts = 0;
    while trials < budget && idle_starts < 1_000 {
        let mut state = sampler.random_state(contract, &mut rng);
        let mut moved = false;
        for _ in 0..sampler.depth.max(1) {
            let Some((i, a)) = random_move(contract, &state, &mut rng) else {
                break;
            };
            moved = true;
            trials += 1;
            match step(v, contract, judge, &state, i, &a) {
                Step::Fail(verdict) => return (verdict, trials),
                Step::Ok(next) => state = next,
            }
            if trials >= budget {
                break;
            }
        }
        idle_starts = if moved { 0 } else { idle_starts + 1 };
    }
    (Verdict::Pass, trials)
}

fn run(
    name: &str,
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    judge: &Judge<'_>,
    sampler: &Sampler,
    budget: u64,
) -> CheckReport {
    let (verdict, trials, coverage) = match exhaustive(v, contract, judge, sampler, budget) {
        Exhaustive::Done(verdict, trials) => (verdict, trials, Coverage::Exhaustive),
        Exhaustive::TooLarge => {
            let (verdict, trials) = sampled(v, contract, judge, sampler, budget);
            (verdict, trials, Coverage::Sampled)
        }
    };
    CheckReport {
        check: name.to_owned(),
        verdict: finish(v, contract, judge, verdict),
        trials,
        coverage,
        trajectories: 0,
    }
}

/// `V(f_l(u, x)) = V(x)` for every method and legal action.
pub fn check_invariant(
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    sampler: &Sampler,
    budget: u64,
) -> Result<CheckReport, CheckError> {
    let ValueKind::Invariant(constant) = v.kind else {
        return Err(CheckError::NotInvariantKind(v.name.clone()));
    };
    let judge = move |before: f64, after: f64| {
        if !v.eq(before, after) {
            Some(Violation::Changed)
        } else if constant.is_some_and(|c| !v.eq(after, c)) {
            Some(Violation::OffConstant)
        } else {
            None
        }
    };
    Ok(run(&v.name, v, contract, &judge, sampler, budget))
}

/// `V(f_l(u, x)) ≥ (1 + ε) V(x)` for every method and legal action.
pub fn check_monotone(
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    sampler: &Sampler,
    budget: u64,
) -> Result<CheckReport, CheckError> {
    let ValueKind::Monotone { epsilon } = v.kind else {
        return Err(CheckError::NotMonotoneKind(v.name.clone()));
    };
    let judge = move |before: f64, after: f64| {
        (!v.le((1.0 + epsilon) * before, after)).then_some(Violation::NotIncreased)
    };
    Ok(run(&v.name, v, contract, &judge, sampler, budget))
}

/// `V(f_l(u, x)) ≤ γ V(x)` for every method and legal action, plus
/// `V(x(k)) ≤ γ^k V(x(0))` along random trajectories.
pub fn check_contractive(
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    sampler: &Sampler,
    budget: u64,
) -> Result<CheckReport, CheckError> {
    let gamma = match v.kind {
        ValueKind::Contractive { gamma } | ValueKind::Controller { gamma, .. } => gamma,
        _ => return Err(CheckError::NotContractiveKind(v.name.clone())),
    };
    if !(0.0..1.0).contains(&gamma) {
        return Err(CheckError::BadGamma(gamma));
    }
    let judge =
        move |before: f64, after: f64| (!v.le(after, gamma * before)).then_some(Violation::NotContracted);
    let mut report = run(&v.name, v, contract, &judge, sampler, budget);
    if !report.passed() || sampler.trajectories == 0 {
        return Ok(report);
    }

    // Trajectories draw from their own stream so single-step sampling is
    // unaffected by how many are requested.
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed ^ 0x7472_616a_6563_7473);
    for _ in 0..sampler.trajectories {
        report.trajectories += 1;
        let mut state = sampler.random_state(contract, &mut rng);
        let v0 = v.eval(&state);
        let mut bound = v0;
        for _ in 0..sampler.trajectory_len {
            let Some((i, a)) = random_move(contract, &state, &mut rng) else {
                break;
            };
            bound *= gamma;
            let next = match contract.transition(i, &a, &state) {
                Ok(next) => next,
                Err(TransitionError::Sandbox(e)) => {
                    report.verdict = Verdict::SandboxViolation {
                        method: contract.methods[i].name().to_owned(),
                        action: a,
                        error: e.to_string(),
                    };
                    return Ok(report);
                }
                Err(_) => break,
            };
            let vk = v.eval(&next);
            if !v.le(vk, bound) {
                report.verdict = Verdict::Counterexample(Witness {
                    v_before: v.eval(&state),
                    v_after: vk,
                    state,
                    method: contract.methods[i].name().to_owned(),
                    method_index: i,
                    action: a,
                    violation: Violation::TrajectoryBound,
                });
                return Ok(report);
            }
            state = next;
        }
    }
    Ok(report)
}

/// Dispatches on the declared kind; controllers are checked for contraction.
pub fn check(
    v: &ValueFunctionSpec,
    contract: &ContractSpec,
    sampler: &Sampler,
    budget: u64,
) -> Result<CheckReport, CheckError> {
    match v.kind {
        ValueKind::Invariant(_) => check_invariant(v, contract, sampler, budget),
        ValueKind::Monotone { .. } => check_monotone(v, contract, sampler, budget),
        ValueKind::Contractive { .. } | ValueKind::Controller { .. } => {
            check_contractive(v, contract, sampler, budget)
        }
    }
}
