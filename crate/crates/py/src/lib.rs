//! Python bindings: reward schedule, LTE operators, a ledger handle and the
//! scenario runner.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use ledger_dynamics::ledger::{apply_block, AccountId, LedgerState, Rules, Transaction, TransactionBlock};
use ledger_dynamics::lte::{self, ExpansionStep, FlowAction, InputVector};
use ledger_dynamics::reward::{self, DistributionVector, RewardEvent, RewardSchedule};
use ledger_dynamics::runner;
use ledger_dynamics::scenario::{Scenario, TraceFormat};
use ledger_dynamics::trace::write_trace;
use ledger_dynamics::value::library::Library;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Bitcoin's terminal supply in base units.
#[pyfunction]
fn total_supply_limit() -> u64 {
    reward::total_supply_limit()
}

/// Bitcoin's block reward at height `k`.
#[pyfunction]
fn mu(k: u64) -> u64 {
    reward::mu(k)
}

/// Splits `mu` over `(account, numerator, denominator)` weights.
#[pyfunction]
fn allocate(mu: u64, weights: Vec<(u64, u64, u64)>) -> PyResult<Vec<(u64, u64)>> {
    let dist = DistributionVector::from_weights(weights.into_iter().map(|(a, n, d)| (AccountId(a), n, d)))
        .map_err(value_err)?;
    Ok(reward::allocate(mu, &dist)
        .map_err(value_err)?
        .into_iter()
        .map(|(a, v)| (a.0, v))
        .collect())
}

#[pyfunction]
fn apply_a(n_k: usize, n_k1: usize, x: Vec<i64>) -> PyResult<Vec<i64>> {
    let step = ExpansionStep::new(n_k, n_k1).map_err(value_err)?;
    lte::apply_a(step, &x).map_err(value_err)
}

/// `B u` for sends given as `(from, to, amount)` index triples.
#[pyfunction]
fn apply_b(n_k: usize, n_k1: usize, sends: Vec<(usize, usize, u64)>) -> PyResult<Vec<i64>> {
    let step = ExpansionStep::new(n_k, n_k1).map_err(value_err)?;
    let u = InputVector::new(sends.into_iter().map(|(i, j, a)| FlowAction::new(i, j, a)).collect());
    lte::apply_b(step, &u).map_err(value_err)
}

/// A ledger state that blocks are applied to in place.
#[pyclass]
struct Ledger {
    state: LedgerState,
    rules: Rules,
}

#[pymethods]
impl Ledger {
    /// `balances` maps account ids to opening balances. With `bitcoin`,
    /// every block must mint exactly the scheduled reward.
    #[new]
    #[pyo3(signature = (balances = Vec::new(), bitcoin = false))]
    fn new(balances: Vec<(u64, i64)>, bitcoin: bool) -> Self {
        Self {
            state: LedgerState::from_balances(balances.into_iter().map(|(a, b)| (AccountId(a), b))),
            rules: if bitcoin {
                Rules::with_schedule(RewardSchedule::bitcoin())
            } else {
                Rules::default()
            },
        }
    }

    #[getter]
    fn height(&self) -> u64 {
        self.state.height()
    }

    #[getter]
    fn total(&self) -> i64 {
        self.state.total()
    }

    fn __len__(&self) -> usize {
        self.state.account_count()
    }

    fn balance(&self, account: u64) -> PyResult<i64> {
        self.state
            .balance(AccountId(account))
            .ok_or_else(|| PyKeyError::new_err(account))
    }

    fn balances(&self) -> Vec<i64> {
        self.state.to_vector()
    }

    /// Applies the next block: `sends` as `(from, to, amount)` and, when
    /// `reward > 0`, the reward paid to `miner`. Invalid blocks raise
    /// `ValueError` and leave the ledger unchanged.
    #[pyo3(signature = (sends, reward = 0, miner = 0))]
    fn apply_block(&mut self, sends: Vec<(u64, u64, u64)>, reward: u64, miner: u64) -> PyResult<()> {
        let txs = sends
            .into_iter()
            .map(|(f, t, a)| Transaction::transfer(AccountId(f), AccountId(t), a))
            .collect();
        let event = if reward > 0 {
            RewardEvent::to_miner(reward, AccountId(miner))
        } else {
            RewardEvent::none()
        };
        let block = TransactionBlock::new(self.state.height() + 1, txs, event);
        self.state = apply_block(&self.state, &block, &self.rules).map_err(value_err)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!(
            "Ledger(height={}, accounts={}, total={})",
            self.state.height(),
            self.state.account_count(),
            self.state.total()
        )
    }
}

/// Runs a TOML scenario. Returns `(trace, success)`; the trace is CSV
/// unless `jsonl` is set.
#[pyfunction]
#[pyo3(signature = (toml, seed = None, jsonl = false))]
fn run_scenario(toml: &str, seed: Option<u64>, jsonl: bool) -> PyResult<(String, bool)> {
    let library = Library::builtin();
    let mut scenario = Scenario::from_toml(toml, &library).map_err(value_err)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let outcome = runner::run(&scenario, &library).map_err(value_err)?;
    let format = if jsonl { TraceFormat::Jsonl } else { TraceFormat::Csv };
    let mut buf = Vec::new();
    write_trace(&mut buf, format, &outcome.columns, &outcome.records).map_err(value_err)?;
    Ok((String::from_utf8(buf).map_err(value_err)?, outcome.success()))
}

#[pymodule]
fn pyledger(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(total_supply_limit, m)?)?;
    m.add_function(wrap_pyfunction!(mu, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(apply_a, m)?)?;
    m.add_function(wrap_pyfunction!(apply_b, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_class::<Ledger>()?;
    Ok(())
}
