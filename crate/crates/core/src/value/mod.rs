//! Value functions `V: X → R+` and checkers for the properties they encode.
//!
//! A [`ValueFunctionSpec`] pairs an evaluator with the property it is meant
//! to have under a contract's methods: invariance, monotone growth,
//! contraction, or tracking of a target through a Lyapunov controller.
//! Checkers either enumerate a small finite domain exhaustively or draw
//! seeded samples, and say which they did.

mod check;
mod controller;
pub mod library;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::contract::Action;
use crate::ledger::LedgerState;

pub use check::{check, check_contractive, check_invariant, check_monotone, Sampler};
pub use controller::{
    check_controller, run_controller, ActionPolicy, ControllerRecord, ControllerRun, ControllerTrace, Driver,
    RandomPolicy,
};

/// Default relative tolerance for real-valued comparisons.
pub const REL_TOL: f64 = 1e-9;

pub type Evaluate = Arc<dyn Fn(&LedgerState) -> f64 + Send + Sync>;
/// Target trajectory `y*(k)` indexed by block height.
pub type Target = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ValueKind {
    /// `V(f(u, x)) = V(x)`; with `Some(c)`, also `V = c` everywhere checked.
    Invariant(Option<f64>),
    /// `V(f(u, x)) ≥ (1 + ε) V(x)`.
    Monotone { epsilon: f64 },
    /// `V(f(u, x)) ≤ γ V(x)` with `γ ∈ [0, 1)`.
    Contractive { gamma: f64 },
    /// `V(x) = |g(x) − y*(k)|`, driven to zero at rate `γ`.
    Controller {
        output: Evaluate,
        target: Target,
        gamma: f64,
    },
}

impl fmt::Debug for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueKind::Invariant(c) => f.debug_tuple("Invariant").field(c).finish(),
            ValueKind::Monotone { epsilon } => {
                f.debug_struct("Monotone").field("epsilon", epsilon).finish()
            }
            ValueKind::Contractive { gamma } => {
                f.debug_struct("Contractive").field("gamma", gamma).finish()
            }
            ValueKind::Controller { gamma, .. } => {
                f.debug_struct("Controller").field("gamma", gamma).finish_non_exhaustive()
            }
        }
    }
}

/// A named value function and the property it should satisfy.
#[derive(Clone)]
pub struct ValueFunctionSpec {
    pub name: String,
    pub evaluate: Evaluate,
    pub kind: ValueKind,
    /// `V` only takes integer values, so comparisons are exact.
    pub exact: bool,
}

impl fmt::Debug for ValueFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValueFunctionSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("exact", &self.exact)
            .finish_non_exhaustive()
    }
}

impl ValueFunctionSpec {
    pub fn new(
        name: impl Into<String>,
        kind: ValueKind,
        evaluate: impl Fn(&LedgerState) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            evaluate: Arc::new(evaluate),
            kind,
            exact: false,
        }
    }

    /// A controller value function `|g(x) − y*(height)|`.
    pub fn controller(
        name: impl Into<String>,
        gamma: f64,
        output: impl Fn(&LedgerState) -> f64 + Send + Sync + 'static,
        target: impl Fn(u64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let output: Evaluate = Arc::new(output);
        let target: Target = Arc::new(target);
        let (g, y) = (Arc::clone(&output), Arc::clone(&target));
        Self {
            name: name.into(),
            evaluate: Arc::new(move |x: &LedgerState| (g(x) - y(x.height())).abs()),
            kind: ValueKind::Controller {
                output,
                target,
                gamma,
            },
            exact: false,
        }
    }

    pub fn exact(mut self) -> Self {
        self.exact = true;
        self
    }

    /// The same evaluator judged against a different property.
    pub fn with_kind(&self, kind: ValueKind) -> Self {
        Self {
            kind,
            ..self.clone()
        }
    }

    pub fn eval(&self, state: &LedgerState) -> f64 {
        (self.evaluate)(state)
    }

    pub(crate) fn eq(&self, a: f64, b: f64) -> bool {
        if self.exact {
            a == b
        } else {
            (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
        }
    }

    /// `a ≤ b`, up to tolerance.
    pub(crate) fn le(&self, a: f64, b: f64) -> bool {
        if self.exact {
            a <= b
        } else {
            a <= b + REL_TOL * b.abs()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Violation {
    /// An invariant changed value.
    Changed,
    /// An invariant left its declared constant.
    OffConstant,
    /// Fell short of `(1 + ε) V(x)`.
    NotIncreased,
    /// Exceeded `γ V(x)`.
    NotContracted,
    /// A trajectory exceeded `γ^k V(x(0))`.
    TrajectoryBound,
    /// `V` was negative or not a number.
    Negative,
}

/// A transition that breaks the property, with the values that show it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub state: LedgerState,
    pub method: String,
    pub method_index: usize,
    pub action: Action,
    pub v_before: f64,
    pub v_after: f64,
    pub violation: Violation,
}

impl Witness {
    /// Re-runs the transition and re-evaluates `V` on both sides.
    pub fn replay(
        &self,
        v: &ValueFunctionSpec,
        contract: &crate::contract::ContractSpec,
    ) -> Result<(f64, f64), crate::contract::TransitionError> {
        let after = contract.transition(self.method_index, &self.action, &self.state)?;
        Ok((v.eval(&self.state), v.eval(&after)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Counterexample(Witness),
    /// A method tried to write outside its own contract.
    SandboxViolation {
        method: String,
        action: Action,
        error: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coverage {
    /// Every state of the declared domain and every legal action sequence.
    Exhaustive,
    /// Seeded random samples; a pass is evidence, not proof.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub verdict: Verdict,
    /// Transitions examined.
    pub trials: u64,
    pub coverage: Coverage,
    /// Multi-step trajectories examined (contraction only).
    pub trajectories: u64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.verdict {
            Verdict::Counterexample(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("value function {0} is not declared invariant")]
    NotInvariantKind(String),
    #[error("value function {0} is not declared monotone")]
    NotMonotoneKind(String),
    #[error("value function {0} is not declared contractive")]
    NotContractiveKind(String),
    #[error("contract does not contract {}: {:?}", .0.check, .0.verdict)]
    UncontractiveContract(Box<CheckReport>),
    #[error("contraction rate {0} is outside [0, 1)")]
    BadGamma(f64),
    #[error("controller step {step}: {reason}")]
    Step { step: u64, reason: String },
}
