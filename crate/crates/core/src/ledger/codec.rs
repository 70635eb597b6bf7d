//! Canonical byte encoding of ledger objects and the block digest.
//!
//! Fields are written in declaration order. Integers are big-endian,
//! floats are their IEEE-754 bit patterns, and every sequence is prefixed by
//! its element count as a big-endian `u64`.

use std::fmt;

use sha2::{Digest as _, Sha256};

use crate::contract::Action;
use crate::reward::RewardEvent;

use super::{ActionRef, Block, LedgerState, StateDelta, Transaction, TransactionBlock};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..12])
    }
}

#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }

    pub fn len(&mut self, n: usize) {
        self.u64(n as u64);
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.len(b.len());
        self.buf.extend_from_slice(b);
    }
}

pub trait Canonical {
    fn encode(&self, e: &mut Encoder);

    fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        self.encode(&mut e);
        e.finish()
    }
}

impl Canonical for Action {
    fn encode(&self, e: &mut Encoder) {
        match self {
            Action::Send { from, to, amount } => {
                e.u8(0);
                e.u64(from.0);
                e.u64(to.0);
                e.u64(*amount);
            }
            Action::Touch { account } => {
                e.u8(1);
                e.u64(account.0);
            }
            Action::Set { account, value } => {
                e.u8(2);
                e.u64(account.0);
                e.f64(*value);
            }
            Action::Nop => e.u8(3),
        }
    }
}

impl Canonical for StateDelta {
    fn encode(&self, e: &mut Encoder) {
        e.u64(self.account.0);
        e.i64(self.delta);
        e.len(self.var_writes.len());
        for w in &self.var_writes {
            e.u32(w.contract.0);
            e.f64(w.value);
        }
    }
}

impl Canonical for Transaction {
    fn encode(&self, e: &mut Encoder) {
        e.u64(self.initiator.0);
        e.len(self.deltas.len());
        for d in &self.deltas {
            d.encode(e);
        }
        match &self.action {
            ActionRef::Transfer(t) => {
                e.u8(0);
                e.u64(t.from.0);
                e.u64(t.to.0);
                e.u64(t.amount);
            }
            ActionRef::Call {
                contract,
                method,
                action,
            } => {
                e.u8(1);
                e.u32(contract.0);
                e.u64(*method as u64);
                action.encode(e);
            }
        }
    }
}

impl Canonical for RewardEvent {
    fn encode(&self, e: &mut Encoder) {
        e.u64(self.mu);
        e.len(self.distribution.len());
        for (a, w) in self.distribution.weights() {
            e.u64(a.0);
            e.u64(*w.numer());
            e.u64(*w.denom());
        }
    }
}

impl Canonical for TransactionBlock {
    fn encode(&self, e: &mut Encoder) {
        e.u64(self.height);
        e.len(self.txs.len());
        for tx in &self.txs {
            tx.encode(e);
        }
        self.reward.encode(e);
    }
}

impl Canonical for LedgerState {
    fn encode(&self, e: &mut Encoder) {
        e.u64(self.height());
        e.len(self.account_count());
        for (id, acct) in self.accounts() {
            e.u64(id.0);
            e.i64(acct.balance);
            e.len(acct.contract_vars.len());
            for (c, v) in &acct.contract_vars {
                e.u32(c.0);
                e.f64(*v);
            }
        }
    }
}

impl Canonical for Block {
    fn encode(&self, e: &mut Encoder) {
        e.u64(self.txs.height);
        e.bytes(&self.parent_link.0);
        e.f64(self.work);
        self.txs.encode(e);
        self.state.encode(e);
    }
}
