use ledger_dynamics::ledger::LedgerState;
use ledger_dynamics::runner::run;
use ledger_dynamics::scenario::Scenario;
use ledger_dynamics::value::library::{self, Library};
use ledger_dynamics::value::{check, Coverage, Sampler, ValueFunctionSpec, ValueKind, Verdict};

fn big_domain(seed: u64) -> Sampler {
    Sampler {
        accounts: 6,
        max_balance: 50,
        depth: 3,
        seed,
        ..Sampler::default()
    }
}

#[test]
fn oversized_domains_are_sampled_reproducibly() {
    let v = library::positivity();
    let c = library::transfer_unguarded();
    let a = check(&v, &c, &big_domain(9), 2_000).unwrap();
    let b = check(&v, &c, &big_domain(9), 2_000).unwrap();
    assert_eq!(a.coverage, Coverage::Sampled);
    assert_eq!(a, b);
    assert!(a.witness().is_some());
}

#[test]
fn guarded_transfer_keeps_supply_under_sampling() {
    let r = check(&library::supply_invariant(), &library::transfer(), &big_domain(1), 5_000).unwrap();
    assert_eq!(r.coverage, Coverage::Sampled);
    assert!(r.passed());
}

#[test]
fn bad_method_breaks_contraction() {
    let r = check(
        &library::deviation(0.5, |_| 2.0),
        &library::deviation_halving_with_bad_method(|_| 2.0),
        &Sampler {
            accounts: 2,
            max_balance: 0,
            var_range: Some((-3, 3)),
            depth: 1,
            ..Sampler::default()
        },
        100_000,
    )
    .unwrap();
    let w = r.witness().expect("push-away widens the gap");
    assert_eq!(w.method, "push-away");
}

#[test]
fn rogue_writes_are_sandbox_violations() {
    let r = check(&library::supply_invariant(), &library::rogue(), &Sampler::default(), 10_000).unwrap();
    assert!(matches!(r.verdict, Verdict::SandboxViolation { .. }));
}

#[test]
fn user_checks_resolve_from_scenarios() {
    let mut lib = Library::builtin();
    lib.register_check("account-count", "identity", |_| {
        ValueFunctionSpec::new("account-count", ValueKind::Invariant(None), |x: &LedgerState| {
            x.account_count() as f64
        })
        .exact()
    });
    let s = Scenario::from_toml(
        "horizon = 4\n[agents]\ncount = 2\n[[checks]]\nname = \"account-count\"\n",
        &lib,
    )
    .unwrap();
    let out = run(&s, &lib).unwrap();
    assert!(out.success());
    assert_eq!(out.columns, ["account-count"]);
    assert!(Scenario::from_toml("horizon = 4\n[[checks]]\nname = \"account-count\"\n", &Library::builtin()).is_err());
}
