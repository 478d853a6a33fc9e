mod common;

use common::{clause, load, GOLDEN_R, GOLDEN_R_PRIME};
use dalnot_core::clp::{clauses_isomorphic, Constraint, Term};
use dalnot_core::interp::{run_from, state_at, HeapObject, RunStatus};
use dalnot_core::nonterm::{analyze, AnalyzeOptions, Check, Checker, Outcome, Template};
use dalnot_core::program::parse_program;
use dalnot_core::unfold::{derive, simplify_clause, DeriveStatus, Query};

fn v(k: usize) -> Term {
    Term::var(&format!("V{k}"))
}

#[test]
fn aliased_loop_diverges_with_equal_registers() {
    let p = load("loops.dalsub");
    let (report, witness) = analyze(&p, Some(10), AnalyzeOptions::default()).unwrap();
    assert_eq!(report.verdict, Outcome::Diverges);
    assert_eq!(report.entry_point, Some(10));
    let w = witness.unwrap();
    assert_eq!(w.template, Template(vec![Constraint::eq(v(1), v(3))]));
    let layouts = p.layouts();
    let r = simplify_clause(&clause(GOLDEN_R), &layouts).unwrap();
    let rp = simplify_clause(&clause(GOLDEN_R_PRIME), &layouts).unwrap();
    assert!(clauses_isomorphic(&w.r, &r).is_some(), "{}", w.r);
    assert!(clauses_isomorphic(&w.r_prime, &rp).is_some(), "{}", w.r_prime);
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["verdict"], "diverges");
    assert_eq!(json["entry_point"], 10);
    assert_eq!(json["witness"]["template"], "V1 = V3");
    assert!(report.text().contains("template: V1 = V3"));
}

#[test]
fn golden_witness_checks() {
    let p = load("loops.dalsub");
    let layouts = p.layouts();
    let r = simplify_clause(&clause(GOLDEN_R), &layouts).unwrap();
    let rp = simplify_clause(&clause(GOLDEN_R_PRIME), &layouts).unwrap();
    let checker = Checker::new(layouts);
    let same = Template(vec![Constraint::eq(v(1), v(3))]);
    assert_eq!(checker.check_witness(&r, &rp, &same), Check::Verified);
    let apart = Template(vec![Constraint::ne(v(1), v(3))]);
    assert!(!checker.check_witness(&r, &rp, &apart).is_verified());
    assert!(!checker.check_recurrence(&r, &apart).is_verified());
    assert!(!checker.check_recurrence(&r, &Template::truth()).is_verified());
}

/// With two distinct objects the loop in m exits: states with V1 != V3 are
/// not recurrent.
#[test]
fn distinct_objects_leave_the_loop() {
    let p = load("loops.dalsub");
    let a = HeapObject::new(&p, "Loops").unwrap();
    let b = HeapObject::new(&p, "Loops").unwrap();
    let s = state_at(&p, 0, vec![0, 1, 2, 2], vec![a, b]).unwrap();
    let run = run_from(&p, s, 1000).unwrap();
    assert_eq!(run.status, RunStatus::Halted);
}

#[test]
fn noalias_variant_gets_no_witness() {
    let p = load("loops_noalias.dalsub");
    let (report, witness) = analyze(&p, Some(10), AnalyzeOptions::default()).unwrap();
    assert_eq!(report.verdict, Outcome::Unknown);
    assert!(witness.is_none());
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["verdict"], "unknown");
    assert!(json["witness"].is_null());
}

#[test]
fn terminating_programs_stay_unknown() {
    for name in ["counter.dalsub", "dispatch.dalsub", "fields.dalsub"] {
        let p = load(name);
        let (report, _) = analyze(&p, None, AnalyzeOptions::default()).unwrap();
        assert_eq!(report.verdict, Outcome::Unknown, "{name}");
    }
    let p = parse_program(
        "class C { method m(0) registers 2 { 0: const v0, 1\n 1: add-int/lit8 v1, v0, 1\n 2: return-void } }",
    )
    .unwrap();
    let (report, _) = analyze(&p, None, AnalyzeOptions::default()).unwrap();
    assert_eq!(report.verdict, Outcome::Unknown);
}

#[test]
fn witness_replays_forever() {
    let p = load("loops.dalsub");
    let (_, witness) = analyze(&p, Some(10), AnalyzeOptions::default()).unwrap();
    let w = witness.unwrap();
    let pair = [w.r_prime.clone(), w.r.clone()];
    let d = derive(&p, &pair, &Query::new(10, vec![0; 5], vec![]), 1000);
    assert_eq!(d.status, DeriveStatus::BudgetExhausted);
    assert_eq!(d.trace.len(), 1000);
    assert!(d.trace[1..].iter().all(|&q| q == 0));
}

#[test]
fn report_text_is_stable() {
    let p = load("loops.dalsub");
    let a = analyze(&p, Some(10), AnalyzeOptions::default()).unwrap().0.text();
    let b = analyze(&p, Some(10), AnalyzeOptions::default()).unwrap().0.text();
    assert_eq!(a, b);
}
