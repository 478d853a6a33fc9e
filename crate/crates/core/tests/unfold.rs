mod common;

use common::{clause, corresponds, load, random_query, FIXTURES, GOLDEN_R, GOLDEN_R_PRIME};
use dalnot_core::clp::{clauses_isomorphic, Clause};
use dalnot_core::compile::compile_program;
use dalnot_core::interp::HeapObject;
use dalnot_core::program::DalvikProgram;
use dalnot_core::solver::Solver;
use dalnot_core::unfold::{
    binary_unfold, derive, simplify_clause, DeriveStatus, Query, UnfoldLimits,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn compiled(name: &str) -> (DalvikProgram, Vec<Clause>) {
    let p = load(name);
    let c = compile_program(&p).unwrap().clauses;
    (p, c)
}

fn limits(depth: usize) -> UnfoldLimits {
    UnfoldLimits {
        depth,
        ..UnfoldLimits::default()
    }
}

#[test]
fn loop_derivation_never_ends() {
    let (p, c) = compiled("loops.dalsub");
    let d = derive(&p, &c, &Query::new(10, vec![0; 5], vec![]), 200);
    assert_eq!(d.status, DeriveStatus::BudgetExhausted);
    assert_eq!(d.trace.len(), 200);
    let init = p.find_method("Loops.<init>/0").map(|m| p.method(m).entry).unwrap();
    let mut prefix = vec![10, 11, init, 12, 13, 14];
    prefix.extend([0, 1, 3, 4, 5, 6, 7, 8, 9, 0]);
    assert_eq!(d.trace[..prefix.len()], prefix[..]);
}

#[test]
fn null_receiver_fails() {
    let (p, c) = compiled("loops.dalsub");
    let d = derive(&p, &c, &Query::new(14, vec![0, 0, 2, 0, 0], vec![]), 50);
    assert_eq!(d.status, DeriveStatus::Failure);
    assert_eq!(d.trace, [14]);
}

#[test]
fn return_succeeds_at_once() {
    let (p, c) = compiled("loops.dalsub");
    let d = derive(&p, &c, &Query::new(15, vec![0; 5], vec![]), 50);
    assert_eq!(d.status, DeriveStatus::Success);
    assert_eq!(d.trace, [15]);
}

#[test]
fn noalias_halts_after_two_rounds() {
    let (p, c) = compiled("loops_noalias.dalsub");
    let d = derive(&p, &c, &Query::new(10, vec![0; 5], vec![]), 1000);
    assert_eq!(d.status, DeriveStatus::Success);
    assert_eq!(d.trace.iter().filter(|&&q| q == 1).count(), 3);
}

#[test]
fn dispatch_follows_overrides() {
    let (p, c) = compiled("dispatch.dalsub");
    let q = Query::new(8, vec![0; 4], vec![]);
    corresponds(&p, &c, &q, 100).unwrap();
    let d = derive(&p, &c, &q, 100);
    assert_eq!(d.status, DeriveStatus::Success);
    // Square.grow at 4..7 once, Shape.grow at 0..3 twice.
    assert_eq!(d.trace.iter().filter(|&&q| q == 4).count(), 1);
    assert_eq!(d.trace.iter().filter(|&&q| q == 0).count(), 2);
}

#[test]
fn seeded_heap_is_read_back() {
    let (p, c) = compiled("loops.dalsub");
    let mut o = HeapObject::new(&p, "Loops").unwrap();
    o.fields.insert("i".into(), 5);
    // m with this.i = 5 >= 2 returns right away.
    let q = Query::new(0, vec![0, 1, 2, 1], vec![o]);
    let d = derive(&p, &c, &q, 50);
    assert_eq!(d.status, DeriveStatus::Success);
    assert_eq!(d.trace, [0, 1, 2]);
}

#[test]
fn golden_clauses_are_unfoldings() {
    let (p, c) = compiled("loops.dalsub");
    let u = binary_unfold(&p, &c, limits(12));
    assert!(!u.incomplete);
    let layouts = p.layouts();
    for text in [GOLDEN_R, GOLDEN_R_PRIME] {
        let want = simplify_clause(&clause(text), &layouts).unwrap();
        assert!(
            u.clauses.iter().any(|c| clauses_isomorphic(c, &want).is_some()),
            "missing {want}"
        );
    }
}

#[test]
fn unfoldings_are_satisfiable_and_binary() {
    for name in FIXTURES {
        let (p, c) = compiled(name);
        let solver = Solver::new(p.layouts());
        for b in binary_unfold(&p, &c, limits(6)).clauses {
            assert!(b.body.len() <= 1);
            let v = solver.satisfiable(&b.constraints).unwrap();
            assert!(v.is_sat(), "{name}: {b} {v:?}");
        }
    }
}

#[test]
fn deeper_unfolding_keeps_every_clause() {
    for name in FIXTURES {
        let (p, c) = compiled(name);
        let mut prev = binary_unfold(&p, &c, limits(1)).clauses;
        for d in 2..=8 {
            let next = binary_unfold(&p, &c, limits(d)).clauses;
            for b in &prev {
                assert!(
                    next.iter().any(|n| clauses_isomorphic(n, b).is_some()),
                    "{name}: depth {d} lost {b}"
                );
            }
            prev = next;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivations_follow_the_interpreter(seed in any::<u64>(), budget in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for name in FIXTURES {
            let (p, c) = compiled(name);
            let q = random_query(&p, &mut rng);
            if let Err(e) = corresponds(&p, &c, &q, budget) {
                prop_assert!(false, "{}: {}", name, e);
            }
        }
    }
}
