mod common;

use common::{brute_force, load, small_set};
use dalnot_core::clp::{parse_constraint, Constraint};
use dalnot_core::program::Layouts;
use dalnot_core::solver::{all_hold, Entailment, Solver, Verdict};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cs(src: &[&str]) -> Vec<Constraint> {
    src.iter()
        .map(|s| parse_constraint(s).unwrap_or_else(|e| panic!("{s}: {e}")))
        .collect()
}

fn plain() -> Solver {
    Solver::new(Layouts::default())
}

fn entails(s: &Solver, prem: &[&str], goal: &str) -> Entailment {
    s.entails(&cs(prem), &parse_constraint(goal).unwrap()).unwrap()
}

#[test]
fn strict_cycle_is_unsat() {
    assert_eq!(plain().satisfiable(&cs(&["X < Y", "Y < X"])).unwrap(), Verdict::Unsat);
}

#[test]
fn linear_entailments() {
    assert!(entails(&plain(), &["X = Y + 1", "Y = 2"], "X = 3").holds());
    match entails(&plain(), &["X < Y"], "X = Y") {
        Entailment::Fails(m) => assert!(all_hold(&cs(&["X < Y", "X != Y"]), &m).unwrap()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn read_over_write_axioms() {
    let s = plain();
    assert!(entails(&s, &["B = write(A,I,E)"], "read(B,I) = E").holds());
    assert!(entails(&s, &["B = write(A,I,E)", "I != J"], "read(B,J) = read(A,J)").holds());
    assert!(!entails(&s, &["B = write(A,I,E)"], "read(B,J) = read(A,J)").holds());
    assert!(entails(&s, &["B = write(A,I,read(A,I))"], "B = A").holds());
    // Extensionality: arrays that differ differ at some index.
    assert!(entails(&s, &["A != B", "read(A,0) = read(B,0)"], "A = write(A,0,read(B,0))").holds());
    assert_eq!(
        s.satisfiable(&cs(&["A != B", "B = write(A,K,read(A,K))"])).unwrap(),
        Verdict::Unsat
    );
}

#[test]
fn nested_reads_and_memories() {
    let s = plain();
    assert!(entails(
        &s,
        &["A1 = write(A,V,write(read(A,V),1,f(X)))"],
        "read(A1,V,1) = f(X)"
    )
    .holds());
    assert!(entails(&s, &["[A,I] = [B,J]"], "I = J").holds());
    assert_eq!(
        s.satisfiable(&cs(&["[A,I] = [B,J]", "read(A,1,2) != read(B,1,2)"])).unwrap(),
        Verdict::Unsat
    );
    assert_eq!(s.satisfiable(&cs(&["f(X) = g(Y)"])).unwrap(), Verdict::Unsat);
    assert_eq!(s.satisfiable(&cs(&["f(X) = f(Y)", "X < Y"])).unwrap(), Verdict::Unsat);
}

#[test]
fn layouts_restrict_field_slots() {
    let p = load("loops.dalsub");
    let s = Solver::new(p.layouts());
    assert!(entails(&s, &["read(O,0) = 'Loops'", "read(O,F) = i(X)"], "F = 1").holds());
    assert!(!entails(&plain(), &["read(O,0) = 'Loops'", "read(O,F) = i(X)"], "F = 1").holds());
    assert_eq!(
        s.satisfiable(&cs(&["read(O,0) = 'Activity'", "read(O,F) = i(X)"])).unwrap(),
        Verdict::Unsat
    );
}

/// The loop body of the running example under the guard V1 = V3 reads and
/// writes the same object twice.
#[test]
fn aliasing_chain() {
    let p = load("loops.dalsub");
    let s = Solver::new(p.layouts());
    let r = common::clause(common::GOLDEN_R);
    let mut prem: Vec<Constraint> = r.constraints.clone();
    prem.push(parse_constraint("V1 = V3").unwrap());
    for goal in ["Op = O1", "Fp = F", "Xp = X + 1", "V0p = X", "A2 = A"] {
        let e = s.entails(&prem, &parse_constraint(goal).unwrap()).unwrap();
        assert!(e.holds(), "{goal}: {e:?}");
    }
    let e = s.entails(&r.constraints, &parse_constraint("A2 = A").unwrap()).unwrap();
    assert!(matches!(e, Entailment::Fails(_)), "{e:?}");
}

fn agree(seed: u64) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = small_set(&mut rng);
    let truth = brute_force(&set);
    let got = plain().satisfiable(&set.constraints).unwrap();
    let text: Vec<String> = set.constraints.iter().map(|c| c.to_string()).collect();
    match got {
        Verdict::Sat(m) => {
            prop_assert!(all_hold(&set.constraints, &m).unwrap(), "bad model for {:?}", text);
            prop_assert!(truth.is_some(), "sat but oracle finds nothing: {:?}", text);
        }
        Verdict::Unsat => prop_assert!(truth.is_none(), "unsat but oracle has {:?}: {:?}", truth, text),
        Verdict::Unknown(_) => {}
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn agrees_with_brute_force(seed in any::<u64>()) {
        agree(seed)?;
    }
}
