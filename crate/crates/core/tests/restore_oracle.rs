mod common;

use proptest::prelude::*;

use common::{replay_oracle, restore_case_strategy, tree_of, EnvBuilder, RestoreCase};
use pbo_core::histories::{BorrowId, BorrowPath, History};
use pbo_core::sem_den::restore_by_history;
use pbo_core::syntax::FreshSupply;

fn restore_tree(case: &RestoreCase) -> Result<common::V, ()> {
    let root = BorrowPath::new(BorrowId(0));
    let mut b = EnvBuilder::new();
    let v = b.bind(&case.value);
    let mut recs = Vec::new();
    for (ix, content) in &case.records {
        let mut p = root.clone();
        for i in ix {
            p = p.child(*i);
        }
        recs.push((p, b.bind(content)));
    }
    // a record under another borrow never matters
    recs.push((BorrowPath::new(BorrowId(5)), b.bind(&common::V::Int(99))));
    let h = History::from_records(recs);
    let (env, out) = restore_by_history(&h, &root, &b.env, &mut FreshSupply::default(), &v).map_err(|_| ())?;
    Ok(tree_of(&env, &out).expect("restored value is a tree"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn restore_agrees_with_replay(case in restore_case_strategy()) {
        prop_assert_eq!(restore_tree(&case), replay_oracle(&case));
    }
}

#[test]
fn oracle_is_not_vacuous() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let (mut ok, mut stuck, mut changed) = (0, 0, 0);
    for _ in 0..500 {
        let case = restore_case_strategy().new_tree(&mut runner).unwrap().current();
        match replay_oracle(&case) {
            Ok(v) => {
                ok += 1;
                changed += usize::from(v != case.value);
            }
            Err(()) => stuck += 1,
        }
    }
    assert!(ok > 100 && stuck > 20 && changed > 50, "ok {ok} stuck {stuck} changed {changed}");
}
