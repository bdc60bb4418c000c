mod common;

use proptest::prelude::*;

use common::{history_strategy, path_strategy};
use pbo_core::histories::{hist_domain, hist_par, hist_restrict, hist_seq, History};

/// Last write wins, record by record.
fn seq_oracle(h1: &History, h2: &History) -> History {
    let mut recs: Vec<_> = h1.records().map(|(p, x)| (p.clone(), x.clone())).collect();
    for (p, x) in h2.records() {
        recs.retain(|(q, _)| q != p);
        recs.push((p.clone(), x.clone()));
    }
    History::from_records(recs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn seq_is_associative(a in history_strategy(), b in history_strategy(), c in history_strategy()) {
        prop_assert_eq!(hist_seq(&hist_seq(&a, &b), &c), hist_seq(&a, &hist_seq(&b, &c)));
    }

    #[test]
    fn empty_is_a_unit(a in history_strategy()) {
        prop_assert_eq!(hist_seq(&History::empty(), &a), a.clone());
        prop_assert_eq!(hist_seq(&a, &History::empty()), a.clone());
        prop_assert_eq!(hist_par(&History::empty(), &a), Ok(a.clone()));
    }

    #[test]
    fn seq_matches_last_write_wins(a in history_strategy(), b in history_strategy()) {
        prop_assert_eq!(hist_seq(&a, &b), seq_oracle(&a, &b));
    }

    #[test]
    fn par_commutes_and_fails_exactly_on_overlap(a in history_strategy(), b in history_strategy()) {
        let overlap: Vec<_> = hist_domain(&a).intersection(&hist_domain(&b)).cloned().collect();
        match (hist_par(&a, &b), hist_par(&b, &a)) {
            (Ok(x), Ok(y)) => {
                prop_assert!(overlap.is_empty());
                prop_assert_eq!(&x, &y);
                prop_assert_eq!(x, hist_seq(&a, &b));
            }
            (Err(e1), Err(e2)) => {
                prop_assert!(overlap.contains(&e1.0));
                prop_assert!(overlap.contains(&e2.0));
            }
            _ => prop_assert!(false, "par defined in one order only"),
        }
    }

    #[test]
    fn restriction_is_idempotent(a in history_strategy(), p in path_strategy()) {
        let r = hist_restrict(&a, &p);
        prop_assert_eq!(hist_restrict(&r, &p), r.clone());
        prop_assert!(r.records().all(|(q, _)| q.extends(&p)));
        prop_assert_eq!(r.len(), a.records().filter(|(q, _)| q.extends(&p)).count());
    }
}
