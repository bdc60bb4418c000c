mod common;

use pbo_core::syntax::{alpha_equal, parse_program, pretty_print_program};

#[test]
fn every_corpus_program_survives_printing() {
    let mut n = 0;
    for entry in std::fs::read_dir(common::corpus_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "pbo") {
            continue;
        }
        let p = parse_program(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let printed = pretty_print_program(&p);
        let q = parse_program(&printed).unwrap_or_else(|e| panic!("{}: {e:?}\n{printed}", path.display()));
        assert!(alpha_equal(&p.body, &q.body), "{}", path.display());
        assert_eq!(p.data_decls, q.data_decls);
        n += 1;
    }
    assert!(n >= 13);
}
