//! Borrow ids, borrow paths and histories of reference updates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::syntax::Name;

/// Identifier of one borrow step. Ids are handed out by a monotone counter,
/// so ordering by id is ordering by creation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BorrowId(pub u32);

impl fmt::Display for BorrowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// A borrow id followed by field projections: `.i` from case distribution,
/// `.0` from dereferencing.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BorrowPath {
    pub root: BorrowId,
    pub indices: Vec<u32>,
}

impl BorrowPath {
    pub fn new(root: BorrowId) -> Self {
        BorrowPath { root, indices: Vec::new() }
    }

    pub fn child(&self, i: u32) -> Self {
        let mut indices = self.indices.clone();
        indices.push(i);
        BorrowPath { root: self.root, indices }
    }

    /// True when `self` is `p` followed by zero or more indices.
    pub fn extends(&self, p: &BorrowPath) -> bool {
        self.root == p.root && self.indices.starts_with(&p.indices)
    }
}

impl fmt::Display for BorrowPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)?;
        for i in &self.indices {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parallel histories overlap at {0}")]
pub struct DisjointnessError(pub BorrowPath);

/// Latest recorded content variable per borrow path.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct History(BTreeMap<BorrowPath, Name>);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecordJson {
    pub path: String,
    pub var: String,
}

impl History {
    pub fn empty() -> Self {
        History(BTreeMap::new())
    }

    pub fn singleton(p: BorrowPath, x: Name) -> Self {
        let mut m = BTreeMap::new();
        m.insert(p, x);
        History(m)
    }

    pub fn from_records(records: impl IntoIterator<Item = (BorrowPath, Name)>) -> Self {
        History(records.into_iter().collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, p: &BorrowPath) -> Option<&Name> {
        self.0.get(p)
    }

    pub fn records(&self) -> impl Iterator<Item = (&BorrowPath, &Name)> {
        self.0.iter()
    }

    /// True when some recorded path extends `p` (including `p` itself).
    pub fn touches(&self, p: &BorrowPath) -> bool {
        self.0.keys().any(|q| q.extends(p))
    }

    pub fn to_json(&self) -> Vec<RecordJson> {
        self.0
            .iter()
            .map(|(p, x)| RecordJson { path: p.to_string(), var: x.to_string() })
            .collect()
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (p, x)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}↦{x}")?;
        }
        write!(f, "}}")
    }
}

/// Sequential composition: records of `h2` overwrite those of `h1`.
pub fn hist_seq(h1: &History, h2: &History) -> History {
    let mut out = h1.0.clone();
    for (p, x) in &h2.0 {
        out.insert(p.clone(), x.clone());
    }
    History(out)
}

/// Parallel composition: defined only on disjoint domains.
pub fn hist_par(h1: &History, h2: &History) -> Result<History, DisjointnessError> {
    let mut out = h1.0.clone();
    for (p, x) in &h2.0 {
        if out.insert(p.clone(), x.clone()).is_some() {
            return Err(DisjointnessError(p.clone()));
        }
    }
    Ok(History(out))
}

/// Keeps the records at `p` and below.
pub fn hist_restrict(h: &History, p: &BorrowPath) -> History {
    History(h.0.iter().filter(|(q, _)| q.extends(p)).map(|(q, x)| (q.clone(), x.clone())).collect())
}

pub fn hist_domain(h: &History) -> BTreeSet<BorrowPath> {
    h.0.keys().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(b: u32, ix: &[u32]) -> BorrowPath {
        BorrowPath { root: BorrowId(b), indices: ix.to_vec() }
    }

    fn h(recs: &[(BorrowPath, &str)]) -> History {
        History::from_records(recs.iter().map(|(p, x)| (p.clone(), Name::from(*x))))
    }

    #[test]
    fn seq_overwrites() {
        let pi = path(0, &[]);
        assert_eq!(hist_seq(&h(&[(pi.clone(), "x")]), &h(&[(pi.clone(), "y")])), h(&[(pi, "y")]));
    }

    #[test]
    fn seq_empty_left_unit() {
        let g = h(&[(path(1, &[0]), "x")]);
        assert_eq!(hist_seq(&History::empty(), &g), g);
    }

    #[test]
    fn seq_disjoint_keys_union() {
        let (pi, rho) = (path(0, &[]), path(1, &[]));
        assert_eq!(
            hist_seq(&h(&[(pi.clone(), "x")]), &h(&[(rho.clone(), "y")])),
            h(&[(pi, "x"), (rho, "y")])
        );
    }

    #[test]
    fn par_union_and_overlap() {
        let (pi, rho) = (path(0, &[]), path(1, &[]));
        assert_eq!(
            hist_par(&h(&[(pi.clone(), "x")]), &h(&[(rho.clone(), "y")])).unwrap(),
            h(&[(pi.clone(), "x"), (rho, "y")])
        );
        let g = h(&[(pi.clone(), "x")]);
        assert_eq!(hist_par(&History::empty(), &g).unwrap(), g);
        assert_eq!(
            hist_par(&h(&[(pi.clone(), "x")]), &h(&[(pi.clone(), "y")])),
            Err(DisjointnessError(pi))
        );
    }

    #[test]
    fn restrict_examples() {
        let (pi, rho) = (path(0, &[]), path(1, &[]));
        let g = h(&[(pi.child(0), "x"), (rho, "y")]);
        assert_eq!(hist_restrict(&g, &pi), h(&[(pi.child(0), "x")]));
        assert_eq!(hist_restrict(&History::empty(), &pi), History::empty());
        let g = h(&[(pi.clone(), "x")]);
        assert_eq!(hist_restrict(&g, &pi), g);
    }

    #[test]
    fn domain_examples() {
        let (pi, rho) = (path(0, &[]), path(1, &[2]));
        let g = h(&[(pi.clone(), "x"), (rho.clone(), "y")]);
        assert_eq!(hist_domain(&g), [pi, rho].into_iter().collect());
        assert!(hist_domain(&History::empty()).is_empty());
    }

    #[test]
    fn display_path() {
        assert_eq!(path(3, &[0, 1]).to_string(), "b3.0.1");
    }
}
