//! Inferences about later ticks, held by the master until they are due.

use std::collections::{BTreeMap, BTreeSet};

use crate::stream_model::{Atom, TimePoint};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("future inference {atom} due at {due} recorded at {now}")]
pub struct LateInference {
    pub atom: Atom,
    pub due: TimePoint,
    pub now: TimePoint,
}

/// Due tick → node → atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FutureLog {
    entries: BTreeMap<TimePoint, BTreeMap<usize, BTreeSet<Atom>>>,
}

impl FutureLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records `atom`, derived by `node`, as due at `due`; `now` is the last
    /// tick already handed out.
    pub fn record(&mut self, node: usize, atom: Atom, due: TimePoint, now: Option<TimePoint>) -> Result<(), LateInference> {
        if let Some(now) = now {
            if due <= now {
                return Err(LateInference { atom, due, now });
            }
        }
        self.entries.entry(due).or_default().entry(node).or_default().insert(atom);
        Ok(())
    }

    /// Removes and returns everything due at `t`, per node.
    pub fn release_due(&mut self, t: TimePoint) -> BTreeMap<usize, BTreeSet<Atom>> {
        self.entries.remove(&t).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_and_release() {
        let mut log = FutureLog::new();
        log.record(0, Atom::prop("a"), 7, Some(5)).unwrap();
        assert!(log.release_due(6).is_empty());
        assert_eq!(log.release_due(7), BTreeMap::from([(0, BTreeSet::from([Atom::prop("a")]))]));
        assert!(log.is_empty());
        assert!(log.record(0, Atom::prop("b"), 5, Some(5)).is_err());
    }
}
