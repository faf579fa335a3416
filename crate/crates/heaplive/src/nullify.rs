//! Nullification candidates: access paths that the liveness automata prove
//! dead at a program point. A path `v.α` is a candidate when no accepted
//! string of the automaton for `v` at that point extends `α`; nullifying the
//! cell reached via `α` then cannot affect the rest of the computation.
//!
//! Candidates form an antichain: once `v.α` is dead every extension is dead
//! too, so only the minimal dead prefixes are reported.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::collections::VecDeque;

use crate::error::Error;
use crate::nfa::{Label, Nfa, StateId};
use crate::pattern::{AccessPattern, PatternSymbol, RootedPath};
use crate::syntax::ProgramPoint;

/// A dead access path at a program point. The analysis itself never verifies
/// that inserting the nullification is safe against aliasing, so every
/// candidate carries the same advisory status.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Candidate {
    pub point: ProgramPoint,
    pub path: RootedPath,
    pub status: &'static str,
}

pub const STATUS_UNSAFE_UNCHECKED: &str = "unsafe-unchecked";

impl std::fmt::Display for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "pi={} {} [{}]", self.point.0, self.path, self.status)
    }
}

/// States from which some final state is reachable.
fn coreachable(n: &Nfa) -> BTreeSet<StateId> {
    let mut out = n.finals.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for (from, _, to) in &n.edges {
            if out.contains(to) && out.insert(*from) {
                changed = true;
            }
        }
    }
    out
}

fn step(n: &Nfa, from: &BTreeSet<StateId>, sym: PatternSymbol) -> BTreeSet<StateId> {
    let mut out = BTreeSet::new();
    for (src, label, dst) in &n.edges {
        if *label == Label::Sym(sym) && from.contains(src) {
            out.insert(*dst);
        }
    }
    n.epsilon_closure(&out)
}

/// True when some accepted string of `n` has `prefix` as a prefix.
fn has_live_extension(n: &Nfa, live: &BTreeSet<StateId>, prefix: &[PatternSymbol]) -> bool {
    let mut cur = n.epsilon_closure(&[n.start].into());
    for &sym in prefix {
        cur = step(n, &cur, sym);
        if cur.is_empty() {
            return false;
        }
    }
    cur.iter().any(|q| live.contains(q))
}

/// Minimal dead access paths of length ≤ `depth` for every variable in scope
/// at `point`. A variable with no automaton at the point has an empty
/// liveness language, so `v.ε` itself is a candidate.
pub fn nullification_candidates(
    automata: &BTreeMap<(ProgramPoint, String), Nfa>,
    point: ProgramPoint,
    depth: usize,
    scopes: &BTreeMap<ProgramPoint, Vec<String>>,
) -> Result<Vec<Candidate>, Error> {
    let vars = scopes
        .get(&point)
        .ok_or_else(|| Error::Validate(format!("unknown program point {}", point.0)))?;

    let mut out = Vec::new();
    for v in vars {
        match automata.get(&(point, v.clone())) {
            None => {
                out.push(Candidate {
                    point,
                    path: RootedPath::new(v.clone(), AccessPattern::epsilon()),
                    status: STATUS_UNSAFE_UNCHECKED,
                });
            }
            Some(n) => {
                let live = coreachable(n);
                let mut queue: VecDeque<Vec<PatternSymbol>> = VecDeque::new();
                queue.push_back(Vec::new());
                while let Some(prefix) = queue.pop_front() {
                    if !has_live_extension(n, &live, &prefix) {
                        out.push(Candidate {
                            point,
                            path: RootedPath::new(v.clone(), AccessPattern::from_symbols(prefix)),
                            status: STATUS_UNSAFE_UNCHECKED,
                        });
                        continue;
                    }
                    if prefix.len() < depth {
                        for sym in [PatternSymbol::Zero, PatternSymbol::One] {
                            let mut ext = prefix.clone();
                            ext.push(sym);
                            queue.push_back(ext);
                        }
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}
