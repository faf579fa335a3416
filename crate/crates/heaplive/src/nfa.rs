//! Finite automata over {0,1,0̄,1̄}: the strongly-regular grammar
//! approximation, grammar-to-NFA conversion, state-preserving ε-removal, the
//! bar-elimination fixpoint, pruning, membership and enumeration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use crate::error::Error;
use crate::grammar::{Grammar, GrammarSym, Nonterminal, Production};
use crate::pattern::{AccessPattern, PatternSymbol};

pub type StateId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Eps,
    Sym(PatternSymbol),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Eps => write!(f, "ε"),
            Label::Sym(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Nfa {
    pub states: BTreeSet<StateId>,
    pub edges: BTreeSet<(StateId, Label, StateId)>,
    pub start: StateId,
    pub finals: BTreeSet<StateId>,
}

impl Nfa {
    pub fn new(start: StateId) -> Nfa {
        let mut n = Nfa::default();
        n.start = start;
        n.states.insert(start);
        n
    }

    pub fn add_edge(&mut self, from: StateId, label: Label, to: StateId) {
        self.states.insert(from);
        self.states.insert(to);
        self.edges.insert((from, label, to));
    }

    pub fn epsilon_closure(&self, seed: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        let mut out = seed.clone();
        let mut work: Vec<StateId> = seed.iter().copied().collect();
        while let Some(q) = work.pop() {
            for (from, label, to) in &self.edges {
                if *from == q && *label == Label::Eps && out.insert(*to) {
                    work.push(*to);
                }
            }
        }
        out
    }

    fn step(&self, from: &BTreeSet<StateId>, sym: PatternSymbol) -> BTreeSet<StateId> {
        let mut out = BTreeSet::new();
        for (src, label, dst) in &self.edges {
            if *label == Label::Sym(sym) && from.contains(src) {
                out.insert(*dst);
            }
        }
        self.epsilon_closure(&out)
    }

    /// Subset simulation over an arbitrary symbol string (bars allowed).
    pub fn accepts_symbols(&self, input: &[PatternSymbol]) -> bool {
        let mut cur = self.epsilon_closure(&[self.start].into());
        for &sym in input {
            cur = self.step(&cur, sym);
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|q| self.finals.contains(q))
    }

    /// Distinct non-ε labels appearing on edges.
    pub fn alphabet(&self) -> BTreeSet<PatternSymbol> {
        self.edges
            .iter()
            .filter_map(|(_, l, _)| match l {
                Label::Sym(s) => Some(*s),
                Label::Eps => None,
            })
            .collect()
    }

    /// Renumber all states through `map` (must be injective and total).
    fn renumbered(&self, map: &BTreeMap<StateId, StateId>) -> Nfa {
        Nfa {
            states: self.states.iter().map(|q| map[q]).collect(),
            edges: self
                .edges
                .iter()
                .map(|(a, l, b)| (map[a], *l, map[b]))
                .collect(),
            start: map[&self.start],
            finals: self.finals.iter().map(|q| map[q]).collect(),
        }
    }
}

/// Standard NFA acceptance for a canonical query pattern.
pub fn accepts(n: &Nfa, p: &AccessPattern) -> Result<bool, Error> {
    let syms = p
        .symbols()
        .ok_or_else(|| Error::Pattern("membership query on ⊥".into()))?;
    if !p.is_canonical() {
        return Err(Error::Pattern(format!(
            "membership query on non-canonical pattern {p}"
        )));
    }
    Ok(n.accepts_symbols(syms))
}

/// All accepted strings of length ≤ `k`, by prefix search with subset
/// pruning. Works on any automaton; over the bar alphabet the result may
/// contain non-canonical strings.
pub fn language_upto(n: &Nfa, k: usize) -> BTreeSet<Vec<PatternSymbol>> {
    let alphabet: Vec<PatternSymbol> = n.alphabet().into_iter().collect();
    let mut out = BTreeSet::new();
    let start = n.epsilon_closure(&[n.start].into());
    let mut stack: Vec<(BTreeSet<StateId>, Vec<PatternSymbol>)> = vec![(start, vec![])];
    while let Some((cur, prefix)) = stack.pop() {
        if cur.iter().any(|q| n.finals.contains(q)) {
            out.insert(prefix.clone());
        }
        if prefix.len() == k {
            continue;
        }
        for &sym in &alphabet {
            let next = n.step(&cur, sym);
            if !next.is_empty() {
                let mut p2 = prefix.clone();
                p2.push(sym);
                stack.push((next, p2));
            }
        }
    }
    out
}

/// Literal structural equality, the fixpoint loop guard.
pub fn nfa_equal(a: &Nfa, b: &Nfa) -> bool {
    a == b
}

/// Remove ε-moves without touching the state set: every state absorbs the
/// non-ε out-edges and final flags of its ε-closure.
pub fn remove_epsilon_moves(n: &Nfa) -> Nfa {
    let mut out = Nfa {
        states: n.states.clone(),
        edges: BTreeSet::new(),
        start: n.start,
        finals: n.finals.clone(),
    };
    for &q in &n.states {
        let closure = n.epsilon_closure(&[q].into());
        for member in &closure {
            if n.finals.contains(member) {
                out.finals.insert(q);
            }
            for (from, label, to) in &n.edges {
                if from == member {
                    if let Label::Sym(s) = label {
                        out.edges.insert((q, Label::Sym(*s), *to));
                    }
                }
            }
        }
    }
    out
}

/// Progress record of the bar-elimination fixpoint.
#[derive(Debug, Clone)]
pub struct BarFixpoint {
    /// ε-free iterates N_0, N_1, …, N_m (bar edges still present in N_m).
    pub iterates: Vec<Nfa>,
    /// Edge count of each iterate.
    pub edge_counts: Vec<usize>,
}

impl BarFixpoint {
    pub fn result(&self) -> &Nfa {
        self.iterates.last().expect("fixpoint has at least N_0")
    }

    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }
}

/// Iterate: bypass every q′ -0̄-> q -0-> q″ pair (and 1̄/1) with an ε-edge,
/// ε-remove, repeat until the automaton stops changing.
pub fn bar_elimination_fixpoint(n: &Nfa) -> BarFixpoint {
    use PatternSymbol::{BarOne, BarZero, One, Zero};
    let mut cur = remove_epsilon_moves(n);
    let mut fx = BarFixpoint {
        edge_counts: vec![cur.edges.len()],
        iterates: vec![cur.clone()],
    };
    loop {
        let mut with_bypasses = cur.clone();
        for (q1, l1, q) in &cur.edges {
            let matching = match l1 {
                Label::Sym(BarZero) => Zero,
                Label::Sym(BarOne) => One,
                _ => continue,
            };
            for (q2, l2, q3) in &cur.edges {
                if q2 == q && *l2 == Label::Sym(matching) {
                    with_bypasses.edges.insert((*q1, Label::Eps, *q3));
                }
            }
        }
        let next = remove_epsilon_moves(&with_bypasses);
        if nfa_equal(&next, &cur) {
            return fx;
        }
        fx.edge_counts.push(next.edges.len());
        fx.iterates.push(next.clone());
        cur = next;
    }
}

/// Full bar elimination: run the fixpoint, then delete all barred edges.
pub fn eliminate_bar_symbols(n: &Nfa) -> Nfa {
    let fx = bar_elimination_fixpoint(n);
    let mut out = fx.result().clone();
    out.edges.retain(|(_, l, _)| {
        !matches!(
            l,
            Label::Sym(PatternSymbol::BarZero) | Label::Sym(PatternSymbol::BarOne)
        )
    });
    out
}

/// Drop states unreachable from the start or from which no final state is
/// reachable. The start state is always kept; ids are preserved.
pub fn prune_dead_states(n: &Nfa) -> Nfa {
    let mut reachable: BTreeSet<StateId> = [n.start].into();
    loop {
        let mut changed = false;
        for (from, _, to) in &n.edges {
            if reachable.contains(from) && reachable.insert(*to) {
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut coreachable: BTreeSet<StateId> = n.finals.clone();
    loop {
        let mut changed = false;
        for (from, _, to) in &n.edges {
            if coreachable.contains(to) && coreachable.insert(*from) {
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut live: BTreeSet<StateId> = reachable.intersection(&coreachable).copied().collect();
    live.insert(n.start);
    Nfa {
        states: live.clone(),
        edges: n
            .edges
            .iter()
            .filter(|(a, _, b)| live.contains(a) && live.contains(b))
            .copied()
            .collect(),
        start: n.start,
        finals: n.finals.intersection(&live).copied().collect(),
    }
}

/// Graphviz rendering with deterministic ordering.
pub fn to_dot(n: &Nfa) -> String {
    let mut out = String::from("digraph nfa {\n  rankdir=LR;\n  node [shape=circle];\n");
    let _ = writeln!(out, "  __start [shape=point];");
    for q in &n.states {
        if n.finals.contains(q) {
            let _ = writeln!(out, "  s{q} [shape=doublecircle];");
        } else {
            let _ = writeln!(out, "  s{q};");
        }
    }
    let _ = writeln!(out, "  __start -> s{};", n.start);
    for (from, label, to) in &n.edges {
        let _ = writeln!(out, "  s{from} -> s{to} [label=\"{label}\"];");
    }
    out.push_str("}\n");
    out
}

// ---------------------------------------------------------------------------
// Strongly-regular approximation
// ---------------------------------------------------------------------------

/// Strongly-connected components of the nonterminal reference graph, plus a
/// lookup from nonterminal to component index.
fn reference_sccs(g: &Grammar) -> (Vec<BTreeSet<Nonterminal>>, BTreeMap<Nonterminal, usize>) {
    let nts: Vec<Nonterminal> = g.nonterminals().into_iter().collect();
    let index: BTreeMap<&Nonterminal, usize> =
        nts.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nts.len()];
    let mut pred: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nts.len()];
    for p in &g.productions {
        let a = index[&p.head];
        for s in &p.body {
            if let GrammarSym::N(n) = s {
                let b = index[n];
                succ[a].insert(b);
                pred[b].insert(a);
            }
        }
    }
    // Kosaraju: finish order on the forward graph, then sweep the reverse.
    let mut order = Vec::new();
    let mut seen = vec![false; nts.len()];
    for root in 0..nts.len() {
        if seen[root] {
            continue;
        }
        let mut stack = vec![(root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                order.push(v);
                continue;
            }
            if seen[v] {
                continue;
            }
            seen[v] = true;
            stack.push((v, true));
            for &w in &succ[v] {
                if !seen[w] {
                    stack.push((w, false));
                }
            }
        }
    }
    let mut comp = vec![usize::MAX; nts.len()];
    let mut comps: Vec<BTreeSet<Nonterminal>> = Vec::new();
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = BTreeSet::new();
        let mut stack = vec![root];
        comp[root] = id;
        while let Some(v) = stack.pop() {
            members.insert(nts[v].clone());
            for &w in &pred[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    stack.push(w);
                }
            }
        }
        comps.push(members);
    }
    let lookup = nts
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), comp[i]))
        .collect();
    (comps, lookup)
}

fn is_recursive(g: &Grammar, members: &BTreeSet<Nonterminal>) -> bool {
    if members.len() > 1 {
        return true;
    }
    g.productions.iter().any(|p| {
        members.contains(&p.head)
            && p.body
                .iter()
                .any(|s| matches!(s, GrammarSym::N(n) if members.contains(n)))
    })
}

fn member_positions(body: &[GrammarSym], members: &BTreeSet<Nonterminal>) -> Vec<usize> {
    body.iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, GrammarSym::N(n) if members.contains(n)))
        .map(|(i, _)| i)
        .collect()
}

fn right_linear_wrt(g: &Grammar, members: &BTreeSet<Nonterminal>) -> bool {
    g.productions
        .iter()
        .filter(|p| members.contains(&p.head))
        .all(|p| {
            member_positions(&p.body, members)
                .iter()
                .all(|&i| i + 1 == p.body.len())
        })
}

fn left_linear_wrt(g: &Grammar, members: &BTreeSet<Nonterminal>) -> bool {
    g.productions
        .iter()
        .filter(|p| members.contains(&p.head))
        .all(|p| member_positions(&p.body, members).iter().all(|&i| i == 0))
}

/// Regular over-approximation: every recursive component that is neither
/// uniformly right- nor left-linear with respect to its own members is
/// rewritten with primed continuation nonterminals. The result is strongly
/// regular and its language contains the original.
pub fn approximate_strongly_regular(g: &Grammar) -> Grammar {
    let (comps, _) = reference_sccs(g);
    let mut serial = g
        .nonterminals()
        .iter()
        .filter_map(|n| match n {
            Nonterminal::Aux(k) => Some(*k + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut out = Grammar {
        productions: BTreeSet::new(),
        starts: g.starts.clone(),
    };
    let mut handled: BTreeSet<Nonterminal> = BTreeSet::new();

    for members in &comps {
        if !is_recursive(g, members) || right_linear_wrt(g, members) || left_linear_wrt(g, members)
        {
            continue;
        }
        let mut prime: BTreeMap<Nonterminal, Nonterminal> = BTreeMap::new();
        for m in members {
            prime.insert(m.clone(), Nonterminal::Aux(serial));
            serial += 1;
        }
        for p in g.productions.iter().filter(|p| members.contains(&p.head)) {
            let positions = member_positions(&p.body, members);
            if positions.is_empty() {
                // A → w0  becomes  A → w0 A′
                let mut body = p.body.clone();
                body.push(GrammarSym::N(prime[&p.head].clone()));
                out.productions.insert(Production {
                    head: p.head.clone(),
                    body,
                });
                continue;
            }
            // A → w0 B1 w1 … Bm wm
            let b1 = match &p.body[positions[0]] {
                GrammarSym::N(n) => n.clone(),
                GrammarSym::T(_) => unreachable!(),
            };
            let mut body = p.body[..positions[0]].to_vec();
            body.push(GrammarSym::N(b1.clone()));
            out.productions.insert(Production {
                head: p.head.clone(),
                body,
            });
            for w in positions.windows(2) {
                let (bi, bj) = (w[0], w[1]);
                let (bi_nt, bj_nt) = match (&p.body[bi], &p.body[bj]) {
                    (GrammarSym::N(a), GrammarSym::N(b)) => (a.clone(), b.clone()),
                    _ => unreachable!(),
                };
                let mut body = p.body[bi + 1..bj].to_vec();
                body.push(GrammarSym::N(bj_nt));
                out.productions.insert(Production {
                    head: prime[&bi_nt].clone(),
                    body,
                });
            }
            let last = *positions.last().unwrap();
            let last_nt = match &p.body[last] {
                GrammarSym::N(n) => n.clone(),
                GrammarSym::T(_) => unreachable!(),
            };
            let mut body = p.body[last + 1..].to_vec();
            body.push(GrammarSym::N(prime[&p.head].clone()));
            out.productions.insert(Production {
                head: prime[&last_nt].clone(),
                body,
            });
        }
        for m in members {
            out.productions.insert(Production {
                head: prime[m].clone(),
                body: vec![],
            });
            handled.insert(m.clone());
        }
    }

    for p in &g.productions {
        if !handled.contains(&p.head) {
            out.productions.insert(p.clone());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Grammar to NFA
// ---------------------------------------------------------------------------

struct NfaBuilder<'a> {
    g: &'a Grammar,
    comps: Vec<BTreeSet<Nonterminal>>,
    comp_of: BTreeMap<Nonterminal, usize>,
    memo: BTreeMap<Nonterminal, Nfa>,
}

/// A growing automaton with a fresh-state counter.
#[derive(Default)]
struct Machine {
    nfa: Nfa,
    next: StateId,
}

impl Machine {
    fn fresh(&mut self) -> StateId {
        let q = self.next;
        self.next += 1;
        self.nfa.states.insert(q);
        q
    }

    fn splice(&mut self, sub: &Nfa) -> (StateId, BTreeSet<StateId>) {
        let mut map = BTreeMap::new();
        for &q in &sub.states {
            map.insert(q, self.fresh());
        }
        let renamed = sub.renumbered(&map);
        self.nfa.edges.extend(renamed.edges);
        (renamed.start, renamed.finals)
    }

    /// Append one body symbol to a chain ending at `cur`; returns the new end.
    fn chain(
        &mut self,
        cur: StateId,
        sym: &GrammarSym,
        builder: &mut NfaBuilder<'_>,
    ) -> Result<StateId, Error> {
        match sym {
            GrammarSym::T(t) => {
                let ns = self.fresh();
                self.nfa.add_edge(cur, Label::Sym(*t), ns);
                Ok(ns)
            }
            GrammarSym::N(n) => {
                let sub = builder.build(n)?;
                let (sub_start, sub_finals) = self.splice(&sub);
                self.nfa.add_edge(cur, Label::Eps, sub_start);
                let ns = self.fresh();
                for f in sub_finals {
                    self.nfa.add_edge(f, Label::Eps, ns);
                }
                Ok(ns)
            }
        }
    }
}

impl<'a> NfaBuilder<'a> {
    fn build(&mut self, nt: &Nonterminal) -> Result<Nfa, Error> {
        if let Some(n) = self.memo.get(nt) {
            return Ok(n.clone());
        }
        let comp = *self
            .comp_of
            .get(nt)
            .ok_or_else(|| Error::Internal(format!("nonterminal {nt} absent from grammar")))?;
        let members = self.comps[comp].clone();
        let right = right_linear_wrt(self.g, &members);
        let left = left_linear_wrt(self.g, &members);
        if !right && !left {
            return Err(Error::Internal(format!(
                "component of {nt} is not strongly regular"
            )));
        }
        if right {
            self.build_right_linear(&members)?;
        } else {
            self.build_left_linear(&members)?;
        }
        Ok(self.memo[nt].clone())
    }

    fn build_right_linear(&mut self, members: &BTreeSet<Nonterminal>) -> Result<(), Error> {
        let mut m = Machine::default();
        let entry: BTreeMap<Nonterminal, StateId> =
            members.iter().map(|a| (a.clone(), m.fresh())).collect();
        let mut finals = BTreeSet::new();
        let prods: Vec<Production> = self
            .g
            .productions
            .iter()
            .filter(|p| members.contains(&p.head))
            .cloned()
            .collect();
        for p in prods {
            let positions = member_positions(&p.body, members);
            let (chain_part, tail) = match positions.first() {
                Some(&i) => (&p.body[..i], Some(&p.body[i])),
                None => (&p.body[..], None),
            };
            let mut cur = entry[&p.head];
            for sym in chain_part {
                cur = m.chain(cur, sym, self)?;
            }
            match tail {
                Some(GrammarSym::N(b)) => {
                    m.nfa.add_edge(cur, Label::Eps, entry[b]);
                }
                Some(GrammarSym::T(_)) => unreachable!(),
                None => {
                    finals.insert(cur);
                }
            }
        }
        m.nfa.finals = finals;
        for (a, q) in entry {
            let mut nfa = m.nfa.clone();
            nfa.start = q;
            self.memo.insert(a, nfa);
        }
        Ok(())
    }

    fn build_left_linear(&mut self, members: &BTreeSet<Nonterminal>) -> Result<(), Error> {
        let mut m = Machine::default();
        let source = m.fresh();
        let exit: BTreeMap<Nonterminal, StateId> =
            members.iter().map(|a| (a.clone(), m.fresh())).collect();
        let prods: Vec<Production> = self
            .g
            .productions
            .iter()
            .filter(|p| members.contains(&p.head))
            .cloned()
            .collect();
        for p in prods {
            let positions = member_positions(&p.body, members);
            let (head_state, rest) = match positions.first() {
                Some(&0) => {
                    let b = match &p.body[0] {
                        GrammarSym::N(n) => n.clone(),
                        GrammarSym::T(_) => unreachable!(),
                    };
                    (exit[&b], &p.body[1..])
                }
                Some(_) => unreachable!("left-linear check admits leading members only"),
                None => (source, &p.body[..]),
            };
            let mut cur = head_state;
            for sym in rest {
                cur = m.chain(cur, sym, self)?;
            }
            m.nfa.add_edge(cur, Label::Eps, exit[&p.head]);
        }
        m.nfa.start = source;
        for (a, q) in exit {
            let mut nfa = m.nfa.clone();
            nfa.finals = [q].into();
            self.memo.insert(a, nfa);
        }
        Ok(())
    }
}

/// Convert one start symbol of a strongly regular grammar to an NFA. The
/// result may contain ε-moves; callers normalize with `remove_epsilon_moves`.
pub fn grammar_to_nfa(g: &Grammar, start: &Nonterminal) -> Result<Nfa, Error> {
    let (comps, comp_of) = reference_sccs(g);
    let mut builder = NfaBuilder {
        g,
        comps,
        comp_of,
        memo: BTreeMap::new(),
    };
    builder.build(start)
}
