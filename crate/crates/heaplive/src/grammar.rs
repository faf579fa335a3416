//! Constraint solving: split each function-argument equation into its
//! demand-independent and demand-coefficient parts, then materialize the whole
//! analysis as a context-free grammar over {0,1,0̄,1̄}.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::Error;
use crate::pattern::PatternSymbol;
use crate::symbolic::{normalize_affine, AnnotationStore, FactorNf, SymbolicSet};
use crate::syntax::ProgramPoint;
use crate::transfer::XfEquationSet;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Nonterminal {
    FindNT(String, usize),
    FdepNT(String, usize),
    SPgm,
    SPoint(ProgramPoint, String),
    Aux(usize),
}

impl fmt::Display for Nonterminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonterminal::FindNT(func, i) => write!(f, "Find_{func}_{i}"),
            Nonterminal::FdepNT(func, i) => write!(f, "Fdep_{func}_{i}"),
            Nonterminal::SPgm => write!(f, "S_pgm"),
            Nonterminal::SPoint(pt, v) => write!(f, "S_{pt}_{v}"),
            Nonterminal::Aux(n) => write!(f, "Aux_{n}"),
        }
    }
}

/// One grammar symbol: a terminal selector or a nonterminal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GrammarSym {
    T(PatternSymbol),
    N(Nonterminal),
}

impl fmt::Display for GrammarSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrammarSym::T(t) => write!(f, "{t}"),
            GrammarSym::N(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Production {
    pub head: Nonterminal,
    pub body: Vec<GrammarSym>,
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ->", self.head)?;
        if self.body.is_empty() {
            write!(f, " ε")?;
        }
        for sym in &self.body {
            write!(f, " {sym}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Grammar {
    pub productions: BTreeSet<Production>,
    pub starts: BTreeSet<Nonterminal>,
}

impl Grammar {
    pub fn nonterminals(&self) -> BTreeSet<Nonterminal> {
        let mut out: BTreeSet<Nonterminal> = BTreeSet::new();
        for p in &self.productions {
            out.insert(p.head.clone());
            for s in &p.body {
                if let GrammarSym::N(n) = s {
                    out.insert(n.clone());
                }
            }
        }
        out
    }

    pub fn productions_of<'a>(
        &'a self,
        nt: &'a Nonterminal,
    ) -> impl Iterator<Item = &'a Production> {
        self.productions.iter().filter(move |p| &p.head == nt)
    }

    pub fn bodies_of(&self, nt: &Nonterminal) -> BTreeSet<Vec<GrammarSym>> {
        self.productions_of(nt).map(|p| p.body.clone()).collect()
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in &self.productions {
            out.push_str(&p.to_string());
            out.push('\n');
        }
        out
    }
}

/// Find/Fdep right-hand sides for one function argument, both free of σ and
/// of unexpanded transfer applications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub find: SymbolicSet,
    pub fdep: SymbolicSet,
}

pub type ConstraintSet = BTreeMap<(String, usize), Constraint>;

/// Split every equation into the affine form `Find ∪ Fdep·σ`.
pub fn decompose_equations(eqs: &XfEquationSet) -> Result<ConstraintSet, Error> {
    let mut out = ConstraintSet::new();
    for ((f, i), rhs) in eqs {
        let affine = normalize_affine(rhs)?;
        out.insert(
            (f.clone(), *i),
            Constraint {
                find: affine.indep,
                fdep: affine.coef,
            },
        );
    }
    Ok(out)
}

/// Productions for one nonterminal from a σ-free symbolic set: one production
/// per union branch, with literal pattern sets flattened into terminal
/// strings and references turned into nonterminal occurrences.
pub fn set_to_productions(
    head: Nonterminal,
    s: &SymbolicSet,
) -> Result<BTreeSet<Production>, Error> {
    let mut out = BTreeSet::new();
    for term in s.expand_xf_refs().product_terms() {
        let mut bodies: Vec<Vec<GrammarSym>> = vec![vec![]];
        for factor in &term {
            match factor {
                FactorNf::Lit(ps) => {
                    let mut next = Vec::new();
                    for body in &bodies {
                        for member in ps.iter() {
                            let syms = member.symbols().ok_or_else(|| {
                                Error::Internal("bottom pattern in grammar literal".into())
                            })?;
                            let mut b = body.clone();
                            b.extend(syms.iter().map(|t| GrammarSym::T(*t)));
                            next.push(b);
                        }
                    }
                    bodies = next;
                }
                FactorNf::Sigma => {
                    return Err(Error::Internal(format!("free σ in grammar source {s}")))
                }
                FactorNf::SigmaPgm => {
                    for body in &mut bodies {
                        body.push(GrammarSym::N(Nonterminal::SPgm));
                    }
                }
                FactorNf::XfApp { .. } => {
                    return Err(Error::Internal("unexpanded xf application".into()))
                }
                FactorNf::FindRef(f, i) => {
                    for body in &mut bodies {
                        body.push(GrammarSym::N(Nonterminal::FindNT(f.clone(), *i)));
                    }
                }
                FactorNf::FdepRef(f, i) => {
                    for body in &mut bodies {
                        body.push(GrammarSym::N(Nonterminal::FdepNT(f.clone(), *i)));
                    }
                }
            }
        }
        for body in bodies {
            out.insert(Production {
                head: head.clone(),
                body,
            });
        }
    }
    Ok(out)
}

/// Assemble the full grammar: fixed productions for the whole-program demand,
/// constraint productions for every function argument, and one start symbol
/// per (main program point, live variable) pair.
pub fn build_grammar(
    constraints: &ConstraintSet,
    store: &AnnotationStore,
    main_points: &BTreeSet<ProgramPoint>,
) -> Result<Grammar, Error> {
    let mut g = Grammar::default();

    use PatternSymbol::{One, Zero};
    for body in [
        vec![],
        vec![GrammarSym::T(Zero), GrammarSym::N(Nonterminal::SPgm)],
        vec![GrammarSym::T(One), GrammarSym::N(Nonterminal::SPgm)],
    ] {
        g.productions.insert(Production {
            head: Nonterminal::SPgm,
            body,
        });
    }
    g.starts.insert(Nonterminal::SPgm);

    for ((f, i), c) in constraints {
        let find_nt = Nonterminal::FindNT(f.clone(), *i);
        let fdep_nt = Nonterminal::FdepNT(f.clone(), *i);
        g.productions
            .extend(set_to_productions(find_nt.clone(), &c.find)?);
        g.productions
            .extend(set_to_productions(fdep_nt.clone(), &c.fdep)?);
        g.starts.insert(find_nt);
        g.starts.insert(fdep_nt);
    }

    for point in main_points {
        let env = match store.get(*point) {
            Some(env) => env,
            None => continue,
        };
        for (var, s) in env.iter() {
            let nt = Nonterminal::SPoint(*point, var.clone());
            g.productions.extend(set_to_productions(nt.clone(), s)?);
            g.starts.insert(nt);
        }
    }
    Ok(g)
}

/// Drop nonterminals that generate no terminal string, then nonterminals
/// unreachable from the remaining start symbols.
pub fn eliminate_useless_nonterminals(g: &Grammar) -> Grammar {
    // least fixpoint of productivity
    let mut productive: BTreeSet<Nonterminal> = BTreeSet::new();
    loop {
        let mut changed = false;
        for p in &g.productions {
            if productive.contains(&p.head) {
                continue;
            }
            let ok = p.body.iter().all(|s| match s {
                GrammarSym::T(_) => true,
                GrammarSym::N(n) => productive.contains(n),
            });
            if ok {
                productive.insert(p.head.clone());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let keep_prod = |p: &Production| {
        productive.contains(&p.head)
            && p.body.iter().all(|s| match s {
                GrammarSym::T(_) => true,
                GrammarSym::N(n) => productive.contains(n),
            })
    };

    let mut reachable: BTreeSet<Nonterminal> = g
        .starts
        .iter()
        .filter(|s| productive.contains(s))
        .cloned()
        .collect();
    loop {
        let mut changed = false;
        for p in g.productions.iter().filter(|p| keep_prod(p)) {
            if !reachable.contains(&p.head) {
                continue;
            }
            for s in &p.body {
                if let GrammarSym::N(n) = s {
                    if reachable.insert(n.clone()) {
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    Grammar {
        productions: g
            .productions
            .iter()
            .filter(|p| keep_prod(p) && reachable.contains(&p.head))
            .cloned()
            .collect(),
        starts: reachable
            .intersection(&g.starts.iter().cloned().collect())
            .cloned()
            .collect(),
    }
}

/// All terminal strings of length ≤ `max_len` derivable from `start`.
/// Bounded least fixpoint; used as a test oracle, not in the pipeline.
pub fn enumerate_upto(
    g: &Grammar,
    start: &Nonterminal,
    max_len: usize,
) -> BTreeSet<Vec<PatternSymbol>> {
    let mut langs: BTreeMap<Nonterminal, BTreeSet<Vec<PatternSymbol>>> = BTreeMap::new();
    for nt in g.nonterminals() {
        langs.insert(nt, BTreeSet::new());
    }
    langs.entry(start.clone()).or_default();
    loop {
        let mut changed = false;
        for p in &g.productions {
            let mut strings: Vec<Vec<PatternSymbol>> = vec![vec![]];
            for sym in &p.body {
                let mut next = Vec::new();
                match sym {
                    GrammarSym::T(t) => {
                        for s in &strings {
                            if s.len() < max_len {
                                let mut s2 = s.clone();
                                s2.push(*t);
                                next.push(s2);
                            }
                        }
                    }
                    GrammarSym::N(n) => {
                        let sub = &langs[n];
                        for s in &strings {
                            for t in sub {
                                if s.len() + t.len() <= max_len {
                                    let mut s2 = s.clone();
                                    s2.extend(t.iter().copied());
                                    next.push(s2);
                                }
                            }
                        }
                    }
                }
                strings = next;
                if strings.is_empty() {
                    break;
                }
            }
            let entry = langs.get_mut(&p.head).unwrap();
            for s in strings {
                if entry.insert(s) {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    langs.remove(start).unwrap_or_default()
}
