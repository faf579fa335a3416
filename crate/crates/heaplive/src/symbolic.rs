//! Symbolic liveness sets: a small term algebra over pattern sets with a
//! distinguished demand variable σ and unexpanded transfer-function
//! applications, plus the environments mapping variables to such sets.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;
use crate::pattern::{concat_sets, PatternSet};
use crate::syntax::ProgramPoint;

/// A (possibly symbolic) set of access patterns.
///
/// `Sigma` stands for the demand on the enclosing function's result;
/// `SigmaPgm` for the unconstrained demand {0,1}* on the whole program's
/// result. `XfApp` keeps calls to transfer functions unexpanded so that
/// recursive functions stay finite. `FindRef`/`FdepRef` appear only after
/// affine decomposition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolicSet {
    Empty,
    Lit(PatternSet),
    Sigma,
    SigmaPgm,
    Concat(Vec<SymbolicSet>),
    Union(Vec<SymbolicSet>),
    XfApp {
        func: String,
        arg: usize,
        inner: Box<SymbolicSet>,
    },
    FindRef(String, usize),
    FdepRef(String, usize),
}

impl SymbolicSet {
    pub fn lit(set: PatternSet) -> SymbolicSet {
        if set.is_empty() {
            SymbolicSet::Empty
        } else {
            SymbolicSet::Lit(set)
        }
    }

    pub fn epsilon() -> SymbolicSet {
        SymbolicSet::Lit(PatternSet::epsilon())
    }

    pub fn xf(func: impl Into<String>, arg: usize, inner: SymbolicSet) -> SymbolicSet {
        SymbolicSet::XfApp {
            func: func.into(),
            arg,
            inner: Box::new(inner),
        }
    }

    /// Union with flattening: nested unions are spliced in, `Empty` dropped,
    /// literal members merged into a single set.
    pub fn union(parts: impl IntoIterator<Item = SymbolicSet>) -> SymbolicSet {
        let mut lits = PatternSet::new();
        let mut rest: Vec<SymbolicSet> = Vec::new();
        let mut pending: Vec<SymbolicSet> = parts.into_iter().collect();
        pending.reverse();
        while let Some(p) = pending.pop() {
            match p {
                SymbolicSet::Empty => {}
                SymbolicSet::Lit(s) => lits = lits.union(&s),
                SymbolicSet::Union(inner) => {
                    for x in inner.into_iter().rev() {
                        pending.push(x);
                    }
                }
                other => {
                    if !rest.contains(&other) {
                        rest.push(other);
                    }
                }
            }
        }
        if !lits.is_empty() {
            rest.insert(0, SymbolicSet::Lit(lits));
        }
        match rest.len() {
            0 => SymbolicSet::Empty,
            1 => rest.pop().unwrap(),
            _ => SymbolicSet::Union(rest),
        }
    }

    pub fn union2(a: SymbolicSet, b: SymbolicSet) -> SymbolicSet {
        SymbolicSet::union([a, b])
    }

    /// Concatenation with flattening: nested concats spliced, `Empty`
    /// annihilates, {ε} is dropped, adjacent literals merged pairwise.
    pub fn concat(parts: impl IntoIterator<Item = SymbolicSet>) -> SymbolicSet {
        let mut flat: Vec<SymbolicSet> = Vec::new();
        let mut pending: Vec<SymbolicSet> = parts.into_iter().collect();
        pending.reverse();
        while let Some(p) = pending.pop() {
            match p {
                SymbolicSet::Empty => return SymbolicSet::Empty,
                SymbolicSet::Lit(s) if s.is_epsilon_only() => {}
                SymbolicSet::Concat(inner) => {
                    for x in inner.into_iter().rev() {
                        pending.push(x);
                    }
                }
                SymbolicSet::Lit(s) => {
                    if let Some(SymbolicSet::Lit(prev)) = flat.last_mut() {
                        *prev = concat_sets(prev, &s);
                    } else {
                        flat.push(SymbolicSet::Lit(s));
                    }
                }
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => SymbolicSet::epsilon(),
            1 => flat.pop().unwrap(),
            _ => SymbolicSet::Concat(flat),
        }
    }

    pub fn concat2(a: SymbolicSet, b: SymbolicSet) -> SymbolicSet {
        SymbolicSet::concat([a, b])
    }

    pub fn is_empty_set(&self) -> bool {
        matches!(self, SymbolicSet::Empty)
    }

    /// Union-of-products view without any merging of factors.
    pub fn product_terms(&self) -> Vec<Vec<FactorNf>> {
        to_terms(self)
    }

    /// Rewrite every `xf[f,i](S)` as `find[f,i] ∪ fdep[f,i]·S`, recursively.
    pub fn expand_xf_refs(&self) -> SymbolicSet {
        expand_xf(self)
    }

    /// Substitute a set for every occurrence of σ.
    pub fn subst_sigma(&self, with: &SymbolicSet) -> SymbolicSet {
        match self {
            SymbolicSet::Sigma => with.clone(),
            SymbolicSet::Concat(parts) => {
                SymbolicSet::concat(parts.iter().map(|p| p.subst_sigma(with)))
            }
            SymbolicSet::Union(parts) => {
                SymbolicSet::union(parts.iter().map(|p| p.subst_sigma(with)))
            }
            SymbolicSet::XfApp { func, arg, inner } => {
                SymbolicSet::xf(func.clone(), *arg, inner.subst_sigma(with))
            }
            leaf => leaf.clone(),
        }
    }

    /// Flatten to the canonical sum-of-products form used for comparisons.
    pub fn normal_form(&self) -> SetNf {
        let mut nf = SetNf::default();
        for term in to_terms(self) {
            match normalize_term(term) {
                None => {}
                Some(TermOrGround::Ground(set)) => nf.ground = nf.ground.union(&set),
                Some(TermOrGround::Term(t)) => {
                    nf.terms.insert(t);
                }
            }
        }
        nf
    }
}

impl fmt::Display for SymbolicSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolicSet::Empty => write!(f, "∅"),
            SymbolicSet::Lit(s) if s.is_epsilon_only() => write!(f, "{{ε}}"),
            SymbolicSet::Lit(s) => write!(f, "{s}"),
            SymbolicSet::Sigma => write!(f, "σ"),
            SymbolicSet::SigmaPgm => write!(f, "σ_pgm"),
            SymbolicSet::Concat(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "·")?;
                    }
                    if matches!(p, SymbolicSet::Union(_)) {
                        write!(f, "({p})")?;
                    } else {
                        write!(f, "{p}")?;
                    }
                }
                Ok(())
            }
            SymbolicSet::Union(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ∪ ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            SymbolicSet::XfApp { func, arg, inner } => write!(f, "xf[{func},{arg}]({inner})"),
            SymbolicSet::FindRef(func, arg) => write!(f, "find[{func},{arg}]"),
            SymbolicSet::FdepRef(func, arg) => write!(f, "fdep[{func},{arg}]"),
        }
    }
}

/// Normal form: a ground pattern set plus a set of symbolic product terms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SetNf {
    pub ground: PatternSet,
    pub terms: std::collections::BTreeSet<Vec<FactorNf>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactorNf {
    Lit(PatternSet),
    Sigma,
    SigmaPgm,
    XfApp {
        func: String,
        arg: usize,
        inner: SetNf,
    },
    FindRef(String, usize),
    FdepRef(String, usize),
}

enum TermOrGround {
    Ground(PatternSet),
    Term(Vec<FactorNf>),
}

fn to_terms(s: &SymbolicSet) -> Vec<Vec<FactorNf>> {
    match s {
        SymbolicSet::Empty => vec![],
        SymbolicSet::Lit(set) => vec![vec![FactorNf::Lit(set.clone())]],
        SymbolicSet::Sigma => vec![vec![FactorNf::Sigma]],
        SymbolicSet::SigmaPgm => vec![vec![FactorNf::SigmaPgm]],
        SymbolicSet::Union(parts) => parts.iter().flat_map(to_terms).collect(),
        SymbolicSet::Concat(parts) => {
            let mut acc: Vec<Vec<FactorNf>> = vec![vec![]];
            for p in parts {
                let branches = to_terms(p);
                let mut next = Vec::new();
                for a in &acc {
                    for b in &branches {
                        let mut t = a.clone();
                        t.extend(b.iter().cloned());
                        next.push(t);
                    }
                }
                acc = next;
            }
            acc
        }
        SymbolicSet::XfApp { func, arg, inner } => vec![vec![FactorNf::XfApp {
            func: func.clone(),
            arg: *arg,
            inner: inner.normal_form(),
        }]],
        SymbolicSet::FindRef(func, arg) => vec![vec![FactorNf::FindRef(func.clone(), *arg)]],
        SymbolicSet::FdepRef(func, arg) => vec![vec![FactorNf::FdepRef(func.clone(), *arg)]],
    }
}

fn normalize_term(term: Vec<FactorNf>) -> Option<TermOrGround> {
    let mut out: Vec<FactorNf> = Vec::new();
    for factor in term {
        match factor {
            FactorNf::Lit(s) if s.is_empty() => return None,
            FactorNf::Lit(s) => {
                if let Some(FactorNf::Lit(prev)) = out.last_mut() {
                    *prev = concat_sets(prev, &s);
                } else {
                    out.push(FactorNf::Lit(s));
                }
            }
            other => out.push(other),
        }
    }
    out.retain(|f| !matches!(f, FactorNf::Lit(s) if s.is_epsilon_only()));
    match out.as_slice() {
        [] => Some(TermOrGround::Ground(PatternSet::epsilon())),
        [FactorNf::Lit(s)] => Some(TermOrGround::Ground(s.clone())),
        _ => Some(TermOrGround::Term(out)),
    }
}

/// σ-affine decomposition: original = indep ∪ coef·σ for every ground σ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineForm {
    pub indep: SymbolicSet,
    pub coef: SymbolicSet,
}

/// Rewrite every `XfApp(f, i, S)` as `find[f,i] ∪ fdep[f,i]·S` and split the
/// result into σ-independent and σ-coefficient parts.
pub fn normalize_affine(s: &SymbolicSet) -> Result<AffineForm, Error> {
    let expanded = expand_xf(s);
    let mut indep_terms: Vec<SymbolicSet> = Vec::new();
    let mut coef_terms: Vec<SymbolicSet> = Vec::new();
    for term in to_terms(&expanded) {
        let sigma_count = term.iter().filter(|f| matches!(f, FactorNf::Sigma)).count();
        match sigma_count {
            0 => indep_terms.push(term_to_set(&term)),
            1 if matches!(term.last(), Some(FactorNf::Sigma)) => {
                coef_terms.push(term_to_set(&term[..term.len() - 1]));
            }
            _ => {
                return Err(Error::Internal(format!(
                    "σ not in trailing position of term in {s}"
                )))
            }
        }
    }
    Ok(AffineForm {
        indep: SymbolicSet::union(indep_terms),
        coef: SymbolicSet::union(coef_terms),
    })
}

fn expand_xf(s: &SymbolicSet) -> SymbolicSet {
    match s {
        SymbolicSet::XfApp { func, arg, inner } => SymbolicSet::union2(
            SymbolicSet::FindRef(func.clone(), *arg),
            SymbolicSet::concat2(SymbolicSet::FdepRef(func.clone(), *arg), expand_xf(inner)),
        ),
        SymbolicSet::Concat(parts) => SymbolicSet::concat(parts.iter().map(expand_xf)),
        SymbolicSet::Union(parts) => SymbolicSet::union(parts.iter().map(expand_xf)),
        leaf => leaf.clone(),
    }
}

fn term_to_set(factors: &[FactorNf]) -> SymbolicSet {
    SymbolicSet::concat(factors.iter().map(|f| match f {
        FactorNf::Lit(s) => SymbolicSet::lit(s.clone()),
        FactorNf::Sigma => SymbolicSet::Sigma,
        FactorNf::SigmaPgm => SymbolicSet::SigmaPgm,
        FactorNf::XfApp { .. } => unreachable!("xf applications expanded before splitting"),
        FactorNf::FindRef(f_, i) => SymbolicSet::FindRef(f_.clone(), *i),
        FactorNf::FdepRef(f_, i) => SymbolicSet::FdepRef(f_.clone(), *i),
    }))
}

/// Liveness environment: variable ↦ symbolic pattern set. Variables bound to
/// the empty set are not stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LivenessEnv {
    bindings: BTreeMap<String, SymbolicSet>,
}

impl LivenessEnv {
    pub fn new() -> Self {
        LivenessEnv::default()
    }

    /// Add `v.s`, merging with any existing binding for `v`.
    pub fn add(&mut self, var: &str, s: SymbolicSet) {
        if s.is_empty_set() {
            return;
        }
        let merged = match self.bindings.remove(var) {
            Some(old) => SymbolicSet::union2(old, s),
            None => s,
        };
        self.bindings.insert(var.to_string(), merged);
    }

    /// The set bound to `v` (`Empty` when absent).
    pub fn lookup(&self, var: &str) -> SymbolicSet {
        self.bindings
            .get(var)
            .cloned()
            .unwrap_or(SymbolicSet::Empty)
    }

    /// Drop all patterns rooted at `v` (the `𝓛 − v.σ` operation).
    pub fn remove_binding(&mut self, var: &str) {
        self.bindings.remove(var);
    }

    pub fn union(&self, other: &LivenessEnv) -> LivenessEnv {
        let mut out = self.clone();
        for (v, s) in &other.bindings {
            out.add(v, s.clone());
        }
        out
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.bindings.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &SymbolicSet)> {
        self.bindings.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Structural comparison up to normalization of each binding.
    pub fn normal_form(&self) -> BTreeMap<String, SetNf> {
        self.bindings
            .iter()
            .map(|(v, s)| (v.clone(), s.normal_form()))
            .collect()
    }
}

impl fmt::Display for LivenessEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, s)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}.({s})")?;
        }
        write!(f, "}}")
    }
}

/// Per-point liveness annotations collected during analysis.
#[derive(Debug, Clone, Default)]
pub struct AnnotationStore {
    annotations: BTreeMap<ProgramPoint, LivenessEnv>,
}

impl AnnotationStore {
    pub fn new() -> Self {
        AnnotationStore::default()
    }

    pub fn record(&mut self, point: ProgramPoint, env: LivenessEnv) -> Result<(), Error> {
        if self.annotations.insert(point, env).is_some() {
            return Err(Error::Internal(format!("duplicate annotation for {point}")));
        }
        Ok(())
    }

    pub fn get(&self, point: ProgramPoint) -> Option<&LivenessEnv> {
        self.annotations.get(&point)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProgramPoint, &LivenessEnv)> {
        self.annotations.iter()
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::AccessPattern;

    fn lit(parts: &[&str]) -> SymbolicSet {
        SymbolicSet::lit(
            parts
                .iter()
                .map(|p| AccessPattern::parse_canonical(p).unwrap())
                .collect(),
        )
    }

    fn lit_raw(parts: &[&[crate::pattern::PatternSymbol]]) -> SymbolicSet {
        SymbolicSet::lit(
            parts
                .iter()
                .map(|syms| AccessPattern::from_symbols(syms.iter().copied()))
                .collect(),
        )
    }

    use crate::pattern::PatternSymbol::{BarOne, BarZero, Zero};

    #[test]
    fn union_merges_literals() {
        let u = SymbolicSet::union([lit(&[""]), SymbolicSet::Sigma, lit(&["0"])]);
        match &u {
            SymbolicSet::Union(parts) => {
                assert_eq!(parts.len(), 2);
                assert_eq!(parts[0], lit(&["", "0"]));
                assert_eq!(parts[1], SymbolicSet::Sigma);
            }
            other => panic!("expected union, got {other:?}"),
        }
    }

    #[test]
    fn union_of_empties_collapses() {
        assert_eq!(
            SymbolicSet::union([SymbolicSet::Empty, SymbolicSet::Empty]),
            SymbolicSet::Empty
        );
        assert_eq!(
            SymbolicSet::union([SymbolicSet::Empty, SymbolicSet::Sigma]),
            SymbolicSet::Sigma
        );
    }

    #[test]
    fn concat_annihilates_on_empty() {
        assert_eq!(
            SymbolicSet::concat2(lit(&["0"]), SymbolicSet::Empty),
            SymbolicSet::Empty
        );
    }

    #[test]
    fn concat_drops_epsilon_literal() {
        assert_eq!(
            SymbolicSet::concat2(SymbolicSet::epsilon(), SymbolicSet::Sigma),
            SymbolicSet::Sigma
        );
    }

    #[test]
    fn concat_merges_adjacent_literals() {
        let c = SymbolicSet::concat2(lit(&["1"]), lit(&["0", "00"]));
        assert_eq!(c, lit(&["10", "100"]));
    }

    #[test]
    fn normal_form_distributes() {
        // ({ε} ∪ {1})·σ has terms {ε}·σ and {1}·σ
        let s = SymbolicSet::Concat(vec![
            SymbolicSet::Union(vec![lit(&[""]), lit(&["1"])]),
            SymbolicSet::Sigma,
        ]);
        let nf = s.normal_form();
        assert!(nf.ground.is_empty());
        assert_eq!(nf.terms.len(), 2);
    }

    #[test]
    fn normal_form_equates_flattenings() {
        let a = SymbolicSet::Union(vec![
            lit(&["0"]),
            SymbolicSet::Union(vec![lit(&["1"]), SymbolicSet::Sigma]),
        ]);
        let b = SymbolicSet::union([SymbolicSet::Sigma, lit(&["1"]), lit(&["0"])]);
        assert_eq!(a.normal_form(), b.normal_form());
    }

    #[test]
    fn affine_sigma_alone() {
        let af = normalize_affine(&SymbolicSet::Sigma).unwrap();
        assert_eq!(af.indep, SymbolicSet::Empty);
        assert_eq!(af.coef, SymbolicSet::epsilon());
    }

    #[test]
    fn affine_example_constraints() {
        // {ε} ∪ {00̄}·σ ∪ {1}·xf[app,1]({1̄}·σ)
        let s = SymbolicSet::union([
            SymbolicSet::epsilon(),
            SymbolicSet::concat2(lit_raw(&[&[Zero, BarZero]]), SymbolicSet::Sigma),
            SymbolicSet::concat2(
                lit(&["1"]),
                SymbolicSet::xf(
                    "app",
                    1,
                    SymbolicSet::concat2(lit_raw(&[&[BarOne]]), SymbolicSet::Sigma),
                ),
            ),
        ]);
        let af = normalize_affine(&s).unwrap();
        let want_indep = SymbolicSet::union2(
            SymbolicSet::epsilon(),
            SymbolicSet::concat2(lit(&["1"]), SymbolicSet::FindRef("app".into(), 1)),
        );
        let want_coef = SymbolicSet::union2(
            lit_raw(&[&[Zero, BarZero]]),
            SymbolicSet::concat([
                lit(&["1"]),
                SymbolicSet::FdepRef("app".into(), 1),
                lit_raw(&[&[BarOne]]),
            ]),
        );
        assert_eq!(af.indep.normal_form(), want_indep.normal_form());
        assert_eq!(af.coef.normal_form(), want_coef.normal_form());
    }

    #[test]
    fn affine_nested_xf() {
        let s = SymbolicSet::xf("g", 1, SymbolicSet::xf("f", 1, SymbolicSet::Sigma));
        let af = normalize_affine(&s).unwrap();
        let want_indep = SymbolicSet::union2(
            SymbolicSet::FindRef("g".into(), 1),
            SymbolicSet::concat2(
                SymbolicSet::FdepRef("g".into(), 1),
                SymbolicSet::FindRef("f".into(), 1),
            ),
        );
        let want_coef = SymbolicSet::concat2(
            SymbolicSet::FdepRef("g".into(), 1),
            SymbolicSet::FdepRef("f".into(), 1),
        );
        assert_eq!(af.indep.normal_form(), want_indep.normal_form());
        assert_eq!(af.coef.normal_form(), want_coef.normal_form());
    }

    #[test]
    fn affine_rejects_interior_sigma() {
        let s = SymbolicSet::Concat(vec![
            SymbolicSet::Sigma,
            SymbolicSet::FindRef("f".into(), 1),
        ]);
        assert!(normalize_affine(&s).is_err());
    }

    #[test]
    fn env_add_merges() {
        let mut env = LivenessEnv::new();
        env.add("x", lit(&["0"]));
        env.add("x", lit(&["1"]));
        assert_eq!(env.lookup("x"), lit(&["0", "1"]));
        assert_eq!(env.lookup("y"), SymbolicSet::Empty);
    }

    #[test]
    fn env_remove_binding() {
        let mut env = LivenessEnv::new();
        env.add("x", lit(&["0"]));
        env.add("y", SymbolicSet::Sigma);
        env.remove_binding("x");
        assert_eq!(env.lookup("x"), SymbolicSet::Empty);
        assert_eq!(env.lookup("y"), SymbolicSet::Sigma);
    }

    #[test]
    fn env_union_pointwise() {
        let mut a = LivenessEnv::new();
        a.add("x", lit(&["0"]));
        let mut b = LivenessEnv::new();
        b.add("x", lit(&["1"]));
        b.add("y", SymbolicSet::Sigma);
        let u = a.union(&b);
        assert_eq!(u.lookup("x"), lit(&["0", "1"]));
        assert_eq!(u.lookup("y"), SymbolicSet::Sigma);
    }

    #[test]
    fn store_rejects_duplicate_point() {
        let mut store = AnnotationStore::new();
        store.record(ProgramPoint(3), LivenessEnv::new()).unwrap();
        assert!(store.record(ProgramPoint(3), LivenessEnv::new()).is_err());
    }

    #[test]
    fn display_uses_set_notation() {
        let s = SymbolicSet::union2(
            SymbolicSet::epsilon(),
            SymbolicSet::concat2(lit(&["1"]), SymbolicSet::xf("app", 1, SymbolicSet::Sigma)),
        );
        assert_eq!(s.to_string(), "{ε} ∪ {1}·xf[app,1](σ)");
    }
}
