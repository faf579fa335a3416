//! Access patterns over the alphabet {0, 1, 0~, 1~} and their canonical forms.
//!
//! `0` selects the car link of a cell, `1` the cdr link. The barred symbols
//! `0~` and `1~` arise when liveness is pushed backwards through `cons`; they
//! cancel against a matching unbarred symbol or collapse the whole pattern to
//! bottom.

use std::fmt;

/// One selector symbol of an access pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternSymbol {
    /// car link
    Zero,
    /// cdr link
    One,
    /// inverse car marker (written `0~`)
    BarZero,
    /// inverse cdr marker (written `1~`)
    BarOne,
}

impl PatternSymbol {
    pub fn is_barred(self) -> bool {
        matches!(self, PatternSymbol::BarZero | PatternSymbol::BarOne)
    }

    /// The unbarred symbol a barred one cancels against.
    pub fn matching(self) -> Option<PatternSymbol> {
        match self {
            PatternSymbol::BarZero => Some(PatternSymbol::Zero),
            PatternSymbol::BarOne => Some(PatternSymbol::One),
            _ => None,
        }
    }
}

impl fmt::Display for PatternSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternSymbol::Zero => write!(f, "0"),
            PatternSymbol::One => write!(f, "1"),
            PatternSymbol::BarZero => write!(f, "0~"),
            PatternSymbol::BarOne => write!(f, "1~"),
        }
    }
}

/// A finite access pattern, or the failure value bottom.
///
/// The empty sequence is epsilon. A pattern is canonical when it is bottom or
/// contains no barred symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccessPattern {
    Bottom,
    Symbols(Vec<PatternSymbol>),
}

impl AccessPattern {
    pub fn epsilon() -> Self {
        AccessPattern::Symbols(Vec::new())
    }

    pub fn from_symbols(syms: impl IntoIterator<Item = PatternSymbol>) -> Self {
        AccessPattern::Symbols(syms.into_iter().collect())
    }

    /// Parse a canonical pattern from CLI text: a string of '0'/'1' characters.
    pub fn parse_canonical(text: &str) -> Result<Self, String> {
        let mut syms = Vec::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '0' => syms.push(PatternSymbol::Zero),
                '1' => syms.push(PatternSymbol::One),
                other => return Err(format!("invalid pattern character {other:?}")),
            }
        }
        Ok(AccessPattern::Symbols(syms))
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, AccessPattern::Bottom)
    }

    pub fn is_canonical(&self) -> bool {
        match self {
            AccessPattern::Bottom => true,
            AccessPattern::Symbols(s) => s.iter().all(|x| !x.is_barred()),
        }
    }

    pub fn symbols(&self) -> Option<&[PatternSymbol]> {
        match self {
            AccessPattern::Bottom => None,
            AccessPattern::Symbols(s) => Some(s),
        }
    }

    pub fn concat(&self, other: &AccessPattern) -> AccessPattern {
        match (self, other) {
            (AccessPattern::Bottom, _) | (_, AccessPattern::Bottom) => AccessPattern::Bottom,
            (AccessPattern::Symbols(a), AccessPattern::Symbols(b)) => {
                let mut s = a.clone();
                s.extend_from_slice(b);
                AccessPattern::Symbols(s)
            }
        }
    }

    /// Extend with a single trailing selector.
    pub fn push(&self, sym: PatternSymbol) -> AccessPattern {
        match self {
            AccessPattern::Bottom => AccessPattern::Bottom,
            AccessPattern::Symbols(s) => {
                let mut s = s.clone();
                s.push(sym);
                AccessPattern::Symbols(s)
            }
        }
    }
}

impl fmt::Display for AccessPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccessPattern::Bottom => write!(f, "_|_"),
            AccessPattern::Symbols(s) if s.is_empty() => write!(f, "ε"),
            AccessPattern::Symbols(s) => {
                for sym in s {
                    write!(f, "{sym}")?;
                }
                Ok(())
            }
        }
    }
}

/// Reduce a pattern to canonical form.
///
/// A redex is a barred symbol immediately followed by its matching selector;
/// the pair cancels. Redexes are taken in leftmost order until none applies
/// (equivalently, any order: cancellation is confluent). If barred symbols
/// survive, no access can satisfy the pattern and it collapses to bottom.
pub fn reduce_to_canonical(pattern: &AccessPattern) -> AccessPattern {
    let syms = match pattern {
        AccessPattern::Bottom => return AccessPattern::Bottom,
        AccessPattern::Symbols(s) => s,
    };
    let mut stack: Vec<PatternSymbol> = Vec::new();
    for &sym in syms {
        match stack.last() {
            Some(top) if top.matching() == Some(sym) => {
                stack.pop();
            }
            _ => stack.push(sym),
        }
    }
    if stack.iter().any(|s| s.is_barred()) {
        AccessPattern::Bottom
    } else {
        AccessPattern::Symbols(stack)
    }
}

/// Cancel the redex at the given barred-symbol index. Returns `None` if the
/// index does not point at an applicable redex.
pub fn reduce_one_step(pattern: &AccessPattern, index: usize) -> Option<AccessPattern> {
    let syms = pattern.symbols()?;
    let sym = *syms.get(index)?;
    let want = sym.matching()?;
    if syms.get(index + 1) == Some(&want) {
        let mut s = syms.to_vec();
        s.drain(index..=index + 1);
        Some(AccessPattern::Symbols(s))
    } else {
        None
    }
}

/// A finite set of access patterns. Bottom is never stored: members that
/// reduce to bottom are simply dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternSet {
    members: std::collections::BTreeSet<AccessPattern>,
}

impl PatternSet {
    pub fn new() -> Self {
        PatternSet::default()
    }

    pub fn singleton(p: AccessPattern) -> Self {
        let mut s = PatternSet::new();
        s.insert(p);
        s
    }

    pub fn epsilon() -> Self {
        PatternSet::singleton(AccessPattern::epsilon())
    }

    pub fn insert(&mut self, p: AccessPattern) {
        if !p.is_bottom() {
            self.members.insert(p);
        }
    }

    pub fn union(&self, other: &PatternSet) -> PatternSet {
        let mut s = self.clone();
        s.members.extend(other.members.iter().cloned());
        s
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, p: &AccessPattern) -> bool {
        self.members.contains(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AccessPattern> {
        self.members.iter()
    }

    pub fn is_epsilon_only(&self) -> bool {
        self.members.len() == 1 && self.members.contains(&AccessPattern::epsilon())
    }
}

impl FromIterator<AccessPattern> for PatternSet {
    fn from_iter<T: IntoIterator<Item = AccessPattern>>(iter: T) -> Self {
        let mut s = PatternSet::new();
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl fmt::Display for PatternSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

/// Pairwise concatenation of two pattern sets. No reduction is applied.
pub fn concat_sets(s1: &PatternSet, s2: &PatternSet) -> PatternSet {
    let mut out = PatternSet::new();
    for a in s1.iter() {
        for b in s2.iter() {
            out.insert(a.concat(b));
        }
    }
    out
}

/// Prefix test on canonical, non-bottom patterns.
pub fn is_prefix(p: &AccessPattern, q: &AccessPattern) -> Result<bool, String> {
    let (ps, qs) = match (p.symbols(), q.symbols()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err("bottom pattern rejected".into()),
    };
    if !p.is_canonical() || !q.is_canonical() {
        return Err("non-canonical pattern rejected".into());
    }
    Ok(qs.starts_with(ps))
}

/// A variable together with an access pattern rooted at it, e.g. `w.100`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RootedPath {
    pub var: String,
    pub pattern: AccessPattern,
}

impl RootedPath {
    pub fn new(var: impl Into<String>, pattern: AccessPattern) -> Self {
        RootedPath {
            var: var.into(),
            pattern,
        }
    }

    pub fn root(var: impl Into<String>) -> Self {
        RootedPath::new(var, AccessPattern::epsilon())
    }

    pub fn extend(&self, sym: PatternSymbol) -> RootedPath {
        RootedPath::new(self.var.clone(), self.pattern.push(sym))
    }
}

impl fmt::Display for RootedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.var, self.pattern)
    }
}
