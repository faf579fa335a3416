//! End-to-end analysis: symbolic liveness equations, grammar construction,
//! strong-regularity approximation, and the per-point automata with bar
//! symbols eliminated. Also defines the serializable analysis report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grammar::{
    build_grammar, decompose_equations, eliminate_useless_nonterminals, Grammar, Nonterminal,
};
use crate::nfa::{
    accepts, approximate_strongly_regular, eliminate_bar_symbols, grammar_to_nfa,
    prune_dead_states, remove_epsilon_moves, Nfa,
};
use crate::nullify::Candidate;
use crate::pattern::AccessPattern;
use crate::symbolic::AnnotationStore;
use crate::syntax::{Program, ProgramPoint};
use crate::transfer::{analyze_program, XfEquationSet};

/// Everything the pipeline produces for one program.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub equations: XfEquationSet,
    pub store: AnnotationStore,
    /// Context-free grammar after useless-nonterminal elimination.
    pub grammar: Grammar,
    /// Strongly regular approximation of `grammar`.
    pub regular_grammar: Grammar,
    /// Final ε-free, bar-free automaton per (point, variable).
    pub automata: BTreeMap<(ProgramPoint, String), Nfa>,
}

pub fn analyze(p: &Program) -> Result<Analysis, Error> {
    let symbolic = analyze_program(p)?;
    let constraints = decompose_equations(&symbolic.equations)?;
    let raw = build_grammar(&constraints, &symbolic.store, &p.main_points())?;
    let grammar = eliminate_useless_nonterminals(&raw);
    let regular_grammar = approximate_strongly_regular(&grammar);

    let mut automata = BTreeMap::new();
    for start in &regular_grammar.starts {
        let Nonterminal::SPoint(point, var) = start else {
            continue;
        };
        let n = grammar_to_nfa(&regular_grammar, start)?;
        let n = remove_epsilon_moves(&n);
        let n = eliminate_bar_symbols(&n);
        let n = prune_dead_states(&n);
        automata.insert((*point, var.clone()), n);
    }

    Ok(Analysis {
        equations: symbolic.equations,
        store: symbolic.store,
        grammar,
        regular_grammar,
        automata,
    })
}

/// The liveness equations rendered one per line, deterministically ordered.
pub fn equations_text(eqs: &XfEquationSet) -> Vec<String> {
    eqs.iter()
        .map(|((f, i), rhs)| format!("xf[{f},{i}](σ) = {rhs}"))
        .collect()
}

/// Membership of a canonical pattern in the final automaton for (π, v).
pub fn query(
    analysis: &Analysis,
    point: ProgramPoint,
    var: &str,
    pattern: &AccessPattern,
) -> Result<bool, Error> {
    let n = analysis
        .automata
        .get(&(point, var.to_string()))
        .ok_or_else(|| {
            Error::Runtime(format!(
                "no automaton for variable {var} at point {}",
                point.0
            ))
        })?;
    accepts(n, pattern)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarReport {
    pub name: String,
    pub states: usize,
    pub edges: usize,
    pub finals: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointReport {
    pub pi: usize,
    pub vars: Vec<VarReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundnessSummary {
    pub checked_points: usize,
    pub skipped_points: usize,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub points: Vec<PointReport>,
    pub equations: Vec<String>,
    pub candidates: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub soundness: Option<SoundnessSummary>,
}

pub fn build_report(analysis: &Analysis, candidates: &[Candidate]) -> AnalysisReport {
    let mut points: BTreeMap<usize, Vec<VarReport>> = BTreeMap::new();
    for ((point, var), n) in &analysis.automata {
        points.entry(point.0).or_default().push(VarReport {
            name: var.clone(),
            states: n.states.len(),
            edges: n.edges.len(),
            finals: n.finals.len(),
        });
    }
    AnalysisReport {
        points: points
            .into_iter()
            .map(|(pi, vars)| PointReport { pi, vars })
            .collect(),
        equations: equations_text(&analysis.equations),
        candidates: candidates.iter().map(|c| c.to_string()).collect(),
        soundness: None,
    }
}
