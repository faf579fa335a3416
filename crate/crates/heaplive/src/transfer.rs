//! Backward liveness transformers: the per-primitive transfer XP, the
//! expression transformer XE, and derivation of one symbolic equation per
//! function argument.
//!
//! Function bodies are analyzed exactly once with a symbolic demand σ; calls
//! stay unexpanded as `xf[f,i](…)` terms. The main expression is analyzed
//! with the σ_pgm marker, so its annotations are free of σ.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::pattern::{AccessPattern, PatternSet, PatternSymbol};
use crate::symbolic::{AnnotationStore, LivenessEnv, SymbolicSet};
use crate::syntax::{Expr, ExprKind, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Car,
    Cdr,
    Cons,
    IsPair,
    IsNull,
    Plus,
}

fn sym_lit(syms: &[PatternSymbol]) -> SymbolicSet {
    SymbolicSet::lit(PatternSet::singleton(AccessPattern::from_symbols(
        syms.iter().copied(),
    )))
}

/// Demand on the `arg`-th operand (1-based) of a primitive whose result is
/// demanded with `sigma`.
pub fn xp_transfer(prim: Primitive, arg: usize, sigma: &SymbolicSet) -> SymbolicSet {
    use PatternSymbol::*;
    match (prim, arg) {
        (Primitive::Car, 1) => SymbolicSet::union2(
            SymbolicSet::epsilon(),
            SymbolicSet::concat2(sym_lit(&[Zero]), sigma.clone()),
        ),
        (Primitive::Cdr, 1) => SymbolicSet::union2(
            SymbolicSet::epsilon(),
            SymbolicSet::concat2(sym_lit(&[One]), sigma.clone()),
        ),
        (Primitive::Cons, 1) => SymbolicSet::concat2(sym_lit(&[BarZero]), sigma.clone()),
        (Primitive::Cons, 2) => SymbolicSet::concat2(sym_lit(&[BarOne]), sigma.clone()),
        (Primitive::IsPair, 1) | (Primitive::IsNull, 1) => SymbolicSet::epsilon(),
        (Primitive::Plus, 1) | (Primitive::Plus, 2) => SymbolicSet::epsilon(),
        _ => unreachable!("primitive {prim:?} has no argument {arg}"),
    }
}

/// Analyze `e` backwards under demand `sigma` against the liveness
/// environment `env` that holds after `e`'s value is produced. The resulting
/// environment is recorded at `e`'s program point and returned.
pub fn xe_analyze(
    e: &Expr,
    sigma: &SymbolicSet,
    env: LivenessEnv,
    store: &mut AnnotationStore,
) -> Result<LivenessEnv, Error> {
    let result = match &e.kind {
        ExprKind::Const(_) | ExprKind::Nil => env,
        ExprKind::Var(v) => {
            let mut out = env;
            out.add(v, sigma.clone());
            out
        }
        ExprKind::Car(a) => analyze_prim(Primitive::Car, &[a], sigma, env, store)?,
        ExprKind::Cdr(a) => analyze_prim(Primitive::Cdr, &[a], sigma, env, store)?,
        ExprKind::IsPair(a) => analyze_prim(Primitive::IsPair, &[a], sigma, env, store)?,
        ExprKind::IsNull(a) => analyze_prim(Primitive::IsNull, &[a], sigma, env, store)?,
        ExprKind::Cons(a, b) => analyze_prim(Primitive::Cons, &[a, b], sigma, env, store)?,
        ExprKind::Plus(a, b) => analyze_prim(Primitive::Plus, &[a, b], sigma, env, store)?,
        ExprKind::If(cond, then_e, else_e) => {
            let after_else = xe_analyze(else_e, sigma, env, store)?;
            let after_then = xe_analyze(then_e, sigma, after_else, store)?;
            xe_analyze(cond, &SymbolicSet::epsilon(), after_then, store)?
        }
        ExprKind::Let(v, e1, e2) => {
            let after_body = xe_analyze(e2, sigma, env, store)?;
            let bound_demand = after_body.lookup(v);
            let mut outer = after_body;
            outer.remove_binding(v);
            xe_analyze(e1, &bound_demand, outer, store)?
        }
        ExprKind::Call(f, args) => {
            let mut acc = env;
            for (i, arg_e) in args.iter().enumerate().rev() {
                let demand = SymbolicSet::xf(f.clone(), i + 1, sigma.clone());
                acc = xe_analyze(arg_e, &demand, acc, store)?;
            }
            acc
        }
    };
    store.record(e.point, result.clone())?;
    Ok(result)
}

fn analyze_prim(
    prim: Primitive,
    args: &[&Expr],
    sigma: &SymbolicSet,
    env: LivenessEnv,
    store: &mut AnnotationStore,
) -> Result<LivenessEnv, Error> {
    let mut acc = env;
    for (i, arg_e) in args.iter().enumerate().rev() {
        let demand = xp_transfer(prim, i + 1, sigma);
        acc = xe_analyze(arg_e, &demand, acc, store)?;
    }
    Ok(acc)
}

/// One equation per (function, argument index), argument indices 1-based.
pub type XfEquationSet = BTreeMap<(String, usize), SymbolicSet>;

/// Derive the symbolic equation for every function argument by analyzing each
/// body once under the formal demand σ. Body-point annotations are written to
/// `store` as a side effect.
pub fn xf_derive_equations(
    p: &Program,
    store: &mut AnnotationStore,
) -> Result<XfEquationSet, Error> {
    let mut eqs = XfEquationSet::new();
    for def in &p.definitions {
        let env = xe_analyze(&def.body, &SymbolicSet::Sigma, LivenessEnv::new(), store)?;
        for (i, param) in def.params.iter().enumerate() {
            eqs.insert((def.name.clone(), i + 1), env.lookup(param));
        }
    }
    Ok(eqs)
}

/// Analyze the main expression under the whole-program demand σ_pgm.
pub fn analyze_main(p: &Program, store: &mut AnnotationStore) -> Result<LivenessEnv, Error> {
    xe_analyze(&p.main, &SymbolicSet::SigmaPgm, LivenessEnv::new(), store)
}

#[derive(Debug, Clone)]
pub struct AnalysisResult {
    pub equations: XfEquationSet,
    pub store: AnnotationStore,
    pub main_env: LivenessEnv,
}

/// Run the whole symbolic phase: equations first, then main.
pub fn analyze_program(p: &Program) -> Result<AnalysisResult, Error> {
    let mut store = AnnotationStore::new();
    let equations = xf_derive_equations(p, &mut store)?;
    let main_env = analyze_main(p, &mut store)?;
    Ok(AnalysisResult {
        equations,
        store,
        main_env,
    })
}

/// Does the term mention the formal demand σ (σ_pgm does not count)?
pub fn contains_sigma(s: &SymbolicSet) -> bool {
    match s {
        SymbolicSet::Sigma => true,
        SymbolicSet::Concat(parts) | SymbolicSet::Union(parts) => parts.iter().any(contains_sigma),
        SymbolicSet::XfApp { inner, .. } => contains_sigma(inner),
        _ => false,
    }
}
