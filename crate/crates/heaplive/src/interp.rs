//! Reference evaluator with heap-graph tracing.
//!
//! Evaluation is eager and left to right. Every program-point visit and every
//! heap-link dereference is logged; the dynamic live paths derived from the
//! log validate the static automata (links are attributed to the variable
//! occurrence actually traversed, so liveness through sharing is out of
//! scope on both the dynamic and static side).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::Error;
use crate::nfa::{accepts, Nfa};
use crate::pattern::{PatternSymbol, RootedPath};
use crate::syntax::{Expr, ExprKind, Program, ProgramPoint};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeapNode {
    Nil,
    Pair(Value, Value),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueKind {
    Num(i64),
    Bool(bool),
    NilRef(NodeId),
    PairRef(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Value {
    pub kind: ValueKind,
    /// The syntactic access path this value was obtained through, reset at
    /// every variable occurrence and extended by car/cdr.
    pub origin: Option<RootedPath>,
}

impl Value {
    fn node(&self) -> Option<NodeId> {
        match self.kind {
            ValueKind::NilRef(id) | ValueKind::PairRef(id) => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkKind {
    Root(String),
    Sel(PatternSymbol),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    PointVisit {
        point: ProgramPoint,
        env: BTreeMap<String, Option<NodeId>>,
        step: usize,
    },
    LinkUse {
        node: Option<NodeId>,
        link: LinkKind,
        via: RootedPath,
        step: usize,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn visits_of(&self, point: ProgramPoint) -> Vec<usize> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::PointVisit { point: p, step, .. } if *p == point => Some(*step),
                _ => None,
            })
            .collect()
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            match e {
                TraceEvent::PointVisit { point, step, .. } => {
                    let _ = writeln!(out, "visit {point} @{step}");
                }
                TraceEvent::LinkUse { via, step, .. } => {
                    let _ = writeln!(out, "use {via} @{step}");
                }
            }
        }
        out
    }
}

struct Interp<'a> {
    program: &'a Program,
    heap: Vec<HeapNode>,
    trace: Trace,
    step: usize,
    fuel: usize,
    depth: usize,
}

const DEFAULT_FUEL: usize = 1_000_000;
const MAX_DEPTH: usize = 200;

impl<'a> Interp<'a> {
    fn tick(&mut self) -> Result<usize, Error> {
        if self.fuel == 0 {
            return Err(Error::Runtime("evaluation step limit exceeded".into()));
        }
        self.fuel -= 1;
        self.step += 1;
        Ok(self.step)
    }

    fn alloc(&mut self, node: HeapNode) -> NodeId {
        self.heap.push(node);
        self.heap.len() - 1
    }

    fn use_link(&mut self, node: Option<NodeId>, link: LinkKind, via: RootedPath) {
        self.step += 1;
        self.trace.events.push(TraceEvent::LinkUse {
            node,
            link,
            via,
            step: self.step,
        });
    }

    fn eval(&mut self, e: &Expr, env: &BTreeMap<String, Value>) -> Result<Value, Error> {
        self.tick()?;
        if self.depth >= MAX_DEPTH {
            return Err(Error::Runtime("evaluation step limit exceeded".into()));
        }
        self.depth += 1;
        let result = self.eval_inner(e, env);
        self.depth -= 1;
        result
    }

    fn eval_inner(&mut self, e: &Expr, env: &BTreeMap<String, Value>) -> Result<Value, Error> {
        self.trace.events.push(TraceEvent::PointVisit {
            point: e.point,
            env: env.iter().map(|(v, val)| (v.clone(), val.node())).collect(),
            step: self.step,
        });
        match &e.kind {
            ExprKind::Const(n) => Ok(Value {
                kind: ValueKind::Num(*n),
                origin: None,
            }),
            ExprKind::Nil => {
                let id = self.alloc(HeapNode::Nil);
                Ok(Value {
                    kind: ValueKind::NilRef(id),
                    origin: None,
                })
            }
            ExprKind::Var(v) => {
                // reading a variable copies the pointer; the root link only
                // counts as used once something dereferences the value
                let val = env
                    .get(v)
                    .cloned()
                    .ok_or_else(|| Error::Runtime(format!("unbound variable {v:?}")))?;
                Ok(Value {
                    origin: Some(RootedPath::root(v.clone())),
                    ..val
                })
            }
            ExprKind::Car(a) => self.select(a, env, PatternSymbol::Zero),
            ExprKind::Cdr(a) => self.select(a, env, PatternSymbol::One),
            ExprKind::IsPair(a) => {
                let v = self.eval(a, env)?;
                self.deref(&v);
                Ok(Value {
                    kind: ValueKind::Bool(matches!(v.kind, ValueKind::PairRef(_))),
                    origin: None,
                })
            }
            ExprKind::IsNull(a) => {
                let v = self.eval(a, env)?;
                self.deref(&v);
                Ok(Value {
                    kind: ValueKind::Bool(matches!(v.kind, ValueKind::NilRef(_))),
                    origin: None,
                })
            }
            ExprKind::Plus(a, b) => {
                let va = self.eval(a, env)?;
                let vb = self.eval(b, env)?;
                self.deref(&va);
                self.deref(&vb);
                match (va.kind, vb.kind) {
                    (ValueKind::Num(x), ValueKind::Num(y)) => Ok(Value {
                        kind: ValueKind::Num(x + y),
                        origin: None,
                    }),
                    _ => Err(Error::Runtime(format!("+ on non-number at {}", e.pos))),
                }
            }
            ExprKind::If(cond, then_e, else_e) => {
                let c = self.eval(cond, env)?;
                match c.kind {
                    ValueKind::Bool(true) => self.eval(then_e, env),
                    ValueKind::Bool(false) => self.eval(else_e, env),
                    _ => Err(Error::Runtime(format!(
                        "if-condition is not a boolean at {}",
                        e.pos
                    ))),
                }
            }
            ExprKind::Cons(a, b) => {
                let va = self.eval(a, env)?;
                let vb = self.eval(b, env)?;
                let id = self.alloc(HeapNode::Pair(va, vb));
                Ok(Value {
                    kind: ValueKind::PairRef(id),
                    origin: None,
                })
            }
            ExprKind::Let(v, e1, e2) => {
                let bound = self.eval(e1, env)?;
                let mut inner = env.clone();
                inner.insert(v.clone(), bound);
                self.eval(e2, &inner)
            }
            ExprKind::Call(f, args) => {
                let def = self
                    .program
                    .function(f)
                    .ok_or_else(|| Error::Runtime(format!("unknown function {f:?}")))?;
                let mut frame = BTreeMap::new();
                for (param, arg_e) in def.params.iter().zip(args) {
                    frame.insert(param.clone(), self.eval(arg_e, env)?);
                }
                self.eval(&def.body, &frame)
            }
        }
    }

    fn select(
        &mut self,
        a: &Expr,
        env: &BTreeMap<String, Value>,
        sel: PatternSymbol,
    ) -> Result<Value, Error> {
        let v = self.eval(a, env)?;
        let id = match v.kind {
            ValueKind::PairRef(id) => id,
            _ => {
                let op = if sel == PatternSymbol::Zero {
                    "car"
                } else {
                    "cdr"
                };
                return Err(Error::Runtime(format!("{op} of a non-pair at {}", a.pos)));
            }
        };
        self.deref(&v);
        let HeapNode::Pair(car, cdr) = self.heap[id].clone() else {
            return Err(Error::Internal("pair reference to non-pair node".into()));
        };
        let field = if sel == PatternSymbol::Zero { car } else { cdr };
        Ok(Value {
            origin: v.origin.map(|p| p.extend(sel)),
            ..field
        })
    }

    /// Inspecting a value's cell uses the link it was reached through.
    fn deref(&mut self, v: &Value) {
        if let Some(p) = &v.origin {
            let link = match p.pattern.symbols().and_then(|s| s.last()) {
                Some(sym) => LinkKind::Sel(*sym),
                None => LinkKind::Root(p.var.clone()),
            };
            self.use_link(v.node(), link, p.clone());
        }
    }

    /// The program exit demands the entire result: log every reachable link,
    /// preferring a value's own recorded origin over the walked-in path.
    fn walk_result(&mut self, val: &Value, base: Option<RootedPath>) {
        let eff = val.origin.clone().or(base);
        if let ValueKind::PairRef(id) = val.kind {
            let HeapNode::Pair(car, cdr) = self.heap[id].clone() else {
                return;
            };
            for (sel, field) in [(PatternSymbol::Zero, car), (PatternSymbol::One, cdr)] {
                let ext = eff.as_ref().map(|p| p.extend(sel));
                if let Some(p) = &ext {
                    self.use_link(Some(id), LinkKind::Sel(sel), p.clone());
                }
                self.walk_result(&field, ext);
            }
        }
    }
}

/// Run the program, producing its value and the instrumented trace.
pub fn evaluate_program(p: &Program) -> Result<(Value, Trace), Error> {
    let mut interp = Interp {
        program: p,
        heap: Vec::new(),
        trace: Trace::default(),
        step: 0,
        fuel: DEFAULT_FUEL,
        depth: 0,
    };
    let result = interp.eval(&p.main, &BTreeMap::new())?;
    interp.step += 1;
    // exit demands the whole result: the link to it plus everything inside
    interp.deref(&result);
    interp.walk_result(&result.clone(), result.origin.clone());
    debug_assert!(heap_acyclic(&interp.heap));
    Ok((result, interp.trace))
}

/// Node ids only ever reference earlier allocations, so the graph is a DAG.
pub fn heap_acyclic(heap: &[HeapNode]) -> bool {
    heap.iter().enumerate().all(|(id, node)| match node {
        HeapNode::Nil => true,
        HeapNode::Pair(a, b) => [a, b]
            .iter()
            .all(|v| v.node().map(|n| n < id).unwrap_or(true)),
    })
}

/// Rooted paths used after the (single) visit of `point`, restricted to the
/// variables in scope there, closed under prefixes.
pub fn collect_dynamic_live_paths(
    trace: &Trace,
    point: ProgramPoint,
    in_scope: &[String],
) -> Result<BTreeSet<RootedPath>, Error> {
    let visits = trace.visits_of(point);
    let at = match visits.as_slice() {
        [step] => *step,
        [] => return Err(Error::Runtime(format!("{point} was never visited"))),
        _ => {
            return Err(Error::Runtime(format!(
                "{point} visited {} times",
                visits.len()
            )))
        }
    };
    let mut out = BTreeSet::new();
    for e in &trace.events {
        let TraceEvent::LinkUse { via, step, .. } = e else {
            continue;
        };
        if *step <= at || !in_scope.contains(&via.var) {
            continue;
        }
        // the path and all its prefixes
        let syms = via.pattern.symbols().unwrap_or(&[]);
        for cut in 0..=syms.len() {
            out.insert(RootedPath::new(
                via.var.clone(),
                crate::pattern::AccessPattern::from_symbols(syms[..cut].iter().copied()),
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SoundnessReport {
    pub checked_points: Vec<ProgramPoint>,
    pub skipped_points: Vec<ProgramPoint>,
    pub violations: Vec<(ProgramPoint, RootedPath)>,
}

impl SoundnessReport {
    pub fn is_sound(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compare dynamic live paths against the static automata at every listed
/// point. Points not visited exactly once are skipped, not failed.
pub fn check_soundness(
    automata: &BTreeMap<(ProgramPoint, String), Nfa>,
    trace: &Trace,
    points: &[ProgramPoint],
    scopes: &BTreeMap<ProgramPoint, Vec<String>>,
) -> SoundnessReport {
    let mut report = SoundnessReport::default();
    for &point in points {
        let empty = Vec::new();
        let in_scope = scopes.get(&point).unwrap_or(&empty);
        let paths = match collect_dynamic_live_paths(trace, point, in_scope) {
            Ok(paths) => paths,
            Err(_) => {
                report.skipped_points.push(point);
                continue;
            }
        };
        report.checked_points.push(point);
        for path in paths {
            let live = automata
                .get(&(point, path.var.clone()))
                .map(|n| accepts(n, &path.pattern).unwrap_or(false))
                .unwrap_or(false);
            if !live {
                report.violations.push((point, path));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::AccessPattern;
    use crate::syntax::{load_program, APPEND_PROGRAM};

    fn run(text: &str) -> (Value, Trace) {
        evaluate_program(&load_program(text).unwrap()).unwrap()
    }

    fn path(v: &str, p: &str) -> RootedPath {
        RootedPath::new(v, AccessPattern::parse_canonical(p).unwrap())
    }

    #[test]
    fn arithmetic() {
        let (v, trace) = run("(+ 2 3)");
        assert_eq!(v.kind, ValueKind::Num(5));
        assert!(trace
            .events
            .iter()
            .all(|e| matches!(e, TraceEvent::PointVisit { .. })));
    }

    #[test]
    fn append_example_result_is_four() {
        let (v, _) = run(APPEND_PROGRAM);
        assert_eq!(v.kind, ValueKind::Num(4));
    }

    #[test]
    fn append_chain_logs_w_paths() {
        let p = load_program(APPEND_PROGRAM).unwrap();
        let (_, trace) = evaluate_program(&p).unwrap();
        let live = collect_dynamic_live_paths(
            &trace,
            ProgramPoint(29),
            &["z".into(), "y".into(), "w".into()],
        )
        .unwrap();
        let want: BTreeSet<RootedPath> = [
            path("w", ""),
            path("w", "1"),
            path("w", "10"),
            path("w", "100"),
        ]
        .into();
        assert_eq!(live, want);
    }

    #[test]
    fn car_of_nil_faults() {
        let p = load_program("(car Nil)").unwrap();
        let err = evaluate_program(&p).unwrap_err();
        assert!(err.to_string().contains("car of a non-pair"), "{err}");
    }

    #[test]
    fn plus_on_list_faults() {
        let p = load_program("(+ 1 Nil)").unwrap();
        assert!(evaluate_program(&p).is_err());
    }

    #[test]
    fn if_condition_must_be_boolean() {
        let p = load_program("(if 1 2 3)").unwrap();
        assert!(evaluate_program(&p).is_err());
    }

    #[test]
    fn single_constant_has_empty_live_set() {
        let p = load_program("5").unwrap();
        let (_, trace) = evaluate_program(&p).unwrap();
        let live = collect_dynamic_live_paths(&trace, ProgramPoint(0), &[]).unwrap();
        assert!(live.is_empty());
    }

    #[test]
    fn unvisited_point_is_error() {
        let p = load_program("(if (null? Nil) 1 2)").unwrap();
        let (v, trace) = evaluate_program(&p).unwrap();
        assert_eq!(v.kind, ValueKind::Num(1));
        // the else-branch point was never reached
        assert!(collect_dynamic_live_paths(&trace, ProgramPoint(4), &[]).is_err());
    }

    #[test]
    fn recursive_point_visits_are_counted() {
        let p = load_program(APPEND_PROGRAM).unwrap();
        let (_, trace) = evaluate_program(&p).unwrap();
        // the app body runs twice (y has one element, so one recursive call)
        assert_eq!(trace.visits_of(ProgramPoint(0)).len(), 2);
        assert!(collect_dynamic_live_paths(&trace, ProgramPoint(0), &[]).is_err());
    }

    #[test]
    fn dynamic_sets_prefix_closed() {
        let p = load_program(APPEND_PROGRAM).unwrap();
        let (_, trace) = evaluate_program(&p).unwrap();
        for point in p.main_points() {
            let scope: Vec<String> = p.scopes()[&point].clone();
            let Ok(live) = collect_dynamic_live_paths(&trace, point, &scope) else {
                continue;
            };
            for rp in &live {
                let syms = rp.pattern.symbols().unwrap();
                for cut in 0..syms.len() {
                    let prefix = RootedPath::new(
                        rp.var.clone(),
                        AccessPattern::from_symbols(syms[..cut].iter().copied()),
                    );
                    assert!(live.contains(&prefix), "missing prefix {prefix} of {rp}");
                }
            }
        }
    }

    #[test]
    fn exit_walk_marks_result_links() {
        // the result is y itself: its whole spine is demanded at exit
        let text = "(let y <- (cons 3 Nil) ; y)";
        let p = load_program(text).unwrap();
        let (_, trace) = evaluate_program(&p).unwrap();
        // point 0 is the let; y's root and both links of its cell are used after it
        let live = collect_dynamic_live_paths(&trace, ProgramPoint(0), &["y".into()]).unwrap();
        let want: BTreeSet<RootedPath> = [path("y", ""), path("y", "0"), path("y", "1")].into();
        assert_eq!(live, want);
    }

    #[test]
    fn heap_stays_acyclic() {
        let p = load_program(APPEND_PROGRAM).unwrap();
        let mut interp = Interp {
            program: &p,
            heap: Vec::new(),
            trace: Trace::default(),
            step: 0,
            fuel: DEFAULT_FUEL,
            depth: 0,
        };
        interp.eval(&p.main, &BTreeMap::new()).unwrap();
        assert!(heap_acyclic(&interp.heap));
    }

    #[test]
    fn trace_dump_format() {
        let (_, trace) = run(APPEND_PROGRAM);
        let dump = trace.dump();
        assert!(dump.contains("visit p29 @"));
        assert!(dump.contains("use w.100 @"));
    }

    #[test]
    fn nonterminating_program_faults() {
        let text = "(define (spin x) (spin x)) (spin Nil)";
        let p = load_program(text).unwrap();
        let err = evaluate_program(&p).unwrap_err();
        assert!(err.to_string().contains("step limit"), "{err}");
    }
}
