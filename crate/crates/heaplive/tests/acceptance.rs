//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Run with `--nocapture` to see the lines for passing
//! criteria as well.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use heaplive::grammar::{build_grammar, decompose_equations, eliminate_useless_nonterminals};
use heaplive::interp::{check_soundness, collect_dynamic_live_paths, evaluate_program};
use heaplive::nfa::{
    approximate_strongly_regular, bar_elimination_fixpoint, eliminate_bar_symbols, grammar_to_nfa,
    language_upto, prune_dead_states, remove_epsilon_moves, Label, Nfa,
};
use heaplive::nullify::nullification_candidates;
use heaplive::pattern::PatternSymbol::{BarOne, BarZero, One, Zero};
use heaplive::pattern::{
    reduce_one_step, reduce_to_canonical, AccessPattern, PatternSymbol, RootedPath,
};
use heaplive::pipeline;
use heaplive::symbolic::SymbolicSet;
use heaplive::syntax::{load_program, Program, ProgramPoint, APPEND_PROGRAM};
use heaplive::transfer::analyze_program;

fn criterion(n: usize, desc: &str, ok: bool) {
    println!(
        "criterion {n}: {} - {desc}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} failed: {desc}");
}

fn append_program() -> Program {
    load_program(APPEND_PROGRAM).unwrap()
}

fn lits(parts: &[&[PatternSymbol]]) -> SymbolicSet {
    SymbolicSet::lit(
        parts
            .iter()
            .map(|syms| AccessPattern::from_symbols(syms.iter().copied()))
            .collect(),
    )
}

fn bar1_sigma() -> SymbolicSet {
    SymbolicSet::concat2(lits(&[&[BarOne]]), SymbolicSet::Sigma)
}

fn arg1_equation() -> SymbolicSet {
    SymbolicSet::union([
        SymbolicSet::epsilon(),
        SymbolicSet::concat2(lits(&[&[Zero, BarZero]]), SymbolicSet::Sigma),
        SymbolicSet::concat2(lits(&[&[One]]), SymbolicSet::xf("app", 1, bar1_sigma())),
    ])
}

fn arg2_equation() -> SymbolicSet {
    SymbolicSet::union2(SymbolicSet::Sigma, SymbolicSet::xf("app", 2, bar1_sigma()))
}

#[test]
fn criterion_1_equations() {
    let start = Instant::now();
    let analysis = pipeline::analyze(&append_program()).unwrap();
    let eqs = &analysis.equations;
    let ok = eqs.len() == 2
        && eqs[&("app".to_string(), 1)].normal_form() == arg1_equation().normal_form()
        && eqs[&("app".to_string(), 2)].normal_form() == arg2_equation().normal_form()
        && start.elapsed().as_secs() < 1;
    criterion(1, "derived equations for app match the expected pair", ok);
}

#[test]
fn criterion_2_body_annotations() {
    let p = append_program();
    let r = analyze_program(&p).unwrap();

    let full1 = arg1_equation();
    let tail1 = SymbolicSet::union2(
        SymbolicSet::epsilon(),
        SymbolicSet::concat2(lits(&[&[One]]), SymbolicSet::xf("app", 1, bar1_sigma())),
    );
    let full2 = arg2_equation();
    let tail2 = SymbolicSet::xf("app", 2, bar1_sigma());

    let env = |pairs: &[(&str, &SymbolicSet)]| -> BTreeMap<String, _> {
        pairs
            .iter()
            .map(|(v, s)| (v.to_string(), s.normal_form()))
            .collect()
    };
    let rows: [(usize, BTreeMap<String, _>); 11] = [
        (0, env(&[("list1", &full1), ("list2", &full2)])),
        (1, env(&[("list1", &full1), ("list2", &full2)])),
        (2, env(&[("list1", &full1), ("list2", &full2)])),
        (3, env(&[("list1", &full1), ("list2", &full2)])),
        (4, env(&[("list1", &full1), ("list2", &tail2)])),
        (5, env(&[("list1", &full1), ("list2", &tail2)])),
        (6, env(&[("list1", &full1), ("list2", &tail2)])),
        (7, env(&[("list1", &tail1), ("list2", &tail2)])),
        (8, env(&[("list1", &tail1), ("list2", &tail2)])),
        (9, env(&[("list1", &tail1), ("list2", &tail2)])),
        (10, env(&[("list2", &tail2)])),
    ];
    let ok = rows.iter().all(|(point, want)| {
        r.store
            .get(ProgramPoint(*point))
            .map(|got| got.normal_form() == *want)
            .unwrap_or(false)
    });
    criterion(
        2,
        "all eleven body annotations match the reference table",
        ok,
    );
}

#[test]
fn criterion_3_decomposition() {
    let p = append_program();
    let r = analyze_program(&p).unwrap();
    let constraints = decompose_equations(&r.equations).unwrap();

    let find1 = SymbolicSet::union2(
        SymbolicSet::epsilon(),
        SymbolicSet::concat2(lits(&[&[One]]), SymbolicSet::FindRef("app".into(), 1)),
    );
    let fdep1 = SymbolicSet::union2(
        lits(&[&[Zero, BarZero]]),
        SymbolicSet::concat([
            lits(&[&[One]]),
            SymbolicSet::FdepRef("app".into(), 1),
            lits(&[&[BarOne]]),
        ]),
    );
    let find2 = SymbolicSet::FindRef("app".into(), 2);
    let fdep2 = SymbolicSet::union2(
        SymbolicSet::epsilon(),
        SymbolicSet::concat2(SymbolicSet::FdepRef("app".into(), 2), lits(&[&[BarOne]])),
    );

    let c1 = &constraints[&("app".to_string(), 1)];
    let c2 = &constraints[&("app".to_string(), 2)];
    let shapes_ok = c1.find.normal_form() == find1.normal_form()
        && c1.fdep.normal_form() == fdep1.normal_form()
        && c2.find.normal_form() == find2.normal_form()
        && c2.fdep.normal_form() == fdep2.normal_form();

    // Find_app,2 has no base case, so useless-symbol removal must drop it.
    let raw = build_grammar(&constraints, &r.store, &p.main_points()).unwrap();
    let trimmed = eliminate_useless_nonterminals(&raw);
    let empty_ok = !trimmed
        .nonterminals()
        .iter()
        .any(|nt| nt.to_string() == "Find_app_2");

    criterion(
        3,
        "constraints match the four reference shapes and Find_app,2 is empty",
        shapes_ok && empty_ok,
    );
}

#[test]
fn criterion_4_grammar_productions() {
    let p = append_program();
    let r = analyze_program(&p).unwrap();
    let constraints = decompose_equations(&r.equations).unwrap();
    let raw = build_grammar(&constraints, &r.store, &p.main_points()).unwrap();
    let g = eliminate_useless_nonterminals(&raw);

    let expected: &[(&str, &[&str])] = &[
        ("Find_app_1", &["ε", "1 Find_app_1"]),
        ("Fdep_app_1", &["0 0~", "1 Fdep_app_1 1~"]),
        ("Fdep_app_2", &["ε", "Fdep_app_2 1~"]),
        ("S_pgm", &["ε", "0 S_pgm", "1 S_pgm"]),
        ("S_p29_w", &["ε", "1", "1 0", "1 0 0 S_pgm"]),
        (
            "S_p25_y",
            &[
                "Find_app_1",
                "Fdep_app_1",
                "Fdep_app_1 1",
                "Fdep_app_1 1 0",
                "Fdep_app_1 1 0 0 S_pgm",
            ],
        ),
        (
            "S_p25_z",
            &[
                "Fdep_app_2",
                "Fdep_app_2 1",
                "Fdep_app_2 1 0",
                "Fdep_app_2 1 0 0 S_pgm",
            ],
        ),
    ];

    let mut by_head: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for prod in &g.productions {
        let line = prod.to_string();
        let (head, body) = line.split_once(" -> ").unwrap();
        by_head
            .entry(head.to_string())
            .or_default()
            .insert(body.to_string());
    }

    let ok = expected.iter().all(|(head, bodies)| {
        by_head.get(*head).map_or(false, |got| {
            *got == bodies
                .iter()
                .map(|b| b.to_string())
                .collect::<BTreeSet<_>>()
        })
    });
    criterion(
        4,
        "liveness grammar productions match the reference set",
        ok,
    );
}

fn canonical(s: &str) -> Vec<PatternSymbol> {
    s.chars()
        .map(|c| if c == '0' { Zero } else { One })
        .collect()
}

/// All strings over {0,1} of length ≤ k satisfying `pred`.
fn filter_language(k: usize, pred: impl Fn(&str) -> bool) -> BTreeSet<Vec<PatternSymbol>> {
    let mut out = BTreeSet::new();
    for len in 0..=k {
        for bits in 0..(1u32 << len) {
            let w: String = (0..len)
                .map(|i| if bits >> i & 1 == 1 { '1' } else { '0' })
                .collect();
            if pred(&w) {
                out.insert(canonical(&w));
            }
        }
    }
    out
}

#[test]
fn criterion_5_final_automata() {
    let analysis = pipeline::analyze(&append_program()).unwrap();
    let lang = |pi: usize, v: &str| {
        language_upto(&analysis.automata[&(ProgramPoint(pi), v.to_string())], 6)
    };

    // {ε,1,10} ∪ 100{0,1}*
    let want_w = filter_language(6, |w| ["", "1", "10"].contains(&w) || w.starts_with("100"));
    // 1* ∪ 1*00{0,1}*
    let want_y = filter_language(6, |w| {
        let rest = w.trim_start_matches('1');
        rest.is_empty() || rest.starts_with("00")
    });
    // {ε,1,10,0} ∪ (00|100){0,1}*
    let want_z = filter_language(6, |w| {
        ["", "1", "10", "0"].contains(&w) || w.starts_with("00") || w.starts_with("100")
    });

    let w_ok = lang(29, "w") == want_w;
    let y_ok = lang(25, "y") == want_y;
    let z_ok = lang(25, "z") == want_z;
    if !y_ok {
        // The produced y automaton also accepts 1*0, forced by soundness of
        // bar elimination: e.g. 1 0 0~ 1~ 1 0 is derivable before
        // approximation and reduces to the canonical string 10.
        let extra: BTreeSet<_> = lang(25, "y").difference(&want_y).cloned().collect();
        eprintln!(
            "criterion 5: y automaton differs from the transcription; extra strings: {extra:?}"
        );
    }
    criterion(
        5,
        "final automata languages match the transcribed figures at bound 6",
        w_ok && y_ok && z_ok,
    );
}

fn random_nfa(rng: &mut ChaCha8Rng) -> Nfa {
    let n_states = rng.gen_range(1..=6);
    let n_edges = rng.gen_range(1..=18);
    let syms = [Zero, One, BarZero, BarOne];
    let mut nfa = Nfa::new(0);
    for q in 0..n_states {
        nfa.states.insert(q);
    }
    for _ in 0..n_edges {
        let from = rng.gen_range(0..n_states);
        let to = rng.gen_range(0..n_states);
        let sym = syms[rng.gen_range(0..4)];
        nfa.add_edge(from, Label::Sym(sym), to);
    }
    for q in 0..n_states {
        if rng.gen_bool(1.0 / 3.0) {
            nfa.finals.insert(q);
        }
    }
    if nfa.finals.is_empty() {
        nfa.finals.insert(rng.gen_range(0..n_states));
    }
    nfa
}

fn corpus_seed() -> u64 {
    std::env::var("HEAPLIVE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0xD1CE_5EED)
}

/// The three automata of the worked example, before bar elimination
/// (ε-free), plus 200 random NFAs over the four-symbol alphabet.
fn property_corpus() -> Vec<(String, Nfa)> {
    let p = append_program();
    let r = analyze_program(&p).unwrap();
    let constraints = decompose_equations(&r.equations).unwrap();
    let raw = build_grammar(&constraints, &r.store, &p.main_points()).unwrap();
    let g = approximate_strongly_regular(&eliminate_useless_nonterminals(&raw));

    let mut corpus = Vec::new();
    for (pi, v) in [(29, "w"), (25, "y"), (25, "z")] {
        let start = g
            .starts
            .iter()
            .find(|nt| nt.to_string() == format!("S_p{pi}_{v}"))
            .unwrap()
            .clone();
        let n = remove_epsilon_moves(&grammar_to_nfa(&g, &start).unwrap());
        corpus.push((format!("S_p{pi}_{v}"), n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(corpus_seed());
    for i in 0..200 {
        corpus.push((format!("random_{i}"), random_nfa(&mut rng)));
    }
    corpus
}

/// ε-edges (p, q) such that some string reducing to ε labels a path p→q.
/// Saturation over the cancellation pairs: identity, transitivity, and
/// p --x~--> r ~~> s --x--> q.
fn cancellation_closure(n: &Nfa) -> BTreeSet<(usize, usize)> {
    let mut closure: BTreeSet<(usize, usize)> = n.states.iter().map(|&q| (q, q)).collect();
    loop {
        let mut grew = false;
        let snapshot: Vec<(usize, usize)> = closure.iter().copied().collect();
        for (p, r) in &snapshot {
            for (rr, q) in &snapshot {
                if r == rr && closure.insert((*p, *q)) {
                    grew = true;
                }
            }
        }
        for (p, lbl, r) in &n.edges {
            let Label::Sym(bar) = lbl else { continue };
            let Some(plain) = bar.matching() else {
                continue;
            };
            for (s, lbl2, q) in &n.edges {
                if *lbl2 != Label::Sym(plain) {
                    continue;
                }
                if closure.contains(&(*r, *s)) && closure.insert((*p, *q)) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    closure
}

/// Independent oracle for the canonical-string image of a bar automaton:
/// keep the unbarred edges, add an ε-edge per cancellation-closure pair.
fn reduction_image_oracle(n: &Nfa) -> Nfa {
    let mut out = Nfa::new(n.start);
    out.states = n.states.clone();
    out.finals = n.finals.clone();
    for (p, lbl, q) in &n.edges {
        if let Label::Sym(sym) = lbl {
            if !sym.is_barred() {
                out.add_edge(*p, *lbl, *q);
            }
        }
    }
    for (p, q) in cancellation_closure(n) {
        if p != q {
            out.add_edge(p, Label::Eps, q);
        }
    }
    out
}

#[test]
fn criterion_6_reduction_properties() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (name, nbar) in property_corpus() {
        let fix = bar_elimination_fixpoint(&nbar);
        let nm = fix.result();
        let nfinal = prune_dead_states(&eliminate_bar_symbols(&nbar));

        // closure under one-step reduction
        for word in language_upto(nm, 8) {
            for i in 0..word.len() {
                let pat = AccessPattern::from_symbols(word.iter().copied());
                if let Some(reduct) = reduce_one_step(&pat, i) {
                    if !nm.accepts_symbols(reduct.symbols().unwrap()) {
                        failures.push(format!("{name}: not closed at {pat} pos {i}"));
                    }
                }
            }
        }

        // forward direction: canonical reducts of accepted strings stay in
        for word in language_upto(&nbar, 8) {
            let pat = AccessPattern::from_symbols(word.iter().copied());
            let red = reduce_to_canonical(&pat);
            if red.is_bottom() {
                continue;
            }
            if !nfinal.accepts_symbols(red.symbols().unwrap()) {
                failures.push(format!("{name}: reduct {red} of {pat} rejected"));
            }
        }

        // exactness at bound 6 against the saturation oracle: every accepted
        // canonical string has a witness, and every witnessed string is kept
        let oracle = reduction_image_oracle(&nbar);
        let got = language_upto(&nfinal, 6);
        let want: BTreeSet<_> = language_upto(&oracle, 6);
        if got != want {
            failures.push(format!(
                "{name}: final language differs from reduction image, extra {:?}, missing {:?}",
                got.difference(&want).collect::<Vec<_>>(),
                want.difference(&got).collect::<Vec<_>>()
            ));
        }
    }
    let elapsed = start.elapsed();
    for f in failures.iter().take(5) {
        eprintln!("criterion 6: {f}");
    }
    criterion(
        6,
        "reduction closure and both witness directions hold on the corpus",
        failures.is_empty() && elapsed.as_secs() < 60,
    );
}

#[test]
fn criterion_7_termination_monotonicity() {
    let mut ok = true;
    for (name, nbar) in property_corpus() {
        let fix = bar_elimination_fixpoint(&nbar);
        let monotone = fix.edge_counts.windows(2).all(|w| w[0] <= w[1]);
        let bound = nbar.states.len() * nbar.states.len() * 5;
        if !monotone || fix.iterations() > bound {
            eprintln!(
                "criterion 7: {name}: monotone={monotone}, iterations={} bound={bound}",
                fix.iterations()
            );
            ok = false;
        }
    }
    criterion(
        7,
        "bar elimination grows monotonically and terminates in bound",
        ok,
    );
}

#[test]
fn criterion_8_oracle_soundness() {
    let corpus = [
        "programs/append.hl",
        "programs/length.hl",
        "programs/sum.hl",
        "programs/heads.hl",
        "programs/nested_lets.hl",
        "programs/branch.hl",
        "programs/second.hl",
    ];
    let base = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests");
    let mut ok = true;
    for rel in corpus {
        let text = std::fs::read_to_string(base.join(rel)).unwrap();
        let program = load_program(&text).unwrap();
        let analysis = pipeline::analyze(&program).unwrap();
        let (_, trace) = evaluate_program(&program).unwrap();
        let points: Vec<ProgramPoint> = program.main_points().into_iter().collect();
        let report = check_soundness(&analysis.automata, &trace, &points, &program.scopes());
        if !report.is_sound() {
            eprintln!("criterion 8: {rel}: violations {:?}", report.violations);
            ok = false;
        }
    }

    // the chain point of the worked example sees exactly the four w-paths
    let program = append_program();
    let (_, trace) = evaluate_program(&program).unwrap();
    let scopes = program.scopes();
    let paths =
        collect_dynamic_live_paths(&trace, ProgramPoint(29), &scopes[&ProgramPoint(29)]).unwrap();
    let want: BTreeSet<RootedPath> = ["", "1", "10", "100"]
        .iter()
        .map(|s| RootedPath::new("w", AccessPattern::parse_canonical(s).unwrap()))
        .collect();
    if paths != want {
        eprintln!("criterion 8: dynamic paths at p29 were {paths:?}");
        ok = false;
    }
    criterion(
        8,
        "dynamic live paths are covered by the static automata",
        ok,
    );
}

#[test]
fn criterion_9_nullification() {
    let program = append_program();
    let analysis = pipeline::analyze(&program).unwrap();
    let cands =
        nullification_candidates(&analysis.automata, ProgramPoint(29), 2, &program.scopes())
            .unwrap();
    let paths: BTreeSet<String> = cands.iter().map(|c| c.path.to_string()).collect();
    let ok = paths.contains("w.0")
        && !paths.contains("w.1")
        && !paths.contains("w.10")
        && paths.contains("y.ε");
    criterion(9, "expected candidates at the chain point, depth 2", ok);
}
