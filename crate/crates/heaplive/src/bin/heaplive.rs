use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use heaplive::interp::{check_soundness, evaluate_program};
use heaplive::nullify::nullification_candidates;
use heaplive::pattern::AccessPattern;
use heaplive::pipeline::{self, Analysis, SoundnessSummary};
use heaplive::syntax::{load_program, Program, ProgramPoint};
use heaplive::Error;

/// Static heap-liveness analyzer for a first-order list language.
#[derive(Parser)]
#[command(name = "heaplive", disable_help_subcommand = true)]
struct Cli {
    /// Source file to analyze.
    input: PathBuf,

    /// Print the derived liveness equations.
    #[arg(long)]
    dump_equations: bool,

    /// Print the liveness grammar, one production per line.
    #[arg(long)]
    dump_grammar: bool,

    /// Write one Graphviz file per (point, variable) automaton into DIR.
    #[arg(long, value_name = "DIR")]
    emit_dot: Option<PathBuf>,

    /// Membership query "PI:VAR:PATTERN"; PATTERN is a string over {0,1},
    /// empty for ε. Prints LIVE or DEAD.
    #[arg(long, value_name = "PI:VAR:PATTERN")]
    query: Option<String>,

    /// Print nullification candidates for every point with automata.
    #[arg(long)]
    nullify_report: bool,

    /// Maximum candidate path length for --nullify-report.
    #[arg(long, default_value_t = 3, value_name = "K")]
    depth: usize,

    /// Run the program and print the dynamic trace; also checks the trace
    /// against the static automata.
    #[arg(long)]
    trace: bool,

    /// Write the JSON analysis report to PATH.
    #[arg(long, value_name = "PATH")]
    json_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("heaplive: {e}");
            match e {
                Error::Syntax { .. } | Error::Validate(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let any_action = cli.dump_equations
        || cli.dump_grammar
        || cli.emit_dot.is_some()
        || cli.query.is_some()
        || cli.nullify_report
        || cli.trace
        || cli.json_out.is_some();
    if !any_action {
        return Err(Error::Validate("no output action selected".into()));
    }

    let text = std::fs::read_to_string(&cli.input)?;
    let program = load_program(&text)?;
    let analysis = pipeline::analyze(&program)?;

    if cli.dump_equations {
        for line in pipeline::equations_text(&analysis.equations) {
            println!("{line}");
        }
    }

    if cli.dump_grammar {
        print!("{}", analysis.grammar.dump());
    }

    if let Some(dir) = &cli.emit_dot {
        std::fs::create_dir_all(dir)?;
        for ((point, var), n) in &analysis.automata {
            let path = dir.join(format!("p{}_{var}.dot", point.0));
            std::fs::write(path, heaplive::nfa::to_dot(n))?;
        }
    }

    if let Some(q) = &cli.query {
        let (point, var, pattern) = parse_query(q)?;
        let live = pipeline::query(&analysis, point, &var, &pattern)?;
        println!("{}", if live { "LIVE" } else { "DEAD" });
    }

    let mut candidates = Vec::new();
    if cli.nullify_report || cli.json_out.is_some() {
        let scopes = program.scopes();
        let points: std::collections::BTreeSet<ProgramPoint> =
            analysis.automata.keys().map(|(p, _)| *p).collect();
        for point in points {
            candidates.extend(nullification_candidates(
                &analysis.automata,
                point,
                cli.depth,
                &scopes,
            )?);
        }
        if cli.nullify_report {
            for c in &candidates {
                println!("{c}");
            }
        }
    }

    let soundness = if cli.trace {
        Some(run_trace(&program, &analysis)?)
    } else {
        None
    };

    if let Some(path) = &cli.json_out {
        let mut report = pipeline::build_report(&analysis, &candidates);
        report.soundness = soundness;
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        std::fs::write(path, json)?;
    }

    Ok(())
}

fn run_trace(program: &Program, analysis: &Analysis) -> Result<SoundnessSummary, Error> {
    let (_, trace) = evaluate_program(program)?;
    print!("{}", trace.dump());
    let scopes = program.scopes();
    let points: Vec<ProgramPoint> = analysis
        .automata
        .keys()
        .map(|(p, _)| *p)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let report = check_soundness(&analysis.automata, &trace, &points, &scopes);
    Ok(SoundnessSummary {
        checked_points: report.checked_points.len(),
        skipped_points: report.skipped_points.len(),
        violations: report
            .violations
            .iter()
            .map(|(p, path)| format!("pi={} {path}", p.0))
            .collect(),
    })
}

fn parse_query(q: &str) -> Result<(ProgramPoint, String, AccessPattern), Error> {
    let parts: Vec<&str> = q.splitn(3, ':').collect();
    let bad = || Error::Validate(format!("malformed query {q:?}, expected PI:VAR:PATTERN"));
    let [pi, var, pattern] = parts.as_slice() else {
        return Err(bad());
    };
    let pi: usize = pi.parse().map_err(|_| bad())?;
    if var.is_empty() {
        return Err(bad());
    }
    let pattern = AccessPattern::parse_canonical(pattern)
        .map_err(|_| Error::Validate(format!("query pattern must be a string over {{0,1}}")))?;
    Ok((ProgramPoint(pi), var.to_string(), pattern))
}
