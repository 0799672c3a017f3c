//! Command-line front end: load a program, run queries, print answers.
//!
//! Exit status: 0 when at least one answer was found, 1 on finite failure
//! ("false."), 2 when a resource budget (not failure) ended the search
//! without answers, 3 on file or syntax errors.

use clap::Parser;
use interlog_core::clp::{solve_with, Answer, Program, SearchStatus, SolveOpts};
use interlog_core::interval::{format_endpoint, Interval};
use interlog_core::parser::{parse_program, parse_query};
use std::io::{BufRead, Write};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "interlog",
    about = "Constraint logic programming over real intervals",
    long_about = "Loads a .ncsp program and answers queries with interval boxes that \
provably contain all solutions. Without a query, starts an interactive prompt."
)]
struct Args {
    /// Program file (.ncsp)
    program: String,

    /// Query, e.g. ':- <115.0|R|120.0>; netw(A,N,B,R,PL).'
    query: Option<String>,

    /// Split answer-box domains down to this width
    #[arg(long, default_value_t = 1e-6)]
    eps_split: f64,

    /// Propagation improvement threshold (0 = exact fixpoint)
    #[arg(long, default_value_t = 0.0)]
    tau: f64,

    /// Stop after this many answers
    #[arg(long, default_value_t = 10)]
    max_answers: usize,

    /// Box budget per answer enumeration (coarsens beyond it)
    #[arg(long, default_value_t = 4096)]
    max_boxes: usize,

    /// Resolution steps allowed per derivation
    #[arg(long, default_value_t = 64)]
    depth: u32,

    /// Keep adjacent answer boxes separate
    #[arg(long)]
    no_consolidate: bool,

    /// Log one line per derivation transition to stderr
    #[arg(long)]
    trace: bool,

    /// Significant digits for printed interval endpoints
    #[arg(long, default_value_t = 17)]
    digits: usize,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let source = match std::fs::read_to_string(&args.program) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", args.program);
            return ExitCode::from(3);
        }
    };
    let program = match parse_program(&source) {
        Ok(p) => Program::new(p),
        Err(e) => {
            eprintln!("{}:{e}", args.program);
            return ExitCode::from(3);
        }
    };
    let opts = SolveOpts {
        eps_split: args.eps_split,
        tau: args.tau,
        max_answers: args.max_answers,
        max_boxes: args.max_boxes,
        depth: args.depth,
        consolidate: !args.no_consolidate,
        trace: args.trace,
    };
    match &args.query {
        Some(q) => run_query(&program, q, opts, args.digits),
        None => repl(&program, opts, args.digits),
    }
}

fn run_query(program: &Program, query: &str, opts: SolveOpts, digits: usize) -> ExitCode {
    let query = match parse_query(query) {
        Ok(q) => q,
        Err(e) => {
            eprintln!("query:{e}");
            return ExitCode::from(3);
        }
    };
    let mut count = 0usize;
    let mut out = std::io::stdout().lock();
    let (status, _successes, diagnostics) = solve_with(
        program,
        &query,
        opts,
        &mut |a| {
            count += 1;
            let _ = writeln!(out, "{}", render_answer(&a, digits));
        },
        &mut |line| eprintln!("{line}"),
    );
    for d in &diagnostics {
        eprintln!("% {d}");
    }
    if count > 0 {
        if status == SearchStatus::DepthLimit {
            let _ = writeln!(out, "% more derivations may exist beyond the depth budget");
        }
        ExitCode::SUCCESS
    } else if status == SearchStatus::DepthLimit {
        let _ = writeln!(out, "% budget exceeded: depth limit cut unexplored derivations");
        ExitCode::from(2)
    } else {
        let _ = writeln!(out, "false.");
        ExitCode::from(1)
    }
}

fn repl(program: &Program, opts: SolveOpts, digits: usize) -> ExitCode {
    let stdin = std::io::stdin();
    let mut line_buf = String::new();
    loop {
        eprint!("?- ");
        line_buf.clear();
        match stdin.lock().read_line(&mut line_buf) {
            Ok(0) => return ExitCode::SUCCESS,
            Ok(_) => {}
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(3);
            }
        }
        let line = line_buf.trim();
        if line.is_empty() {
            continue;
        }
        if line == "halt." || line == ":q" {
            return ExitCode::SUCCESS;
        }
        run_query(program, line, opts, digits);
    }
}

fn render_answer(a: &Answer, digits: usize) -> String {
    let mut s = String::new();
    for (v, t) in &a.bindings {
        s.push_str(&format!("{v} = {t}\n"));
    }
    if a.boxes.len() == 1 {
        render_box(&mut s, &a.box_vars, &a.boxes[0], digits);
    } else {
        for (i, b) in a.boxes.iter().enumerate() {
            s.push_str(&format!("box {} of {}:\n", i + 1, a.boxes.len()));
            render_box(&mut s, &a.box_vars, b, digits);
        }
    }
    if a.coarse {
        s.push_str("% note: box budget reached; domains shown at coarser precision\n");
    }
    s
}

fn render_box(s: &mut String, vars: &[String], doms: &[Interval], digits: usize) {
    for (v, d) in vars.iter().zip(doms) {
        s.push_str(&format!(
            "<{}|{}|{}>\n",
            format_endpoint(d.lo(), digits, false),
            v,
            format_endpoint(d.hi(), digits, true)
        ));
    }
}
