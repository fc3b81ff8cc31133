//! Command-line front end. Exit codes: 0 ok, 1 usage/parse/protocol error,
//! 2 deadlock, 3 illegal, 4 oracle state cap exceeded.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{bench_run, generate, GenSpec, Pattern, CSV_HEADER};
use crate::engine::engine_check_with_stats;
use crate::model::{validate_static, Mode, Model, VerdictClass};
use crate::oracle::{cycle_check, simulate_exhaustive, DEFAULT_STATE_CAP};
use crate::parser::{detect_format, parse_abstract, parse_dsl, render_abstract, render_dsl, Format};
use crate::report::{Report, Stats};
use crate::stream::{Event, StreamSession};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DEADLOCK: i32 = 2;
pub const EXIT_ILLEGAL: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "seqcheck", version, about = "Static deadlock checker for synchronous message-passing models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Auto,
    Strict,
    Abstract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleBackend {
    Simulate,
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PatternArg {
    Pairs,
    Ring,
    Random,
}

impl From<PatternArg> for Pattern {
    fn from(p: PatternArg) -> Self {
        match p {
            PatternArg::Pairs => Pattern::Pairs,
            PatternArg::Ring => Pattern::Ring,
            PatternArg::Random => Pattern::RandomLegal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenFormat {
    Dsl,
    Abstract,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file for deadlock.
    Check {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
        /// Stop after static legality checking.
        #[arg(long)]
        validate_only: bool,
    },
    /// Check an event stream read from standard input.
    Stream {
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
    },
    /// Run a reference backend on a model file.
    Oracle {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "cycle")]
        backend: OracleBackend,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
    },
    /// Time the engine against cycle detection on generated models.
    Bench {
        #[arg(long, value_enum, default_value = "pairs")]
        pattern: PatternArg,
        #[arg(short = 'P', default_value_t = 2)]
        processes: u32,
        #[arg(short = 'M', default_value_t = 1000)]
        messages: u32,
        /// Number of seeds (random pattern), starting at 0.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        csv: bool,
    },
    /// Write a generated model.
    Gen {
        #[arg(long, value_enum, default_value = "pairs")]
        pattern: PatternArg,
        #[arg(short = 'P', default_value_t = 2)]
        processes: u32,
        #[arg(short = 'M', default_value_t = 1)]
        messages: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "dsl")]
        format: GenFormat,
    },
}

/// Runs the CLI with the given arguments (including the program name) and
/// returns the process exit code.
pub fn run<I, T, R>(args: I, stdin: R, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    R: BufRead + Send,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    match cli.command {
        Command::Check {
            path,
            format,
            mode,
            validate_only,
        } => cmd_check(&path, format, mode, validate_only, out, err),
        Command::Stream { format, mode } => cmd_stream(stdin, format, mode, out, err),
        Command::Oracle {
            path,
            backend,
            cap,
            format,
            mode,
        } => cmd_oracle(&path, backend, cap, format, mode, out, err),
        Command::Bench {
            pattern,
            processes,
            messages,
            seeds,
            reps,
            csv,
        } => cmd_bench(pattern.into(), processes, messages, seeds, reps, csv, out, err),
        Command::Gen {
            pattern,
            processes,
            messages,
            seed,
            out: path,
            format,
        } => cmd_gen(
            GenSpec::new(pattern.into(), processes, messages, seed),
            path.as_deref(),
            format,
            out,
            err,
        ),
    }
}

fn exit_for(class: VerdictClass) -> i32 {
    match class {
        VerdictClass::Ok => EXIT_OK,
        VerdictClass::Deadlock => EXIT_DEADLOCK,
        VerdictClass::Illegal => EXIT_ILLEGAL,
    }
}

fn emit(report: &Report, format: OutputFormat, out: &mut dyn Write) {
    let _ = match format {
        OutputFormat::Text => write!(out, "{}", report.render_text()),
        OutputFormat::Json => writeln!(out, "{}", report.to_json()),
    };
}

fn load_model(path: &Path, mode: ModeArg, err: &mut dyn Write) -> Option<Model> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
            return None;
        }
    };
    let format = detect_format(&text);
    if mode == ModeArg::Strict && format != Format::Dsl {
        let _ = writeln!(err, "error: {}: strict mode needs a DSL model", path.display());
        return None;
    }
    let parsed = match format {
        Format::Dsl => parse_dsl(&text),
        Format::Abstract => parse_abstract(&text),
    };
    match parsed {
        Ok(m) if mode == ModeArg::Abstract => Some(m.to_abstract()),
        Ok(m) => Some(m),
        Err(e) => {
            let _ = writeln!(err, "{}:{e}", path.display());
            None
        }
    }
}

fn base_stats(model: &Model, steps: usize) -> Stats {
    Stats {
        messages: model.message_count(),
        steps,
        distinct_signatures: model.distinct_signatures(),
    }
}

pub fn check_model(model: &Model) -> Report {
    let (verdict, stats) = engine_check_with_stats(model);
    Report::new(&verdict, model.space(), base_stats(model, stats.steps))
}

fn cmd_check(
    path: &Path,
    format: OutputFormat,
    mode: ModeArg,
    validate_only: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(model) = load_model(path, mode, err) else {
        return EXIT_ERROR;
    };
    let validation = validate_static(&model);
    let report = if validate_only || validation.is_err() {
        Report::validation(&validation, model.space(), base_stats(&model, 0))
    } else {
        check_model(&model)
    };
    emit(&report, format, out);
    exit_for(report.verdict)
}

fn cmd_stream<R: BufRead + Send>(
    input: R,
    format: OutputFormat,
    mode: ModeArg,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let fixed = match mode {
        ModeArg::Auto => None,
        ModeArg::Strict => Some(Mode::Strict),
        ModeArg::Abstract => Some(Mode::Abstract),
    };
    let mut session = StreamSession::new(fixed);
    let (tx, rx) = mpsc::sync_channel::<(usize, std::io::Result<String>)>(1024);

    std::thread::scope(|scope| {
        scope.spawn(move || {
            for (i, line) in input.lines().enumerate() {
                let failed = line.is_err();
                if tx.send((i + 1, line)).is_err() || failed {
                    break;
                }
            }
        });

        let mut saw_end = false;
        for (lineno, line) in rx.iter() {
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    let _ = writeln!(err, "error: reading input: {e}");
                    return EXIT_ERROR;
                }
            };
            let applied = Event::parse(&line).and_then(|ev| match ev {
                Some(ev) => {
                    let is_end = ev == Event::End;
                    session.apply(ev).map(|_| is_end)
                }
                None => Ok(false),
            });
            match applied {
                Ok(true) => {
                    saw_end = true;
                    break;
                }
                Ok(false) => {}
                Err(e) => {
                    let _ = writeln!(err, "error: line {lineno}: {e}");
                    return EXIT_ERROR;
                }
            }
        }
        // the reader exits once the receiver is gone
        drop(rx);
        if !saw_end {
            let _ = writeln!(err, "error: stream ended without `end`");
            return EXIT_ERROR;
        }
        match session.report() {
            Some(report) => {
                emit(&report, format, out);
                exit_for(report.verdict)
            }
            None => {
                let _ = writeln!(err, "error: stream produced no verdict");
                EXIT_ERROR
            }
        }
    })
}

fn cmd_oracle(
    path: &Path,
    backend: OracleBackend,
    cap: usize,
    format: OutputFormat,
    mode: ModeArg,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(model) = load_model(path, mode, err) else {
        return EXIT_ERROR;
    };
    let report = match backend {
        OracleBackend::Simulate => match simulate_exhaustive(&model, cap) {
            Ok(sim) => Report::new(&sim.verdict, model.space(), base_stats(&model, sim.states))
                .with_confluence(sim.confluence),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_CAP;
            }
        },
        OracleBackend::Cycle => {
            let c = cycle_check(&model);
            let r = Report::new(&c.verdict, model.space(), base_stats(&model, c.nodes + c.edges));
            match &c.witness {
                Some(w) => r.with_witness(w, model.space()),
                None => r,
            }
        }
    };
    emit(&report, format, out);
    exit_for(report.verdict)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    pattern: Pattern,
    processes: u32,
    messages: u32,
    seeds: u64,
    reps: usize,
    csv: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let seeds = if pattern == Pattern::RandomLegal { seeds.max(1) } else { 1 };
    let mut rows = Vec::new();
    for seed in 0..seeds {
        match bench_run(&GenSpec::new(pattern, processes, messages, seed), reps) {
            Ok(r) => rows.extend(r),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_ERROR;
            }
        }
    }
    if csv {
        let _ = writeln!(out, "{CSV_HEADER}");
        for r in &rows {
            let _ = writeln!(out, "{}", r.csv());
        }
    } else {
        let _ = writeln!(
            out,
            "{:<8} {:<8} {:>6} {:>9} {:>10} {:>12} {:>10} {:>10} {:<8}",
            "backend", "pattern", "P", "M", "n", "median_ms", "steps", "table", "verdict"
        );
        for r in &rows {
            let _ = writeln!(
                out,
                "{:<8} {:<8} {:>6} {:>9} {:>10} {:>12.3} {:>10} {:>10} {:<8}",
                r.backend.to_string(),
                r.pattern.to_string(),
                r.processes,
                r.messages_per_process,
                r.n,
                r.median_ms,
                r.steps,
                r.table_size,
                r.verdict.to_string()
            );
        }
    }
    EXIT_OK
}

fn cmd_gen(
    spec: GenSpec,
    path: Option<&Path>,
    format: GenFormat,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let model = match generate(&spec) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let rendered = match format {
        GenFormat::Dsl => render_dsl(&model),
        GenFormat::Abstract => render_abstract(&model),
    };
    let text = match rendered {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    match path {
        Some(p) => {
            if let Err(e) = fs::write(p, text) {
                let _ = writeln!(err, "error: cannot write {}: {e}", p.display());
                return EXIT_ERROR;
            }
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    EXIT_OK
}
