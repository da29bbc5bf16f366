use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tokennet::harness::{
    diff_terms, fuzz_terms, oracle_text, parse_corpus, replay, replay_case, run_report, strategies,
    DiffRecord, ReplayCase, DEFAULT_CORPUS,
};
use tokennet::inet::Strategy;
use tokennet::lambda::{normalize, parse, NormalizeOutcome, Term};
use tokennet::optimal::Sharing;
use tokennet::system::{Outcome, RuleOptions, RunOptions, System};

const OK: u8 = 0;
const FUEL: u8 = 1;
const STUCK: u8 = 2;
const PARSE: u8 = 3;
const MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(
    name = "tokennet",
    version,
    about = "Optimal lambda reduction with token-passing interaction nets"
)]
struct Cli {
    #[command(flatten)]
    rules: RuleFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RuleFlags {
    /// Use only the published rules, without the completions.
    #[arg(long, global = true)]
    paper_only: bool,
    /// Remove the rules for a pair of agent kinds, e.g. `Call~Hold`.
    #[arg(long = "disable-rule", value_name = "A~B", global = true)]
    disabled: Vec<String>,
    /// Where sharing fans are placed by the encoder.
    #[arg(long, value_enum, default_value = "application", global = true)]
    sharing: SharingArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SharingArg {
    Application,
    Binder,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Fifo,
    Lifo,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a term with the net and print its normal form.
    Reduce {
        term: String,
        #[arg(long, value_enum, default_value = "fifo")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        fuel: u64,
        /// Print a JSON run report after the result.
        #[arg(long)]
        stats: bool,
        /// Write every interaction as a JSON line.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Check wiring and linearity after every interaction.
        #[arg(long)]
        debug_checks: bool,
    },
    /// Normalize a term with the reference normal-order reducer.
    Oracle {
        term: String,
        /// Maximum number of beta steps.
        #[arg(long, default_value_t = 1_000_000)]
        fuel: u64,
    },
    /// Compare engine and oracle on every term of a corpus.
    Diff {
        /// Corpus file; the built-in corpus when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 1_000_000)]
        fuel: u64,
    },
    /// Compare engine and oracle on random closed terms.
    Fuzz {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        fuel: u64,
        #[arg(long, default_value_t = 2)]
        seeds: u64,
        /// Directory for replay files of failing cases.
        #[arg(long, value_name = "DIR")]
        save: Option<PathBuf>,
    },
    /// Rerun a saved fuzz case.
    Replay { file: PathBuf },
    /// Print the initial configuration of a term.
    Encode { term: String },
}

fn rule_options(flags: &RuleFlags) -> Result<RuleOptions, String> {
    let mut options = if flags.paper_only {
        RuleOptions::paper_only()
    } else {
        RuleOptions::default()
    };
    options.sharing = match flags.sharing {
        SharingArg::Application => Sharing::Application,
        SharingArg::Binder => Sharing::Binder,
    };
    for pair in &flags.disabled {
        let (a, b) = pair
            .split_once('~')
            .ok_or_else(|| format!("expected A~B, got `{pair}`"))?;
        options
            .disabled
            .push((a.trim().to_string(), b.trim().to_string()));
    }
    Ok(options)
}

fn parse_term(text: &str) -> Result<Term, ExitCode> {
    parse(text).map_err(|e| {
        eprintln!("parse error: {e}");
        ExitCode::from(PARSE)
    })
}

fn emit(out: &mut impl Write, value: &impl Serialize) {
    let line = serde_json::to_string(value).expect("reports serialize");
    writeln!(out, "{line}").expect("stdout is writable");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = match rule_options(&cli.rules) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(PARSE);
        }
    };
    let system = match System::new(&options) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(PARSE);
        }
    };
    match run(cli.command, &system) {
        Ok(code) | Err(code) => code,
    }
}

fn run(command: Command, system: &System) -> Result<ExitCode, ExitCode> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Reduce {
            term,
            strategy,
            seed,
            fuel,
            stats,
            trace,
            debug_checks,
        } => {
            let term = parse_term(&term)?;
            let strategy = match strategy {
                StrategyArg::Fifo => Strategy::Fifo,
                StrategyArg::Lifo => Strategy::Lifo,
                StrategyArg::Random => Strategy::Random(seed),
            };
            let options = RunOptions {
                strategy,
                fuel,
                debug_checks,
                keep_config: false,
            };
            let mut sink = match trace {
                Some(path) => Some(BufWriter::new(fs::File::create(&path).map_err(|e| {
                    eprintln!("{}: {e}", path.display());
                    ExitCode::from(PARSE)
                })?)),
                None => None,
            };
            let report = run_report(system, &term, options, &mut |event| {
                if let Some(sink) = sink.as_mut() {
                    emit(sink, event);
                }
            })
            .map_err(|e| {
                eprintln!("engine error: {e}");
                ExitCode::from(STUCK)
            })?;
            if let Some(mut sink) = sink {
                sink.flush().ok();
            }
            let code = match &report.result {
                Outcome::Normal { term } => {
                    writeln!(out, "{term}").ok();
                    OK
                }
                Outcome::Fuel => {
                    eprintln!("fuel exhausted after {} interactions", report.stats.total);
                    FUEL
                }
                Outcome::Stuck { left, right } => {
                    eprintln!("stuck on {left} ~ {right}");
                    STUCK
                }
                Outcome::NotNormalForm { dump } => {
                    eprintln!("not a normal form: {dump}");
                    STUCK
                }
            };
            if stats {
                emit(&mut out, &report);
            }
            Ok(ExitCode::from(code))
        }
        Command::Oracle { term, fuel } => {
            let term = parse_term(&term)?;
            let outcome = normalize(&term, fuel);
            writeln!(out, "{}", oracle_text(&outcome, fuel)).ok();
            Ok(ExitCode::from(match outcome {
                NormalizeOutcome::Normal { .. } => OK,
                NormalizeOutcome::FuelExhausted { .. } => FUEL,
            }))
        }
        Command::Diff {
            corpus,
            seeds,
            fuel,
        } => {
            let text = match corpus {
                Some(path) => fs::read_to_string(&path).map_err(|e| {
                    eprintln!("{}: {e}", path.display());
                    ExitCode::from(PARSE)
                })?,
                None => DEFAULT_CORPUS.to_string(),
            };
            let terms = parse_corpus(&text).map_err(|e| {
                eprintln!("{e}");
                ExitCode::from(PARSE)
            })?;
            let records = diff(system, &terms, seeds, fuel)?;
            Ok(report_records(&mut out, &records))
        }
        Command::Fuzz {
            count,
            size,
            seed,
            fuel,
            seeds,
            save,
        } => {
            let terms = fuzz_terms(count, size, seed);
            let records = diff(system, &terms, seeds, fuel)?;
            if let Some(dir) = save {
                save_failures(system, &records, fuel, &dir)?;
            }
            Ok(report_records(&mut out, &records))
        }
        Command::Replay { file } => {
            let case: ReplayCase = fs::read_to_string(&file)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
                .map_err(|e| {
                    eprintln!("{}: {e}", file.display());
                    ExitCode::from(PARSE)
                })?;
            let (record, same) = replay(system, &case).map_err(|e| {
                eprintln!("{e}");
                ExitCode::from(PARSE)
            })?;
            eprintln!("reproduced: {same}");
            Ok(report_records(&mut out, &[record]))
        }
        Command::Encode { term } => {
            let term = parse_term(&term)?;
            writeln!(
                out,
                "{}",
                system.initial_config(&term).dump(&system.registry)
            )
            .ok();
            Ok(ExitCode::from(OK))
        }
    }
}

fn diff(
    system: &System,
    terms: &[Term],
    seeds: u64,
    fuel: u64,
) -> Result<Vec<DiffRecord>, ExitCode> {
    diff_terms(system, terms, &strategies(seeds), fuel).map_err(|e| {
        eprintln!("engine error: {e}");
        ExitCode::from(STUCK)
    })
}

fn report_records(out: &mut impl Write, records: &[DiffRecord]) -> ExitCode {
    let mut failures = 0;
    for record in records {
        emit(out, record);
        if record.verdict.is_failure() {
            failures += 1;
            eprintln!("{:?}: {}", record.verdict, record.term);
        }
    }
    eprintln!("{} terms, {failures} failing", records.len());
    ExitCode::from(if failures == 0 { OK } else { MISMATCH })
}

fn save_failures(
    system: &System,
    records: &[DiffRecord],
    fuel: u64,
    dir: &PathBuf,
) -> Result<(), ExitCode> {
    let io_error = |e: io::Error| {
        eprintln!("{}: {e}", dir.display());
        ExitCode::from(PARSE)
    };
    fs::create_dir_all(dir).map_err(io_error)?;
    for record in records.iter().filter(|r| r.verdict.is_failure()) {
        let case = replay_case(system, record, fuel).map_err(|e| {
            eprintln!("engine error: {e}");
            ExitCode::from(STUCK)
        })?;
        let path = dir.join(format!("case-{}.json", record.index));
        let text = serde_json::to_string_pretty(&case).expect("cases serialize");
        fs::write(&path, text).map_err(io_error)?;
        eprintln!("saved {}", path.display());
    }
    Ok(())
}
