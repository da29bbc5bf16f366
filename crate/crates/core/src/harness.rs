//! Differential testing of the net reducer against the reference normalizer.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inet::{EngineError, Stats, Strategy};
use crate::lambda::{
    alpha_eq, normalize, parse, random_closed_term, NormalizeOutcome, ParseError, Term,
};
use crate::system::{Outcome, RunOptions, System};

/// The corpus shipped with the crate.
pub const DEFAULT_CORPUS: &str = include_str!("../corpus/default.txt");

#[derive(Debug, Error)]
#[error("corpus line {line}: {source}")]
pub struct CorpusError {
    pub line: usize,
    pub source: ParseError,
}

/// One term per line; `#` starts a comment and blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<Term>, CorpusError> {
    let mut terms = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        terms.push(parse(line).map_err(|source| CorpusError {
            line: i + 1,
            source,
        })?);
    }
    Ok(terms)
}

/// FIFO, LIFO, then `seeds` random schedules seeded `1..=seeds`.
pub fn strategies(seeds: u64) -> Vec<Strategy> {
    let mut out = vec![Strategy::Fifo, Strategy::Lifo];
    out.extend((1..=seeds).map(Strategy::Random));
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub input: String,
    pub result: Outcome,
    pub strategy: Strategy,
    pub seed: Option<u64>,
    pub fuel: u64,
    pub stats: Stats,
    pub elapsed_ms: f64,
}

pub fn run_report(
    system: &System,
    term: &Term,
    options: RunOptions,
    observer: &mut dyn FnMut(&crate::inet::StepEvent<'_>),
) -> Result<RunReport, EngineError> {
    let start = Instant::now();
    let reduction = system.reduce_observed(term, options, observer)?;
    Ok(RunReport {
        input: term.to_string(),
        result: reduction.outcome,
        strategy: options.strategy,
        seed: match options.strategy {
            Strategy::Random(seed) => Some(seed),
            _ => None,
        },
        fuel: options.fuel,
        stats: reduction.stats,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Match,
    Mismatch,
    BothDiverge,
    EngineStuck,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        matches!(self, Verdict::Mismatch | Verdict::EngineStuck)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EngineRun {
    pub strategy: Strategy,
    pub outcome: Outcome,
    pub beta: u64,
    pub total: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiffRecord {
    pub index: usize,
    pub term: String,
    /// Normal form text, or `DIVERGES(fuel)`.
    pub oracle: String,
    pub engine: Vec<EngineRun>,
    pub verdict: Verdict,
}

pub fn oracle_text(outcome: &NormalizeOutcome, fuel: u64) -> String {
    match outcome {
        NormalizeOutcome::Normal { term, .. } => term.to_string(),
        NormalizeOutcome::FuelExhausted { .. } => format!("DIVERGES({fuel})"),
    }
}

fn verdict(oracle: Option<&Term>, runs: &[(Outcome, Option<Term>)]) -> Verdict {
    if runs.iter().any(|(o, _)| matches!(o, Outcome::Stuck { .. })) {
        return Verdict::EngineStuck;
    }
    match oracle {
        Some(expected) => {
            let all = runs
                .iter()
                .all(|(_, t)| t.as_ref().is_some_and(|t| alpha_eq(t, expected)));
            if all {
                Verdict::Match
            } else {
                Verdict::Mismatch
            }
        }
        None if runs.iter().all(|(o, _)| *o == Outcome::Fuel) => Verdict::BothDiverge,
        None => Verdict::Mismatch,
    }
}

/// Runs the oracle once and the engine under every strategy. The oracle
/// gets the same number as its budget of beta steps.
pub fn diff_term(
    system: &System,
    index: usize,
    term: &Term,
    strategies: &[Strategy],
    fuel: u64,
) -> Result<DiffRecord, EngineError> {
    let oracle = normalize(term, fuel);
    let mut runs = Vec::with_capacity(strategies.len());
    let mut engine = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let r = system.reduce(
            term,
            RunOptions {
                strategy,
                fuel,
                ..RunOptions::default()
            },
        )?;
        engine.push(EngineRun {
            strategy,
            outcome: r.outcome.clone(),
            beta: r.stats.beta,
            total: r.stats.total,
        });
        runs.push((r.outcome, r.term));
    }
    Ok(DiffRecord {
        index,
        term: term.to_string(),
        oracle: oracle_text(&oracle, fuel),
        engine,
        verdict: verdict(oracle.normal_form(), &runs),
    })
}

/// Cases run in parallel; records come back in input order.
pub fn diff_terms(
    system: &System,
    terms: &[Term],
    strategies: &[Strategy],
    fuel: u64,
) -> Result<Vec<DiffRecord>, EngineError> {
    let mut records = terms
        .par_iter()
        .enumerate()
        .map(|(i, t)| diff_term(system, i, t, strategies, fuel))
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by_key(|r| r.index);
    Ok(records)
}

/// `count` closed terms with at most `size` nodes, determined by `seed`.
pub fn fuzz_terms(count: usize, size: usize, seed: u64) -> Vec<Term> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_closed_term(size, rng.gen()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: u64,
    pub rule: String,
    pub li: Option<i32>,
    pub ri: Option<i32>,
}

/// A failing case with everything needed to rerun it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayCase {
    pub term: String,
    pub fuel: u64,
    pub strategies: Vec<String>,
    pub verdict: Verdict,
    /// Interactions of the first strategy whose result disagreed.
    pub failing_strategy: String,
    pub trace: Vec<TraceStep>,
}

fn traced(
    system: &System,
    term: &Term,
    strategy: Strategy,
    fuel: u64,
) -> Result<Vec<TraceStep>, EngineError> {
    let mut trace = Vec::new();
    system.reduce_observed(
        term,
        RunOptions {
            strategy,
            fuel,
            ..RunOptions::default()
        },
        &mut |e| {
            trace.push(TraceStep {
                step: e.step,
                rule: e.rule.to_string(),
                li: e.left_index,
                ri: e.right_index,
            })
        },
    )?;
    Ok(trace)
}

/// Packages a failing record for replay.
pub fn replay_case(
    system: &System,
    record: &DiffRecord,
    fuel: u64,
) -> Result<ReplayCase, EngineError> {
    let term = parse(&record.term).expect("records hold printed terms");
    let failing = record
        .engine
        .iter()
        .find(|r| match &r.outcome {
            Outcome::Normal { term } => *term != record.oracle,
            _ => true,
        })
        .unwrap_or(&record.engine[0])
        .strategy;
    Ok(ReplayCase {
        term: record.term.clone(),
        fuel,
        strategies: record
            .engine
            .iter()
            .map(|r| r.strategy.to_string())
            .collect(),
        verdict: record.verdict,
        failing_strategy: failing.to_string(),
        trace: traced(system, &term, failing, fuel)?,
    })
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("bad replay case: {0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Reruns a saved case; true when verdict and trace are reproduced exactly.
pub fn replay(system: &System, case: &ReplayCase) -> Result<(DiffRecord, bool), ReplayError> {
    let term = parse(&case.term).map_err(|e| ReplayError::Invalid(e.to_string()))?;
    let strategies = case
        .strategies
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<Strategy>, _>>()
        .map_err(ReplayError::Invalid)?;
    let failing: Strategy = case
        .failing_strategy
        .parse()
        .map_err(ReplayError::Invalid)?;
    let record = diff_term(system, 0, &term, &strategies, case.fuel)?;
    let trace = traced(system, &term, failing, case.fuel)?;
    let same = record.verdict == case.verdict && trace == case.trace;
    Ok((record, same))
}
