use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use circfuzz_core::circuit::{circuit_from_json, circuit_to_json, generate_witness, mock_prove, Circuit};
use circfuzz_core::fixtures::{build_fixture, FixtureKind};
use circfuzz_core::harness::{
    emit_report_bundle, load_reproducer, render_index, replay, run_regex_campaign, run_witness_campaign, Budget,
    CampaignConfig, CampaignControl, CampaignOutcome, CampaignStats, InputsSource, ReplayRecord,
};
use circfuzz_core::oracle::BugCategory;
use circfuzz_core::regex::{CompiledRegex, DEFAULT_STATE_CAP};
use circfuzz_core::transpiler::{inject_bug, string_inputs, transpile, BugInjection, TranspileLimits, TranspileSpec};

const EXIT_CLEAN: u8 = 0;
const EXIT_BUGS: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Fuzzer for arithmetic circuits and the regex-to-circuit transpiler.
#[derive(Parser, Debug)]
#[command(name = "circfuzz", version)]
struct Cli {
    /// Campaign config (JSON); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides CIRCFUZZ_SEED, which overrides the config.
    #[arg(long, global = true, env = "CIRCFUZZ_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one of the hand-built fixture circuits as JSON.
    Fixture {
        /// multiplier_safe, multiplier_soundness, multiplier_completeness,
        /// multiplier_correctness or montgomery_add.
        kind: String,
        /// Montgomery curve coefficient A.
        #[arg(long, default_value = "3")]
        a: String,
        /// Montgomery curve coefficient B (nonzero).
        #[arg(long, default_value = "1")]
        b: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a regex to a fixed-length membership circuit.
    Transpile {
        #[arg(long)]
        regex: String,
        #[arg(long)]
        len: usize,
        /// Bug injection as kind:site.
        #[arg(long)]
        inject: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a circuit honestly and mock-prove the witness.
    Run {
        #[arg(long)]
        circuit: PathBuf,
        /// JSON object of public inputs.
        #[arg(long, conflicts_with = "string")]
        inputs: Option<PathBuf>,
        /// Input string for a transpiled circuit.
        #[arg(long)]
        string: Option<String>,
    },
    /// Run a regex campaign and write a report bundle.
    FuzzRegex {
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        inject: Option<String>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        grammar: Option<PathBuf>,
        /// Stop at the first report of this category.
        #[arg(long)]
        stop_on: Option<String>,
        /// Bundle directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probe a circuit for forged witnesses over given or random inputs.
    FuzzWitness {
        #[arg(long)]
        circuit: PathBuf,
        /// One assignment object or an array of them; random inputs if absent.
        #[arg(long)]
        inputs: Option<PathBuf>,
        /// Probe iterations per input assignment.
        #[arg(long)]
        budget: Option<u64>,
        /// Number of random assignments when --inputs is absent.
        #[arg(long)]
        assignments: Option<u64>,
        /// Findings file (JSON array of reports).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bundle directory for reproducers; defaults to the config's out_dir.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Re-execute one reproducer and classify it again.
    Replay { reproducer: PathBuf },
    /// Summarize a bundle and regenerate its index.md.
    Report { bundle: PathBuf },
}

#[derive(Args, Debug)]
struct BudgetArgs {
    /// Regex iterations.
    #[arg(long)]
    budget: Option<u64>,
    /// (regex, string) pairs.
    #[arg(long)]
    pairs: Option<u64>,
    /// Wall-clock seconds.
    #[arg(long)]
    seconds: Option<f64>,
}

/// Errors that map to exit code 2 rather than a crash.
#[derive(Debug)]
struct UsageError(anyhow::Error);

fn usage<T>(r: Result<T>) -> Result<T, UsageError> {
    r.map_err(UsageError)
}

fn load_config(cli: &Cli) -> Result<CampaignConfig> {
    let mut c = match &cli.config {
        Some(p) => CampaignConfig::from_file(p)?,
        None => CampaignConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(w) = cli.workers {
        c.workers = w;
    }
    Ok(c)
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn read_circuit(path: &Path) -> Result<Circuit> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    circuit_from_json(&bytes).with_context(|| format!("loading {}", path.display()))
}

/// Runs a campaign with Ctrl-C wired to its stop flag, flushing a bundle on
/// every flush tick and once more at the end.
fn campaign(
    dir: &Path,
    run: impl FnOnce(&mut CampaignControl<'_>) -> Result<CampaignOutcome>,
) -> Result<CampaignOutcome> {
    let mut flush_error = None;
    let mut control = CampaignControl::new();
    let stop = control.stop.clone();
    if let Err(e) = ctrlc::set_handler(move || stop.store(true, Ordering::Relaxed)) {
        log::warn!("interrupt handler not installed: {e}");
    }
    control.on_flush = Some(Box::new(|o: &CampaignOutcome| {
        if let Err(e) = emit_report_bundle(&o.records, &o.stats, &o.coverage, dir) {
            flush_error.get_or_insert(e);
        }
    }));
    let out = run(&mut control)?;
    let interrupted = control.stopped();
    drop(control);
    if let Some(e) = flush_error {
        return Err(e).context(format!("flushing bundle to {}", dir.display()));
    }
    emit_report_bundle(&out.records, &out.stats, &out.coverage, dir)
        .with_context(|| format!("writing bundle to {}", dir.display()))?;
    if interrupted {
        eprintln!("interrupted; partial bundle written");
    }
    Ok(out)
}

fn summarize(out: &CampaignOutcome, dir: &Path) {
    let s = &out.stats;
    eprintln!(
        "{} iterations, {} pairs, {} reports, coverage {:.2}% -> {}",
        s.iterations,
        s.pairs,
        out.reports.len(),
        100.0 * s.coverage.fraction,
        dir.display()
    );
    for r in &out.reports {
        println!("{}\t{}\t{}\t{}", r.id, r.category, r.oracle, r.site);
    }
}

fn exit_for(bugs: bool) -> u8 {
    if bugs {
        EXIT_BUGS
    } else {
        EXIT_CLEAN
    }
}

fn execute(cli: Cli) -> Result<u8, UsageError> {
    let config = usage(load_config(&cli))?;
    match cli.command {
        Command::Fixture { kind, a, b, out } => {
            let kind: FixtureKind = usage(kind.parse().map_err(anyhow::Error::msg))?;
            let m = usage(config.field().map_err(Into::into))?;
            let a = usage(m.parse(&a).map_err(|e| anyhow::anyhow!("--a: {e}")))?;
            let b = usage(m.parse(&b).map_err(|e| anyhow::anyhow!("--b: {e}")))?;
            let circuit = usage(build_fixture(kind, m, (a, b)).map_err(Into::into))?;
            usage(write_output(out.as_deref(), &circuit_to_json(&circuit)))?;
            Ok(EXIT_CLEAN)
        }
        Command::Transpile { regex, len, inject, out } => {
            let alphabet = usage(config.alphabet().map_err(Into::into))?;
            let m = usage(config.field().map_err(Into::into))?;
            let compiled = usage(CompiledRegex::compile(&regex, alphabet, DEFAULT_STATE_CAP).map_err(Into::into))?;
            let limits = TranspileLimits { max_input_len: config.max_len.max(len), max_dfa_states: config.max_dfa_states };
            let spec = TranspileSpec::new(&compiled.dfa, len).with_source(&regex).with_limits(limits);
            let circuit = match inject {
                None => transpile(&spec, m),
                Some(tag) => {
                    let inj: BugInjection = usage(tag.parse().map_err(anyhow::Error::from))?;
                    inject_bug(&spec, inj, m).map(|(c, _)| c)
                }
            };
            let circuit = usage(circuit.map_err(Into::into))?;
            usage(write_output(out.as_deref(), &circuit_to_json(&circuit)))?;
            Ok(EXIT_CLEAN)
        }
        Command::Run { circuit, inputs, string } => {
            let circuit = usage(read_circuit(&circuit))?;
            let assignment = match (inputs, string) {
                (Some(p), None) => match usage(InputsSource::from_file(&p).map_err(Into::into))? {
                    InputsSource::Assignments(mut v) if v.len() == 1 => v.remove(0),
                    _ => return Err(UsageError(anyhow::anyhow!("{} must hold exactly one assignment", p.display()))),
                },
                (None, Some(s)) => {
                    string_inputs(s.as_bytes(), circuit.modulus).into_iter().map(|(k, v)| (k, v.to_decimal())).collect()
                }
                _ => return Err(UsageError(anyhow::anyhow!("give exactly one of --inputs or --string"))),
            };
            let mut parsed = BTreeMap::new();
            for (k, v) in &assignment {
                parsed.insert(k.clone(), usage(circuit.modulus.parse(v).map_err(|e| anyhow::anyhow!("{k}: {e}")))?);
            }
            let report = match generate_witness(&circuit, &parsed) {
                Err(e) => serde_json::json!({ "witness_error": e.to_string(), "satisfied": false }),
                Ok(w) => {
                    let result = mock_prove(&circuit, &w);
                    let outputs: BTreeMap<&str, String> = circuit
                        .public_outputs()
                        .into_iter()
                        .map(|s| (circuit.signal_name(s), w.get(s).to_decimal()))
                        .collect();
                    let violated: Vec<_> = result
                        .violations()
                        .iter()
                        .map(|v| serde_json::json!({ "index": v.index, "label": v.label, "residual": v.lhs.to_decimal() }))
                        .collect();
                    serde_json::json!({ "outputs": outputs, "satisfied": violated.is_empty(), "violated": violated })
                }
            };
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
            Ok(exit_for(report["satisfied"] != true))
        }
        Command::FuzzRegex { budget, inject, corpus, grammar, stop_on, out } => {
            let mut config = config;
            if budget.budget.is_some() || budget.pairs.is_some() || budget.seconds.is_some() {
                config.budget = Budget { iterations: budget.budget, pairs: budget.pairs, seconds: budget.seconds };
            }
            config.injection = inject.or(config.injection);
            config.corpus = corpus.or(config.corpus);
            config.grammar = grammar.or(config.grammar);
            if let Some(s) = stop_on {
                let cat = BugCategory::ALL.into_iter().find(|c| c.name() == s);
                config.stop_on = Some(usage(cat.ok_or_else(|| anyhow::anyhow!("unknown category {s:?}")))?);
            }
            config.out_dir = out.unwrap_or(config.out_dir);
            usage(config.validate().map_err(Into::into))?;
            let dir = config.out_dir.clone();
            let out = campaign(&dir, |control| Ok(run_regex_campaign(&config, control)?)).map_err(UsageError)?;
            summarize(&out, &dir);
            Ok(exit_for(out.found_bugs()))
        }
        Command::FuzzWitness { circuit, inputs, budget, assignments, out, bundle } => {
            let mut config = config;
            let circuit = usage(read_circuit(&circuit))?;
            if let Some(b) = budget {
                config.probe.iterations = b;
            }
            if let Some(n) = assignments {
                config.budget.iterations = Some(n);
            }
            let source = match &inputs {
                Some(p) => usage(InputsSource::from_file(p).map_err(Into::into))?,
                None => InputsSource::Random,
            };
            let dir = bundle.unwrap_or_else(|| config.out_dir.clone());
            let outcome = campaign(&dir, |control| Ok(run_witness_campaign(&config, &circuit, &source, control)?))
                .map_err(UsageError)?;
            if let Some(p) = &out {
                let text = serde_json::to_string_pretty(&outcome.reports).expect("json") + "\n";
                usage(std::fs::write(p, text).with_context(|| format!("writing {}", p.display())))?;
            }
            summarize(&outcome, &dir);
            Ok(exit_for(outcome.found_bugs()))
        }
        Command::Replay { reproducer } => {
            let record = usage(load_reproducer(&reproducer).map_err(Into::into))?;
            let verdict = usage(replay(&record).map_err(Into::into))?;
            println!("{}", serde_json::to_string_pretty(&verdict).expect("json"));
            if verdict.category.is_some() && !verdict.matches_report {
                eprintln!(
                    "replay classified differently: stored {} at {}",
                    record.report.category, record.report.site
                );
            }
            Ok(exit_for(verdict.category.is_some()))
        }
        Command::Report { bundle } => {
            let read = |name: &str| {
                let p = bundle.join(name);
                std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
            };
            let stats: CampaignStats = usage(read("stats.json").and_then(|t| Ok(serde_json::from_str(&t)?)))?;
            let reports: Vec<circfuzz_core::oracle::BugReport> =
                usage(read("reports.json").and_then(|t| Ok(serde_json::from_str(&t)?)))?;
            let mut records: Vec<ReplayRecord> = Vec::with_capacity(reports.len());
            for r in &reports {
                let p = bundle.join("reproducers").join(format!("{}.json", r.id));
                records.push(usage(load_reproducer(&p).map_err(Into::into))?);
            }
            let index = render_index(&records, &stats);
            usage(std::fs::write(bundle.join("index.md"), &index).context("writing index.md"))?;
            print!("{index}");
            Ok(exit_for(!reports.is_empty()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(UsageError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
