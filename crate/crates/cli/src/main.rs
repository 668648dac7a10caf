//! Command-line front end for transparency-extended process tooling: lint
//! and auto-fix annotated models, export TILT documents, simulate
//! transparency event logs, discover models from logs, and run conformance
//! checks.
//!
//! Exit codes: 0 success, 1 findings or deviations present (lint, check),
//! 2 usage or operational errors. Machine-readable JSON goes to stdout or
//! the requested file; diagnostics go to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tiltbpm::bpmn::{parse_bpmn, serialize_bpmn, BpmnModel};
use tiltbpm::conformance::{
    annotate_diagram, check, extract_normative, report_to_json, report_to_text, AnnotateMode,
    ConformanceReport,
};
use tiltbpm::discovery::{build_dfg, dfg_to_dot, inductive_mine, tree_to_bpmn};
use tiltbpm::eventlog::{ingest, IngestResult};
use tiltbpm::export::{document_to_json, export_tilt};
use tiltbpm::lint::{autofix, lint, Finding, LintConfig, RuleRegistry, Severity};
use tiltbpm::simulate::{simulate, SimulationConfig};

const CONFIG_ENV: &str = "TILTBPM_CONFIG";

#[derive(Parser)]
#[command(name = "tiltbpm", version, about = "Transparency-extended business process tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model against the registered transparency rules.
    Lint {
        #[arg(long)]
        model: PathBuf,
        /// Lint configuration (JSON or TOML); falls back to $TILTBPM_CONFIG.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Apply every deterministic auto-fix and write the updated model.
    Fix {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect all transparency annotations into a TILT policy document.
    ExportTilt {
        #[arg(long)]
        model: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play the model out into a synthetic transparency event log.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// Simulation configuration (JSON: traceCount, seed,
        /// branchProbabilities, deviations).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        traces: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine a BPMN model from a transparency event log.
    Discover {
        /// JSON-lines log file, or `-` for standard input.
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the directly-follows graph as DOT.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Also write the ingested log as XES.
        #[arg(long)]
        xes: Option<PathBuf>,
    },
    /// Conformance-check a log against a normative model. Writes the report
    /// plus annotated normative and discovered diagrams.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Report path; the annotated diagrams land next to it as
        /// <stem>.normative.bpmn and <stem>.discovered.bpmn.
        #[arg(long)]
        out: PathBuf,
        /// Also print the human-readable table to stdout.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Render a stored conformance report for humans.
    Report {
        /// Report JSON produced by `check`.
        report: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("tiltbpm: {error:#}");
            ExitCode::from(2)
        }
    }
}

fn load_model(path: &Path) -> Result<BpmnModel> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read model {}", path.display()))?;
    parse_bpmn(&text).with_context(|| format!("cannot parse model {}", path.display()))
}

/// Read a JSON-lines log from a file, or standard input when the path is
/// `-`.
fn load_log(path: &Path) -> Result<IngestResult> {
    let result = if path.as_os_str() == "-" {
        ingest(std::io::stdin().lock())?
    } else {
        let file =
            fs::File::open(path).with_context(|| format!("cannot read log {}", path.display()))?;
        ingest(std::io::BufReader::new(file))?
    };
    for reject in &result.rejects {
        eprintln!("{}:{}: rejected: {}", path.display(), reject.line_no, reject.reason);
    }
    Ok(result)
}

fn load_lint_config(explicit: Option<PathBuf>) -> Result<LintConfig> {
    let path = explicit.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        Some(path) => LintConfig::load(&path)
            .with_context(|| format!("cannot load config {}", path.display())),
        None => Ok(LintConfig::default()),
    }
}

fn write_or_stdout(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn print_findings(findings: &[Finding], format: Format) -> Result<()> {
    match format {
        Format::Json => {
            let mut json = serde_json::to_string_pretty(findings)?;
            json.push('\n');
            print!("{json}");
        }
        _ => {
            for finding in findings {
                println!(
                    "{}: {} [{}] {}{}",
                    finding.severity,
                    finding.element_id,
                    finding.rule_id,
                    finding.message,
                    if finding.fixable { " (fixable)" } else { "" },
                );
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Lint { model, config, format } => {
            let model = load_model(&model)?;
            let config = load_lint_config(config)?;
            let findings = lint(&model, &RuleRegistry::builtin(), &config);
            print_findings(&findings, format)?;
            let errors = findings.iter().filter(|f| f.severity == Severity::Error).count();
            eprintln!(
                "{} finding(s), {} error(s), {} fixable",
                findings.len(),
                errors,
                findings.iter().filter(|f| f.fixable).count()
            );
            Ok(if findings.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Fix { model, config, out } => {
            let parsed = load_model(&model)?;
            let config = load_lint_config(config)?;
            let registry = RuleRegistry::builtin();
            let findings = lint(&parsed, &registry, &config);
            let fixed = autofix(&parsed, &findings, &registry, &config)?;
            fs::write(&out, serialize_bpmn(&fixed))
                .with_context(|| format!("cannot write {}", out.display()))?;
            let applied = findings.iter().filter(|f| f.fixable).count();
            eprintln!("applied {applied} fix(es), wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportTilt { model, out } => {
            let parsed = load_model(&model)?;
            let document = export_tilt(&parsed)?;
            write_or_stdout(out.as_deref(), &document_to_json(&document))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { model, config, seed, traces, out } => {
            let parsed = load_model(&model)?;
            let mut sim_config = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("cannot read config {}", path.display()))?;
                    serde_json::from_str::<SimulationConfig>(&text)
                        .with_context(|| format!("cannot parse config {}", path.display()))?
                }
                None => SimulationConfig::default(),
            };
            if let Some(seed) = seed {
                sim_config.seed = seed;
            }
            if let Some(traces) = traces {
                sim_config.trace_count = traces;
            }
            let output = simulate(&parsed, &sim_config)?;
            write_or_stdout(out.as_deref(), &output)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Discover { log, out, dot, xes } => {
            let result = load_log(&log)?;
            if let Some(dot_path) = dot {
                let dfg = build_dfg(&result.log);
                fs::write(&dot_path, dfg_to_dot(&dfg))
                    .with_context(|| format!("cannot write {}", dot_path.display()))?;
            }
            if let Some(xes_path) = xes {
                fs::write(&xes_path, tiltbpm::eventlog::write_xes(&result.log))
                    .with_context(|| format!("cannot write {}", xes_path.display()))?;
            }
            let tree = inductive_mine(&result.log)?;
            eprintln!("mined process tree: {tree}");
            let model = tree_to_bpmn(&tree);
            fs::write(&out, serialize_bpmn(&model))
                .with_context(|| format!("cannot write {}", out.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { model, log, out, format } => {
            let parsed = load_model(&model)?;
            let result = load_log(&log)?;
            let normative = extract_normative(&parsed);
            let report = check(&normative, &result.log);
            fs::write(&out, report_to_json(&report))
                .with_context(|| format!("cannot write {}", out.display()))?;

            let annotated_normative =
                annotate_diagram(&parsed, &report, AnnotateMode::ColorsOnly)?;
            fs::write(side_file(&out, "normative"), serialize_bpmn(&annotated_normative))?;

            let tree = inductive_mine(&result.log)?;
            let discovered = tree_to_bpmn(&tree);
            let annotated_discovered =
                annotate_diagram(&discovered, &report, AnnotateMode::AttachObserved)?;
            fs::write(side_file(&out, "discovered"), serialize_bpmn(&annotated_discovered))?;

            if format == Some(Format::Text) {
                print!("{}", report_to_text(&report));
            }
            eprintln!(
                "conforming: {}, missing: {}, undeclared: {}",
                report.summary.conforming, report.summary.missing, report.summary.undeclared
            );
            Ok(if report.has_deviations() { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Report { report, format } => {
            let text = fs::read_to_string(&report)
                .with_context(|| format!("cannot read report {}", report.display()))?;
            let parsed: ConformanceReport =
                serde_json::from_str(&text).context("cannot parse report JSON")?;
            match format {
                Format::Json => print!("{}", report_to_json(&parsed)),
                _ => print!("{}", report_to_text(&parsed)),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// `report.json` becomes `report.normative.bpmn` / `report.discovered.bpmn`.
fn side_file(report_path: &Path, label: &str) -> PathBuf {
    let stem = report_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("report")
        .trim_end_matches(".report");
    report_path.with_file_name(format!("{stem}.{label}.bpmn"))
}
