//! `dynassure` command-line interface.

use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use dynassure::documents::{self, to_json, ReportSection, WhatIfRequest, SCHEMA_VERSION};
use dynassure::project::load_models;
use dynassure::sources::{self, CsvDefaults, Source};
use dynassure::{api, render, Project, ProjectConfig, ServiceError};
use dynassure_core::architecture::PointValues;
use dynassure_core::argument::generate_skeleton;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "dynassure", version, about = "Dynamic safety assurance: measurement, risk revision and consistency")]
struct Cli {
    /// Project file naming the architecture, SMB, argument and state paths.
    #[arg(long, global = true, env = "DYNASSURE_PROJECT", default_value = "project.json")]
    project: PathBuf,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every validator over the project artifacts.
    Validate,
    /// Append runs from files, `-` (standard input) or `tcp:<port>`.
    Ingest {
        #[arg(required = true)]
        sources: Vec<String>,
        /// Run id for CSV input (default: file name stem).
        #[arg(long)]
        run_id: Option<String>,
        /// Run timestamp for CSV input without timestamps (default: now).
        #[arg(long)]
        timestamp: Option<DateTime<Utc>>,
        /// Operating context for CSV input.
        #[arg(long)]
        context: Option<String>,
    },
    /// Print the indicator status table.
    Eval,
    /// Revise the operational risk assessment and record the revision.
    Revise {
        /// Override an element value after the update, e.g. `B5=0.96`.
        #[arg(long = "set", value_parser = parse_assignment)]
        set: Vec<(String, f64)>,
        /// Revision timestamp (default: now).
        #[arg(long)]
        timestamp: Option<DateTime<Utc>>,
    },
    /// Indicators, risk, trends, drift and consistency in one report.
    Report {
        /// Append a hypothetical revision with these adjustments.
        #[arg(long = "whatif", value_parser = parse_assignment)]
        whatif: Vec<(String, f64)>,
    },
    /// Check that the argument and the SMB agree.
    Consistency,
    /// Re-evaluate indicators whenever the store changes.
    Watch {
        /// Polling interval (default: the project's setting).
        #[arg(long)]
        interval_ms: Option<u64>,
        /// Stop after this many polls.
        #[arg(long)]
        polls: Option<u64>,
    },
    /// Serve the JSON API on localhost.
    Serve {
        #[arg(long, env = "DYNASSURE_PORT")]
        port: Option<u16>,
    },
    /// Generate the skeleton argument of the SMB.
    Skeleton {
        /// Emit graph-description text instead of JSON.
        #[arg(long)]
        dot: bool,
        /// Write to a file instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render the project's argument as graph-description text.
    Dot,
}

fn parse_assignment(text: &str) -> Result<(String, f64), String> {
    let (id, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected ID=VALUE, found `{text}`"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("`{value}`: {e}"))?;
    Ok((id.trim().to_string(), value))
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    /// The check ran but did not pass.
    Failed,
}

fn print_json<T: serde::Serialize>(doc: &T) {
    println!("{}", to_json(doc));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::FAILURE,
        Err(e) => {
            if cli.format == Format::Json {
                print_json(&documents::ErrorDocument::from(&e));
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, ServiceError> {
    let format = cli.format;
    match &cli.command {
        Command::Validate => {
            let project = Project::load(&cli.project)?;
            let diagnostics = project.diagnostics();
            match format {
                Format::Json => print_json(&json!({
                    "schemaVersion": SCHEMA_VERSION,
                    "valid": diagnostics.is_empty(),
                    "diagnostics": diagnostics,
                })),
                Format::Text if diagnostics.is_empty() => println!("valid"),
                Format::Text => {}
            }
            if diagnostics.is_empty() {
                Ok(Outcome::Ok)
            } else {
                Err(ServiceError::Validation(diagnostics))
            }
        }
        Command::Ingest {
            sources: inputs,
            run_id,
            timestamp,
            context,
        } => {
            let mut project = Project::load(&cli.project)?;
            let defaults = CsvDefaults {
                run_id: run_id.clone(),
                timestamp: timestamp.unwrap_or_else(Utc::now),
                context: context.clone(),
            };
            for input in inputs {
                let source = Source::parse(input)?;
                let mut sink = |run: dynassure_core::ingest::DataRun| -> Result<(), ServiceError> {
                    project.ingest(run.clone())?;
                    let ack = documents::RunAccepted::new(&run, project.snapshot().store.runs().len());
                    match format {
                        Format::Json => print_json(&ack),
                        Format::Text => println!("ingested run {} at {} ({} runs stored)", ack.run, ack.timestamp, ack.runs),
                    }
                    let _ = std::io::stdout().flush();
                    Ok(())
                };
                match source {
                    Source::Tcp(port) => {
                        sources::stream_tcp(port, &mut sink)?;
                    }
                    other => {
                        for run in sources::read_runs(&other, &defaults)? {
                            sink(run)?;
                        }
                    }
                }
            }
            Ok(Outcome::Ok)
        }
        Command::Eval => {
            let project = Project::load(&cli.project)?;
            let doc = documents::indicators(project.snapshot())?;
            match format {
                Format::Json => print_json(&doc),
                Format::Text => print!("{}", render::indicators(&doc)),
            }
            Ok(Outcome::Ok)
        }
        Command::Revise { set, timestamp } => {
            let mut project = Project::load(&cli.project)?;
            let overrides: PointValues = set.iter().cloned().collect();
            project.revise(overrides, timestamp.unwrap_or_else(Utc::now))?;
            let doc = documents::risk(project.snapshot())?;
            match format {
                Format::Json => print_json(&doc),
                Format::Text => print!("{}", render::risk(&doc)),
            }
            Ok(Outcome::Ok)
        }
        Command::Report { whatif } => {
            let project = Project::load(&cli.project)?;
            let request = (!whatif.is_empty()).then(|| WhatIfRequest {
                overrides: whatif.iter().cloned().collect(),
                ..WhatIfRequest::default()
            });
            let sections = documents::report(project.snapshot(), request.as_ref())?;
            print_sections(&sections, format);
            Ok(Outcome::Ok)
        }
        Command::Consistency => {
            let project = Project::load(&cli.project)?;
            let doc = documents::consistency(project.snapshot())?;
            match format {
                Format::Json => print_json(&doc),
                Format::Text => print!("{}", render::consistency(&doc)),
            }
            Ok(if doc.verdict.consistent { Outcome::Ok } else { Outcome::Failed })
        }
        Command::Watch { interval_ms, polls } => {
            let mut project = Project::load(&cli.project)?;
            let interval = Duration::from_millis(interval_ms.unwrap_or(project.config.watch_interval_ms));
            let mut render_now = true;
            let mut done = 0u64;
            loop {
                if render_now {
                    let doc = documents::indicators(project.snapshot())?;
                    match format {
                        Format::Json => print_json(&doc),
                        Format::Text => println!("--- {}\n{}", Utc::now().to_rfc3339(), render::indicators(&doc)),
                    }
                    let _ = std::io::stdout().flush();
                }
                done += 1;
                if polls.is_some_and(|n| done >= n) {
                    return Ok(Outcome::Ok);
                }
                std::thread::sleep(interval);
                render_now = project.reload_store()?;
            }
        }
        Command::Serve { port } => {
            let project = Project::load(&cli.project)?;
            let diagnostics = project.diagnostics();
            if !diagnostics.is_empty() {
                return Err(ServiceError::Validation(diagnostics));
            }
            let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port.unwrap_or(project.config.port)));
            let state = api::AppState::new(project);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::io("runtime", e))?;
            eprintln!("serving on http://{addr}");
            runtime
                .block_on(api::serve(state, addr))
                .map_err(|e| ServiceError::io(addr.to_string(), e))?;
            Ok(Outcome::Ok)
        }
        Command::Skeleton { dot, output } => {
            let config = ProjectConfig::load(&cli.project)?;
            let (architecture, smb) = load_models(&config)?;
            let skeleton =
                generate_skeleton(&smb, &architecture).map_err(|e| ServiceError::Validation(vec![e.to_string()]))?;
            let text = if *dot { skeleton.to_dot() } else { skeleton.to_json_string() };
            match output {
                Some(path) => std::fs::write(path, text + "\n").map_err(|e| ServiceError::io(path, e))?,
                None => println!("{text}"),
            }
            Ok(Outcome::Ok)
        }
        Command::Dot => {
            let project = Project::load(&cli.project)?;
            let argument = project
                .snapshot()
                .argument
                .as_ref()
                .ok_or_else(|| ServiceError::NotFound("the project declares no argument".into()))?;
            println!("{}", argument.to_dot());
            Ok(Outcome::Ok)
        }
    }
}

/// JSON: one compact document per line, byte-identical to the API bodies.
fn print_sections(sections: &[ReportSection], format: Format) {
    for section in sections {
        match format {
            Format::Json => println!("{}", section.to_json()),
            Format::Text => println!("{}", render::section(section)),
        }
    }
}
