use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use srv6pm::collect::{
    flow_totals, format_flow_table, format_histogram, format_report, import_records, loss_histogram, CollectError,
    FlowLoss, RecordFormat,
};
use srv6pm::sim::{preset, ScenarioConfig, SimError, Simulation};

#[derive(Parser)]
#[command(name = "srv6pm", version, about = "Per-flow SRv6 loss monitoring simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or bundled preset and write its measurements.
    Run {
        /// Scenario TOML path, or the name of a bundled preset.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated seconds to run for.
        #[arg(long)]
        until: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "jsonl")]
        format: RecordFormat,
    },
    /// Summarize an exported records file.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Bundled scenarios.
    Scenarios {
        #[command(subcommand)]
        command: ScenariosCommand,
    },
}

#[derive(Subcommand)]
enum ScenariosCommand {
    List,
    /// Print a preset's TOML.
    Show { name: String },
}

enum Failure {
    Config(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<SimError> for Failure {
    fn from(err: SimError) -> Self {
        Failure::Config(err.to_string())
    }
}

impl From<CollectError> for Failure {
    fn from(err: CollectError) -> Self {
        match err {
            CollectError::Io(_) => Failure::Io(err.to_string()),
            _ => Failure::Config(err.to_string()),
        }
    }
}

fn io_error(path: &Path, err: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {err}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            until,
            out,
            format,
        } => run(&scenario, seed, until, &out, format),
        Command::Report { input } => report(&input),
        Command::Scenarios { command } => scenarios(command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Config(msg) | Failure::Io(msg)) = &failure;
            eprintln!("error: {msg}");
            ExitCode::from(failure.code())
        }
    }
}

fn load_text(scenario: &str) -> Result<String, Failure> {
    let path = Path::new(scenario);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| io_error(path, e));
    }
    match preset::preset(scenario) {
        Some(p) => Ok(p.text.to_string()),
        None => Err(Failure::Io(format!("{scenario}: no such file or bundled preset"))),
    }
}

fn run(scenario: &str, seed: Option<u64>, until: Option<f64>, out: &Path, format: RecordFormat) -> Result<(), Failure> {
    let mut config = ScenarioConfig::from_toml(&load_text(scenario)?)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if until.is_some() {
        config.until = until;
    }
    let mut sim = Simulation::from_config(config)?;
    sim.run();

    std::fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let records = sim.store().sorted_records();
    let records_path = out.join(format!("records.{}", format.extension()));
    sim.store().export(&records_path, format)?;
    let topology_path = out.join("topology.json");
    let topology = serde_json::to_string_pretty(sim.controller().topology()).expect("topology serializes");
    std::fs::write(&topology_path, topology + "\n").map_err(|e| io_error(&topology_path, e))?;

    let (flows, note) = match sim.flow_losses() {
        Ok(flows) => (flows, None),
        Err(SimError::EpochNotQuiesced { .. }) => (
            flow_totals(&records),
            Some("oracle unavailable: the run stopped while blocks were still open"),
        ),
        Err(err) => return Err(err.into()),
    };
    let summary = summarize(&sim, scenario, &flows, note);
    let summary_path = out.join("summary.txt");
    std::fs::write(&summary_path, &summary).map_err(|e| io_error(&summary_path, e))?;
    print!("{summary}");
    println!("wrote {}, {}, {}", records_path.display(), topology_path.display(), summary_path.display());
    Ok(())
}

fn summarize(sim: &Simulation, scenario: &str, flows: &[FlowLoss], note: Option<&str>) -> String {
    let mut out = String::new();
    let stats = sim.stats();
    let total = sim.oracle().total();
    let _ = writeln!(out, "scenario   {scenario} (seed {})", sim.config().seed);
    let _ = writeln!(out, "simulated  {:.3}s, {} events", sim.now().as_secs_f64(), stats.events);
    let _ = writeln!(
        out,
        "monitored  {} sent, {} delivered, {} dropped",
        total.sent, total.delivered, total.dropped
    );
    let diagnostics: usize = sim.network().nodes().iter().map(|n| n.diagnostics().len()).sum();
    let _ = writeln!(out, "diagnostics {diagnostics}");
    let _ = writeln!(out, "trace      {}", sim.trace_digest());

    let _ = writeln!(out, "\nper-flow loss");
    out.push_str(&format_flow_table(flows));
    if let Some(note) = note {
        let _ = writeln!(out, "{note}");
    }

    let measured = loss_histogram(flows.iter().map(|f| f.measured));
    let oracle = loss_histogram(flows.iter().filter_map(|f| f.oracle.map(|o| o as i64)));
    let _ = writeln!(out, "\nflows per total loss");
    out.push_str(&format_histogram(&measured, &oracle));
    if flows.iter().all(|f| f.oracle.is_some()) {
        let verdict = if measured == oracle { "identical" } else { "DIFFERENT" };
        let _ = writeln!(out, "histograms {verdict}");
    }
    out
}

fn report(input: &Path) -> Result<(), Failure> {
    let records = import_records(input)?;
    print!("{}", format_report(&records));
    if !records.is_empty() {
        let measured = loss_histogram(flow_totals(&records).iter().map(|f| f.measured));
        println!("\nflows per total loss");
        for (loss, flows) in measured {
            println!("{loss:>6}  {} {flows}", "#".repeat(flows));
        }
    }
    Ok(())
}

fn scenarios(command: ScenariosCommand) -> Result<(), Failure> {
    match command {
        ScenariosCommand::List => {
            for p in preset::PRESETS {
                println!("{:<18} {}", p.name, p.description);
            }
        }
        ScenariosCommand::Show { name } => match preset::preset(&name) {
            Some(p) => print!("{}", p.text),
            None => return Err(Failure::Config(format!("unknown preset {name:?}"))),
        },
    }
    Ok(())
}
