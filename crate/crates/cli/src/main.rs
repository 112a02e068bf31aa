use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aqmsim_core::batch::map_batch;
use aqmsim_core::report::{compare_populations, population_from_csv, sweep_summary, ExperimentReport, OutputFormat};
use aqmsim_core::trace::{read_trace, write_trace};
use aqmsim_core::{run_scenario, Error, QdiscKind, Result, Scenario};

const PAPER_ALPHAS: &str = "0.125,0.25,0.375,0.5,0.625,0.75,0.875";

#[derive(Parser)]
#[command(name = "aqmsim", version, about = "Discrete-event AQM experiments on a two-client bottleneck")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, scenario.conf and report files.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the same scenario once per alpha, in parallel. The queue is
    /// lstfcodel unless --qdisc says otherwise.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = PAPER_ALPHAS, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Welch t-test and F-test between the delay populations of two runs.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, env = "AQMSIM_SEED")]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Recompute a run's report from its trace.csv and scenario.conf.
    Report {
        run: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file of `key = value` lines; flags override it.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// droptail, red, codel or lstfcodel.
    #[arg(long)]
    qdisc: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<String>,
    #[arg(long, env = "AQMSIM_SEED")]
    seed: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Table,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Table => OutputFormat::Table,
        }
    }
}

impl ScenarioArgs {
    fn build(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(path) => Scenario::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?,
            None => Scenario::default(),
        };
        let overrides = [
            ("qdisc.kind", &self.qdisc),
            ("lstfcodel.alpha", &self.alpha),
            ("scenario.duration_s", &self.duration),
            ("scenario.seed", &self.seed),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_run(dir: &Path, scenario: &Scenario) -> Result<ExperimentReport> {
    let out = run_scenario(scenario)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trace_path = dir.join("trace.csv");
    let file = fs::File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    let mut w = BufWriter::new(file);
    write_trace(&mut w, &out.rows).and_then(|_| w.flush()).map_err(|e| Error::io(&trace_path, e))?;
    write_file(&dir.join("scenario.conf"), &scenario.render())?;
    let report = ExperimentReport::from_rows(scenario, &out.rows);
    write_file(&dir.join("report.csv"), &report.to_csv())?;
    write_file(&dir.join("report.txt"), &report.to_table())?;
    Ok(report)
}

fn render(report: &ExperimentReport, format: Format) -> String {
    match format {
        Format::Csv => report.to_csv(),
        Format::Table => report.to_table(),
    }
}

fn read_run_report(dir: &Path) -> Result<ExperimentReport> {
    let conf = dir.join("scenario.conf");
    let scenario = Scenario::parse(&fs::read_to_string(&conf).map_err(|e| Error::io(&conf, e))?)?;
    let trace = dir.join("trace.csv");
    let file = fs::File::open(&trace).map_err(|e| Error::io(&trace, e))?;
    let rows = read_trace(BufReader::new(file))?;
    Ok(ExperimentReport::from_rows(&scenario, &rows))
}

fn execute(cmd: Command) -> Result<String> {
    match cmd {
        Command::Run { scenario, out, format } => {
            let s = scenario.build()?;
            Ok(render(&write_run(&out, &s)?, format))
        }
        Command::Sweep { scenario, alphas, out, format } => {
            let mut base = scenario.build()?;
            if scenario.qdisc.is_none() {
                base.qdisc = QdiscKind::LstfCodel;
            }
            let mut points = Vec::with_capacity(alphas.len());
            for a in alphas {
                let mut s = base.clone();
                s.set("lstfcodel.alpha", &a.to_string())?;
                s.validate()?;
                points.push(s);
            }
            let reports = map_batch(&points, |s| write_run(&out.join(format!("alpha-{}", s.lstf_alpha)), s));
            let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
            write_file(&out.join("summary.csv"), &sweep_summary(&reports, OutputFormat::Csv))?;
            write_file(&out.join("summary.txt"), &sweep_summary(&reports, OutputFormat::Table))?;
            Ok(sweep_summary(&reports, format.into()))
        }
        Command::Compare { run_a, run_b, samples, seed, format } => {
            let load = |dir: &Path| -> Result<_> {
                let path = dir.join("report.csv");
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("{}: no delay population ({e})", path.display())))?;
                population_from_csv(&text, "delay_s")
            };
            let (a, b) = (load(&run_a)?, load(&run_b)?);
            Ok(compare_populations(&a, &b, samples, seed.unwrap_or(1))?.render(format.into()))
        }
        Command::Report { run, format } => Ok(render(&read_run_report(&run)?, format)),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Trace { .. } | Error::Stats(_) => 2,
        Error::Invariant(_) => 3,
        Error::Io { .. } => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("aqmsim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
