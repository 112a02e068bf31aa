//! Population statistics per run, the two-run comparison and sweep tables.
//!
//! Reports are built from trace rows only, so regenerating one from a stored
//! trace and scenario gives the same bytes as the run that produced it.

use std::fmt::Write as _;

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::rng::{stream, RngState};
use crate::stats::{clt_sample, f_test, welch_t_test, Alternative, FTestResult, RunningStats, TTestResult};
use crate::trace::{TraceEvent, TraceRow};

pub const REPORT_CSV_HEADER: &str = "metric,n,mean,variance,std_dev";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Table,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub enqueue: u64,
    pub dequeue: u64,
    pub tail_drop: u64,
    pub aqm_drop: u64,
    pub deliver: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    /// Sojourn of every served packet, seconds.
    pub delay: RunningStats,
    /// Byte backlog seen after each enqueue and dequeue.
    pub queue_bytes: RunningStats,
    /// Slack estimate at each enqueue; present for slack-based queues.
    pub slack: Option<RunningStats>,
    pub counts: EventCounts,
}

fn write_row(out: &mut String, metric: &str, s: &RunningStats) {
    let var = s.population_variance();
    writeln!(out, "{metric},{},{},{},{}", s.n(), s.mean(), var, var.sqrt()).expect("writing to a String");
}

impl ExperimentReport {
    pub fn from_rows(scenario: &Scenario, rows: &[TraceRow]) -> Self {
        let mut delay = RunningStats::new();
        let mut queue_bytes = RunningStats::new();
        let mut slack: Option<RunningStats> = None;
        let mut counts = EventCounts::default();
        for r in rows {
            match r.event {
                TraceEvent::Enqueue => {
                    counts.enqueue += 1;
                    queue_bytes.push(r.qlen_bytes as f64);
                    if let Some(g) = r.gamma {
                        slack.get_or_insert_with(RunningStats::new).push(g.as_secs_f64());
                    }
                }
                TraceEvent::Dequeue => {
                    counts.dequeue += 1;
                    queue_bytes.push(r.qlen_bytes as f64);
                    if let Some(s) = r.sojourn {
                        delay.push(s.as_secs_f64());
                    }
                }
                TraceEvent::TailDrop => counts.tail_drop += 1,
                TraceEvent::AqmDrop => counts.aqm_drop += 1,
                TraceEvent::Deliver => counts.deliver += 1,
            }
        }
        ExperimentReport { scenario: scenario.clone(), delay, queue_bytes, slack, counts }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_CSV_HEADER}\n");
        write_row(&mut out, "delay_s", &self.delay);
        write_row(&mut out, "queue_bytes", &self.queue_bytes);
        if let Some(s) = &self.slack {
            write_row(&mut out, "slack_s", s);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "qdisc {}  seed {}  duration {} s", s.qdisc, s.seed, s.duration);
        if s.qdisc == crate::config::QdiscKind::LstfCodel {
            let _ = writeln!(w, "alpha {}", s.lstf_alpha);
        }
        let mut block = |title: &str, st: &RunningStats| {
            let _ = writeln!(w, "\n{title}");
            let _ = writeln!(w, "  {:<20}{}", "Samples", st.n());
            let _ = writeln!(w, "  {:<20}{}", "Mean", st.mean());
            let _ = writeln!(w, "  {:<20}{}", "Variance", st.population_variance());
            let _ = writeln!(w, "  {:<20}{}", "Standard Deviation", st.population_std_dev());
        };
        block("Queuing delay (s)", &self.delay);
        block("Queue length (bytes; variance in bytes^2)", &self.queue_bytes);
        if let Some(sl) = &self.slack {
            block("Slack (s)", sl);
        }
        let c = &self.counts;
        let _ = writeln!(w, "\nEvents");
        for (k, v) in [
            ("enqueue", c.enqueue),
            ("dequeue", c.dequeue),
            ("tail_drop", c.tail_drop),
            ("aqm_drop", c.aqm_drop),
            ("deliver", c.deliver),
        ] {
            let _ = writeln!(w, "  {k:<20}{v}");
        }
        out
    }
}

/// Reads one metric's population moments back out of a `report.csv`.
pub fn population_from_csv(text: &str, metric: &str) -> Result<RunningStats> {
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_CSV_HEADER) {
        return Err(Error::Config("report.csv has an unexpected header".into()));
    }
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 || f[0] != metric {
            continue;
        }
        let bad = |what: &str| Error::Config(format!("report.csv: bad {what} for {metric}"));
        let n: u64 = f[1].parse().map_err(|_| bad("n"))?;
        let mean: f64 = f[2].parse().map_err(|_| bad("mean"))?;
        let var: f64 = f[3].parse().map_err(|_| bad("variance"))?;
        return Ok(RunningStats::from_moments(n, mean, var * n as f64));
    }
    Err(Error::Config(format!("report.csv has no '{metric}' population")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub n: usize,
    pub seed: u64,
    pub welch: TTestResult,
    pub f: FTestResult,
}

/// Draws `n` normal samples from each population's moments and tests
/// `mean(a) > mean(b)` and `var(a) / var(b)`.
pub fn compare_populations(a: &RunningStats, b: &RunningStats, n: usize, seed: u64) -> Result<Comparison> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 samples per run, got {n}")));
    }
    if a.n() == 0 || b.n() == 0 {
        return Err(Error::Config("both runs need a non-empty delay population".into()));
    }
    let mut rng = RngState::new(seed, stream::CLT);
    let xs = clt_sample(a.mean(), a.population_std_dev(), n, &mut rng);
    let ys = clt_sample(b.mean(), b.population_std_dev(), n, &mut rng);
    let welch = welch_t_test(&xs, &ys, Alternative::Greater)?;
    let f = f_test(&xs, &ys)?;
    Ok(Comparison { n, seed, welch, f })
}

fn bound(x: f64) -> String {
    if x == f64::INFINITY {
        "∞".into()
    } else if x == f64::NEG_INFINITY {
        "-∞".into()
    } else {
        x.to_string()
    }
}

impl Comparison {
    pub fn render(&self, format: OutputFormat) -> String {
        let (t, f) = (&self.welch, &self.f);
        match format {
            OutputFormat::Csv => {
                let mut out = String::from("test,statistic,df1,df2,p_value,ci_lower,ci_upper,estimate_a,estimate_b\n");
                let _ = writeln!(
                    out,
                    "welch_t,{},{},,{},{},{},{},{}",
                    t.t_stat,
                    t.df,
                    t.p_value,
                    bound(t.ci_lower),
                    bound(t.ci_upper),
                    t.mean_a,
                    t.mean_b
                );
                let _ = writeln!(out, "f,{},{},{},{},{},{},,", f.f_stat, f.df_num, f.df_den, f.p_value, f.ci.0, f.ci.1);
                out
            }
            OutputFormat::Table => {
                let mut out = String::new();
                let _ = writeln!(out, "One-Sided Welch T-Test (n = {} per run, seed {})", self.n, self.seed);
                let _ = writeln!(out, "  {:<26}{}", "T-Statistic", t.t_stat);
                let _ = writeln!(out, "  {:<26}{}", "Degrees of Freedom", t.df);
                let _ = writeln!(out, "  {:<26}{:e}", "P-Value", t.p_value);
                let _ = writeln!(out, "  {:<26}[{}, {})", "95% Confidence Interval", bound(t.ci_lower), bound(t.ci_upper));
                let _ = writeln!(out, "  {:<26}{}", "Mean of x", t.mean_a);
                let _ = writeln!(out, "  {:<26}{}", "Mean of y", t.mean_b);
                let _ = writeln!(out, "\nF-Test for Comparison of Two Variances");
                let _ = writeln!(out, "  {:<26}{}", "F-Statistic", f.f_stat);
                let _ = writeln!(out, "  {:<26}{}", "Numerator DoF", f.df_num);
                let _ = writeln!(out, "  {:<26}{}", "Denominator DoF", f.df_den);
                let _ = writeln!(out, "  {:<26}{:e}", "P-Value", f.p_value);
                let _ = writeln!(out, "  {:<26}[{}, {}]", "95% Confidence Interval", f.ci.0, f.ci.1);
                let _ = writeln!(out, "  {:<26}{}", "Ratio of Variances", f.f_stat);
                out
            }
        }
    }
}

/// One line per sweep point, keyed by alpha.
pub fn sweep_summary(reports: &[ExperimentReport], format: OutputFormat) -> String {
    let mut out = String::new();
    let cells = |r: &ExperimentReport| {
        let slack = r.slack.unwrap_or_default();
        [
            r.scenario.lstf_alpha.to_string(),
            r.scenario.seed.to_string(),
            r.delay.mean().to_string(),
            r.delay.population_variance().to_string(),
            r.queue_bytes.mean().to_string(),
            r.queue_bytes.population_variance().to_string(),
            slack.mean().to_string(),
            slack.population_variance().to_string(),
            r.counts.aqm_drop.to_string(),
            r.counts.tail_drop.to_string(),
        ]
    };
    let header = [
        "alpha",
        "seed",
        "delay_mean_s",
        "delay_var_s2",
        "queue_mean_bytes",
        "queue_var_bytes2",
        "slack_mean_s",
        "slack_var_s2",
        "aqm_drops",
        "tail_drops",
    ];
    match format {
        OutputFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for r in reports {
                out.push_str(&cells(r).join(","));
                out.push('\n');
            }
        }
        OutputFormat::Table => {
            let rows: Vec<[String; 10]> = reports.iter().map(cells).collect();
            let widths: Vec<usize> = (0..header.len())
                .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
                .collect();
            let line = |cols: Vec<&str>| {
                cols.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
            };
            out.push_str(&line(header.to_vec()));
            out.push('\n');
            for r in &rows {
                out.push_str(&line(r.iter().map(String::as_str).collect()));
                out.push('\n');
            }
        }
    }
    out
}
