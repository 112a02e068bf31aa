//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time budget.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use aqmsim_core::batch::map_batch;
use aqmsim_core::codel::CoDelParams;
use aqmsim_core::config::{QdiscKind, Scenario};
use aqmsim_core::lstfcodel::{classify, LstfCodel, LstfParams, SlackEstimator};
use aqmsim_core::qdisc::{DropTail, FlowId, Packet, Protocol, Qdisc, Verdict};
use aqmsim_core::red::{MarkDecision, Red, RedParams, RedState};
use aqmsim_core::report::ExperimentReport;
use aqmsim_core::rng::{stream, RngState};
use aqmsim_core::stats::{clt_sample, f_test, welch_t_test, Alternative, RunningStats};
use aqmsim_core::time::SimTime;
use aqmsim_core::trace::write_trace;
use aqmsim_core::traffic::{CbrConfig, TcpRttEstimator};
use aqmsim_core::run_scenario;

type Check = Result<String, String>;
type Criterion = (u32, &'static str, u64, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(x: f64, oracle: f64) -> f64 {
    if x == oracle {
        0.0
    } else {
        (x - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE)
    }
}

fn pkt(id: u64, size: u32, now: SimTime) -> Packet {
    Packet::new(id, FlowId(1), size, Protocol::Udp, now)
}

fn slack_recurrence_and_classifier() -> Check {
    let mut rng = RngState::new(0x51ac, 100);
    let mut est = SlackEstimator::new(0.5);
    let mut oracle = 0.0f64;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let alpha = rng.uniform();
        let beta = rng.uniform() * 0.2;
        let influence = if rng.uniform() < 0.1 { rng.uniform() * 0.1 } else { 0.0 };
        est.alpha = alpha;
        if influence > 0.0 {
            est.set_drop_next_influence(influence);
        }
        est.update(beta);
        oracle = (1.0 - alpha) * oracle + alpha * (beta + influence);
        worst = worst.max(rel_err(est.gamma, oracle));
        ensure(est.gamma >= 0.0, || "gamma went negative".into())?;
    }
    ensure(worst <= 1e-12, || format!("worst relative error {worst:e}"))?;
    ensure(classify(0.0) == 0.0, || "classify(0) != 0".into())?;
    let grid: Vec<f64> = (1..=1000).map(|i| classify(i as f64 * 0.01)).collect();
    ensure(grid.windows(2).all(|w| w[1] < w[0]), || "classify not strictly decreasing".into())?;
    ensure(grid.iter().all(|e| (0.0..=1.0).contains(e)), || "classify left [0, 1]".into())?;
    Ok(format!("10000 updates, worst rel err {worst:.1e}; 1000-point grid strictly decreasing"))
}

fn fifo_degeneration() -> Check {
    let codel = CoDelParams { target: SimTime::from_secs(1000), interval: SimTime::from_secs(2000), ..Default::default() };
    // alpha = 0 pins gamma at its initial value for every arrival
    let mut lstf = LstfCodel::new(LstfParams { alpha: 0.0, drop_next_influence: true, codel }, 15_000);
    let mut fifo = DropTail::new(15_000);
    let mut rng = RngState::new(2, 200);
    let mut now = SimTime::ZERO;
    let mut served = 0usize;
    let mut tail = 0usize;
    let compare_dequeue = |now: SimTime, lstf: &mut LstfCodel, fifo: &mut DropTail| -> Result<bool, String> {
        let (a, b) = (lstf.dequeue(now), fifo.dequeue(now));
        match (a, b) {
            (None, None) => Ok(false),
            (Some(a), Some(b)) => {
                ensure(a.packet.id == b.packet.id && a.sojourn == b.sojourn && a.aqm_drops.is_empty(), || {
                    format!("diverged at {now}: lstf served {} fifo served {}", a.packet.id, b.packet.id)
                })?;
                Ok(true)
            }
            (a, b) => Err(format!("one queue empty at {now}: {:?} vs {:?}", a.map(|d| d.packet.id), b.map(|d| d.packet.id))),
        }
    };
    for id in 0..10_000u64 {
        now += SimTime::from_nanos((rng.uniform() * 4e6) as u64);
        let size = 40 + (rng.uniform() * 1461.0) as u32;
        let va = lstf.enqueue(pkt(id, size, now), now);
        let vb = fifo.enqueue(pkt(id, size, now), now);
        ensure(va.outcome() == vb.outcome(), || format!("verdicts differ for packet {id}"))?;
        if matches!(vb, Verdict::DroppedTail(_)) {
            tail += 1;
        }
        for _ in 0..(rng.uniform() * 2.2) as usize {
            if compare_dequeue(now, &mut lstf, &mut fifo)? {
                served += 1;
            }
        }
    }
    while compare_dequeue(now, &mut lstf, &mut fifo)? {
        served += 1;
    }
    Ok(format!("10000 arrivals, {served} identical dequeues, {tail} identical tail drops"))
}

fn priority_order_model() -> Check {
    let mut dequeues = 0usize;
    let mut victims = 0usize;
    for trace in 0..40u64 {
        let codel = CoDelParams { target: SimTime::from_millis(2), interval: SimTime::from_millis(20), ..Default::default() };
        let mut q = LstfCodel::new(LstfParams { alpha: 0.3, drop_next_influence: trace % 2 == 0, codel }, 60_000);
        let mut rng = RngState::new(trace, 300);
        let mut now = SimTime::ZERO;
        for id in 0..5_000u64 {
            now += SimTime::from_nanos((rng.uniform() * 3e6) as u64);
            q.enqueue(pkt(id, 200 + (rng.uniform() * 1301.0) as u32, now), now);
            if rng.uniform() < 0.8 {
                let residents = q.resident_keys();
                let Some(d) = q.dequeue(now) else { continue };
                dequeues += 1;
                let k = d.aqm_drops.len();
                victims += k;
                ensure(residents.len() > k, || "more victims than residents".into())?;
                ensure(d.packet.id == residents[0].1, || {
                    format!("trace {trace}: served {} but min key belongs to {}", d.packet.id, residents[0].1)
                })?;
                for (i, v) in d.aqm_drops.iter().enumerate() {
                    let expect = residents[residents.len() - 1 - i].1;
                    ensure(v.id == expect, || format!("trace {trace}: victim {} but max key belongs to {expect}", v.id))?;
                }
            }
        }
    }
    ensure(victims > 0, || "no AQM drops exercised".into())?;
    Ok(format!("{dequeues} dequeues checked, {victims} victims all max-key"))
}

fn codel_control_law() -> Check {
    let scenario = Scenario { qdisc: QdiscKind::CoDel, seed: 1, ..Default::default() };
    let out = run_scenario(&scenario).map_err(|e| e.to_string())?;
    let interval = scenario.codel.interval.as_secs_f64();
    let log = &out.drop_log;
    let mut sched_pairs = 0usize;
    let mut worst_sched = 0.0f64;
    let (mut actual_sum, mut expected_sum) = (0.0f64, 0.0f64);
    for w in log.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        if prev.episode != cur.episode {
            continue;
        }
        if let (Some(a), Some(b)) = (prev.drop_next, cur.drop_next) {
            if cur.count >= 3 {
                let delta = (b - a).as_secs_f64();
                let expect = interval / (cur.count as f64).sqrt();
                worst_sched = worst_sched.max(rel_err(delta, expect));
                sched_pairs += 1;
            }
        }
        if prev.count >= 3 && prev.drop_next.is_some() {
            actual_sum += (cur.at - prev.at).as_secs_f64();
            expected_sum += interval / (prev.count as f64).sqrt();
        }
    }
    ensure(sched_pairs >= 10, || format!("only {sched_pairs} drop pairs with count >= 3"))?;
    ensure(worst_sched <= 0.05, || format!("scheduled delta off by {:.2}%", worst_sched * 100.0))?;
    let ratio = actual_sum / expected_sum;
    ensure((ratio - 1.0).abs() <= 0.05, || format!("observed/expected drop spacing {ratio:.4}"))?;

    let mut light = Vec::new();
    for rate in [500_000u64, 1_000_000, 1_360_000] {
        let s = Scenario {
            qdisc: QdiscKind::CoDel,
            tcp_enabled: false,
            cbr: CbrConfig { rate_bps: rate, start_at: SimTime::ZERO, ..Default::default() },
            ..Default::default()
        };
        let o = run_scenario(&s).map_err(|e| e.to_string())?;
        ensure(o.counters.aqm_dropped == 0, || format!("{} AQM drops at {rate} bps", o.counters.aqm_dropped))?;
        light.push(o.counters.delivered);
    }
    Ok(format!(
        "{sched_pairs} scheduled deltas within {:.3}% of interval/sqrt(count); observed/expected spacing {ratio:.4}; \
         0 AQM drops at 0.5/1.0/1.36 Mbps",
        worst_sched * 100.0
    ))
}

fn lstf_vs_codel_direction() -> Check {
    let mut scenarios = Vec::new();
    for seed in 1..=5 {
        scenarios.push(Scenario { qdisc: QdiscKind::CoDel, seed, ..Default::default() });
        scenarios.push(Scenario { qdisc: QdiscKind::LstfCodel, lstf_alpha: 0.5, seed, ..Default::default() });
    }
    let reports = map_batch(&scenarios, |s| run_scenario(s).map(|o| ExperimentReport::from_rows(s, &o.rows)));
    let (mut codel, mut lstf) = (RunningStats::new(), RunningStats::new());
    for r in reports {
        let r = r.map_err(|e| e.to_string())?;
        match r.scenario.qdisc {
            QdiscKind::CoDel => codel = codel.merge(&r.delay),
            _ => lstf = lstf.merge(&r.delay),
        }
    }
    let (cm, lm) = (codel.mean(), lstf.mean());
    let (cv, lv) = (codel.population_variance(), lstf.population_variance());
    let detail = format!(
        "codel mean {cm:.6} s var {cv:.3e}; lstfcodel mean {lm:.6} s var {lv:.3e}; reduction {:.1}%",
        (1.0 - lm / cm) * 100.0
    );
    ensure(lv > cv, || format!("variance not higher: {detail}"))?;
    ensure(lm <= 0.7 * cm, || format!("mean not 30% lower: {detail}"))?;
    Ok(detail)
}

fn hypothesis_pipeline() -> Check {
    let mut first = String::new();
    for seed in 1..=20u64 {
        let mut rng = RngState::new(seed, stream::CLT);
        let codel = clt_sample(0.035329, 0.00228407, 500, &mut rng);
        let lstf = clt_sample(0.00859185, 0.0181358, 500, &mut rng);
        let t = welch_t_test(&codel, &lstf, Alternative::Greater).map_err(|e| e.to_string())?;
        let f = f_test(&codel, &lstf).map_err(|e| e.to_string())?;
        ensure((25.0..=40.0).contains(&t.t_stat), || format!("seed {seed}: t = {}", t.t_stat))?;
        ensure(t.p_value < 1e-10, || format!("seed {seed}: p = {:e}", t.p_value))?;
        ensure((0.008..=0.025).contains(&f.f_stat), || format!("seed {seed}: F = {}", f.f_stat))?;
        if seed == 1 {
            first = format!("seed 1: t = {:.3}, df = {:.2}, p = {:.1e}, F = {:.6}", t.t_stat, t.df, t.p_value, f.f_stat);
        }
    }
    Ok(format!("{first}; seeds 1-20 all in range"))
}

fn welford_large_offsets() -> Check {
    let mut rng = RngState::new(7, 700);
    let mut worst = 0.0f64;
    let cases: [(f64, f64); 4] = [(1e6, 1e-3), (1e9, 1e-3), (1e12, 1.0), (-3e8, 10.0)];
    for (offset, spread) in cases {
        let xs: Vec<f64> = (0..1_000_000).map(|_| offset + spread * rng.uniform()).collect();
        let acc = RunningStats::from_slice(&xs);
        // two passes over data shifted by the first element, compensated sums
        let k = xs[0];
        let kahan = |it: &mut dyn Iterator<Item = f64>| {
            let (mut sum, mut c) = (0.0f64, 0.0f64);
            for v in it {
                let y = v - c;
                let t = sum + y;
                c = (t - sum) - y;
                sum = t;
            }
            sum
        };
        let n = xs.len() as f64;
        let m = kahan(&mut xs.iter().map(|x| x - k)) / n;
        let ss = kahan(&mut xs.iter().map(|x| ((x - k) - m) * ((x - k) - m)));
        let (mean, var) = (k + m, ss / n);
        let e = rel_err(acc.mean(), mean).max(rel_err(acc.population_variance(), var));
        ensure(e <= 1e-9, || format!("offset {offset:e} spread {spread:e}: rel err {e:e}"))?;
        worst = worst.max(e);
    }
    Ok(format!("4 streams of 10^6 points, worst rel err {worst:.1e}"))
}

fn red_pseudocode() -> Check {
    let base = RedParams::for_link(1_700_000);
    let p = RedParams { w_q: 0.002, ..base };
    let mut s = RedState { avg: 100.0, q_time: None, count_since_mark: 0 };
    let a = s.update_avg(&p, 50.0, SimTime::ZERO, false);
    ensure(a == 99.9, || format!("nonempty branch gave {a}"))?;
    let mut s = RedState { avg: 100.0, q_time: Some(SimTime::from_secs(4)), count_since_mark: 0 };
    let b = s.update_avg(&p, 0.0, SimTime::from_secs(4), true);
    ensure(b == 100.0, || format!("idle m=0 gave {b}"))?;
    let p2 = RedParams { w_q: 0.5, typical_tx_time: SimTime::from_millis(10), ..base };
    let mut s = RedState { avg: 100.0, q_time: Some(SimTime::ZERO), count_since_mark: 0 };
    let c = s.update_avg(&p2, 0.0, SimTime::from_millis(20), true);
    ensure(c == 25.0, || format!("idle m=2 gave {c}"))?;

    // drive a real queue above max_th and keep offering packets
    let params = RedParams { w_q: 0.5, ..base };
    let mut q = Red::new(params, 10_000_000, RngState::new(8, stream::RED));
    let mut now = SimTime::ZERO;
    let mut id = 0u64;
    while q.state().avg < params.max_th_bytes {
        now += SimTime::from_nanos(10_000);
        q.enqueue(pkt(id, 1500, now), now);
        id += 1;
        ensure(id < 1_000, || "avg never reached max_th".into())?;
    }
    let mut forced = 0u64;
    for _ in 0..100_000 {
        now += SimTime::from_nanos(10_000);
        ensure(q.state().avg >= params.max_th_bytes, || "avg fell below max_th".into())?;
        if let Verdict::DroppedAqm(_) = q.enqueue(pkt(id, 1500, now), now) {
            forced += 1;
        }
        id += 1;
    }
    ensure(forced == 100_000, || format!("only {forced} of 100000 marked above max_th"))?;
    let mut st = RedState { avg: params.max_th_bytes, q_time: None, count_since_mark: 0 };
    let mut rng = RngState::new(9, stream::RED);
    ensure(st.mark_decision(&params, &mut rng) == MarkDecision::ForceMark, || "avg == max_th not forced".into())?;
    Ok("99.9 / 100 / 25 exact; 100000 of 100000 force-marked above max_th".into())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut scenarios = Vec::new();
    for kind in QdiscKind::ALL {
        scenarios.push(Scenario { qdisc: kind, seed: 42, ..Default::default() });
    }
    let write = |tag: &str, s: &Scenario| -> Result<Vec<u8>, String> {
        let out = run_scenario(s).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{}-{tag}.csv", s.qdisc));
        let file = std::fs::File::create(&path).map_err(|e| e.to_string())?;
        write_trace(std::io::BufWriter::new(file), &out.rows).map_err(|e| e.to_string())?;
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    let mut bytes = 0usize;
    let results = map_batch(&scenarios, |s| -> Result<usize, String> {
        let a = write("a", s)?;
        let b = write("b", s)?;
        ensure(a == b, || format!("{} traces differ", s.qdisc))?;
        Ok(a.len())
    });
    for r in results {
        bytes += r?;
    }
    Ok(format!("4 disciplines x 600 s, {} MB of identical trace bytes", bytes / 1_000_000))
}

fn rtt_estimator() -> Check {
    for alpha in [0.0, 0.125, 0.5, 1.0] {
        let mut e = TcpRttEstimator::new(alpha, 0.1);
        for _ in 0..100 {
            ensure(e.update(0.1) == 0.1, || format!("alpha {alpha}: fixed point moved"))?;
        }
    }
    let mut worst = 0.0f64;
    for alpha in [0.05, 0.125, 0.5, 0.9] {
        let (start, s) = (0.75, 0.02);
        let mut e = TcpRttEstimator::new(alpha, start);
        for k in 1..=500 {
            e.update(s);
            let closed = s + (1.0f64 - alpha).powi(k) * (start - s);
            worst = worst.max((e.estimated_rtt - closed).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("geometric convergence off by {worst:e}"))?;
    Ok(format!("fixed point exact; closed-form error {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (1, "slack recurrence and classifier", 1, slack_recurrence_and_classifier),
        (2, "FIFO degeneration under constant gamma", 5, fifo_degeneration),
        (3, "priority order model", 10, priority_order_model),
        (4, "CoDel control law", 120, codel_control_law),
        (5, "LSTFCoDel vs CoDel delay direction", 600, lstf_vs_codel_direction),
        (6, "hypothesis-test pipeline", 5, hypothesis_pipeline),
        (7, "Welford vs two-pass", 5, welford_large_offsets),
        (8, "RED pseudocode", 5, red_pseudocode),
        (9, "trace determinism", 300, determinism),
        (10, "RTT estimator", 1, rtt_estimator),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let over = took > Duration::from_secs(budget);
        let (verdict, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over budget; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("criterion {n:>2} {verdict} {name} [{:.2} s / {budget} s]: {detail}", took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
