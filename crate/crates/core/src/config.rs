//! Scenario description and its flat `key = value` file format.
//!
//! Lines are `key = value`; `#` starts a comment. Every key is optional and
//! falls back to the default below. Unknown or repeated keys are errors.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::codel::CoDelParams;
use crate::error::{Error, Result};
use crate::lstfcodel::{LstfParams, DEFAULT_ALPHA};
use crate::qdisc::{DEFAULT_CAPACITY_BYTES, MTU};
use crate::red::RedParams;
use crate::time::SimTime;
use crate::traffic::{CbrConfig, TcpConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QdiscKind {
    DropTail,
    Red,
    CoDel,
    LstfCodel,
}

impl QdiscKind {
    pub const ALL: [QdiscKind; 4] = [QdiscKind::DropTail, QdiscKind::Red, QdiscKind::CoDel, QdiscKind::LstfCodel];

    pub fn name(self) -> &'static str {
        match self {
            QdiscKind::DropTail => "droptail",
            QdiscKind::Red => "red",
            QdiscKind::CoDel => "codel",
            QdiscKind::LstfCodel => "lstfcodel",
        }
    }
}

impl fmt::Display for QdiscKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QdiscKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QdiscKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown qdisc '{s}' (expected droptail, red, codel or lstfcodel)")))
    }
}

/// RED knobs that are independent of the link it guards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RedSettings {
    pub w_q: f64,
    pub min_th_bytes: f64,
    pub max_th_bytes: f64,
    pub max_p: f64,
}

impl Default for RedSettings {
    fn default() -> Self {
        let p = RedParams::for_link(1_700_000);
        RedSettings { w_q: p.w_q, min_th_bytes: p.min_th_bytes, max_th_bytes: p.max_th_bytes, max_p: p.max_p }
    }
}

impl RedSettings {
    pub fn params_for_link(&self, rate_bps: u64) -> RedParams {
        RedParams {
            w_q: self.w_q,
            min_th_bytes: self.min_th_bytes,
            max_th_bytes: self.max_th_bytes,
            max_p: self.max_p,
            ..RedParams::for_link(rate_bps)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub duration: SimTime,
    pub seed: u64,
    pub qdisc: QdiscKind,
    pub capacity_bytes: u64,
    pub codel: CoDelParams,
    pub lstf_alpha: f64,
    pub drop_next_influence: bool,
    pub red: RedSettings,
    pub tcp_enabled: bool,
    pub tcp: TcpConfig,
    pub cbr_enabled: bool,
    pub cbr: CbrConfig,
    pub client_a_bps: u64,
    pub client_b_bps: u64,
    pub egress_bps: u64,
    pub prop_delay: SimTime,
    /// Sources start up to this much after their nominal start time.
    pub start_jitter: SimTime,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            duration: SimTime::from_secs(600),
            seed: 1,
            qdisc: QdiscKind::CoDel,
            capacity_bytes: DEFAULT_CAPACITY_BYTES,
            codel: CoDelParams::default(),
            lstf_alpha: DEFAULT_ALPHA,
            drop_next_influence: true,
            red: RedSettings::default(),
            tcp_enabled: true,
            tcp: TcpConfig::default(),
            cbr_enabled: true,
            cbr: CbrConfig::default(),
            client_a_bps: 2_000_000,
            client_b_bps: 1_500_000,
            egress_bps: 1_700_000,
            prop_delay: SimTime::from_millis(1),
            start_jitter: SimTime::from_millis(10),
        }
    }
}

fn parse_time(key: &str, v: &str) -> Result<SimTime> {
    v.parse::<SimTime>().map_err(|e| Error::Config(format!("{key}: {e}")))
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Config(format!("{key}: cannot parse '{v}': {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

impl Scenario {
    pub fn lstf_params(&self) -> LstfParams {
        LstfParams { alpha: self.lstf_alpha, drop_next_influence: self.drop_next_influence, codel: self.codel }
    }

    pub fn red_params(&self) -> RedParams {
        self.red.params_for_link(self.egress_bps)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "scenario.duration_s" => self.duration = parse_time(key, v)?,
            "scenario.seed" => self.seed = parse_num(key, v)?,
            "qdisc.kind" => self.qdisc = v.parse()?,
            "qdisc.capacity_bytes" => self.capacity_bytes = parse_num(key, v)?,
            "codel.target_s" => self.codel.target = parse_time(key, v)?,
            "codel.interval_s" => self.codel.interval = parse_time(key, v)?,
            "lstfcodel.alpha" => self.lstf_alpha = parse_num(key, v)?,
            "lstfcodel.drop_next_influence" => self.drop_next_influence = parse_bool(key, v)?,
            "red.w_q" => self.red.w_q = parse_num(key, v)?,
            "red.min_th_bytes" => self.red.min_th_bytes = parse_num(key, v)?,
            "red.max_th_bytes" => self.red.max_th_bytes = parse_num(key, v)?,
            "red.max_p" => self.red.max_p = parse_num(key, v)?,
            "tcp.enabled" => self.tcp_enabled = parse_bool(key, v)?,
            "tcp.alpha" => self.tcp.alpha = parse_num(key, v)?,
            "tcp.init_ssthresh" => self.tcp.init_ssthresh = parse_num(key, v)?,
            "cbr.enabled" => self.cbr_enabled = parse_bool(key, v)?,
            "cbr.rate_bps" => self.cbr.rate_bps = parse_num(key, v)?,
            "cbr.packet_bytes" => self.cbr.packet_bytes = parse_num(key, v)?,
            "cbr.start_s" => self.cbr.start_at = parse_time(key, v)?,
            "link.client_a_bps" => self.client_a_bps = parse_num(key, v)?,
            "link.client_b_bps" => self.client_b_bps = parse_num(key, v)?,
            "link.egress_bps" => self.egress_bps = parse_num(key, v)?,
            "link.prop_delay_s" => self.prop_delay = parse_time(key, v)?,
            "traffic.start_jitter_s" => self.start_jitter = parse_time(key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses a scenario file on top of the defaults and validates it.
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut s = Scenario::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: '{key}' given twice", i + 1)));
            }
            s.set(key, value).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        s.validate()?;
        Ok(s)
    }

    /// Canonical rendering; parses back to an equal scenario.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            writeln!(out, "{k} = {v}").expect("writing to a String");
        };
        kv("scenario.duration_s", &self.duration);
        kv("scenario.seed", &self.seed);
        kv("qdisc.kind", &self.qdisc);
        kv("qdisc.capacity_bytes", &self.capacity_bytes);
        kv("codel.target_s", &self.codel.target);
        kv("codel.interval_s", &self.codel.interval);
        kv("lstfcodel.alpha", &self.lstf_alpha);
        kv("lstfcodel.drop_next_influence", &self.drop_next_influence);
        kv("red.w_q", &self.red.w_q);
        kv("red.min_th_bytes", &self.red.min_th_bytes);
        kv("red.max_th_bytes", &self.red.max_th_bytes);
        kv("red.max_p", &self.red.max_p);
        kv("tcp.enabled", &self.tcp_enabled);
        kv("tcp.alpha", &self.tcp.alpha);
        kv("tcp.init_ssthresh", &self.tcp.init_ssthresh);
        kv("cbr.enabled", &self.cbr_enabled);
        kv("cbr.rate_bps", &self.cbr.rate_bps);
        kv("cbr.packet_bytes", &self.cbr.packet_bytes);
        kv("cbr.start_s", &self.cbr.start_at);
        kv("link.client_a_bps", &self.client_a_bps);
        kv("link.client_b_bps", &self.client_b_bps);
        kv("link.egress_bps", &self.egress_bps);
        kv("link.prop_delay_s", &self.prop_delay);
        kv("traffic.start_jitter_s", &self.start_jitter);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.duration == SimTime::ZERO {
            return err("scenario.duration_s must be positive".into());
        }
        if self.capacity_bytes < MTU as u64 {
            return err(format!("qdisc.capacity_bytes {} below one MTU ({MTU})", self.capacity_bytes));
        }
        self.lstf_params().validate().map_err(Error::Config)?;
        for (name, rate) in [
            ("link.client_a_bps", self.client_a_bps),
            ("link.client_b_bps", self.client_b_bps),
            ("link.egress_bps", self.egress_bps),
        ] {
            if rate == 0 {
                return err(format!("{name} must be positive"));
            }
        }
        self.red_params().validate().map_err(Error::Config)?;
        if !(0.0..=1.0).contains(&self.tcp.alpha) {
            return err(format!("tcp.alpha {} outside [0, 1]", self.tcp.alpha));
        }
        if !(self.tcp.init_ssthresh >= 1.0 && self.tcp.init_ssthresh.is_finite()) {
            return err(format!("tcp.init_ssthresh {} must be >= 1", self.tcp.init_ssthresh));
        }
        self.cbr.validate().map_err(Error::Config)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let s = Scenario::default();
        assert_eq!(Scenario::parse(&s.render()).unwrap(), s);
    }

    #[test]
    fn comments_and_blank_lines() {
        let s = Scenario::parse("# header\n\nqdisc.kind = lstfcodel  # studied\nlstfcodel.alpha=0.25\n").unwrap();
        assert_eq!(s.qdisc, QdiscKind::LstfCodel);
        assert_eq!(s.lstf_alpha, 0.25);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "qdisc.kind = fq_codel",
            "no.such.key = 1",
            "qdisc.kind",
            "scenario.duration_s = 0",
            "scenario.duration_s = -3",
            "lstfcodel.alpha = 1.5",
            "codel.target_s = 0.2",
            "red.min_th_bytes = 30000",
            "cbr.packet_bytes = 9000",
            "scenario.seed = 1\nscenario.seed = 2",
        ] {
            assert!(matches!(Scenario::parse(text), Err(Error::Config(_))), "accepted {text:?}");
        }
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(alpha in 0.0f64..=1.0, seed in any::<u64>(), ms in 1u64..10_000_000,
                                   w_q in 0.0001f64..0.5, kind in 0usize..4) {
            let s = Scenario {
                lstf_alpha: alpha,
                seed,
                duration: SimTime::from_nanos(ms * 1_000_000 + 7),
                red: RedSettings { w_q, ..Default::default() },
                qdisc: QdiscKind::ALL[kind],
                ..Default::default()
            };
            let back = Scenario::parse(&s.render()).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.render(), s.render());
        }
    }
}
