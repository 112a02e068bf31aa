use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CbrConfig {
    pub rate_bps: u64,
    pub packet_bytes: u32,
    pub start_at: SimTime,
}

impl Default for CbrConfig {
    fn default() -> Self {
        CbrConfig { rate_bps: 1_500_000, packet_bytes: 1000, start_at: SimTime::from_secs(300) }
    }
}

impl CbrConfig {
    /// Inter-emission gap, truncated to whole nanoseconds.
    pub fn period(&self) -> SimTime {
        SimTime::serialization(self.packet_bytes as u64, self.rate_bps)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.rate_bps == 0 {
            return Err("cbr.rate_bps must be positive".into());
        }
        if self.packet_bytes == 0 || self.packet_bytes > crate::qdisc::MTU {
            return Err(format!("cbr.packet_bytes {} outside 1..={}", self.packet_bytes, crate::qdisc::MTU));
        }
        if self.period() == SimTime::ZERO {
            return Err("cbr rate too high for nanosecond resolution".into());
        }
        Ok(())
    }
}

/// Emits fixed-size packets back to back at `start_at + k * period`.
#[derive(Clone, Debug)]
pub struct CbrSource {
    config: CbrConfig,
    next_emit: SimTime,
    emitted: u64,
}

impl CbrSource {
    pub fn new(config: CbrConfig) -> Self {
        CbrSource { next_emit: config.start_at, emitted: 0, config }
    }

    pub fn config(&self) -> &CbrConfig {
        &self.config
    }

    pub fn next_emission(&self) -> SimTime {
        self.next_emit
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Records the emission due at `now` and returns when the next one is due.
    ///
    /// # Panics
    /// If `now` is not the scheduled emission time.
    pub fn emit(&mut self, now: SimTime) -> SimTime {
        assert_eq!(now, self.next_emit, "cbr emission off schedule");
        self.emitted += 1;
        self.next_emit = now + self.config.period();
        self.next_emit
    }
}
