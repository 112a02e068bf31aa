/// Classic smoothed RTT estimate, `est = (1 - alpha) * est + alpha * sample`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TcpRttEstimator {
    pub alpha: f64,
    /// Seconds.
    pub estimated_rtt: f64,
    /// Seconds.
    pub last_sample: f64,
}

pub const DEFAULT_RTT_ALPHA: f64 = 0.125;

impl TcpRttEstimator {
    pub fn new(alpha: f64, initial: f64) -> Self {
        assert!((0.0..=1.0).contains(&alpha), "alpha {alpha} outside [0, 1]");
        assert!(initial >= 0.0);
        TcpRttEstimator { alpha, estimated_rtt: initial, last_sample: initial }
    }

    /// # Panics
    /// If `sample` is negative.
    pub fn update(&mut self, sample: f64) -> f64 {
        assert!(sample >= 0.0, "rtt sample {sample} must be >= 0");
        self.estimated_rtt = (1.0 - self.alpha) * self.estimated_rtt + self.alpha * sample;
        self.last_sample = sample;
        self.estimated_rtt
    }
}
