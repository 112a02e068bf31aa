//! Traffic sources: a bulk TCP sender and a constant-bit-rate UDP source.

mod cbr;
mod rtt;
mod tcp;

pub use cbr::{CbrConfig, CbrSource};
pub use rtt::{TcpRttEstimator, DEFAULT_RTT_ALPHA};
pub use tcp::{Segment, TcpConfig, TcpOutput, TcpReceiver, TcpSender, TimerCommand};
