/// Single-pass mean and variance (Welford's recurrence).
///
/// Observations are accumulated relative to the first one seen, which keeps
/// the recurrence accurate on data with a large common offset.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    shift: f64,
    /// Mean of `x - shift`.
    shifted_mean: f64,
    /// Sum of squared deviations from the mean.
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds an accumulator from stored moments.
    pub fn from_moments(n: u64, mean: f64, m2: f64) -> Self {
        RunningStats { n, shift: mean, shifted_mean: 0.0, m2 }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::new();
        for &x in xs {
            s.push(x);
        }
        s
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.shifted_mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.shift = x;
        }
        let y = x - self.shift;
        self.n += 1;
        let delta = y - self.shifted_mean;
        self.shifted_mean += delta / self.n as f64;
        self.m2 += delta * (y - self.shifted_mean);
    }

    /// Combines two accumulators as if their streams had been concatenated.
    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let (na, nb) = (self.n as f64, other.n as f64);
        let other_mean = (other.shift - self.shift) + other.shifted_mean;
        let delta = other_mean - self.shifted_mean;
        let shifted_mean = self.shifted_mean + delta * nb / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / n as f64;
        RunningStats { n, shift: self.shift, shifted_mean, m2 }
    }

    /// `m2 / n`; zero for an empty accumulator.
    pub fn population_variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }

    /// `m2 / (n - 1)`, defined once there are two observations.
    pub fn sample_variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.m2 / (self.n - 1) as f64).max(0.0))
    }

    pub fn population_std_dev(&self) -> f64 {
        self.population_variance().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Mean and sum of squares by two passes over data shifted by its first
    /// element, with compensated sums.
    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let k = xs[0];
        let n = xs.len() as f64;
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
        let m = kahan(&mut xs.iter().map(|x| x - k)) / n;
        let ss = kahan(&mut xs.iter().map(|x| {
            let d = (x - k) - m;
            d * d
        }));
        (k + m, ss)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn single_point() {
        let s = RunningStats::from_slice(&[2.0]);
        assert_eq!(s.mean(), 2.0);
        assert_eq!(s.population_variance(), 0.0);
        assert_eq!(s.sample_variance(), None);
    }

    #[test]
    fn small_stream() {
        let s = RunningStats::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean(), 2.5);
        assert!((s.sample_variance().unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.population_variance() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn merge_with_empty() {
        let a = RunningStats::from_slice(&[1.0, 5.0]);
        assert_eq!(a.merge(&RunningStats::new()), a);
        assert_eq!(RunningStats::new().merge(&a), a);
    }

    #[test]
    fn moments_round_trip() {
        let a = RunningStats::from_slice(&[0.5, 1.5, 4.0]);
        let b = RunningStats::from_moments(a.n(), a.mean(), a.m2());
        assert_eq!(b.mean(), a.mean());
        assert_eq!(b.population_variance(), a.population_variance());
    }

    proptest! {
        #[test]
        fn matches_two_pass(xs in proptest::collection::vec(-1e3f64..1e3, 2..300), offset in -1e9f64..1e9) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + offset).collect();
            let s = RunningStats::from_slice(&shifted);
            let (mean, ss) = two_pass(&shifted);
            prop_assert!(close(s.mean(), mean, 1e-12));
            prop_assert!((s.m2() - ss).abs() <= 1e-9 * ss.max(1e-300));
        }

        #[test]
        fn merge_associative(a in proptest::collection::vec(-1e3f64..1e3, 0..50),
                             b in proptest::collection::vec(-1e3f64..1e3, 0..50),
                             c in proptest::collection::vec(-1e3f64..1e3, 0..50),
                             offset in -1e6f64..1e6) {
            let add = |v: &Vec<f64>| v.iter().map(|x| x + offset).collect::<Vec<f64>>();
            let (a, b, c) = (add(&a), add(&b), add(&c));
            let (sa, sb, sc) = (RunningStats::from_slice(&a), RunningStats::from_slice(&b), RunningStats::from_slice(&c));
            let left = sa.merge(&sb).merge(&sc);
            let right = sa.merge(&sb.merge(&sc));
            let all: Vec<f64> = a.iter().chain(&b).chain(&c).copied().collect();
            let direct = RunningStats::from_slice(&all);
            for m in [left, right] {
                prop_assert_eq!(m.n(), direct.n());
                if direct.n() > 0 {
                    prop_assert!((m.mean() - direct.mean()).abs() <= 1e-9 * direct.mean().abs().max(1.0));
                    prop_assert!((m.m2() - direct.m2()).abs() <= 1e-9 * direct.m2().max(1.0));
                }
            }
        }

        #[test]
        fn variances_nonnegative(xs in proptest::collection::vec(-1e6f64..1e6, 0..100)) {
            let s = RunningStats::from_slice(&xs);
            prop_assert!(s.population_variance() >= 0.0);
            prop_assert!(s.sample_variance().unwrap_or(0.0) >= 0.0);
        }
    }
}
