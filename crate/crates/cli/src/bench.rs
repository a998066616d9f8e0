//! Round-trip throughput and latency of a served environment.

use std::fmt;
use std::time::{Duration, Instant};

use envlink::{EnvError, Environment};

use crate::rollout::RandomDriver;

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub steps: u64,
    pub elapsed: Duration,
    pub p50: Duration,
    pub p99: Duration,
}

impl BenchReport {
    pub fn steps_per_sec(&self) -> f64 {
        self.steps as f64 / self.elapsed.as_secs_f64()
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "steps: {}", self.steps)?;
        writeln!(f, "steps/sec: {:.1}", self.steps_per_sec())?;
        writeln!(f, "p50 latency: {:.1} us", self.p50.as_secs_f64() * 1e6)?;
        write!(f, "p99 latency: {:.1} us", self.p99.as_secs_f64() * 1e6)
    }
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[Duration], p: f64) -> Duration {
    if sorted.is_empty() {
        return Duration::ZERO;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn bench(env: Environment, steps: u64) -> Result<BenchReport, EnvError> {
    let (mut driver, _) = RandomDriver::start(env, 0)?;
    let mut samples = Vec::with_capacity(steps as usize);
    let start = Instant::now();
    for _ in 0..steps {
        let t = Instant::now();
        driver.step()?;
        samples.push(t.elapsed());
    }
    let elapsed = start.elapsed();
    driver.close()?;
    samples.sort_unstable();
    Ok(BenchReport {
        steps,
        elapsed,
        p50: percentile(&samples, 50.0),
        p99: percentile(&samples, 99.0),
    })
}
