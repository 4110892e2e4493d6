use std::collections::BTreeMap;
use std::time::Instant;

use parking_lot::Mutex;

use crate::engines::EngineId;
use crate::monitor::UsageSnapshot;

/// Width of the busy-fraction window.
pub const USAGE_WINDOW_MS: f64 = 10_000.0;

/// Source of time for runtimes and usage. `advance` models latency: a
/// virtual clock jumps, a system clock sleeps.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> f64;
    fn advance(&self, ms: f64);
}

/// Time moves only when told to; makes runtimes exact in tests.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<f64>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(ms: f64) -> Self {
        VirtualClock { now: Mutex::new(ms) }
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> f64 {
        *self.now.lock()
    }

    fn advance(&self, ms: f64) {
        if ms > 0.0 {
            *self.now.lock() += ms;
        }
    }
}

#[derive(Debug)]
pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { start: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1000.0
    }

    fn advance(&self, ms: f64) {
        if ms > 0.0 {
            std::thread::sleep(std::time::Duration::from_secs_f64(ms / 1000.0));
        }
    }
}

/// Extra latency charged per step, by engine.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencyModel {
    /// Every step run on the engine: containers, loads of migrated data,
    /// and cross operators.
    pub step_ms: BTreeMap<EngineId, f64>,
    /// Cross operators only, on their site.
    pub cross_op_ms: BTreeMap<EngineId, f64>,
}

impl LatencyModel {
    pub fn step(&self, e: &EngineId) -> f64 {
        self.step_ms.get(e).copied().unwrap_or(0.0)
    }

    pub fn cross_op(&self, e: &EngineId) -> f64 {
        self.step(e) + self.cross_op_ms.get(e).copied().unwrap_or(0.0)
    }
}

/// Per-engine busy intervals, trimmed to the usage window.
#[derive(Debug, Default)]
pub struct UsageTracker {
    intervals: Mutex<BTreeMap<EngineId, Vec<(f64, f64)>>>,
}

impl UsageTracker {
    pub fn charge(&self, engine: &EngineId, start_ms: f64, end_ms: f64) {
        if end_ms <= start_ms {
            return;
        }
        let mut m = self.intervals.lock();
        let v = m.entry(engine.clone()).or_default();
        v.retain(|&(_, e)| e > end_ms - USAGE_WINDOW_MS);
        v.push((start_ms, end_ms));
    }

    /// Fraction of the window ending at `now_ms` each engine spent busy.
    /// Overlapping intervals are merged first so the fraction stays in [0,1].
    pub fn snapshot(&self, engines: &[EngineId], now_ms: f64, active_queries: usize) -> UsageSnapshot {
        let lo = now_ms - USAGE_WINDOW_MS;
        let m = self.intervals.lock();
        let busy = engines
            .iter()
            .map(|e| {
                let mut iv: Vec<(f64, f64)> = m
                    .get(e)
                    .into_iter()
                    .flatten()
                    .map(|&(s, t)| (s.max(lo), t.min(now_ms)))
                    .filter(|(s, t)| t > s)
                    .collect();
                iv.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut total = 0.0;
                let mut cur: Option<(f64, f64)> = None;
                for (s, t) in iv {
                    cur = match cur {
                        Some((cs, ct)) if s <= ct => Some((cs, ct.max(t))),
                        Some((cs, ct)) => {
                            total += ct - cs;
                            Some((s, t))
                        }
                        None => Some((s, t)),
                    };
                }
                if let Some((cs, ct)) = cur {
                    total += ct - cs;
                }
                (e.to_string(), total / USAGE_WINDOW_MS)
            })
            .collect();
        UsageSnapshot::new(busy, active_queries, now_ms.max(0.0) as u64)
    }
}
