//! Monitor database: an append-only log of plan measurements keyed by
//! query signature, nearest-signature lookup, and the queue of plans
//! still waiting to be measured in the background.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

use crate::error::{Error, Result};
use crate::planner::Signature;

/// Separators used by the log format, plus `%` itself.
const LOG_ESCAPE: &AsciiSet = &CONTROLS.add(b'%').add(b';').add(b',').add(b'=');

fn esc(s: &str) -> String {
    utf8_percent_encode(s, LOG_ESCAPE).to_string()
}

fn unesc(s: &str, line: usize) -> Result<String> {
    percent_decode_str(s)
        .decode_utf8()
        .map(|c| c.into_owned())
        .map_err(|_| Error::Monitor(format!("line {line}: invalid escape in `{s}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Training,
    Production,
    Background,
    /// A plan that errored when run; kept so it is not retried.
    Failed,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Training => "training",
            Phase::Production => "production",
            Phase::Background => "background",
            Phase::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        Some(match s {
            "training" => Phase::Training,
            "production" => Phase::Production,
            "background" => Phase::Background,
            "failed" => Phase::Failed,
            _ => return None,
        })
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-engine busy fractions over the recent window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UsageSnapshot {
    pub busy: BTreeMap<String, f64>,
    pub active_queries: usize,
    pub timestamp_ms: u64,
}

impl UsageSnapshot {
    pub fn new(busy: BTreeMap<String, f64>, active_queries: usize, timestamp_ms: u64) -> Self {
        let busy = busy.into_iter().map(|(k, v)| (k, v.clamp(0.0, 1.0))).collect();
        UsageSnapshot {
            busy,
            active_queries,
            timestamp_ms,
        }
    }

    /// Largest per-engine difference; missing engines count as idle.
    pub fn max_difference(&self, other: &UsageSnapshot) -> f64 {
        let engines: BTreeSet<&String> = self.busy.keys().chain(other.busy.keys()).collect();
        engines
            .into_iter()
            .map(|e| {
                let a = self.busy.get(e).copied().unwrap_or(0.0);
                let b = other.busy.get(e).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfRecord {
    pub timestamp_ms: u64,
    pub phase: Phase,
    pub signature: Signature,
    pub plan_id: String,
    pub runtime_ms: f64,
    /// Only the busy fractions are persisted.
    pub usage: UsageSnapshot,
}

impl PerfRecord {
    /// One log line, without the trailing newline.
    pub fn to_line(&self) -> String {
        let list = |xs: &[String]| xs.iter().map(|x| esc(x)).collect::<Vec<_>>().join(";");
        let usage: Vec<String> = self.usage.busy.iter().map(|(e, f)| format!("{}={f}", esc(e))).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.timestamp_ms,
            self.phase,
            esc(&self.signature.structure),
            list(&self.signature.objects),
            list(&self.signature.constants),
            esc(&self.plan_id),
            self.runtime_ms,
            usage.join(",")
        )
    }

    pub fn parse_line(line: &str, lineno: usize) -> Result<PerfRecord> {
        let bad = |what: &str| Error::Monitor(format!("line {lineno}: {what}"));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(bad(&format!("expected 8 fields, found {}", f.len())));
        }
        let list = |s: &str| -> Result<Vec<String>> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(';').map(|x| unesc(x, lineno)).collect()
        };
        let timestamp_ms = f[0].parse().map_err(|_| bad("bad timestamp"))?;
        let phase = Phase::parse(f[1]).ok_or_else(|| bad(&format!("unknown phase `{}`", f[1])))?;
        let runtime_ms: f64 = f[6].parse().map_err(|_| bad("bad runtime"))?;
        if !runtime_ms.is_finite() || runtime_ms < 0.0 {
            return Err(bad("runtime must be finite and non-negative"));
        }
        let mut busy = BTreeMap::new();
        if !f[7].is_empty() {
            for kv in f[7].split(',') {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad("bad usage entry"))?;
                busy.insert(unesc(k, lineno)?, v.parse().map_err(|_| bad("bad busy fraction"))?);
            }
        }
        Ok(PerfRecord {
            timestamp_ms,
            phase,
            signature: Signature {
                structure: unesc(f[2], lineno)?,
                objects: list(f[3])?,
                constants: list(f[4])?,
            },
            plan_id: unesc(f[5], lineno)?,
            runtime_ms,
            usage: UsageSnapshot::new(busy, 0, timestamp_ms),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    /// Weights of structure, objects and constants; they sum to 1.
    pub weights: [f64; 3],
    pub threshold: f64,
    /// Busy-fraction difference beyond which usage counts as different.
    pub usage_bound: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            weights: [0.6, 0.3, 0.1],
            threshold: 0.8,
            usage_bound: 0.5,
        }
    }
}

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    a.intersection(b).count() as f64 / a.union(b).count() as f64
}

/// Weighted match of structure, object set and constant set. Rounded to
/// 12 places so that, say, 0.6 + 0.3 compares equal to 0.9.
pub fn similarity(a: &Signature, b: &Signature, weights: &[f64; 3]) -> f64 {
    let s = if a.structure == b.structure { 1.0 } else { 0.0 };
    let set = |v: &[String]| v.iter().cloned().collect::<BTreeSet<_>>();
    let o = jaccard(&set(&a.objects), &set(&b.objects));
    let c = jaccard(&set(&a.constants), &set(&b.constants));
    let x = weights[0] * s + weights[1] * o + weights[2] * c;
    ((x * 1e12).round() / 1e12).clamp(0.0, 1.0)
}

/// A plan waiting to be measured.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingPlan {
    pub signature: Signature,
    pub query: String,
    pub plan_id: String,
}

#[derive(Default)]
struct Inner {
    records: Vec<PerfRecord>,
    /// structure hash -> record positions
    index: BTreeMap<String, Vec<usize>>,
    pending: VecDeque<PendingPlan>,
}

impl Inner {
    fn push(&mut self, rec: PerfRecord) {
        self.index
            .entry(rec.signature.structure.clone())
            .or_default()
            .push(self.records.len());
        self.records.push(rec);
    }
}

pub struct Monitor {
    config: MonitorConfig,
    path: Option<PathBuf>,
    log: Mutex<Option<File>>,
    inner: Mutex<Inner>,
}

impl Monitor {
    pub fn in_memory(config: MonitorConfig) -> Self {
        Monitor {
            config,
            path: None,
            log: Mutex::new(None),
            inner: Mutex::new(Inner::default()),
        }
    }

    /// Open or create the log at `path` and replay it.
    pub fn open(path: &Path, config: MonitorConfig) -> Result<Self> {
        let mut inner = Inner::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                inner.push(PerfRecord::parse_line(&line, i + 1)?);
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Monitor {
            config,
            path: Some(path.to_path_buf()),
            log: Mutex::new(Some(file)),
            inner: Mutex::new(inner),
        })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Append durably, then index.
    pub fn record(&self, rec: PerfRecord) -> Result<()> {
        if !rec.runtime_ms.is_finite() || rec.runtime_ms < 0.0 {
            return Err(Error::Monitor(format!("invalid runtime {}", rec.runtime_ms)));
        }
        let mut log = self.log.lock();
        if let Some(f) = log.as_mut() {
            writeln!(f, "{}", rec.to_line())?;
            f.flush()?;
            f.sync_data()?;
        }
        self.inner.lock().push(rec);
        Ok(())
    }

    pub fn records(&self) -> Vec<PerfRecord> {
        self.inner.lock().records.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records whose signature equals `sig` exactly.
    pub fn records_for(&self, sig: &Signature) -> Vec<PerfRecord> {
        let inner = self.inner.lock();
        inner
            .index
            .get(&sig.structure)
            .into_iter()
            .flatten()
            .map(|&i| &inner.records[i])
            .filter(|r| &r.signature == sig)
            .cloned()
            .collect()
    }

    /// The log as written.
    pub fn dump(&self) -> Result<String> {
        match &self.path {
            Some(p) => Ok(std::fs::read_to_string(p)?),
            None => Ok(self.inner.lock().records.iter().map(|r| r.to_line() + "\n").collect()),
        }
    }

    /// Mean runtime per plan over all signatures sharing `structure`.
    pub fn stats(&self, structure: &str) -> BTreeMap<String, (f64, usize)> {
        let inner = self.inner.lock();
        let recs = inner
            .index
            .get(structure)
            .into_iter()
            .flatten()
            .map(|&i| &inner.records[i]);
        means(recs)
    }

    pub fn similarity(&self, a: &Signature, b: &Signature) -> f64 {
        similarity(a, b, &self.config.weights)
    }

    /// Closest stored signature; ties go to the most recent record.
    pub fn nearest(&self, sig: &Signature) -> Option<(Signature, f64)> {
        let inner = self.inner.lock();
        let mut best: Option<(&Signature, f64, usize)> = None;
        for (i, r) in inner.records.iter().enumerate().rev() {
            if best.as_ref().is_some_and(|b| b.0 == &r.signature) {
                continue;
            }
            let s = self.similarity(sig, &r.signature);
            // Iterating newest first, so only a strictly better score wins.
            if best.as_ref().is_none_or(|b| s > b.1) {
                best = Some((&r.signature, s, i));
            }
        }
        best.map(|(s, x, _)| (s.clone(), x))
    }

    /// Plan with the least mean runtime for `sig`; ties by plan id.
    pub fn best_plan(&self, sig: &Signature) -> Result<String> {
        self.best_plan_where(sig, |_| true)
            .ok_or_else(|| Error::Monitor(format!("no records for signature {}", sig.structure)))
    }

    /// Best plan counting only records taken under usage within the
    /// configured bound of `current`.
    pub fn best_plan_near_usage(&self, sig: &Signature, current: &UsageSnapshot) -> Option<String> {
        let bound = self.config.usage_bound;
        self.best_plan_where(sig, |r| r.usage.max_difference(current) <= bound)
    }

    fn best_plan_where(&self, sig: &Signature, keep: impl Fn(&PerfRecord) -> bool) -> Option<String> {
        let recs = self.records_for(sig);
        let m = means(recs.iter().filter(|r| keep(r)));
        m.into_iter()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then_with(|| a.0.cmp(&b.0)))
            .map(|(id, _)| id)
    }

    /// Plans recorded for `sig`, including failed ones.
    pub fn known_plans(&self, sig: &Signature) -> BTreeSet<String> {
        self.records_for(sig).into_iter().map(|r| r.plan_id).collect()
    }

    pub fn enqueue(&self, p: PendingPlan) {
        let mut inner = self.inner.lock();
        if !inner.pending.contains(&p) {
            inner.pending.push_back(p);
        }
    }

    pub fn pending(&self) -> Vec<PendingPlan> {
        self.inner.lock().pending.iter().cloned().collect()
    }

    pub fn pending_len(&self) -> usize {
        self.inner.lock().pending.len()
    }

    /// While `idle` holds, pop a pending plan, run it and record the
    /// outcome. Failures become tombstones rather than errors. Returns how
    /// many plans ran.
    pub fn drain_background(
        &self,
        mut run: impl FnMut(&PendingPlan) -> Result<(f64, UsageSnapshot)>,
        idle: impl Fn() -> bool,
        now_ms: impl Fn() -> u64,
    ) -> Result<usize> {
        let mut n = 0;
        while idle() {
            let Some(p) = self.inner.lock().pending.pop_front() else {
                break;
            };
            let (phase, runtime_ms, usage) = match run(&p) {
                Ok((ms, usage)) => (Phase::Background, ms, usage),
                Err(_) => (Phase::Failed, 0.0, UsageSnapshot::default()),
            };
            self.record(PerfRecord {
                timestamp_ms: now_ms(),
                phase,
                signature: p.signature,
                plan_id: p.plan_id,
                runtime_ms,
                usage,
            })?;
            n += 1;
        }
        Ok(n)
    }
}

/// plan id -> (mean runtime, count), ignoring failed runs.
fn means<'a>(recs: impl Iterator<Item = &'a PerfRecord>) -> BTreeMap<String, (f64, usize)> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in recs.filter(|r| r.phase != Phase::Failed) {
        let e = acc.entry(r.plan_id.clone()).or_default();
        e.0 += r.runtime_ms;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (sum, n))| (k, (sum / n as f64, n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(structure: &str, objects: &[&str], constants: &[&str]) -> Signature {
        Signature {
            structure: structure.into(),
            objects: objects.iter().map(|s| s.to_string()).collect(),
            constants: constants.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn rec(s: &Signature, plan: &str, ms: f64, ts: u64) -> PerfRecord {
        PerfRecord {
            timestamp_ms: ts,
            phase: Phase::Training,
            signature: s.clone(),
            plan_id: plan.into(),
            runtime_ms: ms,
            usage: UsageSnapshot::new(BTreeMap::from([("rel".to_string(), 0.25)]), 0, ts),
        }
    }

    #[test]
    fn similarity_formula() {
        let w = [0.6, 0.3, 0.1];
        let a = sig("s", &["rel.t"], &["60"]);
        assert_eq!(similarity(&a, &a, &w), 1.0);
        assert_eq!(similarity(&a, &sig("s", &["rel.t"], &["70"]), &w), 0.9);
        assert_eq!(similarity(&a, &sig("x", &["rel.t"], &["60"]), &w), 0.4);
        let e = sig("s", &[], &[]);
        assert_eq!(similarity(&e, &e, &w), 1.0);
    }

    #[test]
    fn best_plan_uses_mean_and_ties_by_id() {
        let m = Monitor::in_memory(MonitorConfig::default());
        let s = sig("s", &["rel.t"], &[]);
        assert!(m.best_plan(&s).is_err());
        for (p, ms) in [("A", 100.0), ("A", 140.0), ("B", 80.0)] {
            m.record(rec(&s, p, ms, 1)).unwrap();
        }
        assert_eq!(m.best_plan(&s).unwrap(), "B");
        m.record(rec(&s, "B", 160.0, 2)).unwrap();
        // A: 120, B: 120
        assert_eq!(m.best_plan(&s).unwrap(), "A");
    }

    #[test]
    fn nearest_prefers_recent_on_tie() {
        let m = Monitor::in_memory(MonitorConfig::default());
        assert!(m.nearest(&sig("s", &[], &[])).is_none());
        let a = sig("s", &["rel.t"], &["1"]);
        let b = sig("s", &["rel.t"], &["2"]);
        m.record(rec(&a, "p", 1.0, 1)).unwrap();
        m.record(rec(&b, "p", 1.0, 2)).unwrap();
        let (got, s) = m.nearest(&sig("s", &["rel.t"], &["3"])).unwrap();
        assert_eq!((got, s), (b.clone(), 0.9));
        let (got, s) = m.nearest(&a).unwrap();
        assert_eq!((got, s), (a, 1.0));
    }

    #[test]
    fn log_line_escapes_separators() {
        let s = sig("ab", &["rel.t;x"], &["'a\tb'", "'%'"]);
        let r = rec(&s, "p", 0.0, 7);
        let line = r.to_line();
        assert_eq!(line, "7\ttraining\tab\trel.t%3Bx\t'a%09b';'%25'\tp\t0\trel=0.25");
        assert_eq!(PerfRecord::parse_line(&line, 1).unwrap(), r);
        assert!(PerfRecord::parse_line("1\tnope", 3)
            .unwrap_err()
            .to_string()
            .contains("line 3"));
    }

    #[test]
    fn reopen_replays_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.log");
        let s = sig("s", &["rel.t"], &["1"]);
        {
            let m = Monitor::open(&path, MonitorConfig::default()).unwrap();
            m.record(rec(&s, "A", 12.5, 1)).unwrap();
            m.record(rec(&s, "B", 3.0, 2)).unwrap();
        }
        let m = Monitor::open(&path, MonitorConfig::default()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.best_plan(&s).unwrap(), "B");
        assert_eq!(m.dump().unwrap().lines().count(), 2);
    }

    #[test]
    fn drain_stops_when_busy_and_tombstones_failures() {
        let m = Monitor::in_memory(MonitorConfig::default());
        let s = sig("s", &[], &[]);
        for p in ["A", "B", "C"] {
            m.enqueue(PendingPlan {
                signature: s.clone(),
                query: "q".into(),
                plan_id: p.into(),
            });
        }
        let calls = std::cell::Cell::new(0);
        let n = m
            .drain_background(
                |p| {
                    calls.set(calls.get() + 1);
                    if p.plan_id == "A" {
                        Err(Error::Plan("boom".into()))
                    } else {
                        Ok((5.0, UsageSnapshot::default()))
                    }
                },
                || calls.get() < 2,
                || 9,
            )
            .unwrap();
        assert_eq!(n, 2);
        assert_eq!(m.pending_len(), 1);
        let recs = m.records();
        assert_eq!(recs[0].phase, Phase::Failed);
        assert_eq!(recs[1].phase, Phase::Background);
        assert_eq!(m.best_plan(&s).unwrap(), "B");
    }
}
