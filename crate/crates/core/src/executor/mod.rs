//! Plan execution plus the training and production control flow.

mod clock;
mod run;

pub use clock::{Clock, LatencyModel, SystemClock, UsageTracker, VirtualClock, USAGE_WINDOW_MS};
pub use run::PlanOutcome;

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cif;
use crate::engines::{Catalog, EngineId};
use crate::error::{Error, Result};
use crate::island::IslandRegistry;
use crate::monitor::{Monitor, PendingPlan, PerfRecord, Phase, UsageSnapshot};
use crate::planner::{self, CandidatePlan, Prepared, Signature, DEFAULT_PLAN_CAP};
use crate::value::CanonicalTable;

/// Plans of one query must agree to this relative tolerance.
pub const RESULT_TOLERANCE: f64 = 1e-9;
/// Quiet period before background work may start.
pub const IDLE_AFTER_MS: f64 = 5_000.0;
/// Every engine must be below this busy fraction for the system to be idle.
pub const IDLE_BUSY_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductionCase {
    /// Close signature, similar usage: its best plan.
    Matched,
    /// Close signature, usage far from training. `alternate` says whether a
    /// plan measured under similar usage was found.
    UsageShifted { alternate: bool },
    /// Nothing close enough: a random plan, the rest queued.
    Untrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryReport {
    pub result: CanonicalTable,
    pub phase: Phase,
    pub plan_id: String,
    pub runtime_ms: f64,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    /// Training only: every plan with its runtime, in plan order.
    pub plan_runtimes: Vec<(String, f64)>,
    pub signature: Signature,
    /// Production only: the stored signature used and its similarity.
    pub matched: Option<(Signature, f64)>,
    pub case: Option<ProductionCase>,
    pub enqueued: usize,
    pub retrain_recommended: bool,
}

impl QueryReport {
    /// The result as CIF, then a `key=value` footer.
    pub fn render(&self) -> String {
        let mut out = cif::write_string(&self.result);
        if !out.ends_with('\n') {
            out.push('\n');
        }
        out.push_str("--\n");
        let _ = writeln!(out, "phase={}", self.phase);
        let _ = writeln!(out, "plan-id={}", self.plan_id);
        let _ = writeln!(out, "runtime-ms={}", self.runtime_ms);
        let _ = writeln!(out, "warnings={}", self.warnings.join("; "));
        for n in &self.notes {
            let _ = writeln!(out, "note={n}");
        }
        for (id, ms) in &self.plan_runtimes {
            let _ = writeln!(out, "plan-runtime={id} {ms}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub plan_cap: usize,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            plan_cap: DEFAULT_PLAN_CAP,
            seed: 0,
        }
    }
}

/// Engines, islands, monitor and clocks; one foreground query at a time.
pub struct System {
    pub catalog: Catalog,
    pub registry: IslandRegistry,
    pub monitor: Monitor,
    clock: Arc<dyn Clock>,
    latency: RwLock<LatencyModel>,
    tracker: UsageTracker,
    rng: Mutex<ChaCha8Rng>,
    plan_cap: usize,
    foreground: Mutex<()>,
    active: AtomicUsize,
    last_foreground_end: Mutex<Option<f64>>,
}

/// Marks a foreground query for the idle check.
struct Foreground<'a>(&'a System);

impl Drop for Foreground<'_> {
    fn drop(&mut self) {
        *self.0.last_foreground_end.lock() = Some(self.0.clock.now_ms());
        self.0.active.fetch_sub(1, Ordering::SeqCst);
    }
}

impl System {
    pub fn new(catalog: Catalog, monitor: Monitor, clock: Arc<dyn Clock>, config: &SystemConfig) -> Result<Self> {
        if config.plan_cap == 0 {
            return Err(Error::Config("plan cap must be at least 1".into()));
        }
        let registry = IslandRegistry::register_defaults(&catalog)?;
        Ok(System {
            catalog,
            registry,
            monitor,
            clock,
            latency: RwLock::new(LatencyModel::default()),
            tracker: UsageTracker::default(),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(config.seed)),
            plan_cap: config.plan_cap,
            foreground: Mutex::new(()),
            active: AtomicUsize::new(0),
            last_foreground_end: Mutex::new(None),
        })
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    pub fn set_latency(&self, latency: LatencyModel) {
        *self.latency.write() = latency;
    }

    /// Mark `engine` busy for the `ms` just past, as if other work ran there.
    pub fn add_external_load(&self, engine: &EngineId, ms: f64) {
        let now = self.clock.now_ms();
        self.tracker.charge(engine, now - ms, now);
    }

    pub fn current_usage(&self) -> UsageSnapshot {
        self.tracker.snapshot(
            &self.catalog.engine_ids(),
            self.clock.now_ms(),
            self.active.load(Ordering::SeqCst),
        )
    }

    pub fn prepare(&self, text: &str) -> Result<Prepared> {
        planner::prepare(text, &self.registry, &self.catalog)
    }

    pub fn plans(&self, p: &Prepared) -> Result<Vec<CandidatePlan>> {
        planner::enumerate_plans(&p.decomposition, self.plan_cap)
    }

    pub fn explain(&self, text: &str) -> Result<String> {
        let p = self.prepare(text)?;
        let plans = self.plans(&p)?;
        Ok(planner::explain(&p, &plans))
    }

    fn enter(&self) -> Foreground<'_> {
        self.active.fetch_add(1, Ordering::SeqCst);
        Foreground(self)
    }

    fn record(&self, phase: Phase, sig: &Signature, plan_id: &str, o: &PlanOutcome) -> Result<()> {
        self.monitor.record(PerfRecord {
            timestamp_ms: self.clock.now_ms().max(0.0) as u64,
            phase,
            signature: sig.clone(),
            plan_id: plan_id.to_string(),
            runtime_ms: o.runtime_ms,
            usage: o.usage.clone(),
        })
    }

    pub fn run_query(&self, text: &str, training: bool) -> Result<QueryReport> {
        if training {
            self.run_training(text)
        } else {
            self.run_production(text)
        }
    }

    /// Run every candidate plan, record each, and return the fastest
    /// plan's result. Plans disagreeing on the result is an error.
    pub fn run_training(&self, text: &str) -> Result<QueryReport> {
        let _serial = self.foreground.lock();
        let _fg = self.enter();
        let p = self.prepare(text)?;
        let plans = self.plans(&p)?;
        let mut runs: Vec<(String, PlanOutcome)> = Vec::new();
        for plan in &plans {
            let o = self.execute_plan(plan, &p.decomposition)?;
            self.record(Phase::Training, &p.signature, &plan.id, &o)?;
            runs.push((plan.id.clone(), o));
        }
        let reference = &runs[0];
        for (id, o) in &runs[1..] {
            if !o.result.bag_eq_approx(&reference.1.result, RESULT_TOLERANCE) {
                return Err(Error::Consistency(format!(
                    "plans {} and {id} returned different results",
                    reference.0
                )));
            }
        }
        let plan_runtimes = runs.iter().map(|(id, o)| (id.clone(), o.runtime_ms)).collect();
        let fastest = runs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.runtime_ms.total_cmp(&b.1 .1.runtime_ms).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .expect("at least one plan");
        let (plan_id, o) = runs.swap_remove(fastest);
        Ok(QueryReport {
            result: o.result,
            phase: Phase::Training,
            plan_id,
            runtime_ms: o.runtime_ms,
            warnings: o.warnings,
            notes: vec![format!("trained {} plans", plans.len())],
            plan_runtimes,
            signature: p.signature,
            matched: None,
            case: None,
            enqueued: 0,
            retrain_recommended: false,
        })
    }

    /// Use what the monitor knows about the closest signature; with
    /// nothing close, run one plan at random and queue the others.
    pub fn run_production(&self, text: &str) -> Result<QueryReport> {
        let _serial = self.foreground.lock();
        let _fg = self.enter();
        let p = self.prepare(text)?;
        let plans = self.plans(&p)?;
        let config = self.monitor.config().clone();
        let current = self.current_usage();
        let mut notes = Vec::new();
        let matched = self
            .monitor
            .nearest(&p.signature)
            .filter(|(_, s)| *s >= config.threshold);

        let mut choice = None;
        if let Some((stored, sim)) = &matched {
            if let Ok(best) = self.monitor.best_plan(stored) {
                let trained_near = self
                    .monitor
                    .records_for(stored)
                    .iter()
                    .filter(|r| r.plan_id == best && r.phase != Phase::Failed)
                    .any(|r| r.usage.max_difference(&current) <= config.usage_bound);
                let (id, case, retrain) = if trained_near {
                    (best, ProductionCase::Matched, false)
                } else if let Some(alt) = self.monitor.best_plan_near_usage(stored, &current) {
                    notes.push("usage differs from training; using the best plan measured under similar usage".into());
                    (alt, ProductionCase::UsageShifted { alternate: true }, false)
                } else {
                    notes.push("usage differs from training and no plan was measured under similar usage; retraining recommended".into());
                    (best, ProductionCase::UsageShifted { alternate: false }, true)
                };
                match plans.iter().find(|x| x.id == id) {
                    Some(plan) => {
                        notes.insert(0, format!("matched signature {} (similarity {sim})", stored.structure));
                        choice = Some((plan, case, retrain));
                    }
                    None => {
                        notes.clear();
                        notes.push("matched signature has no applicable plan".into());
                    }
                }
            }
        }

        let mut enqueued = 0;
        let (plan, case, retrain) = match choice {
            Some(c) => c,
            None => {
                let i = self.rng.lock().gen_range(0..plans.len());
                let known = self.monitor.known_plans(&p.signature);
                for (j, other) in plans.iter().enumerate() {
                    if j != i && !known.contains(&other.id) {
                        self.monitor.enqueue(PendingPlan {
                            signature: p.signature.clone(),
                            query: text.to_string(),
                            plan_id: other.id.clone(),
                        });
                        enqueued += 1;
                    }
                }
                notes.push("untrained signature; randomly selected plan".into());
                if enqueued > 0 {
                    notes.push(format!("{enqueued} plans queued for background execution"));
                }
                (&plans[i], ProductionCase::Untrained, false)
            }
        };
        let o = self.execute_plan(plan, &p.decomposition)?;
        self.record(Phase::Production, &p.signature, &plan.id, &o)?;
        Ok(QueryReport {
            result: o.result,
            phase: Phase::Production,
            plan_id: plan.id.clone(),
            runtime_ms: o.runtime_ms,
            warnings: o.warnings,
            notes,
            plan_runtimes: Vec::new(),
            signature: p.signature,
            matched,
            case: Some(case),
            enqueued,
            retrain_recommended: retrain,
        })
    }

    /// No foreground query running or finished within the quiet period,
    /// and every engine lightly used.
    pub fn is_idle(&self) -> bool {
        if self.active.load(Ordering::SeqCst) > 0 {
            return false;
        }
        let now = self.clock.now_ms();
        let quiet = self.last_foreground_end.lock().is_none_or(|t| now - t >= IDLE_AFTER_MS);
        quiet && self.current_usage().busy.values().all(|&f| f < IDLE_BUSY_FRACTION)
    }

    /// Measure queued plans while the system stays idle.
    pub fn drain_background(&self) -> Result<usize> {
        self.drain_background_while(|| self.is_idle())
    }

    /// As `drain_background`, with the caller deciding when to stop.
    pub fn drain_background_while(&self, idle: impl Fn() -> bool) -> Result<usize> {
        self.monitor.drain_background(
            |pending| self.run_pending(pending),
            idle,
            || self.clock.now_ms().max(0.0) as u64,
        )
    }

    fn run_pending(&self, pending: &PendingPlan) -> Result<(f64, UsageSnapshot)> {
        let p = self.prepare(&pending.query)?;
        let plans = self.plans(&p)?;
        let plan = plans
            .iter()
            .find(|x| x.id == pending.plan_id)
            .ok_or_else(|| Error::Plan(format!("plan {} no longer applies", pending.plan_id)))?;
        let o = self.execute_plan(plan, &p.decomposition)?;
        Ok((o.runtime_ms, o.usage))
    }
}
