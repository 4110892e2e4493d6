//! An untrained signature runs one random plan and queues the rest; once the
//! system is idle the queue drains and the signature counts as trained.

use std::collections::BTreeMap;

use polydawg::executor::ProductionCase;

use crate::common;

pub fn run() -> Result<(), String> {
    let sys = common::system_with(&common::dataset(), 11);
    sys.set_latency(common::skewed_latency());
    let query = common::dose_by_age(30);
    let first = sys.run_production(&query).map_err(|e| e.to_string())?;
    ensure!(first.case == Some(ProductionCase::Untrained), "case {:?}", first.case);
    ensure!(
        first.enqueued == 2 && sys.monitor.pending_len() == 2,
        "queued {}",
        first.enqueued
    );
    ensure!(
        sys.monitor.records_for(&first.signature).len() == 1,
        "first run not recorded"
    );
    ensure!(!sys.is_idle(), "idle straight after a query");

    sys.clock().advance(10_000.0);
    let drained = sys.drain_background().map_err(|e| e.to_string())?;
    ensure!(drained == 2, "drained {drained}");
    ensure!(sys.monitor.pending_len() == 0, "queue not empty");
    let records = sys.monitor.records_for(&first.signature);
    ensure!(records.len() == 3, "{} records", records.len());

    let mut totals: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for r in &records {
        let t = totals.entry(&r.plan_id).or_default();
        t.0 += r.runtime_ms;
        t.1 += 1.0;
    }
    let (best, _) = totals
        .iter()
        .map(|(id, (sum, n))| (*id, sum / n))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)))
        .ok_or("no records")?;

    let next = sys.run_production(&query).map_err(|e| e.to_string())?;
    ensure!(next.case == Some(ProductionCase::Matched), "case {:?}", next.case);
    ensure!(next.plan_id == best, "chose {} not {best}", next.plan_id);
    Ok(())
}
