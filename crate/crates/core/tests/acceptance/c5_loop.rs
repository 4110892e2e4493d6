//! Training measures all three plans; production reuses the fastest for the
//! same query and for a literal variant, and notices when engine load moves
//! away from what training saw.

use polydawg::engines::EngineId;
use polydawg::executor::ProductionCase;

use crate::common;

pub fn run() -> Result<(), String> {
    let sys = common::system();
    sys.set_latency(common::skewed_latency());
    let query = common::dose_by_age(60);
    let trained = sys.run_training(&query).map_err(|e| e.to_string())?;
    let mut runtimes: Vec<f64> = trained.plan_runtimes.iter().map(|r| r.1).collect();
    runtimes.sort_by(f64::total_cmp);
    ensure!(runtimes == [80.0, 120.0, 200.0], "training runtimes {runtimes:?}");

    // The 80 ms plan is the one running the multiply on the key-value engine.
    let prepared = sys.prepare(&query).map_err(|e| e.to_string())?;
    let plans = sys.plans(&prepared).map_err(|e| e.to_string())?;
    let fastest = plans
        .iter()
        .find(|p| p.sites().last().map(|s| &s.1) == Some(&EngineId::kv()))
        .ok_or("no plan multiplies on kv")?;
    ensure!(trained.plan_id == fastest.id, "training picked {}", trained.plan_id);

    for (label, q) in [
        ("same query", query.clone()),
        ("literal variant", common::dose_by_age(45)),
    ] {
        let r = sys.run_production(&q).map_err(|e| e.to_string())?;
        ensure!(r.case == Some(ProductionCase::Matched), "{label}: case {:?}", r.case);
        ensure!(r.plan_id == fastest.id, "{label}: chose {}", r.plan_id);
        ensure!(r.runtime_ms == 80.0, "{label}: ran {} ms", r.runtime_ms);
    }
    let again = sys.run_production(&query).map_err(|e| e.to_string())?;
    ensure!(
        again.result.bag_eq(&trained.result),
        "production result differs from training"
    );

    sys.add_external_load(&EngineId::kv(), 6_000.0);
    let shifted = sys.run_production(&query).map_err(|e| e.to_string())?;
    match shifted.case {
        Some(ProductionCase::UsageShifted { alternate: true }) => {}
        Some(ProductionCase::UsageShifted { alternate: false }) => {
            ensure!(shifted.retrain_recommended, "no retraining recommended");
        }
        other => return Err(format!("loaded kv engine gave case {other:?}")),
    }
    Ok(())
}
