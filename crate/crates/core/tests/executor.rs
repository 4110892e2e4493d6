mod common;

use polydawg::engines::EngineId;
use polydawg::executor::ProductionCase;
use polydawg::monitor::Phase;
use polydawg::planner::Step;
use polydawg::{CanonicalTable, Value};

#[test]
fn single_container_matches_native() {
    let s = common::system();
    let q = "relational(SELECT id, age FROM patients WHERE age > 60)";
    let p = s.prepare(q).unwrap();
    let plans = s.plans(&p).unwrap();
    assert_eq!(plans.len(), 1);
    let out = s.execute_plan(&plans[0], &p.decomposition).unwrap();
    let direct = s
        .catalog
        .execute_native(&EngineId::rel(), "SELECT id, age FROM patients WHERE age > 60")
        .unwrap();
    assert!(out.result.bag_eq(&direct));
}

#[test]
fn kv_to_rel_join_matches_hand_oracle() {
    let data = common::dataset();
    let s = common::system_with(&data, 1);
    let q = "relational(SELECT n.r, n.c, d.c FROM cast(text(scan(notes, rows \"10\":\"19\")), relational, n) \
             JOIN cast(text(scan(dose)), relational, d) ON n.r = d.r WHERE n.c >= 'n1')";
    let r = s.run_training(q).unwrap();
    let text = |v: &Value| match v {
        Value::Text(t) => t.clone(),
        other => panic!("expected text, got {other:?}"),
    };
    let mut expected = Vec::new();
    for n in &data.notes.rows {
        let (key, seq) = (text(&n[0]), text(&n[1]));
        if key.as_str() < "10" || key.as_str() > "19" || seq.as_str() < "n1" {
            continue;
        }
        for d in data.dose.rows.iter().filter(|d| text(&d[0]) == key) {
            expected.push(vec![Value::text(&key), Value::text(&seq), d[1].clone()]);
        }
    }
    assert!(!expected.is_empty());
    let oracle = CanonicalTable::new(r.result.schema.clone(), expected);
    assert!(r.result.bag_eq(&oracle), "{}", r.result);
    assert!(s.catalog.temporaries().is_empty());
}

#[test]
fn three_plan_training_records_each_plan() {
    let s = common::system();
    s.set_latency(common::skewed_latency());
    let r = s.run_training(&common::dose_by_age(60)).unwrap();
    let mut runtimes: Vec<f64> = r.plan_runtimes.iter().map(|x| x.1).collect();
    runtimes.sort_by(f64::total_cmp);
    assert_eq!(runtimes, [80.0, 120.0, 200.0]);
    assert_eq!(r.runtime_ms, 80.0);
    let recs = s.monitor.records();
    assert_eq!(recs.len(), 3);
    assert!(recs
        .iter()
        .all(|x| x.signature == r.signature && x.phase == Phase::Training));
    assert!(s.catalog.temporaries().is_empty());

    let again = s.run_production(&common::dose_by_age(60)).unwrap();
    assert_eq!(again.case, Some(ProductionCase::Matched));
    assert_eq!(again.plan_id, r.plan_id);
    let variant = s.run_production(&common::dose_by_age(45)).unwrap();
    assert_eq!(variant.matched.as_ref().unwrap().1, 0.9);
    assert_eq!(variant.plan_id, r.plan_id);
}

#[test]
fn missing_migrate_aborts_and_cleans_up() {
    let s = common::system();
    let p = s.prepare(&common::dose_by_age(50)).unwrap();
    let plans = s.plans(&p).unwrap();
    let mut broken = plans.iter().find(|x| x.estimated_moves == 3).unwrap().clone();
    let last_migrate = broken
        .steps
        .iter()
        .rposition(|x| matches!(x, Step::Migrate(_)))
        .unwrap();
    broken.steps.remove(last_migrate);
    let err = s.execute_plan(&broken, &p.decomposition).unwrap_err();
    assert!(err.to_string().contains("not on"), "{err}");
    assert!(s.catalog.temporaries().is_empty());
}

#[test]
fn cold_start_then_drain() {
    let s = common::system();
    let r = s.run_production(&common::dose_by_age(30)).unwrap();
    assert_eq!(r.case, Some(ProductionCase::Untrained));
    assert_eq!(r.enqueued, 2);
    assert_eq!(s.monitor.pending_len(), 2);
    assert!(!s.is_idle());
    s.clock().advance(10_000.0);
    assert!(s.is_idle());
    assert_eq!(s.drain_background().unwrap(), 2);
    assert_eq!(s.monitor.records_for(&r.signature).len(), 3);
}
