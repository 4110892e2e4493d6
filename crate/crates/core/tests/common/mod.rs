#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use polydawg::datagen::{self, Dataset};
use polydawg::engines::{Catalog, EngineId};
use polydawg::executor::{LatencyModel, System, SystemConfig, VirtualClock};
use polydawg::monitor::{Monitor, MonitorConfig};

pub fn dataset() -> Dataset {
    datagen::generate(1, 42).unwrap()
}

/// Scale-1 data on the default engines, virtual clock, in-memory monitor.
pub fn system_with(data: &Dataset, seed: u64) -> System {
    let catalog = Catalog::with_default_engines();
    data.load_into(&catalog).unwrap();
    let config = SystemConfig {
        seed,
        ..SystemConfig::default()
    };
    System::new(
        catalog,
        Monitor::in_memory(MonitorConfig::default()),
        Arc::new(VirtualClock::starting_at(100_000.0)),
        &config,
    )
    .unwrap()
}

pub fn system() -> System {
    system_with(&dataset(), 1)
}

/// Age-weighted dose per drug: three plans, matmul on each engine.
pub fn dose_by_age(min_age: i64) -> String {
    format!(
        "d4m(matmul(transpose(cast(relational(SELECT id, age FROM patients WHERE age > {min_age}), d4m, pa, key=id)), dose))"
    )
}

/// Cross-op latencies that make the three `dose_by_age` plans take
/// 120 (rel), 80 (kv) and 200 (arr) ms: transpose always runs on rel.
pub fn skewed_latency() -> LatencyModel {
    LatencyModel {
        step_ms: BTreeMap::new(),
        cross_op_ms: BTreeMap::from([
            (EngineId::rel(), 60.0),
            (EngineId::kv(), 20.0),
            (EngineId::arr(), 140.0),
        ]),
    }
}
