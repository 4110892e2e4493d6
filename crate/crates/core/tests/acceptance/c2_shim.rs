//! Matrix multiply over random associative arrays agrees across engines and
//! with a dense oracle that keeps an entry wherever some inner key matches.

use std::collections::BTreeMap;

use polydawg::engines::{Catalog, EngineId, LoadOptions};
use polydawg::executor::{System, SystemConfig, VirtualClock};
use polydawg::monitor::{Monitor, MonitorConfig};
use polydawg::{CanonicalTable, Tag, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 50;
const MAX_DIM: usize = 20;

type Dense = Vec<Vec<Option<i64>>>;

fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Dense {
    let density = rng.gen_range(0.05..=0.5);
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| rng.gen_bool(density).then(|| rng.gen_range(-9..=9)))
                .collect()
        })
        .collect()
}

fn triples(m: &Dense, row: &str, col: &str) -> CanonicalTable {
    let mut rows = Vec::new();
    for (i, r) in m.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            if let Some(v) = v {
                rows.push(vec![
                    Value::text(format!("{row}{i:02}")),
                    Value::text(format!("{col}{j:02}")),
                    Value::Int(*v),
                ]);
            }
        }
    }
    CanonicalTable::with_columns(&[("row", Tag::Text), ("col", Tag::Text), ("val", Tag::Int)], rows)
}

fn product(a: &Dense, b: &Dense) -> CanonicalTable {
    let mut out = BTreeMap::new();
    for (i, ar) in a.iter().enumerate() {
        for (k, av) in ar.iter().enumerate() {
            let Some(av) = av else { continue };
            for (j, bv) in b[k].iter().enumerate() {
                if let Some(bv) = bv {
                    *out.entry((i, j)).or_insert(0) += av * bv;
                }
            }
        }
    }
    let rows = out
        .into_iter()
        .map(|((i, j), v)| {
            vec![
                Value::text(format!("i{i:02}")),
                Value::text(format!("j{j:02}")),
                Value::Int(v),
            ]
        })
        .collect();
    CanonicalTable::with_columns(&[("row", Tag::Text), ("col", Tag::Text), ("val", Tag::Int)], rows)
}

pub fn run() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut engines_seen = std::collections::BTreeSet::new();
    for trial in 0..TRIALS {
        let (n, k, m) = (
            rng.gen_range(1..=MAX_DIM),
            rng.gen_range(1..=MAX_DIM),
            rng.gen_range(1..=MAX_DIM),
        );
        let a = random_dense(&mut rng, n, k);
        let b = random_dense(&mut rng, k, m);
        let expected = product(&a, &b);

        let catalog = Catalog::with_default_engines();
        let none = LoadOptions::none();
        catalog
            .load(&EngineId::kv(), "a", &triples(&a, "i", "k"), &none)
            .map_err(|e| e.to_string())?;
        catalog
            .load(&EngineId::rel(), "b", &triples(&b, "k", "j"), &none)
            .map_err(|e| e.to_string())?;
        let sys = System::new(
            catalog,
            Monitor::in_memory(MonitorConfig::default()),
            std::sync::Arc::new(VirtualClock::new()),
            &SystemConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let prepared = sys
            .prepare("d4m(matmul(a, cast(relational(SELECT * FROM b), d4m)))")
            .map_err(|e| e.to_string())?;
        let plans = sys.plans(&prepared).map_err(|e| e.to_string())?;
        ensure!(plans.len() == 3, "trial {trial}: {} plans", plans.len());
        for plan in &plans {
            engines_seen.extend(plan.sites().into_iter().map(|s| s.1));
            let out = sys
                .execute_plan(plan, &prepared.decomposition)
                .map_err(|e| e.to_string())?;
            ensure!(
                out.result.bag_eq_approx(&expected, 1e-9),
                "trial {trial} ({n}x{k} * {k}x{m}) plan {}:\n{}\nexpected\n{}",
                plan.id,
                out.result,
                expected
            );
        }
    }
    ensure!(engines_seen.len() == 3, "matmul ran on {engines_seen:?}");
    Ok(())
}
