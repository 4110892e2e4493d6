//! Every candidate plan of 200 random queries returns the same bag as the
//! hand-written SQL over a relational-only copy of the data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::common;
use crate::families::{self, Oracle, FAMILIES};

pub const QUERIES: usize = 200;

pub fn run() -> Result<(), String> {
    let data = common::dataset();
    let sys = common::system_with(&data, 1);
    let oracle = Oracle::new(&data).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut plans_run = 0;
    for i in 0..QUERIES {
        let f = i % FAMILIES;
        let p = families::params(f, &mut rng);
        let case = families::case(f, &p, "");
        let expected = oracle
            .eval(&case.oracle_sql)
            .map_err(|e| format!("oracle for {}: {e}", case.query))?;
        ensure!(!expected.is_empty(), "empty oracle result for {}", case.query);
        let prepared = sys.prepare(&case.query).map_err(|e| format!("{}: {e}", case.query))?;
        let plans = sys.plans(&prepared).map_err(|e| format!("{}: {e}", case.query))?;
        for plan in &plans {
            let out = sys
                .execute_plan(plan, &prepared.decomposition)
                .map_err(|e| format!("{} plan {}: {e}", case.query, plan.id))?;
            ensure!(
                out.result.bag_eq_approx(&expected, 1e-9),
                "family {} plan {} differs on {}:\n{}\nexpected\n{}",
                case.family + 1,
                plan.id,
                case.query,
                out.result,
                expected
            );
            plans_run += 1;
        }
        ensure!(
            sys.catalog.temporaries().is_empty(),
            "temporaries left after {}",
            case.query
        );
    }
    ensure!(plans_run > QUERIES, "only {plans_run} plans ran");
    Ok(())
}
