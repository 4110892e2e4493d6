//! Queries differing only in literals share a signature structure and score
//! 0.9 under the default weights; renaming the objects keeps the structure
//! but falls below the match threshold.

use std::collections::BTreeSet;

use polydawg::datagen;
use polydawg::planner::Signature;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::common;
use crate::families::{self, FAMILIES};

const PAIRS: usize = 100;

pub fn run() -> Result<(), String> {
    let data = common::dataset();
    let sys = common::system_with(&data, 1);
    for ((name, t), (_, engine, opts)) in data.tables().into_iter().zip(datagen::layout()) {
        sys.catalog
            .load(&engine, &format!("{name}_b"), t, &opts)
            .map_err(|e| e.to_string())?;
    }
    let sig =
        |q: &str| -> Result<Signature, String> { sys.prepare(q).map(|p| p.signature).map_err(|e| format!("{q}: {e}")) };
    let threshold = sys.monitor.config().threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut pairs = 0;
    let mut attempts = 0;
    while pairs < PAIRS {
        attempts += 1;
        ensure!(attempts < PAIRS * 50, "could not draw disjoint constants");
        let f = attempts % FAMILIES;
        let pa = families::params(f, &mut rng);
        let a = families::case(f, &pa, "");
        let b = families::case(f, &families::params(f, &mut rng), "");
        let (sa, sb) = (sig(&a.query)?, sig(&b.query)?);
        let ca: BTreeSet<_> = sa.constants.iter().collect();
        if sa.constants.is_empty() || sb.constants.iter().any(|c| ca.contains(c)) {
            continue;
        }
        pairs += 1;
        ensure!(
            sa.structure == sb.structure,
            "structure differs:\n{}\n{}",
            a.query,
            b.query
        );
        ensure!(sa.objects == sb.objects, "objects differ:\n{}\n{}", a.query, b.query);
        let s = sys.monitor.similarity(&sa, &sb);
        ensure!(s == 0.9, "similarity {s} for\n{}\n{}", a.query, b.query);

        let renamed = families::case(f, &pa, "_b");
        let sr = sig(&renamed.query)?;
        ensure!(
            sr.structure == sa.structure,
            "renaming changed structure: {}",
            renamed.query
        );
        ensure!(sr.objects != sa.objects, "renaming kept objects: {}", renamed.query);
        let s = sys.monitor.similarity(&sa, &sr);
        ensure!(
            s == 0.7 && s < threshold,
            "renamed objects score {s}: {}",
            renamed.query
        );
    }
    Ok(())
}
