//! Parameterized polystore query families, each paired with an equivalent
//! SQL query over a relational-only copy of the dataset.

use polydawg::datagen::{Dataset, DRUGS};
use polydawg::engines::{Catalog, EngineId, EngineModel, LoadOptions};
use polydawg::migrator::{cast_table, CastSpec};
use polydawg::{CanonicalTable, Result};
use rand::Rng;

pub const FAMILIES: usize = 6;

pub struct Case {
    pub family: usize,
    pub query: String,
    pub oracle_sql: String,
}

/// Random parameters for family `f`, always giving a non-empty result.
pub fn params(f: usize, rng: &mut impl Rng) -> Vec<i64> {
    let pair = |rng: &mut dyn rand::RngCore, n: i64, width: i64| {
        let lo = rng.gen_range(0..n - width);
        vec![lo, lo + rng.gen_range(1..=width)]
    };
    match f {
        0 => {
            let mut p = pair(rng, 100, 30);
            p.extend(pair(rng, 10, 9));
            p.push(rng.gen_range(18..70));
            p
        }
        1 => pair(rng, 100, 40),
        2 => vec![rng.gen_range(18..90)],
        3 => pair(rng, DRUGS.len() as i64, 7),
        4 => vec![rng.gen_range(20..80)],
        _ => {
            let mut p = pair(rng, 100, 40);
            p.push(rng.gen_range(0..8));
            p
        }
    }
}

/// Patient ids are decimal text in the key-value objects; ranges compare
/// as text, so order the bounds that way.
fn text_range(a: i64, b: i64) -> (String, String) {
    let (a, b) = (a.to_string(), b.to_string());
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Family `f` with parameters `p`; every object name gets `suffix`.
pub fn case(f: usize, p: &[i64], suffix: &str) -> Case {
    let (patients, notes, waveform, dose) = (
        format!("patients{suffix}"),
        format!("notes{suffix}"),
        format!("waveform{suffix}"),
        format!("dose{suffix}"),
    );
    let (query, oracle_sql) = match f {
        0 => {
            let (lo, hi, t0, t1, a) = (p[0], p[1], p[2], p[3], p[4]);
            (
                format!(
                    "relational(SELECT p.id, p.age, w.sum_v FROM {patients} p JOIN cast(array(agg(subarray({waveform}, patient={lo}:{hi}, t={t0}:{t1}), sum(v), patient)), relational, w) ON p.id = w.patient WHERE p.age > {a})"
                ),
                format!(
                    "SELECT p.id, p.age, SUM(w.v) AS sum_v FROM patients p JOIN waveform_r w ON p.id = w.patient \
                     WHERE w.patient >= {lo} AND w.patient <= {hi} AND w.t >= {t0} AND w.t <= {t1} AND p.age > {a} \
                     GROUP BY p.id, p.age"
                ),
            )
        }
        1 => {
            let (lo, hi) = text_range(p[0], p[1]);
            (
                format!(
                    "relational(SELECT n.r, COUNT(*) AS k FROM cast(text(scan({notes}, rows \"{lo}\":\"{hi}\")), relational, n) GROUP BY n.r)"
                ),
                format!("SELECT r, COUNT(*) AS k FROM notes_t WHERE r >= '{lo}' AND r <= '{hi}' GROUP BY r"),
            )
        }
        2 => {
            let a = p[0];
            (
                format!(
                    "d4m(matmul(transpose(cast(relational(SELECT id, age FROM {patients} WHERE age > {a}), d4m, pa, key=id)), {dose}))"
                ),
                format!(
                    "SELECT pa.c AS r, d.c AS c, SUM(pa.v * d.v) AS v FROM pa_t pa JOIN dose_t d ON pa.r = d.r \
                     WHERE pa.v > {a} GROUP BY pa.c, d.c"
                ),
            )
        }
        3 => {
            let (lo, hi) = (DRUGS[p[0] as usize], DRUGS[p[1] as usize]);
            (
                format!(
                    "relational(SELECT s.c, SUM(s.v) AS total FROM cast(d4m(select(matmul(transpose({dose}), {dose}), \"{lo}\":\"{hi}\", *)), relational, s) GROUP BY s.c)"
                ),
                format!(
                    "SELECT y.c, SUM(x.v * y.v) AS total FROM dose_t x JOIN dose_t y ON x.r = y.r \
                     WHERE x.c >= '{lo}' AND x.c <= '{hi}' GROUP BY y.c"
                ),
            )
        }
        4 => {
            let a = p[0];
            (
                format!(
                    "array(agg(cast(relational(SELECT id, age FROM {patients} WHERE age > {a}), array, pz, key=id), sum(age)))"
                ),
                format!("SELECT SUM(age) AS sum_age FROM patients WHERE age > {a}"),
            )
        }
        _ => {
            let (lo, hi) = (p[0], p[1]);
            let x = format!("{:.2}", p[2] as f64 * 0.25);
            (
                format!("array(filter(subarray({waveform}, patient={lo}:{hi}), v > {x}))"),
                format!("SELECT patient, t, v FROM waveform_r WHERE patient >= {lo} AND patient <= {hi} AND v > {x}"),
            )
        }
    };
    Case {
        family: f,
        query,
        oracle_sql,
    }
}

/// Everything on the relational engine: base relations as-is, associative
/// data as (r, c, v) triples, the waveform as (patient, t, v) rows, and the
/// patient ages as triples keyed by id.
pub struct Oracle {
    catalog: Catalog,
}

impl Oracle {
    pub fn new(data: &Dataset) -> Result<Oracle> {
        use EngineModel::*;
        let catalog = Catalog::with_default_engines();
        let rel = EngineId::rel();
        let put = |name: &str, t: &CanonicalTable| catalog.load(&rel, name, t, &LoadOptions::none());
        put("patients", &data.patients)?;
        put("meds", &data.meds)?;
        put(
            "notes_t",
            &cast_table(&data.notes, &CastSpec::new(KeyValue, Relational))?.table,
        )?;
        put(
            "dose_t",
            &cast_table(&data.dose, &CastSpec::new(KeyValue, Relational))?.table,
        )?;
        let wave = cast_table(
            &data.waveform,
            &CastSpec::new(Array, Relational).with_dims(&["patient", "t"]),
        )?;
        put("waveform_r", &wave.table)?;
        let ages = catalog.execute_native(&rel, "SELECT id, age FROM patients")?;
        let assoc = cast_table(&ages, &CastSpec::new(Relational, KeyValue).with_key(&["id"]))?;
        put(
            "pa_t",
            &cast_table(&assoc.table, &CastSpec::new(KeyValue, Relational))?.table,
        )?;
        Ok(Oracle { catalog })
    }

    pub fn eval(&self, sql: &str) -> Result<CanonicalTable> {
        self.catalog.execute_native(&EngineId::rel(), sql)
    }
}
