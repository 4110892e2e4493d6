//! Synthetic clinical dataset: demographics, medications, free-text notes
//! and a per-patient waveform. Deterministic for a given seed.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cif;
use crate::engines::{Catalog, EngineId, LoadOptions};
use crate::error::{Error, Result};
use crate::value::{CanonicalTable, Tag, Value};

pub const PATIENTS_PER_SCALE: usize = 100;
pub const WAVEFORM_SAMPLES: usize = 10;

pub const DRUGS: &[&str] = &[
    "aspirin",
    "heparin",
    "insulin",
    "lisinopril",
    "metformin",
    "morphine",
    "propofol",
    "warfarin",
];

const NOTE_WORDS: &[&str] = &[
    "stable",
    "afebrile",
    "tachycardic",
    "sedated",
    "alert",
    "hypotensive",
    "improving",
    "ventilated",
    "pain",
    "nausea",
    "resting",
    "responsive",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// (id, age, sex)
    pub patients: CanonicalTable,
    /// (patient_id, drug, dose); one row per patient and drug.
    pub meds: CanonicalTable,
    /// Key-value triples: patient id, note sequence, text.
    pub notes: CanonicalTable,
    /// Array cells (patient, t, v).
    pub waveform: CanonicalTable,
    /// Key-value triples: patient id, drug, dose. The meds table as an
    /// associative array, for d4m queries.
    pub dose: CanonicalTable,
}

/// Object name, engine and load options for each dataset member.
pub fn layout() -> Vec<(&'static str, EngineId, LoadOptions)> {
    vec![
        ("patients", EngineId::rel(), LoadOptions::key(&["id"])),
        ("meds", EngineId::rel(), LoadOptions::key(&["patient_id", "drug"])),
        ("notes", EngineId::kv(), LoadOptions::none()),
        ("waveform", EngineId::arr(), LoadOptions::dims(&["patient", "t"])),
        ("dose", EngineId::kv(), LoadOptions::none()),
    ]
}

pub fn generate(scale: usize, seed: u64) -> Result<Dataset> {
    if scale == 0 {
        return Err(Error::Config("scale must be a positive integer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scale * PATIENTS_PER_SCALE;
    let mut patients = Vec::with_capacity(n);
    let mut meds = Vec::new();
    let mut notes = Vec::new();
    let mut waveform = Vec::with_capacity(n * WAVEFORM_SAMPLES);
    let mut dose = Vec::new();
    for id in 0..n {
        let pid = id as i64;
        let age = rng.gen_range(18..=95);
        let sex = if rng.gen_bool(0.5) { "F" } else { "M" };
        patients.push(vec![Value::Int(pid), Value::Int(age), Value::text(sex)]);

        let k = rng.gen_range(1..=3);
        let mut drugs: Vec<&str> = DRUGS.choose_multiple(&mut rng, k).copied().collect();
        drugs.sort_unstable();
        for d in drugs {
            // Half-unit steps keep sums exact in binary floating point.
            let amount = f64::from(rng.gen_range(1..=40)) * 0.5;
            meds.push(vec![Value::Int(pid), Value::text(d), Value::Real(amount)]);
            dose.push(vec![Value::text(pid.to_string()), Value::text(d), Value::Real(amount)]);
        }

        for seq in 0..rng.gen_range(0..=3) {
            let words: Vec<&str> = (0..rng.gen_range(2..=5))
                .map(|_| *NOTE_WORDS.choose(&mut rng).expect("non-empty"))
                .collect();
            notes.push(vec![
                Value::text(pid.to_string()),
                Value::text(format!("n{seq}")),
                Value::text(words.join(" ")),
            ]);
        }

        for t in 0..WAVEFORM_SAMPLES {
            let v = f64::from(rng.gen_range(-200..=200)) / 100.0;
            waveform.push(vec![Value::Int(pid), Value::Int(t as i64), Value::Real(v)]);
        }
    }
    let triples =
        |val: Tag, rows| CanonicalTable::with_columns(&[("row", Tag::Text), ("col", Tag::Text), ("val", val)], rows);
    Ok(Dataset {
        patients: CanonicalTable::with_columns(&[("id", Tag::Int), ("age", Tag::Int), ("sex", Tag::Text)], patients),
        meds: CanonicalTable::with_columns(
            &[("patient_id", Tag::Int), ("drug", Tag::Text), ("dose", Tag::Real)],
            meds,
        ),
        notes: triples(Tag::Text, notes),
        waveform: CanonicalTable::with_columns(&[("patient", Tag::Int), ("t", Tag::Int), ("v", Tag::Real)], waveform),
        dose: triples(Tag::Real, dose),
    })
}

impl Dataset {
    pub fn tables(&self) -> [(&'static str, &CanonicalTable); 5] {
        [
            ("patients", &self.patients),
            ("meds", &self.meds),
            ("notes", &self.notes),
            ("waveform", &self.waveform),
            ("dose", &self.dose),
        ]
    }

    /// One `<name>.cif` per object; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (name, t) in self.tables() {
            let p = dir.join(format!("{name}.cif"));
            cif::write_file(&p, t)?;
            out.push(p);
        }
        Ok(out)
    }

    /// Load every object onto its home engine.
    pub fn load_into(&self, catalog: &Catalog) -> Result<()> {
        for ((name, t), (lname, engine, opts)) in self.tables().into_iter().zip(layout()) {
            debug_assert_eq!(name, lname);
            catalog.load(&engine, name, t, &opts)?;
        }
        Ok(())
    }
}
