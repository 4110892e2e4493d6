//! The performance log survives a reopen record for record, and each line
//! matches an independently formatted one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use polydawg::monitor::{Monitor, MonitorConfig, PerfRecord, Phase, UsageSnapshot};
use polydawg::planner::Signature;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RECORDS: usize = 1000;

fn field(rng: &mut ChaCha8Rng) -> String {
    const PIECES: &[&str] = &[
        "a", "Z9", "%", ";", ",", "=", "\t", "\n", " ", "é", "'x'", "\"", "\\", "|", "\u{7f}",
    ];
    (0..rng.gen_range(1..6)).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

fn list(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut v: Vec<String> = (0..rng.gen_range(0..4)).map(|_| field(rng)).collect();
    v.sort();
    v
}

fn record(rng: &mut ChaCha8Rng) -> PerfRecord {
    let ts = rng.gen_range(0..u64::from(u32::MAX));
    let busy: BTreeMap<String, f64> = (0..rng.gen_range(0..4))
        .map(|_| (field(rng), rng.gen_range(0.0..=1.0)))
        .collect();
    PerfRecord {
        timestamp_ms: ts,
        phase: *[Phase::Training, Phase::Production, Phase::Background, Phase::Failed]
            .choose(rng)
            .unwrap(),
        signature: Signature {
            structure: field(rng),
            objects: list(rng),
            constants: list(rng),
        },
        plan_id: field(rng),
        runtime_ms: rng.gen_range(0.0..1e5),
        usage: UsageSnapshot::new(busy, 0, ts),
    }
}

/// Percent-encode controls, non-ASCII bytes and the log's separators.
fn escape(s: &str) -> String {
    let mut out = String::new();
    for b in s.bytes() {
        if !(0x20..0x7f).contains(&b) || b"%;,=".contains(&b) {
            let _ = write!(out, "%{b:02X}");
        } else {
            out.push(b as char);
        }
    }
    out
}

fn expected_line(r: &PerfRecord) -> String {
    let join = |xs: &[String]| xs.iter().map(|x| escape(x)).collect::<Vec<_>>().join(";");
    let usage: Vec<String> = r.usage.busy.iter().map(|(e, f)| format!("{}={f}", escape(e))).collect();
    let phase = match r.phase {
        Phase::Training => "training",
        Phase::Production => "production",
        Phase::Background => "background",
        Phase::Failed => "failed",
    };
    [
        r.timestamp_ms.to_string(),
        phase.to_string(),
        escape(&r.signature.structure),
        join(&r.signature.objects),
        join(&r.signature.constants),
        escape(&r.plan_id),
        r.runtime_ms.to_string(),
        usage.join(","),
    ]
    .join("\t")
}

pub fn run() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("monitor.log");
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let written: Vec<PerfRecord> = (0..RECORDS).map(|_| record(&mut rng)).collect();
    {
        let m = Monitor::open(&path, MonitorConfig::default()).map_err(|e| e.to_string())?;
        for r in &written {
            m.record(r.clone()).map_err(|e| e.to_string())?;
        }
    }
    let reopened = Monitor::open(&path, MonitorConfig::default()).map_err(|e| e.to_string())?;
    let read = reopened.records();
    ensure!(read.len() == RECORDS, "{} records after reopen", read.len());
    if let Some(i) = (0..RECORDS).find(|&i| read[i] != written[i]) {
        return Err(format!("record {i} changed:\n{:?}\n{:?}", written[i], read[i]));
    }
    let dump = reopened.dump().map_err(|e| e.to_string())?;
    let lines: Vec<&str> = dump.lines().collect();
    ensure!(lines.len() == RECORDS, "{} dump lines", lines.len());
    for (i, (line, r)) in lines.iter().zip(&written).enumerate() {
        ensure!(*line == expected_line(r), "line {i}:\n{line}\n{}", expected_line(r));
    }
    Ok(())
}
