//! One line per acceptance criterion; exits nonzero if any fails.

/// `Err` with a formatted message unless `cond` holds.
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

#[path = "../common/mod.rs"]
mod common;

mod c1_oracle;
mod c2_shim;
mod c3_casts;
mod c4_signature;
mod c5_loop;
mod c6_cold_start;
mod c7_parser;
mod c8_monitor;
mod families;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

type Check = fn() -> Result<(), String>;

const CRITERIA: &[(&str, Check)] = &[
    ("oracle equivalence", c1_oracle::run),
    ("shim coherence", c2_shim::run),
    ("cast round-trips", c3_casts::run),
    ("signature invariance", c4_signature::run),
    ("training and production loop", c5_loop::run),
    ("cold start", c6_cold_start::run),
    ("parser round-trip", c7_parser::run),
    ("monitor durability", c8_monitor::run),
];

fn main() -> ExitCode {
    let mut failed = 0;
    for (i, (name, check)) in CRITERIA.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(()) => println!("criterion {} {name}: PASS", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({e})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
