use std::fmt::Write;

use super::decompose::RemainderNode;
use super::enumerate::CandidatePlan;
use super::Prepared;

/// Stable text rendering of a prepared query and its candidate plans.
pub fn explain(p: &Prepared, plans: &[CandidatePlan]) -> String {
    let d = &p.decomposition;
    let mut out = String::new();
    let _ = writeln!(out, "containers:");
    for c in &d.containers {
        let _ = writeln!(out, "  {} {} on {}: {}", c.node, c.id, c.engine, c.native);
    }
    if d.remainder.is_empty() {
        let _ = writeln!(out, "remainder: empty");
    } else {
        let _ = writeln!(out, "remainder:");
        for r in &d.remainder {
            match r {
                RemainderNode::CrossOp(x) => {
                    let shape = x.op.shape(&|n| n.to_string());
                    let sites: Vec<&str> = x.sites.iter().map(|s| s.as_str()).collect();
                    let _ = writeln!(out, "  {} {}({}) sites [{}]", x.node, x.island, shape, sites.join(", "));
                }
                RemainderNode::Cast { node, cast } => {
                    let _ = write!(out, "  {node} cast {} {}->{}", cast.input, cast.from, cast.to);
                    if let Some(k) = &cast.key {
                        let _ = write!(out, " key=({})", k.join(", "));
                    }
                    if let Some(a) = &cast.alias {
                        let _ = write!(out, " as {a}");
                    }
                    out.push('\n');
                }
            }
        }
    }
    let s = &p.signature;
    let _ = writeln!(out, "signature:");
    let _ = writeln!(out, "  structure: {}", s.structure);
    let _ = writeln!(out, "  objects: [{}]", s.objects.join(", "));
    let _ = writeln!(out, "  constants: [{}]", s.constants.join(", "));
    let _ = writeln!(out, "plans: {}", plans.len());
    for (i, plan) in plans.iter().enumerate() {
        let _ = writeln!(out, "  plan {} {} moves={}", i + 1, plan.id, plan.estimated_moves);
        for (j, step) in plan.steps.iter().enumerate() {
            let _ = writeln!(out, "    {}. {step}", j + 1);
        }
    }
    out
}
