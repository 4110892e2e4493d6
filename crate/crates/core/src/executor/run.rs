use std::collections::BTreeMap;

use crate::engines::EngineId;
use crate::error::{Error, Result};
use crate::migrator::{self, ModelData};
use crate::monitor::UsageSnapshot;
use crate::planner::{CandidatePlan, Decomposition, RemainderNode, Step};
use crate::querylang::NodeId;
use crate::value::CanonicalTable;

use super::System;

/// What one plan run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub result: CanonicalTable,
    pub runtime_ms: f64,
    /// Taken when the plan started.
    pub usage: UsageSnapshot,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct State {
    /// Step outputs, held in memory with the engine that produced them.
    outputs: BTreeMap<NodeId, (EngineId, ModelData)>,
    /// Temporary objects holding a slot's data on some engine.
    resident: BTreeMap<NodeId, (EngineId, String)>,
    temps: Vec<String>,
    warnings: Vec<String>,
}

impl System {
    /// Run the plan's steps in order. Temporaries are dropped afterwards
    /// whether or not a step failed.
    pub fn execute_plan(&self, plan: &CandidatePlan, d: &Decomposition) -> Result<PlanOutcome> {
        let usage = self.current_usage();
        let start = self.clock.now_ms();
        let mut st = State::default();
        let mut run = || -> Result<()> {
            for (i, step) in plan.steps.iter().enumerate() {
                self.step(step, d, &plan.id, &mut st).map_err(|e| Error::Step {
                    step: i + 1,
                    source: Box::new(e),
                })?;
            }
            Ok(())
        };
        let outcome = run();
        for t in std::mem::take(&mut st.temps) {
            let _ = self.catalog.drop_object(&t);
        }
        outcome?;
        let (_, data) = st
            .outputs
            .remove(&d.root)
            .ok_or_else(|| Error::Plan(format!("plan {} never produced {}", plan.id, d.root)))?;
        Ok(PlanOutcome {
            result: data.table,
            runtime_ms: self.clock.now_ms() - start,
            usage,
            warnings: st.warnings,
        })
    }

    /// Run `work` on `engine`, adding modeled latency and charging the
    /// busy time to the engine.
    fn timed<T>(&self, engine: &EngineId, latency_ms: f64, work: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = self.clock.now_ms();
        let out = work();
        self.clock.advance(latency_ms);
        self.tracker.charge(engine, start, self.clock.now_ms());
        out
    }

    fn step(&self, step: &Step, d: &Decomposition, seed: &str, st: &mut State) -> Result<()> {
        let latency = self.latency.read().clone();
        match step {
            Step::ExecuteContainer(c) => {
                let res = self.timed(&c.engine, latency.step(&c.engine), || {
                    self.catalog.execute_native_full(&c.engine, &c.native)
                })?;
                let em = self.catalog.engine_model(&c.engine)?;
                let data = migrator::decode(em, c.model, res.table, res.layout)?;
                st.outputs.insert(c.node, (c.engine.clone(), data));
            }
            Step::Migrate(m) => {
                let (at, data) = st
                    .outputs
                    .get(&m.source)
                    .ok_or_else(|| Error::Plan(format!("{} has not been computed", m.source)))?;
                if at != &m.from {
                    return Err(Error::Plan(format!("{} is on {at}, not {}", m.source, m.from)));
                }
                let data = match &m.cast {
                    Some(c) => {
                        let (out, dropped) = migrator::convert(data, c.to, c.key.as_deref())?;
                        if dropped > 0 {
                            st.warnings
                                .push(format!("lossy cast into {}: {dropped} null values dropped", m.produces));
                        }
                        out
                    }
                    None => data.clone(),
                };
                let name = self.timed(&m.to, latency.step(&m.to), || {
                    migrator::migrate(&self.catalog, &data, &m.to, seed)
                })?;
                st.temps.push(name.clone());
                st.resident.insert(m.produces, (m.to.clone(), name));
            }
            Step::CrossOp { node, site } => {
                let Some(RemainderNode::CrossOp(x)) = d.remainder_node(*node) else {
                    return Err(Error::Plan(format!("{node} is not a cross operator")));
                };
                let mut names = BTreeMap::new();
                for &child in x.op.sources() {
                    let name = match st.resident.get(&child) {
                        Some((e, name)) if e == site => name.clone(),
                        _ => match st.outputs.get(&child) {
                            // Uncast output already on the site: stage it as
                            // an object. Casts only ever arrive by Migrate.
                            Some((e, data)) if e == site => {
                                let name = migrator::migrate(&self.catalog, data, site, seed)?;
                                st.temps.push(name.clone());
                                name
                            }
                            _ => {
                                return Err(Error::Plan(format!("input {child} of {node} is not on {site}")));
                            }
                        },
                    };
                    names.insert(child, name);
                }
                let named = x.op.clone().map_sources(|n| names[&n].clone());
                let native = self.registry.translate(&self.catalog, &x.island, &named, site)?;
                let res = self.timed(site, latency.cross_op(site), || {
                    self.catalog.execute_native_full(site, &native)
                })?;
                let data = migrator::decode(self.catalog.engine_model(site)?, x.model, res.table, res.layout)?;
                st.outputs.insert(*node, (site.clone(), data));
            }
        }
        Ok(())
    }
}
