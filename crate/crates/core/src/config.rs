//! Line-oriented `key = value` configuration.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::executor::SystemConfig;
use crate::monitor::MonitorConfig;
use crate::planner::DEFAULT_PLAN_CAP;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub data_dir: PathBuf,
    pub monitor_log: PathBuf,
    pub plan_cap: usize,
    pub threshold: f64,
    pub usage_bound: f64,
    pub seed: u64,
    /// Structure, objects, constants.
    pub weights: [f64; 3],
}

impl Default for Config {
    fn default() -> Self {
        let m = MonitorConfig::default();
        Config {
            data_dir: PathBuf::from("polydawg-data"),
            monitor_log: PathBuf::from("polydawg-data/monitor.log"),
            plan_cap: DEFAULT_PLAN_CAP,
            threshold: m.threshold,
            usage_bound: m.usage_bound,
            seed: 0,
            weights: m.weights,
        }
    }
}

impl Config {
    /// Parse a config file body. Blank lines and `#` comments are skipped;
    /// unknown keys are errors.
    pub fn parse(text: &str) -> Result<Config> {
        let mut c = Config::default();
        let mut log_set = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| Error::Config(format!("line {}: {m}", i + 1));
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad("expected `key = value`".into()))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("`{k}` needs a number")));
            match k {
                "data_dir" => c.data_dir = PathBuf::from(v),
                "monitor_log" => {
                    c.monitor_log = PathBuf::from(v);
                    log_set = true;
                }
                "plan_cap" => c.plan_cap = v.parse().map_err(|_| bad("`plan_cap` needs an integer".into()))?,
                "threshold" => c.threshold = num(v)?,
                "usage_bound" => c.usage_bound = num(v)?,
                "seed" => c.seed = v.parse().map_err(|_| bad("`seed` needs an unsigned integer".into()))?,
                "weights" => {
                    let w: Vec<f64> = v.split(',').map(|x| num(x.trim())).collect::<Result<_>>()?;
                    c.weights = w
                        .try_into()
                        .map_err(|_| bad("`weights` needs three comma-separated numbers".into()))?;
                }
                _ => return Err(bad(format!("unknown key `{k}`"))),
            }
        }
        if !log_set {
            c.monitor_log = c.data_dir.join("monitor.log");
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plan_cap == 0 {
            return Err(Error::Config("plan_cap must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config("threshold must be in (0, 1]".into()));
        }
        if self.weights.iter().any(|w| *w < 0.0) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("weights must be non-negative and sum to 1".into()));
        }
        if !(0.0..=1.0).contains(&self.usage_bound) {
            return Err(Error::Config("usage_bound must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn monitor(&self) -> MonitorConfig {
        MonitorConfig {
            weights: self.weights,
            threshold: self.threshold,
            usage_bound: self.usage_bound,
        }
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig {
            plan_cap: self.plan_cap,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let c = Config::parse("# demo\ndata_dir = /tmp/x\nplan_cap = 4\nweights = 0.5, 0.25, 0.25\nseed=9\n").unwrap();
        assert_eq!(c.plan_cap, 4);
        assert_eq!(c.seed, 9);
        assert_eq!(c.monitor_log, PathBuf::from("/tmp/x/monitor.log"));
        assert_eq!(c.weights, [0.5, 0.25, 0.25]);
        assert!(Config::parse("weights = 0.5, 0.5, 0.5").is_err());
        assert!(Config::parse("plan_cap = 0").is_err());
        assert!(Config::parse("threshold = 0").is_err());
        let e = Config::parse("\nnope = 1").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
    }
}
