//! Parameter sweeps.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config_file::{parse_list, parse_num, split_line};
use super::metrics::{evaluate_policy, RunMetrics};
use super::registry::{make_policy, POLICY_NAMES};
use super::RunConfig;
use crate::action::ActionSpace;
use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Scaled probabilities are capped here to keep every link usable.
pub const MAX_SCALED_DISCONNECT: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    ArrivalProb,
    PerPointSeconds,
    DisconnectProbScale,
    StraggleRateScale,
    TaskSizeScale,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ArrivalProb => "arrival_prob",
            Self::PerPointSeconds => "per_point_seconds",
            Self::DisconnectProbScale => "disconnect_prob_scale",
            Self::StraggleRateScale => "straggle_rate_scale",
            Self::TaskSizeScale => "task_size_scale",
        }
    }

    /// `base` with this parameter set to `value`. Probability and rate
    /// vectors are scaled elementwise; task sizes are scaled and rounded.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = base.clone();
        match self {
            Self::ArrivalProb => c.arrival_prob = value,
            Self::PerPointSeconds => c.per_point_seconds = vec![value; c.num_nodes],
            Self::DisconnectProbScale => {
                for p in &mut c.disconnect_probs {
                    *p = (*p * value).min(MAX_SCALED_DISCONNECT);
                }
            }
            Self::StraggleRateScale => {
                for l in &mut c.straggle_rates {
                    *l *= value;
                }
            }
            Self::TaskSizeScale => {
                for f in &mut c.task_sizes {
                    *f = ((*f as f64 * value).round() as u32).max(1);
                }
                c.f_max = ((c.f_max as f64 * value).round() as u32).max(*c.task_sizes.iter().max().unwrap());
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "arrival_prob" => Self::ArrivalProb,
            "per_point_seconds" => Self::PerPointSeconds,
            "disconnect_prob_scale" => Self::DisconnectProbScale,
            "straggle_rate_scale" => Self::StraggleRateScale,
            "task_size_scale" => Self::TaskSizeScale,
            other => return Err(Error::InvalidConfig(format!("unknown sweep parameter `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub policies: Vec<String>,
    pub seeds: Vec<u64>,
    pub eval_slots: u64,
    pub warmup_slots: u64,
    pub base: RunConfig,
    /// Learned policies listed here are loaded instead of retrained.
    pub checkpoints: HashMap<String, PathBuf>,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, values: Vec<f64>, policies: &[&str], seeds: Vec<u64>) -> Self {
        Self {
            parameter,
            values,
            policies: policies.iter().map(|s| s.to_string()).collect(),
            seeds,
            eval_slots: 100_000,
            warmup_slots: 10_000,
            base: RunConfig::default(),
            checkpoints: HashMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.values.is_empty() {
            return bad("sweep grid is empty".into());
        }
        for (i, v) in self.values.iter().enumerate() {
            if self.values[..i].contains(v) {
                return bad(format!("grid value {v} repeated"));
            }
        }
        if self.policies.is_empty() || self.seeds.is_empty() {
            return bad("sweep needs at least one policy and one seed".into());
        }
        if let Some(p) = self.policies.iter().find(|p| !POLICY_NAMES.contains(&p.as_str())) {
            return Err(Error::UnknownPolicy(p.clone()));
        }
        if self.eval_slots <= self.warmup_slots {
            return bad("eval_slots must exceed warmup_slots".into());
        }
        Ok(())
    }

    /// Parses a sweep file. Besides the sweep keys (`parameter`, `values`,
    /// `policies`, `seeds`, `eval_slots`, `warmup_slots`, `config`,
    /// `checkpoint_<policy>`), any run-config key overrides the base
    /// configuration. Relative paths resolve against `dir`.
    pub fn parse(text: &str, dir: &Path) -> Result<Self> {
        let mut parameter = None;
        let mut spec = SweepSpec::new(SweepParameter::ArrivalProb, Vec::new(), &[], Vec::new());
        let mut overrides = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let Some((key, v)) = split_line(raw, line)? else { continue };
            match key {
                "parameter" => parameter = Some(v.parse::<SweepParameter>()?),
                "values" => spec.values = parse_list(v, line)?,
                "policies" => spec.policies = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                "seeds" => spec.seeds = parse_list(v, line)?,
                "eval_slots" => spec.eval_slots = parse_num(v, line)?,
                "warmup_slots" => spec.warmup_slots = parse_num(v, line)?,
                "config" => spec.base = RunConfig::load(&dir.join(v))?,
                _ => match key.strip_prefix("checkpoint_") {
                    Some(policy) => {
                        spec.checkpoints.insert(policy.to_string(), dir.join(v));
                    }
                    None => overrides.push((key.to_string(), v.to_string(), line)),
                },
            }
        }
        for (key, v, line) in overrides {
            if !spec.base.apply(&key, &v, line)? {
                return Err(Error::UnknownKey { key, line });
            }
        }
        spec.base.finish()?;
        spec.parameter = parameter.ok_or_else(|| Error::InvalidConfig("sweep file needs `parameter`".into()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub policy: String,
    pub param: SweepParameter,
    pub value: f64,
    pub seed: u64,
    pub metrics: RunMetrics,
}

/// Evaluates every (policy, grid value, seed) combination. Grid points run
/// in parallel; rows come back ordered by policy, then value, then seed.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.seeds.len()).map(move |s| (v, s)))
        .collect();
    let results: Vec<Vec<(usize, usize, usize, SweepRow)>> = jobs
        .par_iter()
        .map(|&(vi, si)| {
            let value = spec.values[vi];
            let seed = spec.seeds[si];
            let mut run = spec.base.clone();
            run.system = spec.parameter.apply(&spec.base.system, value)?;
            let space = Arc::new(ActionSpace::new(run.system.num_nodes)?);
            spec.policies
                .iter()
                .enumerate()
                .map(|(pi, name)| {
                    let checkpoint = spec.checkpoints.get(name).map(PathBuf::as_path);
                    let policy = make_policy(name, &run, space.clone(), seed, checkpoint)?;
                    let metrics = evaluate_policy(&run.system, &policy, spec.eval_slots, spec.warmup_slots, seed)?;
                    Ok((
                        pi,
                        vi,
                        si,
                        SweepRow {
                            policy: name.clone(),
                            param: spec.parameter,
                            value,
                            seed,
                            metrics,
                        },
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<_> = results.into_iter().flatten().collect();
    rows.sort_by_key(|(p, v, s, _)| (*p, *v, *s));
    Ok(rows.into_iter().map(|(.., row)| row).collect())
}

pub const SWEEP_HEADER: &str =
    "policy,param,value,seed,avg_queue,drop_rate,avg_delay_slots,avg_delay_seconds,throughput,drops_per_arrival";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.param.as_str(),
            r.value,
            r.seed,
            m.avg_queue_occupancy,
            m.drop_rate,
            m.avg_delay_slots,
            m.avg_delay_seconds,
            m.throughput,
            m.drops_per_arrival
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_rules() {
        let base = SystemConfig::default();
        let c = SweepParameter::DisconnectProbScale.apply(&base, 1.5).unwrap();
        assert!((c.disconnect_probs[0] - 0.15).abs() < 1e-12);
        assert_eq!(c.disconnect_probs[4], MAX_SCALED_DISCONNECT);
        let c = SweepParameter::TaskSizeScale.apply(&base, 0.5).unwrap();
        assert_eq!(c.task_sizes, vec![50, 100, 150]);
        assert_eq!(c.f_max, 150);
        let c = SweepParameter::StraggleRateScale.apply(&base, 2.0).unwrap();
        assert_eq!(c.straggle_rates[4], 4.0);
        assert!(SweepParameter::ArrivalProb.apply(&base, 1.2).is_err());
    }

    #[test]
    fn single_point_gives_one_row() {
        let mut spec = SweepSpec::new(SweepParameter::ArrivalProb, vec![0.3], &["greedy"], vec![4]);
        spec.eval_slots = 2000;
        spec.warmup_slots = 100;
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("greedy,arrival_prob,0.3,4,"));
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec::new(SweepParameter::ArrivalProb, vec![0.3, 0.3], &["greedy"], vec![1]);
        assert!(spec.validate().is_err());
        spec.values = vec![];
        assert!(spec.validate().is_err());
        spec.values = vec![0.2];
        spec.policies = vec!["nope".into()];
        assert!(matches!(spec.validate(), Err(Error::UnknownPolicy(_))));
    }

    #[test]
    fn parse_spec_file() {
        let text = "parameter = disconnect_prob_scale\nvalues = 0.5, 1.0\npolicies = greedy, onenode\n\
                    seeds = 1,2\neval_slots = 500\nwarmup_slots = 50\narrival_prob = 0.4\ncheckpoint_dueling = net.txt\n";
        let spec = SweepSpec::parse(text, Path::new("/tmp/x")).unwrap();
        assert_eq!(spec.parameter, SweepParameter::DisconnectProbScale);
        assert_eq!(spec.values, vec![0.5, 1.0]);
        assert_eq!(spec.seeds, vec![1, 2]);
        assert_eq!(spec.base.system.arrival_prob, 0.4);
        assert_eq!(spec.checkpoints["dueling"], PathBuf::from("/tmp/x/net.txt"));
        assert!(SweepSpec::parse("values=1\npolicies=greedy\nseeds=1", Path::new(".")).is_err());
        assert!(SweepSpec::parse("parameter=arrival_prob\nvalues=0.1\npolicies=greedy\nseeds=1\nwhat=3", Path::new(".")).is_err());
    }
}
