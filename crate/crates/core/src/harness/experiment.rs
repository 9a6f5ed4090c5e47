//! Matched-seed teacher batteries and their summary report.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::stats::{bootstrap_mean_ci, mean, spearman, Interval};
use super::teaching::{run_seed, TeachingTrace};
use super::{ExperimentConfig, TeacherKind};
use crate::error::{Error, Result};
use crate::par;

const CI_ALPHA: f64 = 0.05;
const MIN_COMPARE_SEEDS: usize = 30;

/// All traces of one teacher kind, in seed order.
#[derive(Debug, Clone)]
pub struct Battery {
    pub teacher: TeacherKind,
    pub traces: Vec<TeachingTrace>,
}

impl Battery {
    /// Final mean true competence per seed.
    pub fn final_competence(&self) -> Vec<f64> {
        self.traces.iter().map(|t| t.final_metrics.mean_competence).collect()
    }
}

/// Runs every configured teacher on every seed. Seeds fan out over `par::map`.
pub fn run_batteries(config: &ExperimentConfig) -> Result<Vec<Battery>> {
    config.validate()?;
    let seeds = config.seeds.seeds();
    config
        .teachers
        .iter()
        .map(|&teacher| {
            let traces = par::map(&seeds, |&seed| run_seed(config, teacher, seed))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            Ok(Battery { teacher, traces })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherSummary {
    pub teacher: TeacherKind,
    pub seeds: usize,
    /// Final mean true competence.
    pub competence: Interval,
    /// Final mean belief mastery.
    pub belief_mastery: Interval,
    /// Mean adaptive segments per sub-skill.
    pub allocation: Vec<f64>,
    /// Share of seeds with strictly more adaptive segments on sub-skill 0 than 1.
    pub prefer_first_fraction: f64,
    /// Oracle minus this teacher, per seed. Absent without an oracle battery.
    pub regret: Option<Interval>,
    pub total_reward: f64,
    pub fallback_selections: usize,
    pub invalid_ratios: usize,
}

/// Paired difference `a - b` in final mean competence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDifference {
    pub a: TeacherKind,
    pub b: TeacherKind,
    pub difference: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub teacher: TeacherKind,
    pub seed: u64,
    pub mean_competence: f64,
    pub mean_mastery: f64,
    pub allocation: Vec<usize>,
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub teachers: Vec<TeacherSummary>,
    pub pairwise: Vec<PairwiseDifference>,
    /// Spearman correlation of final belief mastery against true competence
    /// over seeds and sub-skills of the student-aware battery.
    pub belief_truth_spearman: Option<f64>,
    pub per_seed: Vec<SeedRow>,
}

impl ExperimentReport {
    pub fn summary(&self, teacher: TeacherKind) -> Option<&TeacherSummary> {
        self.teachers.iter().find(|s| s.teacher == teacher)
    }

    pub fn difference(&self, a: TeacherKind, b: TeacherKind) -> Option<&PairwiseDifference> {
        self.pairwise.iter().find(|d| d.a == a && d.b == b)
    }

    /// One row per teacher.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.teachers.first().map_or(0, |s| s.allocation.len());
        let mut header: Vec<String> = [
            "teacher",
            "seeds",
            "competence_mean",
            "competence_lo",
            "competence_hi",
            "belief_mastery_mean",
            "regret_mean",
            "regret_lo",
            "regret_hi",
            "prefer_first_fraction",
        ]
        .map(String::from)
        .to_vec();
        header.extend((0..k).map(|i| format!("allocation_{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for s in &self.teachers {
            let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
            let mut row = vec![
                s.teacher.to_string(),
                s.seeds.to_string(),
                s.competence.mean.to_string(),
                s.competence.lo.to_string(),
                s.competence.hi.to_string(),
                s.belief_mastery.mean.to_string(),
                opt(s.regret.map(|r| r.mean)),
                opt(s.regret.map(|r| r.lo)),
                opt(s.regret.map(|r| r.hi)),
                s.prefer_first_fraction.to_string(),
            ];
            row.extend(s.allocation.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Long-format per-step rows: teacher, seed, t, variable, subskill, value.
pub fn write_long_csv(batteries: &[Battery], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["teacher", "seed", "t", "variable", "subskill", "value"])
        .map_err(csv_err)?;
    for b in batteries {
        for trace in &b.traces {
            let seed = trace.header.seed.to_string();
            for s in &trace.steps {
                let t = s.t.to_string();
                let mut row = |var: &str, k: String, v: f64| {
                    w.write_record([b.teacher.as_str(), &seed, &t, var, &k, &v.to_string()])
                };
                for (k, c) in s.competence.iter().enumerate() {
                    row("competence", k.to_string(), *c).map_err(csv_err)?;
                }
                for snap in &s.beliefs {
                    row("belief_mastery", snap.subskill.to_string(), snap.mastery).map_err(csv_err)?;
                }
                row("selected", s.subskill.to_string(), 1.0).map_err(csv_err)?;
                row("reward", String::new(), s.reward).map_err(csv_err)?;
                if s.ratio.valid {
                    row("ratio", s.subskill.to_string(), s.ratio.value).map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Summarizes batteries that were run on the same seeds.
pub fn summarize(config: &ExperimentConfig, batteries: &[Battery]) -> ExperimentReport {
    let oracle = batteries
        .iter()
        .find(|b| b.teacher == TeacherKind::Oracle)
        .map(Battery::final_competence);
    let resamples = config.bootstrap_resamples;
    let boot = |xs: &[f64], salt: u64| bootstrap_mean_ci(xs, resamples, CI_ALPHA, config.bootstrap_seed ^ salt);

    let mut per_seed = Vec::new();
    let teachers = batteries
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let comp = b.final_competence();
            let mastery: Vec<f64> = b.traces.iter().map(|t| t.final_metrics.mean_mastery).collect();
            let regrets = oracle
                .as_ref()
                .map(|o| o.iter().zip(&comp).map(|(o, c)| o - c).collect::<Vec<_>>());
            let k = b.traces.first().map_or(0, |t| t.final_metrics.allocation.len());
            let allocation = (0..k)
                .map(|j| mean(&b.traces.iter().map(|t| t.final_metrics.allocation[j] as f64).collect::<Vec<_>>()))
                .collect();
            let prefer_first = b
                .traces
                .iter()
                .filter(|t| {
                    let a = &t.final_metrics.allocation;
                    a.len() >= 2 && a[0] > a[1]
                })
                .count();
            for (s, trace) in b.traces.iter().enumerate() {
                per_seed.push(SeedRow {
                    teacher: b.teacher,
                    seed: trace.header.seed,
                    mean_competence: comp[s],
                    mean_mastery: mastery[s],
                    allocation: trace.final_metrics.allocation.clone(),
                    regret: regrets.as_ref().map(|r| r[s]),
                });
            }
            TeacherSummary {
                teacher: b.teacher,
                seeds: b.traces.len(),
                competence: boot(&comp, i as u64),
                belief_mastery: boot(&mastery, 100 + i as u64),
                allocation,
                prefer_first_fraction: prefer_first as f64 / b.traces.len().max(1) as f64,
                regret: regrets.map(|r| boot(&r, 200 + i as u64)),
                total_reward: mean(&b.traces.iter().map(|t| t.final_metrics.total_reward).collect::<Vec<_>>()),
                fallback_selections: b.traces.iter().map(|t| t.final_metrics.fallback_selections).sum(),
                invalid_ratios: b.traces.iter().map(|t| t.final_metrics.invalid_ratios).sum(),
            }
        })
        .collect();

    let mut pairwise = Vec::new();
    for (i, a) in batteries.iter().enumerate() {
        for (j, b) in batteries.iter().enumerate() {
            if i == j {
                continue;
            }
            let diffs: Vec<f64> = a
                .final_competence()
                .iter()
                .zip(b.final_competence())
                .map(|(x, y)| x - y)
                .collect();
            pairwise.push(PairwiseDifference {
                a: a.teacher,
                b: b.teacher,
                difference: boot(&diffs, 1000 + (i * batteries.len() + j) as u64),
            });
        }
    }

    let belief_truth_spearman = batteries
        .iter()
        .find(|b| b.teacher == TeacherKind::StudentAware)
        .map(|b| {
            let (mut belief, mut truth) = (Vec::new(), Vec::new());
            for t in &b.traces {
                belief.extend(&t.final_metrics.final_mastery);
                truth.extend(&t.final_metrics.final_competence);
            }
            spearman(&belief, &truth)
        });

    ExperimentReport {
        config_hash: config.hash(),
        teachers,
        pairwise,
        belief_truth_spearman,
        per_seed,
    }
}

/// Runs the configured teachers on matched seeds and summarizes them.
pub fn compare_teachers(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.teachers.len() < 2 {
        return Err(Error::Config("comparison needs at least two teacher kinds".into()));
    }
    if config.seeds.len() < MIN_COMPARE_SEEDS {
        return Err(Error::Config(format!("comparison needs at least {MIN_COMPARE_SEEDS} seeds")));
    }
    let batteries = run_batteries(config)?;
    Ok(summarize(config, &batteries))
}
