//! Closed-loop report bundles: traces, empirical CDFs, and summaries.

use crate::attack::AttackKind;
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::ric::ControlAction;
use crate::simnet::{run_scenario, ScenarioConfig, ScenarioTrace};
use crate::xapps::DefenseKind;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// The three evaluation conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    NoAttack,
    Attacked,
    Defended,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::NoAttack, Condition::Attacked, Condition::Defended];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::NoAttack => "no_attack",
            Condition::Attacked => "attacked",
            Condition::Defended => "defended",
        }
    }
}

/// Inputs for a three-condition closed-loop experiment.
#[derive(Debug, Clone)]
pub struct ClosedLoopConfig {
    /// Base scenario (attack switches are overridden per condition).
    pub scenario: ScenarioConfig,
    pub attack_kind: AttackKind,
    pub attack_epsilon: f64,
    /// Model deployed in the no-attack and attacked conditions.
    pub undefended_model: Model,
    /// Model deployed in the defended condition (distilled student).
    pub defended_model: Model,
    /// Which defense produced `defended_model` (reporting only).
    pub defense: DefenseKind,
    /// One run per seed; CDFs pool all seeds of a condition.
    pub seeds: Vec<u64>,
}

/// Per-condition aggregates plus where the files went.
#[derive(Debug, Clone)]
pub struct ClosedLoopReport {
    pub out_dir: PathBuf,
    pub per_condition: Vec<ConditionSummary>,
    /// KS distance between defended and no-attack jam-phase throughput CDFs.
    pub defended_vs_noattack_ks: f64,
}

/// Pooled statistics of one condition.
#[derive(Debug, Clone)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub decision_accuracy: f64,
    pub jam_mean_throughput_mbps: f64,
    pub jam_median_throughput_mbps: f64,
    pub jam_mean_bler: f64,
    pub jam_throughputs: Vec<f64>,
    pub jam_blers: Vec<f64>,
}

/// Kolmogorov-Smirnov distance between two empirical samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let mut points: Vec<f64> = sa.iter().chain(&sb).cloned().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let cdf = |sorted: &[f64], x: f64| {
        // fraction of samples <= x
        let mut lo = 0usize;
        let mut hi = sorted.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if sorted[mid] <= x {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo as f64 / sorted.len() as f64
    };
    points
        .iter()
        .map(|&x| (cdf(&sa, x) - cdf(&sb, x)).abs())
        .fold(0.0, f64::max)
}

/// Sorted `(value, cumulative fraction)` CSV of an empirical CDF.
pub fn cdf_to_csv(values: &[f64]) -> String {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut out = String::from("value,cumulative_fraction\n");
    for (i, v) in sorted.iter().enumerate() {
        let _ = writeln!(out, "{:.6},{:.6}", v, (i + 1) as f64 / n as f64);
    }
    out
}

/// Run every condition over every seed, writing per-seed trace CSVs,
/// per-condition jam-phase and full-run CDFs, and `summary.txt`.
pub fn run_closed_loop(cfg: &ClosedLoopConfig, out_dir: &Path) -> Result<ClosedLoopReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut per_condition = Vec::new();
    for condition in Condition::ALL {
        let mut jam_throughputs = Vec::new();
        let mut jam_blers = Vec::new();
        let mut full_throughputs = Vec::new();
        let mut full_blers = Vec::new();
        let mut decisions_ok = 0usize;
        let mut decisions_total = 0usize;
        for &seed in &cfg.seeds {
            let mut scenario = cfg.scenario.clone();
            scenario.seed = seed;
            match condition {
                Condition::NoAttack => {
                    scenario.attack_enabled = false;
                }
                Condition::Attacked | Condition::Defended => {
                    scenario.attack_enabled = true;
                    scenario.attack_kind = cfg.attack_kind;
                    scenario.attack_epsilon = cfg.attack_epsilon;
                }
            }
            let model = match condition {
                Condition::Defended => &cfg.defended_model,
                _ => &cfg.undefended_model,
            };
            let trace = run_scenario(model, &scenario)?;
            write_file(
                &out_dir.join(format!("trace_{}_seed{}.csv", condition.as_str(), seed)),
                &trace.to_csv(),
            )?;
            for row in trace.jam_phase_rows() {
                jam_throughputs.push(row.throughput_mbps);
                jam_blers.push(row.bler);
            }
            for row in &trace.ticks {
                full_throughputs.push(row.throughput_mbps);
                full_blers.push(row.bler);
            }
            decisions_total += trace.decisions.len();
            decisions_ok +=
                trace.decisions.iter().filter(|d| d.class == d.truth.class_index()).count();
        }
        write_file(
            &out_dir.join(format!("cdf_throughput_{}_jam.csv", condition.as_str())),
            &cdf_to_csv(&jam_throughputs),
        )?;
        write_file(
            &out_dir.join(format!("cdf_bler_{}_jam.csv", condition.as_str())),
            &cdf_to_csv(&jam_blers),
        )?;
        write_file(
            &out_dir.join(format!("cdf_throughput_{}_full.csv", condition.as_str())),
            &cdf_to_csv(&full_throughputs),
        )?;
        write_file(
            &out_dir.join(format!("cdf_bler_{}_full.csv", condition.as_str())),
            &cdf_to_csv(&full_blers),
        )?;
        let mut sorted = jam_throughputs.clone();
        sorted.sort_by(f64::total_cmp);
        per_condition.push(ConditionSummary {
            condition,
            decision_accuracy: if decisions_total == 0 {
                0.0
            } else {
                decisions_ok as f64 / decisions_total as f64
            },
            jam_mean_throughput_mbps: mean(&jam_throughputs),
            jam_median_throughput_mbps: median(&sorted),
            jam_mean_bler: mean(&jam_blers),
            jam_throughputs,
            jam_blers,
        });
    }

    let defended_vs_noattack_ks = ks_distance(
        &per_condition[0].jam_throughputs,
        &per_condition[2].jam_throughputs,
    );
    let mut summary = String::new();
    for s in &per_condition {
        let _ = writeln!(
            summary,
            "{c}.decision_accuracy={:.6}\n{c}.jam_mean_throughput_mbps={:.6}\n\
             {c}.jam_median_throughput_mbps={:.6}\n{c}.jam_mean_bler={:.6}",
            s.decision_accuracy,
            s.jam_mean_throughput_mbps,
            s.jam_median_throughput_mbps,
            s.jam_mean_bler,
            c = s.condition.as_str(),
        );
    }
    let _ = writeln!(summary, "defended_vs_noattack_ks={defended_vs_noattack_ks:.6}");
    write_file(&out_dir.join("summary.txt"), &summary)?;

    Ok(ClosedLoopReport { out_dir: out_dir.to_path_buf(), per_condition, defended_vs_noattack_ks })
}

/// Decision accuracy and jam-phase aggregates recomputed from a trace CSV.
/// The self-consistency oracle for harness summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecount {
    pub decisions: usize,
    pub decision_accuracy: f64,
    pub jam_mean_throughput_mbps: f64,
    pub jam_mean_bler: f64,
}

/// Recount a trace CSV produced by [`crate::simnet::ScenarioTrace::to_csv`].
/// A decision is correct when it matches the phase: adaptive MCS in the jam
/// phase, fixed max MCS in the clean phase.
pub fn recount_trace_csv(csv: &str) -> Result<TraceRecount> {
    let mut decisions = 0usize;
    let mut correct = 0usize;
    let mut jam_tp = Vec::new();
    let mut jam_bler = Vec::new();
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            if line != "tick,clock_ms,sinr_db,mcs,bler,throughput_mbps,decision,phase" {
                return Err(Error::invalid("unrecognized trace CSV header"));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(Error::invalid(format!("trace row {i} has {} columns", cols.len())));
        }
        let bler: f64 =
            cols[4].parse().map_err(|_| Error::invalid(format!("bad bler on row {i}")))?;
        let tp: f64 = cols[5]
            .parse()
            .map_err(|_| Error::invalid(format!("bad throughput on row {i}")))?;
        let jam = match cols[7] {
            "jam" => true,
            "clean" => false,
            other => return Err(Error::invalid(format!("bad phase {other} on row {i}"))),
        };
        if jam {
            jam_tp.push(tp);
            jam_bler.push(bler);
        }
        match cols[6] {
            "" => {}
            "adaptive_mcs" => {
                decisions += 1;
                correct += usize::from(jam);
            }
            "fixed_max_mcs" => {
                decisions += 1;
                correct += usize::from(!jam);
            }
            other => return Err(Error::invalid(format!("bad decision {other} on row {i}"))),
        }
    }
    Ok(TraceRecount {
        decisions,
        decision_accuracy: if decisions == 0 { 0.0 } else { correct as f64 / decisions as f64 },
        jam_mean_throughput_mbps: mean(&jam_tp),
        jam_mean_bler: mean(&jam_bler),
    })
}

/// True when `a`'s CDF lies at or right of `b`'s at every pooled sample
/// point, with `tol` slack: `F_a(x) <= F_b(x) + tol`.
pub fn stochastically_dominates(a: &[f64], b: &[f64], tol: f64) -> bool {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let count_le = |sorted: &[f64], x: f64| {
        let mut lo = 0usize;
        let mut hi = sorted.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if sorted[mid] <= x {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo as f64 / sorted.len() as f64
    };
    sa.iter()
        .chain(&sb)
        .all(|&x| count_le(&sa, x) <= count_le(&sb, x) + tol)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        0.0
    } else {
        sorted[sorted.len() / 2]
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}
