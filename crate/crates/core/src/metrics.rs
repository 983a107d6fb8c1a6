//! Travel-time metrics over episode logs and comparison tables.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowSet;
use crate::roadnet::Network;
use crate::sim::EpisodeLog;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{unfinished} of {total} vehicles did not finish; travel time is undefined")]
    UnfinishedVehicles { unfinished: usize, total: usize },
    #[error("no vehicles entered the network")]
    NoVehicles,
    #[error("reference travel time must be positive, got {0}")]
    DivisionDomain(f64),
    #[error("baseline `{0}` not among the reports")]
    UnknownBaseline(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Mean travel time over all vehicles of a fully drained episode.
pub fn aatt(log: &EpisodeLog) -> Result<f64, MetricsError> {
    if log.vehicles.is_empty() {
        return Err(MetricsError::NoVehicles);
    }
    let unfinished = log.unfinished();
    if unfinished > 0 {
        return Err(MetricsError::UnfinishedVehicles { unfinished, total: log.vehicles.len() });
    }
    let total: u64 = log.vehicles.iter().map(|v| v.travel_time().expect("finished") as u64).sum();
    Ok(total as f64 / log.vehicles.len() as f64)
}

pub fn transfer_ratio(t_transfer: f64, t_train: f64) -> Result<f64, MetricsError> {
    if !(t_train > 0.0 && t_train.is_finite()) {
        return Err(MetricsError::DivisionDomain(t_train));
    }
    Ok(t_transfer / t_train)
}

/// Mean of route length / `max_speed` over the flow: the travel time every
/// vehicle would have on an empty, always-green network.
pub fn mean_free_flow_time(net: &Network, flow: &FlowSet, max_speed: f64) -> Option<f64> {
    if flow.is_empty() {
        return None;
    }
    let total: f64 = flow
        .vehicles()
        .iter()
        .map(|v| v.route.iter().filter_map(|r| net.road_by_id(r)).map(|r| net.roads[r].length).sum::<f64>() / max_speed)
        .sum();
    Some(total / flow.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub aatt: f64,
    /// Vehicles that completed their trips.
    pub throughput: usize,
    pub unfinished: usize,
    /// Mean over steps and intersections of the stopped-vehicle count.
    pub mean_queue: f64,
    pub max_queue: u32,
}

impl EvalReport {
    pub fn from_log(method: impl Into<String>, log: &EpisodeLog) -> Result<Self, MetricsError> {
        let aatt = aatt(log)?;
        let (mut sum, mut n, mut max) = (0u64, 0u64, 0u32);
        for row in &log.queue_totals {
            for &q in row {
                sum += q as u64;
                n += 1;
                max = max.max(q);
            }
        }
        Ok(EvalReport {
            method: method.into(),
            aatt,
            throughput: log.finished(),
            unfinished: log.unfinished(),
            mean_queue: if n == 0 { 0.0 } else { sum as f64 / n as f64 },
            max_queue: max,
        })
    }

    /// Averages several reports of the same method.
    pub fn mean(method: impl Into<String>, reports: &[EvalReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let k = reports.len() as f64;
        Some(EvalReport {
            method: method.into(),
            aatt: reports.iter().map(|r| r.aatt).sum::<f64>() / k,
            throughput: (reports.iter().map(|r| r.throughput).sum::<usize>() as f64 / k).round() as usize,
            unfinished: reports.iter().map(|r| r.unfinished).max().unwrap_or(0),
            mean_queue: reports.iter().map(|r| r.mean_queue).sum::<f64>() / k,
            max_queue: reports.iter().map(|r| r.max_queue).max().unwrap_or(0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub aatt: f64,
    /// `(baseline - aatt) / baseline * 100`; positive means faster.
    pub improvement_pct: f64,
}

/// Ranks `(method, aatt)` pairs by ascending travel time (ties by name) with
/// the improvement over `baseline`.
pub fn compare(results: &[(String, f64)], baseline: &str) -> Result<Vec<ComparisonRow>, MetricsError> {
    let base = results
        .iter()
        .find(|(m, _)| m == baseline)
        .map(|&(_, a)| a)
        .ok_or_else(|| MetricsError::UnknownBaseline(baseline.to_string()))?;
    let mut rows: Vec<ComparisonRow> = results
        .iter()
        .map(|(m, a)| ComparisonRow { method: m.clone(), aatt: *a, improvement_pct: (base - a) / base * 100.0 })
        .collect();
    rows.sort_by(|a, b| a.aatt.total_cmp(&b.aatt).then_with(|| a.method.cmp(&b.method)));
    Ok(rows)
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], w: W) -> Result<(), MetricsError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_reports_csv<W: Write>(reports: &[EvalReport], w: W) -> Result<(), MetricsError> {
    let mut out = csv::Writer::from_writer(w);
    for r in reports {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row of the plot-ready long table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub method: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

pub fn long_rows(report: &EvalReport, seed: u64) -> Vec<LongRow> {
    let row = |metric: &str, value: f64| LongRow { method: report.method.clone(), seed, metric: metric.into(), value };
    vec![
        row("aatt", report.aatt),
        row("throughput", report.throughput as f64),
        row("unfinished", report.unfinished as f64),
        row("mean_queue", report.mean_queue),
        row("max_queue", report.max_queue as f64),
    ]
}

pub fn write_long_csv<W: Write>(rows: &[LongRow], w: W) -> Result<(), MetricsError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Minimum, median and maximum; the median of an even count is the mean of
/// the middle pair.
pub fn min_median_max(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    Some((v[0], med, v[n - 1]))
}
