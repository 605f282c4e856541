//! Robust summary statistics for latency analysis and CSV exports.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population standard deviation (divides by n).
pub fn population_sd(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt())
}

/// Median absolute deviation from the median (unscaled).
pub fn mad(xs: &[f64]) -> Option<f64> {
    let m = median(xs)?;
    median(&xs.iter().map(|x| (x - m).abs()).collect::<Vec<_>>())
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation; `None` for mismatched, short or constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// One row of the latency table, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub kind: String,
    pub counterpart: String,
    pub n: usize,
    pub median_s: f64,
    pub sd_s: f64,
    pub mad_s: f64,
}

/// Rows per (kind, counterpart), sorted by key. Groups must be non-empty.
pub fn latency_rows(samples: &BTreeMap<(String, String), Vec<f64>>) -> Vec<LatencyRow> {
    samples
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|((kind, counterpart), v)| LatencyRow {
            kind: kind.clone(),
            counterpart: counterpart.clone(),
            n: v.len(),
            median_s: median(v).expect("non-empty"),
            sd_s: population_sd(v).expect("non-empty"),
            mad_s: mad(v).expect("non-empty"),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusRow {
    pub status: String,
    pub count: usize,
    pub pct: f64,
}

/// Count and percentage per label, in the order given by `order`
/// (labels outside `order` follow alphabetically).
pub fn status_rows(labels: &[String], order: &[&str]) -> Vec<StatusRow> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_str()).or_default() += 1;
    }
    let total = labels.len().max(1) as f64;
    let mut keys: Vec<&str> = order.iter().copied().filter(|k| counts.contains_key(k)).collect();
    keys.extend(counts.keys().copied().filter(|k| !order.contains(k)));
    keys.into_iter()
        .map(|k| StatusRow {
            status: k.to_string(),
            count: counts[k],
            pct: (counts[k] as f64 / total * 10_000.0).round() / 100.0,
        })
        .collect()
}

pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
