//! Accuracy, expected calibration error and uncertainty-distribution
//! summaries. Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::dirichlet::DirichletParams;
use crate::error::{Error, Result};
use crate::evidential::{uncertainty_report, UncertaintyReport};

/// Floor applied to U_dis before taking its logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: predictions.len(),
            context: "predictions per label",
        });
    }
    if labels.is_empty() {
        return Err(Error::Input("accuracy of an empty set is undefined".into()));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EceConfig {
    pub n_bins: usize,
}

impl Default for EceConfig {
    fn default() -> Self {
        Self { n_bins: 10 }
    }
}

/// Binned ECE over equal-width confidence bins. Bin `k` holds confidences
/// in `[k/n, (k+1)/n)`; a confidence of exactly 1 falls in the last bin.
pub fn expected_calibration_error(
    confidences: &[f64],
    correct: &[bool],
    cfg: &EceConfig,
) -> Result<f64> {
    if cfg.n_bins == 0 {
        return Err(Error::config("n_bins", "must be >= 1"));
    }
    if confidences.len() != correct.len() {
        return Err(Error::Dimension {
            expected: correct.len(),
            got: confidences.len(),
            context: "confidences per correctness flag",
        });
    }
    if let Some(c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::Input(format!("confidence {c} outside [0, 1]")));
    }
    if confidences.is_empty() {
        return Ok(0.0);
    }
    let n_bins = cfg.n_bins;
    let mut count = vec![0usize; n_bins];
    let mut conf_sum = vec![0.0; n_bins];
    let mut hits = vec![0usize; n_bins];
    for (&c, &ok) in confidences.iter().zip(correct) {
        let k = ((c * n_bins as f64) as usize).min(n_bins - 1);
        count[k] += 1;
        conf_sum[k] += c;
        hits[k] += usize::from(ok);
    }
    let n = confidences.len() as f64;
    let ece = (0..n_bins)
        .filter(|&k| count[k] > 0)
        .map(|k| {
            let m = count[k] as f64;
            (m / n) * (hits[k] as f64 / m - conf_sum[k] / m).abs()
        })
        .sum();
    Ok(ece)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// The 10th through 90th percentiles.
    pub deciles: Vec<f64>,
}

impl Quantiles {
    /// Linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("quantiles of an empty sequence".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Input("quantiles of a sequence containing NaN".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            min: sorted[0],
            median: quantile_sorted(&sorted, 0.5),
            max: sorted[sorted.len() - 1],
            deciles: (1..10).map(|k| quantile_sorted(&sorted, k as f64 / 10.0)).collect(),
        })
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] + t * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins on `[lo, hi]`, right edge inclusive. When `lo == hi`
    /// there is a single zero-width bin.
    pub fn with_range(values: &[f64], lo: f64, hi: f64, n_bins: usize) -> Self {
        let n_bins = if hi > lo { n_bins.max(1) } else { 1 };
        let width = (hi - lo) / n_bins as f64;
        let edges = (0..=n_bins)
            .map(|k| if k == n_bins { hi } else { lo + k as f64 * width })
            .collect();
        let mut counts = vec![0; n_bins];
        for &v in values {
            let k = if hi > lo {
                (((v - lo) / width) as usize).min(n_bins - 1)
            } else {
                0
            };
            counts[k] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `bin_left,bin_right,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[k], self.edges[k + 1], c));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainUncertainty {
    pub name: String,
    pub n: usize,
    pub log_u_dis: Quantiles,
    pub u_data: Quantiles,
    pub log_u_dis_hist: Histogram,
    pub u_data_hist: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySummary {
    pub domains: Vec<DomainUncertainty>,
}

impl UncertaintySummary {
    pub fn domain(&self, name: &str) -> Option<&DomainUncertainty> {
        self.domains.iter().find(|d| d.name == name)
    }
}

pub fn log_u_dis(report: &UncertaintyReport) -> f64 {
    report.u_dis.max(LOG_FLOOR).ln()
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Quantiles and histograms of ln U_dis (floored at [`LOG_FLOOR`]) and
/// U_data per domain. Histograms share bin edges across domains so they can
/// be overlaid directly.
pub fn uncertainty_summary(
    domains: &[(&str, &[UncertaintyReport])],
    n_bins: usize,
) -> Result<UncertaintySummary> {
    if let Some((name, _)) = domains.iter().find(|(_, r)| r.is_empty()) {
        return Err(Error::Input(format!("no uncertainty reports for domain `{name}`")));
    }
    let series: Vec<(Vec<f64>, Vec<f64>)> = domains
        .iter()
        .map(|(_, r)| {
            (
                r.iter().map(log_u_dis).collect(),
                r.iter().map(|x| x.u_data).collect(),
            )
        })
        .collect();
    let (dis_lo, dis_hi) = range(series.iter().flat_map(|s| s.0.iter().copied()));
    let (dat_lo, dat_hi) = range(series.iter().flat_map(|s| s.1.iter().copied()));
    let domains = domains
        .iter()
        .zip(&series)
        .map(|((name, reports), (dis, dat))| {
            Ok(DomainUncertainty {
                name: name.to_string(),
                n: reports.len(),
                log_u_dis: Quantiles::of(dis)?,
                u_data: Quantiles::of(dat)?,
                log_u_dis_hist: Histogram::with_range(dis, dis_lo, dis_hi, n_bins),
                u_data_hist: Histogram::with_range(dat, dat_lo, dat_hi, n_bins),
            })
        })
        .collect::<Result<_>>()?;
    Ok(UncertaintySummary { domains })
}

/// Evaluation metrics of a model on one labeled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMetrics {
    pub n: usize,
    pub accuracy: f64,
    pub ece: f64,
    pub mean_u_dis: f64,
    pub mean_u_data: f64,
}

pub fn evaluate_alphas(
    alphas: &[DirichletParams],
    labels: &[usize],
    ece: &EceConfig,
) -> Result<(DomainMetrics, Vec<UncertaintyReport>)> {
    let reports: Vec<UncertaintyReport> = alphas.iter().map(uncertainty_report).collect();
    let preds: Vec<usize> = reports.iter().map(|r| r.probs.argmax()).collect();
    let conf: Vec<f64> = reports
        .iter()
        .map(|r| r.probs.as_slice()[r.probs.argmax()])
        .collect();
    let metrics = DomainMetrics {
        n: labels.len(),
        accuracy: accuracy(&preds, labels)?,
        ece: expected_calibration_error(&conf, &correct_flags(&preds, labels), ece)?,
        mean_u_dis: mean(reports.iter().map(|r| r.u_dis)),
        mean_u_data: mean(reports.iter().map(|r| r.u_data)),
    };
    Ok((metrics, reports))
}

/// Accuracy and ECE of plain probability rows (no Dirichlet).
pub fn evaluate_probs(
    probs: ndarray::ArrayView2<'_, f64>,
    labels: &[usize],
    ece: &EceConfig,
) -> Result<(f64, f64)> {
    let preds: Vec<usize> = probs
        .outer_iter()
        .map(|r| crate::dirichlet::argmax(r.as_slice().expect("standard layout")))
        .collect();
    let conf: Vec<f64> = probs
        .outer_iter()
        .zip(&preds)
        .map(|(r, &p)| r[p].clamp(0.0, 1.0))
        .collect();
    Ok((
        accuracy(&preds, labels)?,
        expected_calibration_error(&conf, &correct_flags(&preds, labels), ece)?,
    ))
}

fn correct_flags(preds: &[usize], labels: &[usize]) -> Vec<bool> {
    preds.iter().zip(labels).map(|(p, y)| p == y).collect()
}

pub(crate) fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}
