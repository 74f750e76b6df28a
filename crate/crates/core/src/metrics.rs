//! ID-vs-OoD evaluation. ID samples are the positive class and a higher score
//! means "more in-distribution". Thresholds sweep the distinct score values;
//! a sample is accepted as ID when its score is `>=` the threshold.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn check(id: &[f64], ood: &[f64]) -> Result<()> {
    if id.is_empty() || ood.is_empty() {
        return Err(Error::Evaluation(format!(
            "need ID and OoD scores, got {} and {}",
            id.len(),
            ood.len()
        )));
    }
    if id.iter().chain(ood).any(|s| s.is_nan()) {
        return Err(Error::Evaluation("NaN score".into()));
    }
    Ok(())
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Count of entries `>= t` in a descending slice.
fn count_at_least(desc: &[f64], t: f64) -> usize {
    desc.partition_point(|&x| x >= t)
}

/// `(TP, FP)` at every distinct threshold, from the highest score down.
fn sweep(id: &[f64], ood: &[f64]) -> Vec<(usize, usize)> {
    let mut all: Vec<(f64, bool)> = id
        .iter()
        .map(|&s| (s, true))
        .chain(ood.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        while i < all.len() && all[i].0 == t {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((tp, fp));
    }
    out
}

/// FPR at the highest threshold whose TPR reaches `tpr`.
pub fn fpr_at_tpr(id: &[f64], ood: &[f64], tpr: f64) -> Result<f64> {
    check(id, ood)?;
    if !(tpr > 0.0 && tpr <= 1.0) {
        return Err(Error::Evaluation(format!(
            "TPR target must be in (0, 1], got {tpr}"
        )));
    }
    let n = id.len();
    let mut k = ((tpr * n as f64).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / n as f64 >= tpr {
        k -= 1;
    }
    while k < n && (k as f64 / n as f64) < tpr {
        k += 1;
    }
    let id_desc = sorted_desc(id);
    let threshold = id_desc[k - 1];
    let ood_desc = sorted_desc(ood);
    Ok(count_at_least(&ood_desc, threshold) as f64 / ood.len() as f64)
}

/// Mann–Whitney `P(id > ood) + ½·P(id = ood)`.
pub fn auroc(id: &[f64], ood: &[f64]) -> Result<f64> {
    check(id, ood)?;
    let (n, m) = (id.len() as u128, ood.len() as u128);
    // Twice the U statistic, accumulated as an integer.
    let mut twice_u: u128 = 0;
    let (mut prev_tp, mut prev_fp) = (0u128, 0u128);
    for (tp, fp) in sweep(id, ood) {
        let (dtp, dfp) = (tp as u128 - prev_tp, fp as u128 - prev_fp);
        // ID entering at this level beat all OoD strictly below and tie with dfp.
        twice_u += dtp * (2 * (m - fp as u128) + dfp);
        prev_tp = tp as u128;
        prev_fp = fp as u128;
    }
    Ok(twice_u as f64 / (2 * n * m) as f64)
}

/// Average precision with ID as positive: `Σ (R_k − R_{k−1})·P_k`.
pub fn aupr_in(id: &[f64], ood: &[f64]) -> Result<f64> {
    check(id, ood)?;
    let n = id.len() as f64;
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (tp, fp) in sweep(id, ood) {
        let recall = tp as f64 / n;
        if recall > prev_recall {
            area += (recall - prev_recall) * (tp as f64 / (tp + fp) as f64);
            prev_recall = recall;
        }
    }
    Ok(area)
}

/// `min 0.5·(1 − TPR) + 0.5·FPR` over all thresholds, including ±∞.
pub fn detection_error(id: &[f64], ood: &[f64]) -> Result<f64> {
    check(id, ood)?;
    let (n, m) = (id.len() as f64, ood.len() as f64);
    Ok(sweep(id, ood)
        .into_iter()
        .map(|(tp, fp)| 0.5 * (1.0 - tp as f64 / n) + 0.5 * fp as f64 / m)
        .fold(0.5, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fpr_at_95tpr: f64,
    pub auroc: f64,
    pub aupr_in: f64,
    pub detection_error: f64,
    pub n_id: usize,
    pub n_ood: usize,
}

/// Metrics scaled to percent, as written to report files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentReport {
    pub fpr_at_95tpr: f64,
    pub auroc: f64,
    pub aupr_in: f64,
    pub detection_error: f64,
    pub n_id: usize,
    pub n_ood: usize,
}

impl EvalReport {
    pub fn evaluate(id: &[f64], ood: &[f64]) -> Result<Self> {
        Ok(Self {
            fpr_at_95tpr: fpr_at_tpr(id, ood, 0.95)?,
            auroc: auroc(id, ood)?,
            aupr_in: aupr_in(id, ood)?,
            detection_error: detection_error(id, ood)?,
            n_id: id.len(),
            n_ood: ood.len(),
        })
    }

    pub fn percentages(&self) -> PercentReport {
        PercentReport {
            fpr_at_95tpr: 100.0 * self.fpr_at_95tpr,
            auroc: 100.0 * self.auroc,
            aupr_in: 100.0 * self.aupr_in,
            detection_error: 100.0 * self.detection_error,
            n_id: self.n_id,
            n_ood: self.n_ood,
        }
    }

    /// One-decimal table row: FPR@95%TPR, detection error, AUROC, AUPR-in.
    pub fn display_row(&self) -> String {
        let p = self.percentages();
        format!(
            "FPR@95%TPR {:.1}  DetErr {:.1}  AUROC {:.1}  AUPR-in {:.1}",
            p.fpr_at_95tpr, p.detection_error, p.auroc, p.aupr_in
        )
    }
}

/// Counts in `bins` equal-width bins over `[0, 1]`; out-of-range values clamp
/// to the end bins.
pub fn histogram(scores: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    if bins == 0 {
        return counts;
    }
    for &s in scores.iter().filter(|s| !s.is_nan()) {
        let b = ((s * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}
