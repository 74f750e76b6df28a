//! Brute-force reference implementations, written without sharing code with
//! the library.

#![allow(dead_code)]

/// `P(id > ood) + ½·P(id = ood)` over all pairs.
pub fn auroc_pairwise(id: &[f64], ood: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &a in id {
        for &b in ood {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (id.len() * ood.len()) as f64
}

fn distinct_desc(id: &[f64], ood: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = id.iter().chain(ood).copied().collect();
    t.sort_by(|a, b| b.partial_cmp(a).unwrap());
    t.dedup();
    t
}

/// `(TPR, FPR)` when samples with score `>= t` are accepted as ID.
fn rates(id: &[f64], ood: &[f64], t: f64) -> (f64, f64) {
    let tp = id.iter().filter(|&&s| s >= t).count();
    let fp = ood.iter().filter(|&&s| s >= t).count();
    (tp as f64 / id.len() as f64, fp as f64 / ood.len() as f64)
}

/// Average precision over every distinct threshold, each recomputed by counting.
pub fn aupr_in_exhaustive(id: &[f64], ood: &[f64]) -> f64 {
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in distinct_desc(id, ood) {
        let tp = id.iter().filter(|&&s| s >= t).count() as f64;
        let fp = ood.iter().filter(|&&s| s >= t).count() as f64;
        let recall = tp / id.len() as f64;
        if tp > 0.0 {
            ap += (recall - prev_recall) * tp / (tp + fp);
        }
        prev_recall = recall;
    }
    ap
}

/// FPR at the largest threshold whose TPR is at least `target`.
pub fn fpr_at_tpr_exhaustive(id: &[f64], ood: &[f64], target: f64) -> f64 {
    distinct_desc(id, ood)
        .into_iter()
        .map(|t| rates(id, ood, t))
        .find(|&(tpr, _)| tpr >= target)
        .map(|(_, fpr)| fpr)
        .unwrap_or(1.0)
}

/// Minimum of `0.5·(1 − TPR) + 0.5·FPR` over every threshold, plus accept-all
/// and reject-all.
pub fn detection_error_exhaustive(id: &[f64], ood: &[f64]) -> f64 {
    distinct_desc(id, ood)
        .into_iter()
        .map(|t| {
            let (tpr, fpr) = rates(id, ood, t);
            0.5 * (1.0 - tpr) + 0.5 * fpr
        })
        .chain([0.5, 0.5])
        .fold(f64::INFINITY, f64::min)
}

/// `(weight rows, bias, relu)`.
pub type PlainLayer = (Vec<Vec<f64>>, Vec<f64>, bool);

/// Plain forward pass of a ReLU net.
pub fn forward(layers: &[PlainLayer], x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (w, b, relu) in layers {
        h = w
            .iter()
            .zip(b)
            .map(|(row, bi)| {
                let z: f64 = row.iter().zip(&h).map(|(a, c)| a * c).sum::<f64>() + bi;
                if *relu {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect();
    }
    h
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
