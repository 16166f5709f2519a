use serde::{Deserialize, Serialize};

use super::{AbReport, EvalError};

/// One consecutive pair of the variant ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub control: String,
    pub variant: String,
    pub control_accuracy: f64,
    pub variant_accuracy: f64,
    /// Accuracy difference in percentage points.
    pub offline_diff_points: f64,
    pub ccr_lift: f64,
    pub p_value: f64,
}

impl LadderStep {
    pub fn new(control_accuracy: f64, variant_accuracy: f64, ab: &AbReport) -> Self {
        LadderStep {
            control: ab.control_id.clone(),
            variant: ab.variant_id.clone(),
            control_accuracy,
            variant_accuracy,
            offline_diff_points: 100.0 * (variant_accuracy - control_accuracy),
            ccr_lift: ab.ccr_lift,
            p_value: ab.p_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub steps: Vec<LadderStep>,
    /// Spearman correlation of offline diffs and lifts; `None` when either
    /// side is constant.
    pub rank_correlation: Option<f64>,
    /// Every step's offline diff and lift share a sign.
    pub signs_agree: bool,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Average (1-based) ranks, ties sharing the mean of their positions.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

pub fn offline_online_correlation(steps: Vec<LadderStep>) -> Result<CorrelationReport, EvalError> {
    if steps.len() < 2 {
        return Err(EvalError::Config(format!(
            "a correlation needs at least 2 ladder steps, got {}",
            steps.len()
        )));
    }
    let diffs: Vec<f64> = steps.iter().map(|s| s.offline_diff_points).collect();
    let lifts: Vec<f64> = steps.iter().map(|s| s.ccr_lift).collect();
    Ok(CorrelationReport {
        rank_correlation: spearman(&diffs, &lifts),
        signs_agree: diffs.iter().zip(&lifts).all(|(d, l)| sign(*d) == sign(*l)),
        steps,
    })
}

/// Step-wise mean of several runs of the same ladder (for example one per
/// seed); the correlation is recomputed on the means.
pub fn average_reports(reports: &[CorrelationReport]) -> Result<CorrelationReport, EvalError> {
    let first = reports
        .first()
        .ok_or_else(|| EvalError::Config("no reports to average".into()))?;
    let n = reports.len() as f64;
    let mut steps = Vec::with_capacity(first.steps.len());
    for (i, s) in first.steps.iter().enumerate() {
        let mut acc = LadderStep {
            control_accuracy: 0.0,
            variant_accuracy: 0.0,
            offline_diff_points: 0.0,
            ccr_lift: 0.0,
            p_value: 0.0,
            ..s.clone()
        };
        for r in reports {
            let t = r
                .steps
                .get(i)
                .filter(|t| t.control == s.control && t.variant == s.variant)
                .ok_or_else(|| EvalError::Config("reports describe different ladders".into()))?;
            acc.control_accuracy += t.control_accuracy / n;
            acc.variant_accuracy += t.variant_accuracy / n;
            acc.offline_diff_points += t.offline_diff_points / n;
            acc.ccr_lift += t.ccr_lift / n;
            acc.p_value += t.p_value / n;
        }
        steps.push(acc);
    }
    if reports.iter().any(|r| r.steps.len() != steps.len()) {
        return Err(EvalError::Config("reports describe different ladders".into()));
    }
    offline_online_correlation(steps)
}
