use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pairs(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<usize> {
    if preds.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if preds.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            actual: preds.len(),
            context: "prediction batch",
        });
    }
    let d = targets[0].len();
    for (p, t) in preds.iter().zip(targets) {
        if p.len() != d || t.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: if t.len() != d { t.len() } else { p.len() },
                context: "prediction width",
            });
        }
    }
    Ok(d)
}

/// `(1/N) Σ ‖ŷ − y‖²`.
pub fn mse_loss(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    check_pairs(preds, targets)?;
    let total: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(total / preds.len() as f64)
}

/// Test-set error summary. `mse` is averaged over every output element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub rmse: f64,
    pub r2: f64,
    pub nrmse_range: f64,
    pub nrmse_std: f64,
}

/// Metrics over all output elements pooled together.
///
/// `r2 = 1 − SS_res/SS_tot` where `SS_tot` is taken about each output's own
/// mean, so predicting the per-output mean scores exactly 0.
pub fn metrics(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<MetricsReport> {
    let d = check_pairs(preds, targets)?;
    let n = targets.len();
    let count = (n * d) as f64;
    let mut col_mean = vec![0.0; d];
    for t in targets {
        for (m, v) in col_mean.iter_mut().zip(t) {
            *m += v;
        }
    }
    col_mean.iter_mut().for_each(|m| *m /= n as f64);
    let pooled_mean = col_mean.iter().sum::<f64>() / d as f64;

    let (mut ss_res, mut ss_tot, mut ss_pooled) = (0.0, 0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (p, t) in preds.iter().zip(targets) {
        for j in 0..d {
            ss_res += (p[j] - t[j]).powi(2);
            ss_tot += (t[j] - col_mean[j]).powi(2);
            ss_pooled += (t[j] - pooled_mean).powi(2);
            lo = lo.min(t[j]);
            hi = hi.max(t[j]);
        }
    }
    if !ss_res.is_finite() {
        return Err(Error::NonFinite("predictions"));
    }
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("r2 of zero-variance targets"));
    }
    let mse = ss_res / count;
    let rmse = mse.sqrt();
    Ok(MetricsReport {
        mse,
        rmse,
        r2: 1.0 - ss_res / ss_tot,
        nrmse_range: rmse / (hi - lo),
        nrmse_std: rmse / (ss_pooled / count).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_of_unit_offsets_is_width() {
        let t = vec![vec![0.0; 5]; 3];
        let p = vec![vec![1.0; 5]; 3];
        assert_eq!(mse_loss(&p, &t).unwrap(), 5.0);
        assert_eq!(mse_loss(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn perfect_and_mean_predictors() {
        let t = vec![vec![1.0, 10.0], vec![2.0, 30.0], vec![6.0, 20.0]];
        let m = metrics(&t, &t).unwrap();
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.r2, 1.0);
        let mean = vec![vec![3.0, 20.0]; 3];
        assert!(metrics(&mean, &t).unwrap().r2.abs() < 1e-12);
    }

    #[test]
    fn constant_targets_have_no_r2() {
        let t = vec![vec![1.0]; 4];
        assert!(matches!(metrics(&t, &t), Err(Error::UndefinedMetric(_))));
    }
}
