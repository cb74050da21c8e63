//! k-means and cluster-quality scores for choosing hidden-layer widths.
//!
//! k-means works on squared Euclidean distance; silhouette and
//! Davies–Bouldin use plain Euclidean distance, as is conventional.

use std::io::{Read, Write};
use std::ops::RangeInclusive;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub iterations: usize,
    /// WCSS after every assignment step, starting with the seeding.
    pub wcss_trace: Vec<f64>,
}

impl ClusterResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k()];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-10,
            restarts: 10,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn check_data(data: &[Vec<f64>]) -> Result<usize> {
    let m = data
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("clustering needs at least one sample"))?;
    for row in data {
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: row.len(),
                context: "clustering sample",
            });
        }
        ensure_finite(row, "clustering data")?;
    }
    Ok(m)
}

/// Index of the nearest centroid; ties go to the lower index.
fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(data: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, f64) {
    let pairs: Vec<(usize, f64)> = data.iter().map(|x| nearest(x, centroids)).collect();
    let wcss = pairs.iter().map(|p| p.1).sum();
    let (a, d) = pairs.into_iter().unzip();
    (a, d, wcss)
}

/// k-means++ seeding.
pub fn kmeans_pp_init(data: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids = vec![data[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = data[pick].clone();
        for (di, x) in d2.iter_mut().zip(data) {
            *di = di.min(sq_dist(x, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from given starting centroids.
///
/// Empty clusters are re-seeded at the sample farthest from its current centroid.
pub fn lloyd(
    data: &[Vec<f64>],
    init: Vec<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterResult> {
    let m = check_data(data)?;
    let k = init.len();
    if k == 0 || k > data.len() {
        return Err(Error::invalid(format!(
            "k must be in 1..={} (got {k})",
            data.len()
        )));
    }
    let mut centroids = init;
    let (mut assignments, mut d2, mut wcss) = assign(data, &centroids);
    let mut trace = vec![wcss];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; m]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in data.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut taken: Vec<usize> = Vec::new();
        let mut next = Vec::with_capacity(k);
        for j in 0..k {
            if counts[j] > 0 {
                next.push(
                    sums[j]
                        .iter()
                        .map(|s| s / counts[j] as f64)
                        .collect::<Vec<_>>(),
                );
            } else {
                let far = (0..data.len())
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken.push(far);
                next.push(data[far].clone());
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max);
        centroids = next;
        (assignments, d2, wcss) = assign(data, &centroids);
        trace.push(wcss);
        if shift < tol {
            break;
        }
    }
    Ok(ClusterResult {
        centroids,
        assignments,
        wcss,
        iterations,
        wcss_trace: trace,
    })
}

/// Best-WCSS k-means over `cfg.restarts` k-means++ seedings.
///
/// Restart `r` draws from its own generator, so the result does not depend
/// on how restarts are scheduled across threads.
pub fn kmeans_with(
    data: &[Vec<f64>],
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<ClusterResult> {
    check_data(data)?;
    if k == 0 || k > data.len() {
        return Err(Error::invalid(format!(
            "k must be in 1..={} (got {k})",
            data.len()
        )));
    }
    let runs: Vec<ClusterResult> = (0..cfg.restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::sub_rng(seed, Stream::Clustering, r);
            lloyd(
                data,
                kmeans_pp_init(data, k, &mut rng),
                cfg.max_iter,
                cfg.tol,
            )
        })
        .collect::<Result<_>>()?;
    let mut best: Option<ClusterResult> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans(
    data: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterResult> {
    let cfg = KMeansConfig {
        max_iter,
        tol,
        ..KMeansConfig::default()
    };
    kmeans_with(data, k, seed, &cfg)
}

fn labels_present(assignments: &[usize]) -> Vec<usize> {
    let mut labels: Vec<usize> = assignments.to_vec();
    labels.sort_unstable();
    labels.dedup();
    labels
}

/// Mean silhouette coefficient; samples in singleton clusters score 0.
pub fn silhouette(data: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    check_data(data)?;
    if assignments.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            actual: assignments.len(),
            context: "cluster assignments",
        });
    }
    let labels = labels_present(assignments);
    if labels.len() < 2 {
        return Err(Error::invalid("silhouette needs at least two clusters"));
    }
    let k = labels.last().copied().unwrap_or(0) + 1;
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    let scores: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let own = assignments[i];
            if sizes[own] < 2 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, x) in data.iter().enumerate() {
                if j != i {
                    sums[assignments[j]] += dist(&data[i], x);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / data.len() as f64)
}

/// Davies–Bouldin index of a clustering.
pub fn davies_bouldin(data: &[Vec<f64>], result: &ClusterResult) -> Result<f64> {
    check_data(data)?;
    let k = result.k();
    if k < 2 {
        return Err(Error::invalid("Davies–Bouldin needs at least two clusters"));
    }
    if result.assignments.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            actual: result.assignments.len(),
            context: "cluster assignments",
        });
    }
    let sizes = result.sizes();
    if sizes.contains(&0) {
        return Err(Error::invalid(
            "Davies–Bouldin needs every cluster non-empty",
        ));
    }
    let mut spread = vec![0.0; k];
    for (x, &a) in data.iter().zip(&result.assignments) {
        spread[a] += dist(x, &result.centroids[a]);
    }
    for (s, &n) in spread.iter_mut().zip(&sizes) {
        *s /= n as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = dist(&result.centroids[i], &result.centroids[j]);
            if d == 0.0 {
                return Err(Error::UndefinedMetric(
                    "Davies–Bouldin with coincident centroids",
                ));
            }
            worst = worst.max((spread[i] + spread[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// One row of a k sweep. Downstream fields are empty when training failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRow {
    pub k: usize,
    pub wcss: f64,
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub nrmse: Option<f64>,
    pub r2: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub rows: Vec<KRow>,
}

const REPORT_HEADER: [&str; 7] = [
    "k",
    "wcss",
    "silhouette",
    "davies_bouldin",
    "nrmse",
    "r2",
    "note",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl KSelectionReport {
    pub fn best_by<F: Fn(&KRow) -> f64>(&self, score: F, maximise: bool) -> Option<usize> {
        let cmp = |a: &&KRow, b: &&KRow| score(a).total_cmp(&score(b));
        let row = if maximise {
            self.rows.iter().max_by(cmp)
        } else {
            self.rows.iter().min_by(cmp)
        };
        row.map(|r| r.k)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.k.to_string(),
                format!("{:e}", r.wcss),
                format!("{:e}", r.silhouette),
                format!("{:e}", r.davies_bouldin),
                opt(r.nrmse),
                opt(r.r2),
                r.note.clone().unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        if reader.headers()?.iter().ne(REPORT_HEADER) {
            return Err(Error::Format("unexpected k-sweep header".into()));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Format(format!("bad number `{s}` in k-sweep report")))
        };
        let opt_num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            if rec.len() != REPORT_HEADER.len() {
                return Err(Error::Format("short k-sweep row".into()));
            }
            rows.push(KRow {
                k: rec[0]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad k `{}`", &rec[0])))?,
                wcss: num(&rec[1])?,
                silhouette: num(&rec[2])?,
                davies_bouldin: num(&rec[3])?,
                nrmse: opt_num(&rec[4])?,
                r2: opt_num(&rec[5])?,
                note: (!rec[6].is_empty()).then(|| rec[6].to_string()),
            });
        }
        Ok(Self { rows })
    }
}

/// Clustering scores for every `k`, plus an optional downstream score per `k`.
///
/// `downstream(k)` returns `(nrmse, r2)`; its failures are recorded in the
/// row's note instead of aborting the sweep.
pub fn k_sweep(
    data: &[Vec<f64>],
    ks: RangeInclusive<usize>,
    seed: u64,
    cfg: &KMeansConfig,
    downstream: impl Fn(usize) -> Result<(f64, f64)> + Sync,
) -> Result<KSelectionReport> {
    if *ks.start() < 2 || *ks.end() > 12 || ks.is_empty() {
        return Err(Error::invalid("k range must lie within 2..=12"));
    }
    let rows = ks
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            let res = kmeans_with(data, k, seed, cfg)?;
            let silhouette = silhouette(data, &res.assignments)?;
            let davies_bouldin = davies_bouldin(data, &res)?;
            let (nrmse, r2, note) = match downstream(k) {
                Ok((n, r)) => (Some(n), Some(r), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            Ok(KRow {
                k,
                wcss: res.wcss,
                silhouette,
                davies_bouldin,
                nrmse,
                r2,
                note,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KSelectionReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![10.0, 0.0],
            vec![10.0, 1.0],
        ]
    }

    #[test]
    fn two_far_pairs() {
        let r = kmeans(&pairs(), 2, 1, 100, 1e-12).unwrap();
        let mut cs = r.centroids.clone();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cs, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
        assert!((r.wcss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_equal_n_has_zero_wcss() {
        let r = kmeans(&pairs(), 4, 3, 100, 1e-12).unwrap();
        assert_eq!(r.wcss, 0.0);
    }

    #[test]
    fn bad_k_is_rejected() {
        assert!(kmeans(&pairs(), 0, 0, 10, 1e-9).is_err());
        assert!(kmeans(&pairs(), 5, 0, 10, 1e-9).is_err());
        assert!(kmeans(&[], 1, 0, 10, 1e-9).is_err());
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        let data = pairs();
        let init = vec![vec![5.0, 0.5], vec![100.0, 100.0]];
        let r = lloyd(&data, init, 50, 1e-12).unwrap();
        assert!(r.sizes().iter().all(|&s| s > 0));
        assert!(r.wcss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn square_silhouette_by_hand() {
        // unit square split along x: a = 1, b = (1 + √2)/2 for every point
        let data = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let s = silhouette(&data, &[0, 0, 1, 1]).unwrap();
        let b = (1.0 + 2f64.sqrt()) / 2.0;
        assert!((s - (b - 1.0) / b).abs() < 1e-15);
    }

    #[test]
    fn identical_points_score_zero() {
        let data = vec![vec![1.0, 1.0]; 4];
        assert_eq!(silhouette(&data, &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(silhouette(&data, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn davies_bouldin_cases() {
        let data = pairs();
        let r = kmeans(&data, 2, 0, 100, 1e-12).unwrap();
        // s = 0.5 each, d = 10
        assert!((davies_bouldin(&data, &r).unwrap() - 0.1).abs() < 1e-12);
        let scaled: Vec<Vec<f64>> = data
            .iter()
            .map(|x| x.iter().map(|v| v * 7.5).collect())
            .collect();
        let rs = kmeans(&scaled, 2, 0, 100, 1e-12).unwrap();
        assert!((davies_bouldin(&scaled, &rs).unwrap() - 0.1).abs() < 1e-12);
        let coincident = ClusterResult {
            centroids: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            assignments: vec![0, 1, 0, 1],
            wcss: 0.0,
            iterations: 0,
            wcss_trace: vec![],
        };
        assert!(davies_bouldin(&data, &coincident).is_err());
    }

    #[test]
    fn overlapping_clusters_have_large_db() {
        let data: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64) * 0.1, 0.0]).collect();
        let r = ClusterResult {
            centroids: vec![vec![1.9, 0.0], vec![2.0, 0.0]],
            assignments: (0..40).map(|i| i % 2).collect(),
            wcss: 0.0,
            iterations: 0,
            wcss_trace: vec![],
        };
        assert!(davies_bouldin(&data, &r).unwrap() > 1.0);
    }

    #[test]
    fn report_round_trip() {
        let rep = KSelectionReport {
            rows: vec![
                KRow {
                    k: 2,
                    wcss: 1.5,
                    silhouette: 0.3,
                    davies_bouldin: 0.7,
                    nrmse: Some(0.01),
                    r2: Some(0.99),
                    note: None,
                },
                KRow {
                    k: 3,
                    wcss: 0.1 + 0.2,
                    silhouette: -0.25,
                    davies_bouldin: 1.1,
                    nrmse: None,
                    r2: None,
                    note: Some("diverged, epoch 3".into()),
                },
            ],
        };
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(KSelectionReport::read_csv(&buf[..]).unwrap(), rep);
    }
}
