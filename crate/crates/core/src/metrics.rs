//! Confusion-matrix rates, MCC, ROC curves and AUC with a Hanley–McNeil interval.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("confusion counts are all zero")]
    EmptyCounts,
    #[error("confusion matrix must be square with K ≥ 2")]
    BadMatrix,
    #[error("scores must include both classes")]
    SingleClass,
    #[error("sample {0:?}: score is not finite")]
    NonFiniteScore(String),
    #[error("sample {id:?}: label {label} is not 0 or 1")]
    BadLabel { id: String, label: usize },
    #[error("{0}")]
    Format(String),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Counts for binary labels, 1 being positive.
    pub fn from_labels(truth: &[usize], predicted: &[usize]) -> ConfusionCounts {
        let mut c = ConfusionCounts::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == 1, p == 1) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Rates with a zero denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryReport {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: f64,
    pub f_measure: Option<f64>,
}

pub fn binary_report(c: &ConfusionCounts) -> Result<BinaryReport, MetricsError> {
    if c.total() == 0 {
        return Err(MetricsError::EmptyCounts);
    }
    Ok(BinaryReport {
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.fp + c.tn),
        precision: ratio(c.tp, c.tp + c.fp),
        accuracy: c.tp.saturating_add(c.tn) as f64 / c.total() as f64,
        f_measure: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    })
}

/// Binary Matthews correlation; a zero denominator gives 0.
pub fn mcc(c: &ConfusionCounts) -> Result<f64, MetricsError> {
    if c.total() == 0 {
        return Err(MetricsError::EmptyCounts);
    }
    let num = c.tp as i128 * c.tn as i128 - c.fp as i128 * c.fn_ as i128;
    let den = [c.tp + c.fp, c.tp + c.fn_, c.tn + c.fp, c.tn + c.fn_]
        .iter()
        .map(|&v| v as f64)
        .product::<f64>();
    Ok(if den == 0.0 { 0.0 } else { num as f64 / den.sqrt() })
}

/// K×K counts, rows are true classes and columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let k = counts.len();
        if k < 2 || counts.iter().any(|r| r.len() != k) {
            return Err(MetricsError::BadMatrix);
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn from_labels(k: usize, truth: &[usize], predicted: &[usize]) -> Result<Self, MetricsError> {
        let mut counts = vec![vec![0; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= k || p >= k {
                return Err(MetricsError::BadMatrix);
            }
            counts[t][p] += 1;
        }
        ConfusionMatrix::new(counts)
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// One-vs-rest counts for `class`.
    pub fn one_vs_rest(&self, class: usize) -> ConfusionCounts {
        let tp = self.counts[class][class];
        let row: u64 = self.counts[class].iter().sum();
        let col: u64 = self.counts.iter().map(|r| r[class]).sum();
        ConfusionCounts {
            tp,
            fn_: row - tp,
            fp: col - tp,
            tn: self.total() + tp - row - col,
        }
    }
}

/// K-class correlation `(c·s − Σ pₖtₖ) / √((s² − Σ pₖ²)(s² − Σ tₖ²))`; zero denominator gives 0.
pub fn multiclass_mcc(m: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let s = m.total() as f64;
    if s == 0.0 {
        return Err(MetricsError::EmptyCounts);
    }
    let k = m.k();
    let c: f64 = (0..k).map(|i| m.counts[i][i] as f64).sum();
    let t: Vec<f64> = m.counts.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let p: Vec<f64> = (0..k)
        .map(|j| m.counts.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    let num = c * s - p.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>();
    let den = (s * s - p.iter().map(|v| v * v).sum::<f64>()) * (s * s - t.iter().map(|v| v * v).sum::<f64>());
    Ok(if den <= 0.0 { 0.0 } else { num / den.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MulticlassReport {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: f64,
    pub f_measure: Option<f64>,
    pub mcc: f64,
}

/// Macro averages of the one-vs-rest rates over the classes where each is
/// defined; accuracy is trace over total.
pub fn multiclass_report(m: &ConfusionMatrix) -> Result<MulticlassReport, MetricsError> {
    let total = m.total();
    if total == 0 {
        return Err(MetricsError::EmptyCounts);
    }
    let per: Vec<BinaryReport> = (0..m.k())
        .map(|k| binary_report(&m.one_vs_rest(k)))
        .collect::<Result<_, _>>()?;
    let mean = |f: fn(&BinaryReport) -> Option<f64>| {
        let vals: Vec<f64> = per.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let trace: u64 = (0..m.k()).map(|i| m.counts[i][i]).sum();
    Ok(MulticlassReport {
        sensitivity: mean(|r| r.sensitivity),
        specificity: mean(|r| r.specificity),
        precision: mean(|r| r.precision),
        accuracy: trace as f64 / total as f64,
        f_measure: mean(|r| r.f_measure),
        mcc: multiclass_mcc(m)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    /// 1 is the positive class.
    pub label: usize,
    pub score: f64,
}

fn check_samples(samples: &[ScoredSample]) -> Result<(u64, u64), MetricsError> {
    let mut counts = (0u64, 0u64);
    for s in samples {
        if !s.score.is_finite() {
            return Err(MetricsError::NonFiniteScore(s.id.clone()));
        }
        match s.label {
            1 => counts.0 += 1,
            0 => counts.1 += 1,
            label => {
                return Err(MetricsError::BadLabel {
                    id: s.id.clone(),
                    label,
                })
            }
        }
    }
    if counts.0 == 0 || counts.1 == 0 {
        return Err(MetricsError::SingleClass);
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `≥ threshold` are called positive; the first vertex uses +∞.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    #[serde(skip)]
    fp: u64,
    #[serde(skip)]
    tp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: u64,
    pub negatives: u64,
}

/// One vertex per distinct score, descending, after the (0,0) origin.
pub fn roc_curve(samples: &[ScoredSample]) -> Result<RocCurve, MetricsError> {
    let (pos, neg) = check_samples(samples)?;
    let mut order: Vec<&ScoredSample> = samples.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    let vertex = |threshold, fp: u64, tp: u64| RocPoint {
        threshold,
        fpr: fp as f64 / neg as f64,
        tpr: tp as f64 / pos as f64,
        fp,
        tp,
    };
    let mut points = vec![vertex(f64::INFINITY, 0, 0)];
    let (mut fp, mut tp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let score = order[i].score;
        while i < order.len() && order[i].score == score {
            if order[i].label == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(vertex(score, fp, tp));
    }
    Ok(RocCurve {
        points,
        positives: pos,
        negatives: neg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub auc: f64,
    pub se: f64,
    pub ci95: (f64, f64),
}

/// Hanley–McNeil standard error of an AUC estimated from `pos` positives and `neg` negatives.
pub fn hanley_mcneil_se(auc: f64, pos: u64, neg: u64) -> f64 {
    let q1 = auc / (2.0 - auc);
    let q2 = 2.0 * auc * auc / (1.0 + auc);
    let (np, nn) = (pos as f64, neg as f64);
    let var = (auc * (1.0 - auc) + (np - 1.0) * (q1 - auc * auc) + (nn - 1.0) * (q2 - auc * auc)) / (np * nn);
    var.max(0.0).sqrt()
}

/// `auc ± 1.96·se`, clamped to [0, 1].
pub fn ci95(auc: f64, se: f64) -> (f64, f64) {
    ((auc - 1.96 * se).clamp(0.0, 1.0), (auc + 1.96 * se).clamp(0.0, 1.0))
}

/// Trapezoidal area under `curve`, accumulated in integer half-units.
pub fn curve_auc(curve: &RocCurve) -> AucReport {
    let twice: u128 = curve
        .points
        .windows(2)
        .map(|w| (w[1].fp - w[0].fp) as u128 * (w[0].tp + w[1].tp) as u128)
        .sum();
    let auc = twice as f64 / (2 * curve.positives as u128 * curve.negatives as u128) as f64;
    let se = hanley_mcneil_se(auc, curve.positives, curve.negatives);
    AucReport {
        auc,
        se,
        ci95: ci95(auc, se),
    }
}

pub fn auc(samples: &[ScoredSample]) -> Result<AucReport, MetricsError> {
    Ok(curve_auc(&roc_curve(samples)?))
}

/// Fixed-key metrics record; undefined rates serialize as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: f64,
    pub f_measure: Option<f64>,
    pub mcc: f64,
    pub auc: f64,
    pub auc_se: f64,
    pub auc_ci_low: f64,
    pub auc_ci_high: f64,
}

/// Thresholds `samples` at `threshold` (score ≥ threshold is positive) and
/// gathers every metric.
pub fn summarize(samples: &[ScoredSample], threshold: f64) -> Result<MetricsSummary, MetricsError> {
    let a = auc(samples)?;
    let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let predicted: Vec<usize> = samples.iter().map(|s| usize::from(s.score >= threshold)).collect();
    let c = ConfusionCounts::from_labels(&truth, &predicted);
    let r = binary_report(&c)?;
    Ok(MetricsSummary {
        sensitivity: r.sensitivity,
        specificity: r.specificity,
        precision: r.precision,
        accuracy: r.accuracy,
        f_measure: r.f_measure,
        mcc: mcc(&c)?,
        auc: a.auc,
        auc_se: a.se,
        auc_ci_low: a.ci95.0,
        auc_ci_high: a.ci95.1,
    })
}

pub fn write_roc_csv(curve: &RocCurve) -> Result<Vec<u8>, MetricsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in &curve.points {
        w.write_record([
            format!("{:?}", p.threshold),
            format!("{:?}", p.fpr),
            format!("{:?}", p.tpr),
        ])?;
    }
    w.into_inner().map_err(|e| MetricsError::Format(e.to_string()))
}

/// Parses `id,label,score` rows.
pub fn parse_scores_csv(bytes: &[u8]) -> Result<Vec<ScoredSample>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["id", "label", "score"] {
        return Err(MetricsError::Format("scores header must be id,label,score".into()));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let s: ScoredSample = row?;
        if !s.score.is_finite() {
            return Err(MetricsError::NonFiniteScore(s.id));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_scores_csv(samples: &[ScoredSample]) -> Result<Vec<u8>, MetricsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "label", "score"])?;
    for s in samples {
        w.write_record([s.id.clone(), s.label.to_string(), format!("{:?}", s.score)])?;
    }
    w.into_inner().map_err(|e| MetricsError::Format(e.to_string()))
}

const PALETTE: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf",
];

/// ROC plot with one polyline per named curve.
pub fn roc_svg(curves: &[(&str, &RocCurve)]) -> String {
    let (left, top, side) = (60.0, 20.0, 400.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
        left + side + 160.0,
        top + side + 50.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{}" x2="{}" y2="{top}" stroke="#bbb" stroke-dasharray="4 4"/>"##,
        top + side,
        left + side
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{v:.1}</text>"#,
            left + v * side,
            top + side + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#,
            left - 6.0,
            top + side - v * side + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#,
        left + side / 2.0,
        top + side + 40.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">True positive rate</text>"#,
        top + side / 2.0,
        top + side / 2.0
    );
    for (i, (name, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", left + p.fpr * side, top + side - p.tpr * side))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let y = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
            left + side + 10.0,
            left + side + 30.0
        );
        let label = name.replace('&', "&amp;").replace('<', "&lt;");
        let _ = writeln!(s, r#"<text x="{}" y="{}">{label}</text>"#, left + side + 36.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}
