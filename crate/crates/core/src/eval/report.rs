use serde::{Deserialize, Serialize};

use crate::dataset::VariantKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub category: String,
    /// Ground truths that can be true positives (interactable ones).
    pub n_gt: usize,
    pub n_pred: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the category has neither ground truths nor predictions.
    pub ap: Option<f64>,
    /// Predicted label absent from the fold's ground truth.
    pub zeroed: bool,
}

impl CategoryMetrics {
    pub(crate) fn zeroed(name: &str, n_pred: usize) -> Self {
        Self {
            category: name.to_string(),
            n_gt: 0,
            n_pred,
            tp: 0,
            fp: n_pred,
            fn_: 0,
            tn: 0,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            ap: Some(0.0),
            zeroed: true,
        }
    }

    fn in_play(&self) -> bool {
        self.ap.is_some()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map: f64,
    /// Categories entering the means.
    pub categories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub iou_threshold: f64,
    pub categories: Vec<CategoryMetrics>,
    pub average: Averages,
}

impl ThresholdReport {
    /// Means over every category in play, zeroed ones included.
    pub fn new(iou_threshold: f64, categories: Vec<CategoryMetrics>) -> Self {
        let live: Vec<&CategoryMetrics> = categories.iter().filter(|c| c.in_play()).collect();
        let n = live.len();
        let mean = |f: &dyn Fn(&CategoryMetrics) -> f64| {
            if n == 0 {
                0.0
            } else {
                live.iter().map(|c| f(c)).sum::<f64>() / n as f64
            }
        };
        let average = Averages {
            precision: mean(&|c| c.precision),
            recall: mean(&|c| c.recall),
            f1: mean(&|c| c.f1),
            map: mean(&|c| c.ap.unwrap_or(0.0)),
            categories: n,
        };
        Self { iou_threshold, categories, average }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub variant: VariantKind,
    pub split: String,
    pub matcher_threshold: f64,
    pub scenes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub meta: ReportMeta,
    pub thresholds: Vec<ThresholdReport>,
}

impl MetricsReport {
    pub fn at(&self, iou_threshold: f64) -> Option<&ThresholdReport> {
        self.thresholds.iter().find(|t| (t.iou_threshold - iou_threshold).abs() < 1e-12)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

type Metric = fn(&Averages) -> f64;

/// Table with one row per metric (P, R, F1, mAP, in percent with two
/// decimals) and one column per report and IoU threshold, headed
/// `<variant>/<split>@<threshold>`.
pub fn table_csv(reports: &[MetricsReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    let mut header = vec!["metric".to_string()];
    for r in reports {
        for t in &r.thresholds {
            header.push(format!("{}/{}@{:.2}", r.meta.variant.as_str(), r.meta.split, t.iou_threshold));
        }
    }
    let csv_err = |e: csv::Error| Error::Io { path: "<csv>".into(), source: e.into() };
    w.write_record(&header).map_err(csv_err)?;
    let rows: [(&str, Metric); 4] =
        [("P", |a| a.precision), ("R", |a| a.recall), ("F1", |a| a.f1), ("mAP", |a| a.map)];
    for (name, get) in rows {
        let mut row = vec![name.to_string()];
        for r in reports {
            for t in &r.thresholds {
                row.push(format!("{:.2}", 100.0 * get(&t.average)));
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io { path: "<csv>".into(), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
