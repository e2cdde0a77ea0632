//! Report types and their CSV / JSON forms.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::{DomainTag, PerDomain, PointCloudSet};

use super::EvaluationError;

/// Metrics of one condition.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub condition: usize,
    pub f_hz: f64,
    /// `None` for empty domains.
    pub rde: PerDomain<Option<f64>>,
    /// Cloud indices the APE values refer to.
    pub indices: PerDomain<Vec<usize>>,
    pub ape: PerDomain<Vec<f64>>,
}

impl ConditionReport {
    /// Mean over the domains that have a value.
    pub fn mean_rde(&self) -> Option<f64> {
        let v: Vec<f64> = self.rde.0.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// RDE statistics of one domain over conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    pub average: f64,
    pub max: f64,
    pub min: f64,
    /// Population variance over conditions.
    pub variance: f64,
    pub conditions: usize,
}

impl DomainSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let average = values.iter().sum::<f64>() / n;
        Some(Self {
            average,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            variance: values.iter().map(|v| (v - average).powi(2)).sum::<f64>() / n,
            conditions: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub conditions: Vec<ConditionReport>,
    pub summary: PerDomain<Option<DomainSummary>>,
}

impl EvaluationReport {
    pub fn from_conditions(conditions: Vec<ConditionReport>) -> Self {
        let summary = PerDomain(DomainTag::ALL.map(|tag| {
            let v: Vec<f64> = conditions.iter().filter_map(|c| c.rde[tag]).collect();
            DomainSummary::of(&v)
        }));
        Self { conditions, summary }
    }

    pub fn average_rde(&self, tag: DomainTag) -> Option<f64> {
        self.summary[tag].map(|s| s.average)
    }

    /// Summary keyed by domain name; empty domains map to `None`.
    pub fn summary_map(&self) -> BTreeMap<&'static str, Option<DomainSummary>> {
        self.summary.iter().map(|(tag, s)| (tag.as_str(), *s)).collect()
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

/// One row per condition, then `average`, `variance`, `max`, `min` rows.
pub fn write_report_csv<W: Write>(writer: W, report: &EvaluationReport) -> Result<(), EvaluationError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["condition".to_string(), "f_hz".to_string()];
    header.extend(DomainTag::ALL.iter().map(|t| format!("rde_{}", t.as_str())));
    header.push("rde_mean".into());
    w.write_record(&header)?;
    for c in &report.conditions {
        let mut row = vec![c.condition.to_string(), format!("{}", c.f_hz)];
        row.extend(DomainTag::ALL.iter().map(|&t| cell(c.rde[t])));
        row.push(cell(c.mean_rde()));
        w.write_record(&row)?;
    }
    let stats: [(&str, fn(&DomainSummary) -> f64); 4] = [
        ("average", |s| s.average),
        ("variance", |s| s.variance),
        ("max", |s| s.max),
        ("min", |s| s.min),
    ];
    for (label, f) in stats {
        let mut row = vec![label.to_string(), String::new()];
        row.extend(DomainTag::ALL.iter().map(|&t| cell(report.summary[t].as_ref().map(f))));
        row.push(String::new());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ReportJson {
    conditions: usize,
    domains: BTreeMap<&'static str, Option<DomainSummary>>,
}

pub fn write_report_json<W: Write>(writer: W, report: &EvaluationReport) -> Result<(), EvaluationError> {
    serde_json::to_writer_pretty(
        writer,
        &ReportJson {
            conditions: report.conditions.len(),
            domains: report.summary_map(),
        },
    )?;
    Ok(())
}

/// Per-point errors: `condition,domain,index,x,y,ape`.
pub fn write_ape_csv<W: Write>(
    writer: W,
    report: &EvaluationReport,
    cloud: &PointCloudSet,
) -> Result<(), EvaluationError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["condition", "domain", "index", "x", "y", "ape"])?;
    for c in &report.conditions {
        for tag in DomainTag::ALL {
            let pts = cloud.points(tag);
            for (&i, &e) in c.indices[tag].iter().zip(&c.ape[tag]) {
                w.write_record([
                    c.condition.to_string(),
                    tag.as_str().to_string(),
                    i.to_string(),
                    format!("{}", pts[i].x),
                    format!("{}", pts[i].y),
                    format!("{e:e}"),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Paired reports of the two training regimes.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub physics: EvaluationReport,
    pub data: EvaluationReport,
    pub dataset_hash: String,
    /// Data-driven average RDE over physics-informed average RDE.
    pub improvement: PerDomain<Option<f64>>,
}

impl AblationReport {
    pub fn new(physics: EvaluationReport, data: EvaluationReport, dataset_hash: String) -> Self {
        let improvement = PerDomain(DomainTag::ALL.map(|t| match (physics.average_rde(t), data.average_rde(t)) {
            (Some(p), Some(d)) if p > 0.0 => Some(d / p),
            _ => None,
        }));
        Self {
            physics,
            data,
            dataset_hash,
            improvement,
        }
    }

    /// `domain,physics_rde,data_rde,improvement_ratio,dataset_hash`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EvaluationError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["domain", "physics_rde", "data_rde", "improvement_ratio", "dataset_hash"])?;
        for tag in DomainTag::ALL {
            if self.physics.summary[tag].is_none() && self.data.summary[tag].is_none() {
                continue;
            }
            w.write_record([
                tag.as_str().to_string(),
                cell(self.physics.average_rde(tag)),
                cell(self.data.average_rde(tag)),
                cell(self.improvement[tag]),
                self.dataset_hash.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
