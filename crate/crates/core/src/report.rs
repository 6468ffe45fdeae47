//! Run reports: one CSV row per frame and method plus a JSON summary.
//!
//! CSV columns:
//!
//! | column | meaning |
//! |---|---|
//! | `method` | `fov` or `wrs` |
//! | `frame` | frame index |
//! | `psnr_db` | PSNR against ground truth, `inf` for identical frames |
//! | `ssim` | mean SSIM of Rec.709 luma |
//! | `foveate_ms`, `reproject_ms`, `bias_combine_ms`, `metrics_ms` | stage wall time |
//! | `lpips`, `fovvideovdp` | reserved, left empty for external tools |

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::pipeline::{Method, StageTimings};

pub const CSV_HEADER: &str =
    "method,frame,psnr_db,ssim,foveate_ms,reproject_ms,bias_combine_ms,metrics_ms,lpips,fovvideovdp";

pub const STAGES: [&str; 4] = ["foveate", "reproject", "bias_combine", "metrics"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub method: Method,
    pub frame: u64,
    #[serde(with = "inf_as_string")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub timings: StageTimings,
    pub metrics_ms: f64,
}

impl FrameRecord {
    fn stage(&self, name: &str) -> f64 {
        match name {
            "foveate" => self.timings.foveate,
            "reproject" => self.timings.reproject,
            "bias_combine" => self.timings.bias_combine,
            _ => self.metrics_ms,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
}

/// Mean, median and nearest-rank 99th percentile.
pub fn percentiles(values: &[f64]) -> Percentiles {
    if values.is_empty() {
        return Percentiles::default();
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    let rank = ((0.99 * n as f64).ceil() as usize).clamp(1, n);
    Percentiles {
        mean: v.iter().sum::<f64>() / n as f64,
        median,
        p99: v[rank - 1],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub frames: usize,
    #[serde(with = "inf_as_string")]
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub timings_ms: BTreeMap<String, Percentiles>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub methods: BTreeMap<Method, MethodSummary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    records: Vec<FrameRecord>,
}

impl RunReport {
    /// Builds a report, checking that every method covers the same frames.
    pub fn from_records(mut records: Vec<FrameRecord>) -> Result<Self> {
        records.sort_by_key(|r| (r.method, r.frame));
        let mut per_method: BTreeMap<Method, Vec<u64>> = BTreeMap::new();
        for r in &records {
            if !(-1.0..=1.0).contains(&r.ssim) {
                return Err(Error::invalid(format!("ssim {} outside [-1, 1]", r.ssim)));
            }
            per_method.entry(r.method).or_default().push(r.frame);
        }
        for frames in per_method.values() {
            if frames.windows(2).any(|p| p[0] == p[1]) {
                return Err(Error::invalid("duplicate frame in report"));
            }
        }
        let mut sets = per_method.iter();
        if let Some((first_method, first)) = sets.next() {
            for (m, frames) in sets {
                if frames != first {
                    return Err(Error::invalid(format!(
                        "methods {first_method} and {m} cover different frames"
                    )));
                }
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<_> = self.records.iter().map(|r| r.method).collect();
        m.dedup();
        m
    }

    pub fn records_for(&self, method: Method) -> impl Iterator<Item = &FrameRecord> {
        self.records.iter().filter(move |r| r.method == method)
    }

    pub fn summary(&self) -> Summary {
        let methods = self
            .methods()
            .into_iter()
            .map(|m| {
                let rows: Vec<_> = self.records_for(m).collect();
                let n = rows.len() as f64;
                let timings_ms = STAGES
                    .iter()
                    .map(|s| {
                        let v: Vec<f64> = rows.iter().map(|r| r.stage(s)).collect();
                        (s.to_string(), percentiles(&v))
                    })
                    .collect();
                let summary = MethodSummary {
                    frames: rows.len(),
                    mean_psnr_db: rows.iter().map(|r| r.psnr_db).sum::<f64>() / n,
                    mean_ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
                    timings_ms,
                };
                (m, summary)
            })
            .collect();
        Summary { methods }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},,",
                r.method,
                r.frame,
                r.psnr_db,
                r.ssim,
                r.timings.foveate,
                r.timings.reproject,
                r.timings.bias_combine,
                r.metrics_ms
            );
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.summary()).map_err(|e| Error::invalid(e.to_string()))
    }
}

/// JSON has no infinity; identical frames serialize PSNR as `"inf"`.
mod inf_as_string {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {s:?}"
            ))),
        }
    }
}
