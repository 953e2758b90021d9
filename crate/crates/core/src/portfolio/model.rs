use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::usage::UsageRecords;
use crate::error::{Error, Result};
use crate::linalg::sp_eigensolve;

/// Expected negawatt `E[p_{t,l}]` and covariance `sigma_{t,l,l'}` per hour.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandModel {
    participants: usize,
    mean: Vec<Vec<f64>>,
    cov: Vec<DMatrix<f64>>,
}

impl DemandModel {
    pub fn new(mean: Vec<Vec<f64>>, cov: Vec<DMatrix<f64>>) -> Result<Self> {
        if mean.len() != cov.len() || mean.is_empty() {
            return Err(Error::LengthMismatch {
                expected: mean.len(),
                got: cov.len(),
            });
        }
        let participants = mean[0].len();
        for (t, (m, c)) in mean.iter().zip(&cov).enumerate() {
            if m.len() != participants || c.nrows() != participants || c.ncols() != participants {
                return Err(Error::Data(format!("hour {t}: inconsistent model shape")));
            }
            let asym = (c - c.transpose()).amax();
            if asym > 1e-12 * c.amax().max(1.0) {
                return Err(Error::Data(format!("hour {t}: covariance is not symmetric")));
            }
        }
        Ok(Self {
            participants,
            mean,
            cov,
        })
    }

    pub fn participants(&self) -> usize {
        self.participants
    }

    pub fn hours(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self, t: usize) -> &[f64] {
        &self.mean[t]
    }

    pub fn cov(&self, t: usize) -> &DMatrix<f64> {
        &self.cov[t]
    }

    /// Smallest covariance eigenvalue over all hours.
    pub fn min_cov_eigenvalue(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for c in &self.cov {
            let e = sp_eigensolve(c)?;
            min = min.min(e.values[0]);
        }
        Ok(min)
    }

    pub fn to_json(&self) -> Result<String> {
        let hours = (0..self.hours())
            .map(|t| {
                let cov = (0..self.participants)
                    .map(|l| self.cov[t].row(l).iter().map(|&v| Num(v)).collect())
                    .collect();
                let mean = self.mean[t].iter().map(|&v| Num(v)).collect();
                (t, HourStats { mean, cov })
            })
            .collect();
        let file = ModelFile {
            participants: self.participants,
            hours,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let expected: Vec<usize> = (0..file.hours.len()).collect();
        if file.hours.keys().copied().collect::<Vec<_>>() != expected {
            return Err(Error::Data("model hours must be 0..H without gaps".into()));
        }
        let l = file.participants;
        let mut mean = Vec::new();
        let mut cov = Vec::new();
        for (t, h) in file.hours {
            if h.cov.len() != l || h.cov.iter().any(|r| r.len() != l) {
                return Err(Error::Data(format!("hour {t}: covariance is not {l}x{l}")));
            }
            mean.push(h.mean.into_iter().map(|n| n.0).collect());
            cov.push(DMatrix::from_fn(l, l, |i, j| h.cov[i][j].0));
        }
        Self::new(mean, cov)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    participants: usize,
    hours: BTreeMap<usize, HourStats>,
}

#[derive(Serialize, Deserialize)]
struct HourStats {
    mean: Vec<Num>,
    cov: Vec<Vec<Num>>,
}

/// A float written with 17 significant digits.
#[derive(Debug, Clone, Copy)]
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = serde_json::value::RawValue::from_string(super::fmt_f64(self.0))
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Num)
    }
}

/// Sample mean and unbiased (divisor `D-1`) sample covariance across days.
pub fn estimate_model(records: &UsageRecords) -> Result<DemandModel> {
    let days = records.days();
    if days < 2 {
        return Err(Error::Data(format!(
            "need at least 2 days to estimate covariances, got {days}"
        )));
    }
    let l = records.participants();
    let mut means = Vec::with_capacity(records.hours_per_day());
    let mut covs = Vec::with_capacity(records.hours_per_day());
    for t in 0..records.hours_per_day() {
        // Welford co-moment accumulation
        let mut mean = vec![0.0; l];
        let mut comoment = DMatrix::<f64>::zeros(l, l);
        for d in 0..days {
            let x = &records.day(d)[t];
            let n = (d + 1) as f64;
            let delta_old: Vec<f64> = (0..l).map(|i| x[i] - mean[i]).collect();
            for i in 0..l {
                mean[i] += delta_old[i] / n;
            }
            for i in 0..l {
                for j in 0..l {
                    comoment[(i, j)] += delta_old[i] * (x[j] - mean[j]);
                }
            }
        }
        let mut cov = comoment / (days - 1) as f64;
        // exact symmetry; the two triangles differ only by rounding
        for i in 0..l {
            for j in 0..i {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        means.push(mean);
        covs.push(cov);
    }
    DemandModel::new(means, covs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{synth_usage, SynthProfile};
    use chrono::NaiveDate;

    fn records(values: &[[f64; 2]]) -> UsageRecords {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let dates = (0..values.len())
            .map(|d| start + chrono::Days::new(d as u64))
            .collect();
        let usage = values
            .iter()
            .map(|v| (0..24).map(|_| v.to_vec()).collect())
            .collect();
        UsageRecords::new(dates, usage).unwrap()
    }

    #[test]
    fn constant_usage_has_zero_covariance() {
        let m = estimate_model(&records(&[[0.4, 1.1]; 5])).unwrap();
        for t in 0..24 {
            assert!((m.mean(t)[0] - 0.4).abs() < 1e-15);
            assert!((m.mean(t)[1] - 1.1).abs() < 1e-15);
            assert!(m.cov(t).amax() < 1e-15);
        }
    }

    #[test]
    fn two_sample_variance() {
        let (a, b) = (0.3, 1.7);
        let m = estimate_model(&records(&[[a, 0.0], [b, 1.0]])).unwrap();
        let want = (a - b) * (a - b) / 2.0;
        assert!((m.cov(5)[(0, 0)] - want).abs() < 1e-15);
        assert!((m.cov(5)[(0, 1)] - (a - b) * (0.0 - 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_day_is_rejected() {
        assert!(estimate_model(&records(&[[0.4, 1.1]])).is_err());
    }

    #[test]
    fn estimated_covariances_are_psd() {
        let r = synth_usage(5, 8, 30, &SynthProfile::default()).unwrap();
        let m = estimate_model(&r).unwrap();
        assert!(m.min_cov_eigenvalue().unwrap() >= -1e-9);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = synth_usage(6, 4, 5, &SynthProfile::default()).unwrap();
        let m = estimate_model(&r).unwrap();
        let text = m.to_json().unwrap();
        assert!(text.contains("\"23\""));
        let back = DemandModel::from_json(&text).unwrap();
        assert_eq!(m, back);
    }
}
