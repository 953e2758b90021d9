//! Observables of final states and the comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzParams, Variant};
use crate::basis::StateVector;
use crate::error::{Error, Result};
use crate::optimizer::OptimResult;
use crate::portfolio::{DemandModel, InstanceConfig, OracleResult};

fn occupied(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |l| mask >> l & 1 == 1)
}

/// `E[P_tot,t] = sum_x |psi_x|^2 sum_l E[p_tl] x_l`.
pub fn total_negawatt(state: &StateVector, model: &DemandModel, t: usize) -> f64 {
    let mean = model.mean(t);
    state
        .basis()
        .states()
        .iter()
        .zip(state.amplitudes())
        .map(|(&x, a)| a.norm_sqr() * occupied(x).map(|l| mean[l]).sum::<f64>())
        .sum()
}

/// Standard deviation of the total negawatt at hour `t`, combining the
/// selection spread of the state with the demand covariance.
pub fn negawatt_std(state: &StateVector, model: &DemandModel, t: usize) -> f64 {
    let mean = model.mean(t);
    let cov = model.cov(t);
    let mut first = 0.0;
    let mut second = 0.0;
    for (&x, a) in state.basis().states().iter().zip(state.amplitudes()) {
        let w = a.norm_sqr();
        let sites: Vec<usize> = occupied(x).collect();
        let m: f64 = sites.iter().map(|&l| mean[l]).sum();
        let var: f64 = sites
            .iter()
            .flat_map(|&i| sites.iter().map(move |&j| (i, j)))
            .map(|(i, j)| cov[(i, j)])
            .sum();
        first += w * m;
        second += w * (var + m * m);
    }
    (second - first * first).max(0.0).sqrt()
}

/// `Delta E = <H_C> - E_min`.
pub fn expected_excess(state: &StateVector, diag: &[f64], e_min: f64) -> Result<f64> {
    Ok(state.expectation_diagonal(diag)? - e_min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Probability mass over `bins` equal-width cost bins covering
/// `[E_min, E_min + W]`. Bins are left-closed; the top edge belongs to the
/// last bin.
pub fn cost_histogram(
    state: &StateVector,
    diag: &[f64],
    e_min: f64,
    width: f64,
    bins: usize,
) -> Result<Histogram> {
    if !(width > 0.0) {
        return Err(Error::Degenerate(format!("histogram width must be positive, got {width}")));
    }
    if bins == 0 {
        return Err(Error::InvalidParams("histogram needs at least one bin".into()));
    }
    if diag.len() != state.amplitudes().len() {
        return Err(Error::LengthMismatch {
            expected: state.amplitudes().len(),
            got: diag.len(),
        });
    }
    let mut masses = vec![0.0; bins];
    for (&e, a) in diag.iter().zip(state.amplitudes()) {
        let pos = (e - e_min) / width * bins as f64;
        let k = if pos <= 0.0 { 0 } else { (pos.floor() as usize).min(bins - 1) };
        masses[k] += a.norm_sqr();
    }
    let edges = (0..=bins)
        .map(|k| e_min + width * k as f64 / bins as f64)
        .collect();
    Ok(Histogram { edges, masses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeReport {
    pub t: usize,
    #[serde(rename = "P_tot")]
    pub p_tot: f64,
    pub sigma_tot: f64,
    /// `P_t <= E[P_tot,t] <= P_t + delta`.
    pub balance_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub period: usize,
    pub times: Vec<usize>,
    pub participants: usize,
    pub requests: usize,
    #[serde(rename = "E_min")]
    pub e_min: f64,
    #[serde(rename = "W")]
    pub width: f64,
}

/// Everything reported for one optimised (variant, period, level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub instance: InstanceSummary,
    pub variant: Variant,
    pub p: usize,
    pub params: AnsatzParams,
    #[serde(rename = "E_star")]
    pub e_star: f64,
    #[serde(rename = "delta_E_over_W")]
    pub delta_e_over_w: f64,
    pub per_t: Vec<TimeReport>,
    pub histogram: Histogram,
}

pub fn period_report(
    instance: &InstanceConfig,
    model: &DemandModel,
    oracle: &OracleResult,
    diag: &[f64],
    result: &OptimResult,
    state: &StateVector,
    bins: usize,
) -> Result<PeriodReport> {
    let per_t = instance
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let p_tot = total_negawatt(state, model, t);
            let lo = instance.procurement(k);
            TimeReport {
                t,
                p_tot,
                sigma_tot: negawatt_std(state, model, t),
                balance_ok: lo <= p_tot && p_tot <= lo + instance.margin,
            }
        })
        .collect();
    Ok(PeriodReport {
        instance: InstanceSummary {
            period: instance.period_start,
            times: instance.times.clone(),
            participants: instance.participants,
            requests: instance.requests,
            e_min: oracle.e_min,
            width: oracle.width,
        },
        variant: result.variant,
        p: result.level,
        params: result.params.clone(),
        e_star: result.energy,
        delta_e_over_w: result.excess_ratio,
        per_t,
        histogram: cost_histogram(state, diag, oracle.e_min, oracle.width, bins)?,
    })
}

/// Lower quartile, median and upper quartile (linear interpolation).
pub fn quartiles(values: &[f64]) -> Option<[f64; 3]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some([at(0.25), at(0.5), at(0.75)])
}

/// One cell of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub variant: Variant,
    pub p: usize,
    pub period: usize,
    #[serde(rename = "delta_E_over_W")]
    pub value: f64,
    /// Quartiles of `Delta E / W` over the optimiser starts.
    pub quartiles: [f64; 3],
}

impl TableCell {
    pub fn from_result(period: usize, r: &OptimResult) -> Self {
        Self {
            variant: r.variant,
            p: r.level,
            period,
            value: r.excess_ratio,
            quartiles: quartiles(&r.restart_ratios).unwrap_or([r.excess_ratio; 3]),
        }
    }
}

/// `Delta E / W` for every (variant, p) row and period column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub periods: Vec<usize>,
    pub cells: Vec<TableCell>,
}

impl ReportTable {
    pub fn new(periods: Vec<usize>, cells: Vec<TableCell>) -> Self {
        Self { periods, cells }
    }

    pub fn get(&self, variant: Variant, p: usize, period: usize) -> Option<&TableCell> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.p == p && c.period == period)
    }

    fn rows(&self) -> BTreeSet<(usize, usize)> {
        self.cells
            .iter()
            .map(|c| (variant_rank(c.variant), c.p))
            .collect()
    }

    /// Cells missing from the (variant, p) x period grid.
    pub fn gaps(&self) -> Vec<(Variant, usize, usize)> {
        let mut out = Vec::new();
        for (rank, p) in self.rows() {
            let v = Variant::ALL[rank];
            for &t in &self.periods {
                if self.get(v, p, t).is_none() {
                    out.push((v, p, t));
                }
            }
        }
        out
    }

    /// Rows `method,p` then one column per period, three decimals, blank when
    /// a cell is missing. Missing cells are listed after the table as `#` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,p");
        for t in &self.periods {
            write!(s, ",T{t}").unwrap();
        }
        s.push('\n');
        for (rank, p) in self.rows() {
            let v = Variant::ALL[rank];
            write!(s, "{v},{p}").unwrap();
            for &t in &self.periods {
                match self.get(v, p, t) {
                    Some(c) => write!(s, ",{:.3}", c.value).unwrap(),
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        for (v, p, t) in self.gaps() {
            writeln!(s, "# missing: {v} p={p} T={t}").unwrap();
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let mut grouped: BTreeMap<(usize, usize), Vec<Option<&TableCell>>> = BTreeMap::new();
        for (rank, p) in self.rows() {
            let v = Variant::ALL[rank];
            grouped.insert(
                (rank, p),
                self.periods.iter().map(|&t| self.get(v, p, t)).collect(),
            );
        }
        #[derive(Serialize)]
        struct Row<'a> {
            method: Variant,
            p: usize,
            cells: Vec<Option<&'a TableCell>>,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            periods: &'a [usize],
            rows: Vec<Row<'a>>,
        }
        let rows = grouped
            .into_iter()
            .map(|((rank, p), cells)| Row {
                method: Variant::ALL[rank],
                p,
                cells,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&Out {
            periods: &self.periods,
            rows,
        })?)
    }
}

fn variant_rank(v: Variant) -> usize {
    Variant::ALL.iter().position(|&w| w == v).unwrap()
}
