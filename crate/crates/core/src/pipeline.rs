//! End-to-end orchestration shared by the CLI and the acceptance tests.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::ansatz::{Ansatz, Variant};
use crate::basis::OccupationBasis;
use crate::config::{substream_seed, DataSource, RunConfig};
use crate::error::Result;
use crate::hf::{calibrate_t_hop, hf_iterate, hopping_range, HfSolution};
use crate::metrics::{period_report, PeriodReport, ReportTable, TableCell};
use crate::optimizer::{optimize_levels, OptimResult};
use crate::portfolio::{
    brute_force_solve, build_cost_diagonal, estimate_model, ingest_usage_csv, synth_usage,
    DemandModel, InstanceConfig, OracleResult, UsageRecords, HOURS_PER_DAY,
};

/// Usage records named by the config's data source.
pub fn load_usage(cfg: &RunConfig) -> Result<UsageRecords> {
    match &cfg.data {
        DataSource::Synth { days, profile } => synth_usage(
            substream_seed(cfg.seed()?, "synth"),
            cfg.participants,
            *days,
            profile,
        ),
        DataSource::Csv { path } => ingest_usage_csv(path),
    }
}

pub fn load_model(cfg: &RunConfig) -> Result<DemandModel> {
    estimate_model(&load_usage(cfg)?)
}

/// Everything about one period that does not depend on the variant.
#[derive(Debug, Clone)]
pub struct PeriodSetup {
    pub instance: InstanceConfig,
    pub basis: Arc<OccupationBasis>,
    pub cost: Vec<f64>,
    pub oracle: OracleResult,
    pub t_hop: f64,
    /// `t_hop R_hop`, the many-body range of the hopping term.
    pub hop_range: f64,
    pub hf: HfSolution,
}

pub fn setup_period(cfg: &RunConfig, model: &DemandModel, period: usize) -> Result<PeriodSetup> {
    let instance = cfg.instance(period);
    instance.validate(model)?;
    let basis = Arc::new(OccupationBasis::with_max_sites(
        cfg.participants,
        cfg.requests,
        cfg.max_sites,
    )?);
    let cost = build_cost_diagonal(&instance, model, &basis)?;
    let oracle = brute_force_solve(&instance, model, &basis)?;
    let t_hop = calibrate_t_hop(&instance, model, &basis)?;
    let hop_range = t_hop * hopping_range(cfg.participants, cfg.requests)?;
    let hf = hf_iterate(&instance, model, t_hop, &cfg.hf.settings())?;
    Ok(PeriodSetup {
        instance,
        basis,
        cost,
        oracle,
        t_hop,
        hop_range,
        hf,
    })
}

impl PeriodSetup {
    pub fn ansatz(&self, variant: Variant) -> Result<Ansatz> {
        Ansatz::new(
            variant,
            self.basis.clone(),
            self.cost.clone(),
            self.t_hop,
            Some(&self.hf),
        )
    }
}

/// Optimiser results for every level `0..=max_level` of one (variant, period).
#[derive(Debug, Clone)]
pub struct CellRun {
    pub period: usize,
    pub variant: Variant,
    pub levels: Vec<OptimResult>,
    /// Wall-clock time spent optimising; never written to reports.
    pub elapsed: Duration,
}

pub fn run_cell(cfg: &RunConfig, setup: &PeriodSetup, variant: Variant) -> Result<CellRun> {
    let start = Instant::now();
    let ansatz = setup.ansatz(variant)?;
    let rank = Variant::ALL.iter().position(|&v| v == variant).unwrap();
    let stream = (rank * HOURS_PER_DAY + setup.instance.period_start) as u64;
    let levels = optimize_levels(
        &ansatz,
        &setup.oracle,
        setup.hop_range,
        cfg.max_level(),
        &cfg.optimizer,
        substream_seed(cfg.seed()?, "restarts"),
        stream,
    )?;
    Ok(CellRun {
        period: setup.instance.period_start,
        variant,
        levels,
        elapsed: start.elapsed(),
    })
}

/// Results of a (variants x periods) grid.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub setups: Vec<PeriodSetup>,
    pub cells: Vec<CellRun>,
}

pub fn run_grid(cfg: &RunConfig, model: &DemandModel, variants: &[Variant]) -> Result<GridRun> {
    let setups = cfg
        .periods
        .par_iter()
        .map(|&t| setup_period(cfg, model, t))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Variant)> = (0..setups.len())
        .flat_map(|k| variants.iter().map(move |&v| (k, v)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(k, v)| run_cell(cfg, &setups[k], v))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridRun { setups, cells })
}

impl GridRun {
    pub fn setup(&self, period: usize) -> Option<&PeriodSetup> {
        self.setups.iter().find(|s| s.instance.period_start == period)
    }

    pub fn cell(&self, variant: Variant, period: usize) -> Option<&CellRun> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.period == period)
    }

    pub fn hf_converged(&self) -> bool {
        self.setups.iter().all(|s| s.hf.converged)
    }

    /// Table over the requested levels.
    pub fn table(&self, levels: &[usize]) -> ReportTable {
        let cells = self
            .cells
            .iter()
            .flat_map(|c| {
                c.levels
                    .iter()
                    .filter(|r| levels.contains(&r.level))
                    .map(move |r| TableCell::from_result(c.period, r))
            })
            .collect();
        ReportTable::new(self.setups.iter().map(|s| s.instance.period_start).collect(), cells)
    }

    /// Full report of every requested level, in (period, variant, level) order.
    pub fn reports(
        &self,
        model: &DemandModel,
        levels: &[usize],
        bins: usize,
    ) -> Result<Vec<PeriodReport>> {
        let mut out = Vec::new();
        for cell in &self.cells {
            let setup = self.setup(cell.period).expect("cell period has a setup");
            let ansatz = setup.ansatz(cell.variant)?;
            for r in cell.levels.iter().filter(|r| levels.contains(&r.level)) {
                let state = ansatz.run(&r.params);
                out.push(period_report(
                    &setup.instance,
                    model,
                    &setup.oracle,
                    &setup.cost,
                    r,
                    &state,
                    bins,
                )?);
            }
        }
        Ok(out)
    }
}
