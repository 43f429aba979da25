//! Monte Carlo driver for the simulation study.

mod config;
mod table;

use rand::Rng;
use rayon::prelude::*;

use crate::design::{draw_srswor, Target};
use crate::error::{Error, Result};
use crate::estimators::{DiagnosticKind, EstimatorKind};
use crate::linkage::{multiplicity_weights, reverse_weights_best_link};
use crate::pipeline::EstimationContext;
use crate::rng::stream_rng;
use crate::synthpop::{gen_linkage, gen_pi_q_weights, gen_population, SyntheticLinkage, SyntheticPopulation};

pub use config::{parse_scenarios, Column, ScenarioConfig, TABLE_COLUMNS};
pub use table::{drift_diagnostic, format_sig, summarize_to_table, DriftLine, SummaryTable, TableBlock, METRICS};

/// Largest tolerated share of failed replicates per estimator.
pub const MAX_FAILURE_RATE: f64 = 0.01;

const POPULATION_STREAM: u64 = 0;
const LINKAGE_STREAM: u64 = 1;
const WEIGHT_STREAM: u64 = 2;
const REPLICATE_STREAM_BASE: u64 = 1 << 32;

/// One realisation of `(U, A, L)` with everything the estimators need.
#[derive(Debug, Clone)]
pub struct SimulationWorld {
    pub population: SyntheticPopulation,
    pub generated: SyntheticLinkage,
    /// PI-q incidence weights, reverse `q` weights and best links.
    pub context: EstimationContext,
    /// Same data with multiplicity weights in place of PI-q.
    pub multiplicity: EstimationContext,
}

impl SimulationWorld {
    pub fn generate<R: Rng + ?Sized>(
        config: &ScenarioConfig,
        population_rng: &mut R,
        linkage_rng: &mut R,
        weight_rng: &mut R,
    ) -> Result<Self> {
        let population = gen_population(&config.population_model()?, population_rng)?;
        let aux = population.aux();
        let generated = gen_linkage(&aux, &config.linkage_model()?, linkage_rng)?;
        let linkage = &generated.linkage;
        let reverse = reverse_weights_best_link(linkage, &generated.best, config.q)?;
        let pi_q = gen_pi_q_weights(linkage, &generated.matches, config.q_pi, weight_rng)?;
        let base = EstimationContext::new(aux, linkage.clone())?
            .with_weights(reverse)?
            .with_best_links(generated.best.clone())?
            .with_unit_covariates(population.x.clone())?;
        let multiplicity = base.clone().with_weights(multiplicity_weights(linkage)?)?;
        let context = base.with_weights(pi_q)?;
        Ok(Self {
            population,
            generated,
            context,
            multiplicity,
        })
    }

    /// The fixed world of a block, from the block seed.
    pub fn for_block(config: &ScenarioConfig) -> Result<Self> {
        Self::generate(
            config,
            &mut stream_rng(config.seed, POPULATION_STREAM),
            &mut stream_rng(config.seed, LINKAGE_STREAM),
            &mut stream_rng(config.seed, WEIGHT_STREAM),
        )
    }

    fn context_for(&self, column: Column) -> &EstimationContext {
        match column {
            Column::PiM => &self.multiplicity,
            _ => &self.context,
        }
    }

    fn truth(&self, target: Target) -> f64 {
        match target {
            Target::Total => self.population.total(),
            Target::Mean => self.population.mean(),
        }
    }
}

/// Monte Carlo moments of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub column: Column,
    /// `t̄`.
    pub mean: f64,
    /// `v(t)`, with divisor `K - 1`.
    pub variance: f64,
    /// `K⁻¹ Σ (t - truth)²`.
    pub mse: f64,
    /// `ν̄(t)`.
    pub mean_variance_estimate: f64,
    pub se: f64,
    pub ese: f64,
    pub re: f64,
    pub rmse: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub config: ScenarioConfig,
    /// Mean over replicates of the true `Y` or `Ȳ`.
    pub truth: f64,
    pub replicates: usize,
    pub estimators: Vec<EstimatorSummary>,
}

impl MonteCarloSummary {
    pub fn get(&self, column: Column) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.column == column)
    }
}

/// A fresh world for replicate `index`, drawn from far-apart positions of the
/// replicate's stream so it never overlaps the sample draw.
fn redrawn_world(config: &ScenarioConfig, index: usize) -> Result<SimulationWorld> {
    let base = stream_rng(config.seed, REPLICATE_STREAM_BASE + index as u64);
    let mut rngs = [1u128, 2, 3].map(|k| {
        let mut r = base.clone();
        r.set_word_pos(k << 40);
        r
    });
    let [a, b, c] = &mut rngs;
    SimulationWorld::generate(config, a, b, c)
}

struct Replicate {
    truth: f64,
    ht: (f64, f64),
    values: Vec<Option<(f64, f64)>>,
}

fn run_replicate(
    config: &ScenarioConfig,
    fixed: Option<&SimulationWorld>,
    index: usize,
) -> Result<Replicate> {
    let mut rng = stream_rng(config.seed, REPLICATE_STREAM_BASE + index as u64);
    let owned;
    let world = match fixed {
        Some(w) => w,
        None => {
            owned = redrawn_world(config, index)?;
            &owned
        }
    };
    let sample = draw_srswor(config.population_size, config.sample_size, &mut rng)?;
    let y = world.population.y.as_slice();
    let ys: Vec<f64> = sample.units().iter().map(|&i| y[i]).collect();
    let target = config.target;
    let run = |column: Column| -> Option<(f64, f64)> {
        let e = world
            .context_for(column)
            .estimate(column.estimator(), &sample, &ys)
            .ok()?
            .to_target(target);
        let v = e.variance?;
        (e.value.is_finite() && v.is_finite()).then_some((e.value, v))
    };
    let ht = run(Column::Ht).ok_or_else(|| {
        Error::InvalidParameter("HT estimate failed; the sample is degenerate".into())
    })?;
    Ok(Replicate {
        truth: world.truth(target),
        ht,
        values: config.estimators.iter().map(|&c| run(c)).collect(),
    })
}

/// Runs every replicate of a block and aggregates the table metrics.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MonteCarloSummary> {
    config.validate()?;
    let k = config.replicates;
    let fixed = if config.redraw {
        None
    } else {
        Some(SimulationWorld::for_block(config)?)
    };
    if config.estimators.is_empty() {
        let truth = fixed.as_ref().map_or(f64::NAN, |w| w.truth(config.target));
        return Ok(MonteCarloSummary {
            config: config.clone(),
            truth,
            replicates: k,
            estimators: Vec::new(),
        });
    }
    let replicates = (0..k)
        .into_par_iter()
        .map(|index| run_replicate(config, fixed.as_ref(), index))
        .collect::<Result<Vec<_>>>()?;

    let kf = k as f64;
    let truth = replicates.iter().map(|r| r.truth).sum::<f64>() / kf;
    let moments = |values: &[(f64, f64, f64)]| -> (f64, f64, f64, f64) {
        let m = values.len() as f64;
        let mean = values.iter().map(|v| v.0).sum::<f64>() / m;
        let var = values.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let mse = values.iter().map(|v| (v.0 - v.2).powi(2)).sum::<f64>() / m;
        let nu = values.iter().map(|v| v.1).sum::<f64>() / m;
        (mean, var, mse, nu)
    };
    let ht: Vec<(f64, f64, f64)> = replicates.iter().map(|r| (r.ht.0, r.ht.1, r.truth)).collect();
    let (_, ht_var, ht_mse, _) = moments(&ht);

    let mut estimators = Vec::with_capacity(config.estimators.len());
    for (c, &column) in config.estimators.iter().enumerate() {
        let values: Vec<(f64, f64, f64)> = replicates
            .iter()
            .filter_map(|r| r.values[c].map(|(t, v)| (t, v, r.truth)))
            .collect();
        let failures = k - values.len();
        if failures as f64 > MAX_FAILURE_RATE * kf || values.len() < 2 {
            return Err(Error::TooManyFailures {
                estimator: column.label().into(),
                failed: failures,
                total: k,
            });
        }
        let (mean, variance, mse, nu) = moments(&values);
        estimators.push(EstimatorSummary {
            column,
            mean,
            variance,
            mse,
            mean_variance_estimate: nu,
            se: variance.sqrt(),
            ese: nu.sqrt(),
            re: variance / ht_var,
            rmse: mse / ht_mse,
            failures,
        });
    }
    Ok(MonteCarloSummary {
        config: config.clone(),
        truth,
        replicates: k,
        estimators,
    })
}

/// Share of replicates in which each consistency test rejects at `critical`.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionRates {
    pub replicates: usize,
    pub rates: Vec<(DiagnosticKind, f64)>,
}

/// Runs the consistency diagnostics over the replicates of a block.
pub fn diagnostic_rejection_rates(
    config: &ScenarioConfig,
    kinds: &[DiagnosticKind],
    critical: f64,
) -> Result<RejectionRates> {
    config.validate()?;
    let fixed = if config.redraw {
        None
    } else {
        Some(SimulationWorld::for_block(config)?)
    };
    let rejections = (0..config.replicates)
        .into_par_iter()
        .map(|index| -> Result<Vec<bool>> {
            let mut rng = stream_rng(config.seed, REPLICATE_STREAM_BASE + index as u64);
            let owned;
            let world = match fixed.as_ref() {
                Some(w) => w,
                None => {
                    owned = redrawn_world(config, index)?;
                    &owned
                }
            };
            let sample = draw_srswor(config.population_size, config.sample_size, &mut rng)?;
            kinds
                .iter()
                .map(|&kind| Ok(world.context.diagnose(kind, &sample)?.rejects(critical)))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let k = config.replicates as f64;
    let rates = kinds
        .iter()
        .enumerate()
        .map(|(j, &kind)| {
            let hits = rejections.iter().filter(|r| r[j]).count();
            (kind, hits as f64 / k)
        })
        .collect();
    Ok(RejectionRates {
        replicates: config.replicates,
        rates,
    })
}

impl Column {
    /// Whether the estimator uses only the sample links.
    pub fn sample_links_only(self) -> bool {
        matches!(self, Column::Sbl | Column::SriQ | Column::Sls)
    }
}

impl From<Column> for EstimatorKind {
    fn from(c: Column) -> Self {
        c.estimator()
    }
}
