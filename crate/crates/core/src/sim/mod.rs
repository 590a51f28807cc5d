//! Monte Carlo harness: run configuration, paired trials, CSV output and
//! self-checks.

mod checks;
mod config;
mod csv_io;
mod stats;

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::{choose_phases, greedy_allocate, GreedyOptions, PhaseMode};
use crate::baseline::greedy_allocate_linear;
use crate::channel::{draw_realization, ChannelRealization, ScenarioConfig};
use crate::error::{Error, Result};
use crate::gram::{decompose, dpc_sum_se};

pub use checks::{self_check, CheckOutcome};
pub use config::{RunConfig, RunOptions, Sweep};
pub use csv_io::{emit_csv, format_g, parse_csv, read_csv, write_csv, CSV_HEADER};
pub use stats::{ks_critical_value, uniformity_test, UniformityResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Thp,
    ThpRandom,
    ThpDiscrete,
    ThpNoRis,
    DpcRate,
    LinearZf,
    LinearZfRandom,
    LinearZfDiscrete,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Thp,
        Method::ThpRandom,
        Method::ThpDiscrete,
        Method::ThpNoRis,
        Method::DpcRate,
        Method::LinearZf,
        Method::LinearZfRandom,
        Method::LinearZfDiscrete,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Thp => "thp",
            Method::ThpRandom => "thp_random",
            Method::ThpDiscrete => "thp_discrete",
            Method::ThpNoRis => "thp_no_ris",
            Method::DpcRate => "dpc_rate",
            Method::LinearZf => "linear_zf",
            Method::LinearZfRandom => "linear_zf_random",
            Method::LinearZfDiscrete => "linear_zf_discrete",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// One (sweep value, trial, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub trial: usize,
    pub method: Method,
    pub sweep_name: String,
    pub sweep_value: f64,
    pub n_allocated: usize,
    pub sum_se_bits: f64,
    pub wall_time_ms: f64,
}

/// Outcome of one method on one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub n_allocated: usize,
    pub sum_se_bits: f64,
}

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial cell, derived from the run seed and the cell indices.
pub fn cell_seed(seed: u64, sweep_index: usize, trial: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ sweep_index as u64) ^ trial as u64)
}

/// Runs `method` on one realization. `rng` supplies random phases only.
pub fn run_method(
    method: Method,
    real_: &ChannelRealization<f64>,
    tx_power: f64,
    options: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<MethodOutcome> {
    let thp_opts = GreedyOptions {
        start: options.greedy_start,
        max_sweeps: options.max_sweeps,
        relaxation_prune: options.relaxation_prune,
    };
    let lin_opts = GreedyOptions {
        max_sweeps: options.linear_max_sweeps,
        relaxation_prune: None,
        ..thp_opts
    };
    let thp = |r: &ChannelRealization<f64>, mode, rng: &mut ChaCha8Rng| -> Result<MethodOutcome> {
        let a = greedy_allocate(r, tx_power, mode, &thp_opts, rng)?;
        Ok(MethodOutcome {
            n_allocated: a.len(),
            sum_se_bits: a.se_exact.max(0.0),
        })
    };
    let linear = |mode, rng: &mut ChaCha8Rng| -> Result<MethodOutcome> {
        let s = greedy_allocate_linear(real_, tx_power, mode, &lin_opts, rng)?;
        Ok(MethodOutcome {
            n_allocated: s.len(),
            sum_se_bits: s.sum_se().max(0.0),
        })
    };
    match method {
        Method::Thp => thp(real_, PhaseMode::Continuous, rng),
        Method::ThpRandom => thp(real_, PhaseMode::Random, rng),
        Method::ThpDiscrete => thp(real_, PhaseMode::Binary, rng),
        Method::ThpNoRis => thp(&real_.without_ris(), PhaseMode::Unit, rng),
        Method::DpcRate => {
            let users: Vec<usize> = (0..real_.n_users()).collect();
            let p_bar = tx_power / users.len() as f64;
            let gram = decompose(real_, &users)?;
            let theta = match choose_phases(real_, &users, &gram, p_bar, PhaseMode::Continuous, options.max_sweeps, rng) {
                Ok(t) => t,
                Err(Error::Degenerate(_)) => crate::phase_opt::PhaseConfig::ones(real_.n_ris()),
                Err(e) => return Err(e),
            };
            let se = dpc_sum_se(&gram, &theta.theta_bar(), p_bar)?;
            Ok(MethodOutcome {
                n_allocated: users.len(),
                sum_se_bits: se.max(0.0),
            })
        }
        Method::LinearZf => linear(PhaseMode::Continuous, rng),
        Method::LinearZfRandom => linear(PhaseMode::Random, rng),
        Method::LinearZfDiscrete => linear(PhaseMode::Binary, rng),
    }
}

fn run_cell(config: &RunConfig, scenario: &ScenarioConfig, sweep_index: usize, trial: usize) -> Result<Vec<ResultRecord>> {
    let seed = cell_seed(scenario.seed, sweep_index, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real_: ChannelRealization<f64> = draw_realization(scenario, &mut rng)?;
    let method_seed = rng.next_u64();
    // channels are noise-normalized, so the power is an SNR in linear units
    let tx_power = scenario.tx_mw();
    let (sweep_name, sweep_value) = config.sweep.label(sweep_index);
    let mut out = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        // every method sees the same realization and the same phase generator
        let mut mrng = ChaCha8Rng::seed_from_u64(method_seed);
        let start = Instant::now();
        let o = run_method(method, &real_, tx_power, &config.options, &mut mrng)?;
        let ms = if config.options.timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        out.push(ResultRecord {
            trial,
            method,
            sweep_name: sweep_name.to_string(),
            sweep_value,
            n_allocated: o.n_allocated,
            sum_se_bits: o.sum_se_bits,
            wall_time_ms: ms,
        });
    }
    Ok(out)
}

/// Runs every (sweep value, trial) cell; records come back ordered by
/// sweep index, trial and the method order of the config.
pub fn run(config: &RunConfig) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let scenarios = config.scenarios();
    let cells: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let work = || {
        cells
            .par_iter()
            .map(|&(s, t)| run_cell(config, &scenarios[s], s, t))
            .collect::<Result<Vec<_>>>()
    };
    let nested = match config.options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    Ok(nested.into_iter().flatten().collect())
}

/// Mean `sum_se_bits` per (sweep value, method), in first-seen order.
pub fn summarize(records: &[ResultRecord]) -> Vec<(f64, Method, f64, usize)> {
    let mut out: Vec<(f64, Method, f64, usize)> = Vec::new();
    for r in records {
        match out
            .iter_mut()
            .find(|e| e.0.to_bits() == r.sweep_value.to_bits() && e.1 == r.method)
        {
            Some(e) => {
                e.2 += r.sum_se_bits;
                e.3 += 1;
            }
            None => out.push((r.sweep_value, r.method, r.sum_se_bits, 1)),
        }
    }
    for e in &mut out {
        e.2 /= e.3 as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(methods: Vec<Method>) -> RunConfig {
        let mut scenario = ScenarioConfig::ris_weak();
        scenario.n_ris = 8;
        RunConfig {
            scenario,
            trials: 2,
            methods,
            sweep: Sweep::None,
            options: RunOptions {
                timing: false,
                ..RunOptions::default()
            },
        }
    }

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_tag(m.tag()), Some(m));
        }
        assert_eq!(Method::from_tag("lisa"), None);
    }

    #[test]
    fn record_count_and_order() {
        let mut c = small_config(vec![Method::Thp, Method::LinearZfRandom]);
        c.sweep = Sweep::TxDbm(vec![20.0, 30.0]);
        let r = run(&c).unwrap();
        assert_eq!(r.len(), 2 * 2 * 2);
        assert_eq!(r[0].method, Method::Thp);
        assert_eq!(r[1].method, Method::LinearZfRandom);
        assert_eq!(r[2].trial, 1);
        assert_eq!(r[4].sweep_value, 30.0);
        for rec in &r {
            assert!(rec.sum_se_bits >= 0.0);
            assert!(rec.n_allocated <= 6);
        }
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let mut c = small_config(vec![Method::ThpRandom, Method::DpcRate]);
        c.trials = 4;
        c.options.threads = Some(1);
        let a = run(&c).unwrap();
        c.options.threads = Some(3);
        let b = run(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cell_seeds_differ() {
        assert_ne!(cell_seed(1, 0, 0), cell_seed(1, 0, 1));
        assert_ne!(cell_seed(1, 0, 1), cell_seed(1, 1, 0));
        assert_ne!(cell_seed(1, 0, 0), cell_seed(2, 0, 0));
    }
}
