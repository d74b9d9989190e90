use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::bc::shared_uniform_labels;
use super::greedy::{greedy_joint_table, sample_joint};
use super::{path_metric, site_distance, ShuffleState};
use crate::error::{domain, Result};
use crate::glauber::{update_probs_counts, LumpedChain};
use crate::model::{Configuration, ModelSpec};
use crate::rng::{self, Rng};

/// Two coupled chains with cached counts and distance.
struct CoupledRun<'a> {
    m: &'a ModelSpec,
    x: Vec<usize>,
    y: Vec<usize>,
    cx: Vec<usize>,
    cy: Vec<usize>,
    dist: usize,
}

impl<'a> CoupledRun<'a> {
    fn new(m: &'a ModelSpec, x: &Configuration, y: &Configuration) -> Result<Self> {
        let dist = path_metric(m, x, y)?;
        Ok(Self {
            m,
            x: x.spins().to_vec(),
            y: y.spins().to_vec(),
            cx: x.counts().counts().to_vec(),
            cy: y.counts().counts().to_vec(),
            dist,
        })
    }

    fn step(&mut self, rng: &mut Rng) {
        let i = rng.gen_range(0..self.x.len());
        let (a0, b0) = (self.x[i], self.y[i]);
        let p = update_probs_counts(self.m, &self.cx, a0);
        let q = update_probs_counts(self.m, &self.cy, b0);
        let u = rng.gen::<f64>();
        let (a, b) = if self.m.is_blume_capel() {
            shared_uniform_labels(&p, &q, u)
        } else {
            sample_joint(&greedy_joint_table(&p, &q), u)
        };
        self.dist = self.dist - site_distance(&self.m.family, a0, b0) + site_distance(&self.m.family, a, b);
        self.cx[a0] -= 1;
        self.cx[a] += 1;
        self.cy[b0] -= 1;
        self.cy[b] += 1;
        self.x[i] = a;
        self.y[i] = b;
    }
}

/// Per-replica coupling times; a censored replica records `max_steps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingTimes {
    pub tau: Vec<u64>,
    pub censored: Vec<bool>,
    pub max_steps: u64,
    pub warning: Option<String>,
}

impl CouplingTimes {
    fn from_runs(runs: Vec<(u64, bool)>, max_steps: u64) -> Self {
        let (tau, censored): (Vec<u64>, Vec<bool>) = runs.into_iter().unzip();
        let hit = censored.iter().filter(|&&c| c).count();
        let warning = match hit {
            0 => None,
            h if h == censored.len() => Some(format!("all {h} replicas censored at {max_steps} steps")),
            h => Some(format!("{h} of {} replicas censored at {max_steps} steps", censored.len())),
        };
        Self { tau, censored, max_steps, warning }
    }

    pub fn replicas(&self) -> usize {
        self.tau.len()
    }

    pub fn censored_count(&self) -> usize {
        self.censored.iter().filter(|&&c| c).count()
    }

    /// Empirical `P(tau_c > t)`; censored replicas count as not yet coupled.
    pub fn survival(&self, t: u64) -> f64 {
        let alive = self
            .tau
            .iter()
            .zip(&self.censored)
            .filter(|&(&tau, &c)| c || tau > t)
            .count();
        alive as f64 / self.replicas().max(1) as f64
    }

    /// Empirical `p`-quantile, `None` when it falls among censored replicas.
    pub fn quantile(&self, p: f64) -> Option<u64> {
        let mut sorted: Vec<(u64, bool)> =
            self.tau.iter().copied().zip(self.censored.iter().copied()).collect();
        sorted.sort_by_key(|&(t, c)| (c, t));
        let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        let (t, c) = *sorted.get(idx)?;
        (!c).then_some(t)
    }
}

/// Coupling times of `replicas` independent coupled runs from
/// `(sigma0, tau0)`; replica `r` draws from stream `r` of `seed`.
pub fn coupling_time_mc(
    m: &ModelSpec,
    sigma0: &Configuration,
    tau0: &Configuration,
    seed: u64,
    max_steps: u64,
    replicas: usize,
) -> Result<CouplingTimes> {
    if replicas == 0 {
        return domain("need at least one replica");
    }
    CoupledRun::new(m, sigma0, tau0)?;
    let runs: Vec<(u64, bool)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut run = CoupledRun::new(m, sigma0, tau0).expect("validated above");
            let mut g = rng::stream(seed, r as u64);
            let mut t = 0;
            while run.dist > 0 && t < max_steps {
                run.step(&mut g);
                t += 1;
            }
            (t, run.dist > 0)
        })
        .collect();
    Ok(CouplingTimes::from_runs(runs, max_steps))
}

/// Distance after each of `steps` coupled steps, continuing past meeting.
pub fn coupled_distance_trace(
    m: &ModelSpec,
    sigma0: &Configuration,
    tau0: &Configuration,
    steps: u64,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut run = CoupledRun::new(m, sigma0, tau0)?;
    let mut g = rng::seeded(seed);
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(run.dist);
    for _ in 0..steps {
        run.step(&mut g);
        out.push(run.dist);
    }
    Ok(out)
}

/// Coupling times of the shuffle coupling from a fixed pair of decks.
pub fn shuffle_coupling_times(
    start: &ShuffleState,
    seed: u64,
    max_steps: u64,
    replicas: usize,
) -> CouplingTimes {
    let runs = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut s = start.clone();
            let mut g = rng::stream(seed, r as u64);
            let mut t = 0;
            while s.crossings() > 0 && t < max_steps {
                s.step_with(&mut g);
                t += 1;
            }
            (t, s.crossings() > 0)
        })
        .collect();
    CouplingTimes::from_runs(runs, max_steps)
}

/// Exact draw from the Gibbs ensemble: counts from the lumped stationary law,
/// then a uniformly random arrangement.
pub fn sample_stationary_configuration(chain: &LumpedChain, seed: u64) -> Result<Configuration> {
    let mut g = rng::seeded(seed);
    let u = g.gen::<f64>();
    let mut acc = 0.0;
    let mut idx = chain.len() - 1;
    for (i, &p) in chain.pi.iter().enumerate() {
        acc += p;
        if u < acc {
            idx = i;
            break;
        }
    }
    let mut spins = Configuration::from_counts(chain.states[idx].counts())?.spins().to_vec();
    spins.shuffle(&mut g);
    Configuration::new(spins, chain.model.q())
}
