//! Heat-bath Glauber dynamics: exact single-site update laws, their
//! large-`n` expansion, configuration-level simulation and the exact chain
//! lumped onto spin counts.
//!
//! The chain is not lazy: a selected vertex is resampled from the update law,
//! which may return its current label.

use std::collections::HashMap;

use rand::Rng as _;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{softmax, Configuration, CountsVector, Family, ModelSpec, SimplexPoint};
use crate::optimize::{composition_count, compositions};
use crate::rng;
use crate::sparse::Csr;

/// Default bound on the number of lumped states.
pub const LUMPED_STATE_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateDistribution {
    probs: Vec<f64>,
}

impl UpdateDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let s: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-12 {
            return domain(format!("not a probability vector: {probs:?}"));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Label selected by a uniform draw `u in [0, 1)`.
    pub fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Blume-Capel update law for the labels `(-1, 0, +1)` given the
/// magnetization `s_tilde` of the other `n - 1` sites.
pub fn bc_update_probs(beta: f64, k: f64, n: usize, s_tilde: i64) -> Result<UpdateDistribution> {
    if n == 0 || s_tilde.unsigned_abs() as usize > n - 1 {
        return domain(format!("|S_tilde| = {} exceeds n - 1 = {}", s_tilde.abs(), n as i64 - 1));
    }
    let field = 2.0 * beta * k * s_tilde as f64 / n as f64;
    let logits = [-field, beta - beta * k / n as f64, field];
    Ok(UpdateDistribution { probs: softmax(&logits) })
}

/// Update law at a vertex carrying `current` in a configuration with the
/// given counts.
pub fn update_probs_counts(m: &ModelSpec, counts: &[usize], current: usize) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    let nf = n as f64;
    let q = counts.len();
    let mut z: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
    z[current] -= 1.0 / nf;
    let base = z.clone();
    let mut logits = Vec::with_capacity(q);
    for k in 0..q {
        z.copy_from_slice(&base);
        z[k] += 1.0 / nf;
        logits.push(-m.beta * nf * m.energy(&z));
    }
    softmax(&logits)
}

pub fn general_update_probs(
    m: &ModelSpec,
    sigma: &Configuration,
    i: usize,
) -> Result<UpdateDistribution> {
    if sigma.q() != m.q() {
        return domain("configuration and model disagree on q");
    }
    if i >= sigma.n() {
        return domain(format!("vertex {i} out of range for n = {}", sigma.n()));
    }
    let counts = sigma.counts();
    Ok(UpdateDistribution { probs: update_probs_counts(m, counts.counts(), sigma.spin(i)) })
}

/// Limiting update law `softmax(-beta grad H(z))`.
pub fn g_vector(m: &ModelSpec, z: &SimplexPoint) -> Result<SimplexPoint> {
    m.check_point(z)?;
    Ok(SimplexPoint::from_raw(g_raw(m, z.coords())))
}

pub(crate) fn g_raw(m: &ModelSpec, z: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = m.energy_gradient(z).iter().map(|d| -m.beta * d).collect();
    softmax(&logits)
}

/// Jacobian `d g_k / d z_j` of the update-law map (Potts families, whose
/// energy has a diagonal Hessian).
pub fn g_jacobian(m: &ModelSpec, z: &[f64]) -> Result<Vec<Vec<f64>>> {
    m.require_potts()?;
    let g = g_raw(m, z);
    let curv = m.energy_curvature(z);
    let q = z.len();
    Ok((0..q)
        .map(|k| {
            (0..q)
                .map(|j| {
                    let delta = if k == j { 1.0 } else { 0.0 };
                    g[k] * (delta - g[j]) * (-m.beta * curv[j])
                })
                .collect()
        })
        .collect())
}

/// First-order correction `phi_{k, current}` of the update law.
pub fn expansion_correction(m: &ModelSpec, z: &[f64], current: usize) -> Result<Vec<f64>> {
    m.require_potts()?;
    let s = g_raw(m, z);
    let curv = m.energy_curvature(z);
    let mean_curv: f64 = s.iter().zip(&curv).map(|(a, b)| a * b).sum();
    Ok((0..z.len())
        .map(|k| {
            let delta = if k == current { 1.0 } else { 0.0 };
            -0.5 * s[k] * (curv[k] - mean_curv) + curv[current] * s[k] * (delta - s[current])
        })
        .collect())
}

/// `g(z) + (beta / n) phi_{., current}(z)`, the update law up to `O(1/n^2)`.
pub fn update_expansion(
    m: &ModelSpec,
    z: &SimplexPoint,
    current: usize,
    n: usize,
) -> Result<Vec<f64>> {
    m.check_point(z)?;
    if current >= m.q() || n == 0 {
        return domain("spin label or size out of range");
    }
    let g = g_raw(m, z.coords());
    let phi = expansion_correction(m, z.coords(), current)?;
    Ok(g.iter().zip(&phi).map(|(a, b)| a + m.beta / n as f64 * b).collect())
}

/// Counts recorded every `stride` steps of a simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub q: usize,
    pub steps: Vec<u64>,
    pub counts: Vec<Vec<usize>>,
    pub final_config: Configuration,
}

/// Simulates `steps` single-site updates from `initial`.
pub fn simulate_chain(
    m: &ModelSpec,
    initial: &Configuration,
    steps: u64,
    stride: u64,
    seed: u64,
) -> Result<Trajectory> {
    if initial.q() != m.q() || initial.n() == 0 {
        return domain("initial configuration does not match the model");
    }
    let stride = stride.max(1);
    let mut rng = rng::seeded(seed);
    let mut sigma = initial.clone();
    let mut counts = sigma.counts().counts().to_vec();
    let mut out = Trajectory {
        q: m.q(),
        steps: vec![0],
        counts: vec![counts.clone()],
        final_config: sigma.clone(),
    };
    let n = sigma.n();
    for t in 1..=steps {
        let i = rng.gen_range(0..n);
        let cur = sigma.spin(i);
        let p = update_probs_counts(m, &counts, cur);
        let next = UpdateDistribution { probs: p }.sample(rng.gen::<f64>());
        if next != cur {
            counts[cur] -= 1;
            counts[next] += 1;
            sigma.set_spin(i, next);
        }
        if t % stride == 0 {
            out.steps.push(t);
            out.counts.push(counts.clone());
        }
    }
    out.final_config = sigma;
    Ok(out)
}

/// Glauber dynamics projected onto spin counts, with its exact stationary
/// law.
#[derive(Debug, Clone)]
pub struct LumpedChain {
    pub model: ModelSpec,
    pub n: usize,
    /// States in lexicographic order of their counts.
    pub states: Vec<CountsVector>,
    pub p: Csr,
    pub pi: Vec<f64>,
    /// Natural log of `pi`, finite even where `pi` underflows.
    pub log_pi: Vec<f64>,
    index: HashMap<Vec<usize>, usize>,
}

pub fn lumped_chain_build(m: &ModelSpec, n: usize) -> Result<LumpedChain> {
    lumped_chain_build_capped(m, n, LUMPED_STATE_CAP)
}

pub fn lumped_chain_build_capped(m: &ModelSpec, n: usize, cap: usize) -> Result<LumpedChain> {
    if n == 0 {
        return domain("n must be positive");
    }
    let q = m.q();
    let count = composition_count(n, q);
    if count > cap as u128 {
        return Err(Error::SizeCap { states: count.min(usize::MAX as u128) as usize, cap });
    }
    let raw = compositions(n, q);
    let index: HashMap<Vec<usize>, usize> =
        raw.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    let nf = n as f64;

    let mut rows = Vec::with_capacity(raw.len());
    let mut next = vec![0usize; q];
    for (i, c) in raw.iter().enumerate() {
        let mut row = Vec::with_capacity(q * (q - 1) + 1);
        let mut stay = 0.0;
        for cur in 0..q {
            if c[cur] == 0 {
                continue;
            }
            let pick = c[cur] as f64 / nf;
            let law = update_probs_counts(m, c, cur);
            for (k, &pk) in law.iter().enumerate() {
                if k == cur {
                    stay += pick * pk;
                } else {
                    next.copy_from_slice(c);
                    next[cur] -= 1;
                    next[k] += 1;
                    row.push((index[&next], pick * pk));
                }
            }
        }
        row.push((i, stay));
        rows.push(row);
    }

    let mut log_fact = vec![0.0f64; n + 1];
    for k in 1..=n {
        log_fact[k] = log_fact[k - 1] + (k as f64).ln();
    }
    let logw: Vec<f64> = raw
        .iter()
        .map(|c| {
            let z: Vec<f64> = c.iter().map(|&x| x as f64 / nf).collect();
            log_fact[n] - c.iter().map(|&x| log_fact[x]).sum::<f64>() - m.beta * nf * m.energy(&z)
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pi: Vec<f64> = logw.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    let log_total = total.ln();
    let log_pi = logw.iter().map(|w| w - max - log_total).collect();

    let states = raw.into_iter().map(|c| CountsVector::new(c)).collect::<Result<Vec<_>>>()?;
    Ok(LumpedChain { model: *m, n, states, p: Csr::from_rows(rows), pi, log_pi, index })
}

impl LumpedChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, counts: &[usize]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    /// States with every vertex carrying one label.
    pub fn corner_states(&self) -> Vec<usize> {
        (0..self.model.q())
            .map(|label| {
                let mut c = vec![0; self.model.q()];
                c[label] = self.n;
                self.index[&c]
            })
            .collect()
    }

    /// Scalar used for threshold cuts: `n_plus - n_minus` for Blume-Capel,
    /// the count of label 0 otherwise.
    pub fn cut_statistic(&self, state: usize) -> i64 {
        let c = self.states[state].counts();
        match self.model.family {
            Family::BlumeCapel { .. } => c[2] as i64 - c[0] as i64,
            _ => c[0] as i64,
        }
    }

    pub fn row_sum_residual(&self) -> f64 {
        self.p.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `max |pi P - pi|`.
    pub fn stationarity_residual(&self) -> f64 {
        let mut out = vec![0.0; self.len()];
        self.p.mul_left(&self.pi, &mut out);
        out.iter().zip(&self.pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `max |pi_i P_ij - pi_j P_ji|`.
    pub fn reversibility_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let (cols, vals) = self.p.row(i);
            for (&j, &pij) in cols.iter().zip(vals) {
                let flow = self.pi[i] * pij - self.pi[j] * self.p.get(j, i);
                worst = worst.max(flow.abs());
            }
        }
        worst
    }
}
