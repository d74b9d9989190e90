use rand::Rng as _;

use super::CoupledState;
use crate::error::{domain, Result};
use crate::glauber::update_probs_counts;
use crate::model::{Configuration, ModelSpec};
use crate::rng;

/// Joint law of the two updated labels: both chains take label `l` with
/// probability `min(p_l, q_l)`; otherwise they draw independently from the
/// normalised residuals.
pub fn greedy_joint_table(p: &[f64], q: &[f64]) -> Vec<Vec<f64>> {
    assert_eq!(p.len(), q.len());
    let common: Vec<f64> = p.iter().zip(q).map(|(a, b)| a.min(*b)).collect();
    let rest_p: Vec<f64> = p.iter().zip(&common).map(|(a, c)| a - c).collect();
    let rest_q: Vec<f64> = q.iter().zip(&common).map(|(a, c)| a - c).collect();
    let miss: f64 = rest_p.iter().sum();
    let k = p.len();
    let mut table = vec![vec![0.0; k]; k];
    for l in 0..k {
        table[l][l] = common[l];
        if miss > 0.0 {
            for m in 0..k {
                table[l][m] += rest_p[l] * rest_q[m] / miss;
            }
        }
    }
    table
}

/// `1 - sum_l min(p_l, q_l)`.
pub fn miscouple_probability(p: &[f64], q: &[f64]) -> f64 {
    1.0 - p.iter().zip(q).map(|(a, b)| a.min(*b)).sum::<f64>()
}

pub(crate) fn sample_joint(table: &[Vec<f64>], u: f64) -> (usize, usize) {
    let mut acc = 0.0;
    let mut last = (0, 0);
    for (l, row) in table.iter().enumerate() {
        for (m, &w) in row.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = (l, m);
            if u < acc {
                return (l, m);
            }
        }
    }
    last
}

/// One step of the greedy coupling: a shared uniformly chosen vertex, both
/// spins drawn from the joint table.
pub fn greedy_coupling_step(
    m: &ModelSpec,
    sigma: &Configuration,
    tau: &Configuration,
    seed: u64,
) -> Result<CoupledState> {
    if sigma.n() != tau.n() || sigma.n() == 0 {
        return domain("coupled configurations need equal positive sizes");
    }
    let mut rng = rng::seeded(seed);
    let i = rng.gen_range(0..sigma.n());
    let p = update_probs_counts(m, sigma.counts().counts(), sigma.spin(i));
    let q = update_probs_counts(m, tau.counts().counts(), tau.spin(i));
    let (a, b) = sample_joint(&greedy_joint_table(&p, &q), rng.gen::<f64>());
    let mut x = sigma.clone();
    let mut y = tau.clone();
    x.set_spin(i, a);
    y.set_spin(i, b);
    CoupledState::new(m, x, y)
}
