use rand::Rng as _;
use serde::Serialize;

use super::{site_distance, CoupledState};
use crate::error::{domain, Result};
use crate::glauber::update_probs_counts;
use crate::model::{clgf_bc, Configuration, Derivative, ModelSpec};
use crate::rng;

/// Joint law of the two labels produced by one shared uniform: label `l`
/// occupies the `l`-th consecutive sub-interval of `[0, 1]`, in the order
/// `(-1, 0, +1)`.
pub fn bc_joint_table(p: &[f64], q: &[f64]) -> Vec<Vec<f64>> {
    let cuts = |v: &[f64]| {
        let mut c = vec![0.0];
        for x in v {
            c.push(c.last().unwrap() + x);
        }
        *c.last_mut().unwrap() = 1.0;
        c
    };
    let (a, b) = (cuts(p), cuts(q));
    let mut t = vec![vec![0.0; q.len()]; p.len()];
    for l in 0..p.len() {
        for m in 0..q.len() {
            t[l][m] = (a[l + 1].min(b[m + 1]) - a[l].max(b[m])).max(0.0);
        }
    }
    t
}

fn label_at(cuts: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (l, &p) in cuts.iter().enumerate() {
        acc += p;
        if u < acc {
            return l;
        }
    }
    cuts.len() - 1
}

pub(crate) fn shared_uniform_labels(p: &[f64], q: &[f64], u: f64) -> (usize, usize) {
    (label_at(p, u), label_at(q, u))
}

/// One step of the shared-uniform Blume-Capel coupling.
pub fn bc_coupling_step(
    beta: f64,
    k: f64,
    sigma: &Configuration,
    tau: &Configuration,
    seed: u64,
) -> Result<CoupledState> {
    let m = ModelSpec::blume_capel(beta, k)?;
    if sigma.n() != tau.n() || sigma.n() == 0 {
        return domain("coupled configurations need equal positive sizes");
    }
    let mut rng = rng::seeded(seed);
    let i = rng.gen_range(0..sigma.n());
    let p = update_probs_counts(&m, sigma.counts().counts(), sigma.spin(i));
    let q = update_probs_counts(&m, tau.counts().counts(), tau.spin(i));
    let (a, b) = shared_uniform_labels(&p, &q, rng.gen::<f64>());
    let mut x = sigma.clone();
    let mut y = tau.clone();
    x.set_spin(i, a);
    y.set_spin(i, b);
    CoupledState::new(&m, x, y)
}

/// Exact law of the distance after one coupled step; entry `d` is the
/// probability of distance `d`.
pub fn bc_next_distance_law(
    beta: f64,
    k: f64,
    sigma: &Configuration,
    tau: &Configuration,
) -> Result<Vec<f64>> {
    let m = ModelSpec::blume_capel(beta, k)?;
    let dist = super::path_metric(&m, sigma, tau)?;
    let n = sigma.n();
    let cs = sigma.counts();
    let ct = tau.counts();
    let mut law = vec![0.0; 2 * n + 1];
    let mut cache: [[Option<Vec<Vec<f64>>>; 3]; 3] = Default::default();
    for i in 0..n {
        let (a0, b0) = (sigma.spin(i), tau.spin(i));
        let table = cache[a0][b0].get_or_insert_with(|| {
            let p = update_probs_counts(&m, cs.counts(), a0);
            let q = update_probs_counts(&m, ct.counts(), b0);
            bc_joint_table(&p, &q)
        });
        let base = dist - site_distance(&m.family, a0, b0);
        for (a, row) in table.iter().enumerate() {
            for (b, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    law[base + a.abs_diff(b)] += w / n as f64;
                }
            }
        }
    }
    while law.len() > 1 && *law.last().unwrap() == 0.0 {
        law.pop();
    }
    Ok(law)
}

/// `p_{+1} - p_{-1}` as a function of the magnetization `x`.
pub fn update_gap_phi(beta: f64, k: f64, n: usize, x: f64) -> f64 {
    let a = 2.0 * beta * k * x / n as f64;
    let hold = beta - beta * k / n as f64;
    // divide through by e^{|a|} to keep large fields finite
    let e = (-2.0 * a.abs()).exp();
    let v = (1.0 - e) / (1.0 + e + (hold - a.abs()).exp());
    v.copysign(a)
}

/// Leading-order mean distance after one coupled step from neighbours, in
/// the `phi` form and the cumulant-derivative form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCouplingDistance {
    pub phi_form: f64,
    pub clgf_form: f64,
}

pub fn mean_coupling_distance_bc(
    beta: f64,
    k: f64,
    n: usize,
    s_sigma: i64,
    s_tau: i64,
) -> Result<MeanCouplingDistance> {
    if s_tau != s_sigma + 1 {
        return domain(format!("neighbours need S_tau = S_sigma + 1, got {s_sigma} and {s_tau}"));
    }
    if n < 2 || s_sigma.unsigned_abs() as usize > n || s_tau.unsigned_abs() as usize > n {
        return domain("magnetizations out of range");
    }
    let lead = (n as f64 - 1.0) / n as f64;
    let phi = |s: i64| update_gap_phi(beta, k, n, s as f64);
    let cp = |s: i64| clgf_bc(beta, 2.0 * beta * k * s as f64 / n as f64, Derivative::First);
    Ok(MeanCouplingDistance {
        phi_form: lead + lead * (phi(s_tau) - phi(s_sigma)),
        clgf_form: lead + lead * (cp(s_tau) - cp(s_sigma)),
    })
}
