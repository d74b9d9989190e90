use serde::Serialize;

use crate::equilibrium::{k1, kc2};
use crate::error::{domain, Error, Result};
use crate::model::BC_BETA_C;

/// `ceil((log diam - log eps) / delta)` for a chain contracting by `1 - delta`
/// between neighbours of a path metric.
pub fn classical_pc_bound(delta: f64, diam: u64, eps: f64) -> Result<u64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return domain(format!("contraction rate {delta} outside (0, 1]"));
    }
    if diam < 1 {
        return domain("diameter must be at least 1");
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return domain(format!("eps = {eps} outside (0, 1]"));
    }
    let v = ((diam as f64).ln() - eps.ln()) / delta;
    Ok(v.ceil().max(0.0) as u64)
}

/// Path-coupling bound for Glauber dynamics of the Ising model on the
/// `d`-dimensional torus with `n` vertices.
pub fn ising_torus_bound(d: u32, beta: f64, n: u64, eps: f64) -> Result<u64> {
    let t = beta.tanh();
    let rate = 1.0 - 2.0 * d as f64 * t;
    if !(beta >= 0.0) || rate <= 1e-12 {
        return Err(Error::Regime(format!(
            "tanh(beta) = {t} is not below 1/(2d) = {}",
            1.0 / (2.0 * d as f64)
        )));
    }
    if n < 1 || !(eps > 0.0 && eps <= 1.0) {
        return domain("need n >= 1 and eps in (0, 1]");
    }
    let nf = n as f64;
    Ok((nf * (d as f64 * nf.ln() - eps.ln()) / rate).ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RapidRegime {
    /// `beta <= ln 4` and `K < K_c2(beta)`.
    SecondOrder,
    /// `beta > ln 4` and `K < K_1(beta)`.
    Metastable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RapidBound {
    pub steps: u64,
    /// Rate used: half the supremum of the admissible interval.
    pub alpha: f64,
    pub regime: RapidRegime,
}

/// Blume-Capel rapid-mixing bound `(n / alpha)(log n + log(c / eps))` with
/// `c = 1` below `ln 4` and `c = 2` above.
pub fn bc_rapid_bound(beta: f64, k: f64, n: u64, eps: f64) -> Result<RapidBound> {
    bc_rapid_bound_with_diameter(beta, k, n, n as f64, eps)
}

/// Same bound with `log n` replaced by `log diam`; the absolute-difference
/// metric has diameter `2n`.
pub fn bc_rapid_bound_with_diameter(
    beta: f64,
    k: f64,
    n: u64,
    diam: f64,
    eps: f64,
) -> Result<RapidBound> {
    if !(beta > 0.0 && k > 0.0) || n < 1 || !(diam >= 1.0) || !(eps > 0.0 && eps <= 1.0) {
        return domain("need beta, K > 0, n >= 1, diam >= 1 and eps in (0, 1]");
    }
    let (critical, regime, c) = if beta <= BC_BETA_C {
        (kc2(beta).value, RapidRegime::SecondOrder, 1.0)
    } else {
        (k1(beta)?.k, RapidRegime::Metastable, 2.0)
    };
    if k >= critical {
        return Err(Error::Regime(format!(
            "K = {k} is not below the rapid-mixing threshold {critical} at beta = {beta}"
        )));
    }
    let alpha = 0.5 * (critical - k) / critical;
    let v = n as f64 / alpha * (diam.ln() + (c / eps).ln());
    Ok(RapidBound { steps: v.ceil() as u64, alpha, regime })
}
