//! Couplings of two Glauber chains, the path metrics they contract, Monte-Carlo
//! coupling times and the classical path-coupling bounds.
//!
//! Blume-Capel chains use the absolute-difference metric on spin values and
//! a shared-uniform coupling; the Potts families use the Hamming metric and the
//! greedy maximal coupling.

mod bc;
mod bounds;
mod greedy;
mod montecarlo;
mod shuffle;

pub use bc::{
    bc_coupling_step, bc_joint_table, bc_next_distance_law, mean_coupling_distance_bc,
    update_gap_phi, MeanCouplingDistance,
};
pub use bounds::{
    bc_rapid_bound, bc_rapid_bound_with_diameter, classical_pc_bound, ising_torus_bound,
    RapidBound, RapidRegime,
};
pub use greedy::{greedy_coupling_step, greedy_joint_table, miscouple_probability};
pub use montecarlo::{
    coupled_distance_trace, coupling_time_mc, sample_stationary_configuration,
    shuffle_coupling_times, CouplingTimes,
};
pub use shuffle::{inversion_distance, shuffle_step, ShuffleState};

use serde::Serialize;

use crate::error::{domain, Result};
use crate::model::{Configuration, Family, ModelSpec};

/// Pair of configurations with their cached path-metric distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledState {
    pub x: Configuration,
    pub y: Configuration,
    pub dist: usize,
}

impl CoupledState {
    pub fn new(m: &ModelSpec, x: Configuration, y: Configuration) -> Result<Self> {
        let dist = path_metric(m, &x, &y)?;
        Ok(Self { x, y, dist })
    }

    pub fn is_coupled(&self) -> bool {
        self.dist == 0
    }
}

/// Contribution of one vertex to the path metric.
pub(crate) fn site_distance(family: &Family, a: usize, b: usize) -> usize {
    match family {
        Family::BlumeCapel { .. } => a.abs_diff(b),
        _ => usize::from(a != b),
    }
}

/// `sum |sigma_j - tau_j|` on spin values for Blume-Capel, the number of
/// disagreeing vertices otherwise.
pub fn path_metric(m: &ModelSpec, x: &Configuration, y: &Configuration) -> Result<usize> {
    if x.n() != y.n() {
        return domain(format!("configurations have sizes {} and {}", x.n(), y.n()));
    }
    if x.q() != m.q() || y.q() != m.q() {
        return domain("configurations and model disagree on q");
    }
    Ok(x.spins()
        .iter()
        .zip(y.spins())
        .map(|(&a, &b)| site_distance(&m.family, a, b))
        .sum())
}

/// Largest value of the path metric on `n` vertices.
pub fn metric_diameter(m: &ModelSpec, n: usize) -> usize {
    match m.family {
        Family::BlumeCapel { .. } => 2 * n,
        _ => n,
    }
}
