//! Free-energy functionals, rate functions, equilibrium macrostates and the
//! critical parameter values of the three model families.
//!
//! Blume-Capel quantities are functions of the scalar magnetization
//! `z in [-1, 1]`; the Potts-type families live on the probability simplex.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{
    clgf_bc, legendre_transform, legendre_transform_separable, log_mgf_gamma, Conjugate,
    Derivative, ModelSpec, SimplexPoint, BC_BETA_C,
};
use crate::optimize::{
    bisect_predicate, bisect_root, compositions, golden_min, scalar_local_minima,
    simplex_local_minima,
};

/// Grid spacing for scalar global minimizations.
pub const SCALAR_MESH: f64 = 1e-3;
/// Spacing used by the spinodal scan.
pub const SPINODAL_MESH: f64 = 5e-3;
const MIGRATION_TOL: f64 = 1e-10;
const GLOBAL_TIE_TOL: f64 = 1e-9;

fn clgf_horizon(beta: f64) -> f64 {
    50.0 + beta
}

/// `G(z) = beta K z^2 - c(2 beta K z)`.
pub fn free_energy_bc(beta: f64, k: f64, z: f64) -> f64 {
    beta * k * z * z - clgf_bc(beta, 2.0 * beta * k * z, Derivative::Value)
}

/// Legendre conjugate of the Blume-Capel cumulant function at `z`.
pub fn bc_conjugate(beta: f64, z: f64) -> Conjugate {
    let t = clgf_horizon(beta);
    legendre_transform(|s| clgf_bc(beta, s, Derivative::Value), -t, t, z)
}

/// Blume-Capel rate function with its infimum computed once.
#[derive(Debug, Clone)]
pub struct BcRateFunction {
    beta: f64,
    k: f64,
    infimum: f64,
}

impl BcRateFunction {
    pub fn new(beta: f64, k: f64) -> Result<Self> {
        check_bc(beta, k)?;
        let unshifted = |y: f64| bc_conjugate(beta, y).value - beta * k * y * y;
        let minima = scalar_local_minima(unshifted, -1.0, 1.0, 5e-3);
        let infimum = minima[0].1;
        Ok(Self { beta, k, infimum })
    }

    pub fn infimum(&self) -> f64 {
        self.infimum
    }

    pub fn eval(&self, z: f64) -> f64 {
        let v = bc_conjugate(self.beta, z).value - self.beta * self.k * z * z - self.infimum;
        if v < 0.0 && v > -1e-9 {
            0.0
        } else {
            v
        }
    }

    /// Local minimizers on `[-1, 1]`, sorted by value.
    pub fn local_minimizers(&self, mesh: f64) -> Vec<(f64, f64)> {
        scalar_local_minima(|z| self.eval(z), -1.0, 1.0, mesh)
    }
}

pub fn rate_function_bc(beta: f64, k: f64, z: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&z) {
        return domain(format!("magnetization {z} outside [-1, 1]"));
    }
    Ok(BcRateFunction::new(beta, k)?.eval(z))
}

/// Local minimizers of the Blume-Capel free energy on `[-1, 1]`.
pub fn bc_free_energy_local_minimizers(beta: f64, k: f64, mesh: f64) -> Vec<(f64, f64)> {
    scalar_local_minima(|z| free_energy_bc(beta, k, z), -1.0, 1.0, mesh)
}

fn check_bc(beta: f64, k: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    if !(k > 0.0 && k.is_finite()) {
        return domain(format!("K must be positive, got {k}"));
    }
    Ok(())
}

/// Relative entropy of `z` with respect to the uniform measure, `0 log 0 = 0`.
pub fn relative_entropy_uniform(z: &[f64]) -> f64 {
    let q = z.len() as f64;
    z.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * (q * x).ln())
        .sum()
}

/// `R(z | uniform) + beta H(z)`: the functional whose minimizers are the
/// equilibrium macrostates.
pub fn entropy_energy(m: &ModelSpec, z: &[f64]) -> f64 {
    relative_entropy_uniform(z) + m.beta * m.energy(z)
}

/// Free energy `beta (-H)^*(-grad H(z)) - Gamma(-beta grad H(z))` with the
/// conjugate computed numerically on the unit box.
pub fn free_energy_general(m: &ModelSpec, z: &SimplexPoint) -> Result<f64> {
    m.check_point(z)?;
    free_energy_general_raw(m, z.coords())
}

pub(crate) fn free_energy_general_raw(m: &ModelSpec, z: &[f64]) -> Result<f64> {
    let r = m.require_potts()?;
    let dual: Vec<f64> = m.energy_gradient(z).iter().map(|g| -g).collect();
    let part = move |x: f64| x.powf(r) / r;
    let parts: Vec<(&dyn Fn(f64) -> f64, f64, f64)> =
        (0..z.len()).map(|_| (&part as &dyn Fn(f64) -> f64, 0.0, 1.0)).collect();
    let conj = legendre_transform_separable(&parts, &dual);
    if conj.is_infinite() {
        return Err(Error::Domain(format!("conjugate is infinite at {dual:?}")));
    }
    let scaled: Vec<f64> = dual.iter().map(|y| m.beta * y).collect();
    Ok(m.beta * conj.value - log_mgf_gamma(&scaled))
}

/// Simplex lattice resolution used for global minimizations with `q` states.
pub fn simplex_divisions(q: usize) -> usize {
    match q {
        2 => 1000,
        3 => 200,
        _ => 50,
    }
}

/// Potts-family rate function with its infimum computed once.
#[derive(Debug, Clone)]
pub struct PottsRateFunction {
    model: ModelSpec,
    infimum: f64,
}

impl PottsRateFunction {
    pub fn new(m: &ModelSpec) -> Result<Self> {
        m.require_potts()?;
        let f = |z: &[f64]| entropy_energy(m, z);
        let minima = simplex_local_minima(m.q(), simplex_divisions(m.q()), &f);
        Ok(Self { model: *m, infimum: minima[0].1 })
    }

    pub fn infimum(&self) -> f64 {
        self.infimum
    }

    pub fn eval(&self, z: &SimplexPoint) -> Result<f64> {
        self.model.check_point(z)?;
        let v = entropy_energy(&self.model, z.coords()) - self.infimum;
        Ok(if v < 0.0 && v > -1e-9 { 0.0 } else { v })
    }
}

pub fn rate_function_general(m: &ModelSpec, z: &SimplexPoint) -> Result<f64> {
    PottsRateFunction::new(m)?.eval(z)
}

/// Global minimizers of the equilibrium functional at one parameter point.
///
/// Blume-Capel minimizers are stored as one-element vectors holding the
/// magnetization; Potts minimizers are full proportion vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    pub beta: f64,
    pub k: Option<f64>,
    pub minimizers: Vec<Vec<f64>>,
    pub min_value: f64,
    /// All polished local minima (value-sorted), including the global ones.
    pub local_minima: Vec<(Vec<f64>, f64)>,
    pub mesh: f64,
}

impl PhasePoint {
    pub fn is_single_phase(&self) -> bool {
        self.minimizers.len() == 1
    }
}

pub fn equilibrium_macrostates(m: &ModelSpec) -> Result<PhasePoint> {
    let (local, k, mesh) = match m.family {
        crate::model::Family::BlumeCapel { k } => {
            check_bc(m.beta, k)?;
            let minima = bc_free_energy_local_minimizers(m.beta, k, SCALAR_MESH);
            (
                minima.into_iter().map(|(z, v)| (vec![z], v)).collect::<Vec<_>>(),
                Some(k),
                SCALAR_MESH,
            )
        }
        _ => {
            let q = m.q();
            let divisions = simplex_divisions(q);
            let f = |z: &[f64]| entropy_energy(m, z);
            (simplex_local_minima(q, divisions, &f), None, 1.0 / divisions as f64)
        }
    };
    let min_value = local[0].1;
    let tie = GLOBAL_TIE_TOL * (1.0 + min_value.abs());
    let minimizers = local
        .iter()
        .filter(|(_, v)| *v <= min_value + tie)
        .map(|(z, _)| z.clone())
        .collect();
    Ok(PhasePoint { beta: m.beta, k, minimizers, min_value, local_minima: local, mesh })
}

/// Closed-form value with a flag telling whether the formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeValue {
    pub value: f64,
    pub in_regime: bool,
}

/// Second-order critical interaction `(e^beta + 2) / (4 beta)`.
pub fn kc2(beta: f64) -> RegimeValue {
    RegimeValue {
        value: (beta.exp() + 2.0) / (4.0 * beta),
        in_regime: beta > 0.0 && beta <= BC_BETA_C,
    }
}

/// Critical interaction together with the magnetization where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalInteraction {
    pub k: f64,
    pub z: f64,
    /// Largest absolute solver residual at `(k, z)`.
    pub residual: f64,
}

fn require_first_order(beta: f64) -> Result<()> {
    if !(beta > BC_BETA_C && beta.is_finite()) {
        return Err(Error::Regime(format!(
            "beta = {beta} does not exceed ln 4; no metastable regime"
        )));
    }
    Ok(())
}

/// Interaction at which a positive critical point `z = c'(w)` exists,
/// parametrised by `w = 2 beta K z`.
fn interaction_of(beta: f64, w: f64) -> f64 {
    w / (2.0 * beta * clgf_bc(beta, w, Derivative::First))
}

fn fold_point(beta: f64) -> Result<f64> {
    let h = |w: f64| clgf_bc(beta, w, Derivative::First) - w * clgf_bc(beta, w, Derivative::Second);
    let mut lo = 1e-2;
    if h(lo) >= 0.0 {
        return Err(Error::NoConvergence(format!(
            "fold of the critical-point curve not resolved at beta = {beta}"
        )));
    }
    let mut hi = lo;
    while h(hi) < 0.0 {
        lo = hi;
        hi += 1e-2;
        if hi > 500.0 {
            return Err(Error::NoConvergence("fold search left [0, 500]".into()));
        }
    }
    bisect_root(h, lo, hi, 1e-15)
}

/// Free-energy first and second derivatives at `z`.
pub fn free_energy_bc_derivatives(beta: f64, k: f64, z: f64) -> (f64, f64) {
    let a = 2.0 * beta * k;
    let first = a * z - a * clgf_bc(beta, a * z, Derivative::First);
    let second = a - a * a * clgf_bc(beta, a * z, Derivative::Second);
    (first, second)
}

/// Smallest interaction at which the free energy acquires a positive double
/// critical point (`G' = G'' = 0`).
pub fn k1(beta: f64) -> Result<CriticalInteraction> {
    require_first_order(beta)?;
    let w = fold_point(beta)?;
    let k = interaction_of(beta, w);
    let z = clgf_bc(beta, w, Derivative::First);
    let (d1, d2) = free_energy_bc_derivatives(beta, k, z);
    Ok(CriticalInteraction { k, z, residual: d1.abs().max(d2.abs()) })
}

/// Interaction at which the positive local minimum of the free energy
/// reaches the value at the origin.
pub fn kc1(beta: f64) -> Result<CriticalInteraction> {
    require_first_order(beta)?;
    let fold = fold_point(beta)?;
    // free-energy value along the branch of positive local minima
    let branch = |w: f64| {
        0.5 * w * clgf_bc(beta, w, Derivative::First) - clgf_bc(beta, w, Derivative::Value)
    };
    if branch(fold) <= 0.0 {
        return Err(Error::NoConvergence("metastable branch starts below zero".into()));
    }
    let mut hi = fold + 1.0;
    while branch(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::NoConvergence("first-order search diverged".into()));
        }
    }
    let w = bisect_root(branch, fold, hi, 1e-15)?;
    let k = interaction_of(beta, w);
    let z = clgf_bc(beta, w, Derivative::First);
    let (zmin, vmin) = golden_min(|x| free_energy_bc(beta, k, x), z - 0.05, (z + 0.05).min(1.0), 1e-13);
    debug_assert!((zmin - z).abs() < 1e-5);
    Ok(CriticalInteraction { k, z, residual: vmin.abs() })
}

/// Point where `c'` changes from convex to concave on the positive axis.
pub fn wc(beta: f64) -> Result<f64> {
    let arg = 0.5 * beta.exp() - 4.0 * (-beta).exp();
    if !(arg >= 1.0) {
        return domain(format!("cosh argument {arg} < 1 at beta = {beta}"));
    }
    Ok(arg.acosh())
}

/// Right-hand side of the symmetric mean-field equation `u = rhs(u)`.
pub fn mean_field_rhs(q: usize, r: f64, beta: f64, u: f64) -> f64 {
    let qf = q as f64;
    let delta = -(beta / qf.powf(r - 1.0))
        * ((1.0 + (qf - 1.0) * u).powf(r - 1.0) - (1.0 - u).powf(r - 1.0));
    let e = delta.exp();
    (1.0 - e) / (1.0 + (qf - 1.0) * e)
}

/// Critical inverse temperature with the final bisection bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalBeta {
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CriticalBeta {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_potts_params(q: usize, r: f64) -> Result<()> {
    if q < 2 {
        return domain(format!("q must be at least 2, got {q}"));
    }
    if !(r >= 2.0 && r.is_finite()) {
        return domain(format!("r must be at least 2, got {r}"));
    }
    Ok(())
}

/// How far below the uniform point the global minimum of the equilibrium
/// functional lies (zero while the uniform point is the global minimizer).
pub fn migration_gap(q: usize, r: f64, beta: f64) -> f64 {
    let m = ModelSpec { family: crate::model::Family::Gcwp { q, r }, beta };
    let f = |z: &[f64]| entropy_energy(&m, z);
    let minima = simplex_local_minima(q, simplex_divisions(q), &f);
    let at_uniform = f(SimplexPoint::uniform(q).coords());
    (at_uniform - minima[0].1).max(0.0)
}

/// Smallest inverse temperature at which the global minimizer leaves the
/// uniform point.
pub fn beta_c_gcwp(q: usize, r: f64) -> Result<CriticalBeta> {
    check_potts_params(q, r)?;
    let migrated = |b: f64| migration_gap(q, r, b) > MIGRATION_TOL;
    let mut hi = 1.0;
    while !migrated(hi) {
        hi *= 2.0;
        if hi > 4096.0 {
            return Err(Error::NoConvergence(format!(
                "no migration found in [0, {hi}] for q = {q}, r = {r}"
            )));
        }
    }
    let (lower, upper) = bisect_predicate(|b| !migrated(b), 0.0, hi, 1e-6);
    Ok(CriticalBeta { beta: upper, lower, upper })
}

/// Outcome of the spinodal scan at one inverse temperature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinodalScan {
    /// `max (g_1(z) - z_1)` over grid points with `z_1 > 1/q`.
    pub max_excess: f64,
    pub witness: Vec<f64>,
}

fn spinodal_points(q: usize, mesh: f64) -> Vec<Vec<f64>> {
    let divisions = (1.0 / mesh).round() as usize;
    let threshold = 1.0 / q as f64 + 1e-12;
    compositions(divisions, q)
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / divisions as f64).collect::<Vec<_>>())
        .filter(|z| z[0] > threshold)
        .collect()
}

fn first_update_weight(beta: f64, r: f64, z: &[f64]) -> f64 {
    let a: Vec<f64> = z.iter().map(|x| beta * x.powf(r - 1.0)).collect();
    let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = a.iter().map(|v| (v - max).exp()).sum();
    (a[0] - max).exp() / s
}

fn scan_points(points: &[Vec<f64>], beta: f64, r: f64) -> SpinodalScan {
    let (max_excess, idx) = points
        .par_iter()
        .enumerate()
        .map(|(i, z)| (first_update_weight(beta, r, z) - z[0], i))
        .reduce(|| (f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a });
    SpinodalScan { max_excess, witness: points.get(idx).cloned().unwrap_or_default() }
}

pub fn spinodal_scan(q: usize, r: f64, beta: f64, mesh: f64) -> Result<SpinodalScan> {
    check_potts_params(q, r)?;
    Ok(scan_points(&spinodal_points(q, mesh), beta, r))
}

/// Largest inverse temperature at which `g_1(z) < z_1` on every grid point
/// with `z_1 > 1/q`.
pub fn beta_s(q: usize, r: f64) -> Result<CriticalBeta> {
    check_potts_params(q, r)?;
    let points = spinodal_points(q, SPINODAL_MESH);
    let holds = |b: f64| scan_points(&points, b, r).max_excess < 0.0;
    let mut hi = 1.0;
    let mut lo = 0.0;
    while holds(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 4096.0 {
            return Err(Error::NoConvergence("spinodal bracket search diverged".into()));
        }
    }
    let (lower, upper) = bisect_predicate(holds, lo, hi, 1e-5);
    Ok(CriticalBeta { beta: lower, lower, upper })
}

/// Contraction ratio of the update-law map at the uniform point.
pub fn local_contraction_limit(q: usize, r: f64, beta: f64) -> f64 {
    beta * (r - 1.0) * (q as f64).powf(1.0 - r)
}

/// Table row of critical values for one parameter point.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CriticalValues {
    pub kc2: Option<f64>,
    pub k1: Option<f64>,
    pub kc1: Option<f64>,
    pub wc: Option<f64>,
    pub beta_c: Option<f64>,
    pub beta_s: Option<f64>,
    pub residuals: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

/// Blume-Capel critical interactions at one inverse temperature; solver
/// failures are recorded in `notes`.
pub fn bc_critical_values(beta: f64) -> CriticalValues {
    let mut out = CriticalValues::default();
    let second = kc2(beta);
    out.kc2 = Some(second.value);
    if !second.in_regime {
        out.notes.push("kc2 formula outside its regime".into());
    }
    if beta > BC_BETA_C {
        match k1(beta) {
            Ok(c) => {
                out.k1 = Some(c.k);
                out.residuals.insert("k1".into(), c.residual);
            }
            Err(e) => out.notes.push(format!("k1: {e}")),
        }
        match kc1(beta) {
            Ok(c) => {
                out.kc1 = Some(c.k);
                out.residuals.insert("kc1".into(), c.residual);
            }
            Err(e) => out.notes.push(format!("kc1: {e}")),
        }
    }
    match wc(beta) {
        Ok(w) => out.wc = Some(w),
        Err(_) if beta < BC_BETA_C => {}
        Err(e) => out.notes.push(format!("wc: {e}")),
    }
    out
}

pub fn potts_critical_values(q: usize, r: f64) -> CriticalValues {
    let mut out = CriticalValues::default();
    match beta_c_gcwp(q, r) {
        Ok(c) => {
            out.beta_c = Some(c.beta);
            out.residuals.insert("beta_c".into(), c.width());
        }
        Err(e) => out.notes.push(format!("beta_c: {e}")),
    }
    match beta_s(q, r) {
        Ok(c) => {
            out.beta_s = Some(c.beta);
            out.residuals.insert("beta_s".into(), c.width());
        }
        Err(e) => out.notes.push(format!("beta_s: {e}")),
    }
    out
}
