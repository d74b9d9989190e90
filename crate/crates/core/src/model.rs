//! Model families, macroscopic state types and the generating functions
//! shared by every other module.
//!
//! Spin labels are 0-based indices `0..q`. For Blume-Capel the three labels
//! map to spin values `(-1, 0, +1)` in that order, so a Blume-Capel
//! proportion vector reads `(z_minus, z_zero, z_plus)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Spin value carried by each Blume-Capel label.
pub const BC_SPIN_VALUES: [i64; 3] = [-1, 0, 1];

/// Critical inverse temperature separating the second- and first-order
/// regimes of Blume-Capel.
pub const BC_BETA_C: f64 = 1.386_294_361_119_890_6; // ln 4

const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Curie-Weiss-Potts with `q` spin states.
    Cwp { q: usize },
    /// Generalized Curie-Weiss-Potts, `H(z) = -(1/r) sum z_k^r`.
    Gcwp { q: usize, r: f64 },
    /// Mean-field Blume-Capel with interaction strength `k`.
    BlumeCapel { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub beta: f64,
}

impl ModelSpec {
    pub fn new(family: Family, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return domain(format!("beta must be finite and non-negative, got {beta}"));
        }
        match family {
            Family::Cwp { q } if q < 2 => return domain(format!("q must be at least 2, got {q}")),
            Family::Gcwp { q, .. } if q < 2 => {
                return domain(format!("q must be at least 2, got {q}"))
            }
            Family::Gcwp { r, .. } if !(r.is_finite() && r >= 2.0) => {
                return domain(format!("r must be at least 2, got {r}"))
            }
            Family::BlumeCapel { k } if !(k.is_finite() && k > 0.0) => {
                return domain(format!("K must be positive, got {k}"))
            }
            _ => {}
        }
        Ok(Self { family, beta })
    }

    pub fn cwp(q: usize, beta: f64) -> Result<Self> {
        Self::new(Family::Cwp { q }, beta)
    }

    pub fn gcwp(q: usize, r: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Gcwp { q, r }, beta)
    }

    pub fn blume_capel(beta: f64, k: f64) -> Result<Self> {
        Self::new(Family::BlumeCapel { k }, beta)
    }

    /// Same family at another inverse temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.family, beta)
    }

    /// Number of single-site spin states.
    pub fn q(&self) -> usize {
        match self.family {
            Family::Cwp { q } | Family::Gcwp { q, .. } => q,
            Family::BlumeCapel { .. } => 3,
        }
    }

    pub fn is_blume_capel(&self) -> bool {
        matches!(self.family, Family::BlumeCapel { .. })
    }

    /// Interaction exponent `r` of the Potts-type families (2 for CWP).
    pub fn exponent(&self) -> Option<f64> {
        match self.family {
            Family::Cwp { .. } => Some(2.0),
            Family::Gcwp { r, .. } => Some(r),
            Family::BlumeCapel { .. } => None,
        }
    }

    pub(crate) fn require_potts(&self) -> Result<f64> {
        self.exponent()
            .ok_or_else(|| Error::Domain("operation needs a CWP or GCWP model".into()))
    }

    /// `H(z)` without validating `z`.
    pub fn energy(&self, z: &[f64]) -> f64 {
        match self.family {
            Family::Cwp { .. } => -0.5 * z.iter().map(|x| x * x).sum::<f64>(),
            Family::Gcwp { r, .. } => -z.iter().map(|x| x.powf(r)).sum::<f64>() / r,
            Family::BlumeCapel { k } => {
                let m = z[2] - z[0];
                z[0] + z[2] - k * m * m
            }
        }
    }

    pub fn energy_gradient(&self, z: &[f64]) -> Vec<f64> {
        match self.family {
            Family::Cwp { .. } => z.iter().map(|x| -x).collect(),
            Family::Gcwp { r, .. } => z.iter().map(|x| -x.powf(r - 1.0)).collect(),
            Family::BlumeCapel { k } => {
                let m = z[2] - z[0];
                vec![1.0 + 2.0 * k * m, 0.0, 1.0 - 2.0 * k * m]
            }
        }
    }

    /// Diagonal of the Hessian of `H`.
    pub fn energy_curvature(&self, z: &[f64]) -> Vec<f64> {
        match self.family {
            Family::Cwp { .. } => vec![-1.0; z.len()],
            Family::Gcwp { r, .. } => z.iter().map(|x| -(r - 1.0) * x.powf(r - 2.0)).collect(),
            Family::BlumeCapel { k } => vec![-2.0 * k, 0.0, -2.0 * k],
        }
    }

    pub(crate) fn check_point(&self, z: &SimplexPoint) -> Result<()> {
        if z.dim() != self.q() {
            return domain(format!(
                "point has {} coordinates, model has {} spin states",
                z.dim(),
                self.q()
            ));
        }
        Ok(())
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return domain("empty simplex point");
        }
        if coords.iter().any(|&c| !c.is_finite() || !(0.0..=1.0).contains(&c)) {
            return domain(format!("coordinates must lie in [0, 1]: {coords:?}"));
        }
        let s: f64 = coords.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return domain(format!("coordinates sum to {s}, not 1"));
        }
        Ok(Self { coords })
    }

    /// Rescales a non-negative vector onto the simplex.
    pub fn normalized(v: Vec<f64>) -> Result<Self> {
        let s: f64 = v.iter().sum();
        if v.iter().any(|&c| !c.is_finite() || c < 0.0) || s <= 0.0 {
            return domain(format!("cannot normalize {v:?}"));
        }
        Self::new(v.into_iter().map(|c| c / s).collect())
    }

    pub fn uniform(q: usize) -> Self {
        Self { coords: vec![1.0 / q as f64; q] }
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn l1_distance(&self, other: &SimplexPoint) -> f64 {
        l1(&self.coords, &other.coords)
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Spin counts of a configuration; `counts / n` is its empirical measure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CountsVector {
    counts: Vec<usize>,
}

impl CountsVector {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.len() < 2 {
            return domain("counts need at least two spin states");
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_simplex(&self) -> Result<SimplexPoint> {
        let n = self.n();
        if n == 0 {
            return domain("empty configuration has no empirical measure");
        }
        Ok(SimplexPoint::from_raw(
            self.counts.iter().map(|&c| c as f64 / n as f64).collect(),
        ))
    }
}

/// Spin assignment to `n` vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    spins: Vec<usize>,
    q: usize,
}

impl Configuration {
    pub fn new(spins: Vec<usize>, q: usize) -> Result<Self> {
        if q < 2 {
            return domain(format!("q must be at least 2, got {q}"));
        }
        if let Some(&s) = spins.iter().find(|&&s| s >= q) {
            return domain(format!("spin label {s} out of range for q = {q}"));
        }
        Ok(Self { spins, q })
    }

    /// Every vertex carries `label`.
    pub fn constant(n: usize, q: usize, label: usize) -> Result<Self> {
        Self::new(vec![label; n], q)
    }

    /// Block arrangement realising the given counts.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let spins = counts
            .iter()
            .enumerate()
            .flat_map(|(label, &c)| std::iter::repeat(label).take(c))
            .collect();
        Self::new(spins, counts.len())
    }

    pub fn spins(&self) -> &[usize] {
        &self.spins
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn spin(&self, i: usize) -> usize {
        self.spins[i]
    }

    pub fn set_spin(&mut self, i: usize, label: usize) {
        debug_assert!(label < self.q);
        self.spins[i] = label;
    }

    pub fn counts(&self) -> CountsVector {
        let mut counts = vec![0; self.q];
        for &s in &self.spins {
            counts[s] += 1;
        }
        CountsVector { counts }
    }

    /// Blume-Capel total magnetization `n_plus - n_minus`.
    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| BC_SPIN_VALUES[s]).sum()
    }
}

pub fn hamiltonian_density(m: &ModelSpec, z: &SimplexPoint) -> Result<f64> {
    m.check_point(z)?;
    Ok(m.energy(z.coords()))
}

pub fn grad_h(m: &ModelSpec, z: &SimplexPoint) -> Result<Vec<f64>> {
    m.check_point(z)?;
    Ok(m.energy_gradient(z.coords()))
}

pub fn q_operator(m: &ModelSpec, z: &SimplexPoint) -> Result<Vec<f64>> {
    m.check_point(z)?;
    Ok(m.energy_curvature(z.coords()))
}

/// `log((1/q) sum_k exp(x_k))`, evaluated with max-subtraction.
pub fn log_mgf_gamma(x: &[f64]) -> f64 {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = x.iter().map(|v| (v - max).exp()).sum();
    max + s.ln() - (x.len() as f64).ln()
}

/// Softmax with max-subtraction.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    First,
    Second,
}

/// Cumulant generating function of the Blume-Capel single-site measure
/// `exp(-beta w^2)` on `{-1, 0, 1}`, normalised so that it vanishes at 0.
pub fn clgf_bc(beta: f64, t: f64, order: Derivative) -> f64 {
    let a = t.abs();
    let e2 = (-2.0 * a).exp();
    match order {
        Derivative::Value => {
            let eb = (-beta).exp();
            let excess = (-a).exp_m1() + eb * (-2.0 * a).exp_m1();
            a + (excess / (1.0 + 2.0 * eb)).ln_1p()
        }
        Derivative::First => {
            let v = (1.0 - e2) / ((beta - a).exp() + 1.0 + e2);
            v.copysign(t)
        }
        Derivative::Second => {
            let den = (beta - a).exp() + 1.0 + e2;
            (beta.exp() * ((-a).exp() + (-3.0 * a).exp()) + 4.0 * e2) / (den * den)
        }
    }
}

const LEGENDRE_GRID: usize = 1 << 12;
const LEGENDRE_ROUNDS: usize = 2;

/// Numerical convex conjugate. `value` is `+inf` when the dual point lies
/// outside the closure of the sampled function's gradient range.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjugate {
    pub value: f64,
    pub argmax: Vec<f64>,
}

impl Conjugate {
    fn infinite() -> Self {
        Self { value: f64::INFINITY, argmax: Vec::new() }
    }

    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }
}

/// `sup_{x in [lo, hi]} (x y - f(x))` for convex `f`: a 4096-cell grid,
/// two rounds of local regridding around the best cell, then golden-section.
pub fn legendre_transform<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, y: f64) -> Conjugate {
    assert!(hi > lo, "empty interval");
    let h = (hi - lo) / LEGENDRE_GRID as f64;
    let slope_lo = (-3.0 * f(lo) + 4.0 * f(lo + h) - f(lo + 2.0 * h)) / (2.0 * h);
    let slope_hi = (3.0 * f(hi) - 4.0 * f(hi - h) + f(hi - 2.0 * h)) / (2.0 * h);
    let tol = 1e-9 * (1.0 + slope_lo.abs().max(slope_hi.abs()));
    if !(y >= slope_lo - tol && y <= slope_hi + tol) {
        return Conjugate::infinite();
    }

    let objective = |x: f64| x * y - f(x);
    let (mut a, mut b) = (lo, hi);
    let (mut best_x, mut best) = (lo, objective(lo));
    for _ in 0..=LEGENDRE_ROUNDS {
        let step = (b - a) / LEGENDRE_GRID as f64;
        for i in 0..=LEGENDRE_GRID {
            let x = if i == LEGENDRE_GRID { b } else { a + i as f64 * step };
            let v = objective(x);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        a = (best_x - step).max(lo);
        b = (best_x + step).min(hi);
    }
    let (x, v) = crate::optimize::golden_max(objective, a, b, 1e-14 * (1.0 + best_x.abs()));
    if v > best {
        best = v;
        best_x = x;
    }
    Conjugate { value: best, argmax: vec![best_x] }
}

/// Conjugate of a separable convex function `sum_j f_j(x_j)` on a box.
pub fn legendre_transform_separable(
    parts: &[(&dyn Fn(f64) -> f64, f64, f64)],
    y: &[f64],
) -> Conjugate {
    assert_eq!(parts.len(), y.len());
    let mut value = 0.0;
    let mut argmax = Vec::with_capacity(y.len());
    for (&(f, lo, hi), &yj) in parts.iter().zip(y) {
        let c = legendre_transform(f, lo, hi, yj);
        if c.is_infinite() {
            return Conjugate::infinite();
        }
        value += c.value;
        argmax.push(c.argmax[0]);
    }
    Conjugate { value, argmax }
}
