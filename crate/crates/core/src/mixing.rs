//! Exact mixing profiles of lumped chains, spectral gaps, bottleneck
//! conductance and growth fits of mixing times against `n`.
//!
//! Distributions are evolved in blocks of starts stored state-major, so one
//! pass over the sparse matrix advances every start in the block.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::glauber::{lumped_chain_build, LumpedChain};
use crate::model::ModelSpec;
use crate::optimize::{composition_count, compositions};
use crate::rng;
use crate::sparse::Csr;

/// Above this many states the maximum over starts uses corners and a coarse
/// lattice only.
pub const FULL_START_LIMIT: usize = 5000;
/// Up to this many starts `dbar` is the exact maximum over all pairs.
pub const EXACT_DBAR_LIMIT: usize = 150;
/// Largest chain for which the dense symmetric eigensolver is used.
pub const DENSE_EIGEN_LIMIT: usize = 1000;
/// Largest chain for which mixing times fall back to dense matrix powers.
pub const DENSE_POWER_LIMIT: usize = 1200;
/// Starts evolved together in one block.
const BLOCK: usize = 32;
/// Starts paired against every other start when `dbar` is approximated.
const DBAR_LEADERS: usize = 4;
const LANCZOS_MAX: usize = 1500;
const LANCZOS_TOL: f64 = 1e-11;
const LANCZOS_SEED: u64 = 0x6c61_6e63;
/// Below this gap `1 - lambda_2` loses too many digits and the gap is
/// recomputed from the generator.
const GAP_REFINE_BELOW: f64 = 1e-6;
const INVERSE_ITERS: usize = 200;

/// Total-variation distance between two probability vectors.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return domain(format!("lengths {} and {} differ", mu.len(), nu.len()));
    }
    for (name, v) in [("mu", mu), ("nu", nu)] {
        if v.iter().any(|&x| !(x >= -1e-12)) {
            return domain(format!("{name} has a negative or NaN entry"));
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return domain(format!("{name} sums to {s}"));
        }
    }
    Ok(0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingOptions {
    pub full_start_limit: usize,
    pub exact_dbar_limit: usize,
    /// Track `dbar(t)`; needs every start held in memory at once.
    pub track_dbar: bool,
    /// Iteration stops once `d(t) < stop_factor * min(eps)`.
    pub stop_factor: f64,
    pub spectral: bool,
}

impl Default for MixingOptions {
    fn default() -> Self {
        Self {
            full_start_limit: FULL_START_LIMIT,
            exact_dbar_limit: EXACT_DBAR_LIMIT,
            track_dbar: true,
            stop_factor: 0.1,
            spectral: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingProfile {
    pub n: usize,
    pub model: ModelSpec,
    pub states: usize,
    /// `d(t)` and `dbar(t)` for `t = 0, 1, ..., d.len() - 1`.
    pub d: Vec<f64>,
    pub dbar: Option<Vec<f64>>,
    pub eps: Vec<f64>,
    /// `None` when `d` had not dropped below that `eps` by `t_max`.
    pub t_mix: Vec<Option<u64>>,
    pub censored: bool,
    pub starts: usize,
    /// Maximum over starts restricted to corners and a coarse lattice.
    pub approximate_starts: bool,
    /// `dbar` maximised over pairs involving the leading starts only.
    pub approximate_dbar: bool,
    pub spectral_gap: Option<f64>,
    pub relaxation_time: Option<f64>,
}

impl MixingProfile {
    pub fn t_mix_at(&self, eps: f64) -> Option<u64> {
        self.d.iter().position(|&d| d <= eps).map(|t| t as u64)
    }
}

fn check_eps(eps_list: &[f64]) -> Result<f64> {
    if eps_list.is_empty() {
        return domain("eps list is empty");
    }
    if let Some(e) = eps_list.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return domain(format!("eps = {e} outside (0, 1)"));
    }
    Ok(eps_list.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Corners plus the points of a coarse simplex lattice rounded to counts.
fn lattice_starts(chain: &LumpedChain) -> Vec<usize> {
    let q = chain.model.q();
    let mut level = 1;
    while composition_count(level, q) < 15 {
        level += 1;
    }
    let mut out = chain.corner_states();
    for c in compositions(level, q) {
        let mut counts: Vec<usize> = c.iter().map(|&x| x * chain.n / level).collect();
        let short = chain.n - counts.iter().sum::<usize>();
        let top = (0..q).max_by_key(|&i| c[i]).unwrap();
        counts[top] += short;
        if let Some(i) = chain.index_of(&counts) {
            if !out.contains(&i) {
                out.push(i);
            }
        }
    }
    out
}

fn choose_starts(chain: &LumpedChain, limit: usize) -> (Vec<usize>, bool) {
    if chain.len() <= limit {
        ((0..chain.len()).collect(), false)
    } else {
        (lattice_starts(chain), true)
    }
}

/// Point masses at `starts`, stored as `mass[state * width + k]`.
struct Block {
    width: usize,
    cur: Vec<f64>,
    next: Vec<f64>,
}

impl Block {
    fn new(dim: usize, starts: &[usize]) -> Self {
        let width = starts.len();
        let mut cur = vec![0.0; dim * width];
        for (k, &s) in starts.iter().enumerate() {
            cur[s * width + k] = 1.0;
        }
        Self { width, cur, next: vec![0.0; dim * width] }
    }

    fn step(&mut self, p: &Csr) {
        let w = self.width;
        self.next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..p.dim() {
            let src = &self.cur[i * w..(i + 1) * w];
            let (cols, vals) = p.row(i);
            for (&j, &pij) in cols.iter().zip(vals) {
                let dst = &mut self.next[j * w..(j + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += pij * s;
                }
            }
        }
        std::mem::swap(&mut self.cur, &mut self.next);
    }

    fn tv_to(&self, pi: &[f64], out: &mut [f64]) {
        let w = self.width;
        out.iter_mut().for_each(|x| *x = 0.0);
        for (j, &pj) in pi.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(&self.cur[j * w..(j + 1) * w]) {
                *o += (m - pj).abs();
            }
        }
        out.iter_mut().for_each(|x| *x *= 0.5);
    }

    fn tv_pair(&self, a: usize, b: usize) -> f64 {
        let w = self.width;
        0.5 * self.cur.chunks_exact(w).map(|row| (row[a] - row[b]).abs()).sum::<f64>()
    }
}

/// `d(t) = max_x ||P^t(x, .) - pi||` and `dbar(t) = max_{x,y} ||P^t(x, .) - P^t(y, .)||`
/// up to `t_max` or until `d` falls below `stop_factor * min(eps)`.
pub fn mixing_profile(chain: &LumpedChain, t_max: u64, eps_list: &[f64]) -> Result<MixingProfile> {
    mixing_profile_with(chain, t_max, eps_list, &MixingOptions::default())
}

pub fn mixing_profile_with(
    chain: &LumpedChain,
    t_max: u64,
    eps_list: &[f64],
    opts: &MixingOptions,
) -> Result<MixingProfile> {
    let eps_min = check_eps(eps_list)?;
    let stop = opts.stop_factor * eps_min;
    let (starts, approximate_starts) = choose_starts(chain, opts.full_start_limit);

    let (d, dbar, approximate_dbar) = if opts.track_dbar {
        joint_profile(chain, &starts, t_max, stop, opts.exact_dbar_limit)
    } else {
        (blockwise_profile(chain, &starts, t_max, stop), None, false)
    };
    let t_mix = eps_list
        .iter()
        .map(|&e| d.iter().position(|&x| x <= e).map(|t| t as u64))
        .collect::<Vec<_>>();
    let censored = t_mix.iter().any(Option::is_none);

    let (spectral_gap, relaxation_time) = if opts.spectral {
        let s = spectral_gap(chain)?;
        (Some(s.gap), Some(s.relaxation_time))
    } else {
        (None, None)
    };
    Ok(MixingProfile {
        n: chain.n,
        model: chain.model,
        states: chain.len(),
        d,
        dbar,
        eps: eps_list.to_vec(),
        t_mix,
        censored,
        starts: starts.len(),
        approximate_starts,
        approximate_dbar,
        spectral_gap,
        relaxation_time,
    })
}

/// All starts evolved together so `dbar` can be read off at every step.
fn joint_profile(
    chain: &LumpedChain,
    starts: &[usize],
    t_max: u64,
    stop: f64,
    exact_limit: usize,
) -> (Vec<f64>, Option<Vec<f64>>, bool) {
    let s = starts.len();
    let mut block = Block::new(chain.len(), starts);
    let mut dx = vec![0.0; s];
    let exact = s <= exact_limit;
    let mut d = Vec::new();
    let mut dbar = Vec::new();
    let mut t = 0;
    loop {
        block.tv_to(&chain.pi, &mut dx);
        let dt = dx.iter().cloned().fold(0.0, f64::max);
        let pairs = if exact {
            (0..s)
                .flat_map(|a| ((a + 1)..s).map(move |b| (a, b)))
                .map(|(a, b)| block.tv_pair(a, b))
                .fold(0.0, f64::max)
        } else {
            let mut order: Vec<usize> = (0..s).collect();
            order.sort_by(|&a, &b| dx[b].total_cmp(&dx[a]));
            order[..DBAR_LEADERS.min(s)]
                .iter()
                .flat_map(|&a| (0..s).map(move |b| (a, b)))
                .filter(|&(a, b)| a != b)
                .map(|(a, b)| block.tv_pair(a, b))
                .fold(0.0, f64::max)
        };
        d.push(dt);
        dbar.push(pairs);
        if dt < stop || t >= t_max {
            break;
        }
        block.step(&chain.p);
        t += 1;
    }
    (d, Some(dbar), !exact)
}

/// Starts evolved in independent blocks, each until all its starts are below
/// `stop`. Past a block's last step its final distances stand in for later
/// ones, which only overstates `d` where it is already below `stop`.
fn blockwise_profile(chain: &LumpedChain, starts: &[usize], t_max: u64, stop: f64) -> Vec<f64> {
    let mut d: Vec<f64> = Vec::new();
    let mut tails: Vec<(usize, f64)> = Vec::new();
    for chunk in starts.chunks(BLOCK) {
        let mut block = Block::new(chain.len(), chunk);
        let mut dx = vec![0.0; chunk.len()];
        let mut t = 0usize;
        loop {
            block.tv_to(&chain.pi, &mut dx);
            let dt = dx.iter().cloned().fold(0.0, f64::max);
            if t < d.len() {
                d[t] = d[t].max(dt);
            } else {
                d.push(dt);
            }
            if dt < stop || t as u64 >= t_max {
                tails.push((t, dt));
                break;
            }
            block.step(&chain.p);
            t += 1;
        }
    }
    for (t, last) in tails {
        for v in d.iter_mut().skip(t + 1) {
            *v = v.max(last);
        }
    }
    d
}

/// How a mixing time was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingMethod {
    Iteration,
    DensePowers,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingTime {
    pub t_mix: Option<u64>,
    pub method: MixingMethod,
    pub approximate_starts: bool,
}

/// `t_mix(eps)` by iteration up to `t_iter_cap` steps, then by binary lifting
/// over dense powers of `P` when the chain is small enough.
pub fn exact_mixing_time(chain: &LumpedChain, eps: f64, t_iter_cap: u64) -> Result<MixingTime> {
    check_eps(&[eps])?;
    let (starts, approximate_starts) = choose_starts(chain, FULL_START_LIMIT);
    let d = blockwise_profile(chain, &starts, t_iter_cap, eps);
    if let Some(t) = d.iter().position(|&x| x <= eps) {
        return Ok(MixingTime { t_mix: Some(t as u64), method: MixingMethod::Iteration, approximate_starts });
    }
    if chain.len() > DENSE_POWER_LIMIT {
        return Ok(MixingTime { t_mix: None, method: MixingMethod::Censored, approximate_starts });
    }
    let t = dense_mixing_time(chain, eps, 62);
    Ok(MixingTime {
        t_mix: t,
        method: if t.is_some() { MixingMethod::DensePowers } else { MixingMethod::Censored },
        approximate_starts: false,
    })
}

fn dense_d(m: &DMatrix<f64>, pi: &[f64]) -> f64 {
    (0..m.nrows())
        .map(|i| 0.5 * pi.iter().enumerate().map(|(j, &p)| (m[(i, j)] - p).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest `t` with `d(t) <= eps`, using `d` non-increasing in `t`.
fn dense_mixing_time(chain: &LumpedChain, eps: f64, max_doublings: u32) -> Option<u64> {
    let d0 = chain.pi.iter().map(|p| 1.0 - p).fold(0.0, f64::max);
    if d0 <= eps {
        return Some(0);
    }
    let mut powers = vec![chain.p.to_dense()];
    loop {
        let last = powers.last().unwrap();
        if dense_d(last, &chain.pi) <= eps {
            break;
        }
        if powers.len() as u32 > max_doublings {
            return None;
        }
        let sq = last * last;
        powers.push(sq);
    }
    // P^acc has d > eps; add powers from the top while that stays true.
    let mut acc = DMatrix::<f64>::identity(chain.len(), chain.len());
    let mut t: u64 = 0;
    for (k, pk) in powers.iter().enumerate().rev() {
        let cand = &acc * pk;
        if dense_d(&cand, &chain.pi) > eps {
            acc = cand;
            t += 1 << k;
        }
    }
    Some(t + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    Lanczos,
    /// Gap too small for `1 - lambda_2`; taken from the generator instead.
    InverseIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spectrum {
    /// `1 - max(|lambda_2|, |lambda_min|)`.
    pub gap: f64,
    pub relaxation_time: f64,
    pub lambda2: f64,
    pub lambda_min: f64,
    pub method: EigenMethod,
}

/// `D^{1/2} P D^{-1/2}` with `D = diag(pi)`, symmetric for a reversible chain.
fn symmetrized(chain: &LumpedChain) -> Csr {
    let rows = (0..chain.len())
        .map(|i| {
            let (c, v) = chain.p.row(i);
            c.iter()
                .zip(v)
                .map(|(&j, &p)| (j, p * (0.5 * (chain.log_pi[i] - chain.log_pi[j])).exp()))
                .collect()
        })
        .collect();
    Csr::from_rows(rows)
}

/// Absolute spectral gap of a reversible lumped chain.
pub fn spectral_gap(chain: &LumpedChain) -> Result<Spectrum> {
    let r = chain.reversibility_residual();
    if r > 1e-8 {
        return Err(Error::NotReversible(r));
    }
    let a = symmetrized(chain);
    let n = chain.len();
    let (lambda2, lambda_min, method) = if n == 1 {
        (0.0, 0.0, EigenMethod::Dense)
    } else if n <= DENSE_EIGEN_LIMIT {
        let dense = a.to_dense();
        let sym = (&dense + dense.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        (ev[1], ev[n - 1], EigenMethod::Dense)
    } else {
        let u: Vec<f64> = chain.log_pi.iter().map(|l| (0.5 * l).exp()).collect();
        let (hi, lo) = lanczos_extremes(&a, &u)?;
        (hi, lo, EigenMethod::Lanczos)
    };
    let mut top = 1.0 - lambda2;
    let mut method = method;
    if n > 1 && top < GAP_REFINE_BELOW {
        top = generator_gap(chain)?;
        method = EigenMethod::InverseIteration;
    }
    let gap = top.min(1.0 - lambda_min.abs());
    Ok(Spectrum { gap, relaxation_time: 1.0 / gap, lambda2: 1.0 - top, lambda_min, method })
}

/// `I - P` restricted to the states other than `anchor`, whose row becomes the
/// identity. Off-diagonals are kept in a band together with the row-sum
/// deficiencies, so elimination only ever adds terms of one sign.
struct GeneratorBand {
    dim: usize,
    bw: usize,
    /// `off[i * (2 bw + 1) + (j + bw - i)]` holds entry `(i, j)`, `i != j`.
    off: Vec<f64>,
    slack: Vec<f64>,
    pivot: Vec<f64>,
}

impl GeneratorBand {
    fn new(p: &Csr, anchor: usize) -> Self {
        let dim = p.dim();
        let mut bw = 0;
        for i in 0..dim {
            for &j in p.row(i).0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
        let width = 2 * bw + 1;
        let mut off = vec![0.0; dim * width];
        let mut slack = vec![0.0; dim];
        for i in 0..dim {
            if i == anchor {
                slack[i] = 1.0;
                continue;
            }
            let (c, v) = p.row(i);
            for (&j, &pij) in c.iter().zip(v) {
                if j == anchor {
                    slack[i] += pij;
                } else if j != i {
                    off[i * width + j + bw - i] = -pij;
                }
            }
        }
        Self { dim, bw, off, slack, pivot: vec![0.0; dim] }
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + j + self.bw - i
    }

    /// In-place LU without pivoting; multipliers overwrite the lower band.
    fn factor(&mut self) {
        let (n, bw) = (self.dim, self.bw);
        for k in 0..n {
            let hi = (k + bw).min(n - 1);
            let piv = self.slack[k] - ((k + 1)..=hi).map(|j| self.off[self.at(k, j)]).sum::<f64>();
            self.pivot[k] = piv;
            for i in (k + 1)..=hi {
                let aik = self.off[self.at(i, k)];
                if aik == 0.0 {
                    continue;
                }
                let l = aik / piv;
                for j in (k + 1)..=hi {
                    if j != i {
                        let akj = self.off[self.at(k, j)];
                        let idx = self.at(i, j);
                        self.off[idx] -= l * akj;
                    }
                }
                self.slack[i] -= l * self.slack[k];
                let idx = self.at(i, k);
                self.off[idx] = l;
            }
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.dim, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let s: f64 = (lo..i).map(|k| self.off[self.at(i, k)] * b[k]).sum();
            b[i] -= s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let s: f64 = ((i + 1)..=hi).map(|j| self.off[self.at(i, j)] * b[j]).sum();
            b[i] = (b[i] - s) / self.pivot[i];
        }
    }
}

/// Dirichlet form over variance; both sums have nonnegative terms.
fn rayleigh_quotient(chain: &LumpedChain, f: &[f64]) -> f64 {
    let mean: f64 = chain.pi.iter().zip(f).map(|(p, x)| p * x).sum();
    let var: f64 = chain.pi.iter().zip(f).map(|(p, x)| p * (x - mean).powi(2)).sum();
    let mut energy = 0.0;
    for i in 0..chain.len() {
        let (c, v) = chain.p.row(i);
        for (&j, &pij) in c.iter().zip(v) {
            energy += chain.pi[i] * pij * (f[i] - f[j]).powi(2);
        }
    }
    0.5 * energy / var
}

/// Smallest nonzero eigenvalue of `I - P` by inverse iteration.
fn generator_gap(chain: &LumpedChain) -> Result<f64> {
    let anchor = (0..chain.len()).max_by(|&a, &b| chain.pi[a].total_cmp(&chain.pi[b])).unwrap();
    let mut band = GeneratorBand::new(&chain.p, anchor);
    band.factor();
    let mut g = rng::seeded(LANCZOS_SEED);
    let mut f: Vec<f64> = (0..chain.len()).map(|_| g.gen::<f64>() - 0.5).collect();
    let mut last = f64::INFINITY;
    for _ in 0..INVERSE_ITERS {
        let mean: f64 = chain.pi.iter().zip(&f).map(|(p, x)| p * x).sum();
        f.iter_mut().for_each(|x| *x -= mean);
        f[anchor] = 0.0;
        band.solve(&mut f);
        let scale = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        f.iter_mut().for_each(|x| *x /= scale);
        let rq = rayleigh_quotient(chain, &f);
        if (rq - last).abs() <= 1e-13 * rq {
            return Ok(rq);
        }
        last = rq;
    }
    Err(Error::NoConvergence(format!("inverse iteration stalled at gap {last:e}")))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Largest and smallest eigenvalues of `a` restricted to the complement of
/// the unit vector `u`, by Lanczos with full reorthogonalisation.
fn lanczos_extremes(a: &Csr, u: &[f64]) -> Result<(f64, f64)> {
    let n = a.dim();
    let mut g = rng::seeded(LANCZOS_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| g.gen::<f64>() - 0.5).collect();
    axpy(-dot(&v, u), u, &mut v);
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut checkpoint = 40;
    let limit = LANCZOS_MAX.min(n - 1);
    loop {
        let j = basis.len() - 1;
        a.mul_right(&basis[j], &mut w);
        let aj = dot(&w, &basis[j]);
        alpha.push(aj);
        for _ in 0..2 {
            axpy(-dot(&w, u), u, &mut w);
            for b in &basis {
                let c = dot(&w, b);
                axpy(-c, b, &mut w);
            }
        }
        let bj = dot(&w, &w).sqrt();
        let m = alpha.len();
        let done = bj < 1e-13 || m >= limit;
        if done || m >= checkpoint {
            let (hi, lo, res_hi, res_lo) = ritz_extremes(&alpha, &beta, bj);
            if done || (res_hi < LANCZOS_TOL && res_lo < LANCZOS_TOL) {
                if !done || bj < 1e-13 || m == n - 1 || (res_hi < 1e-8 && res_lo < 1e-8) {
                    return Ok((hi, lo));
                }
                return Err(Error::NoConvergence(format!(
                    "Lanczos residuals {res_hi:.2e}, {res_lo:.2e} after {m} steps"
                )));
            }
            checkpoint = (checkpoint * 3 / 2).min(limit);
        }
        beta.push(bj);
        basis.push(w.iter().map(|x| x / bj).collect());
    }
}

/// Extreme Ritz values of the tridiagonal matrix and their residual bounds.
fn ritz_extremes(alpha: &[f64], beta: &[f64], next_beta: f64) -> (f64, f64, f64, f64) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (mut ihi, mut ilo) = (0, 0);
    for i in 0..m {
        if eig.eigenvalues[i] > eig.eigenvalues[ihi] {
            ihi = i;
        }
        if eig.eigenvalues[i] < eig.eigenvalues[ilo] {
            ilo = i;
        }
    }
    let res = |i: usize| (next_beta * eig.eigenvectors[(m - 1, i)]).abs();
    (eig.eigenvalues[ihi], eig.eigenvalues[ilo], res(ihi), res(ilo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BottleneckCut {
    /// States with cut statistic at most this value form one side.
    pub threshold: i64,
    /// `Q(S, S^c) / pi(S)` with `S` the lighter side.
    pub conductance: f64,
    pub mass: f64,
}

/// Smallest conductance over threshold cuts of the cut statistic.
pub fn bottleneck_scan(chain: &LumpedChain) -> Result<BottleneckCut> {
    let stat: Vec<i64> = (0..chain.len()).map(|i| chain.cut_statistic(i)).collect();
    let mut levels = stat.clone();
    levels.sort_unstable();
    levels.dedup();
    let mut best: Option<BottleneckCut> = None;
    for &theta in &levels[..levels.len().saturating_sub(1)] {
        let mut mass = 0.0;
        let mut flow = 0.0;
        for i in 0..chain.len() {
            if stat[i] > theta {
                continue;
            }
            mass += chain.pi[i];
            let (c, v) = chain.p.row(i);
            let out: f64 = c.iter().zip(v).filter(|(&j, _)| stat[j] > theta).map(|(_, &p)| p).sum();
            flow += chain.pi[i] * out;
        }
        let light = mass.min(1.0 - mass);
        if light <= 0.0 {
            continue;
        }
        let phi = flow / light;
        if best.map_or(true, |b| phi < b.conductance) {
            best = Some(BottleneckCut { threshold: theta, conductance: phi, mass: light });
        }
    }
    best.ok_or_else(|| Error::Domain("no cut separates positive mass".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    NLogN,
    Exponential,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    /// `t = a n log n`, fitted in log space.
    pub nlogn_a: f64,
    pub nlogn_rss: f64,
    /// `t = b exp(c n)`, fitted in log space.
    pub exp_b: f64,
    pub exp_c: f64,
    pub exp_rss: f64,
    /// Slope and `R^2` of `log t` against `log n`.
    pub power_exponent: f64,
    pub power_r2: f64,
    pub classification: Growth,
}

/// Least-squares line `y = a + b x` with its residual sum of squares and `R^2`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    (a, b, rss, r2)
}

/// Fits both growth laws to `(n, t)` pairs; needs two points with `n >= 2`.
pub fn fit_growth(ns: &[f64], ts: &[f64]) -> Result<GrowthFit> {
    if ns.len() != ts.len() || ns.len() < 2 {
        return domain("need at least two (n, t) pairs");
    }
    if ns.iter().any(|&n| !(n >= 2.0)) || ts.iter().any(|&t| !(t > 0.0)) {
        return domain("need n >= 2 and t > 0");
    }
    let lt: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let lnl: Vec<f64> = ns.iter().map(|n| (n * n.ln()).ln()).collect();
    let la = lt.iter().zip(&lnl).map(|(a, b)| a - b).sum::<f64>() / ns.len() as f64;
    let nlogn_rss: f64 = lt.iter().zip(&lnl).map(|(a, b)| (a - b - la).powi(2)).sum();
    let (lb, c, exp_rss, _) = linear_fit(ns, &lt);
    let ln: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let (_, power_exponent, _, power_r2) = linear_fit(&ln, &lt);
    let classification = if ns.len() < 3 {
        Growth::Undetermined
    } else if exp_rss < nlogn_rss && c > 0.0 {
        Growth::Exponential
    } else {
        Growth::NLogN
    };
    Ok(GrowthFit {
        nlogn_a: la.exp(),
        nlogn_rss,
        exp_b: lb.exp(),
        exp_c: c,
        exp_rss,
        power_exponent,
        power_r2,
        classification,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n: usize,
    pub states: usize,
    pub mixing: MixingTime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSweep {
    pub model: ModelSpec,
    pub eps: f64,
    pub points: Vec<SweepPoint>,
    /// Absent when fewer than two sizes produced a mixing time.
    pub fit: Option<GrowthFit>,
}

/// Mixing times over `n_list` with growth fits on the uncensored points.
pub fn scaling_sweep(m: &ModelSpec, n_list: &[usize], eps: f64, t_iter_cap: u64) -> Result<ScalingSweep> {
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let chain = lumped_chain_build(m, n)?;
        let mixing = exact_mixing_time(&chain, eps, t_iter_cap)?;
        points.push(SweepPoint { n, states: chain.len(), mixing });
    }
    let (ns, ts): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.mixing.t_mix.map(|t| (p.n as f64, t.max(1) as f64)))
        .unzip();
    let fit = fit_growth(&ns, &ts).ok();
    Ok(ScalingSweep { model: *m, eps, points, fit })
}
