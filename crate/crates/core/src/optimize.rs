//! Small derivative-free optimizers used by the equilibrium and verification
//! routines: golden-section search, sign bisection, grid scans with local
//! polish on an interval or on the probability simplex.

use std::collections::HashMap;

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimum of a unimodal function on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (mut x, mut fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    for end in [a, b] {
        let fe = f(end);
        if fe < fx {
            x = end;
            fx = fe;
        }
    }
    (x, fx)
}

pub fn golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_min(|t| -f(t), a, b, tol);
    (x, -v)
}

/// Root of `f` in `[lo, hi]` given a sign change, to absolute tolerance `xtol`.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoConvergence(format!(
            "no sign change on [{lo}, {hi}] (f = {flo:e}, {fhi:e})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisection on a predicate that holds at `lo` and fails at `hi`; returns the
/// final bracket.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(
    mut pred: P,
    mut lo: f64,
    mut hi: f64,
    width: f64,
) -> (f64, f64) {
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Polished local minima of `f` on `[lo, hi]` found from a grid of spacing
/// `mesh`, deduplicated at 1e-6 and sorted by value.
pub fn scalar_local_minima<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, mesh: f64) -> Vec<(f64, f64)> {
    let cells = ((hi - lo) / mesh).ceil().max(2.0) as usize;
    let step = (hi - lo) / cells as f64;
    let xs: Vec<f64> = (0..=cells)
        .map(|i| if i == cells { hi } else { lo + i as f64 * step })
        .collect();
    let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut found: Vec<(f64, f64)> = Vec::new();
    for i in 0..=cells {
        let left = if i == 0 { f64::INFINITY } else { vs[i - 1] };
        let right = if i == cells { f64::INFINITY } else { vs[i + 1] };
        if vs[i] <= left && vs[i] <= right {
            let a = xs[i.saturating_sub(1)];
            let b = xs[(i + 1).min(cells)];
            let (x, v) = golden_min(&f, a, b, 1e-13);
            let (x, v) = if v <= vs[i] { (x, v) } else { (xs[i], vs[i]) };
            if !found.iter().any(|&(y, _)| (y - x).abs() < 1e-6) {
                found.push((x, v));
            }
        }
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    found
}

/// All compositions of `total` into `parts` non-negative integers, in
/// lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=rest {
            prefix.push(c);
            rec(rest - c, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Number of compositions of `total` into `parts` parts.
pub fn composition_count(total: usize, parts: usize) -> u128 {
    // C(total + parts - 1, parts - 1)
    let k = parts as u128 - 1;
    let n = total as u128 + k;
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// Grid points of the simplex with spacing `1/divisions`.
pub fn simplex_grid(q: usize, divisions: usize) -> Vec<Vec<f64>> {
    compositions(divisions, q)
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / divisions as f64).collect())
        .collect()
}

/// Pairwise-transfer coordinate descent on the simplex: repeatedly moves mass
/// between two coordinates along the golden-section optimum.
pub fn polish_on_simplex<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], radius: f64) -> (Vec<f64>, f64) {
    let q = start.len();
    let mut z = start.to_vec();
    let mut fz = f(&z);
    let mut r = radius;
    let mut trial = z.clone();
    for _ in 0..1000 {
        let mut moved: f64 = 0.0;
        for i in 0..q {
            for j in (i + 1)..q {
                let lo = -z[i].min(r);
                let hi = z[j].min(r);
                if hi - lo < 1e-15 {
                    continue;
                }
                let along = |t: f64| {
                    let mut w = z.clone();
                    w[i] += t;
                    w[j] -= t;
                    w[i] = w[i].max(0.0);
                    w[j] = w[j].max(0.0);
                    f(&w)
                };
                let (t, ft) = golden_min(along, lo, hi, 1e-13);
                if ft < fz {
                    trial.copy_from_slice(&z);
                    trial[i] = (trial[i] + t).max(0.0);
                    trial[j] = (trial[j] - t).max(0.0);
                    z.copy_from_slice(&trial);
                    fz = ft;
                    moved = moved.max(t.abs());
                }
            }
        }
        if moved < 1e-12 {
            break;
        }
        r = (4.0 * moved).clamp(1e-9, radius);
    }
    (z, fz)
}

/// Local minima of `f` over the simplex: grid scan at spacing `1/divisions`,
/// polish from every grid point that is no worse than its lattice neighbours,
/// deduplicate at 1e-6, sort by value.
pub fn simplex_local_minima<F: Fn(&[f64]) -> f64 + Sync>(
    q: usize,
    divisions: usize,
    f: &F,
) -> Vec<(Vec<f64>, f64)> {
    use rayon::prelude::*;

    let lattice = compositions(divisions, q);
    let index: HashMap<&[usize], usize> =
        lattice.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
    let points: Vec<Vec<f64>> = lattice
        .iter()
        .map(|c| c.iter().map(|&k| k as f64 / divisions as f64).collect())
        .collect();
    let values: Vec<f64> = points.par_iter().map(|p| f(p)).collect();

    let mut candidates = Vec::new();
    let mut neighbour = vec![0usize; q];
    for (idx, c) in lattice.iter().enumerate() {
        let mut is_min = true;
        'scan: for i in 0..q {
            for j in 0..q {
                if i == j || c[j] == 0 {
                    continue;
                }
                neighbour.copy_from_slice(c);
                neighbour[i] += 1;
                neighbour[j] -= 1;
                if let Some(&k) = index.get(neighbour.as_slice()) {
                    if values[k] < values[idx] {
                        is_min = false;
                        break 'scan;
                    }
                }
            }
        }
        if is_min {
            candidates.push(idx);
        }
    }

    let radius = 2.0 / divisions as f64;
    let polished: Vec<(Vec<f64>, f64)> = candidates
        .par_iter()
        .map(|&idx| polish_on_simplex(f, &points[idx], radius))
        .collect();
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for (z, v) in polished {
        let dup = out.iter_mut().find(|(w, _)| {
            w.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < 1e-6
        });
        match dup {
            Some(existing) if v < existing.1 => *existing = (z, v),
            Some(_) => {}
            None => out.push((z, v)),
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out
}
