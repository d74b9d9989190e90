//! Aggregate variation of the update-law map `g` along paths in the simplex
//! and grid checks of the three contraction conditions used by aggregate path
//! coupling. Only straight lines to the equilibrium point are examined.

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{equilibrium_macrostates, local_contraction_limit};
use crate::error::{domain, Error, Result};
use crate::glauber::{g_jacobian, g_raw};
use crate::model::{l1, Family, ModelSpec, SimplexPoint};
use crate::optimize::{bisect_root, simplex_grid};
use crate::rng;

/// Grid points are pulled this far towards the uniform point.
pub const BOUNDARY_SHRINK: f64 = 1e-6;
/// Slack separating numerical noise from a genuine failure.
pub const VERDICT_MARGIN: f64 = 1e-3;
const REFINE_RTOL: f64 = 1e-6;
const MAX_DOUBLINGS: u32 = 10;
const LOCAL_DIRECTIONS: usize = 200;
const LOCAL_SEED: u64 = 0x5eed_0a9c;

/// Piecewise-straight path with per-coordinate monotonicity flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonePath {
    pub points: Vec<SimplexPoint>,
    pub monotone: Vec<bool>,
}

impl MonotonePath {
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn step_lengths(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[0].l1_distance(&w[1])).collect()
    }
}

/// Straight line from `from` to `to` cut into `r` equal steps of L1 length in
/// `[eps, 2 eps)`; a single step when `eps` exceeds the distance.
pub fn monotone_path_interpolate(
    from: &SimplexPoint,
    to: &SimplexPoint,
    eps: f64,
) -> Result<MonotonePath> {
    if from.dim() != to.dim() {
        return domain("endpoints have different dimensions");
    }
    if !(eps > 0.0) {
        return domain(format!("eps must be positive, got {eps}"));
    }
    let len = from.l1_distance(to);
    if len == 0.0 {
        return domain("endpoints coincide");
    }
    let steps = ((len / eps + 1e-9).floor() as usize).max(1);
    let (a, b) = (from.coords(), to.coords());
    let mut points = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let p = match i {
            0 => a.to_vec(),
            i if i == steps => b.to_vec(),
            _ => {
                let t = i as f64 / steps as f64;
                a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
            }
        };
        points.push(SimplexPoint::from_raw(p));
    }
    let monotone = (0..from.dim())
        .map(|k| {
            let c: Vec<f64> = points.iter().map(|p| p.coords()[k]).collect();
            c.windows(2).all(|w| w[1] >= w[0]) || c.windows(2).all(|w| w[1] <= w[0])
        })
        .collect();
    Ok(MonotonePath { points, monotone })
}

/// Directional derivative `d/dt g(a + t (b - a))` for every coordinate.
fn g_velocity(m: &ModelSpec, a: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    let z: Vec<f64> = a.iter().zip(dir).map(|(x, d)| x + t * d).collect();
    let jac = g_jacobian(m, &z).expect("checked Potts family");
    jac.iter().map(|row| row.iter().zip(dir).map(|(j, d)| j * d).sum()).collect()
}

fn g_at(m: &ModelSpec, a: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    let z: Vec<f64> = a.iter().zip(dir).map(|(x, d)| x + t * d).collect();
    g_raw(m, &z)
}

/// Total variation of each `g_k` along one segment from a derivative sign
/// scan on `cells` cells.
fn segment_variation_scan(m: &ModelSpec, a: &[f64], dir: &[f64], cells: usize) -> f64 {
    let q = a.len();
    let ts: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
    let vel: Vec<Vec<f64>> = ts.iter().map(|&t| g_velocity(m, a, dir, t)).collect();
    let mut total = 0.0;
    for k in 0..q {
        let mut cuts = vec![0.0];
        for i in 0..cells {
            let (d0, d1) = (vel[i][k], vel[i + 1][k]);
            if d0 == 0.0 && i > 0 {
                cuts.push(ts[i]);
            } else if d0 * d1 < 0.0 {
                let root = bisect_root(|t| g_velocity(m, a, dir, t)[k], ts[i], ts[i + 1], 1e-14)
                    .unwrap_or(0.5 * (ts[i] + ts[i + 1]));
                cuts.push(root);
            }
        }
        cuts.push(1.0);
        let vals: Vec<f64> = cuts.iter().map(|&t| g_at(m, a, dir, t)[k]).collect();
        total += vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    }
    total
}

fn simpson_abs<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson_abs(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_abs(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn segment_variation(m: &ModelSpec, a: &[f64], b: &[f64], quad_steps: usize) -> f64 {
    let dir: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    if dir.iter().all(|&d| d == 0.0) {
        return 0.0;
    }
    let mut cells = quad_steps.max(2);
    let mut prev = segment_variation_scan(m, a, &dir, cells);
    for _ in 0..MAX_DOUBLINGS {
        cells *= 2;
        let next = segment_variation_scan(m, a, &dir, cells);
        if (next - prev).abs() <= REFINE_RTOL * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        prev = next;
    }
    // sign detection did not settle: integrate |g'| directly
    let f = |t: f64| g_velocity(m, a, &dir, t).iter().map(|v| v.abs()).sum::<f64>();
    let (fa, fm, fb) = (f(0.0), f(0.5), f(1.0));
    let whole = (fa + 4.0 * fm + fb) / 6.0;
    simpson_abs(&f, 0.0, 1.0, fa, fm, fb, whole, 1e-12, 40)
}

fn check_inside(z: &SimplexPoint) -> Result<()> {
    let s: f64 = z.coords().iter().sum();
    if z.coords().iter().any(|&c| c < -1e-12) || (s - 1.0).abs() > 1e-9 {
        return domain(format!("path point {:?} leaves the simplex", z.coords()));
    }
    Ok(())
}

/// Aggregate g-variation `sum_k int |<grad g_k, dy>|` along the polyline
/// through `path`, each segment refined until the relative change is below
/// `1e-6`.
pub fn aggregate_g_variation(m: &ModelSpec, path: &[SimplexPoint], quad_steps: usize) -> Result<f64> {
    m.require_potts()?;
    if quad_steps < 2 {
        return domain("quad_steps must be at least 2");
    }
    for z in path {
        m.check_point(z)?;
        check_inside(z)?;
    }
    Ok(path
        .windows(2)
        .map(|w| segment_variation(m, w[0].coords(), w[1].coords(), quad_steps))
        .sum())
}

/// Equilibrium point and the straight-line ratio machinery built around it.
#[derive(Debug, Clone)]
pub struct ApcContext {
    pub model: ModelSpec,
    pub center: SimplexPoint,
    g_center: Vec<f64>,
}

const QUAD_STEPS: usize = 8;

impl ApcContext {
    /// Locates the unique equilibrium macrostate; several macrostates are an
    /// error carrying them as witnesses.
    pub fn new(m: &ModelSpec) -> Result<Self> {
        m.require_potts()?;
        let phase = equilibrium_macrostates(m)?;
        if phase.minimizers.len() > 1 {
            return Err(Error::MultiPhase {
                count: phase.minimizers.len(),
                witness: phase.minimizers,
            });
        }
        let found = phase.minimizers.into_iter().next().expect("at least one minimizer");
        let uniform = SimplexPoint::uniform(m.q());
        let center = if l1(&found, uniform.coords()) < 1e-6 {
            uniform
        } else {
            SimplexPoint::from_raw(found)
        };
        Ok(Self::about(m, center))
    }

    /// Context around an arbitrary centre, without the single-phase check.
    pub fn about(m: &ModelSpec, center: SimplexPoint) -> Self {
        let g_center = g_raw(m, center.coords());
        Self { model: *m, center, g_center }
    }

    /// Aggregate variation along the straight line from the centre to `z`.
    pub fn pseudo_distance(&self, z: &SimplexPoint) -> Result<f64> {
        aggregate_g_variation(&self.model, &[self.center.clone(), z.clone()], QUAD_STEPS)
    }

    /// `pseudo_distance(z) / |z - center|_1`, `None` at the centre.
    pub fn ratio(&self, z: &SimplexPoint) -> Result<Option<f64>> {
        let d = z.l1_distance(&self.center);
        if d < 1e-12 {
            return Ok(None);
        }
        Ok(Some(self.pseudo_distance(z)? / d))
    }

    /// Left-endpoint Riemann sum of the aggregate variation over the
    /// `eps`-interpolation of the line from the centre to `z`, with the number
    /// of steps.
    pub fn riemann_sum(&self, z: &SimplexPoint, eps: f64) -> Result<(f64, usize)> {
        let path = monotone_path_interpolate(&self.center, z, eps)?;
        let mut total = 0.0;
        for w in path.points.windows(2) {
            let step: Vec<f64> = w[1].coords().iter().zip(w[0].coords()).map(|(b, a)| b - a).collect();
            let jac = g_jacobian(&self.model, w[0].coords())?;
            total += jac
                .iter()
                .map(|row| row.iter().zip(&step).map(|(j, s)| j * s).sum::<f64>().abs())
                .sum::<f64>();
        }
        Ok((total, path.steps()))
    }

    /// Local condition about this context's centre, which need not be an
    /// equilibrium point.
    pub fn local_condition(&self, radii: &[f64]) -> Result<ConditionReport> {
        local_report(self, radii)
    }

    /// `|g(z) - g(center)|_1 / |z - center|_1`.
    pub fn local_ratio(&self, z: &[f64]) -> f64 {
        l1(&g_raw(&self.model, z), &self.g_center) / l1(z, self.center.coords())
    }

    /// Grid points (pulled inside the simplex) other than the centre.
    fn scan_points(&self, mesh: f64) -> Vec<SimplexPoint> {
        let divisions = (1.0 / mesh).round().max(1.0) as usize;
        let q = self.model.q();
        let u = 1.0 / q as f64;
        simplex_grid(q, divisions)
            .into_iter()
            .map(|z| z.into_iter().map(|x| (1.0 - BOUNDARY_SHRINK) * x + BOUNDARY_SHRINK * u).collect::<Vec<_>>())
            .filter(|z| l1(z, self.center.coords()) > 1e-9)
            .map(SimplexPoint::from_raw)
            .collect()
    }
}

pub fn pseudo_distance(m: &ModelSpec, z: &SimplexPoint) -> Result<f64> {
    m.check_point(z)?;
    ApcContext::new(m)?.pseudo_distance(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    Uniform,
    Rs,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    /// No grid point fell inside the condition's scope.
    Skipped,
}

/// Outcome of one condition scan. `verdict` is `holds` exactly when
/// `worst_ratio <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub mesh: Option<f64>,
    pub eps: Option<f64>,
    pub worst_ratio: f64,
    pub threshold: f64,
    pub margin: f64,
    pub witness: Option<Vec<f64>>,
    pub verdict: Verdict,
    pub extras: BTreeMap<String, f64>,
}

impl ConditionReport {
    fn judge(
        condition: ConditionId,
        mesh: Option<f64>,
        eps: Option<f64>,
        worst: Option<(f64, Vec<f64>)>,
        threshold: f64,
        extras: BTreeMap<String, f64>,
    ) -> Self {
        match worst {
            Some((worst_ratio, witness)) => Self {
                condition,
                mesh,
                eps,
                worst_ratio,
                threshold,
                margin: threshold - worst_ratio,
                witness: Some(witness),
                verdict: if worst_ratio <= threshold { Verdict::Holds } else { Verdict::Fails },
                extras,
            },
            None => Self {
                condition,
                mesh,
                eps,
                worst_ratio: 0.0,
                threshold,
                margin: threshold,
                witness: None,
                verdict: Verdict::Skipped,
                extras,
            },
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict != Verdict::Fails
    }
}

fn worst_of(items: Vec<(f64, Vec<f64>)>) -> Option<(f64, Vec<f64>)> {
    items.into_iter().fold(None, |best, item| match best {
        Some(b) if b.0 >= item.0 => Some(b),
        _ => Some(item),
    })
}

fn potts_limit(m: &ModelSpec) -> Option<f64> {
    match m.family {
        Family::Cwp { q } => Some(local_contraction_limit(q, 2.0, m.beta)),
        Family::Gcwp { q, r } => Some(local_contraction_limit(q, r, m.beta)),
        Family::BlumeCapel { .. } => None,
    }
}

/// Largest straight-line ratio over the grid; holds when it stays below
/// `1 - 1e-3`. Reports `delta_hat = 1 - worst`.
pub fn check_condition_uniform(m: &ModelSpec, mesh: f64) -> Result<ConditionReport> {
    let ctx = ApcContext::new(m)?;
    uniform_report(&ctx, mesh)
}

fn uniform_report(ctx: &ApcContext, mesh: f64) -> Result<ConditionReport> {
    if !(mesh > 0.0 && mesh <= 0.5) {
        return domain(format!("mesh {mesh} outside (0, 0.5]"));
    }
    let ratios = ctx
        .scan_points(mesh)
        .into_par_iter()
        .map(|z| Ok((ctx.ratio(&z)?.unwrap_or(0.0), z.coords().to_vec())))
        .collect::<Result<Vec<_>>>()?;
    let worst = worst_of(ratios);
    let mut extras = BTreeMap::new();
    if let Some((w, _)) = &worst {
        extras.insert("delta_hat".into(), 1.0 - w);
    }
    extras.insert("near_limit".into(), local_sup(ctx, 1e-4));
    if let Some(l) = potts_limit(&ctx.model) {
        extras.insert("local_contraction_limit".into(), l);
    }
    Ok(ConditionReport::judge(
        ConditionId::Uniform,
        Some(mesh),
        None,
        worst,
        1.0 - VERDICT_MARGIN,
        extras,
    ))
}

/// Riemann-sum version of the uniform condition on `eps`-interpolations.
/// Points closer than `2 eps` to the centre give single-step paths and are
/// out of scope. Holds when the worst sum ratio is at most
/// `1 - delta_hat / 3 - 1e-3`, with `delta_hat` from the uniform scan.
pub fn check_condition_rs(m: &ModelSpec, eps: f64, mesh: f64) -> Result<ConditionReport> {
    let ctx = ApcContext::new(m)?;
    let uniform = uniform_report(&ctx, mesh)?;
    rs_report(&ctx, eps, mesh, 1.0 - uniform.worst_ratio)
}

fn rs_report(ctx: &ApcContext, eps: f64, mesh: f64, delta_hat: f64) -> Result<ConditionReport> {
    if !(eps > 0.0) {
        return domain(format!("eps must be positive, got {eps}"));
    }
    let rows = ctx
        .scan_points(mesh)
        .into_par_iter()
        .filter(|z| z.l1_distance(&ctx.center) >= 2.0 * eps)
        .map(|z| {
            let d = z.l1_distance(&ctx.center);
            let (sum, steps) = ctx.riemann_sum(&z, eps)?;
            let exact = ctx.pseudo_distance(&z)?;
            Ok((sum / d, (sum - exact).abs(), steps, z.coords().to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut extras = BTreeMap::new();
    extras.insert("delta_hat".into(), delta_hat);
    let max_gap = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let gap_constant = rows
        .iter()
        .map(|r| r.1 / (r.2 as f64 * eps * eps))
        .fold(0.0, f64::max);
    extras.insert("max_gap".into(), max_gap);
    extras.insert("gap_constant".into(), gap_constant);
    let worst = worst_of(rows.into_iter().map(|r| (r.0, r.3)).collect());
    Ok(ConditionReport::judge(
        ConditionId::Rs,
        Some(mesh),
        Some(eps),
        worst,
        1.0 - delta_hat / 3.0 - VERDICT_MARGIN,
        extras,
    ))
}

/// Unit-L1 tangent directions: all `(e_i - e_j)/2` plus seeded random ones.
fn tangent_directions(q: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..q {
        for j in 0..q {
            if i != j {
                let mut v = vec![0.0; q];
                v[i] = 0.5;
                v[j] = -0.5;
                dirs.push(v);
            }
        }
    }
    let mut g = rng::seeded(LOCAL_SEED);
    while dirs.len() < LOCAL_DIRECTIONS + q * (q - 1) {
        let raw: Vec<f64> = (0..q).map(|_| g.gen::<f64>() - 0.5).collect();
        let mean = raw.iter().sum::<f64>() / q as f64;
        let v: Vec<f64> = raw.iter().map(|x| x - mean).collect();
        let norm: f64 = v.iter().map(|x| x.abs()).sum();
        if norm > 1e-9 {
            dirs.push(v.iter().map(|x| x / norm).collect());
        }
    }
    dirs
}

/// Largest `|g(z) - g(center)|_1 / |z - center|_1` over the sphere of L1
/// radius `radius`.
fn local_sup(ctx: &ApcContext, radius: f64) -> f64 {
    tangent_directions(ctx.model.q())
        .iter()
        .filter_map(|v| {
            let z: Vec<f64> = ctx.center.coords().iter().zip(v).map(|(c, d)| c + radius * d).collect();
            z.iter().all(|&x| x >= 0.0).then(|| ctx.local_ratio(&z))
        })
        .fold(0.0, f64::max)
}

pub const DEFAULT_LOCAL_RADII: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Directional sup of the local ratio on shrinking spheres, extrapolated
/// linearly in the radius from the two smallest radii. Holds when the limit
/// is below `1 - 1e-3`.
pub fn check_condition_local(m: &ModelSpec, radii: &[f64]) -> Result<ConditionReport> {
    let ctx = ApcContext::new(m)?;
    local_report(&ctx, radii)
}

fn local_report(ctx: &ApcContext, radii: &[f64]) -> Result<ConditionReport> {
    if radii.len() < 2 || radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|&r| r <= 0.0) {
        return domain("radii must be a strictly decreasing list of at least two positive values");
    }
    let sups: Vec<f64> = radii.iter().map(|&r| local_sup(ctx, r)).collect();
    let (r1, r2) = (radii[radii.len() - 2], radii[radii.len() - 1]);
    let (s1, s2) = (sups[sups.len() - 2], sups[sups.len() - 1]);
    let limit = (r1 * s2 - r2 * s1) / (r1 - r2);
    let mut extras = BTreeMap::new();
    for (r, s) in radii.iter().zip(&sups) {
        extras.insert(format!("sup_at_{r:e}"), *s);
    }
    if let Some(l) = potts_limit(&ctx.model) {
        extras.insert("local_contraction_limit".into(), l);
    }
    Ok(ConditionReport::judge(
        ConditionId::Local,
        None,
        None,
        Some((limit, ctx.center.coords().to_vec())),
        1.0 - VERDICT_MARGIN,
        extras,
    ))
}

/// The three condition reports at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionBundle {
    pub model: ModelSpec,
    pub center: Vec<f64>,
    pub reports: Vec<ConditionReport>,
    pub rapid_mixing_conditions_hold: bool,
}

pub fn check_all_conditions(m: &ModelSpec, mesh: f64, eps: f64) -> Result<ConditionBundle> {
    let ctx = ApcContext::new(m)?;
    let uniform = uniform_report(&ctx, mesh)?;
    let delta_hat = 1.0 - uniform.worst_ratio;
    let rs = rs_report(&ctx, eps, mesh, delta_hat)?;
    let local = local_report(&ctx, &DEFAULT_LOCAL_RADII)?;
    let reports = vec![uniform, rs, local];
    Ok(ConditionBundle {
        model: *m,
        center: ctx.center.coords().to_vec(),
        rapid_mixing_conditions_hold: reports.iter().all(ConditionReport::holds),
        reports,
    })
}
