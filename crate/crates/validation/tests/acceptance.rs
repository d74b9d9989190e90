//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances are fixed here and never adjusted to make a line pass.

use std::time::Instant;

use mixlab::apc::{check_all_conditions, ConditionId, Verdict};
use mixlab::coupling::{
    bc_joint_table, bc_next_distance_law, bc_rapid_bound, greedy_joint_table, inversion_distance,
    mean_coupling_distance_bc, miscouple_probability, shuffle_step, ShuffleState,
};
use mixlab::equilibrium::{
    bc_free_energy_local_minimizers, beta_c_gcwp, beta_s, k1, kc1, kc2, BcRateFunction,
};
use mixlab::glauber::{general_update_probs, lumped_chain_build, update_expansion, update_probs_counts};
use mixlab::mixing::{bottleneck_scan, exact_mixing_time, linear_fit, mixing_profile, spectral_gap};
use mixlab::model::{clgf_bc, Derivative};
use mixlab::{Configuration, ModelSpec, SimplexPoint};
use mixlab_validation::{summarize, Outcome};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn slope_of(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let (_, b, _, r2) = linear_fit(xs, ys);
    (b, r2)
}

/// Second derivative at 0 of `ln E exp(t s)` under weights `e^{-beta s^2}`
/// on `s in {-1, 0, 1}`, written out directly.
fn curvature_at_zero(beta: f64) -> f64 {
    2.0 * (-beta).exp() / (1.0 + 2.0 * (-beta).exp())
}

fn closed_form_critical_values() -> Check {
    let mut worst: f64 = 0.0;
    for beta in [0.1, 0.5, 1.0, 1.2, 4f64.ln(), 2.0, 3.0] {
        let v = kc2(beta).value;
        let via_library = 1.0 / (2.0 * beta * clgf_bc(beta, 0.0, Derivative::Second));
        let via_oracle = 1.0 / (2.0 * beta * curvature_at_zero(beta));
        worst = worst.max(((v - via_library) / v).abs()).max(((v - via_oracle) / v).abs());
    }
    let at_ln4 = kc2(4f64.ln()).value;
    let target = 1.5 / 4f64.ln();
    let ok = worst <= 1e-12 && (at_ln4 - target).abs() <= 1e-9 && (at_ln4 - 1.08202).abs() <= 5e-6;
    verdict(ok, format!("max rel dev {worst:.2e} (tol 1e-12); kc2(ln 4) = {at_ln4:.10} vs {target:.10} (tol 1e-9)"))
}

fn gcwp_critical_consistency() -> Check {
    let bc = beta_c_gcwp(3, 2.0).map_err(|e| e.to_string())?.beta;
    let target = 4.0 * 2f64.ln();
    let mut ok = (bc - target).abs() <= 1e-3;
    let mut parts = vec![format!("beta_c(3,2) = {bc:.6} vs 4 ln 2 = {target:.6} (tol 1e-3)")];
    for (q, r) in [(3, 2.0), (3, 3.0), (4, 2.0)] {
        let s = beta_s(q, r).map_err(|e| e.to_string())?.beta;
        let c = beta_c_gcwp(q, r).map_err(|e| e.to_string())?.beta;
        ok &= s <= c + 1e-3;
        parts.push(format!("({q},{r}) beta_s {s:.4} <= beta_c {c:.4}"));
    }
    verdict(ok, parts.join("; "))
}

fn aggregate_conditions() -> Check {
    let (q, r) = (3usize, 2.0);
    let beta = 0.9 * beta_s(q, r).map_err(|e| e.to_string())?.beta;
    let m = ModelSpec::gcwp(q, r, beta).map_err(|e| e.to_string())?;
    let bundle = check_all_conditions(&m, 0.01, 0.02).map_err(|e| e.to_string())?;
    let mut ok = bundle.reports.len() == 3;
    let mut parts = Vec::new();
    for rep in &bundle.reports {
        ok &= rep.verdict == Verdict::Holds && rep.margin >= 1e-3;
        parts.push(format!("{:?} {:?} margin {:.4}", rep.condition, rep.verdict, rep.margin));
    }
    let limit = beta * (r - 1.0) * (q as f64).powf(1.0 - r);
    let local = bundle
        .reports
        .iter()
        .find(|rep| rep.condition == ConditionId::Local)
        .ok_or("no local report")?;
    ok &= (local.worst_ratio - limit).abs() <= 1e-3;
    parts.push(format!("local limit {:.6} vs {limit:.6} (tol 1e-3)", local.worst_ratio));
    verdict(ok, parts.join("; "))
}

fn bc_rapid_mixing() -> Check {
    let beta = 1.0;
    let k = 0.8 * kc2(beta).value;
    let m = ModelSpec::blume_capel(beta, k).map_err(|e| e.to_string())?;
    let mut ok = true;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut parts = Vec::new();
    for n in [20usize, 40, 80, 160] {
        let chain = lumped_chain_build(&m, n).map_err(|e| e.to_string())?;
        let t = exact_mixing_time(&chain, 0.25, 1_000_000).map_err(|e| e.to_string())?.t_mix.ok_or("censored")?;
        let bound = bc_rapid_bound(beta, k, n as u64, 0.25).map_err(|e| e.to_string())?.steps;
        ok &= t <= bound;
        parts.push(format!("n={n}: {t} <= {bound}"));
        xs.push((n as f64).ln());
        ys.push((t as f64).ln());
    }
    let (exponent, _) = slope_of(&xs, &ys);
    ok &= (0.9..=1.3).contains(&exponent);
    verdict(ok, format!("exponent {exponent:.4} in [0.9, 1.3]; {}", parts.join(", ")))
}

fn bc_aggregate_regime() -> (Check, Check) {
    let beta = 2.0;
    let k = match k1(beta) {
        Ok(c) => 0.9 * c.k,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    // (a) every neighbour pair over a range of sizes
    let mut worst = f64::NEG_INFINITY;
    let mut witness = (0, 0);
    for n in [20usize, 40, 60, 80, 100, 120, 200, 500, 1000, 5000] {
        for s in -(n as i64)..(n as i64) {
            let d = mean_coupling_distance_bc(beta, k, n, s, s + 1).expect("valid pair").phi_form;
            if d > worst {
                worst = d;
                witness = (n, s);
            }
        }
    }
    let a = verdict(
        worst > 1.0,
        format!("max mean coupling distance {worst:.6} at n={}, S={} (need > 1)", witness.0, witness.1),
    );

    let b = (|| {
        let m = ModelSpec::blume_capel(beta, k).map_err(|e| e.to_string())?;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for n in [20usize, 40, 60, 80, 100, 120] {
            let chain = lumped_chain_build(&m, n).map_err(|e| e.to_string())?;
            let t = exact_mixing_time(&chain, 0.25, 1_000_000).map_err(|e| e.to_string())?.t_mix.ok_or("censored")?;
            xs.push((n as f64).ln());
            ys.push((t as f64).ln());
        }
        let (exponent, _) = slope_of(&xs, &ys);
        verdict((0.9..=1.3).contains(&exponent), format!("exponent {exponent:.4} in [0.9, 1.3]"))
    })();
    (a, b)
}

fn slow_mixing() -> Check {
    let beta = 2.0;
    let k = 1.1 * k1(beta).map_err(|e| e.to_string())?.k;
    let m = ModelSpec::blume_capel(beta, k).map_err(|e| e.to_string())?;
    let (mut ns, mut log_gap, mut log_phi) = (Vec::new(), Vec::new(), Vec::new());
    for n in (20..=80).step_by(10) {
        let chain = lumped_chain_build(&m, n).map_err(|e| e.to_string())?;
        ns.push(n as f64);
        log_gap.push(spectral_gap(&chain).map_err(|e| e.to_string())?.gap.ln());
        log_phi.push(bottleneck_scan(&chain).map_err(|e| e.to_string())?.conductance.ln());
    }
    let (gap_slope, r2) = slope_of(&ns, &log_gap);
    let (phi_slope, _) = slope_of(&ns, &log_phi);
    verdict(
        gap_slope < 0.0 && r2 > 0.9 && phi_slope < 0.0,
        format!("log gap slope {gap_slope:.4}, R^2 {r2:.5} (> 0.9); log conductance slope {phi_slope:.4}"),
    )
}

fn all_configs(n: usize, q: usize) -> Vec<Configuration> {
    (0..q.pow(n as u32))
        .map(|c| Configuration::new((0..n).map(|i| (c / q.pow(i as u32)) % q).collect(), q).unwrap())
        .collect()
}

fn coupling_correctness() -> Check {
    let models = [
        ModelSpec::blume_capel(1.3, 0.9).unwrap(),
        ModelSpec::blume_capel(2.0, 1.03).unwrap(),
        ModelSpec::cwp(3, 1.5).unwrap(),
        ModelSpec::gcwp(3, 3.0, 4.0).unwrap(),
        ModelSpec::cwp(4, 2.0).unwrap(),
    ];
    let mut marginal_err: f64 = 0.0;
    for m in &models {
        for n in 1..=4 {
            let configs = all_configs(n, m.q());
            for sigma in &configs {
                for tau in &configs {
                    for i in 0..n {
                        let p = general_update_probs(m, sigma, i).unwrap();
                        let q = general_update_probs(m, tau, i).unwrap();
                        let (p, q) = (p.probs(), q.probs());
                        let mut tables = vec![greedy_joint_table(p, q)];
                        if m.is_blume_capel() {
                            tables.push(bc_joint_table(p, q));
                        }
                        for t in &tables {
                            for l in 0..p.len() {
                                let row: f64 = t[l].iter().sum();
                                let col: f64 = t.iter().map(|r| r[l]).sum();
                                marginal_err = marginal_err.max((row - p[l]).abs()).max((col - q[l]).abs());
                                if t[l].iter().any(|&w| w < 0.0) {
                                    marginal_err = f64::INFINITY;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut identity_err: f64 = 0.0;
    for _ in 0..100_000 {
        let q = rng.gen_range(2..6);
        let mut draw = || {
            let v: Vec<f64> = (0..q).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (p, r) = (draw(), draw());
        let half_l1 = 0.5 * p.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum::<f64>();
        identity_err = identity_err.max((miscouple_probability(&p, &r) - half_l1).abs());
    }

    let mut support_ok = true;
    for (beta, k) in [(1.0, 0.9), (2.0, 1.0), (0.3, 3.0), (3.0, 0.4)] {
        let n = 6;
        for sigma in all_configs(n, 3) {
            for i in (0..n).filter(|&i| sigma.spin(i) < 2) {
                let mut tau = sigma.clone();
                tau.set_spin(i, sigma.spin(i) + 1);
                let law = bc_next_distance_law(beta, k, &sigma, &tau).unwrap();
                support_ok &= law.len() <= 3;
            }
        }
    }
    verdict(
        marginal_err <= 1e-12 && identity_err <= 1e-12 && support_ok,
        format!(
            "max marginal error {marginal_err:.2e} (tol 1e-12); miscouple identity error {identity_err:.2e}; distance support in {{0,1,2}}: {support_ok}"
        ),
    )
}

fn expansion_order() -> Check {
    let ns = [50usize, 100, 200, 400, 800];
    let log_n: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let mut worst = f64::NEG_INFINITY;
    let cases = [
        (ModelSpec::gcwp(3, 2.0, 1.5).unwrap(), vec![0.4, 0.3, 0.3]),
        (ModelSpec::gcwp(3, 3.0, 4.0).unwrap(), vec![0.5, 0.3, 0.2]),
        (ModelSpec::cwp(4, 2.5).unwrap(), vec![0.4, 0.3, 0.2, 0.1]),
    ];
    for (m, z) in &cases {
        let point = SimplexPoint::new(z.clone()).unwrap();
        for current in 0..m.q() {
            let log_err: Vec<f64> = ns
                .iter()
                .map(|&n| {
                    let counts: Vec<usize> = z.iter().map(|x| (x * n as f64).round() as usize).collect();
                    let exact = update_probs_counts(m, &counts, current);
                    let approx = update_expansion(m, &point, current, n).unwrap();
                    exact.iter().zip(&approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max).ln()
                })
                .collect();
            worst = worst.max(slope_of(&log_n, &log_err).0);
        }
    }
    verdict(worst <= -1.8, format!("largest fitted slope {worst:.4} (need <= -1.8)"))
}

fn shuffle_contraction() -> Check {
    let n = 6usize;
    let target = 1.0 - 1.0 / n as f64 - 2.0 / (n * n) as f64;
    let trials = 1_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut done = 0u64;
    while done < trials {
        let mut a: Vec<usize> = (0..n).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let start = ShuffleState::new(a, b).unwrap();
        let d0 = start.crossings();
        if d0 == 0 {
            continue;
        }
        let ratio = shuffle_step(&start, rng.gen()).crossings() as f64 / d0 as f64;
        sum += ratio;
        sum_sq += ratio * ratio;
        done += 1;
    }
    let mean = sum / trials as f64;
    let se = ((sum_sq / trials as f64 - mean * mean) / (trials - 1) as f64).sqrt();
    let within = (mean - target).abs() <= 3.0 * se;
    let fig = ShuffleState::new(vec![0, 1, 2, 3], vec![2, 3, 0, 1]).unwrap();
    let lace = fig.crossings();
    let fig_ok = lace == 4 && inversion_distance(fig.deck_a(), fig.deck_b()) == 4;
    verdict(
        within && fig_ok,
        format!(
            "measured factor {mean:.5} +- {se:.5} vs 1 - 1/n - 2/n^2 = {target:.5} (3 SE); 1 - 4/n^2 = {:.5}; reference deck pair lace distance {lace}",
            1.0 - 4.0 / (n * n) as f64
        ),
    )
}

fn mixing_definitions() -> Check {
    let eps = [0.01, 0.05, 0.1, 0.25, 0.4];
    let cases = [
        (ModelSpec::blume_capel(1.0, 0.9).unwrap(), 12),
        (ModelSpec::blume_capel(2.0, 1.12).unwrap(), 14),
        (ModelSpec::cwp(3, 2.0).unwrap(), 10),
        (ModelSpec::gcwp(3, 3.0, 5.0).unwrap(), 9),
    ];
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut steps = 0usize;
    let mut monotone = true;
    for (m, n) in &cases {
        let chain = lumped_chain_build(m, *n).map_err(|e| e.to_string())?;
        let profile = mixing_profile(&chain, 200_000, &eps).map_err(|e| e.to_string())?;
        if profile.approximate_dbar {
            return Err(format!("dbar approximate at n={n}"));
        }
        let dbar = profile.dbar.as_ref().ok_or("no dbar")?;
        for (d, db) in profile.d.iter().zip(dbar) {
            worst = worst.max(d - db).max(db - 2.0 * d);
        }
        steps += profile.d.len();
        let times: Vec<u64> = profile.t_mix.iter().map(|t| t.unwrap_or(u64::MAX)).collect();
        monotone &= times.windows(2).all(|w| w[0] >= w[1]);
    }
    verdict(
        worst <= 1e-9 && monotone,
        format!("sandwich max violation {worst:.2e} over {steps} time points (tol 1e-9); t_mix non-increasing in eps: {monotone}"),
    )
}

fn equal_minimizers() -> Check {
    let beta = 2.0;
    let lo = k1(beta).map_err(|e| e.to_string())?.k;
    let hi = kc1(beta).map_err(|e| e.to_string())?.k;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let k = lo + frac * (hi - lo);
        let mut g: Vec<f64> = bc_free_energy_local_minimizers(beta, k, 1e-3).into_iter().map(|p| p.0).collect();
        let rate = BcRateFunction::new(beta, k).map_err(|e| e.to_string())?;
        let mut i: Vec<f64> = rate.local_minimizers(1e-3).into_iter().map(|p| p.0).collect();
        g.sort_by(f64::total_cmp);
        i.sort_by(f64::total_cmp);
        if g.len() != i.len() {
            return Err(format!("K={k:.5}: {} free-energy vs {} rate-function minimizers", g.len(), i.len()));
        }
        for (a, b) in g.iter().zip(&i) {
            worst = worst.max((a - b).abs());
        }
        parts.push(format!("K={k:.5}: {} minimizers", g.len()));
    }
    verdict(worst <= 1e-4, format!("max separation {worst:.2e} (tol 1e-4); {}", parts.join(", ")))
}

fn outcome(id: &'static str, title: &'static str, check: Check, started: Instant) -> Outcome {
    let secs = started.elapsed().as_secs_f64();
    match check {
        Ok(detail) => Outcome { id, title, pass: true, detail: format!("{detail} [{secs:.1}s]") },
        Err(detail) => Outcome { id, title, pass: false, detail: format!("{detail} [{secs:.1}s]") },
    }
}

fn main() {
    let mut outcomes = Vec::new();
    macro_rules! run {
        ($id:expr, $title:expr, $f:expr) => {{
            let t = Instant::now();
            outcomes.push(outcome($id, $title, $f, t));
        }};
    }
    run!("1", "closed-form critical values", closed_form_critical_values());
    run!("2", "GCWP critical consistency", gcwp_critical_consistency());
    run!("3", "aggregate contraction conditions", aggregate_conditions());
    run!("4", "BC rapid mixing", bc_rapid_mixing());
    let t = Instant::now();
    let (a, b) = bc_aggregate_regime();
    outcomes.push(outcome("5a", "BC aggregate regime: path coupling expands", a, t));
    outcomes.push(outcome("5b", "BC aggregate regime: n log n mixing", b, t));
    run!("6", "slow mixing", slow_mixing());
    run!("7", "coupling correctness", coupling_correctness());
    run!("8", "expansion order", expansion_order());
    run!("9", "shuffle contraction", shuffle_contraction());
    run!("10", "mixing definitions", mixing_definitions());
    run!("11", "equal local minimizers", equal_minimizers());
    if summarize(&outcomes) > 0 {
        std::process::exit(1);
    }
}
