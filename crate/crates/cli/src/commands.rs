use mixlab::apc::check_all_conditions;
use mixlab::coupling::{
    bc_rapid_bound, coupling_time_mc, sample_stationary_configuration, shuffle_coupling_times,
    CouplingTimes, ShuffleState,
};
use mixlab::equilibrium::{bc_critical_values, potts_critical_values, CriticalValues};
use mixlab::glauber::{lumped_chain_build, simulate_chain, LumpedChain};
use mixlab::mixing::{exact_mixing_time, fit_growth, spectral_gap, tv_distance, Growth};
use mixlab::{Configuration, Error, ModelSpec};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, fmt_opt, fmt_opt_f64, Report};
use crate::CliError;

/// Exit status of a completed run whose check did not pass.
pub const STATUS_CHECK_FAILED: i32 = 1;
/// Exit status when a command refuses to evaluate the requested point.
pub const STATUS_REFUSED: i32 = 3;

/// Mixed into the seed when drawing an equilibrium start, so the draw is
/// independent of replica 0.
const START_SALT: u64 = 0x5eed_5a17_0000_0001;

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result serializes")
}

fn growth_name(g: Growth) -> &'static str {
    match g {
        Growth::NLogN => "n log n",
        Growth::Exponential => "exponential",
        Growth::Undetermined => "undetermined",
    }
}

pub fn critical(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    if cfg.family()? == "bc" {
        let rows: Vec<(f64, CriticalValues)> = cfg
            .beta
            .par_iter()
            .map(|&beta| {
                if beta.is_finite() && beta >= 0.0 {
                    (beta, bc_critical_values(beta))
                } else {
                    let notes = vec![format!("beta = {beta} is not a finite nonnegative number")];
                    (beta, CriticalValues { notes, ..Default::default() })
                }
            })
            .collect();
        let mut report = Report::new(&["beta", "kc2", "k1", "kc1", "wc", "k1_residual", "kc1_residual", "notes"]);
        let mut json_rows = Vec::new();
        for (beta, cv) in &rows {
            report.rows.push(vec![
                fmt_f64(*beta),
                fmt_opt_f64(cv.kc2),
                fmt_opt_f64(cv.k1),
                fmt_opt_f64(cv.kc1),
                fmt_opt_f64(cv.wc),
                fmt_opt_f64(cv.residuals.get("k1").copied()),
                fmt_opt_f64(cv.residuals.get("kc1").copied()),
                cv.notes.join("; "),
            ]);
            let mut v = to_value(cv);
            v["beta"] = json!(beta);
            json_rows.push(v);
        }
        report.result = json!({ "model": "bc", "rows": json_rows });
        return Ok(report);
    }
    let q = cfg.q()?;
    let r = potts_exponent(cfg)?;
    let cv = potts_critical_values(q, r);
    let mut report = Report::new(&["q", "r", "beta_c", "beta_s", "beta_c_width", "beta_s_width", "notes"]);
    report.rows.push(vec![
        q.to_string(),
        fmt_f64(r),
        fmt_opt_f64(cv.beta_c),
        fmt_opt_f64(cv.beta_s),
        fmt_opt_f64(cv.residuals.get("beta_c").copied()),
        fmt_opt_f64(cv.residuals.get("beta_s").copied()),
        cv.notes.join("; "),
    ]);
    let mut v = to_value(&cv);
    v["q"] = json!(q);
    v["r"] = json!(r);
    report.result = json!({ "model": cfg.family()?, "rows": [v] });
    Ok(report)
}

fn potts_exponent(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    match (cfg.family()?, cfg.r) {
        ("cwp", Some(r)) if r != 2.0 => Err(CliError::Usage("cwp has r = 2; use --model gcwp".into())),
        _ => Ok(cfg.r()),
    }
}

pub fn verify(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    if cfg.family()? == "bc" {
        return Err(CliError::Usage("verify applies to the cwp and gcwp models".into()));
    }
    potts_exponent(cfg)?;
    let m = cfg.model_spec()?;
    let mesh = cfg.mesh.unwrap_or(0.01);
    let eps = cfg.eps.unwrap_or(0.02);
    let mut report = Report::new(&["condition", "verdict", "worst_ratio", "threshold", "margin", "witness"]);
    match check_all_conditions(&m, mesh, eps) {
        Ok(bundle) => {
            for rep in &bundle.reports {
                let witness = rep
                    .witness
                    .as_ref()
                    .map(|w| w.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" "))
                    .unwrap_or_default();
                report.rows.push(vec![
                    to_value(&rep.condition).as_str().unwrap_or_default().to_string(),
                    to_value(&rep.verdict).as_str().unwrap_or_default().to_string(),
                    fmt_f64(rep.worst_ratio),
                    fmt_f64(rep.threshold),
                    fmt_f64(rep.margin),
                    witness,
                ]);
            }
            let hold = bundle.rapid_mixing_conditions_hold;
            report.notes.push(format!("rapid-mixing conditions hold: {hold}"));
            if !hold {
                report.status = STATUS_CHECK_FAILED;
            }
            report.result = json!({ "status": "evaluated", "bundle": to_value(&bundle) });
        }
        Err(Error::MultiPhase { count, witness }) => {
            let reason = format!("beta = {} is multi-phase: {count} equilibrium macrostates", m.beta);
            report.notes.push(format!("refused: {reason}"));
            for w in &witness {
                report.notes.push(format!("macrostate {}", w.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")));
            }
            report.status = STATUS_REFUSED;
            report.result = json!({ "status": "refused", "reason": reason, "witness": witness });
        }
        Err(e) => return Err(e.into()),
    }
    Ok(report)
}

struct MixPoint {
    n: usize,
    states: Option<usize>,
    t_mix: Option<u64>,
    method: Option<Value>,
    approximate_starts: bool,
    gap: Option<f64>,
    t_rel: Option<f64>,
    lower: Option<f64>,
    upper: Option<u64>,
    regime: Option<Value>,
    note: String,
}

impl MixPoint {
    fn sandwich(&self) -> Option<bool> {
        let t = self.t_mix? as f64;
        let lower_ok = self.lower.map_or(true, |l| l <= t + 1e-9);
        let upper_ok = self.upper.map_or(true, |u| t <= u as f64);
        Some(lower_ok && upper_ok)
    }
}

fn mix_point(m: &ModelSpec, n: usize, eps: f64, cap: u64) -> MixPoint {
    let mut p = MixPoint {
        n,
        states: None,
        t_mix: None,
        method: None,
        approximate_starts: false,
        gap: None,
        t_rel: None,
        lower: None,
        upper: None,
        regime: None,
        note: String::new(),
    };
    let chain = match lumped_chain_build(m, n) {
        Ok(c) => c,
        Err(e) => {
            p.note = format!("skipped: {e}");
            return p;
        }
    };
    p.states = Some(chain.len());
    let mut notes = Vec::new();
    match exact_mixing_time(&chain, eps, cap) {
        Ok(mt) => {
            p.t_mix = mt.t_mix;
            p.method = Some(to_value(&mt.method));
            p.approximate_starts = mt.approximate_starts;
            if mt.t_mix.is_none() {
                notes.push(format!("censored at {cap} steps"));
            }
        }
        Err(e) => notes.push(format!("mixing time: {e}")),
    }
    match spectral_gap(&chain) {
        Ok(s) => {
            p.gap = Some(s.gap);
            p.t_rel = Some(s.relaxation_time);
            p.lower = Some(((s.relaxation_time - 1.0) * (1.0 / (2.0 * eps)).ln()).max(0.0));
        }
        Err(e) => notes.push(format!("spectral gap: {e}")),
    }
    if let mixlab::Family::BlumeCapel { k } = m.family {
        match bc_rapid_bound(m.beta, k, n as u64, eps) {
            Ok(b) => {
                p.upper = Some(b.steps);
                p.regime = Some(to_value(&b.regime));
            }
            Err(e) => notes.push(format!("no upper bound: {e}")),
        }
    }
    p.note = notes.join("; ");
    p
}

pub fn mix(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let m = cfg.model_spec()?;
    if cfg.n.is_empty() {
        return Err(CliError::Usage("--n is required".into()));
    }
    let eps = cfg.eps.unwrap_or(0.25);
    let cap = cfg.t_max.unwrap_or(1_000_000);
    let points: Vec<MixPoint> = cfg.n.par_iter().map(|&n| mix_point(&m, n, eps, cap)).collect();

    let mut report = Report::new(&[
        "n",
        "states",
        "t_mix",
        "method",
        "approximate_starts",
        "spectral_gap",
        "relaxation_time",
        "lower_bound",
        "upper_bound",
        "bound_regime",
        "sandwich",
        "note",
    ]);
    let str_of = |v: &Option<Value>| v.as_ref().and_then(|v| v.as_str()).unwrap_or_default().to_string();
    let mut json_points = Vec::new();
    for p in &points {
        report.rows.push(vec![
            p.n.to_string(),
            fmt_opt(p.states),
            fmt_opt(p.t_mix),
            str_of(&p.method),
            p.approximate_starts.to_string(),
            fmt_opt_f64(p.gap),
            fmt_opt_f64(p.t_rel),
            fmt_opt_f64(p.lower),
            fmt_opt(p.upper),
            str_of(&p.regime),
            fmt_opt(p.sandwich()),
            p.note.clone(),
        ]);
        json_points.push(json!({
            "n": p.n,
            "states": p.states,
            "t_mix": p.t_mix,
            "method": p.method,
            "approximate_starts": p.approximate_starts,
            "spectral_gap": p.gap,
            "relaxation_time": p.t_rel,
            "lower_bound": p.lower,
            "upper_bound": p.upper,
            "bound_regime": p.regime,
            "sandwich": p.sandwich(),
            "note": p.note,
        }));
    }

    let (ns, ts): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.t_mix.map(|t| (p.n as f64, t.max(1) as f64)))
        .unzip();
    let fit = if ns.len() >= 2 { fit_growth(&ns, &ts).ok() } else { None };
    match &fit {
        Some(f) => report.notes.push(format!(
            "classification={} power_exponent={} power_r2={} nlogn_a={} exp_c={}",
            growth_name(f.classification),
            fmt_f64(f.power_exponent),
            fmt_f64(f.power_r2),
            fmt_f64(f.nlogn_a),
            fmt_f64(f.exp_c)
        )),
        None => report.notes.push("no fit: fewer than two mixing times".into()),
    }
    if points.iter().any(|p| p.sandwich() == Some(false)) {
        report.status = STATUS_CHECK_FAILED;
    }
    let fit_json = fit.as_ref().map(|f| {
        let mut v = to_value(f);
        v["classification"] = json!(growth_name(f.classification));
        v
    });
    report.result = json!({ "model": to_value(&m), "eps": eps, "points": json_points, "fit": fit_json });
    Ok(report)
}

fn summary(times: &CouplingTimes) -> Value {
    let done: Vec<u64> = times.tau.iter().zip(&times.censored).filter(|(_, &c)| !c).map(|(&t, _)| t).collect();
    let mean = (!done.is_empty()).then(|| done.iter().sum::<u64>() as f64 / done.len() as f64);
    json!({
        "replicas": times.replicas(),
        "censored": times.censored_count(),
        "mean_uncensored": mean,
        "median": times.quantile(0.5),
        "q90": times.quantile(0.9),
        "q99": times.quantile(0.99),
        "warning": times.warning,
    })
}

fn summary_line(s: &Value) -> String {
    let field = |k: &str| match &s[k] {
        Value::Null => String::new(),
        Value::Number(x) => x.to_string(),
        other => other.to_string(),
    };
    format!(
        "replicas={} censored={} mean_uncensored={} median={} q90={} q99={}",
        field("replicas"),
        field("censored"),
        field("mean_uncensored"),
        field("median"),
        field("q90"),
        field("q99")
    )
}

/// Largest excess of the exact lumped `TV(P^t(x, .), P^t(y, .))` over the
/// empirical coupling survival, with a 4-sigma binomial allowance.
fn dominance(chain: &LumpedChain, x: &Configuration, y: &Configuration, times: &CouplingTimes) -> Value {
    let point = |c: &Configuration| {
        let mut v = vec![0.0; chain.len()];
        v[chain.index_of(c.counts().counts()).expect("state in chain")] = 1.0;
        v
    };
    let (mut mu, mut nu) = (point(x), point(y));
    let (mut mu2, mut nu2) = (vec![0.0; chain.len()], vec![0.0; chain.len()]);
    let horizon = times.tau.iter().copied().max().unwrap_or(0);
    let reps = times.replicas() as f64;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    for t in 0..=horizon {
        let tv = tv_distance(&mu, &nu).expect("probability vectors");
        let s = times.survival(t);
        let se = (tv * (1.0 - tv) / reps).sqrt();
        worst = worst.max(tv - s);
        if s + 4.0 * se + 1e-3 < tv {
            pass = false;
        }
        if tv < 1e-9 {
            break;
        }
        chain.p.mul_left(&mu, &mut mu2);
        chain.p.mul_left(&nu, &mut nu2);
        std::mem::swap(&mut mu, &mut mu2);
        std::mem::swap(&mut nu, &mut nu2);
    }
    json!({ "checked": true, "pass": pass, "max_excess": worst })
}

fn couple_shuffle(cfg: &ExperimentConfig, seed: u64) -> Result<Report, CliError> {
    let n = cfg.single_n()?;
    if n < 2 {
        return Err(CliError::Usage("shuffle needs n >= 2".into()));
    }
    let start = ShuffleState::new((0..n).collect(), (0..n).rev().collect())?;
    let times = shuffle_coupling_times(&start, seed, cfg.max_steps.unwrap_or(1_000_000), cfg.replicas.unwrap_or(1000));
    let s = summary(&times);
    let scale = 2.0 * n as f64 * (n as f64).ln();
    let mut report = times_report(&times);
    report.notes.push(summary_line(&s));
    report.notes.push(format!("reference_2n_log_n={}", fmt_f64(scale)));
    report.result = json!({
        "start": "shuffle",
        "n": n,
        "deck_a": start.deck_a(),
        "deck_b": start.deck_b(),
        "reference_2n_log_n": scale,
        "summary": s,
        "times": to_value(&times),
    });
    Ok(report)
}

fn times_report(times: &CouplingTimes) -> Report {
    let mut report = Report::new(&["replica", "tau", "censored"]);
    for (i, (t, c)) in times.tau.iter().zip(&times.censored).enumerate() {
        report.rows.push(vec![i.to_string(), t.to_string(), c.to_string()]);
    }
    if let Some(w) = &times.warning {
        report.notes.push(format!("warning: {w}"));
    }
    report
}

pub fn couple(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let seed = cfg.require_seed()?;
    let start = cfg.start.as_deref().unwrap_or("corners");
    if start == "shuffle" {
        return couple_shuffle(cfg, seed);
    }
    let m = cfg.model_spec()?;
    let q = m.q();
    let explicit = cfg.explicit_starts(q)?;
    let n = match &explicit {
        Some((x, _)) => x.n(),
        None => cfg.single_n()?,
    };
    let chain = lumped_chain_build(&m, n).ok();
    let (label, x, y) = match explicit {
        Some((x, y)) => ("explicit", x, y),
        None => match start {
            "corners" => ("corners", Configuration::constant(n, q, 0)?, Configuration::constant(n, q, q - 1)?),
            "equilibrium-vs-corner" => {
                let chain = chain
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("equilibrium start needs the lumped chain; n is too large".into()))?;
                let x = sample_stationary_configuration(chain, seed ^ START_SALT)?;
                ("equilibrium-vs-corner", x, Configuration::constant(n, q, 0)?)
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown start {other:?}; use corners, equilibrium-vs-corner, shuffle or --x/--y"
                )))
            }
        },
    };
    let max_steps = cfg.max_steps.unwrap_or(1_000_000);
    let times = coupling_time_mc(&m, &x, &y, seed, max_steps, cfg.replicas.unwrap_or(1000))?;
    let s = summary(&times);
    let dom = match &chain {
        Some(c) => dominance(c, &x, &y, &times),
        None => json!({ "checked": false }),
    };
    let mut report = times_report(&times);
    report.notes.push(summary_line(&s));
    if dom["checked"] == json!(true) {
        let pass = dom["pass"] == json!(true);
        report.notes.push(format!("dominance={} max_excess={}", if pass { "pass" } else { "fail" }, dom["max_excess"]));
        if !pass {
            report.status = STATUS_CHECK_FAILED;
        }
    }
    report.result = json!({
        "model": to_value(&m),
        "start": label,
        "x": x.spins(),
        "y": y.spins(),
        "summary": s,
        "dominance": dom,
        "times": to_value(&times),
    });
    Ok(report)
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let seed = cfg.require_seed()?;
    let m = cfg.model_spec()?;
    let q = m.q();
    let initial = match (&cfg.x, cfg.start.as_deref()) {
        (Some(x), _) => Configuration::new(x.clone(), q)?,
        (None, None | Some("corner")) => Configuration::constant(cfg.single_n()?, q, 0)?,
        (None, Some("equilibrium")) => {
            let chain = lumped_chain_build(&m, cfg.single_n()?)?;
            sample_stationary_configuration(&chain, seed ^ START_SALT)?
        }
        (None, Some(other)) => {
            return Err(CliError::Usage(format!("unknown start {other:?}; use corner, equilibrium or --x")))
        }
    };
    let n = initial.n() as u64;
    let steps = cfg.steps.unwrap_or(100 * n);
    let stride = cfg.stride.unwrap_or(n);
    let traj = simulate_chain(&m, &initial, steps, stride, seed)?;
    let mut columns: Vec<String> = vec!["step".into()];
    columns.extend((0..q).map(|k| format!("count_{k}")));
    if m.is_blume_capel() {
        columns.push("magnetization".into());
    }
    let mut report = Report { columns, ..Default::default() };
    for (t, c) in traj.steps.iter().zip(&traj.counts) {
        let mut row = vec![t.to_string()];
        row.extend(c.iter().map(|x| x.to_string()));
        if m.is_blume_capel() {
            row.push((c[2] as i64 - c[0] as i64).to_string());
        }
        report.rows.push(row);
    }
    report.result = json!({ "model": to_value(&m), "initial": initial.spins(), "trajectory": to_value(&traj) });
    Ok(report)
}
