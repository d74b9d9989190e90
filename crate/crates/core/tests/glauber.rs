use mixlab::equilibrium::free_energy_general;
use mixlab::glauber::{
    bc_update_probs, expansion_correction, g_jacobian, g_vector, general_update_probs,
    lumped_chain_build, lumped_chain_build_capped, simulate_chain, update_expansion,
    update_probs_counts, UpdateDistribution,
};
use mixlab::mixing::linear_fit;
use mixlab::{Configuration, Error, ModelSpec, SimplexPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn is_probability(p: &[f64]) -> bool {
    p.iter().all(|&v| v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-12
}

#[test]
fn bc_update_example() {
    let d = bc_update_probs(1.0, 1.0, 10, 0).unwrap();
    let edge = 1.0 / (2.0 + 0.9f64.exp());
    assert!(close(d.probs()[0], edge, 1e-15));
    assert!(close(d.probs()[2], edge, 1e-15));
    assert!(close(edge, 0.22423, 1e-5));
    assert!(is_probability(d.probs()));
    assert!(bc_update_probs(1.0, 1.0, 10, 10).is_err());
    assert!(bc_update_probs(1.0, 1.0, 10, -9).is_ok());
}

#[test]
fn bc_update_agrees_with_the_general_kernel() {
    let (beta, k) = (1.7, 0.8);
    let m = ModelSpec::blume_capel(beta, k).unwrap();
    let sigma = Configuration::new(vec![0, 2, 2, 1, 0, 2, 2, 1], 3).unwrap();
    for i in 0..sigma.n() {
        let s_tilde = sigma.magnetization() - (sigma.spin(i) as i64 - 1);
        let a = bc_update_probs(beta, k, sigma.n(), s_tilde).unwrap();
        let b = general_update_probs(&m, &sigma, i).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!(close(*x, *y, 1e-12));
        }
    }
}

#[test]
fn general_update_by_enumeration() {
    let m = ModelSpec::gcwp(3, 2.0, 1.4).unwrap();
    let sigma = Configuration::new(vec![0, 1, 2], 3).unwrap();
    let d = general_update_probs(&m, &sigma, 0).unwrap();

    // oracle: weights exp(-beta n H) of the three candidate configurations
    let weights: Vec<f64> = (0..3)
        .map(|k| {
            let mut next = sigma.clone();
            next.set_spin(0, k);
            let z: Vec<f64> = next.counts().counts().iter().map(|&c| c as f64 / 3.0).collect();
            let h = -z.iter().map(|x| x * x).sum::<f64>() / 2.0;
            (-1.4 * 3.0 * h).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for (p, w) in d.probs().iter().zip(&weights) {
        assert!(close(*p, w / total, 1e-14));
    }

    let swapped = Configuration::new(vec![0, 2, 1], 3).unwrap();
    let e = general_update_probs(&m, &swapped, 0).unwrap();
    for (a, b) in d.probs().iter().zip(e.probs()) {
        assert!(close(*a, *b, 1e-15));
    }
    assert!(general_update_probs(&m, &sigma, 3).is_err());
}

#[test]
fn zero_beta_update_is_uniform() {
    for m in [
        ModelSpec::gcwp(4, 3.0, 0.0).unwrap(),
        ModelSpec::cwp(3, 0.0).unwrap(),
        ModelSpec::blume_capel(0.0, 2.0).unwrap(),
    ] {
        let q = m.q();
        let counts: Vec<usize> = (0..q).map(|k| k + 1).collect();
        let p = update_probs_counts(&m, &counts, 0);
        assert!(p.iter().all(|&v| v == 1.0 / q as f64), "{p:?}");
    }
}

#[test]
fn update_distribution_validation_and_sampling() {
    assert!(UpdateDistribution::new(vec![0.5, 0.6]).is_err());
    assert!(UpdateDistribution::new(vec![-0.1, 1.1]).is_err());
    let d = UpdateDistribution::new(vec![0.2, 0.0, 0.8]).unwrap();
    assert_eq!(d.sample(0.0), 0);
    assert_eq!(d.sample(0.19), 0);
    assert_eq!(d.sample(0.21), 2);
    assert_eq!(d.sample(0.999_999), 2);
}

#[test]
fn update_law_map_examples() {
    let m = ModelSpec::gcwp(3, 2.0, 1.0).unwrap();
    let g = g_vector(&m, &SimplexPoint::new(vec![0.5, 0.3, 0.2]).unwrap()).unwrap();
    let e = [0.5f64.exp(), 0.3f64.exp(), 0.2f64.exp()];
    let s: f64 = e.iter().sum();
    for (a, b) in g.coords().iter().zip(&e) {
        assert!(close(*a, b / s, 1e-15));
    }
    for (a, b) in g.coords().iter().zip([0.39069, 0.31988, 0.28943]) {
        assert!(close(*a, b, 1e-5));
    }
    for (q, r) in [(3, 2.0), (4, 3.0), (5, 2.5)] {
        let m = ModelSpec::gcwp(q, r, 2.3).unwrap();
        let g = g_vector(&m, &SimplexPoint::uniform(q)).unwrap();
        assert!(g.coords().iter().all(|&v| close(v, 1.0 / q as f64, 1e-15)));
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = ModelSpec::gcwp(3, 3.0, 2.5).unwrap();
    for _ in 0..20 {
        let raw: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() + 0.05).collect();
        let z = SimplexPoint::normalized(raw).unwrap();
        let jac = g_jacobian(&m, z.coords()).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut up = z.coords().to_vec();
            let mut dn = z.coords().to_vec();
            up[j] += h;
            dn[j] -= h;
            let g = |v: &[f64]| {
                let logits: Vec<f64> = v.iter().map(|x| 2.5 * x * x).collect();
                mixlab::model::softmax(&logits)
            };
            let (gu, gd) = (g(&up), g(&dn));
            for k in 0..3 {
                assert!(close((gu[k] - gd[k]) / (2.0 * h), jac[k][j], 1e-7));
            }
        }
    }
}

#[test]
fn expansion_is_second_order_accurate() {
    let m = ModelSpec::gcwp(3, 2.0, 1.5).unwrap();
    let z = [0.4, 0.3, 0.3];
    let point = SimplexPoint::new(z.to_vec()).unwrap();
    let ns = [50usize, 100, 200, 400, 800];
    for current in 0..3 {
        let phi = expansion_correction(&m, &z, current).unwrap();
        assert!(phi.iter().sum::<f64>().abs() < 1e-14);
        let mut log_n = Vec::new();
        let mut log_err = Vec::new();
        for &n in &ns {
            let counts: Vec<usize> = z.iter().map(|x| (x * n as f64).round() as usize).collect();
            let exact = update_probs_counts(&m, &counts, current);
            let approx = update_expansion(&m, &point, current, n).unwrap();
            let err = exact.iter().zip(&approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            log_n.push((n as f64).ln());
            log_err.push(err.ln());
        }
        let (_, slope, _, _) = linear_fit(&log_n, &log_err);
        assert!(slope <= -1.8, "current={current}: slope {slope}");
    }
    // the correction vanishes as n grows
    let g = g_vector(&m, &point).unwrap();
    let far = update_expansion(&m, &point, 1, 1_000_000_000).unwrap();
    for (a, b) in far.iter().zip(g.coords()) {
        assert!(close(*a, *b, 1e-8));
    }
}

/// `grad G(z) = beta (-Hess H)(z) [grad (-H)^*(-grad H(z)) - g(z)]`; the
/// conjugate's gradient at `-grad H(z)` is `z` itself for these energies.
#[test]
fn free_energy_gradient_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (r, beta) in [(2.0, 1.3), (3.0, 2.0)] {
        let m = ModelSpec::gcwp(3, r, beta).unwrap();
        for _ in 0..20 {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() + 0.1).collect();
            let z = SimplexPoint::normalized(raw).unwrap();
            let g = g_vector(&m, &z).unwrap();
            let h = 1e-4;
            // directional derivatives along e_j - e_k stay on the simplex
            let hess: Vec<f64> = z.coords().iter().map(|x| (r - 1.0) * x.powf(r - 2.0)).collect();
            let grad: Vec<f64> = (0..3)
                .map(|j| beta * hess[j] * (z.coords()[j] - g.coords()[j]))
                .collect();
            for (j, k) in [(0, 1), (1, 2), (0, 2)] {
                let mut up = z.coords().to_vec();
                let mut dn = z.coords().to_vec();
                up[j] += h;
                up[k] -= h;
                dn[j] -= h;
                dn[k] += h;
                let fu = free_energy_general(&m, &SimplexPoint::new(up).unwrap()).unwrap();
                let fdn = free_energy_general(&m, &SimplexPoint::new(dn).unwrap()).unwrap();
                let fd = (fu - fdn) / (2.0 * h);
                assert!(close(fd, grad[j] - grad[k], 1e-4), "r={r}: {fd} vs {}", grad[j] - grad[k]);
            }
        }
    }
}

#[test]
fn simulation_is_deterministic_and_starts_at_initial_counts() {
    let m = ModelSpec::blume_capel(1.0, 0.7).unwrap();
    let init = Configuration::new(vec![0, 0, 1, 2, 2, 2, 1, 0], 3).unwrap();
    let t = simulate_chain(&m, &init, 0, 1, 5).unwrap();
    assert_eq!(t.counts, vec![init.counts().counts().to_vec()]);
    assert_eq!(t.final_config, init);

    let a = simulate_chain(&m, &init, 4900, 7, 99).unwrap();
    let b = simulate_chain(&m, &init, 4900, 7, 99).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.final_config.counts().counts(), a.counts.last().unwrap().as_slice());
    assert!(a.counts.iter().all(|c| c.iter().sum::<usize>() == 8));
    assert!(simulate_chain(&ModelSpec::cwp(4, 1.0).unwrap(), &init, 1, 1, 1).is_err());
}

#[test]
fn zero_beta_occupation_matches_multinomial_marginals() {
    let (n, q) = (10usize, 3usize);
    let m = ModelSpec::cwp(q, 0.0).unwrap();
    let init = Configuration::constant(n, q, 0).unwrap();
    let stride = 10;
    let traj = simulate_chain(&m, &init, 1_000_000, stride, 2024).unwrap();
    let samples = &traj.counts[1000..];
    // batch means absorb the autocorrelation of successive records
    let batches = 100;
    let per = samples.len() / batches;
    for k in 0..q {
        let means: Vec<f64> = (0..batches)
            .map(|b| samples[b * per..(b + 1) * per].iter().map(|c| c[k] as f64).sum::<f64>() / per as f64)
            .collect();
        let mean = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt();
        let expected = n as f64 / q as f64;
        assert!((mean - expected).abs() < 4.0 * se, "label {k}: {mean} vs {expected} (se {se})");

        // second moment against the binomial variance n p (1 - p)
        let p = 1.0 / q as f64;
        let second: f64 = samples.iter().map(|c| (c[k] as f64 - expected).powi(2)).sum::<f64>()
            / samples.len() as f64;
        assert!(close(second, n as f64 * p * (1.0 - p), 0.1));
    }
}

#[test]
fn simulated_occupation_matches_lumped_stationary_law() {
    let m = ModelSpec::blume_capel(1.0, 0.8).unwrap();
    let n = 20;
    let chain = lumped_chain_build(&m, n).unwrap();
    let init = Configuration::constant(n, 3, 1).unwrap();
    // records spaced far beyond the relaxation time are close to independent
    let stride = 400;
    let records = 20_000u64;
    let traj = simulate_chain(&m, &init, stride * records, stride, 77).unwrap();
    let mut hits = vec![0f64; chain.len()];
    for c in &traj.counts[1..] {
        hits[chain.index_of(c).unwrap()] += 1.0;
    }
    let total = records as f64;

    // pool cells with expected count below 5
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut acc_o, mut acc_e) = (0.0, 0.0);
    let mut order: Vec<usize> = (0..chain.len()).collect();
    order.sort_by(|&a, &b| chain.pi[a].partial_cmp(&chain.pi[b]).unwrap());
    for i in order {
        acc_o += hits[i];
        acc_e += chain.pi[i] * total;
        if acc_e >= 5.0 {
            cells.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += acc_o;
        last.1 += acc_e;
    }
    let chi2: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    // Wilson-Hilferty: p > 0.01 exactly when this normal score is below 2.326
    let score = ((chi2 / dof).cbrt() - (1.0 - 2.0 / (9.0 * dof))) / (2.0 / (9.0 * dof)).sqrt();
    assert!(score < 2.326, "chi2 {chi2} on {dof} dof");
}

#[test]
fn two_site_chain_matches_brute_force() {
    // beta = 0, q = 2, n = 2: a uniform vertex is refreshed uniformly
    let m = ModelSpec::cwp(2, 0.0).unwrap();
    let chain = lumped_chain_build(&m, 2).unwrap();
    let mut brute = [[0.0; 3]; 3];
    for config in 0..4usize {
        let spins = [config & 1, config >> 1];
        let from = spins.iter().filter(|&&s| s == 0).count();
        for i in 0..2 {
            for new in 0..2 {
                let mut next = spins;
                next[i] = new;
                let to = next.iter().filter(|&&s| s == 0).count();
                brute[from][to] += 0.25;
            }
        }
    }
    // each lumped state is the average over its configurations
    let multiplicity = [1.0, 2.0, 1.0];
    for a in 0..3 {
        for b in 0..3 {
            brute[a][b] /= multiplicity[a];
        }
    }
    for a in 0..3 {
        let ia = chain.index_of(&[a, 2 - a]).unwrap();
        for b in 0..3 {
            let ib = chain.index_of(&[b, 2 - b]).unwrap();
            assert!(close(chain.p.get(ia, ib), brute[a][b], 1e-15), "{a}->{b}");
        }
    }
    assert!(chain.pi.iter().zip([0.25, 0.5, 0.25]).all(|(a, b)| close(*a, b, 1e-15)));
}

#[test]
fn lumped_chain_matches_full_chain_projection() {
    let m = ModelSpec::gcwp(3, 2.0, 1.9).unwrap();
    let n = 4;
    let chain = lumped_chain_build(&m, n).unwrap();
    let weight = |spins: &[usize]| {
        let mut z = [0.0; 3];
        for &s in spins {
            z[s] += 1.0 / n as f64;
        }
        (-m.beta * n as f64 * m.energy(&z)).exp()
    };
    let configs: Vec<Vec<usize>> = (0..81usize)
        .map(|c| (0..n).map(|i| (c / 3usize.pow(i as u32)) % 3).collect())
        .collect();
    let counts_of = |s: &[usize]| {
        let mut c = vec![0; 3];
        for &x in s {
            c[x] += 1;
        }
        c
    };
    let mut flow = vec![vec![0.0; chain.len()]; chain.len()];
    let mut mass = vec![0.0; chain.len()];
    let z_total: f64 = configs.iter().map(|c| weight(c)).sum();
    for s in &configs {
        let a = chain.index_of(&counts_of(s)).unwrap();
        let w = weight(s) / z_total;
        mass[a] += w;
        for i in 0..n {
            let cands: Vec<Vec<usize>> = (0..3)
                .map(|k| {
                    let mut t = s.clone();
                    t[i] = k;
                    t
                })
                .collect();
            let ws: Vec<f64> = cands.iter().map(|t| weight(t)).collect();
            let tot: f64 = ws.iter().sum();
            for (t, wt) in cands.iter().zip(&ws) {
                let b = chain.index_of(&counts_of(t)).unwrap();
                flow[a][b] += w * wt / tot / n as f64;
            }
        }
    }
    for a in 0..chain.len() {
        assert!(close(chain.pi[a], mass[a], 1e-13));
        for b in 0..chain.len() {
            assert!(close(chain.p.get(a, b), flow[a][b] / mass[a], 1e-12));
        }
    }
}

#[test]
fn lumped_chain_is_stochastic_and_reversible() {
    let m = ModelSpec::blume_capel(1.0, 1.0).unwrap();
    let chain = lumped_chain_build(&m, 30).unwrap();
    assert_eq!(chain.len(), 31 * 32 / 2);
    assert!(chain.row_sum_residual() < 1e-12);
    assert!(chain.reversibility_residual() < 1e-10);
    assert!(chain.stationarity_residual() < 1e-12);

    // stationary law is multinomial times the Gibbs factor
    let ln_fact = |k: usize| (1..=k).map(|v| (v as f64).ln()).sum::<f64>();
    let logw: Vec<f64> = chain
        .states
        .iter()
        .map(|s| {
            let c = s.counts();
            let z: Vec<f64> = c.iter().map(|&x| x as f64 / 30.0).collect();
            ln_fact(30) - c.iter().map(|&x| ln_fact(x)).sum::<f64>() - 30.0 * m.energy(&z)
        })
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logw.iter().map(|l| (l - top).exp()).sum();
    for (p, l) in chain.pi.iter().zip(&logw) {
        assert!(close(*p, (l - top).exp() / total, 1e-12));
    }
}

#[test]
fn lumped_chain_respects_the_cap() {
    let m = ModelSpec::cwp(4, 1.0).unwrap();
    let err = lumped_chain_build_capped(&m, 30, 1000).unwrap_err();
    assert!(matches!(err, Error::SizeCap { states: 5456, cap: 1000 }));
    assert!(lumped_chain_build(&m, 0).is_err());
}
