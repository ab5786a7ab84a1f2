//! Cross-module statistical consistency: the independent samplers, the path
//! representation estimators, and the closed-form laws must all describe the
//! same distributions.

mod common;

use common::{chi_square_gof, chi_square_pvalue, merge_tail, two_sample_chi_square};
use yule_simon::asymptotics::malthusian_growth_check;
use yule_simon::cmj::{
    sample_total_progeny, sample_x, simulate_genealogy, simulate_genealogy_to_horizon,
    simulate_path, ProgenyOutcome,
};
use yule_simon::distributions::{
    extinction_probability, mean_x, prob_x_equals_one, survival_theta0, yule_simon_pmf_theta0,
};
use yule_simon::exec::run_batched;
use yule_simon::forest::{run_forest_experiment, MutationRegime};
use yule_simon::rng::replicate_stream;
use yule_simon::summary::MeanAccumulator;
use yule_simon::asymptotics::{fit_exponential_tail, fit_power_tail};
use yule_simon::distributions::{first_passage_log_rate, mean_y_at};
use yule_simon::tail::{
    direct_curve, estimate_survival_representation, estimate_survival_tilted,
    passage_probability_curve, representation_curve, tilted_curve, CurvePoint, Estimator,
    TailCurve,
};
use yule_simon::ModelParams;

#[test]
fn sample_x_reproduces_mean_and_pmf_at_theta0() {
    let params = ModelParams::new(0.0, 2.0).unwrap();
    let replicates = 1_000_000u64;
    let (acc, counts) = run_batched(
        101,
        replicates,
        || (MeanAccumulator::default(), vec![0u64; 12]),
        |(acc, counts), _i, rng| {
            let x = sample_x(&params, rng);
            acc.add(x as f64);
            counts[(x as usize).min(11)] += 1;
        },
        |(a, ac), (b, bc)| {
            a.merge(&b);
            for (x, y) in ac.iter_mut().zip(bc.iter()) {
                *x += y;
            }
        },
    );
    let mean = mean_x(&params);
    assert!(
        (acc.mean() - mean).abs() < 4.0 * acc.stderr(),
        "mean {} vs {mean} (se {})",
        acc.mean(),
        acc.stderr()
    );
    // empirical pmf at k = 1..10 within 4 binomial standard errors
    let r = replicates as f64;
    for k in 1..=10u64 {
        let pmf = yule_simon_pmf_theta0(2.0, k).unwrap();
        let freq = counts[k as usize] as f64 / r;
        let se = (pmf * (1.0 - pmf) / r).sqrt();
        assert!(
            (freq - pmf).abs() < 4.0 * se,
            "k={k}: freq={freq} pmf={pmf}"
        );
    }
}

#[test]
fn genealogy_parents_are_uniform_for_standard_process() {
    // at theta = 0 the parent of individual l is uniform on 1..l-1
    let runs = 100_000u64;
    let parent_counts = run_batched(
        102,
        runs,
        || vec![vec![0u64; 10]; 3], // histograms for l = 3, 5, 10
        |hists, _i, rng| {
            let genealogy = simulate_genealogy(0.0, 10, rng).unwrap().into_records();
            for (slot, l) in [(0usize, 3usize), (1, 5), (2, 10)] {
                hists[slot][genealogy[l - 1].parent as usize - 1] += 1;
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                for (u, v) in x.iter_mut().zip(y.iter()) {
                    *u += v;
                }
            }
        },
    );
    for (slot, l) in [(0usize, 3u64), (1, 5), (2, 10)] {
        let observed: Vec<u64> = parent_counts[slot][..(l - 1) as usize].to_vec();
        let expected = vec![runs as f64 / (l - 1) as f64; (l - 1) as usize];
        let (stat, p) = chi_square_gof(&observed, &expected);
        assert!(p > 0.01, "l={l}: stat={stat} p={p}");
    }
}

#[test]
fn genealogy_and_aggregate_path_agree_in_law() {
    // number of births before t = 1, horizon runs of both simulators
    for &theta in &[-1.0f64, 0.0, 0.5] {
        let runs = 100_000u64;
        let bins = 40usize;
        let from_queue = run_batched(
            103,
            runs,
            || vec![0u64; bins],
            |hist, _i, rng| {
                let records = simulate_genealogy_to_horizon(theta, 1.0, rng).unwrap();
                hist[(records.len() - 1).min(bins - 1)] += 1;
            },
            |a, b| {
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += y;
                }
            },
        );
        let from_state = run_batched(
            104,
            runs,
            || vec![0u64; bins],
            |hist, _i, rng| {
                let path = simulate_path(theta, 1.0, rng).unwrap();
                hist[(path.events.len() - 1).min(bins - 1)] += 1;
            },
            |a, b| {
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += y;
                }
            },
        );
        let (stat, p) = two_sample_chi_square(&from_queue, &from_state);
        assert!(p > 0.01, "theta={theta}: stat={stat} p={p}");
    }
}

#[test]
fn progeny_of_one_matches_borel_mass() {
    // P(progeny = 1) = e^{-1/theta'} with theta' = 1.5: e^{-2/3}
    let runs = 100_000u64;
    let ones = run_batched(
        105,
        runs,
        || 0u64,
        |count, _i, rng| {
            if sample_total_progeny(1.5, 1_000_000, rng).unwrap() == ProgenyOutcome::Finite(1) {
                *count += 1;
            }
        },
        |a, b| *a += b,
    );
    let p = (-2.0f64 / 3.0).exp();
    let freq = ones as f64 / runs as f64;
    let se = (p * (1.0 - p) / runs as f64).sqrt();
    assert!((freq - p).abs() < 4.0 * se, "freq={freq} p={p}");
}

#[test]
fn extinct_fraction_matches_fixed_point_at_default_style_cap() {
    // theta = 0.5, cap 1e6: extinct fraction near q = 0.2032
    let runs = 300u64;
    let extinct = run_batched(
        106,
        runs,
        || 0u64,
        |count, _i, rng| {
            if matches!(
                sample_total_progeny(0.5, 1_000_000, rng).unwrap(),
                ProgenyOutcome::Finite(_)
            ) {
                *count += 1;
            }
        },
        |a, b| *a += b,
    );
    let q = extinction_probability(0.5).unwrap();
    let freq = extinct as f64 / runs as f64;
    let se = (q * (1.0 - q) / runs as f64).sqrt();
    assert!((freq - q).abs() < 3.0 * se, "freq={freq} q={q}");
}

#[test]
fn three_estimators_are_mutually_consistent() {
    let replicates = 100_000u64;
    let ns = [1u64, 5, 10, 25];
    for &theta in &[-1.0f64, 0.0, 0.5, 1.0, 2.0] {
        for &rho in &[1.0f64, 2.0] {
            let params = ModelParams::new(theta, rho).unwrap();
            let direct = direct_curve(&params, 25, replicates, 107).unwrap();
            let repr = representation_curve(&params, &ns, replicates, 108).unwrap();
            let tilt = tilted_curve(&params, &ns, 1.0, replicates, 109).unwrap();
            for &n in &ns {
                let triple = [
                    direct.point(n).unwrap(),
                    repr.point(n).unwrap(),
                    tilt.point(n).unwrap(),
                ];
                for i in 0..3 {
                    for j in (i + 1)..3 {
                        let (a, b) = (triple[i], triple[j]);
                        let combined = a.stderr.hypot(b.stderr);
                        assert!(
                            (a.estimate - b.estimate).abs() <= 4.0 * combined.max(1e-12),
                            "theta={theta} rho={rho} n={n} pair {i}{j}: {} vs {}",
                            a.estimate,
                            b.estimate
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn representation_at_one_matches_quadrature_complement() {
    // P(X > 1) must equal 1 - P(X = 1) computed by adaptive quadrature,
    // exercised away from theta = 0 where no closed form exists
    for &(theta, rho) in &[(0.5f64, 1.0f64), (2.0, 1.0), (-1.0, 1.0)] {
        let params = ModelParams::new(theta, rho).unwrap();
        let (est, se) = estimate_survival_representation(&params, 1, 400_000, 110).unwrap();
        let complement = 1.0 - prob_x_equals_one(&params, 1e-10).unwrap();
        assert!(
            (est - complement).abs() < 4.0 * se,
            "theta={theta}: {est} vs {complement} (se {se})"
        );
    }
}

#[test]
fn tilt_is_unbiased_and_reduces_variance_in_the_light_tail() {
    let params = ModelParams::new(2.0, 1.0).unwrap();
    // unbiasedness at a reachable n: tilted vs plain at different budgets
    let (plain, plain_se) = estimate_survival_representation(&params, 10, 2_000_000, 111).unwrap();
    let (tilted, tilted_se) = estimate_survival_tilted(&params, 10, 2.0, 200_000, 112).unwrap();
    let combined = plain_se.hypot(tilted_se);
    assert!(
        (plain - tilted).abs() < 4.0 * combined,
        "plain={plain} tilted={tilted} combined se={combined}"
    );

    // variance reduction: relative stderr strictly smaller under lambda=theta
    let budget = 200_000u64;
    for n in [20u64, 30, 40] {
        let (pe, ps) = estimate_survival_representation(&params, n, budget, 113).unwrap();
        let (te, ts) = estimate_survival_tilted(&params, n, 2.0, budget, 114).unwrap();
        assert!(pe > 0.0 && te > 0.0, "n={n}: degenerate estimates");
        let rel_plain = ps / pe;
        let rel_tilted = ts / te;
        assert!(
            rel_tilted < rel_plain,
            "n={n}: tilted rel se {rel_tilted} not below plain {rel_plain}"
        );
    }
}

#[test]
fn passage_probability_decays_at_first_passage_rate() {
    // the survival-event frequency at theta = 2 carries an n^{-3/2}
    // prefactor on top of its exponential decay; stripping it isolates the
    // first-passage rate ln 2 - 1 + 1/2 to within 20% already on n in [10,40]
    let theta = 2.0;
    let ns: Vec<u64> = (10..=40).collect();
    let points = passage_probability_curve(theta, &ns, theta, 10_000_000, 121).unwrap();
    let corrected: Vec<CurvePoint> = points
        .iter()
        .map(|p| {
            let scale = (p.n as f64).powf(1.5);
            CurvePoint {
                n: p.n,
                estimate: p.estimate * scale,
                stderr: p.stderr * scale,
                replicates: p.replicates,
            }
        })
        .collect();
    let curve = TailCurve {
        params: ModelParams::new(theta, 1.0).unwrap(),
        estimator: Estimator::RepresentationTilted { lambda: theta },
        seed: 121,
        shared_paths: true,
        wall_time_seconds: 0.0,
        points: corrected,
    };
    let fit = fit_exponential_tail(&curve, 10, 40).unwrap();
    let rate = first_passage_log_rate(theta); // 1 - 1/2 - ln 2, negative
    let rel = (fit.fitted_exponent - rate).abs() / rate.abs();
    assert!(
        rel <= 0.20,
        "corrected semilog slope {} vs rate {rate} ({:.0}% off)",
        fit.fitted_exponent,
        rel * 100.0
    );
}

#[test]
fn malthusian_stalled_fraction_approaches_extinction_probability() {
    let report = malthusian_growth_check(0.5, &[12.0], 20_000, 115).unwrap();
    let row = &report.rows[0];
    let q = extinction_probability(0.5).unwrap();
    let se = (q * (1.0 - q) / row.replicates as f64).sqrt();
    assert!(
        (row.stalled_fraction - q).abs() < 4.0 * se,
        "stalled={} q={q}",
        row.stalled_fraction
    );
    // and the normalized mean still tracks the moment formula
    assert!(
        (row.normalized_mean - row.expected_mean).abs() < 4.0 * row.normalized_mean_stderr
    );
}

#[test]
fn malthusian_normalized_variance_stabilizes_for_growing_fertility() {
    // theta = -1: Var(e^{(theta-1)t} Y(t)) becomes t-independent once
    // e^{2t} >> 1; estimate the variance in independent blocks and compare
    // two horizons with combined standard errors
    let horizons = [3.0, 4.0];
    let blocks = 40;
    let mut per_horizon = [MeanAccumulator::default(), MeanAccumulator::default()];
    for block in 0..blocks {
        let report = malthusian_growth_check(-1.0, &horizons, 500, 116 + block).unwrap();
        for (acc, row) in per_horizon.iter_mut().zip(report.rows.iter()) {
            acc.add(row.normalized_variance);
        }
    }
    let diff = (per_horizon[0].mean() - per_horizon[1].mean()).abs();
    let se = per_horizon[0].stderr().hypot(per_horizon[1].stderr());
    assert!(diff < 4.0 * se, "var diff {diff} vs 4 se {se}");
    assert!(per_horizon[1].mean() > 0.0);
}

#[test]
fn borel_histogram_matches_pmf_by_chi_square() {
    // mid-budget version of the progeny law check at theta = 2
    let runs = 50_000u64;
    let k_max = 8usize;
    let counts = run_batched(
        117,
        runs,
        || vec![0u64; k_max + 1],
        |hist, _i, rng| {
            match sample_total_progeny(2.0, 1_000_000, rng).unwrap() {
                ProgenyOutcome::Finite(n) => hist[(n as usize - 1).min(k_max)] += 1,
                ProgenyOutcome::ExceededCap => hist[k_max] += 1,
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        },
    );
    let mut expected: Vec<f64> = (1..=k_max as u64)
        .map(|n| runs as f64 * yule_simon::distributions::borel_total_progeny_pmf(2.0, n).unwrap())
        .collect();
    let tail = runs as f64 - expected.iter().sum::<f64>();
    expected.push(tail);
    let mut observed = counts;
    merge_tail(&mut observed, &mut expected, 5.0);
    let (stat, p) = chi_square_gof(&observed, &expected);
    assert!(p > 0.01, "stat={stat} p={p}");
}

#[test]
fn forest_mean_component_size_matches_mutant_ratio() {
    // regime (a) with rho > 1: average component size n / m(n) -> rho/(rho-1)
    let regime = MutationRegime::IidBernoulli { clone_prob: 0.5 };
    for &theta in &[0.0f64, -1.0] {
        let exp = run_forest_experiment(theta, regime, 100_000, 10, 5, 1_000, 118).unwrap();
        let want = 2.0; // rho/(rho-1) with rho = 2
        let rel = (exp.mean_component_size - want).abs() / want;
        assert!(
            rel < 0.02,
            "theta={theta}: mean component size {} (rel err {rel})",
            exp.mean_component_size
        );
    }
}

#[test]
fn direct_survival_estimates_are_exact_against_analytic_tail() {
    // capped direct sampling at rho < 1 (infinite mean, heavy tail)
    let params = ModelParams::new(0.0, 0.9).unwrap();
    let curve = direct_curve(&params, 50, 200_000, 119).unwrap();
    for &n in &[1u64, 10, 50] {
        let p = curve.point(n).unwrap();
        let exact = survival_theta0(0.9, n).unwrap();
        assert!(
            (p.estimate - exact).abs() < 4.0 * p.stderr,
            "n={n}: {} vs {exact}",
            p.estimate
        );
    }
}

#[test]
fn path_means_match_moment_curve() {
    // mean population at the horizon vs the closed-form mean curve,
    // including the critical decay rate theta = 1 where E[Y(3)] = 4
    for &(theta, horizon) in &[(1.0f64, 3.0f64), (2.0, 1.0)] {
        let acc = run_batched(
            122,
            100_000,
            MeanAccumulator::default,
            |acc, _i, rng| {
                let path = simulate_path(theta, horizon, rng).unwrap();
                acc.add(path.final_population() as f64);
            },
            |a, b| a.merge(&b),
        );
        let expected = mean_y_at(theta, horizon).unwrap();
        assert!(
            (acc.mean() - expected).abs() < 3.0 * acc.stderr(),
            "theta={theta} t={horizon}: mean {} vs {expected} (se {})",
            acc.mean(),
            acc.stderr()
        );
    }
}

#[test]
fn first_passage_time_normalization_concentrates() {
    // e^{(theta-1) T(n)} n approaches the growth limit W: its coefficient
    // of variation decreases as the target population grows
    let theta = -1.0;
    let runs = 300u64;
    let targets = [30u64, 300, 10_000];
    let mut cvs = Vec::new();
    for (slot, &n) in targets.iter().enumerate() {
        let acc = run_batched(
            123 + slot as u64,
            runs,
            MeanAccumulator::default,
            |acc, _i, rng| {
                let records = simulate_genealogy(theta, n, rng).unwrap().into_records();
                let t_n = records.last().unwrap().birth_time;
                acc.add(((theta - 1.0) * t_n).exp() * n as f64);
            },
            |a, b| a.merge(&b),
        );
        cvs.push(acc.sample_variance().sqrt() / acc.mean());
    }
    assert!(
        cvs[0] > cvs[2],
        "normalized first-passage CV not decreasing: {cvs:?}"
    );
}

#[test]
fn absorption_is_impossible_for_nonpositive_drift_at_scale() {
    // 1e6 plain replicates at theta in {0, -1}: every path survives all
    // requested arrivals, so the passage probability is exactly one
    for &theta in &[0.0f64, -1.0] {
        let points = passage_probability_curve(theta, &[20], 1.0, 1_000_000, 125).unwrap();
        assert_eq!(points[0].estimate, 1.0, "theta={theta}");
        assert_eq!(points[0].stderr, 0.0, "theta={theta}");
    }
}

#[test]
fn power_fit_recovers_half_exponent_for_growing_fertility() {
    // theta = -1, rho = 1: tail exponent rho/(1-theta) = 1/2
    let params = ModelParams::new(-1.0, 1.0).unwrap();
    let ns: Vec<u64> = (50..=500).step_by(10).collect();
    let curve = representation_curve(&params, &ns, 1_000_000, 126).unwrap();
    let fit = fit_power_tail(&curve, 50, 500).unwrap();
    assert_eq!(fit.theoretical_exponent, Some(-0.5));
    assert!(
        (fit.fitted_exponent + 0.5).abs() < 0.1,
        "slope {}",
        fit.fitted_exponent
    );
}

#[test]
fn forest_power_rare_regime_matches_infinite_mean_limit() {
    // theta = 0 under regime (c) with rho = 1/2: limit law X(0, 1/2) has an
    // infinite mean, yet Q(k) must match its analytic pmf
    let exp = run_forest_experiment(
        0.0,
        MutationRegime::PowerRare { rho: 0.5 },
        1_000_000,
        10,
        3,
        0,
        127,
    )
    .unwrap();
    assert_eq!((exp.target.theta, exp.target.rho), (0.0, 0.5));
    for row in &exp.rows {
        let analytic = yule_simon_pmf_theta0(0.5, row.k).unwrap();
        assert!((row.q_target - analytic).abs() < 1e-12);
        assert!(
            (row.q_emp - analytic).abs() < 0.02,
            "k={}: {} vs {analytic}",
            row.k,
            row.q_emp
        );
    }
}

#[test]
fn pvalue_helper_is_calibrated() {
    // chi-square of uniform counts against the uniform law should be tame
    let mut rng = replicate_stream(120, 0);
    let mut rejected = 0;
    for _ in 0..200 {
        let mut counts = vec![0u64; 10];
        for _ in 0..1000 {
            counts[(rand::Rng::random_range(&mut rng, 0..10u32)) as usize] += 1;
        }
        let expected = vec![100.0; 10];
        let (_, p) = chi_square_gof(&counts, &expected);
        if p < 0.01 {
            rejected += 1;
        }
    }
    // 1% nominal level: seeing more than 5 of 200 rejections is implausible
    assert!(rejected <= 5, "rejected={rejected}");
    assert!((chi_square_pvalue(0.0, 5.0) - 1.0).abs() < 1e-12);
}
