//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use linkgreg::design::{draw_srswor, exact_moments, ht_exact_moments, ht_total, Sample};
use linkgreg::estimators::{greg, implied_weights, DiagnosticKind, EstimatorKind, GregSpec};
use linkgreg::harness::{
    diagnostic_rejection_rates, run_scenario, Column, MonteCarloSummary, ScenarioConfig,
    TABLE_COLUMNS,
};
use linkgreg::linkage::{
    build_linkage, derive_covariates, multiplicity_weights, reverse_weights_best_link, AuxDatabase,
    BestLinks, WeightScheme,
};
use linkgreg::rng::stream_rng;
use linkgreg::synthpop::{gen_linkage, gen_pi_q_weights, gen_population, LinkageModel, PopulationModel};
use linkgreg::EstimationContext;

const K: usize = 2000;

struct Check {
    label: String,
    ok: bool,
    detail: String,
}

fn check(label: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
    Check {
        label: label.into(),
        ok,
        detail: detail.into(),
    }
}

fn within(label: &str, got: f64, want: f64, tol: f64) -> Check {
    check(
        label,
        (got - want).abs() <= tol,
        format!("{got:.4} vs {want} ± {tol}"),
    )
}

fn block(name: &str, p: [f64; 3], p_m: f64, p_ml: f64, q: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        replicates: K,
        p,
        p_match: p_m,
        p_best_match: p_ml,
        q,
        q_pi: q,
        seed,
        ..ScenarioConfig::default()
    }
}

fn re(s: &MonteCarloSummary, c: Column) -> f64 {
    s.get(c).map_or(f64::NAN, |e| e.re)
}

fn criterion_1(s: &MonteCarloSummary) -> Vec<Check> {
    vec![
        within("HT SE", s.get(Column::Ht).map_or(f64::NAN, |e| e.se), 0.204, 0.010),
        within("Ideal RE", re(s, Column::Ideal), 0.525, 0.030),
        within("SRI-q RE", re(s, Column::SriQ), 0.939, 0.035),
        within("SBL RE", re(s, Column::Sbl), 0.930, 0.035),
        within("SLS RE", re(s, Column::Sls), 0.968, 0.035),
        within("PI-m RE", re(s, Column::PiM), 1.00, 0.025),
        within("PI-q RE", re(s, Column::PiQ), 1.00, 0.025),
        within("Sub RE", re(s, Column::Sub), 2.60, 0.35),
    ]
}

fn criterion_2(s: &MonteCarloSummary) -> Vec<Check> {
    vec![
        within("SRI-q RE", re(s, Column::SriQ), 0.716, 0.035),
        within("SBL RE", re(s, Column::Sbl), 0.694, 0.035),
        within("PI-q RE", re(s, Column::PiQ), 0.872, 0.035),
        within("SLS RE", re(s, Column::Sls), 0.861, 0.035),
    ]
}

fn criterion_3(s: &MonteCarloSummary) -> Vec<Check> {
    vec![
        within("SBL RE", re(s, Column::Sbl), 0.547, 0.03),
        within("SRI-q RE", re(s, Column::SriQ), 0.548, 0.03),
        within("Ideal RE", re(s, Column::Ideal), 0.526, 0.03),
        within("Sub RE", re(s, Column::Sub), 0.667, 0.04),
    ]
}

fn criterion_4(runs: &[&MonteCarloSummary]) -> Vec<Check> {
    let mut out = Vec::new();
    for s in runs {
        for e in &s.estimators {
            let ratio = e.ese / e.se;
            out.push(check(
                format!("{} {} ESE/SE", s.config.name, e.column),
                (ratio - 1.0).abs() <= 0.05,
                format!("{ratio:.4}"),
            ));
        }
    }
    out
}

fn criterion_5(runs: &[&MonteCarloSummary]) -> Vec<Check> {
    let mut out = Vec::new();
    for s in runs {
        for c in [Column::Sbl, Column::SriQ, Column::Sls] {
            let e = s.get(c).expect("column present");
            out.push(check(
                format!("{} {} |RMSE-RE|", s.config.name, c),
                (e.rmse - e.re).abs() <= 0.01,
                format!("{:.4}", (e.rmse - e.re).abs()),
            ));
        }
    }
    out
}

fn criterion_6() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = stream_rng(606, 0);
    for big_n in [6usize, 8, 10] {
        let y: Vec<f64> = (0..big_n).map(|_| rng.random_range(-3.0..12.0)).collect();
        let total: f64 = y.iter().sum();
        for n in [2usize, 3] {
            let m = ht_exact_moments(&y, n).expect("within guard");
            // Textbook design variance N²(1-f)S²/n with the population S².
            let mean = total / big_n as f64;
            let s2 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (big_n - 1) as f64;
            let f = n as f64 / big_n as f64;
            let var = (big_n * big_n) as f64 * (1.0 - f) * s2 / n as f64;
            let e_rel = (m.expectation - total).abs() / total.abs();
            let v_rel = (m.expected_variance_estimate.unwrap_or(f64::NAN) - m.variance).abs() / m.variance;
            let d_rel = (m.variance - var).abs() / var;
            out.push(check(
                format!("N={big_n} n={n} E[Y^]=Y, E[v^]=Var"),
                e_rel <= 1e-10 && v_rel <= 1e-10 && d_rel <= 1e-10,
                format!("{e_rel:.1e}, {v_rel:.1e}, {d_rel:.1e}"),
            ));
            let mut worst = 0.0f64;
            exact_moments(big_n, n, |s: &Sample| {
                let ys: Vec<f64> = s.units().iter().map(|&i| y[i]).collect();
                let h = ht_total(&ys, s)?;
                let g = greg(&GregSpec::intercept_only(EstimatorKind::Ideal, s), &ys, s)?;
                worst = worst.max((g.value - h.value).abs() / h.value.abs().max(1e-300));
                Ok((g.value, g.variance))
            })
            .expect("enumeration");
            out.push(check(
                format!("N={big_n} n={n} intercept-only GREG = HT"),
                worst <= 1e-12,
                format!("max rel diff {worst:.1e}"),
            ));
        }
    }
    out
}

fn criterion_7() -> Vec<Check> {
    let kinds = [
        EstimatorKind::Pi,
        EstimatorKind::Pri,
        EstimatorKind::Sri,
        EstimatorKind::Sbl,
        EstimatorKind::Sls,
        EstimatorKind::Sub,
    ];
    let mut worst = vec![0.0f64; kinds.len()];
    let mut rng = stream_rng(707, 0);
    for _ in 0..1000 {
        let big_n = rng.random_range(6..=50);
        let n = rng.random_range(4..=big_n);
        let x: Vec<f64> = (0..big_n).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 0.5 * v + rng.random_range(-1.0..1.0)).collect();
        let aux = AuxDatabase::from_scalars(&x).unwrap();
        let links: Vec<(usize, usize)> = (0..big_n).map(|i| (i, i)).collect();
        let units: Vec<usize> = (0..big_n).collect();
        let l = build_linkage(&links, &units, big_n, &aux).unwrap();
        let best = BestLinks::from_positions(&l, units.clone()).unwrap();
        let q = rng.random_range(0.05..1.0);
        let ctx = EstimationContext::new(aux, l.clone())
            .unwrap()
            .with_weights(multiplicity_weights(&l).unwrap())
            .unwrap()
            .with_weights(reverse_weights_best_link(&l, &best, q).unwrap())
            .unwrap()
            .with_best_links(best)
            .unwrap()
            .with_unit_covariates(x.clone())
            .unwrap();
        let s = draw_srswor(big_n, n, &mut rng).unwrap();
        let ys: Vec<f64> = s.units().iter().map(|&i| y[i]).collect();
        let ideal = ctx.estimate(EstimatorKind::Ideal, &s, &ys).unwrap().value;
        for (k, &kind) in kinds.iter().enumerate() {
            let v = ctx.estimate(kind, &s, &ys).unwrap().value;
            worst[k] = worst[k].max((v - ideal).abs() / ideal.abs());
        }
    }
    kinds
        .iter()
        .zip(worst)
        .map(|(kind, w)| {
            check(
                format!("{kind} = Ideal under one-one linkage"),
                w <= 1e-10,
                format!("max rel diff {w:.1e}"),
            )
        })
        .collect()
}

fn criterion_8() -> Vec<Check> {
    let grid: [([f64; 3], f64, f64, f64); 10] = [
        ([0.2, 0.4, 0.4], 0.4, 0.4, 0.4),
        ([0.2, 0.4, 0.4], 0.4, 0.3, 0.4),
        ([0.2, 0.4, 0.4], 0.4, 0.2, 0.4),
        ([0.2, 0.4, 0.4], 0.8, 0.8, 0.4),
        ([0.2, 0.4, 0.4], 0.8, 0.8, 0.7),
        ([0.2, 0.4, 0.4], 0.8, 0.2, 0.4),
        ([0.4, 0.3, 0.3], 0.9, 0.9, 0.7),
        ([0.4, 0.3, 0.3], 0.9, 0.65, 0.4),
        ([0.8, 0.1, 0.1], 0.98, 0.98, 0.9),
        ([0.8, 0.1, 0.1], 0.98, 0.89, 0.4),
    ];
    let (mut inc_dev, mut rev_dev, mut cal_dev) = (0.0f64, 0.0f64, 0.0f64);
    let mut count_errors = 0usize;
    let draws = 1000;
    for k in 0..draws {
        let (p, p_m, p_ml, q) = grid[k % grid.len()];
        let big_n = [997, 2000, 5000][k % 3];
        let mut rng = stream_rng(808, k as u64);
        let pop = gen_population(&PopulationModel::new(big_n, 1.5, 0.0).unwrap(), &mut rng).unwrap();
        let aux = pop.aux();
        let model = LinkageModel::new(p, p_m, p_ml).unwrap();
        let g = gen_linkage(&aux, &model, &mut rng).unwrap();
        let l = &g.linkage;

        let want_matches = (big_n as f64 * p_m).round_ties_even() as usize;
        let want_best = (big_n as f64 * p_ml).round_ties_even() as usize;
        let best_correct = (0..big_n).filter(|&i| g.best.at(i) == i).count();
        let matched = (0..big_n).filter(|&i| l.alpha(i).unwrap().contains(&i)).count();
        if g.matches.len() != want_matches || matched != want_matches || best_correct != want_best {
            count_errors += 1;
        }

        let incidence: [WeightScheme; 2] = [
            multiplicity_weights(l).unwrap(),
            gen_pi_q_weights(l, &g.matches, q, &mut rng).unwrap(),
        ];
        for w in &incidence {
            for rec in 0..l.n_records() {
                if l.m(rec) == 0 {
                    continue;
                }
                let sum: f64 = l.beta(rec).iter().map(|&i| w.weight(l, i, rec).unwrap()).sum();
                inc_dev = inc_dev.max((sum - 1.0).abs());
            }
        }
        let reverse = reverse_weights_best_link(l, &g.best, q).unwrap();
        for pos in 0..big_n {
            rev_dev = rev_dev.max((reverse.row(pos).iter().sum::<f64>() - 1.0).abs());
        }

        let cov = derive_covariates(l, &reverse, &aux, None).unwrap();
        let s = draw_srswor(big_n, 100, &mut rng).unwrap();
        let spec = GregSpec::from_covariates(EstimatorKind::Sri, &cov, l, &aux, &s, true).unwrap();
        let w = implied_weights(&spec, &s).unwrap();
        let lhs: f64 = s
            .units()
            .iter()
            .zip(&w)
            .map(|(&i, w)| w * cov.weighted(l.position(i).unwrap())[0])
            .sum();
        let rhs = big_n as f64 * aux.mean()[0];
        cal_dev = cal_dev.max((lhs - rhs).abs() / rhs.abs());
    }
    vec![
        check("incidence sums", inc_dev <= 1e-12, format!("max |Σ-1| {inc_dev:.1e}")),
        check("reverse sums", rev_dev <= 1e-12, format!("max |Σ-1| {rev_dev:.1e}")),
        check("SRI calibration", cal_dev <= 1e-8, format!("max rel dev {cal_dev:.1e}")),
        check(
            "match/best-link counts",
            count_errors == 0,
            format!("{count_errors} of {draws} draws off"),
        ),
    ]
}

fn criterion_9() -> Vec<Check> {
    let kinds = [DiagnosticKind::Sri, DiagnosticKind::Sbl, DiagnosticKind::Sls];
    let base = ScenarioConfig {
        redraw: true,
        ..block("diagnostics", [0.2, 0.4, 0.4], 0.4, 0.4, 0.4, 909)
    };
    let null = diagnostic_rejection_rates(&base, &kinds, 1.96).expect("null run");
    let adversarial = ScenarioConfig {
        false_link_tilt: 3.0,
        seed: 910,
        ..base
    };
    let alt = diagnostic_rejection_rates(&adversarial, &kinds, 1.96).expect("adversarial run");
    let mut out = Vec::new();
    for (kind, rate) in null.rates {
        out.push(check(
            format!("{kind} null rejection"),
            (rate - 0.05).abs() <= 0.02,
            format!("{rate:.4} vs 0.05 ± 0.02"),
        ));
    }
    for (kind, rate) in alt.rates {
        out.push(check(
            format!("{kind} adversarial rejection"),
            rate >= 0.80,
            format!("{rate:.4} vs >= 0.80"),
        ));
    }
    out
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: usize| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());
    let start = Instant::now();

    let table_runs = [1, 2, 3, 4, 5].iter().any(|&n| wanted(n));
    let runs = if table_runs {
        let configs = [
            block("table1_block1", [0.2, 0.4, 0.4], 0.4, 0.4, 0.4, 101),
            block("table2_block2", [0.2, 0.4, 0.4], 0.8, 0.8, 0.7, 202),
            block("table3_block3", [0.8, 0.1, 0.1], 0.98, 0.98, 0.9, 303),
        ];
        configs
            .iter()
            .map(|c| run_scenario(c).expect("scenario run"))
            .collect::<Vec<_>>()
    } else {
        Vec::new()
    };
    let all: Vec<&MonteCarloSummary> = runs.iter().collect();
    for s in &runs {
        let cells: Vec<String> = TABLE_COLUMNS
            .iter()
            .filter_map(|&c| s.get(c).map(|e| format!("{c} {:.3}/{:.3}/{:.3}", e.se, e.ese, e.re)))
            .collect();
        println!("  {} SE/ESE/RE: {}", s.config.name, cells.join(", "));
    }

    let criteria: Vec<(usize, Box<dyn Fn() -> Vec<Check> + '_>)> = vec![
        (1, Box::new(|| criterion_1(&runs[0]))),
        (2, Box::new(|| criterion_2(&runs[1]))),
        (3, Box::new(|| criterion_3(&runs[2]))),
        (4, Box::new(|| criterion_4(&all))),
        (5, Box::new(|| criterion_5(&all))),
        (6, Box::new(criterion_6)),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (n, run) in criteria {
        if !wanted(n) {
            continue;
        }
        let checks = run();
        let ok = checks.iter().all(|c| c.ok);
        failed += usize::from(!ok);
        println!("criterion {n}: {}", if ok { "PASS" } else { "FAIL" });
        for c in checks.iter() {
            println!("    [{}] {}: {}", if c.ok { "ok" } else { "FAIL" }, c.label, c.detail);
        }
    }
    println!("acceptance finished in {:.1?}", start.elapsed());
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
