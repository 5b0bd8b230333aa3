mod common;

use nomacache::content_model::{hit_probability, zipf_popularity};
use nomacache::experiment_runner::{csv_string, run, ExperimentSpec};
use nomacache::monte_carlo::{simulate_push, trial_rng, Execution, TrialPlan};
use nomacache::noma_engine::{decodes, derive_cr_allocation, sic_decode_success, sinr_noma_downlink, PowerAllocation};
use nomacache::numerics::{beta_fn, chebyshev_nodes, gamma_fn, integrate_cg, lower_incomplete_gamma};
use nomacache::pad_analysis::intensity_measure;
use nomacache::point_fields::{
    conditional_pdf_user_bs_distance, marginal_pdf_rm, marginal_tail_cut, parse_deployment_text,
    sample_cluster_deployment, GeometryConfig,
};
use nomacache::ptd_analysis::{outage_f1_at_cs, push_hit_probability, AccessMode};
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn beta_is_symmetric(p in 0.05f64..20.0, q in 0.05f64..20.0) {
        let a = beta_fn(p, q).unwrap();
        let b = beta_fn(q, p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn lower_gamma_monotone_with_limit(s in 0.1f64..10.0, x in 0.0f64..40.0, dx in 0.0f64..5.0) {
        let a = lower_incomplete_gamma(s, x).unwrap();
        let b = lower_incomplete_gamma(s, x + dx).unwrap();
        prop_assert!(b >= a - 1e-12 * a.abs());
        // below s ≈ 0.25 the upper tail at x = 50 s still exceeds 1e-6
        if s >= 0.5 {
            let full = lower_incomplete_gamma(s, 50.0 * s).unwrap();
            prop_assert!((full / gamma_fn(s) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn quadrature_converges_on_marginal_pdf(m in 1u32..6, rc in 30.0f64..120.0, excl in prop::bool::ANY) {
        let lambda = GeometryConfig::figure_density(rc);
        let e = if excl { 1.1 * rc } else { 0.0 };
        let hi = marginal_tail_cut(m, lambda, e, 1e-6);
        let f = |x: f64| marginal_pdf_rm(x, m, lambda, e);
        let a = integrate_cg(f, e, hi, &chebyshev_nodes(40).unwrap()).unwrap();
        let b = integrate_cg(f, e, hi, &chebyshev_nodes(160).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-4 * (1.0 + b.abs()), "{a} {b}");
    }

    #[test]
    fn quadrature_converges_on_distance_kernel(r_m in 60.0f64..2000.0) {
        let rc = 50.0;
        let f = |r: f64| conditional_pdf_user_bs_distance(r, r_m, rc).unwrap_or(0.0) * (-r / 500.0).exp();
        let a = integrate_cg(f, r_m - rc, r_m + rc, &chebyshev_nodes(40).unwrap()).unwrap();
        let b = integrate_cg(f, r_m - rc, r_m + rc, &chebyshev_nodes(160).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-4 * (1.0 + b.abs()), "{a} {b}");
    }

    #[test]
    fn hit_probability_bounds_and_monotonicity(
        gamma in 0.0f64..2.0,
        fails in prop::collection::vec(0.0f64..1.0, 3),
        k in 0usize..3,
        bump in 0.0f64..1.0,
    ) {
        let pop = zipf_popularity(10, gamma).unwrap()[..3].to_vec();
        let h = hit_probability(&pop, &fails).unwrap();
        let total: f64 = pop.iter().sum();
        prop_assert!(h <= total + 1e-15 && total <= 1.0 + 1e-12);
        let mut worse = fails.clone();
        worse[k] = (worse[k] + bump).min(1.0);
        prop_assert!(hit_probability(&pop, &worse).unwrap() <= h + 1e-15);
    }

    #[test]
    fn cr_allocation_matches_oma_for_f1(
        log_rho in 0.0f64..16.0,
        log_zt in -14.0f64..0.0,
        ratio in 1.0f64..1e4,
        rate in 0.1f64..4.0,
    ) {
        let rho = 10f64.powf(log_rho);
        let z_t = 10f64.powf(log_zt);
        let z_m = z_t * ratio;
        let eps1 = rate.exp2() - 1.0;
        let alloc = derive_cr_allocation(&[0.75, 0.25], rho, z_t, eps1).unwrap();
        let noma = decodes(sinr_noma_downlink(z_m, 0, alloc.coeffs(), 0.0, 1.0 / rho), eps1);
        let oma = decodes(rho * z_m, eps1);
        // only the knife edge ρ z_m = ε_1 is left to rounding
        let edge = ((rho * z_m) / eps1 - 1.0).abs() < 1e-9;
        prop_assert!(edge || noma == oma, "rho {rho} z_t {z_t} z_m {z_m}: noma {noma} oma {oma}");
    }

    #[test]
    fn sic_success_is_prefix_closed(
        raw in prop::collection::vec(0.01f64..1.0, 2..5),
        gain in 1e-3f64..1e3,
        interference in 0.0f64..1.0,
        rate in 0.05f64..1.5,
    ) {
        let total: f64 = raw.iter().sum();
        let coeffs: Vec<f64> = raw.iter().map(|c| c / total).collect();
        let alloc = PowerAllocation::fixed(coeffs).unwrap();
        let eps = vec![rate.exp2() - 1.0; alloc.len()];
        for i in 0..alloc.len() {
            if sic_decode_success(gain, alloc.coeffs(), &eps, i, interference, 0.01) {
                for j in 0..i {
                    prop_assert!(sic_decode_success(gain, alloc.coeffs(), &eps, j, interference, 0.01));
                }
            }
        }
    }

    #[test]
    fn sinr_monotone(
        g in 1e-3f64..1e3,
        dg in 0.0f64..10.0,
        i in 0.0f64..1.0,
        di in 0.0f64..1.0,
        stage in 0usize..3,
    ) {
        let c = [0.6, 0.3, 0.1];
        let base = sinr_noma_downlink(g, stage, &c, i, 0.01);
        prop_assert!(sinr_noma_downlink(g + dg, stage, &c, i, 0.01) >= base);
        prop_assert!(sinr_noma_downlink(g, stage, &c, i + di, 0.01) <= base);
    }

    #[test]
    fn deployment_text_round_trip(seed in any::<u64>(), users in 1usize..4) {
        let cfg = GeometryConfig { sim_radius: 1500.0, ..GeometryConfig::default() };
        let mut rng = trial_rng(seed, 0);
        let dep = sample_cluster_deployment(&cfg, users, false, 0, &mut rng).unwrap();
        let recs = parse_deployment_text(&dep.to_text()).unwrap();
        prop_assert_eq!(recs.len(), 1 + dep.server_positions.len() + dep.user_count());
        for (rec, p) in recs[1..].iter().zip(&dep.server_positions) {
            prop_assert_eq!(rec.position, *p);
        }
        for (rec, (k, _, p)) in recs[1 + dep.server_positions.len()..].iter().zip(dep.user_positions()) {
            prop_assert_eq!(rec.cluster, k);
            prop_assert_eq!(rec.position, p);
        }
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn noma_push_hit_dominates_oma(
        power in -40.0f64..60.0,
        gamma in prop::sample::select(vec![0.5, 1.0, 1.5]),
        rc in prop::sample::select(vec![50.0, 100.0]),
        t in 2u32..7,
        m_frac in 0.0f64..1.0,
    ) {
        let m = 1 + ((t - 1) as f64 * m_frac) as u32;
        let mut sc = common::push(power, rc, gamma, m.min(t - 1));
        sc.t = t;
        let rule = chebyshev_nodes(20).unwrap();
        let noma = push_hit_probability(sc.m, &sc, AccessMode::Noma, &rule).unwrap().value;
        let oma = push_hit_probability(sc.m, &sc, AccessMode::Oma, &rule).unwrap().value;
        prop_assert!(noma >= oma - 1e-9, "{noma} < {oma}");
    }

    #[test]
    fn f1_outage_monotone(power in -40.0f64..40.0, step in 0.5f64..10.0, n in 1u32..5) {
        let sc = common::push(power, 50.0, 0.5, 1);
        let hi = common::push(power + step, 50.0, 0.5, 1);
        let p = outage_f1_at_cs(n, &sc).unwrap().value;
        prop_assert!(outage_f1_at_cs(n, &hi).unwrap().value <= p + 1e-15);
        prop_assert!(outage_f1_at_cs(n + 1, &sc).unwrap().value >= p - 1e-15);
    }

    #[test]
    fn intensity_monotone(
        log_k in -12.0f64..-6.0,
        d in 10.0f64..900.0,
        dd in 0.0f64..200.0,
        lam in 1e-5f64..1e-4,
        dl in 0.0f64..1e-4,
    ) {
        let rule = chebyshev_nodes(20).unwrap();
        let k = 10f64.powf(log_k);
        let r0 = 707.1;
        let base = intensity_measure(k, 3.0, lam, r0, d, &rule).unwrap();
        prop_assert!(intensity_measure(k, 3.0, lam, r0, d + dd, &rule).unwrap() >= base * (1.0 - 1e-9));
        prop_assert!(intensity_measure(k, 3.0, lam + dl, r0, d, &rule).unwrap() >= base * (1.0 - 1e-9));
    }
}

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn simulation_independent_of_workers(seed in any::<u64>(), trials in 1u64..3000) {
        let sc = common::push(-20.0, 50.0, 0.5, 2);
        let plan = TrialPlan::new(trials, seed);
        let par = simulate_push(&plan, &sc).unwrap();
        let ser = simulate_push(&TrialPlan { execution: Execution::Serial, ..plan }, &sc).unwrap();
        prop_assert_eq!(par, ser);
    }

    #[test]
    fn split_halves_add_up_and_agree(seed in any::<u64>()) {
        let sc = common::push(-20.0, 50.0, 0.5, 2);
        let n = 20_000u64;
        let full = simulate_push(&TrialPlan::new(n, seed), &sc).unwrap();
        let a = simulate_push(&TrialPlan::new(n / 2, seed), &sc).unwrap();
        let b = simulate_push(&TrialPlan { first_trial: n / 2, ..TrialPlan::new(n / 2, seed) }, &sc).unwrap();
        for key in ["outage_n1_f1", "outage_n2_f2", "outage_n5_f3"] {
            let (pa, pb, pf) = (a.value(key), b.value(key), full.value(key));
            prop_assert!(((pa + pb) / 2.0 - pf).abs() < 1e-12);
            let se = (2.0 * pf * (1.0 - pf) / (n / 2) as f64).sqrt();
            prop_assert!((pa - pb).abs() <= 3.0 * se + 1e-12, "{key}: {pa} vs {pb}");
        }
    }

    #[test]
    fn csv_is_byte_stable(seed in any::<u64>()) {
        let mut spec = ExperimentSpec::load("fig7b").unwrap();
        spec.trials = 500;
        spec.seed = seed;
        spec.sweep.values = vec![10.0, 30.0];
        let a = csv_string(&spec, &run(&spec, Execution::Parallel).unwrap()).unwrap();
        let b = csv_string(&spec, &run(&spec, Execution::Serial).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}
