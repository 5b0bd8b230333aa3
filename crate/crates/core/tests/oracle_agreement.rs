mod common;

use nomacache::content_model::zipf_popularity;
use nomacache::monte_carlo::{
    sample_interference, simulate_d2d, simulate_delivery, simulate_pad, simulate_push, trial_rng, TrialPlan,
};
use nomacache::numerics::QuadratureRule;
use nomacache::pad_analysis::{
    d2d_miss_probability, pad_cs_outage, pad_hit_probability, pad_oma_benchmark, pad_user_outage, pad_user_outage_oma,
    OmaVariant, QuadratureOrders,
};
use nomacache::ptd_analysis::{
    delivery_outage_far, delivery_outage_near, delivery_outage_oma, interference_laplace, outage_f1_at_cs,
    push_hit_probability, push_outage, AccessMode, DeliveryUser,
};

const TRIALS: u64 = 100_000;

fn check(label: &str, mc: &nomacache::ProbEstimate, analytic: f64) {
    assert!(common::agrees(mc, analytic), "{label}: mc {} vs analytic {analytic}", mc.value);
}

#[test]
fn push_outages_and_hits() {
    let rule = QuadratureRule::default();
    for &power in &[-25.0, -20.0, -10.0] {
        let sc = common::push(power, 50.0, 0.5, 2);
        let rep = simulate_push(&TrialPlan::new(TRIALS, 11), &sc).unwrap();
        for n in 1..=5 {
            let a = outage_f1_at_cs(n, &sc).unwrap().value;
            check(&format!("{power} dBm f1 n={n}"), &rep.estimates[&format!("outage_n{n}_f1")], a);
        }
        for i in 1..=3 {
            let a = push_outage(2, i, &sc, &rule).unwrap().value;
            check(&format!("{power} dBm f{i} m=2"), &rep.estimates[&format!("outage_n2_f{i}")], a);
        }
        for (key, mode) in [("hit_noma", AccessMode::Noma), ("hit_oma", AccessMode::Oma)] {
            let a = push_hit_probability(2, &sc, mode, &rule).unwrap().value;
            check(&format!("{power} dBm {key}"), &rep.estimates[key], a);
        }
    }
}

#[test]
fn delivery_outages() {
    let rule = QuadratureRule::default();
    for &(power, alpha) in &[(10.0, 3.0), (30.0, 3.0), (20.0, 4.0)] {
        let sc = common::delivery(power, alpha);
        let rep = simulate_delivery(&TrialPlan::new(TRIALS, 23), &sc).unwrap();
        let cases = [
            ("outage_near_noma", delivery_outage_near(&sc, &rule).unwrap().value),
            ("outage_far_noma", delivery_outage_far(&sc, &rule).unwrap().value),
            ("outage_near_oma", delivery_outage_oma(&sc, DeliveryUser::Near, &rule).unwrap().value),
            ("outage_far_oma", delivery_outage_oma(&sc, DeliveryUser::Far, &rule).unwrap().value),
        ];
        for (key, a) in cases {
            check(&format!("{power} dBm alpha {alpha} {key}"), &rep.estimates[key], a);
        }
        assert!(rep.meta("window_bias_bound") <= 1e-3);
    }
}

#[test]
fn pad_outages_and_hits() {
    let rule = QuadratureRule::default();
    let rules = QuadratureOrders { outer: &rule, inner: &rule };
    let pop: Vec<f64> = zipf_popularity(10, 1.5).unwrap()[..3].to_vec();
    for &power in &[10.0, 25.0, 40.0] {
        let sc = common::pad(power);
        let ms = [1, 3, 5];
        let rep = simulate_pad(&TrialPlan::new(TRIALS, 31), &sc, &ms, &pop).unwrap();
        for &m in &ms {
            let tag = format!("{power} dBm m={m}");
            check(&tag, &rep.estimates[&format!("user_outage_m{m}")], pad_user_outage(&sc, m, rules).unwrap().value);
            check(
                &tag,
                &rep.estimates[&format!("user_outage_oma_m{m}")],
                pad_user_outage_oma(&sc, m, rules).unwrap().value,
            );
            for i in 1..=3 {
                check(&tag, &rep.estimates[&format!("cs_outage_m{m}_f{i}")], pad_cs_outage(i, m, &sc).unwrap().value);
            }
            check(&tag, &rep.estimates[&format!("hit_noma_m{m}")], pad_hit_probability(m, &sc, &pop).unwrap().value);
            let oma = pad_oma_benchmark(OmaVariant::TimeSliced, &sc, &pop, m).unwrap().value;
            check(&tag, &rep.estimates[&format!("hit_oma_time_sliced_m{m}")], oma);
        }
    }
}

#[test]
fn d2d_misses() {
    let rule = QuadratureRule::default();
    for &(power, d) in &[(40.0, 150.0), (30.0, 250.0), (40.0, 900.0)] {
        let sc = common::d2d(power, d);
        let window = sc.r0() + d;
        let rep = simulate_d2d(&TrialPlan::new(TRIALS, 41), &sc, window).unwrap();
        check(
            &format!("{power} {d} noma"),
            &rep.estimates["miss_noma_f1"],
            d2d_miss_probability(1, &sc, false, &rule).unwrap().value,
        );
        check(
            &format!("{power} {d} oma"),
            &rep.estimates["miss_oma_f1"],
            d2d_miss_probability(1, &sc, true, &rule).unwrap().value,
        );
    }
}

#[test]
fn laplace_transform_of_interference() {
    let lambda = 0.01 / (std::f64::consts::PI * 100.0 * 100.0);
    let trials = 100_000u64;
    let mean: f64 = (0..trials)
        .map(|k| {
            let mut rng = trial_rng(3, k);
            (-sample_interference(lambda, 4.0, 5000.0, &mut rng)).exp()
        })
        .sum::<f64>()
        / trials as f64;
    let exact = interference_laplace(1.0, lambda, 4.0).unwrap();
    assert!((mean - exact).abs() < 0.01, "{mean} vs {exact}");
}
