use dynassure_core::bayes::{posterior, BetaDist, BinomialObservation};
use proptest::prelude::*;

use super::{run, Check};

fn arb_prior() -> impl Strategy<Value = BetaDist> {
    (0.1f64..100.0, 0.1f64..100.0).prop_map(|(a, b)| BetaDist::new(a, b).unwrap())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Updating with a whole batch equals updating with any split of it.
pub fn conjugacy(cases: u32) -> Check {
    run(
        cases,
        (arb_prior(), 0u64..500, 0u64..500, 0u64..500, 0u64..500),
        |(prior, s1, f1, s2, f2)| {
            let a = BinomialObservation::new(s1, f1);
            let b = BinomialObservation::new(s2, f2);
            let batch = posterior(&prior, &(a + b));
            let sequential = posterior(&posterior(&prior, &a), &b);
            prop_assert!(close(batch.alpha(), sequential.alpha()));
            prop_assert!(close(batch.beta(), sequential.beta()));
            Ok(())
        },
    )
}

/// Posterior mean lies strictly between the prior mean and the observed rate.
pub fn mean_between(cases: u32) -> Check {
    run(cases, (arb_prior(), 0u64..200, 0u64..200), |(prior, s, f)| {
        prop_assume!(s + f > 0);
        let rate = s as f64 / (s + f) as f64;
        prop_assume!((rate - prior.mean()).abs() > 1e-12);
        let m = posterior(&prior, &BinomialObservation::new(s, f)).mean();
        let (lo, hi) = if rate < prior.mean() { (rate, prior.mean()) } else { (prior.mean(), rate) };
        prop_assert!(lo < m && m < hi, "{lo} < {m} < {hi}");
        Ok(())
    })
}

/// Averaged over the data the prior predicts, the posterior variance never
/// exceeds the prior variance (law of total variance). The per-observation
/// inequality does not hold in general: Beta(100, 0.9) updated with one
/// failure has a larger variance than the prior.
pub fn expected_variance_shrinks(cases: u32) -> Check {
    run(cases, (arb_prior(), 1u64..40), |(prior, n)| {
        let (a, b) = (prior.alpha(), prior.beta());
        let ln_fact = |k: u64| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
        let ln_choose = |n: u64, k: u64| ln_fact(n) - ln_fact(k) - ln_fact(n - k);
        let mut expected = 0.0;
        let mut total = 0.0;
        for y in 0..=n {
            let post = BetaDist::new(a + y as f64, b + (n - y) as f64).unwrap();
            // beta-binomial predictive weight
            let w = (ln_choose(n, y) + post.ln_normalizer() - prior.ln_normalizer()).exp();
            total += w;
            expected += w * post.variance();
        }
        prop_assert!((total - 1.0).abs() < 1e-9, "predictive mass {total}");
        prop_assert!(expected < prior.variance() * (1.0 + 1e-12));
        Ok(())
    })
}

/// Trapezoid integral of the unnormalized posterior density matches the
/// closed-form beta function.
pub fn normalization(cases: u32) -> Check {
    run(cases, (1u32..8, 1u32..8, 0u64..12, 0u64..12), |(a, b, s, f)| {
        let prior = BetaDist::new(a as f64, b as f64).unwrap();
        let post = posterior(&prior, &BinomialObservation::new(s, f));
        let (pa, pb) = (post.alpha(), post.beta());
        let n = 100_000usize;
        let h = 1.0 / n as f64;
        let density = |p: f64| p.powf(pa - 1.0) * (1.0 - p).powf(pb - 1.0);
        let mut integral = 0.5 * (density(0.0) + density(1.0));
        for i in 1..n {
            integral += density(i as f64 * h);
        }
        integral *= h;
        let exact = post.ln_normalizer().exp();
        prop_assert!(((integral - exact) / exact).abs() < 1e-6, "{integral} vs {exact}");
        Ok(())
    })
}
