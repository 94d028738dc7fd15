use amlab::defense::{am_blend, blend_coefficient, dp_perturb, msp, poison_distribution, MspMatcher, DEFAULT_NU};
use amlab::eval::{hellinger, CdfSeries};
use amlab::nncore::{reverse_cross_entropy, softmax, Classifier, Tensor};
use amlab::prob::{argmax, is_distribution, mix};
use proptest::prelude::*;

fn distribution(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0f64..8.0, k).prop_map(|l| softmax(&l))
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..12).prop_flat_map(|k| (distribution(k), distribution(k)))
}

proptest! {
    #[test]
    fn network_outputs_are_distributions(
        seed in 0u64..1000,
        hidden in 1usize..12,
        x in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let model = Classifier::dense_mlp(4, hidden, 3, seed).unwrap();
        let p = model.forward(&Tensor::vector(x).unwrap()).unwrap();
        prop_assert!(is_distribution(&p));
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn hellinger_is_a_bounded_symmetric_metric(
        (p, q, r) in (2usize..10).prop_flat_map(|k| (distribution(k), distribution(k), distribution(k)))
    ) {
        let pq = hellinger(&p, &q).unwrap();
        prop_assert!((pq - hellinger(&q, &p).unwrap()).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!(hellinger(&p, &p).unwrap() <= 1e-12);
        let via = hellinger(&p, &r).unwrap() + hellinger(&r, &q).unwrap();
        prop_assert!(pq <= via + 1e-9);
    }

    #[test]
    fn reverse_cross_entropy_falls_as_true_mass_rises(a in 1e-6f64..0.999, b in 1e-6f64..0.999) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let l = |p: f64| reverse_cross_entropy(&[p, 1.0 - p], 0).unwrap();
        prop_assert!(l(hi) > l(lo));
    }

    #[test]
    fn blends_stay_valid((f, g) in pair(), alpha in 0.0f64..=1.0) {
        prop_assert!(is_distribution(&am_blend(&f, &g, alpha)));
        prop_assert!(is_distribution(&mix(&f, &poison_distribution(&f), alpha)));
    }

    #[test]
    fn alpha_never_rises_with_confidence(tau in 0.0f64..=1.0, nu in 0.1f64..2000.0, k in 2usize..20) {
        let start = 1.0 / k as f64;
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let y = start + (1.0 - start) * i as f64 / 200.0;
            let a = blend_coefficient(y, tau, nu);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= prev);
            prev = a;
        }
    }

    #[test]
    fn deceptive_perturbation_keeps_the_top_class(
        f in (2usize..12).prop_flat_map(distribution),
        magnitude in 0.0f64..=1.0,
    ) {
        let y = dp_perturb(&f, magnitude);
        prop_assert!(is_distribution(&y));
        prop_assert_eq!(argmax(&y), argmax(&f));
    }

    #[test]
    fn empirical_cdfs_are_valid(samples in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let c = CdfSeries::from_samples("s", samples.clone()).unwrap();
        prop_assert!(c.is_valid());
        prop_assert_eq!(c.eval(1.0), 1.0);
        let below = samples.iter().filter(|&&s| s <= 0.5).count() as f64 / samples.len() as f64;
        prop_assert_eq!(c.eval(0.5), below);
    }

    #[test]
    fn confidence_matching_keeps_the_argmax(f in (3usize..10).prop_flat_map(distribution)) {
        let model = Classifier::dense_mlp(2, 4, f.len(), 5).unwrap();
        let other = Classifier::dense_mlp(2, 4, f.len(), 6).unwrap();
        let calib: Vec<Tensor> = (0..20).map(|i| Tensor::vector(vec![i as f64 / 10.0, 1.0 - i as f64 / 7.0]).unwrap()).collect();
        let matcher = MspMatcher::fit(&model, &other, &calib).unwrap();
        let y = matcher.apply(&f);
        prop_assert!(is_distribution(&y));
        prop_assert_eq!(argmax(&y), argmax(&f));
        prop_assert!(msp(&y) >= 1.0 / f.len() as f64 - 1e-12);
    }
}

#[test]
fn blend_endpoints_at_the_default_nu() {
    assert_eq!(blend_coefficient(0.5, 0.5, DEFAULT_NU), 0.5);
    assert_eq!(blend_coefficient(0.0, 0.9, DEFAULT_NU), 1.0);
    assert_eq!(blend_coefficient(1.0, 0.1, DEFAULT_NU), 0.0);
}
