mod common;

use mrmap::grad::{fd_report, loss_and_grad, sample_loss};
use mrmap::RngStream;
use proptest::prelude::*;

use common::{kink_margin, random_datum, random_params};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn reverse_mode_matches_central_differences(
        seed in any::<u64>(),
        p in 1usize..=3,
        extra in 0usize..=2,
        ell in 1usize..=4,
        cg_iters in 1usize..=8,
        gamma in 0.0f64..3.0,
    ) {
        let mut rng = RngStream::new(seed, 0);
        let params = random_params(p, p + extra, ell, cg_iters, &mut rng);
        let (x, datum) = random_datum(p, 0.2, &mut rng);
        prop_assume!(kink_margin(&params, &datum) >= 1e-4);
        let loss = sample_loss(&params, &datum, &x, 1.0, gamma).unwrap();
        // Large steps carry truncation error and small ones round-off, so each
        // entry must agree at one of a ladder of steps.
        let steps = [1e-4, 1e-5, 1e-6];
        let reports: Vec<_> = steps
            .iter()
            .map(|&h| fd_report(&params, &datum, &x, 1.0, gamma, h).unwrap())
            .collect();
        for i in 0..reports[0].len() {
            let agrees = steps.iter().zip(&reports).any(|(&h, report)| {
                let e = &report[i];
                let roundoff = 64.0 * f64::EPSILON * loss.abs().max(1.0) / h;
                let scale = e.analytic.abs().max(e.numeric.abs());
                (e.analytic - e.numeric).abs() <= 1e-5 * scale + roundoff
            });
            let e = &reports[1][i];
            prop_assert!(agrees, "{} [{}]: analytic {} vs numeric {}", e.kind, e.index, e.analytic, e.numeric);
        }
    }

    #[test]
    fn reported_loss_matches_forward_loss(seed in any::<u64>(), p in 1usize..=3, ell in 1usize..=4) {
        let mut rng = RngStream::new(seed, 1);
        let params = random_params(p, p + 1, ell, 4, &mut rng);
        let (x, datum) = random_datum(p, 0.2, &mut rng);
        let (total, grad) = loss_and_grad(&params, &datum, &x, 0.5, 2.0).unwrap();
        prop_assert_eq!(total.to_bits(), sample_loss(&params, &datum, &x, 0.5, 2.0).unwrap().to_bits());
        prop_assert!(grad.is_finite());
    }

    #[test]
    fn gradient_is_linear_in_loss_weights(seed in any::<u64>(), a in 0.0f64..2.0, g in 0.0f64..2.0) {
        let mut rng = RngStream::new(seed, 2);
        let params = random_params(2, 3, 3, 4, &mut rng);
        let (x, datum) = random_datum(2, 0.2, &mut rng);
        let (_, full) = loss_and_grad(&params, &datum, &x, a, g).unwrap();
        let (_, e) = loss_and_grad(&params, &datum, &x, 0.0, 0.0).unwrap();
        let (_, ep) = loss_and_grad(&params, &datum, &x, 1.0, 0.0).unwrap();
        let (_, ec) = loss_and_grad(&params, &datum, &x, 0.0, 1.0).unwrap();
        for (((f, e), ep), ec) in full.tensors().iter().zip(e.tensors()).zip(ep.tensors()).zip(ec.tensors()) {
            for i in 0..f.1.len() {
                let expected = e.1[i] + a * (ep.1[i] - e.1[i]) + g * (ec.1[i] - e.1[i]);
                prop_assert!((f.1[i] - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
            }
        }
    }
}
