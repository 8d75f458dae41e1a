mod common;

use mrmap::flow::{decode, hyperbolic_step, initial_embed, initialize_u1, run_flow};
use mrmap::potential::{act, act_prime, Hyper};
use mrmap::train::compute_losses;
use mrmap::{PotentialParams, RngStream, Vector};
use proptest::prelude::*;

use common::{max_abs_diff, random_datum, random_params, random_trajectory};

fn midpoint(u: &[Vector], v: &[Vector]) -> Vec<Vector> {
    u.iter()
        .zip(v)
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| 0.5 * (x + y)).collect::<Vec<_>>().into())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn potential_is_midpoint_convex(seed in any::<u64>(), q in 1usize..=6, ell in 1usize..=5, scale in 0.1f64..5.0) {
        let mut rng = RngStream::new(seed, 0);
        let params = random_params(q, q, ell, 4, &mut rng);
        let u = random_trajectory(q, ell, scale, &mut rng);
        let v = random_trajectory(q, ell, scale, &mut rng);
        let (fu, fv) = (params.potential_value(&u).unwrap(), params.potential_value(&v).unwrap());
        let fm = params.potential_value(&midpoint(&u, &v)).unwrap();
        prop_assert!(fm - 0.5 * (fu + fv) <= 1e-12 * (1.0 + fu.abs().max(fv.abs())));
    }

    #[test]
    fn potential_gradient_matches_central_differences(seed in any::<u64>(), q in 1usize..=5, ell in 1usize..=4) {
        let mut rng = RngStream::new(seed, 1);
        let params = random_params(q, q, ell, 4, &mut rng);
        let u = random_trajectory(q, ell, 1.0, &mut rng);
        let grads = params.potential_grad_u(&u).unwrap();
        let step = 1e-6;
        for j in 0..=ell {
            for i in 0..q {
                let mut plus = u.clone();
                plus[j][i] += step;
                let mut minus = u.clone();
                minus[j][i] -= step;
                let fd = (params.potential_value(&plus).unwrap() - params.potential_value(&minus).unwrap()) / (2.0 * step);
                prop_assert!((fd - grads[j][i]).abs() <= 1e-6 * (1.0 + fd.abs()), "block {} entry {}: {} vs {}", j, i, grads[j][i], fd);
            }
        }
    }

    #[test]
    fn interior_blocks_are_stationary_points_of_the_potential(seed in any::<u64>(), p in 1usize..=4, extra in 0usize..=4, ell in 2usize..=6) {
        let mut rng = RngStream::new(seed, 2);
        let params = random_params(p, p + extra, ell, 6, &mut rng);
        let (_, datum) = random_datum(p, 0.1, &mut rng);
        let traj = run_flow(&params, &datum).unwrap();
        let grads = params.potential_grad_u(&traj.u).unwrap();
        let scale = traj.u.iter().map(|u| u.norm()).fold(1.0, f64::max);
        for g in &grads[1..ell] {
            prop_assert!(g.norm() <= 1e-12 * scale, "interior residual {}", g.norm());
        }
    }

    #[test]
    fn trajectory_matches_its_building_blocks(seed in any::<u64>(), p in 1usize..=4, ell in 1usize..=5) {
        let mut rng = RngStream::new(seed, 3);
        let params = random_params(p, p + 2, ell, 5, &mut rng);
        let (_, datum) = random_datum(p, 0.1, &mut rng);
        let traj = run_flow(&params, &datum).unwrap();
        prop_assert_eq!(traj.u.len(), ell + 1);
        prop_assert_eq!(traj.initial(), &initial_embed(&params, &datum).unwrap());
        prop_assert_eq!(&traj.u[1], &initialize_u1(&params, &traj.u[0]).unwrap());
        for j in 1..ell {
            prop_assert_eq!(&traj.u[j + 1], &hyperbolic_step(&params, j, &traj.u[j], &traj.u[j - 1]).unwrap());
        }
        prop_assert!(decode(&params, traj.terminal()).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn all_zero_model_has_no_consistency_error(seed in any::<u64>(), p in 1usize..=6, ell in 1usize..=5) {
        let mut rng = RngStream::new(seed, 4);
        let params = PotentialParams::zeros(p, p + 3, ell, Hyper::default());
        let (x, datum) = random_datum(p, 0.3, &mut rng);
        let traj = run_flow(&params, &datum).unwrap();
        let losses = compute_losses(&params, &traj, &datum, &x).unwrap();
        prop_assert_eq!(losses.rc, 0.0);
        prop_assert!(traj.u.iter().all(|u| u.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn activation_derivative_matches_differences(t in -5.0f64..5.0) {
        prop_assume!(t.abs() > 1e-4);
        let h = 1e-7;
        let fd = (act(t + h) - act(t - h)) / (2.0 * h);
        prop_assert!((fd - act_prime(t)).abs() <= 1e-6);
        prop_assert!(act(t) >= 0.0);
    }
}

#[test]
fn leapfrog_matches_hand_computation() {
    let mut rng = RngStream::new(9, 0);
    let params = random_params(2, 3, 3, 4, &mut rng);
    let (u1, u0) = (rng.normals(3), rng.normals(3));
    let layer = &params.layers[1];
    let pre: Vec<f64> = (0..3)
        .map(|i| (0..3).map(|k| layer.k.get(i, k) * u1[k]).sum::<f64>() + layer.b[i])
        .collect();
    let h2 = params.hyper.h * params.hyper.h;
    let expected: Vec<f64> = (0..3)
        .map(|k| {
            let force: f64 = (0..3).map(|i| layer.k.get(i, k) * pre[i].max(0.0) * layer.w[i]).sum();
            2.0 * u1[k] - u0[k] + h2 * force
        })
        .collect();
    let got = hyperbolic_step(&params, 1, &u1, &u0).unwrap();
    assert!(max_abs_diff(&got, &expected) <= 1e-14);
}

#[test]
fn step_index_outside_interior_is_rejected() {
    let mut rng = RngStream::new(1, 0);
    let params = random_params(2, 2, 3, 4, &mut rng);
    let u = [0.0, 0.0];
    assert!(hyperbolic_step(&params, 0, &u, &u).is_err());
    assert!(hyperbolic_step(&params, 3, &u, &u).is_err());
}
