mod common;

use nalgebra::SymmetricEigen;
use proptest::prelude::*;

use pdaccel::baselines::InnerOptions;
use pdaccel::functions::{prox_elastic_net, prox_l1, ProxFn, SmoothFn};
use pdaccel::ladmm::{
    matrix_inequality_margin, multiplier_increment, phi, run_ladmm_observed,
    weighted_average_weights, AdaptiveLadmmConfig, LadmmOptions, LadmmSchedule, LadmmState,
};
use pdaccel::lalm::{
    lalm_step, lyapunov_lalm, run_lalm_observed, BetaRule, LalmOptions, LalmSchedule, LalmState,
};
use pdaccel::linalg::{dist, dist_sq, dot, norm};
use pdaccel::operators::{spectral_norm, DenseMatrix, LinearMap, PeriodicDiff, ScalingOperator};
use pdaccel::problems::{
    dft_quadratic_solve, diff_op_periodic, gen_ecqp, gen_svm, gen_two_block_qp, ImageGrid,
};
use pdaccel::record::{read_rows, write_rows, TraceRow};
use pdaccel::rng::SeededStream;

fn matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = SeededStream::new(seed, 7);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

fn prox_cases(n: usize, seed: u64) -> Vec<ProxFn> {
    let mut rng = SeededStream::new(seed, 8);
    vec![
        ProxFn::Zero,
        ProxFn::NonNegative,
        ProxFn::L1 {
            weight: rng.uniform_range(0.01, 2.0),
        },
        ProxFn::HingeSum { m: 1 + n % 5 },
        ProxFn::ElasticNet {
            mu1: rng.uniform_range(0.0, 1.0),
            mu2: rng.uniform_range(0.0, 1.0),
        },
        ProxFn::SquaredDistance {
            center: rng.normal_vec(n),
            weight: rng.uniform_range(0.1, 3.0),
        },
    ]
}

fn prox_objective(g: &ProxFn, u: &[f64], v: &[f64], t: f64) -> Option<f64> {
    g.value(u).map(|gu| gu + dist_sq(u, v) / (2.0 * t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adjoint_matches_inner_product(rows in 1usize..12, cols in 1usize..12, seed in 0u64..1000) {
        let mut rng = SeededStream::new(seed, 1);
        let maps = [
            LinearMap::dense(matrix(rows, cols, seed)),
            LinearMap::PeriodicDiff(PeriodicDiff { height: rows + 1, width: cols + 1 }),
            LinearMap::scaled_identity(cols, rng.normal()),
        ];
        for map in &maps {
            let mn = map.norm_sq().sqrt();
            for _ in 0..100 {
                let u = rng.normal_vec(map.cols());
                let v = rng.normal_vec(map.rows());
                let lhs = dot(&map.apply(&u).unwrap(), &v);
                let rhs = dot(&u, &map.adjoint(&v).unwrap());
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (norm(&u) * norm(&v) * mn).max(1.0));
            }
        }
    }

    #[test]
    fn spectral_norm_dominates_every_ratio(rows in 1usize..10, cols in 1usize..10, seed in 0u64..1000) {
        let map = LinearMap::dense(matrix(rows, cols, seed));
        let est = spectral_norm(&map, 1e-12, 20_000, seed);
        let mut rng = SeededStream::new(seed, 2);
        for _ in 0..50 {
            let v = rng.normal_vec(cols);
            let ratio = norm(&map.apply(&v).unwrap()) / norm(&v);
            prop_assert!(est.value >= ratio - 1e-6, "{} < {}", est.value, ratio);
        }
    }

    #[test]
    fn scaling_operator_matches_dense(a in -3.0f64..3.0, c in -3.0f64..3.0, seed in 0u64..1000) {
        let m = matrix(4, 3, seed);
        let w = ScalingOperator::IdentityMinusGram { a, c, map: LinearMap::dense(m.clone()) };
        let mn = common::to_na(&m);
        let dense = nalgebra::DMatrix::<f64>::identity(3, 3) * a - mn.transpose() * &mn * c;
        let mut rng = SeededStream::new(seed, 3);
        let v = rng.normal_vec(3);
        let vn = nalgebra::DVector::from_column_slice(&v);
        let expect = vn.dot(&(&dense * &vn));
        let got = w.norm_sq(&v).unwrap();
        let scale = (a.abs() + c.abs() * mn.norm_squared()) * vn.norm_squared();
        prop_assert!((got - expect).abs() <= 1e-12 * scale.max(1.0));
        let applied = w.apply(&v).unwrap();
        let dv = &dense * &vn;
        for i in 0..3 {
            prop_assert!((applied[i] - dv[i]).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn psd_certificate_is_sound(a in -1.0f64..10.0, c in -1.0f64..2.0, seed in 0u64..1000) {
        let m = matrix(3, 4, seed);
        let w = ScalingOperator::IdentityMinusGram { a, c, map: LinearMap::dense(m.clone()) };
        if w.is_psd_certified() {
            let mn = common::to_na(&m);
            let dense = nalgebra::DMatrix::<f64>::identity(4, 4) * a - mn.transpose() * &mn * c;
            let lo = SymmetricEigen::new(dense).eigenvalues.min();
            prop_assert!(lo >= -1e-8 * a.abs().max(1.0), "certified but λ_min = {lo}");
        }
    }

    #[test]
    fn prox_is_the_minimizer(n in 1usize..6, t in 0.05f64..4.0, seed in 0u64..1000) {
        let mut rng = SeededStream::new(seed, 4);
        for g in prox_cases(n, seed) {
            let v: Vec<f64> = rng.normal_vec(n).iter().map(|x| 2.0 * x).collect();
            let u = g.prox(&v, t).unwrap();
            let best = prox_objective(&g, &u, &v, t).expect("prox lands in the domain");
            for i in 0..1000 {
                let w: Vec<f64> = if i % 2 == 0 {
                    rng.normal_vec(n).iter().map(|x| 2.0 * x).collect()
                } else {
                    u.iter().map(|x| x + 1e-3 * rng.normal()).collect()
                };
                if let Some(val) = prox_objective(&g, &w, &v, t) {
                    prop_assert!(best <= val + 1e-12 * val.abs().max(1.0), "{g:?}: {best} > {val}");
                }
            }
        }
    }

    #[test]
    fn prox_is_nonexpansive(n in 1usize..8, t in 0.05f64..4.0, seed in 0u64..1000) {
        let mut rng = SeededStream::new(seed, 5);
        for g in prox_cases(n, seed) {
            let u = rng.normal_vec(n);
            let v = rng.normal_vec(n);
            let d = dist(&g.prox(&u, t).unwrap(), &g.prox(&v, t).unwrap());
            prop_assert!(d <= dist(&u, &v) * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn elastic_net_contracts(n in 1usize..8, t in 0.05f64..4.0, mu1 in 0.0f64..1.0, mu2 in 0.01f64..2.0, seed in 0u64..1000) {
        let mut rng = SeededStream::new(seed, 6);
        let u = rng.normal_vec(n);
        let v = rng.normal_vec(n);
        let d = dist(&prox_elastic_net(&u, t, mu1, mu2).unwrap(), &prox_elastic_net(&v, t, mu1, mu2).unwrap());
        prop_assert!(d <= dist(&u, &v) / (1.0 + t * mu2) * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn l1_prox_is_positively_homogeneous(n in 1usize..8, t in 0.05f64..4.0, c in 0.1f64..10.0, seed in 0u64..1000) {
        let v = SeededStream::new(seed, 9).normal_vec(n);
        let cv: Vec<f64> = v.iter().map(|x| c * x).collect();
        let lhs = prox_l1(&cv, c * t).unwrap();
        let rhs = prox_l1(&v, t).unwrap();
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - c * b).abs() <= 1e-12 * c * (1.0 + b.abs()));
        }
    }

    #[test]
    fn quadratic_gradient_and_descent_lemma(n in 1usize..8, seed in 0u64..1000) {
        let h = matrix(n, n, seed);
        let q = h.gram_rows();
        let mut rng = SeededStream::new(seed, 10);
        let f = SmoothFn::quadratic(LinearMap::dense(q), rng.normal_vec(n), None, 0.0).unwrap();
        let x = rng.normal_vec(n);
        let y = rng.normal_vec(n);
        let g = f.gradient(&x);
        let eps = 1e-6;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += eps;
            xm[i] -= eps;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * eps);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()));
        }
        let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let upper = f.value(&x) + dot(&g, &d) + 0.5 * f.lipschitz() * dot(&d, &d);
        prop_assert!(f.value(&y) <= upper + 1e-10 * upper.abs().max(1.0));
    }

    #[test]
    fn weighted_average_weights_are_convex(t in 1usize..500, k0 in 1usize..50) {
        let w = weighted_average_weights(t, k0);
        prop_assert_eq!(w.len(), t);
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn csv_round_trip_is_exact(rows in prop::collection::vec(
        (
            prop::option::of(-1e300f64..1e300),
            prop::option::of(-1e300f64..1e300),
            prop::option::of(any::<f64>().prop_filter("finite", |v| v.is_finite())),
            prop::option::of(0.0f64..1.0),
            0.0f64..1e6,
        ),
        0..20,
    )) {
        let trace: Vec<TraceRow> = rows
            .iter()
            .enumerate()
            .map(|(i, (a, b, c, d, w))| TraceRow {
                k: i + 1,
                obj_err: *a,
                feas: *b,
                bound_obj: *c,
                bound_feas: None,
                ineq_slack: *d,
                phi: a.map(|v| v * 3.0),
                wall_time_s: *w,
            })
            .collect();
        let mut buf = Vec::new();
        write_rows(&trace, &mut buf).unwrap();
        let back = read_rows(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), trace.len());
        for (r, s) in back.iter().zip(&trace) {
            let bits = |o: Option<f64>| o.map(f64::to_bits);
            prop_assert_eq!(r.k, s.k);
            prop_assert_eq!(bits(r.obj_err), bits(s.obj_err));
            prop_assert_eq!(bits(r.feas), bits(s.feas));
            prop_assert_eq!(bits(r.bound_obj), bits(s.bound_obj));
            prop_assert_eq!(bits(r.ineq_slack), bits(s.ineq_slack));
            prop_assert_eq!(bits(r.phi), bits(s.phi));
            prop_assert_eq!(r.wall_time_s.to_bits(), s.wall_time_s.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constant_lalm_lyapunov_is_monotone(m in 2usize..8, extra in 5usize..40, seed in 0u64..1000, scale in 1.05f64..3.0) {
        let p = gen_ecqp(m, m + extra, seed).unwrap();
        let r = p.reference.clone().unwrap();
        let lf = p.f.lipschitz();
        let mf = m as f64;
        let s = LalmSchedule::constant(mf, mf, scale * lf, false, &p).unwrap();
        let weight = ScalingOperator::ScaledIdentity(scale * lf);
        let x1 = vec![0.0; p.n()];
        let mut prev = lyapunov_lalm(&LalmState::initial(x1.clone(), p.m()), &r.x, &r.lambda, &weight, mf).unwrap();
        let mut bad = None;
        let opts = LalmOptions { max_iter: 300, checks: false, ..Default::default() };
        run_lalm_observed(&p, &s, &x1, &opts, &mut |ev| {
            let v = lyapunov_lalm(ev.next, &r.x, &r.lambda, &weight, mf).unwrap();
            if v > prev * (1.0 + 1e-9) && bad.is_none() {
                bad = Some((ev.t, prev, v));
            }
            prev = v;
        }).unwrap();
        prop_assert!(bad.is_none(), "{bad:?}");
    }

    #[test]
    fn first_adaptive_step_ignores_the_aggregate(m in 2usize..6, extra in 3usize..20, seed in 0u64..1000) {
        let p = gen_ecqp(m, m + extra, seed).unwrap();
        let s = LalmSchedule::adaptive(m as f64, 2.0 * p.f.lipschitz(), BetaRule::EqualGamma, &p).unwrap();
        let params = s.params(1);
        prop_assert_eq!(params.alpha, 1.0);
        let mut rng = SeededStream::new(seed, 11);
        let x1 = rng.normal_vec(p.n());
        let a = LalmState::initial(x1.clone(), p.m());
        let b = LalmState { xbar: rng.normal_vec(p.n()), ..a.clone() };
        let inner = InnerOptions::default();
        let na = lalm_step(&p, &a, &params, &inner).unwrap();
        let nb = lalm_step(&p, &b, &params, &inner).unwrap();
        let na2 = lalm_step(&p, &na, &s.params(2), &inner).unwrap();
        let nb2 = lalm_step(&p, &nb, &s.params(2), &inner).unwrap();
        prop_assert_eq!(na2, nb2);
    }

    #[test]
    fn adaptive_lalm_parameters(k in 1usize..10_000, gamma in 0.1f64..50.0) {
        let p = gen_ecqp(2, 6, 0).unwrap();
        let eta = 2.0 * p.f.lipschitz();
        let s = LalmSchedule::adaptive(gamma, eta, BetaRule::EqualGamma, &p).unwrap();
        let pk = s.params(k);
        prop_assert!((0.0..=1.0).contains(&pk.alpha));
        prop_assert_eq!(pk.gamma, k as f64 * gamma);
        prop_assert_eq!(pk.beta, pk.gamma);
        prop_assert_eq!(pk.p.identity_part(), eta / k as f64);
    }

    #[test]
    fn ladmm_multiplier_increments_are_summable(seed in 0u64..1000, frac in 0.2f64..1.0, eta in 1.5f64..4.0) {
        let p = gen_two_block_qp(4, 8, seed).unwrap();
        let r = p.reference.clone().unwrap();
        let cap = 0.5 * (p.mu_g() + p.mu_h());
        let q = frac * cap;
        let gamma = q / (eta * p.c_map.norm_sq());
        let cfg = AdaptiveLadmmConfig::new(gamma, 1.0, ScalingOperator::ScaledIdentity(q), eta, &p).unwrap();
        prop_assert!(matrix_inequality_margin(&cfg, &p, 10_000) >= 0.0);
        let (y1, z1) = (vec![0.0; p.ny()], vec![0.0; p.nz()]);
        let s1 = LadmmState::initial(y1.clone(), z1.clone(), p.m());
        let phi1 = phi(1, &cfg, &s1, &r.y, &r.z, &r.lambda, &p).unwrap();
        let k0 = cfg.k0;
        let mut sum = 0.0;
        let schedule = LadmmSchedule::adaptive(cfg.clone(), &p);
        let opts = LadmmOptions { max_iter: 500, checks: false, ..Default::default() };
        let mut z_bad = 0;
        let zrate = p.l_h() + p.mu_h() + 2.0 * p.mu_g();
        run_ladmm_observed(&p, &schedule, &y1, &z1, &opts, &mut |ev| {
            sum += multiplier_increment(ev.t, k0, ev.prev, ev.next);
            let k = (ev.t + 1) as f64;
            if dist_sq(&ev.next.z, &r.z) > 2.0 * phi1 / ((k + k0 as f64) * zrate) + 1e-10 {
                z_bad += 1;
            }
        }).unwrap();
        prop_assert!(sum <= 2.0 * gamma * eta / (eta - 1.0) * phi1 * (1.0 + 1e-9), "{sum} vs {phi1}");
        prop_assert_eq!(z_bad, 0);
    }

    #[test]
    fn generators_are_pure(seed in 0u64..1000) {
        let a = gen_ecqp(3, 9, seed).unwrap();
        let b = gen_ecqp(3, 9, seed).unwrap();
        prop_assert_eq!(&a.a.to_dense().data, &b.a.to_dense().data);
        prop_assert_eq!(&a.b, &b.b);
        prop_assert_eq!(&a.reference.as_ref().unwrap().x, &b.reference.as_ref().unwrap().x);
        let c = gen_two_block_qp(3, 5, seed).unwrap();
        let d = gen_two_block_qp(3, 5, seed).unwrap();
        prop_assert_eq!(&c.c_map.to_dense().data, &d.c_map.to_dense().data);
        prop_assert_eq!(&c.rhs, &d.rhs);
        let (_, s1) = gen_svm(10, 20, 5, 0.5, seed, 0.01, 0.01).unwrap();
        let (_, s2) = gen_svm(10, 20, 5, 0.5, seed, 0.01, 0.01).unwrap();
        prop_assert_eq!(&s1.a.data, &s2.a.data);
    }

    #[test]
    fn svm_labels_split_in_half(half in 1usize..40, seed in 0u64..1000) {
        let (_, data) = gen_svm(2 * half, 12, 4, 0.5, seed, 0.01, 0.01).unwrap();
        prop_assert_eq!(data.labels.iter().filter(|l| **l == 1.0).count(), half);
        prop_assert_eq!(data.labels.iter().filter(|l| **l == -1.0).count(), half);
    }

    #[test]
    fn periodic_diff_norm_is_eight(h in 1usize..12, w in 1usize..12) {
        let (h, w) = (2 * h, 2 * w);
        let d = diff_op_periodic(h, w).unwrap();
        prop_assert!((d.norm_sq() - 8.0).abs() <= 1e-8);
        let est = spectral_norm(&d, 1e-13, 200_000, 0);
        prop_assert!((est.value * est.value - 8.0).abs() <= 1e-8, "{}", est.value);
    }

    #[test]
    fn dft_solve_inverts_the_operator(h in 2usize..10, w in 2usize..10, beta in 0.0f64..20.0, q in 0.0f64..5.0, seed in 0u64..1000) {
        let mut rng = SeededStream::new(seed, 12);
        let rhs = ImageGrid::new(h, w, rng.normal_vec(h * w)).unwrap();
        let x = dft_quadratic_solve(&rhs, beta, q).unwrap();
        let d = diff_op_periodic(h, w).unwrap();
        let dtd = d.adjoint(&d.apply(&x.pixels).unwrap()).unwrap();
        let back: Vec<f64> = x.pixels.iter().zip(&dtd).map(|(xi, gi)| (1.0 + q) * xi + beta * gi).collect();
        prop_assert!(dist(&back, &rhs.pixels) <= 1e-10 * norm(&rhs.pixels));
    }
}
