mod common;

use approx::assert_abs_diff_eq;

use pdaccel::baselines::{chambolle_pock_tv, tv_objective, CpConfig};
use pdaccel::harness::{
    bound_convert, kkt_residual, prepare_instance, reference_solve, QuadraticGapBound,
};
use pdaccel::lalm::bound_lalm_adaptive;
use pdaccel::linalg::{dist_sq, norm};
use pdaccel::operators::PeriodicDiff;
use pdaccel::problems::{gen_ecqp, Instance, ProblemSpec};

#[test]
fn ecqp_reference_matches_dense_kkt() {
    for seed in 0..3 {
        let p = gen_ecqp(20, 500, seed).unwrap();
        let r = p.reference.as_ref().unwrap();
        let o = common::ecqp_oracle(&p);
        let kkt = kkt_residual(&p, &r.x, &r.lambda).unwrap();
        assert!(kkt.primal <= 1e-10 && kkt.dual <= 1e-10, "{kkt:?}");
        assert!(common::dist(&r.x, &o.x) <= 1e-8 * (1.0 + norm(&o.x)));
        assert_abs_diff_eq!(r.value, o.value, epsilon = 1e-9 * (1.0 + o.value.abs()));
    }
}

#[test]
fn tiny_nnqp_reference_matches_enumeration() {
    for seed in 0..5 {
        let p = common::tiny_nnqp(seed);
        let o = common::nnqp_brute_force(&p);
        let sol = reference_solve(&Instance::Composite(p), 1e-12).unwrap();
        let pdaccel::harness::ReferenceSolution::Composite { reference, .. } = sol else {
            panic!("composite instance gives a composite reference");
        };
        assert!(common::dist(&reference.x, &o.x) <= 1e-8, "seed {seed}");
        assert_abs_diff_eq!(reference.value, o.value, epsilon = 1e-8);
    }
}

#[test]
fn tv_references_agree_across_solvers() {
    let spec = ProblemSpec::Tv {
        size: 8,
        noise: 0.1,
        mu: 0.04,
        seed: 0,
    };
    let inst = prepare_instance(&spec, 1e-10, None).unwrap();
    let Instance::Tv {
        problem, noisy, mu, ..
    } = &inst
    else {
        unreachable!()
    };
    let admm = tv_objective(noisy, *mu, &problem.reference.as_ref().unwrap().z);
    let step = 1.0
        / PeriodicDiff {
            height: 8,
            width: 8,
        }
        .norm_sq_exact()
        .sqrt();
    let cfg = CpConfig {
        mu: *mu,
        tau1: step,
        sigma1: step,
        gamma: 0.35 / mu,
        max_iter: 20_000,
    };
    let (_, state) = chambolle_pock_tv(noisy, &cfg, None).unwrap();
    let cp = tv_objective(noisy, *mu, &state.x);
    assert!((admm - cp).abs() <= 1e-7, "{admm} vs {cp}");
}

#[test]
fn kkt_residual_cases() {
    let p = gen_ecqp(2, 6, 1).unwrap();
    let o = common::ecqp_oracle(&p);
    let exact = kkt_residual(&p, &o.x, &o.lambda).unwrap();
    assert!(exact.primal <= 1e-10 && exact.dual <= 1e-10);

    let wrong: Vec<f64> = o.lambda.iter().map(|v| v + 1.0).collect();
    let r = kkt_residual(&p, &o.x, &wrong).unwrap();
    assert!(r.primal <= 1e-10);
    assert!(r.dual > 0.0);

    let dir: Vec<f64> = (0..p.n()).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
    let mut prev = f64::INFINITY;
    for e in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
        let x: Vec<f64> = o.x.iter().zip(&dir).map(|(a, d)| a + e * d).collect();
        let r = kkt_residual(&p, &x, &o.lambda).unwrap().max();
        assert!(r < prev, "residual {r} did not shrink at δ={e}");
        assert!(r <= 100.0 * e * norm(&dir));
        prev = r;
    }
}

#[test]
fn bound_convert_examples() {
    let c = QuadraticGapBound {
        constant: 3.5,
        quadratic: 0.0,
    };
    assert_eq!(bound_convert(c, 1.0, 0.5).unwrap(), 3.5);
    let (gamma, t) = (0.5, 7.0);
    let q = QuadraticGapBound {
        constant: 0.0,
        quadratic: 1.0 / (2.0 * gamma * t),
    };
    assert_abs_diff_eq!(
        bound_convert(q, 2.0, 1.0).unwrap(),
        2.0 / (gamma * t),
        epsilon = 1e-15
    );
    assert!(bound_convert(q, 1.0, 1.0).is_err());
}

#[test]
fn bound_convert_reproduces_adaptive_certificate() {
    let p = gen_ecqp(5, 20, 4).unwrap();
    let r = p.reference.as_ref().unwrap();
    let x1 = vec![0.0; p.n()];
    let (eta, gamma) = (2.0 * p.f.lipschitz(), 5.0);
    let ln = norm(&r.lambda);
    for t in [1usize, 2, 10, 333] {
        let tt = (t * (t + 1)) as f64;
        let phi = QuadraticGapBound {
            constant: eta * dist_sq(&x1, &r.x) / tt,
            quadratic: 1.0 / (gamma * tt),
        };
        let converted = bound_convert(phi, 2.0 * ln, ln).unwrap();
        let direct = bound_lalm_adaptive(t, &x1, &r.x, &r.lambda, eta, gamma).unwrap();
        assert_abs_diff_eq!(converted, direct.obj, epsilon = 1e-12 * direct.obj);
    }
}
