//! Independent oracles shared by the integration tests. They use nalgebra
//! directly and never call the library's own solvers.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pdaccel::functions::{ProxFn, SmoothFn};
use pdaccel::ladmm::TwoBlockProblem;
use pdaccel::lalm::CompositeProblem;
use pdaccel::operators::{DenseMatrix, LinearMap};
use pdaccel::rng::SeededStream;

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows, m.cols, &m.data)
}

pub struct Oracle {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub value: f64,
}

/// KKT of min ½xᵀHx + lᵀx s.t. Ax = b with the convention Hx + l = Aᵀλ.
/// `None` when the KKT matrix is singular.
pub fn kkt_solve(
    h: &DMatrix<f64>,
    l: &[f64],
    a: &DMatrix<f64>,
    b: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (h.ncols(), a.nrows());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    k.view_mut((0, n), (n, m)).copy_from(&(-a.transpose()));
    k.view_mut((n, 0), (m, n)).copy_from(a);
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        rhs[i] = -l[i];
    }
    for i in 0..m {
        rhs[n + i] = b[i];
    }
    let lu = k.clone().lu();
    let mut sol = lu.solve(&rhs)?;
    // one refinement step
    let r = &rhs - &k * &sol;
    sol += lu.solve(&r)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let s = sol.as_slice();
    Some((s[..n].to_vec(), s[n..].to_vec()))
}

fn quadratic_parts(f: &SmoothFn, n: usize) -> (DMatrix<f64>, Vec<f64>) {
    match f {
        SmoothFn::Quadratic { q, c, .. } => (to_na(&q.to_dense()), c.clone()),
        SmoothFn::Zero { .. } => (DMatrix::zeros(n, n), vec![0.0; n]),
        SmoothFn::Custom(_) => panic!("oracle needs an explicit quadratic"),
    }
}

fn quad_value(h: &DMatrix<f64>, l: &[f64], x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    0.5 * xv.dot(&(h * &xv)) + l.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

pub fn ecqp_oracle(p: &CompositeProblem) -> Oracle {
    let (h, l) = quadratic_parts(&p.f, p.n());
    let a = to_na(&p.a.to_dense());
    let (x, lambda) = kkt_solve(&h, &l, &a, &p.b).expect("nonsingular KKT system");
    let value = quad_value(&h, &l, &x);
    Oracle { x, lambda, value }
}

/// Enumerates all 2ⁿ free sets of min ½xᵀHx + lᵀx s.t. Ax = b, x ≥ 0 and
/// keeps the cheapest pattern that satisfies every KKT sign condition.
pub fn nnqp_brute_force(p: &CompositeProblem) -> Oracle {
    let n = p.n();
    assert!(n <= 16, "brute force is exponential in n");
    let (h, l) = quadratic_parts(&p.f, n);
    let a = to_na(&p.a.to_dense());
    let mut best: Option<Oracle> = None;
    for mask in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let hf = DMatrix::from_fn(free.len(), free.len(), |i, j| h[(free[i], free[j])]);
        let lf: Vec<f64> = free.iter().map(|&i| l[i]).collect();
        let af = DMatrix::from_fn(a.nrows(), free.len(), |r, j| a[(r, free[j])]);
        let Some((xf, lam)) = kkt_solve(&hf, &lf, &af, &p.b) else {
            continue;
        };
        let mut x = vec![0.0; n];
        for (k, &i) in free.iter().enumerate() {
            x[i] = xf[k];
        }
        if x.iter().any(|v| *v < -1e-12) {
            continue;
        }
        let xv = DVector::from_column_slice(&x);
        let res = &a * &xv - DVector::from_column_slice(&p.b);
        if res.norm() > 1e-9 {
            continue;
        }
        let lv = DVector::from_column_slice(&lam);
        let reduced = &h * &xv + DVector::from_column_slice(&l) - a.transpose() * lv;
        if (0..n).any(|i| mask & (1 << i) == 0 && reduced[i] < -1e-9) {
            continue;
        }
        let value = quad_value(&h, &l, &x);
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(Oracle {
                x,
                lambda: lam,
                value,
            });
        }
    }
    best.expect("a KKT pattern exists")
}

fn squared_distance(g: &ProxFn, n: usize) -> (f64, Vec<f64>) {
    match g {
        ProxFn::SquaredDistance { center, weight } => (*weight, center.clone()),
        ProxFn::Zero => (0.0, vec![0.0; n]),
        other => panic!("oracle needs a quadratic block term, got {other:?}"),
    }
}

/// Two-block problems with quadratic f, g, h solved as one equality QP in
/// w = (y, z). Returns x = (y, z) stacked.
pub fn two_block_oracle(p: &TwoBlockProblem) -> Oracle {
    let (ny, nz) = (p.ny(), p.nz());
    let (wf, cy) = squared_distance(&p.f, ny);
    let (wg, cz) = squared_distance(&p.g, nz);
    let (hh, hl) = quadratic_parts(&p.h, nz);
    let n = ny + nz;
    let mut h = DMatrix::zeros(n, n);
    let mut l = vec![0.0; n];
    for i in 0..ny {
        h[(i, i)] = wf;
        l[i] = -wf * cy[i];
    }
    for i in 0..nz {
        for j in 0..nz {
            h[(ny + i, ny + j)] = hh[(i, j)];
        }
        h[(ny + i, ny + i)] += wg;
        l[ny + i] = hl[i] - wg * cz[i];
    }
    let bm = to_na(&p.b_map.to_dense());
    let cm = to_na(&p.c_map.to_dense());
    let mut a = DMatrix::zeros(p.m(), n);
    a.view_mut((0, 0), (p.m(), ny)).copy_from(&bm);
    a.view_mut((0, ny), (p.m(), nz)).copy_from(&cm);
    let (x, lambda) = kkt_solve(&h, &l, &a, &p.rhs).expect("nonsingular KKT system");
    let value = p.objective(&x[..ny], &x[ny..]).expect("finite objective");
    Oracle { x, lambda, value }
}

/// Periodic forward differences of an h×w image (row-major), horizontal
/// block first.
pub fn periodic_diff_matrix(h: usize, w: usize) -> DMatrix<f64> {
    let n = h * w;
    let mut d = DMatrix::zeros(2 * n, n);
    for i in 0..h {
        for j in 0..w {
            let r = i * w + j;
            d[(r, r)] -= 1.0;
            d[(r, i * w + (j + 1) % w)] += 1.0;
            d[(n + r, r)] -= 1.0;
            d[(n + r, ((i + 1) % h) * w + j)] += 1.0;
        }
    }
    d
}

pub fn tv_value(d: &DMatrix<f64>, noisy: &[f64], mu: f64, x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    let dx = d * &xv;
    0.5 * x
        .iter()
        .zip(noisy)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        + mu * dx.abs().sum()
}

/// TV denoising through its dual, min_{|Z|≤1} ½‖M − μDᵀZ‖², by enumerating
/// every coordinate as lower, upper or free (3^{2n} patterns). Returns the
/// unique primal X* = M − μDᵀZ*.
pub fn tv_brute_force(h: usize, w: usize, noisy: &[f64], mu: f64) -> Oracle {
    let d = periodic_diff_matrix(h, w);
    let k = d.nrows();
    assert!(k <= 10, "3^k patterns");
    let ddt = &d * d.transpose() * (mu * mu);
    let lin = (&d * DVector::from_column_slice(noisy)) * mu;
    let mut best: Option<Oracle> = None;
    let total = 3usize.pow(k as u32);
    for code in 0..total {
        let mut c = code;
        let mut state = vec![0i8; k];
        for s in state.iter_mut() {
            *s = (c % 3) as i8 - 1; // −1, 0 (free), +1
            c /= 3;
        }
        let free: Vec<usize> = (0..k).filter(|&i| state[i] == 0).collect();
        let mut z = DVector::from_fn(k, |i, _| state[i] as f64);
        if !free.is_empty() {
            let hf = DMatrix::from_fn(free.len(), free.len(), |i, j| ddt[(free[i], free[j])]);
            let g_fixed = &ddt * &z;
            let rhs = DVector::from_fn(free.len(), |i, _| lin[free[i]] - g_fixed[free[i]]);
            let svd = hf.clone().svd(true, true);
            let Ok(zf) = svd.solve(&rhs, 1e-12) else {
                continue;
            };
            if (&hf * &zf - &rhs).norm() > 1e-9 {
                continue;
            }
            for (i, &fi) in free.iter().enumerate() {
                z[fi] = zf[i];
            }
        }
        if z.iter().any(|v| v.abs() > 1.0 + 1e-12) {
            continue;
        }
        let grad = &ddt * &z - &lin;
        let ok = (0..k).all(|i| match state[i] {
            1 => grad[i] <= 1e-10,
            -1 => grad[i] >= -1e-10,
            _ => true,
        });
        if !ok {
            continue;
        }
        let x: Vec<f64> = (DVector::from_column_slice(noisy) - d.transpose() * &z * mu)
            .iter()
            .cloned()
            .collect();
        let value = tv_value(&d, noisy, mu, &x);
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(Oracle {
                x,
                lambda: z.iter().cloned().collect(),
                value,
            });
        }
    }
    best.expect("dual optimum exists")
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Nonnegative QP with n = 6, m = 2: Q = HHᵀ positive definite, A = [B  I]
/// and b > 0, so x = (0, b) is feasible and the minimizer is unique.
pub fn tiny_nnqp(seed: u64) -> CompositeProblem {
    let (m, n) = (2, 6);
    let mut rng = SeededStream::new(seed, 900);
    let h = DenseMatrix::from_fn(n, n, |_, _| rng.normal());
    let q = h.gram_rows();
    let a = DenseMatrix::from_fn(m, n, |i, j| {
        if j < n - m {
            rng.normal()
        } else if j - (n - m) == i {
            1.0
        } else {
            0.0
        }
    });
    let b = rng.uniform_vec(m);
    let c = rng.normal_vec(n);
    let f = SmoothFn::quadratic(LinearMap::dense(q), c, None, 0.0).unwrap();
    CompositeProblem::new(f, ProxFn::NonNegative, LinearMap::dense(a), b).unwrap()
}
