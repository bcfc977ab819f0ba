//! Exact solves of `(α·I + s·DᵀD) X = R` for the periodic difference operator,
//! using the fact that DᵀD is diagonalized by the 2-D discrete Fourier basis.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// Symbol of DᵀD at frequency (i, j): 4sin²(πi/h) + 4sin²(πj/w).
pub fn gram_symbol(height: usize, width: usize) -> Vec<f64> {
    let sh: Vec<f64> = (0..height)
        .map(|i| {
            4.0 * (std::f64::consts::PI * i as f64 / height as f64)
                .sin()
                .powi(2)
        })
        .collect();
    let sw: Vec<f64> = (0..width)
        .map(|j| {
            4.0 * (std::f64::consts::PI * j as f64 / width as f64)
                .sin()
                .powi(2)
        })
        .collect();
    let mut out = Vec::with_capacity(height * width);
    for a in &sh {
        for b in &sw {
            out.push(a + b);
        }
    }
    out
}

fn fft2(data: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (
            planner.plan_fft_inverse(width),
            planner.plan_fft_inverse(height),
        )
    } else {
        (
            planner.plan_fft_forward(width),
            planner.plan_fft_forward(height),
        )
    };
    for row in data.chunks_mut(width) {
        row_fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); height];
    for j in 0..width {
        for i in 0..height {
            col[i] = data[i * width + j];
        }
        col_fft.process(&mut col);
        for i in 0..height {
            data[i * width + j] = col[i];
        }
    }
}

/// Solves `(alpha·I + s·DᵀD) X = rhs` on a `height × width` periodic grid.
pub fn solve_identity_plus_gram(
    rhs: &[f64],
    height: usize,
    width: usize,
    alpha: f64,
    s: f64,
) -> Result<Vec<f64>> {
    let symbol = gram_symbol(height, width);
    if symbol.iter().any(|lam| alpha + s * lam <= 0.0) {
        return Err(invalid(format!(
            "system alpha·I + s·DᵀD is not positive definite (alpha={alpha}, s={s})"
        )));
    }
    let mut buf: Vec<Complex64> = rhs.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft2(&mut buf, height, width, false);
    for (z, lam) in buf.iter_mut().zip(&symbol) {
        *z /= alpha + s * lam;
    }
    fft2(&mut buf, height, width, true);
    let n = (height * width) as f64;
    Ok(buf.iter().map(|z| z.re / n).collect())
}
