//! Images, the periodic difference operator and TV denoising instances.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::functions::{ProxFn, SmoothFn};
use crate::ladmm::TwoBlockProblem;
use crate::operators::{LinearMap, PeriodicDiff};
use crate::rng::{streams, SeededStream};
use crate::spectral::solve_identity_plus_gram;

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        check_len("ImageGrid", height * width, pixels.len())?;
        Ok(ImageGrid {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        ImageGrid {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.width + j]
    }

    fn same_shape(&self, other: &ImageGrid) -> Result<()> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(invalid(format!(
                "image shapes differ: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// Stacked horizontal and vertical forward differences with wraparound.
pub fn diff_op_periodic(height: usize, width: usize) -> Result<LinearMap> {
    if height < 2 || width < 2 {
        return Err(invalid(format!(
            "periodic differences need a grid of at least 2x2, got {height}x{width}"
        )));
    }
    Ok(LinearMap::PeriodicDiff(PeriodicDiff { height, width }))
}

/// Solves ((1+q)·I + β·DᵀD) X = rhs with one forward and one inverse 2-D DFT.
pub fn dft_quadratic_solve(rhs: &ImageGrid, beta: f64, q: f64) -> Result<ImageGrid> {
    if !(beta >= 0.0 && q >= 0.0) {
        return Err(invalid("dft_quadratic_solve needs β, q ≥ 0"));
    }
    let x = solve_identity_plus_gram(&rhs.pixels, rhs.height, rhs.width, 1.0 + q, beta)?;
    ImageGrid::new(rhs.height, rhs.width, x)
}

/// Deterministic piecewise-constant n×n scene: two rectangles and a disk on a
/// dark background.
pub fn synth_image(n: usize) -> ImageGrid {
    let nf = n as f64;
    let mut img = ImageGrid::filled(n, n, 0.2);
    for i in 0..n {
        for j in 0..n {
            let (y, x) = (i as f64 + 0.5, j as f64 + 0.5);
            let mut v = 0.2;
            if y >= nf / 8.0 && y < nf / 2.0 && x >= nf / 8.0 && x < 7.0 * nf / 16.0 {
                v = 0.8;
            }
            if y >= 5.0 * nf / 8.0 && y < 7.0 * nf / 8.0 && x >= nf / 4.0 && x < 3.0 * nf / 4.0 {
                v = 0.5;
            }
            let (cy, cx, r) = (0.35 * nf, 0.68 * nf, 0.18 * nf);
            if (y - cy).powi(2) + (x - cx).powi(2) <= r * r {
                v = 1.0;
            }
            img.pixels[i * n + j] = v;
        }
    }
    img
}

/// Adds i.i.d. N(0, level²) noise and clips to [0, 1].
pub fn add_noise(img: &ImageGrid, level: f64, seed: u64) -> Result<ImageGrid> {
    if !(level >= 0.0) {
        return Err(invalid("noise level must be nonnegative"));
    }
    if level == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = SeededStream::new(seed, streams::NOISE);
    let pixels = img
        .pixels
        .iter()
        .map(|p| (p + level * rng.normal()).clamp(0.0, 1.0))
        .collect();
    ImageGrid::new(img.height, img.width, pixels)
}

/// 10·log₁₀(1/MSE) for peak intensity 1; `None` for identical images.
pub fn psnr(x: &ImageGrid, reference: &ImageGrid) -> Result<Option<f64>> {
    x.same_shape(reference)?;
    if x.is_empty() {
        return Err(invalid("psnr of an empty image"));
    }
    let mse = crate::linalg::dist_sq(&x.pixels, &reference.pixels) / x.len() as f64;
    Ok((mse > 0.0).then(|| psnr_from_mse(mse)))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    -10.0 * mse.log10()
}

/// `min ½‖X − M‖² + μ‖Y‖₁  s.t.  DX − Y = 0` with y ↔ Y and z ↔ X.
pub fn tv_problem(noisy: &ImageGrid, mu: f64) -> Result<TwoBlockProblem> {
    if !(mu > 0.0) {
        return Err(invalid("TV weight μ must be positive"));
    }
    let d = diff_op_periodic(noisy.height, noisy.width)?;
    let n = noisy.len();
    TwoBlockProblem::new(
        ProxFn::L1 { weight: mu },
        ProxFn::SquaredDistance {
            center: noisy.pixels.clone(),
            weight: 1.0,
        },
        SmoothFn::Zero { n },
        LinearMap::scaled_identity(2 * n, -1.0),
        d,
        vec![0.0; 2 * n],
    )
}

/// Binary PGM (P5) with maxval 65535.
pub fn write_pgm<W: Write>(img: &ImageGrid, mut w: W) -> Result<()> {
    write!(w, "P5\n{} {}\n65535\n", img.width, img.height)?;
    let mut buf = Vec::with_capacity(2 * img.len());
    for p in &img.pixels {
        let v = (p.clamp(0.0, 1.0) * 65535.0).round() as u16;
        buf.extend_from_slice(&v.to_be_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_pgm_file(img: &ImageGrid, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_pgm(img, std::io::BufWriter::new(f))
}

/// Reads a binary PGM with 8- or 16-bit samples, scaled to [0, 1].
pub fn read_pgm<R: Read>(mut r: R) -> Result<ImageGrid> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if tokens[0] != "P5" {
        return Err(Error::Format(format!("not a binary PGM: {}", tokens[0])));
    }
    let parse = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
    };
    let (width, height, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let wide = maxval > 255;
    let n = width * height;
    let need = if wide { 2 * n } else { n };
    let data = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    let scale = 1.0 / maxval as f64;
    let pixels = if wide {
        data.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
            .collect()
    } else {
        data.iter().map(|&b| b as f64 * scale).collect()
    };
    ImageGrid::new(height, width, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_wrong_length() {
        assert!(ImageGrid::new(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(diff_op_periodic(1, 2).is_err());
        assert!(diff_op_periodic(2, 1).is_err());
        assert!(diff_op_periodic(2, 2).is_ok());
    }

    #[test]
    fn two_by_two_wraparound() {
        let d = diff_op_periodic(2, 2).unwrap();
        let (a, b, c, e) = (1.0, 4.0, 2.0, 7.0);
        let out = d.apply(&[a, b, c, e]).unwrap();
        assert_eq!(&out[0..2], &[b - a, a - b]);
        assert_eq!(&out[2..4], &[e - c, c - e]);
        assert_eq!(&out[4..6], &[c - a, e - b]);
    }

    #[test]
    fn constant_image_has_zero_differences() {
        let d = diff_op_periodic(3, 5).unwrap();
        assert!(d.apply(&[0.3; 15]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dft_solve_trivial_cases() {
        let img = ImageGrid::new(2, 3, vec![0.1, 0.5, 0.9, 0.2, 0.4, 0.6]).unwrap();
        let x = dft_quadratic_solve(&img, 0.0, 0.0).unwrap();
        for (a, b) in x.pixels.iter().zip(&img.pixels) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = ImageGrid::filled(4, 4, 0.6);
        let x = dft_quadratic_solve(&c, 5.0, 0.5).unwrap();
        assert!(x.pixels.iter().all(|v| (v - 0.4).abs() < 1e-15));
        assert!(dft_quadratic_solve(&c, -1.0, 0.0).is_err());
    }

    #[test]
    fn psnr_values() {
        let a = ImageGrid::filled(2, 2, 0.5);
        assert_eq!(psnr(&a, &a).unwrap(), None);
        let b = ImageGrid::filled(2, 2, 0.6);
        // MSE = 0.01
        assert!((psnr(&b, &a).unwrap().unwrap() - 20.0).abs() < 1e-12);
        assert!((psnr_from_mse(1e-4) - 40.0).abs() < 1e-12);
        assert!(psnr(&a, &ImageGrid::filled(1, 4, 0.5)).is_err());
    }

    #[test]
    fn noise_is_seeded_and_clipped() {
        let img = synth_image(16);
        assert_eq!(add_noise(&img, 0.0, 3).unwrap(), img);
        let a = add_noise(&img, 0.3, 9).unwrap();
        assert_eq!(a, add_noise(&img, 0.3, 9).unwrap());
        assert_ne!(a, add_noise(&img, 0.3, 10).unwrap());
        assert!(a.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(add_noise(&img, -0.1, 0).is_err());
    }

    #[test]
    fn synthetic_scene_in_range_and_piecewise_constant() {
        let img = synth_image(64);
        let mut levels: Vec<f64> = img.pixels.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels, vec![0.2, 0.5, 0.8, 1.0]);
    }

    #[test]
    fn pgm_round_trip() {
        let img = synth_image(8);
        let mut buf = Vec::new();
        write_pgm(&img, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n8 8\n65535\n"));
        let back = read_pgm(buf.as_slice()).unwrap();
        for (a, b) in back.pixels.iter().zip(&img.pixels) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-15);
        }
    }

    #[test]
    fn tv_objective_matches_split_form() {
        let m = add_noise(&synth_image(8), 0.1, 1).unwrap();
        let mu = 0.04;
        let p = tv_problem(&m, mu).unwrap();
        let x: Vec<f64> = m.pixels.iter().map(|v| 0.9 * v + 0.01).collect();
        let dx = p.c_map.apply(&x).unwrap();
        let split = p.objective(&dx, &x).unwrap();
        let direct = crate::baselines::tv_objective(&m, mu, &x);
        assert!((split - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        assert!(p.residual(&dx, &x).iter().all(|r| r.abs() < 1e-15));
    }
}
