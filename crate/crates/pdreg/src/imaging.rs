//! Discrete image calculus, total-variation problem assembly, PGM I/O, and
//! image quality metrics.
//!
//! Images are square, row-major `f64` slices with values nominally in
//! `[0, 1]`. The gradient uses forward differences with zero rows at the
//! last index in each direction; its negative adjoint (the divergence) is
//! the matching three-case backward difference. Gradient fields store the
//! two components interleaved per pixel: `field[2q]` is the horizontal
//! (column-direction) difference and `field[2q + 1]` the vertical
//! (row-direction) difference at pixel `q`.

use crate::num::norm;
use crate::proxops::Regularizer;
use crate::solvers::ProblemSpec;
use crate::{linops::LinearMap, Error, Result};
use std::io::Write as _;
use std::path::Path;

/// Forward-difference gradient, `R^{N^2} -> R^{2 N^2}`.
pub fn grad(u: &[f64], side: usize) -> Vec<f64> {
    let n = side;
    assert_eq!(u.len(), n * n, "grad: image length mismatch");
    let mut out = vec![0.0; 2 * n * n];
    for i in 0..n {
        for j in 0..n {
            let q = i * n + j;
            if j + 1 < n {
                out[2 * q] = u[q + 1] - u[q];
            }
            if i + 1 < n {
                out[2 * q + 1] = u[q + n] - u[q];
            }
        }
    }
    out
}

/// Divergence, the negative adjoint of [`grad`]: `<D u, p> = -<u, div p>`.
pub fn div(field: &[f64], side: usize) -> Vec<f64> {
    let n = side;
    assert_eq!(field.len(), 2 * n * n, "div: field length mismatch");
    let ph = |i: usize, j: usize| field[2 * (i * n + j)];
    let pv = |i: usize, j: usize| field[2 * (i * n + j) + 1];
    let mut out = vec![0.0; n * n];
    if n == 1 {
        return out;
    }
    for i in 0..n {
        for j in 0..n {
            let dh = if j == 0 {
                ph(i, 0)
            } else if j < n - 1 {
                ph(i, j) - ph(i, j - 1)
            } else {
                -ph(i, j - 1)
            };
            let dv = if i == 0 {
                pv(0, j)
            } else if i < n - 1 {
                pv(i, j) - pv(i - 1, j)
            } else {
                -pv(i - 1, j)
            };
            out[i * n + j] = dh + dv;
        }
    }
    out
}

/// `D* p = -div p`.
pub fn grad_adjoint(field: &[f64], side: usize) -> Vec<f64> {
    let mut out = div(field, side);
    out.iter_mut().for_each(|v| *v = -*v);
    out
}

/// Entrywise-absolute gradient action `|D| u` (for row sums).
pub(crate) fn grad_abs(u: &[f64], side: usize) -> Vec<f64> {
    let n = side;
    assert_eq!(u.len(), n * n);
    let mut out = vec![0.0; 2 * n * n];
    for i in 0..n {
        for j in 0..n {
            let q = i * n + j;
            if j + 1 < n {
                out[2 * q] = u[q + 1] + u[q];
            }
            if i + 1 < n {
                out[2 * q + 1] = u[q + n] + u[q];
            }
        }
    }
    out
}

/// Entrywise-absolute adjoint action `|D|^T p` (for column sums).
pub(crate) fn grad_abs_adjoint(field: &[f64], side: usize) -> Vec<f64> {
    let n = side;
    assert_eq!(field.len(), 2 * n * n);
    let ph = |i: usize, j: usize| field[2 * (i * n + j)];
    let pv = |i: usize, j: usize| field[2 * (i * n + j) + 1];
    let mut out = vec![0.0; n * n];
    if n == 1 {
        return out;
    }
    for i in 0..n {
        for j in 0..n {
            let dh = if j == 0 {
                ph(i, 0)
            } else if j < n - 1 {
                ph(i, j) + ph(i, j - 1)
            } else {
                ph(i, j - 1)
            };
            let dv = if i == 0 {
                pv(0, j)
            } else if i < n - 1 {
                pv(i, j) + pv(i - 1, j)
            } else {
                pv(i - 1, j)
            };
            out[i * n + j] = dh + dv;
        }
    }
    out
}

/// Box blur with window `(2 radius + 1)^2`, zero padding, and normalization
/// by the full window size regardless of clipping. Self-adjoint; a radius
/// of zero is the identity. Runs in `O(N^2)` via separable windowed sums.
pub fn blur(u: &[f64], side: usize, radius: usize) -> Vec<f64> {
    let n = side;
    assert_eq!(u.len(), n * n, "blur: image length mismatch");
    if radius == 0 {
        return u.to_vec();
    }
    let r = radius;
    let w = (2 * r + 1) as f64;

    let mut horiz = vec![0.0; n * n];
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        let row = &u[i * n..(i + 1) * n];
        for j in 0..n {
            prefix[j + 1] = prefix[j] + row[j];
        }
        for j in 0..n {
            let lo = j.saturating_sub(r);
            let hi = (j + r + 1).min(n);
            horiz[i * n + j] = prefix[hi] - prefix[lo];
        }
    }

    let mut out = vec![0.0; n * n];
    let mut colpre = vec![0.0; n + 1];
    for j in 0..n {
        for i in 0..n {
            colpre[i + 1] = colpre[i] + horiz[i * n + j];
        }
        for i in 0..n {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(n);
            out[i * n + j] = (colpre[hi] - colpre[lo]) / (w * w);
        }
    }
    out
}

/// Builds the constrained restoration problem for a blurred noisy image
/// `y`: minimize `||v||_{1,2} + indicator_{[0,1]}(u)` over `(u, v)` subject
/// to `K u = y` and `D u - v = 0`, encoded as one block operator with datum
/// `(y, 0)`. Noise level and ground truth are not known at this layer and
/// are left at their empty defaults for the caller to fill in.
pub fn assemble_tv_problem(y: &Image, blur_radius: usize) -> ProblemSpec {
    let n2 = y.side * y.side;
    let mut b_delta = Vec::with_capacity(3 * n2);
    b_delta.extend_from_slice(&y.data);
    b_delta.resize(3 * n2, 0.0);
    ProblemSpec {
        a: LinearMap::TvBlock { side: y.side, radius: blur_radius },
        b_delta,
        delta: 0.0,
        regularizer: Regularizer::GroupL12PlusBox { side: y.side },
        ground_truth: None,
    }
}

/// Square grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub side: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::Shape { what: "image data", expected: side * side, got: data.len() });
        }
        Ok(Self { side, data })
    }

    /// Reads a binary 8-bit PGM (`P5`, maxval 255, square).
    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        parse_pgm(&bytes)
    }

    /// Writes a binary 8-bit PGM; values are clamped to `[0, 1]` and
    /// quantized with round-half-up.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        write!(f, "P5\n{} {}\n255\n", self.side, self.side)?;
        let raster: Vec<u8> = self.data.iter().map(|&v| quantize_byte(v)).collect();
        f.write_all(&raster)?;
        Ok(())
    }
}

/// `clamp(v, 0, 1) * 255` rounded half up.
pub fn quantize_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0usize;

    // Header tokens separated by whitespace; `#` starts a comment to EOL.
    let next_token = |bytes: &[u8], pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::Parse("pgm: truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(bytes, &mut pos)?;
    if magic != "P5" {
        return Err(Error::Parse(format!("pgm: expected magic P5, got {magic:?}")));
    }
    let width: usize = next_token(bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Parse("pgm: bad width".into()))?;
    let height: usize = next_token(bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Parse("pgm: bad height".into()))?;
    let maxval: usize = next_token(bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Parse("pgm: bad maxval".into()))?;
    if maxval != 255 {
        return Err(Error::Parse(format!("pgm: maxval must be 255, got {maxval}")));
    }
    if width != height {
        return Err(Error::Parse(format!("pgm: image must be square, got {width}x{height}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Parse("pgm: missing raster separator".into()));
    }
    pos += 1;
    let expected = width * height;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(Error::Parse(format!(
            "pgm: raster too short: expected {expected} bytes, got {}",
            raster.len()
        )));
    }
    if raster.len() > expected {
        return Err(Error::Parse(format!(
            "pgm: {} trailing bytes after raster",
            raster.len() - expected
        )));
    }
    let data = raster.iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(width, data)
}

/// Image quality metrics against a reference with unit dynamic range.
#[derive(Debug, Clone, Copy)]
pub struct ImageMetrics {
    pub mse: f64,
    /// `10 log10(1 / mse)`; `+inf` when `mse == 0`.
    pub psnr: f64,
    /// Mean SSIM over all 8x8 windows at stride 1 (`K1 = 0.01`,
    /// `K2 = 0.03`, unit range); `NaN` when the image is smaller than the
    /// window.
    pub ssim: f64,
}

/// Computes MSE, PSNR, and mean SSIM of `x` against `reference`.
pub fn image_metrics(x: &[f64], reference: &[f64], side: usize) -> ImageMetrics {
    let n2 = side * side;
    assert_eq!(x.len(), n2, "image_metrics: x length mismatch");
    assert_eq!(reference.len(), n2, "image_metrics: reference length mismatch");
    let mse = x.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n2 as f64;
    let psnr = if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() };
    let ssim = if side < 8 { f64::NAN } else { mean_ssim(x, reference, side) };
    ImageMetrics { mse, psnr, ssim }
}

fn mean_ssim(x: &[f64], y: &[f64], n: usize) -> f64 {
    const C1: f64 = 1e-4; // (0.01 * range)^2
    const C2: f64 = 9e-4; // (0.03 * range)^2
    const W: usize = 8;
    let area = (W * W) as f64;

    // Summed-area tables for x, y, x^2, y^2, xy; plane (n+1)^2.
    let m = n + 1;
    let mut sx = vec![0.0; m * m];
    let mut sy = vec![0.0; m * m];
    let mut sxx = vec![0.0; m * m];
    let mut syy = vec![0.0; m * m];
    let mut sxy = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (x[i * n + j], y[i * n + j]);
            let at = |t: &[f64], ii: usize, jj: usize| t[ii * m + jj];
            let idx = (i + 1) * m + (j + 1);
            sx[idx] = a + at(&sx, i, j + 1) + at(&sx, i + 1, j) - at(&sx, i, j);
            sy[idx] = b + at(&sy, i, j + 1) + at(&sy, i + 1, j) - at(&sy, i, j);
            sxx[idx] = a * a + at(&sxx, i, j + 1) + at(&sxx, i + 1, j) - at(&sxx, i, j);
            syy[idx] = b * b + at(&syy, i, j + 1) + at(&syy, i + 1, j) - at(&syy, i, j);
            sxy[idx] = a * b + at(&sxy, i, j + 1) + at(&sxy, i + 1, j) - at(&sxy, i, j);
        }
    }
    let win = |t: &[f64], i: usize, j: usize| {
        t[(i + W) * m + (j + W)] - t[i * m + (j + W)] - t[(i + W) * m + j] + t[i * m + j]
    };

    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..=n - W {
        for j in 0..=n - W {
            let mx = win(&sx, i, j) / area;
            let my = win(&sy, i, j) / area;
            let vx = win(&sxx, i, j) / area - mx * mx;
            let vy = win(&syy, i, j) / area - my * my;
            let cxy = win(&sxy, i, j) / area - mx * my;
            let num = (2.0 * mx * my + C1) * (2.0 * cxy + C2);
            let den = (mx * mx + my * my + C1) * (vx + vy + C2);
            acc += num / den;
            count += 1;
        }
    }
    acc / count as f64
}

/// `||x - reference||` restricted to nothing: plain Euclidean distance of
/// two images (used by reconstruction-error columns).
pub fn image_distance(x: &[f64], reference: &[f64]) -> f64 {
    norm(&crate::num::sub(x, reference))
}
