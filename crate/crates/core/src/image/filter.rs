use super::{GrayImage, ImageError, VectorImage};

/// Largest possible summed Sobel magnitude for three channels with components in
/// `[-1, 1]`: each axis response is bounded by `4 * 2`, so one channel peaks at
/// `8 * sqrt(2)` and three channels at `24 * sqrt(2)`.
pub const SOBEL_NORMALIZER: f64 = 24.0 * std::f64::consts::SQRT_2;

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Per-pixel Sobel gradient magnitude summed over the three channels and divided by
/// [`SOBEL_NORMALIZER`]. Borders replicate the outermost pixels.
pub fn sobel_magnitude(img: &VectorImage) -> Result<GrayImage, ImageError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(ImageError::TooSmall { width: w, height: h, min: 3 });
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut gx = [0.0f64; 3];
            let mut gy = [0.0f64; 3];
            for (ky, (row_x, row_y)) in SOBEL_X.iter().zip(SOBEL_Y.iter()).enumerate() {
                for kx in 0..3 {
                    let p = img.get_clamped(x + kx as isize - 1, y + ky as isize - 1);
                    for c in 0..3 {
                        gx[c] += row_x[kx] * p[c] as f64;
                        gy[c] += row_y[kx] * p[c] as f64;
                    }
                }
            }
            let mag: f64 = (0..3).map(|c| (gx[c] * gx[c] + gy[c] * gy[c]).sqrt()).sum();
            out.push((mag / SOBEL_NORMALIZER).min(1.0) as f32);
        }
    }
    GrayImage::from_vec(w, h, out)
}

/// Sobel magnitude of a scalar image, normalized by the single-channel bound for
/// values in `[0, 1]` (`4 * sqrt(2)`).
pub fn sobel_magnitude_gray(img: &GrayImage) -> Result<GrayImage, ImageError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(ImageError::TooSmall { width: w, height: h, min: 3 });
    }
    let norm = 4.0 * std::f64::consts::SQRT_2;
    Ok(GrayImage::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        let mut gx = 0.0;
        let mut gy = 0.0;
        for ky in 0..3 {
            for kx in 0..3 {
                let p = img.get_clamped(x + kx - 1, y + ky - 1) as f64;
                gx += SOBEL_X[ky as usize][kx as usize] * p;
                gy += SOBEL_Y[ky as usize][kx as usize] * p;
            }
        }
        ((gx * gx + gy * gy).sqrt() / norm) as f32
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vec_from_fn(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> VectorImage {
        let mut img = VectorImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    // Independent oracle: explicit padded copy, then a direct 3x3 correlation.
    fn naive_sobel(img: &VectorImage) -> Vec<f64> {
        let (w, h) = (img.width(), img.height());
        let pw = w + 2;
        let mut padded = vec![[0.0f32; 3]; pw * (h + 2)];
        for py in 0..h + 2 {
            for px in 0..pw {
                let sx = (px as isize - 1).clamp(0, w as isize - 1) as usize;
                let sy = (py as isize - 1).clamp(0, h as isize - 1) as usize;
                padded[py * pw + px] = img.get(sx, sy);
            }
        }
        let kx = [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];
        let ky = [-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0];
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut total = 0.0;
                for c in 0..3 {
                    let (mut sx, mut sy) = (0.0, 0.0);
                    for i in 0..9 {
                        let v = padded[(y + i / 3) * pw + x + i % 3][c] as f64;
                        sx += kx[i] * v;
                        sy += ky[i] * v;
                    }
                    total += (sx * sx + sy * sy).sqrt();
                }
                out.push(total / SOBEL_NORMALIZER);
            }
        }
        out
    }

    #[test]
    fn constant_image_has_no_gradient() {
        let img = vec_from_fn(8, 8, |_, _| [0.3, -0.2, 0.9]);
        let s = sobel_magnitude(&img).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_peaks_beside_the_step() {
        let img = vec_from_fn(10, 6, |x, _| if x < 5 { [0.2; 3] } else { [0.8; 3] });
        let s = sobel_magnitude(&img).unwrap();
        for y in 0..6 {
            let row: Vec<f32> = (0..10).map(|x| s.get(x, y)).collect();
            let max = row.iter().cloned().fold(0.0, f32::max);
            assert!(max > 0.0);
            for (x, &v) in row.iter().enumerate() {
                if x == 4 || x == 5 {
                    assert_eq!(v, max);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn matches_naive_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = vec_from_fn(16, 16, |_, _| {
            [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
        });
        let s = sobel_magnitude(&img).unwrap();
        for (a, b) in s.data().iter().zip(naive_sobel(&img)) {
            assert!((*a as f64 - b).abs() < 1e-6);
        }
    }

    #[test]
    fn too_small_is_an_error() {
        let img = VectorImage::new(2, 5);
        assert_eq!(
            sobel_magnitude(&img),
            Err(ImageError::TooSmall { width: 2, height: 5, min: 3 })
        );
    }

    #[test]
    fn interior_translation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base: Vec<[f32; 3]> = (0..20 * 20)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0])
            .collect();
        let a = vec_from_fn(20, 20, |x, y| base[y * 20 + x]);
        let b = vec_from_fn(20, 20, |x, y| base[y * 20 + x.saturating_sub(1)]);
        let (sa, sb) = (sobel_magnitude(&a).unwrap(), sobel_magnitude(&b).unwrap());
        for y in 1..19 {
            for x in 2..19 {
                assert_eq!(sb.get(x, y), sa.get(x - 1, y));
            }
        }
    }
}
