use super::{GrayImage, ImageError};

/// Bilinear interpolation between the four pixel centers around `(u, v)`.
///
/// Pixel `(x, y)` has its center at continuous coordinate `(x, y)`. Coordinates
/// outside `[0, width-1] x [0, height-1]` are rejected; callers clamp explicitly.
pub fn bilinear_sample(img: &GrayImage, u: f64, v: f64) -> Result<f64, ImageError> {
    let max_u = img.width().saturating_sub(1) as f64;
    let max_v = img.height().saturating_sub(1) as f64;
    if img.is_empty() || !(0.0..=max_u).contains(&u) || !(0.0..=max_v).contains(&v) {
        return Err(ImageError::OutOfRange { u, v, max_u, max_v });
    }
    Ok(bilinear_sample_clamped(img, u, v))
}

/// As [`bilinear_sample`] but clamps the coordinate into range first.
pub fn bilinear_sample_clamped(img: &GrayImage, u: f64, v: f64) -> f64 {
    let max_u = (img.width() - 1) as f64;
    let max_v = (img.height() - 1) as f64;
    let u = u.clamp(0.0, max_u);
    let v = v.clamp(0.0, max_v);
    let x0 = (u.floor() as usize).min(img.width().saturating_sub(2));
    let y0 = (v.floor() as usize).min(img.height().saturating_sub(2));
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = u - x0 as f64;
    let fy = v - y0 as f64;
    let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
    let bottom = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
    top * (1.0 - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Reference: weighted sum over the 2x2 neighborhood using tent weights.
    fn tent_oracle(img: &GrayImage, u: f64, v: f64) -> f64 {
        let mut acc = 0.0;
        for y in 0..img.height() {
            for x in 0..img.width() {
                let wx = (1.0 - (u - x as f64).abs()).max(0.0);
                let wy = (1.0 - (v - y as f64).abs()).max(0.0);
                acc += wx * wy * img.get(x, y) as f64;
            }
        }
        acc
    }

    #[test]
    fn exact_at_pixel_centers() {
        let img = GrayImage::from_fn(4, 3, |x, y| (x + 4 * y) as f32 / 12.0);
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(bilinear_sample(&img, x as f64, y as f64).unwrap(), img.get(x, y) as f64);
            }
        }
    }

    #[test]
    fn midpoint_is_average() {
        let img = GrayImage::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        assert!((bilinear_sample(&img, 0.5, 0.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matches_tent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = GrayImage::from_fn(9, 7, |_, _| rng.random::<f32>());
        for _ in 0..100 {
            let u = rng.random_range(0.0..=8.0);
            let v = rng.random_range(0.0..=6.0);
            assert!((bilinear_sample(&img, u, v).unwrap() - tent_oracle(&img, u, v)).abs() < 1e-7);
        }
    }

    #[test]
    fn exact_on_affine_images() {
        let img = GrayImage::from_fn(10, 10, |x, y| 0.1 + 0.03 * x as f32 + 0.05 * y as f32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let u: f64 = rng.random_range(0.0..=9.0);
            let v: f64 = rng.random_range(0.0..=9.0);
            let expected = 0.1 + 0.03 * u + 0.05 * v;
            assert!((bilinear_sample(&img, u, v).unwrap() - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        let img = GrayImage::new(4, 4);
        assert!(bilinear_sample(&img, 3.5, 0.0).is_err());
        assert!(bilinear_sample(&img, 0.0, -0.1).is_err());
        assert!(bilinear_sample(&img, 3.0, 3.0).is_ok());
    }
}
