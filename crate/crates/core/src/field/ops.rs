use num_traits::Float;

use crate::image::GrayImage;

/// Converts an `f64` constant into the working float type.
pub(crate) fn c<T: Float>(x: f64) -> T {
    T::from(x).expect("representable constant")
}

/// Channel-major feature tensor (`channels × height × width`).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Float> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![T::zero(); channels * height * width] }
    }

    pub fn from_image(img: &GrayImage) -> Self {
        Self { channels: 1, height: img.height(), width: img.width(), data: img.data().iter().map(|&v| c(v as f64)).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, ch: usize, y: usize, x: usize) -> T {
        self.data[(ch * self.height + y) * self.width + x]
    }

    pub fn plane(&self, ch: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[ch * n..(ch + 1) * n]
    }

    fn same_shape(&self) -> Self {
        Self::zeros(self.channels, self.height, self.width)
    }
}

/// Output length of a 3×3 convolution with padding 1 and the given stride.
pub(crate) fn conv_out(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}

/// Output-column range `[lo, hi)` whose tap `k` lands inside an input of length `n`.
fn tap_range(n: usize, out: usize, k: usize, stride: usize) -> (usize, usize) {
    let lo = if k == 0 { 1 } else { 0 };
    let hi = if n < k { 0 } else { ((n - k) / stride + 1).min(out) };
    (lo.min(hi), hi)
}

/// 3×3 convolution, zero padding 1. `w` is laid out `[cout][cin][3][3]`.
pub(crate) fn conv3x3<T: Float>(x: &Tensor<T>, w: &[T], b: &[T], cout: usize, stride: usize) -> Tensor<T> {
    let (cin, h, wd) = (x.channels, x.height, x.width);
    let (oh, ow) = (conv_out(h, stride), conv_out(wd, stride));
    let mut y = Tensor::zeros(cout, oh, ow);
    for co in 0..cout {
        let out = &mut y.data[co * oh * ow..(co + 1) * oh * ow];
        out.iter_mut().for_each(|v| *v = b[co]);
        for ci in 0..cin {
            let inp = x.plane(ci);
            for ky in 0..3 {
                let (oy0, oy1) = tap_range(h, oh, ky, stride);
                for kx in 0..3 {
                    let wv = w[((co * cin + ci) * 3 + ky) * 3 + kx];
                    let (ox0, ox1) = tap_range(wd, ow, kx, stride);
                    for oy in oy0..oy1 {
                        let iy = oy * stride + ky - 1;
                        let orow = &mut out[oy * ow..(oy + 1) * ow];
                        let irow = &inp[iy * wd..(iy + 1) * wd];
                        for ox in ox0..ox1 {
                            orow[ox] = orow[ox] + wv * irow[ox * stride + kx - 1];
                        }
                    }
                }
            }
        }
    }
    y
}

/// Accumulates the gradients of [`conv3x3`] into `dx`, `dw` and `db`.
pub(crate) fn conv3x3_backward<T: Float>(
    x: &Tensor<T>,
    w: &[T],
    dy: &Tensor<T>,
    stride: usize,
    dx: &mut Tensor<T>,
    dw: &mut [T],
    db: &mut [T],
) {
    let (cin, h, wd) = (x.channels, x.height, x.width);
    let (cout, oh, ow) = (dy.channels, dy.height, dy.width);
    for co in 0..cout {
        let g = dy.plane(co);
        db[co] = g.iter().fold(db[co], |a, &v| a + v);
        for ci in 0..cin {
            let inp = x.plane(ci);
            let dinp = &mut dx.data[ci * h * wd..(ci + 1) * h * wd];
            for ky in 0..3 {
                let (oy0, oy1) = tap_range(h, oh, ky, stride);
                for kx in 0..3 {
                    let wi = ((co * cin + ci) * 3 + ky) * 3 + kx;
                    let wv = w[wi];
                    let mut acc = T::zero();
                    let (ox0, ox1) = tap_range(wd, ow, kx, stride);
                    for oy in oy0..oy1 {
                        let iy = oy * stride + ky - 1;
                        let grow = &g[oy * ow..(oy + 1) * ow];
                        for ox in ox0..ox1 {
                            let ii = iy * wd + ox * stride + kx - 1;
                            acc = acc + inp[ii] * grow[ox];
                            dinp[ii] = dinp[ii] + wv * grow[ox];
                        }
                    }
                    dw[wi] = dw[wi] + acc;
                }
            }
        }
    }
}

pub(crate) fn tanh<T: Float>(x: &Tensor<T>) -> Tensor<T> {
    Tensor { data: x.data.iter().map(|v| v.tanh()).collect(), ..x.same_shape() }
}

/// Gradient through `y = tanh(x)` given the forward output `y`.
pub(crate) fn tanh_backward<T: Float>(y: &Tensor<T>, dy: &Tensor<T>, dx: &mut Tensor<T>) {
    for ((d, &g), &v) in dx.data.iter_mut().zip(&dy.data).zip(&y.data) {
        *d = *d + g * (T::one() - v * v);
    }
}

pub(crate) fn add<T: Float>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    Tensor { data: a.data.iter().zip(&b.data).map(|(&x, &y)| x + y).collect(), ..a.same_shape() }
}

pub(crate) fn accumulate<T: Float>(into: &mut Tensor<T>, g: &Tensor<T>) {
    for (d, &v) in into.data.iter_mut().zip(&g.data) {
        *d = *d + v;
    }
}

/// 2×2 average pooling; windows cut by an odd border average the pixels they cover.
pub(crate) fn avg_pool2<T: Float>(x: &Tensor<T>) -> Tensor<T> {
    let (oh, ow) = (x.height.div_ceil(2), x.width.div_ceil(2));
    let mut y = Tensor::zeros(x.channels, oh, ow);
    for ch in 0..x.channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let (mut sum, mut n) = (T::zero(), 0.0);
                for iy in 2 * oy..(2 * oy + 2).min(x.height) {
                    for ix in 2 * ox..(2 * ox + 2).min(x.width) {
                        sum = sum + x.get(ch, iy, ix);
                        n += 1.0;
                    }
                }
                y.data[(ch * oh + oy) * ow + ox] = sum / c(n);
            }
        }
    }
    y
}

pub(crate) fn avg_pool2_backward<T: Float>(dy: &Tensor<T>, dx: &mut Tensor<T>) {
    let (h, w) = (dx.height, dx.width);
    for ch in 0..dy.channels {
        for oy in 0..dy.height {
            for ox in 0..dy.width {
                let ys = 2 * oy..(2 * oy + 2).min(h);
                let xs = 2 * ox..(2 * ox + 2).min(w);
                let n: T = c((ys.len() * xs.len()) as f64);
                let g = dy.get(ch, oy, ox) / n;
                for iy in ys {
                    for ix in xs.clone() {
                        let i = (ch * h + iy) * w + ix;
                        dx.data[i] = dx.data[i] + g;
                    }
                }
            }
        }
    }
}

/// Nearest-neighbor upsampling by 2, cropped to `height × width`.
pub(crate) fn upsample2<T: Float>(x: &Tensor<T>, height: usize, width: usize) -> Tensor<T> {
    let mut y = Tensor::zeros(x.channels, height, width);
    for ch in 0..x.channels {
        for oy in 0..height {
            for ox in 0..width {
                y.data[(ch * height + oy) * width + ox] = x.get(ch, oy / 2, ox / 2);
            }
        }
    }
    y
}

pub(crate) fn upsample2_backward<T: Float>(dy: &Tensor<T>, dx: &mut Tensor<T>) {
    let (h, w) = (dx.height, dx.width);
    for ch in 0..dy.channels {
        for oy in 0..dy.height {
            for ox in 0..dy.width {
                let i = (ch * h + oy / 2) * w + ox / 2;
                dx.data[i] = dx.data[i] + dy.get(ch, oy, ox);
            }
        }
    }
}

/// Plane offsets and weights of the four bilinear taps at continuous feature
/// coordinate `(fx, fy)` (pixel centers at integers), clamped into the map.
/// The flag reports whether the coordinate lies outside the area covered by the
/// map's pixels (more than half a pixel beyond the outer centers).
pub(crate) fn bilinear_taps(height: usize, width: usize, fx: f64, fy: f64) -> ([(usize, f64); 4], bool) {
    let (mx, my) = ((width - 1) as f64, (height - 1) as f64);
    let outside = !(fx >= -0.5 && fx <= mx + 0.5 && fy >= -0.5 && fy <= my + 0.5);
    let (x, y) = (fx.clamp(0.0, mx), fy.clamp(0.0, my));
    let x0 = (x.floor() as usize).min(width.saturating_sub(2));
    let y0 = (y.floor() as usize).min(height.saturating_sub(2));
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let (tx, ty) = (x - x0 as f64, y - y0 as f64);
    (
        [
            (y0 * width + x0, (1.0 - tx) * (1.0 - ty)),
            (y0 * width + x1, tx * (1.0 - ty)),
            (y1 * width + x0, (1.0 - tx) * ty),
            (y1 * width + x1, tx * ty),
        ],
        outside,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct definition: sum over taps with explicit bounds checks.
    fn naive_conv(x: &Tensor<f64>, w: &[f64], b: &[f64], cout: usize, s: usize) -> Tensor<f64> {
        let (oh, ow) = (conv_out(x.height, s), conv_out(x.width, s));
        let mut y = Tensor::zeros(cout, oh, ow);
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[co];
                    for ci in 0..x.channels {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * s + ky) as isize - 1;
                                let ix = (ox * s + kx) as isize - 1;
                                if iy >= 0 && ix >= 0 && (iy as usize) < x.height && (ix as usize) < x.width {
                                    acc += w[((co * x.channels + ci) * 3 + ky) * 3 + kx] * x.get(ci, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    y.data[(co * oh + oy) * ow + ox] = acc;
                }
            }
        }
        y
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        (0..n).map(|i| (((i as u64 + 1) * (seed * 2 + 7919)) % 1000) as f64 / 500.0 - 1.0).collect()
    }

    #[test]
    fn conv_matches_naive_for_odd_and_tiny_sizes() {
        for (h, w) in [(1, 1), (1, 2), (2, 1), (3, 5), (7, 4), (8, 8)] {
            for s in [1, 2] {
                let x = Tensor { channels: 2, height: h, width: w, data: pseudo(2 * h * w, 3) };
                let wt = pseudo(3 * 2 * 9, 5);
                let b = [0.1, -0.2, 0.3];
                let got = conv3x3(&x, &wt, &b, 3, s);
                let want = naive_conv(&x, &wt, &b, 3, s);
                assert_eq!((got.height, got.width), (h.div_ceil(s), w.div_ceil(s)));
                for (a, b) in got.data.iter().zip(&want.data) {
                    assert!((a - b).abs() < 1e-12, "{h}x{w} s{s}");
                }
            }
        }
    }

    #[test]
    fn conv_backward_is_the_adjoint() {
        // <conv(x), g> is linear in x and w, so its gradient must equal the
        // finite change exactly (up to rounding).
        for s in [1, 2] {
            let x = Tensor { channels: 2, height: 5, width: 6, data: pseudo(60, 11) };
            let wt = pseudo(2 * 2 * 9, 13);
            let b = [0.0, 0.0];
            let y = conv3x3(&x, &wt, &b, 2, s);
            let g = Tensor { data: pseudo(y.len(), 17), ..y.clone() };
            let mut dx = Tensor::zeros(2, 5, 6);
            let mut dw = vec![0.0; wt.len()];
            let mut db = vec![0.0; 2];
            conv3x3_backward(&x, &wt, &g, s, &mut dx, &mut dw, &mut db);
            let inner = |x: &Tensor<f64>, w: &[f64]| -> f64 {
                conv3x3(x, w, &b, 2, s).data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
            };
            for i in [0, 7, 29, 59] {
                let mut xp = x.clone();
                xp.data[i] += 1.0;
                assert!((inner(&xp, &wt) - inner(&x, &wt) - dx.data[i]).abs() < 1e-9);
            }
            for i in [0, 9, 20, 35] {
                let mut wp = wt.clone();
                wp[i] += 1.0;
                assert!((inner(&x, &wp) - inner(&x, &wt) - dw[i]).abs() < 1e-9);
            }
            assert!((db[1] - g.plane(1).iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_and_upsample_shapes_and_adjoints() {
        let x = Tensor { channels: 1, height: 3, width: 5, data: pseudo(15, 2) };
        let p = avg_pool2(&x);
        assert_eq!((p.height, p.width), (2, 3));
        assert!((p.get(0, 1, 2) - x.get(0, 2, 4)).abs() < 1e-15);
        assert!((p.get(0, 0, 0) - (x.get(0, 0, 0) + x.get(0, 0, 1) + x.get(0, 1, 0) + x.get(0, 1, 1)) / 4.0).abs() < 1e-15);
        let u = upsample2(&p, 3, 5);
        assert_eq!(u.get(0, 2, 3), p.get(0, 1, 1));
        let g = Tensor { data: pseudo(6, 4), ..p.clone() };
        let mut dx = Tensor::zeros(1, 3, 5);
        avg_pool2_backward(&g, &mut dx);
        let lhs: f64 = p.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&dx.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let gu = Tensor { data: pseudo(15, 6), ..u.clone() };
        let mut dp = Tensor::zeros(1, 2, 3);
        upsample2_backward(&gu, &mut dp);
        let lhs: f64 = u.data.iter().zip(&gu.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = p.data.iter().zip(&dp.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn bilinear_taps_interpolate_and_clamp() {
        let (taps, out) = bilinear_taps(3, 4, 1.25, 0.5);
        assert!(!out);
        let plane = [0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0, 20.0, 21.0, 22.0, 23.0];
        let v: f64 = taps.iter().map(|&(i, w)| plane[i] * w).sum();
        assert!((v - 6.25).abs() < 1e-12);
        let (taps, out) = bilinear_taps(3, 4, -2.0, 9.0);
        assert!(out);
        let v: f64 = taps.iter().map(|&(i, w)| plane[i] * w).sum();
        assert_eq!(v, 20.0);
        let (taps, _) = bilinear_taps(1, 1, 0.3, 0.0);
        assert_eq!(taps.iter().map(|t| t.1).sum::<f64>(), 1.0);
        assert!(taps.iter().all(|t| t.0 == 0));
    }
}
