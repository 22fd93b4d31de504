use num_traits::Float;

use crate::geometry::ViewKind;
use crate::image::GrayImage;

use super::ops::{self, Tensor};
use super::{EncoderConfig, FieldError, Network};

/// Spatial size of the feature map for a `width × height` input.
pub fn encoder_output_size(cfg: &EncoderConfig, width: usize, height: usize) -> (usize, usize) {
    let s = cfg.feature_stride();
    (width.div_ceil(s), height.div_ceil(s))
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Input,
    Conv { x: usize, layer: usize },
    Tanh { x: usize },
    Add { a: usize, b: usize },
    Pool { x: usize },
    Upsample { x: usize },
}

/// Forward pass of one view's encoder with every intermediate value recorded for
/// the reverse sweep.
pub(crate) struct EncoderTape<T> {
    view: usize,
    values: Vec<Tensor<T>>,
    ops: Vec<Op>,
}

struct Forward<'a, T> {
    net: &'a Network<T>,
    tape: EncoderTape<T>,
    next_conv: usize,
}

impl<T: Float> Forward<'_, T> {
    fn push(&mut self, op: Op, value: Tensor<T>) -> usize {
        self.tape.ops.push(op);
        self.tape.values.push(value);
        self.tape.values.len() - 1
    }

    fn conv(&mut self, x: usize) -> usize {
        let layer = self.next_conv;
        self.next_conv += 1;
        let l = self.net.encoders[self.tape.view][layer];
        let p = &self.net.params;
        let y = ops::conv3x3(&self.tape.values[x], &p[l.weight..], &p[l.bias..], l.cout, l.stride);
        self.push(Op::Conv { x, layer }, y)
    }

    fn tanh(&mut self, x: usize) -> usize {
        let y = ops::tanh(&self.tape.values[x]);
        self.push(Op::Tanh { x }, y)
    }

    fn add(&mut self, a: usize, b: usize) -> usize {
        let y = ops::add(&self.tape.values[a], &self.tape.values[b]);
        self.push(Op::Add { a, b }, y)
    }

    /// Residual unit `x + tanh(conv(x))`.
    fn block(&mut self, x: usize) -> usize {
        let c = self.conv(x);
        let t = self.tanh(c);
        self.add(x, t)
    }

    fn hourglass(&mut self, x: usize, level: usize, depth: usize) -> usize {
        let skip = self.block(x);
        let pooled = ops::avg_pool2(&self.tape.values[x]);
        let low = self.push(Op::Pool { x }, pooled);
        let low = self.block(low);
        let low = if level + 1 < depth { self.hourglass(low, level + 1, depth) } else { self.block(low) };
        let low = self.block(low);
        let (h, w) = (self.tape.values[x].height, self.tape.values[x].width);
        let up = ops::upsample2(&self.tape.values[low], h, w);
        let up = self.push(Op::Upsample { x: low }, up);
        self.add(skip, up)
    }
}

impl<T: Float> EncoderTape<T> {
    pub(crate) fn forward(net: &Network<T>, kind: ViewKind, img: &GrayImage) -> Result<Self, FieldError> {
        let cfg = &net.config().encoder;
        let min = cfg.min_input_dim();
        if img.width() < min || img.height() < min {
            return Err(FieldError::InputTooSmall {
                view: kind.name().into(),
                width: img.width(),
                height: img.height(),
                min,
            });
        }
        let tape = EncoderTape { view: kind.index(), values: vec![Tensor::from_image(img)], ops: vec![Op::Input] };
        let mut f = Forward { net, tape, next_conv: 0 };
        let mut x = 0;
        for _ in 0..cfg.initial_downsample_steps {
            let c = f.conv(x);
            x = f.tanh(c);
        }
        for _ in 0..cfg.stacks {
            x = f.hourglass(x, 0, cfg.internal_downsample_steps);
        }
        debug_assert_eq!(f.next_conv, net.encoders[kind.index()].len());
        Ok(f.tape)
    }

    pub(crate) fn output(&self) -> &Tensor<T> {
        self.values.last().expect("tape holds the input")
    }

    pub(crate) fn into_output(mut self) -> Tensor<T> {
        self.values.pop().expect("tape holds the input")
    }

    /// Reverse sweep: accumulates parameter gradients of `⟨output, d_out⟩` into
    /// `grad` (laid out like `net.params`).
    pub(crate) fn backward(&self, net: &Network<T>, d_out: Tensor<T>, grad: &mut [T]) {
        let n = self.values.len();
        let mut grads: Vec<Option<Tensor<T>>> = (0..n).map(|_| None).collect();
        grads[n - 1] = Some(d_out);
        let zero_like = |i: usize| {
            let v = &self.values[i];
            Tensor::zeros(v.channels, v.height, v.width)
        };
        for i in (1..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            match self.ops[i] {
                Op::Input => {}
                Op::Conv { x, layer } => {
                    let l = net.encoders[self.view][layer];
                    let mut dx = grads[x].take().unwrap_or_else(|| zero_like(x));
                    let (dw, db) = grad.split_at_mut(l.bias);
                    ops::conv3x3_backward(
                        &self.values[x],
                        &net.params[l.weight..],
                        &g,
                        l.stride,
                        &mut dx,
                        &mut dw[l.weight..],
                        &mut db[..l.cout],
                    );
                    grads[x] = Some(dx);
                }
                Op::Tanh { x } => {
                    let mut dx = grads[x].take().unwrap_or_else(|| zero_like(x));
                    ops::tanh_backward(&self.values[i], &g, &mut dx);
                    grads[x] = Some(dx);
                }
                Op::Add { a, b } => {
                    for src in [a, b] {
                        match &mut grads[src] {
                            Some(d) => ops::accumulate(d, &g),
                            slot @ None => *slot = Some(g.clone()),
                        }
                    }
                }
                Op::Pool { x } => {
                    let mut dx = grads[x].take().unwrap_or_else(|| zero_like(x));
                    ops::avg_pool2_backward(&g, &mut dx);
                    grads[x] = Some(dx);
                }
                Op::Upsample { x } => {
                    let mut dx = grads[x].take().unwrap_or_else(|| zero_like(x));
                    ops::upsample2_backward(&g, &mut dx);
                    grads[x] = Some(dx);
                }
            }
        }
    }
}

/// Encodes one canonically oriented view image into its feature map.
pub fn encode<T: Float>(net: &Network<T>, kind: ViewKind, img: &GrayImage) -> Result<Tensor<T>, FieldError> {
    Ok(EncoderTape::forward(net, kind, img)?.into_output())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::NetworkConfig;

    fn noise_image(w: usize, h: usize, seed: u32) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x as u32 * 31 + y as u32 * 17 + seed * 7) % 23) as f32 / 22.0)
    }

    #[test]
    fn output_is_half_size_for_any_input() {
        let net = Network::<f32>::new(&NetworkConfig::toy(), 0).unwrap();
        for (w, h) in [(64, 26), (63, 19), (2, 2), (37, 64), (3, 5)] {
            let f = encode(&net, ViewKind::Side, &noise_image(w, h, 1)).unwrap();
            assert_eq!((f.channels, f.width, f.height), (8, w.div_ceil(2), h.div_ceil(2)));
            assert!(f.data.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn too_small_input_names_the_minimum() {
        let cfg = NetworkConfig {
            encoder: EncoderConfig { initial_downsample_steps: 2, ..EncoderConfig::toy() },
            ..NetworkConfig::toy()
        };
        let net = Network::<f32>::new(&cfg, 0).unwrap();
        let err = encode(&net, ViewKind::Top, &noise_image(3, 10, 0)).unwrap_err();
        assert!(matches!(err, FieldError::InputTooSmall { min: 4, .. }));
        assert!(err.to_string().contains("at least 4 px"), "{err}");
        assert!(encode(&net, ViewKind::Top, &noise_image(4, 4, 0)).is_ok());
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let net = Network::<f64>::zeros(&NetworkConfig::toy()).unwrap();
        let f = encode(&net, ViewKind::Front, &noise_image(20, 12, 3)).unwrap();
        assert!(f.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn views_use_their_own_weights() {
        let net = Network::<f64>::new(&NetworkConfig::toy(), 5).unwrap();
        let img = noise_image(16, 16, 2);
        let a = encode(&net, ViewKind::Front, &img).unwrap();
        let b = encode(&net, ViewKind::Back, &img).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn initial_reduction_shifts_with_a_two_pixel_crop() {
        let net = Network::<f64>::new(&NetworkConfig::toy(), 8).unwrap();
        let l = net.encoders[0][0];
        let stage = |img: &GrayImage| {
            let y = ops::conv3x3(&Tensor::from_image(img), &net.params[l.weight..], &net.params[l.bias..], l.cout, l.stride);
            ops::tanh(&y)
        };
        let img = noise_image(30, 12, 4);
        let (a, b) = (stage(&img), stage(&img.crop(2, 0, 28, 12)));
        assert_eq!(b.width, 14);
        for c in 0..b.channels {
            for y in 0..b.height {
                // Column 0 of the crop sees zero padding where the original sees pixels.
                for x in 1..b.width {
                    assert!((b.get(c, y, x) - a.get(c, y, x + 1)).abs() < 1e-12);
                }
            }
        }
    }
}
