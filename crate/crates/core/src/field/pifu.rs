use num_traits::Float;
use rayon::prelude::*;

use crate::blueprint::ViewGeometry;
use crate::geometry::{Aabb, OrthoView, Vec3, ViewKind};

use super::encoder::encode;
use super::mlp;
use super::ops::{bilinear_taps, c, Tensor};
use super::{FieldError, Network};

const QUERY_CHUNK: usize = 256;

/// Decoded prediction at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldOutput {
    /// Sigmoid of the value logit, in `[0, 1]`; 0.5 on the predicted surface.
    pub value: f64,
    /// Unit normal, or zero when the raw normal output vanishes.
    pub normal: Vec3,
    pub edge: f64,
    /// Per view (front, back, side, top): the projection fell outside the feature
    /// map and was clamped to its border.
    pub out_of_frame: [bool; 4],
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(crate) fn decode(raw: &[f64], out_of_frame: [bool; 4]) -> FieldOutput {
    let n = Vec3::new(raw[1], raw[2], raw[3]);
    let len = n.norm();
    FieldOutput {
        value: sigmoid(raw[0]),
        normal: if len > 0.0 { n / len } else { Vec3::zeros() },
        edge: raw[4],
        out_of_frame,
    }
}

/// Bilinear taps of one query point in the four feature maps.
pub(crate) type PointTaps = [([(usize, f64); 4], bool); 4];

/// The field of one blueprint: its four encoded views and the cameras that map
/// model space onto them.
#[derive(Clone, Debug)]
pub struct PixelAlignedField<'a, T> {
    pub net: &'a Network<T>,
    pub bounds: Aabb,
    pub views: [OrthoView; 4],
    pub features: [Tensor<T>; 4],
}

impl<'a, T: Float + Send + Sync> PixelAlignedField<'a, T> {
    /// Encodes the four views of `geometry`.
    pub fn build(net: &'a Network<T>, geometry: &ViewGeometry) -> Result<Self, FieldError> {
        let [f, b, s, t] = ViewKind::ALL.map(|kind| encode(net, kind, &geometry.images[kind.index()]));
        Ok(Self::from_features(net, geometry, [f?, b?, s?, t?]))
    }

    pub(crate) fn from_features(net: &'a Network<T>, geometry: &ViewGeometry, features: [Tensor<T>; 4]) -> Self {
        Self { net, bounds: geometry.bounds, views: geometry.views.clone(), features }
    }

    /// Continuous pixel coordinates of `p` in the input image of view `kind`.
    pub fn project(&self, kind: ViewKind, p: &Vec3) -> (f64, f64) {
        let (u, v, _) = self.views[kind.index()].project(p);
        (u, v)
    }

    pub(crate) fn taps(&self, p: &Vec3) -> PointTaps {
        let stride = self.net.config().encoder.feature_stride() as f64;
        std::array::from_fn(|k| {
            let (u, v, _) = self.views[k].project(p);
            let f = &self.features[k];
            bilinear_taps(f.height, f.width, u / stride - 0.5, v / stride - 0.5)
        })
    }

    /// Writes the MLP input for `p` into `row` (length `4·C + 3`).
    pub(crate) fn fill_row(&self, p: &Vec3, taps: &PointTaps, row: &mut [T]) {
        let ch = self.net.config().encoder.feature_depth;
        for (k, (t, _)) in taps.iter().enumerate() {
            let f = &self.features[k];
            let plane = f.height * f.width;
            for j in 0..ch {
                let base = &f.data[j * plane..(j + 1) * plane];
                row[k * ch + j] = t.iter().fold(T::zero(), |a, &(i, w)| a + base[i] * c(w));
            }
        }
        for a in 0..3 {
            row[4 * ch + a] = c(p[a]);
        }
    }

    /// The concatenated MLP input vector for `p`.
    pub fn feature_vector(&self, p: &Vec3) -> Vec<T> {
        let mut row = vec![T::zero(); self.net.config().mlp_input_len()];
        self.fill_row(p, &self.taps(p), &mut row);
        row
    }

    fn query_chunk(&self, points: &[Vec3]) -> Vec<FieldOutput> {
        let n = self.net.config().mlp_input_len();
        let mut input = vec![T::zero(); points.len() * n];
        let mut flags = Vec::with_capacity(points.len());
        for (p, row) in points.iter().zip(input.chunks_mut(n)) {
            let taps = self.taps(p);
            self.fill_row(p, &taps, row);
            flags.push(taps.map(|t| t.1));
        }
        let tape = mlp::forward(self.net, input, points.len());
        tape.output()
            .chunks(super::MLP_OUTPUTS)
            .zip(flags)
            .map(|(raw, f)| {
                let raw: Vec<f64> = raw.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
                decode(&raw, f)
            })
            .collect()
    }

    pub fn query(&self, p: &Vec3) -> FieldOutput {
        self.query_chunk(std::slice::from_ref(p))[0]
    }

    /// Queries many points in parallel; the result order follows `points`.
    pub fn query_batch(&self, points: &[Vec3]) -> Vec<FieldOutput> {
        points.par_chunks(QUERY_CHUNK).flat_map_iter(|chunk| self.query_chunk(chunk)).collect()
    }
}
