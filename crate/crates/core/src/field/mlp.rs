use num_traits::Float;

use super::Network;

/// Activations of a batched MLP pass: `acts[0]` is the input, `acts[l + 1]` the
/// output of layer `l` (after `tanh` for hidden layers, raw for the last one).
/// Every entry is row-major `batch × width`.
pub(crate) struct MlpTape<T> {
    pub batch: usize,
    pub acts: Vec<Vec<T>>,
}

impl<T: Float> MlpTape<T> {
    pub(crate) fn output(&self) -> &[T] {
        self.acts.last().expect("input recorded")
    }
}

pub(crate) fn forward<T: Float>(net: &Network<T>, input: Vec<T>, batch: usize) -> MlpTape<T> {
    let p = &net.params;
    let last = net.mlp.len() - 1;
    let mut acts = vec![input];
    for (li, l) in net.mlp.iter().enumerate() {
        let x = acts.last().expect("input recorded");
        let mut y = vec![T::zero(); batch * l.nout];
        for b in 0..batch {
            let xr = &x[b * l.nin..(b + 1) * l.nin];
            for o in 0..l.nout {
                let wr = &p[l.weight + o * l.nin..l.weight + (o + 1) * l.nin];
                let z = wr.iter().zip(xr).fold(p[l.bias + o], |a, (&w, &v)| a + w * v);
                y[b * l.nout + o] = if li < last { z.tanh() } else { z };
            }
        }
        acts.push(y);
    }
    MlpTape { batch, acts }
}

/// Accumulates parameter gradients of `⟨output, d_out⟩` into `grad` and returns the
/// gradient with respect to the input.
pub(crate) fn backward<T: Float>(net: &Network<T>, tape: &MlpTape<T>, d_out: Vec<T>, grad: &mut [T]) -> Vec<T> {
    let p = &net.params;
    let batch = tape.batch;
    let last = net.mlp.len() - 1;
    let mut dy = d_out;
    for (li, l) in net.mlp.iter().enumerate().rev() {
        if li < last {
            for (d, &y) in dy.iter_mut().zip(&tape.acts[li + 1]) {
                *d = *d * (T::one() - y * y);
            }
        }
        let x = &tape.acts[li];
        let mut dx = vec![T::zero(); batch * l.nin];
        for b in 0..batch {
            let xr = &x[b * l.nin..(b + 1) * l.nin];
            let dxr = &mut dx[b * l.nin..(b + 1) * l.nin];
            for o in 0..l.nout {
                let g = dy[b * l.nout + o];
                if g == T::zero() {
                    continue;
                }
                grad[l.bias + o] = grad[l.bias + o] + g;
                let w0 = l.weight + o * l.nin;
                let (gw, wr) = (&mut grad[w0..w0 + l.nin], &p[w0..w0 + l.nin]);
                for i in 0..l.nin {
                    gw[i] = gw[i] + g * xr[i];
                    dxr[i] = dxr[i] + g * wr[i];
                }
            }
        }
        dy = dx;
    }
    dy
}
