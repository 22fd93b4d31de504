use super::train::{Optimizer, TrainingState};
use super::{FieldError, Network, NetworkConfig};

const MAGIC: &[u8; 4] = b"PAFW";
const VERSION: u32 = 1;

/// Decoded weights file.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub params: Vec<f32>,
    pub state: Option<TrainingState>,
}

/// Little-endian layout: magic `PAFW`, `u32` version, `u32` length plus JSON
/// network configuration, `u64` parameter count plus `f32` parameters in
/// declaration order, then a `u8` flag followed (when 1) by the training state:
/// `u64` step, `u8` optimizer (0 SGD, 1 Adam), `u64` count plus `f32` buffers.
pub fn save_weights(net: &Network<f32>, state: Option<&TrainingState>) -> Vec<u8> {
    let config = serde_json::to_vec(net.config()).expect("config serializes");
    let mut out = Vec::with_capacity(32 + config.len() + 4 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
    for p in &net.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    match state {
        None => out.push(0),
        Some(s) => {
            out.push(1);
            out.extend_from_slice(&s.step.to_le_bytes());
            out.push(match s.optimizer {
                Optimizer::Sgd => 0,
                Optimizer::Adam => 1,
            });
            out.extend_from_slice(&(s.buffers.len() as u64).to_le_bytes());
            for b in &s.buffers {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], FieldError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| FieldError::Malformed(format!("file ends inside {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, FieldError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, FieldError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, FieldError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, what: &str) -> Result<Vec<f32>, FieldError> {
        let n = usize::try_from(self.u64(what)?).map_err(|_| FieldError::Malformed(format!("{what} count")))?;
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| FieldError::Malformed(format!("{what} count")))?, what)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint, FieldError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FieldError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(FieldError::UnsupportedVersion(version));
    }
    let len = r.u32("config length")? as usize;
    let config: NetworkConfig = serde_json::from_slice(r.take(len, "config")?)
        .map_err(|e| FieldError::Malformed(format!("config block: {e}")))?;
    config.validate()?;
    let params = r.f32s("parameters")?;
    let state = match r.u8("state flag")? {
        0 => None,
        1 => {
            let step = r.u64("step")?;
            let optimizer = match r.u8("optimizer")? {
                0 => Optimizer::Sgd,
                1 => Optimizer::Adam,
                k => return Err(FieldError::Malformed(format!("unknown optimizer tag {k}"))),
            };
            Some(TrainingState { step, optimizer, buffers: r.f32s("optimizer buffers")? })
        }
        k => return Err(FieldError::Malformed(format!("unknown state flag {k}"))),
    };
    if r.pos != bytes.len() {
        return Err(FieldError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { config, params, state })
}

impl Checkpoint {
    /// Builds the network, checking the parameter count against the architecture.
    pub fn network(&self) -> Result<Network<f32>, FieldError> {
        let mut net = Network::zeros(&self.config)?;
        if net.param_count() != self.params.len() {
            return Err(FieldError::Malformed(format!(
                "{} parameters stored, the configuration needs {}",
                self.params.len(),
                net.param_count()
            )));
        }
        net.params.copy_from_slice(&self.params);
        Ok(net)
    }
}

/// Reads a checkpoint and insists on the `expected` architecture.
pub fn load_weights(bytes: &[u8], expected: &NetworkConfig) -> Result<(Network<f32>, Option<TrainingState>), FieldError> {
    let ck = read_checkpoint(bytes)?;
    if &ck.config != expected {
        let show = |c: &NetworkConfig| serde_json::to_string(c).expect("config serializes");
        return Err(FieldError::ConfigMismatch { expected: show(expected), found: show(&ck.config) });
    }
    let net = ck.network()?;
    Ok((net, ck.state))
}
