//! Model checkpoint files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "SVD1"
//! u32 layer count L
//! L x { u32 rows, u32 cols, rows*cols f64 row-major }
//! u8 flags            bit 0: biases present, bit 1: constrained
//! f64 leaky-ReLU slope
//! if biases: L x { cols f64 }
//! u8 center kind      0 fixed, 1 plain mean, 2 signed mean
//! u32 center dim
//! dim x f64
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Result, SvddError};
use crate::fsutil::{read_file, write_atomic};
use crate::network::EncoderNetwork;
use crate::objectives::{Center, CenterKind};

const MAGIC: &[u8; 4] = b"SVD1";
const FLAG_BIAS: u8 = 1;
const FLAG_CONSTRAINED: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: EncoderNetwork,
    pub center: Center,
}

impl Checkpoint {
    pub fn new(network: EncoderNetwork, center: Center) -> Result<Self> {
        if network.output_dim() != center.dim() {
            return Err(SvddError::DimensionMismatch(format!(
                "network latent dimension {} but center dimension {}",
                network.output_dim(),
                center.dim()
            )));
        }
        Ok(Self { network, center })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let net = &self.network;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(net.num_layers() as u32).to_le_bytes());
        for w in net.weights() {
            out.extend_from_slice(&(w.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(w.ncols() as u32).to_le_bytes());
            for v in w.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut flags = 0u8;
        if net.biases().is_some() {
            flags |= FLAG_BIAS;
        }
        if net.is_constrained() {
            flags |= FLAG_CONSTRAINED;
        }
        out.push(flags);
        out.extend_from_slice(&net.slope().to_le_bytes());
        if let Some(biases) = net.biases() {
            for b in biases {
                for v in b.iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.push(self.center.kind.code());
        out.extend_from_slice(&(self.center.dim() as u32).to_le_bytes());
        for v in self.center.vector.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MAGIC {
            return Err(r.bad("missing SVD1 magic"));
        }
        let layers = r.u32()? as usize;
        if layers == 0 {
            return Err(r.bad("zero layers"));
        }
        let mut weights = Vec::with_capacity(layers);
        for _ in 0..layers {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let vals = r.f64s(rows.checked_mul(cols).ok_or_else(|| r.bad("layer size overflow"))?)?;
            weights.push(Array2::from_shape_vec((rows, cols), vals).map_err(|e| r.bad(&e.to_string()))?);
        }
        let flags = r.take(1)?[0];
        if flags & !(FLAG_BIAS | FLAG_CONSTRAINED) != 0 {
            return Err(r.bad("unknown flag bits"));
        }
        let slope = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let biases = if flags & FLAG_BIAS != 0 {
            let mut bs = Vec::with_capacity(layers);
            for w in &weights {
                bs.push(Array1::from(r.f64s(w.ncols())?));
            }
            Some(bs)
        } else {
            None
        };
        let kind = CenterKind::from_code(r.take(1)?[0]).ok_or_else(|| r.bad("unknown center kind"))?;
        let dim = r.u32()? as usize;
        let center = Center::new(Array1::from(r.f64s(dim)?), kind);
        if r.pos != bytes.len() {
            return Err(r.bad("trailing bytes"));
        }
        let mut network = EncoderNetwork::from_weights(weights, slope, flags & FLAG_CONSTRAINED != 0)?;
        if let Some(bs) = biases {
            network = network.with_biases(bs)?;
        }
        Self::new(network, center)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bad(&self, reason: &str) -> SvddError {
        SvddError::MalformedHeader {
            path: self.path.to_path_buf(),
            reason: format!("checkpoint: {reason}"),
        }
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < k {
            return Err(self.bad("truncated file"));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, k: usize) -> Result<Vec<f64>> {
        let raw = self.take(k.checked_mul(8).ok_or_else(|| self.bad("size overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}
