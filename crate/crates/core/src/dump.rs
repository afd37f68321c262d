//! Flat binary tensor dump for cross-implementation comparison.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                        |
//! |-------|------------------------------------------------|
//! | 8     | magic `CSTENSOR`                               |
//! | 24    | shape `(n_rx, n_tx, n_bins)` as three `u64`     |
//! | 8     | kind `u64`: 0 MBS receiver, 1 MiBS receiver, 2 fused |
//! | 8     | subcarrier / bin spacing in Hz, `f64`           |
//! | 16·len| `(re, im)` `f64` pairs in row-major `(k, p, n)` order |

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fusion::FusedTensor;
use crate::tensor::CTensor3;
use crate::waveform::{EchoTensor, Side};

pub const MAGIC: &[u8; 8] = b"CSTENSOR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Echo(Side),
    Fused,
}

impl TensorKind {
    fn code(self) -> u64 {
        match self {
            TensorKind::Echo(side) => side.code(),
            TensorKind::Fused => 2,
        }
    }

    fn from_code(code: u64) -> Result<Self> {
        match code {
            0 => Ok(TensorKind::Echo(Side::MbsRx)),
            1 => Ok(TensorKind::Echo(Side::MibsRx)),
            2 => Ok(TensorKind::Fused),
            other => Err(Error::Io(format!("unknown tensor kind {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorDump {
    pub kind: TensorKind,
    pub spacing_hz: f64,
    pub data: CTensor3,
}

impl From<&EchoTensor> for TensorDump {
    fn from(e: &EchoTensor) -> Self {
        Self {
            kind: TensorKind::Echo(e.side),
            spacing_hz: e.scs_hz,
            data: e.data.clone(),
        }
    }
}

impl From<&FusedTensor> for TensorDump {
    fn from(f: &FusedTensor) -> Self {
        Self {
            kind: TensorKind::Fused,
            spacing_hz: f.scs_base_hz,
            data: f.data.clone(),
        }
    }
}

pub fn write_tensor<W: Write>(mut w: W, dump: &TensorDump) -> Result<()> {
    w.write_all(MAGIC)?;
    for d in dump.data.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&dump.kind.code().to_le_bytes())?;
    w.write_all(&dump.spacing_hz.to_le_bytes())?;
    let mut buf = Vec::with_capacity(dump.data.as_slice().len() * 16);
    for v in dump.data.as_slice() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<TensorDump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io("not a tensor dump (bad magic)".into()));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = usize::try_from(read_u64(&mut r)?).map_err(|e| Error::Io(e.to_string()))?;
    }
    let kind = TensorKind::from_code(read_u64(&mut r)?)?;
    let spacing_hz = read_f64(&mut r)?;
    let len = dims
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d))
        .ok_or_else(|| Error::Io("tensor shape overflows".into()))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        data.push(Complex64::new(re, im));
    }
    Ok(TensorDump {
        kind,
        spacing_hz,
        data: CTensor3::from_vec(dims, data)?,
    })
}
