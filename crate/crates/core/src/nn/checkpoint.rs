//! Binary checkpoint format, little-endian:
//!
//! ```text
//! magic   b"EMRBCKPT"
//! version u32 = 1
//! kind    u8  (0 = LR, 1 = MLP, 2 = RNN)
//! input   u32
//! layers  u32, then one u32 hidden size per layer
//! count   u64 number of scalars
//! values  count x f64, tensors in declaration order, row-major
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::{Model, ModelArch, ModelKind, Params, Tensor};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"EMRBCKPT";
const VERSION: u32 = 1;

pub fn write_checkpoint<F: Scalar, W: Write>(model: &Model<F>, mut w: W) -> Result<()> {
    let io = |e| Error::io("<checkpoint>", e);
    let kind: u8 = match model.arch.kind {
        ModelKind::Lr => 0,
        ModelKind::Mlp => 1,
        ModelKind::Rnn => 2,
    };
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(kind);
    buf.extend_from_slice(&(model.arch.input_width as u32).to_le_bytes());
    buf.extend_from_slice(&(model.arch.hidden_sizes.len() as u32).to_le_bytes());
    for &h in &model.arch.hidden_sizes {
        buf.extend_from_slice(&(h as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(model.params.count() as u64).to_le_bytes());
    for v in model.params.flat() {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    w.write_all(&buf).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_checkpoint<F: Scalar, R: Read>(mut r: R) -> Result<Model<F>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<checkpoint>", e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = match cur.take(1)?[0] {
        0 => ModelKind::Lr,
        1 => ModelKind::Mlp,
        2 => ModelKind::Rnn,
        k => return Err(Error::Checkpoint(format!("unknown model kind {k}"))),
    };
    let input_width = cur.u32()? as usize;
    let layers = cur.u32()? as usize;
    let hidden_sizes = (0..layers).map(|_| cur.u32().map(|h| h as usize)).collect::<Result<Vec<_>>>()?;
    let arch = ModelArch { kind, input_width, hidden_sizes };
    arch.validate().map_err(Error::Checkpoint)?;
    let count = cur.u64()? as usize;
    if count != arch.param_count() {
        return Err(Error::Checkpoint(format!(
            "{count} values for an architecture with {} parameters",
            arch.param_count()
        )));
    }
    let mut tensors = Vec::new();
    for shape in arch.shapes() {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| cur.f64().map(F::of))
            .collect::<Result<Vec<F>>>()?;
        tensors.push(Tensor::from_vec(&shape, data));
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Model::from_params(arch, Params::new(tensors)).map_err(Error::Checkpoint)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
