//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! "FLOC"            4 bytes magic
//! version           u16
//! layer_count       u16   number of dense layers L
//! dims              u32 x (L + 1)
//! per layer:        weights f32 x (out * in), row-major; bias f32 x out
//! ```

use std::path::Path;

use super::{DenseLayer, MlpModel, Real};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FLOC";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint<T: Real>(model: &MlpModel<T>) -> Vec<u8> {
    let dims = model.layer_dims();
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + 4 * model.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers.len() as u16).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for layer in &model.layers {
        for v in layer.weights.iter().chain(&layer.bias) {
            let f = v.to_f32().expect("finite conversion");
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::CorruptCheckpoint(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            ))),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn read_checkpoint<T: Real>(bytes: &[u8]) -> Result<MlpModel<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
    }
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let layers = r.u16("layer count")? as usize;
    if layers == 0 {
        return Err(Error::CorruptCheckpoint("zero layers".into()));
    }
    let dims = (0..=layers)
        .map(|_| r.u32("dims").map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    if dims.contains(&0) {
        return Err(Error::CorruptCheckpoint(format!("zero-sized layer in dims {dims:?}")));
    }
    let expected: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let remaining = bytes.len() - r.pos;
    if remaining != 4 * expected {
        return Err(Error::CorruptCheckpoint(format!(
            "dims {dims:?} need {} parameter bytes, found {remaining}",
            4 * expected
        )));
    }
    let mut read_vec = |n: usize, what: &str| -> Result<Vec<T>> {
        let raw = r.take(4 * n, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect())
    };
    let mut out = Vec::with_capacity(layers);
    for w in dims.windows(2) {
        let weights = read_vec(w[0] * w[1], "weights")?;
        let bias = read_vec(w[1], "bias")?;
        out.push(DenseLayer {
            inputs: w[0],
            outputs: w[1],
            weights,
            bias,
        });
    }
    let model = MlpModel::from_layers(out)?;
    if !model.all_finite() {
        return Err(Error::CorruptCheckpoint("non-finite parameter".into()));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Real>(model: &MlpModel<T>, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<MlpModel<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bitwise() {
        let m = MlpModel::<f32>::he_uniform(&[7, 5, 3, 2], 12).unwrap();
        let back: MlpModel<f32> = read_checkpoint(&write_checkpoint(&m)).unwrap();
        assert_eq!(back, m);
        let x: Vec<f32> = (0..7).map(|i| i as f32 * 0.1).collect();
        assert_eq!(back.forward(&x).unwrap(), m.forward(&x).unwrap());
    }

    #[test]
    fn header_layout() {
        let m = MlpModel::<f32>::zeros(&[3, 2]).unwrap();
        let b = write_checkpoint(&m);
        assert_eq!(&b[..4], b"FLOC");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[6..8], &[1, 0]);
        assert_eq!(&b[8..12], &3u32.to_le_bytes());
        assert_eq!(&b[12..16], &2u32.to_le_bytes());
        assert_eq!(b.len(), 16 + 4 * 8);
    }

    #[test]
    fn default_architecture_payload_size() {
        // parameter count of [179200, 1024, 256, 64, 2] without allocating it
        let dims = [179_200usize, 1024, 256, 64, 2];
        let params: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        assert_eq!(
            params,
            179_200 * 1024 + 1024 + 1024 * 256 + 256 + 256 * 64 + 64 + 64 * 2 + 2
        );
        let header = 4 + 2 + 2 + 4 * dims.len();
        // same arithmetic on a small model checks the formula against real bytes
        let small = MlpModel::<f32>::zeros(&[9, 4, 3, 2]).unwrap();
        let small_params: usize = [9usize, 4, 3, 2].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        assert_eq!(write_checkpoint(&small).len(), 4 + 2 + 2 + 16 + 4 * small_params);
        assert_eq!(header, 28);
        assert_eq!(header + 4 * params, 28 + 4 * 183_780_802);
    }

    #[test]
    fn corrupt_inputs() {
        let m = MlpModel::<f32>::he_uniform(&[4, 2], 0).unwrap();
        let b = write_checkpoint(&m);
        assert!(matches!(
            read_checkpoint::<f32>(&b[..b.len() - 3]),
            Err(Error::CorruptCheckpoint(_))
        ));
        assert!(matches!(read_checkpoint::<f32>(&b[..5]), Err(Error::CorruptCheckpoint(_))));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint::<f32>(&bad), Err(Error::CorruptCheckpoint(_))));
        let mut v2 = b.clone();
        v2[4] = 2;
        assert!(matches!(
            read_checkpoint::<f32>(&v2),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));
        let mut dims = b.clone();
        dims[8] = 5;
        assert!(matches!(read_checkpoint::<f32>(&dims), Err(Error::CorruptCheckpoint(_))));
        let mut extra = b;
        extra.push(0);
        assert!(read_checkpoint::<f32>(&extra).is_err());
    }
}
