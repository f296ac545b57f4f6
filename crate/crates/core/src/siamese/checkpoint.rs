use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use super::{SiameseModel, SiameseParams};
use crate::error::{Error, Result};
use crate::nn::{Architecture, LayerKind, LayerParams, LayerSpec, ModelParams, Tensors};
use crate::subword::CanvasSpec;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SCRALIGN";
const VERSION: u32 = 1;

/// `model.ckpt` gets `model.ckpt.json` next to it.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn kind_code(k: LayerKind) -> u8 {
    match k {
        LayerKind::Conv => 0,
        LayerKind::MaxPool => 1,
        LayerKind::Dense => 2,
        LayerKind::Dropout => 3,
    }
}

fn code_kind(c: u8) -> Result<LayerKind> {
    Ok(match c {
        0 => LayerKind::Conv,
        1 => LayerKind::MaxPool,
        2 => LayerKind::Dense,
        3 => LayerKind::Dropout,
        _ => return Err(Error::Checkpoint(format!("unknown layer kind {c}"))),
    })
}

pub fn encode_checkpoint(model: &SiameseModel) -> Vec<u8> {
    let arch = &model.arch;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let canvas = arch.canvas();
    out.extend_from_slice(&(canvas.height as u32).to_le_bytes());
    out.extend_from_slice(&(canvas.width as u32).to_le_bytes());
    out.extend_from_slice(&arch.multiplier().to_le_bytes());
    out.extend_from_slice(&(arch.specs().len() as u32).to_le_bytes());
    for s in arch.specs() {
        out.push(kind_code(s.kind));
        for v in [s.filters, s.kernel.0, s.kernel.1] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&s.rate.to_le_bytes());
    }
    let tensors = model.params.tensors();
    out.extend_from_slice(&(tensors.iter().map(|t| t.len() as u64).sum::<u64>()).to_le_bytes());
    for t in tensors {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<const N: usize>(r: &mut Cursor<&[u8]>) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint("truncated file".into()))?;
    Ok(buf)
}

fn u32_at(r: &mut Cursor<&[u8]>) -> Result<usize> {
    Ok(u32::from_le_bytes(take(r)?) as usize)
}

fn f64_at(r: &mut Cursor<&[u8]>) -> Result<f64> {
    Ok(f64::from_le_bytes(take(r)?))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SiameseModel> {
    let mut r = Cursor::new(bytes);
    if &take::<8>(&mut r)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u32_at(&mut r)?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let canvas = CanvasSpec::new(u32_at(&mut r)?, u32_at(&mut r)?)?;
    let multiplier = f64_at(&mut r)?;
    let n = u32_at(&mut r)?;
    if n > 10_000 {
        return Err(Error::Checkpoint(format!("implausible layer count {n}")));
    }
    let mut specs = Vec::with_capacity(n);
    for _ in 0..n {
        let kind = code_kind(take::<1>(&mut r)?[0])?;
        let (filters, kh, kw) = (u32_at(&mut r)?, u32_at(&mut r)?, u32_at(&mut r)?);
        let rate = f64_at(&mut r)?;
        specs.push(LayerSpec {
            kind,
            filters,
            kernel: (kh, kw),
            rate,
        });
    }
    let arch = Architecture::new(specs, canvas, multiplier)?;
    let emb = arch.embedding_len();
    let mut params = SiameseParams {
        twin: ModelParams::zeros(&arch),
        head: LayerParams::zeros(emb, 1),
    };
    let total = u64::from_le_bytes(take(&mut r)?);
    let expected: usize = params.tensors().iter().map(|t| t.len()).sum();
    if total != expected as u64 {
        return Err(Error::Checkpoint(format!(
            "{total} parameters stored, architecture needs {expected}"
        )));
    }
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = f64_at(&mut r)?;
        }
    }
    if (r.position() as usize) != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(SiameseModel { arch, params })
}

/// Writes the binary checkpoint and, when given, a JSON sidecar holding
/// `metadata`.
pub fn save_checkpoint(
    model: &SiameseModel,
    path: &Path,
    metadata: Option<&serde_json::Value>,
) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))?;
    if let Some(meta) = metadata {
        let side = sidecar_path(path);
        fs::write(&side, serde_json::to_string_pretty(meta)? + "\n")
            .map_err(|e| Error::io(&side, e))?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SiameseModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{reduced_chain, TrainConfig};

    fn model() -> SiameseModel {
        let arch =
            Architecture::new(reduced_chain(), CanvasSpec::new(23, 19).unwrap(), 0.125).unwrap();
        let mut m = SiameseModel::init(
            arch,
            &TrainConfig {
                fan_in_init: true,
                seed: 7,
                ..Default::default()
            },
        )
        .unwrap();
        m.params.head.bias[0] = -0.25;
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let back = decode_checkpoint(&encode_checkpoint(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_checkpoint(&model());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::Checkpoint(_))));
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 3]),
            Err(Error::Checkpoint(_))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            decode_checkpoint(&long),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(
            sidecar_path(Path::new("out/m.ckpt")),
            PathBuf::from("out/m.ckpt.json")
        );
    }
}
