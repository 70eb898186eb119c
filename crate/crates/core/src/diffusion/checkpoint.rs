use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{DenoiserNet, NetConfig, ParamSpec};
use super::schedule::NoiseSchedule;
use super::train::TrainConfig;
use crate::codec::{fingerprint, CodecSpec};
use crate::error::{Error, Result};
use crate::layout::Layout;

pub const CHECKPOINT_MAGIC: &[u8; 12] = b"GRIDTAB-CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything in a checkpoint except the parameter values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub tool_version: String,
    pub net: NetConfig,
    pub schedule: NoiseSchedule,
    pub train: TrainConfig,
    pub epochs_completed: usize,
    pub codec_fingerprint: String,
    pub layout_fingerprint: String,
    pub codec: CodecSpec,
    pub layout: Layout,
    pub tensors: Vec<ParamSpec>,
}

impl CheckpointHeader {
    pub fn new(
        net: &NetConfig,
        schedule: &NoiseSchedule,
        train: &TrainConfig,
        codec: &CodecSpec,
        layout: &Layout,
        tensors: &[ParamSpec],
    ) -> Self {
        CheckpointHeader {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            net: net.clone(),
            schedule: schedule.clone(),
            train: train.clone(),
            epochs_completed: 0,
            codec_fingerprint: codec.fingerprint(),
            layout_fingerprint: layout.fingerprint(),
            codec: codec.clone(),
            layout: layout.clone(),
            tensors: tensors.to_vec(),
        }
    }
}

/// Versioned binary container: magic, version, length-prefixed JSON header,
/// then the parameters as little-endian `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(header: CheckpointHeader, params: Vec<f64>) -> Self {
        Checkpoint { header, params }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let json = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(32 + json.len() + 8 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut r = Reader { bytes, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let hlen = r.u64()? as usize;
        let mut header: CheckpointHeader = serde_json::from_slice(r.take(hlen)?)
            .map_err(|e| Error::Checkpoint(format!("corrupt header: {e}")))?;
        header.schedule = header.schedule.rebuild()?;
        let n = r.u64()? as usize;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| bad("parameter count overflows"))?)?;
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes after parameters"));
        }
        let params = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let ckpt = Checkpoint { header, params };
        ckpt.verify()?;
        Ok(ckpt)
    }

    /// Cross-check fingerprints and tensor shapes against the embedded config.
    pub fn verify(&self) -> Result<()> {
        let h = &self.header;
        if h.codec.fingerprint() != h.codec_fingerprint {
            return Err(Error::Checkpoint("codec fingerprint mismatch".into()));
        }
        if h.layout.fingerprint() != h.layout_fingerprint {
            return Err(Error::Checkpoint("layout fingerprint mismatch".into()));
        }
        let net = DenoiserNet::zeroed(h.net.clone())?;
        if net.param_specs() != h.tensors.as_slice() {
            return Err(Error::Checkpoint(
                "tensor table does not match the architecture".into(),
            ));
        }
        if self.params.len() != net.param_count() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} parameters, architecture needs {}",
                self.params.len(),
                net.param_count()
            )));
        }
        Ok(())
    }

    pub fn net(&self) -> Result<DenoiserNet> {
        DenoiserNet::from_parts(self.header.net.clone(), self.params.clone())
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.to_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ctx = || format!("writing checkpoint {}", path.display());
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(ctx(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
