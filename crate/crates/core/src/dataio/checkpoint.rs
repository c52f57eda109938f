//! Binary checkpoint format.
//!
//! ```text
//! "MBNC" | version: u32 LE (=1) | header_len: u32 LE | header: UTF-8 JSON | param_count x f64 LE
//! ```
//!
//! Curve checkpoints store `theta_i ++ theta_j ++ theta_be`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bridge::{BridgeModel, BridgeSpec, CurveIdentity, Endpoint};
use crate::error::{Error, Result};
use crate::nn::{ArchSpec, Network, ParameterVector};
use crate::subspace::BezierCurve;

pub const MAGIC: &[u8; 4] = b"MBNC";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_TAG: &str = "f64le";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Mode,
    CurvePinpoint,
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub role: Role,
    pub arch: ArchSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bridge: Option<BridgeSpec>,
    pub dtype: String,
    pub param_count: usize,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub payload: Vec<f64>,
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

impl Checkpoint {
    fn expected_params(&self) -> usize {
        let per = self.header.arch.param_count();
        match self.header.role {
            Role::CurvePinpoint => 3 * per,
            Role::Mode | Role::Bridge => per,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.header.dtype != DTYPE_TAG {
            return Err(Error::MalformedHeader(format!(
                "unsupported dtype {:?}",
                self.header.dtype
            )));
        }
        if self.header.param_count != self.payload.len() {
            return Err(Error::ParamCountMismatch {
                header: self.header.param_count,
                expected: self.payload.len(),
                what: "payload".into(),
            });
        }
        let expected = self.expected_params();
        if self.header.param_count != expected {
            return Err(Error::ParamCountMismatch {
                header: self.header.param_count,
                expected,
                what: format!("{:?} architecture", self.header.role),
            });
        }
        match (self.header.role, &self.header.bridge) {
            (Role::Bridge, None) => Err(Error::MalformedHeader("bridge checkpoint without bridge spec".into())),
            (Role::Bridge, Some(spec)) if spec.arch()? != self.header.arch => {
                Err(Error::MalformedHeader("bridge spec disagrees with stored arch".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let truncated = |expected: usize| Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
            });
        }
        if bytes.len() < 12 {
            return Err(truncated(12));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = 12 + header_len;
        if bytes.len() < body {
            return Err(truncated(body));
        }
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[12..body]).map_err(|e| Error::MalformedHeader(e.to_string()))?;
        let payload_bytes = &bytes[body..];
        let want = header.param_count * 8;
        if payload_bytes.len() < want {
            return Err(truncated(body + want));
        }
        if payload_bytes.len() > want {
            return Err(Error::ParamCountMismatch {
                header: header.param_count,
                expected: payload_bytes.len() / 8,
                what: "payload".into(),
            });
        }
        let payload = payload_bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let ckpt = Checkpoint { header, payload };
        ckpt.validate()?;
        Ok(ckpt)
    }

    fn new(
        role: Role,
        arch: ArchSpec,
        bridge: Option<BridgeSpec>,
        payload: Vec<f64>,
        metadata: BTreeMap<String, String>,
    ) -> Self {
        Checkpoint {
            header: CheckpointHeader {
                role,
                arch,
                bridge,
                dtype: DTYPE_TAG.into(),
                param_count: payload.len(),
                metadata,
            },
            payload,
        }
    }

    fn expect_role(&self, role: Role) -> Result<()> {
        if self.header.role != role {
            return Err(Error::invalid(format!(
                "checkpoint role is {:?}, expected {role:?}",
                self.header.role
            )));
        }
        Ok(())
    }

    /// Mode checkpoint; records the mode id in the metadata.
    pub fn from_network(net: &Network, mut metadata: BTreeMap<String, String>) -> Self {
        metadata.insert("mode_id".into(), net.id());
        Self::new(
            Role::Mode,
            net.arch.clone(),
            None,
            net.params.as_slice().to_vec(),
            metadata,
        )
    }

    pub fn to_network(&self) -> Result<Network> {
        self.expect_role(Role::Mode)?;
        Network::new(self.header.arch.clone(), ParameterVector::new(self.payload.clone())?)
    }

    pub fn from_curve(curve: &BezierCurve, mut metadata: BTreeMap<String, String>) -> Self {
        let id = curve.identity();
        metadata.insert("mode_a".into(), id.mode_a);
        metadata.insert("mode_b".into(), id.mode_b);
        let mut payload = curve.theta_i.as_slice().to_vec();
        payload.extend_from_slice(curve.theta_j.as_slice());
        payload.extend_from_slice(curve.theta_be.as_slice());
        Self::new(Role::CurvePinpoint, curve.arch.clone(), None, payload, metadata)
    }

    pub fn to_curve(&self) -> Result<BezierCurve> {
        self.expect_role(Role::CurvePinpoint)?;
        let p = self.header.arch.param_count();
        let part = |i: usize| ParameterVector::new(self.payload[i * p..(i + 1) * p].to_vec());
        BezierCurve::new(self.header.arch.clone(), part(0)?, part(1)?, part(2)?)
    }

    pub fn from_bridge(bridge: &BridgeModel, mut metadata: BTreeMap<String, String>) -> Result<Self> {
        metadata.insert("mode_a".into(), bridge.curve.mode_a.clone());
        metadata.insert("mode_b".into(), bridge.curve.mode_b.clone());
        if let Some(feed) = bridge.feed {
            metadata.insert("feed".into(), feed.as_str().into());
        }
        Ok(Self::new(
            Role::Bridge,
            bridge.spec.arch()?,
            Some(bridge.spec.clone()),
            bridge.params.as_slice().to_vec(),
            metadata,
        ))
    }

    pub fn to_bridge(&self) -> Result<BridgeModel> {
        self.expect_role(Role::Bridge)?;
        let spec = self
            .header
            .bridge
            .clone()
            .ok_or_else(|| Error::MalformedHeader("bridge spec missing".into()))?;
        let meta = |k: &str| {
            self.header
                .metadata
                .get(k)
                .cloned()
                .ok_or_else(|| Error::MalformedHeader(format!("bridge checkpoint lacks {k:?} metadata")))
        };
        let curve = CurveIdentity {
            mode_a: meta("mode_a")?,
            mode_b: meta("mode_b")?,
        };
        let feed = match self.header.metadata.get("feed") {
            Some(s) => Some(Endpoint::parse(s)?),
            None => None,
        };
        BridgeModel::new(spec, ParameterVector::new(self.payload.clone())?, curve, feed)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &ckpt.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    Checkpoint::from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode() -> Network {
        Network::init(ArchSpec::residual_mlp(2, 3, 4, 1, 2).unwrap(), 5)
    }

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut meta = BTreeMap::new();
        meta.insert("seed".into(), "5".into());
        let c = Checkpoint::from_network(&mode(), meta);
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap(), p()).unwrap();
        assert_eq!(back.header, c.header);
        assert!(back.to_network().unwrap().params.bit_eq(&mode().params));
    }

    #[test]
    fn layout_prefix() {
        let bytes = Checkpoint::from_network(&mode(), BTreeMap::new()).to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"MBNC");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        let hl = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + hl]).unwrap();
        assert_eq!(header["role"], "mode");
        assert_eq!(header["dtype"], "f64le");
        assert_eq!(bytes.len(), 12 + hl + 8 * mode().params.len());
    }

    #[test]
    fn distinct_diagnostics() {
        let good = Checkpoint::from_network(&mode(), BTreeMap::new()).to_bytes().unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad, p()), Err(Error::BadMagic { .. })));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            Checkpoint::from_bytes(&bad, p()),
            Err(Error::VersionMismatch { found: 2, .. })
        ));

        let bad = &good[..good.len() - 8];
        let e = Checkpoint::from_bytes(bad, p()).unwrap_err();
        assert!(matches!(e, Error::TruncatedPayload { .. }));
        assert!(e.to_string().contains("truncated payload"));

        let mut bad = good.clone();
        bad.extend_from_slice(&0f64.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bad, p()),
            Err(Error::ParamCountMismatch { .. })
        ));
    }

    #[test]
    fn header_param_count_checked_against_arch() {
        let mut c = Checkpoint::from_network(&mode(), BTreeMap::new());
        c.payload.pop();
        c.header.param_count -= 1;
        assert!(matches!(c.to_bytes(), Err(Error::ParamCountMismatch { .. })));
    }

    #[test]
    fn wrong_role_rejected() {
        let c = Checkpoint::from_network(&mode(), BTreeMap::new());
        assert!(c.to_curve().is_err());
        assert!(c.to_bridge().is_err());
    }
}
