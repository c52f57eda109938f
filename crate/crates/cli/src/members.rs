//! Ensemble member grammar:
//!
//! ```text
//! mode:<ckpt>
//! bezier:<curve-ckpt>@<r>
//! bridge:<ckpt>[,base=<mode-ckpt>]...
//! ```

use std::path::PathBuf;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum MemberSpec {
    Mode(PathBuf),
    Bezier { curve: PathBuf, r: f64 },
    Bridge { path: PathBuf, bases: Vec<PathBuf> },
}

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

/// Splits `path@r`; without a numeric suffix the whole string is the path
/// and `r` is `None`.
pub fn split_position(s: &str) -> CliResult<(PathBuf, Option<f64>)> {
    match s.rsplit_once('@') {
        Some((path, r)) if !path.is_empty() => {
            let r: f64 = r
                .parse()
                .map_err(|_| usage(format!("curve position in {s:?} is not a number")))?;
            if !(0.0..=1.0).contains(&r) {
                return Err(usage(format!("curve position {r} outside [0, 1]")));
            }
            Ok((PathBuf::from(path), Some(r)))
        }
        _ => Ok((PathBuf::from(s), None)),
    }
}

pub fn parse_member(s: &str) -> CliResult<MemberSpec> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("member {s:?} lacks a kind prefix (mode:, bezier:, bridge:)")))?;
    if rest.is_empty() {
        return Err(usage(format!("member {s:?} has no checkpoint path")));
    }
    match kind {
        "mode" => Ok(MemberSpec::Mode(PathBuf::from(rest))),
        "bezier" => match split_position(rest)? {
            (curve, Some(r)) => Ok(MemberSpec::Bezier { curve, r }),
            (_, None) => Err(usage(format!("bezier member {s:?} needs @<r>"))),
        },
        "bridge" => {
            let mut parts = rest.split(',');
            let path = PathBuf::from(parts.next().unwrap_or_default());
            let mut bases = Vec::new();
            for attr in parts {
                match attr.split_once('=') {
                    Some(("base", p)) if !p.is_empty() => bases.push(PathBuf::from(p)),
                    _ => return Err(usage(format!("unknown bridge attribute {attr:?}"))),
                }
            }
            Ok(MemberSpec::Bridge { path, bases })
        }
        other => Err(usage(format!("unknown member kind {other:?}"))),
    }
}
