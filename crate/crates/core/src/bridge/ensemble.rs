//! Ensemble combination rules and mixed compositions of modes, curve models
//! and bridges.

use std::collections::BTreeMap;

use super::BridgeModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::ProbMatrix;
use crate::nn::{count_feature_flops, count_flops, FlopsReport, Network};
use crate::subspace::BezierCurve;

fn check_prob(p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::shape(format!(
            "probability vector has {} classes, expected {k}",
            p.len()
        )));
    }
    ProbMatrix::from_rows(&[p]).map(|_| ())
}

/// `(p_base + sum_j p_j) / (1 + k)` for `k >= 1` type I bridge outputs.
pub fn ensemble_type1(p_base: &[f64], bridge_probs: &[&[f64]]) -> Result<Vec<f64>> {
    if bridge_probs.is_empty() {
        return Err(Error::invalid("type I ensemble needs at least one bridge"));
    }
    let k = p_base.len();
    check_prob(p_base, k)?;
    let mut acc = p_base.to_vec();
    for p in bridge_probs {
        check_prob(p, k)?;
        for (a, b) in acc.iter_mut().zip(p.iter()) {
            *a += b;
        }
    }
    let w = (1 + bridge_probs.len()) as f64;
    Ok(acc.into_iter().map(|v| v / w).collect())
}

/// `(p_i + p_j + p_bridge) / 3`.
pub fn ensemble_type2(p_i: &[f64], p_j: &[f64], p_bridge: &[f64]) -> Result<Vec<f64>> {
    let k = p_i.len();
    for p in [p_i, p_j, p_bridge] {
        check_prob(p, k)?;
    }
    Ok((0..k).map(|c| (p_i[c] + p_j[c] + p_bridge[c]) / 3.0).collect())
}

/// One prediction source of a composed ensemble.
#[derive(Debug, Clone)]
pub enum Member {
    Mode(Network),
    Bezier { curve: BezierCurve, r: f64 },
    Bridge(BridgeModel),
}

/// Index of base networks by mode id: mode members plus declared bases.
fn base_index<'a>(members: &'a [Member], declared: &'a [Network]) -> BTreeMap<String, &'a Network> {
    let mut bases = BTreeMap::new();
    for m in members {
        if let Member::Mode(n) = m {
            bases.entry(n.id()).or_insert(n);
        }
    }
    for n in declared {
        bases.entry(n.id()).or_insert(n);
    }
    bases
}

fn check_bridges(members: &[Member], bases: &BTreeMap<String, &Network>) -> Result<()> {
    for m in members {
        if let Member::Bridge(b) = m {
            for id in b.required_modes() {
                if !bases.contains_key(id) {
                    return Err(Error::invalid(format!(
                        "bridge needs base mode {id}, which is neither a member nor declared"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Uniform average of every member's class probabilities.
///
/// Each base network is forwarded at most once; its probabilities and tapped
/// features are shared by the mode member and every bridge attached to it.
pub fn compose_ensemble(members: &[Member], declared: &[Network], inputs: &Matrix) -> Result<ProbMatrix> {
    if members.is_empty() {
        return Err(Error::invalid("ensemble needs at least one member"));
    }
    let bases = base_index(members, declared);
    check_bridges(members, &bases)?;

    let mut cache: BTreeMap<&str, (ProbMatrix, Matrix)> = BTreeMap::new();
    let mut forward = |id: &str| -> Result<()> {
        if !cache.contains_key(id) {
            let (key, net) = bases.get_key_value(id).expect("checked above");
            cache.insert(key.as_str(), net.predict_with_features(inputs)?);
        }
        Ok(())
    };
    for m in members {
        match m {
            Member::Mode(n) => forward(&n.id())?,
            Member::Bridge(b) => {
                for id in b.required_modes() {
                    forward(id)?;
                }
            }
            Member::Bezier { .. } => {}
        }
    }

    let mut outputs = Vec::with_capacity(members.len());
    for m in members {
        let probs = match m {
            Member::Mode(n) => cache[n.id().as_str()].0.clone(),
            Member::Bezier { curve, r } => curve.network_at(*r)?.predict(inputs)?,
            Member::Bridge(b) => {
                let ids = b.required_modes();
                let z_i = &cache[ids[0]].1;
                let z_j = ids.get(1).map(|id| &cache[*id].1);
                b.predict(z_i, z_j)?
            }
        };
        outputs.push(probs);
    }
    let refs: Vec<&ProbMatrix> = outputs.iter().collect();
    ProbMatrix::average(&refs)
}

/// Forward cost of a composition: each distinct base once (full network if
/// it is a member, feature extractor only if it just feeds bridges), plus
/// every curve-model and bridge member.
pub fn composition_flops(members: &[Member], declared: &[Network]) -> Result<FlopsReport> {
    let bases = base_index(members, declared);
    check_bridges(members, &bases)?;
    let mut parts = Vec::new();
    let mut mode_ids: Vec<String> = members
        .iter()
        .filter_map(|m| match m {
            Member::Mode(n) => Some(n.id()),
            _ => None,
        })
        .collect();
    mode_ids.sort();
    mode_ids.dedup();
    for id in &mode_ids {
        parts.push(count_flops(&bases[id.as_str()].arch, None));
    }
    let mut feed_only: Vec<&str> = members
        .iter()
        .filter_map(|m| match m {
            Member::Bridge(b) => Some(b.required_modes()),
            _ => None,
        })
        .flatten()
        .filter(|id| !mode_ids.iter().any(|m| m == id))
        .collect();
    feed_only.sort();
    feed_only.dedup();
    for id in feed_only {
        parts.push(count_feature_flops(&bases[id].arch));
    }
    for m in members {
        match m {
            Member::Mode(_) => {}
            Member::Bezier { curve, .. } => parts.push(count_flops(&curve.arch, None)),
            Member::Bridge(b) => parts.push(count_flops(&b.spec.arch()?, None)),
        }
    }
    Ok(FlopsReport::sum(&parts))
}
