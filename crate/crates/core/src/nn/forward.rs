//! Analytic forward and backward passes over a flat parameter vector.

use super::arch::{ArchSpec, LayerSlot, LayerSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone)]
struct FrnCache {
    xhat: Vec<f64>,
    inv_rms: f64,
    pre_tlu: Vec<f64>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Stateless,
    Frn(FrnCache),
    Residual {
        frn_in: Vec<f64>,
        frn: FrnCache,
        relu_in: Vec<f64>,
        relu_out: Vec<f64>,
    },
}

/// Output of a single-sample forward pass plus what backward needs.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub logits: Vec<f64>,
    pub tapped_feature: Vec<f64>,
    /// `inputs[l]` is the input of layer `l`.
    inputs: Vec<Vec<f64>>,
    caches: Vec<LayerCache>,
}

fn dense_forward(w: &[f64], b: Option<&[f64]>, x: &[f64], d_out: usize) -> Vec<f64> {
    let d_in = x.len();
    (0..d_out)
        .map(|o| {
            let row = &w[o * d_in..(o + 1) * d_in];
            let acc: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            acc + b.map_or(0.0, |b| b[o])
        })
        .collect()
}

/// Accumulates `scale * dL/dW`, `scale * dL/db` and returns `dL/dx`.
fn dense_backward(w: &[f64], gw: &mut [f64], gb: Option<&mut [f64]>, x: &[f64], g: &[f64], scale: f64) -> Vec<f64> {
    let d_in = x.len();
    let mut gx = vec![0.0; d_in];
    for (o, &go) in g.iter().enumerate() {
        if go == 0.0 {
            continue;
        }
        let row = &w[o * d_in..(o + 1) * d_in];
        let grow = &mut gw[o * d_in..(o + 1) * d_in];
        for i in 0..d_in {
            grow[i] += scale * go * x[i];
            gx[i] += row[i] * go;
        }
    }
    if let Some(gb) = gb {
        for (b, &go) in gb.iter_mut().zip(g) {
            *b += scale * go;
        }
    }
    gx
}

/// `p` holds `gamma`, `beta`, `tau` each of length `x.len()`.
fn frn_forward(p: &[f64], x: &[f64], eps: f64) -> (Vec<f64>, FrnCache) {
    let n = x.len();
    let (gamma, rest) = p.split_at(n);
    let (beta, tau) = rest.split_at(n);
    let nu2 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let inv_rms = 1.0 / (nu2 + eps).sqrt();
    let xhat: Vec<f64> = x.iter().map(|v| v * inv_rms).collect();
    let pre_tlu: Vec<f64> = (0..n).map(|k| gamma[k] * xhat[k] + beta[k]).collect();
    let out = (0..n).map(|k| pre_tlu[k].max(tau[k])).collect();
    (out, FrnCache { xhat, inv_rms, pre_tlu })
}

fn frn_backward(p: &[f64], gp: &mut [f64], cache: &FrnCache, g: &[f64], scale: f64) -> Vec<f64> {
    let n = g.len();
    let gamma = &p[..n];
    let tau = &p[2 * n..3 * n];
    let mut gxhat = vec![0.0; n];
    for k in 0..n {
        if cache.pre_tlu[k] > tau[k] {
            gp[k] += scale * g[k] * cache.xhat[k];
            gp[n + k] += scale * g[k];
            gxhat[k] = g[k] * gamma[k];
        } else {
            gp[2 * n + k] += scale * g[k];
        }
    }
    let proj = gxhat.iter().zip(&cache.xhat).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    (0..n)
        .map(|k| cache.inv_rms * (gxhat[k] - cache.xhat[k] * proj))
        .collect()
}

impl ArchSpec {
    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!(
                "parameter vector has {} entries, architecture needs {}",
                params.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    /// Forward pass for one sample.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<ForwardResult> {
        self.check_params(params)?;
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has {} features, architecture expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("input contains non-finite values"));
        }
        Ok(self.forward_unchecked(params, x))
    }

    fn forward_unchecked(&self, params: &[f64], x: &[f64]) -> ForwardResult {
        let n_layers = self.layers().len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut caches = Vec::with_capacity(n_layers);
        let mut cur = x.to_vec();
        let mut tapped = Vec::new();
        for (l, (layer, slot)) in self.layers().iter().zip(self.slots()).enumerate() {
            let p = &params[slot.offset..slot.offset + slot.len];
            let (out, cache) = layer_forward(layer, slot, p, &cur);
            inputs.push(cur);
            caches.push(cache);
            cur = out;
            if l == self.feature_tap() {
                tapped = cur.clone();
            }
        }
        ForwardResult {
            logits: cur,
            tapped_feature: tapped,
            inputs,
            caches,
        }
    }

    pub fn forward_batch(&self, params: &[f64], inputs: &Matrix) -> Result<Vec<ForwardResult>> {
        self.check_params(params)?;
        if inputs.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "batch has {} features, architecture expects {}",
                inputs.cols(),
                self.input_dim()
            )));
        }
        if !inputs.is_finite() {
            return Err(Error::invalid("input batch contains non-finite values"));
        }
        Ok(inputs.iter_rows().map(|x| self.forward_unchecked(params, x)).collect())
    }

    /// Logits only, N x K.
    pub fn logits(&self, params: &[f64], inputs: &Matrix) -> Result<Matrix> {
        let results = self.forward_batch(params, inputs)?;
        let rows: Vec<&[f64]> = results.iter().map(|r| r.logits.as_slice()).collect();
        Matrix::from_rows(&rows)
    }

    /// Batch-averaged parameter gradient for a loss whose per-sample logit
    /// gradients are the rows of `grad_logits`.
    pub fn backward_batch(&self, params: &[f64], results: &[ForwardResult], grad_logits: &Matrix) -> Result<Vec<f64>> {
        self.check_params(params)?;
        if results.len() != grad_logits.rows() || results.is_empty() {
            return Err(Error::shape(format!(
                "forward cache holds {} samples, gradient batch {}",
                results.len(),
                grad_logits.rows()
            )));
        }
        if grad_logits.cols() != self.class_count() {
            return Err(Error::shape(format!(
                "gradient has {} columns, expected {}",
                grad_logits.cols(),
                self.class_count()
            )));
        }
        let mut grad = vec![0.0; self.param_count()];
        let scale = 1.0 / results.len() as f64;
        for (res, g) in results.iter().zip(grad_logits.iter_rows()) {
            if res.caches.len() != self.layers().len() {
                return Err(Error::shape("forward cache built for another architecture"));
            }
            self.backward_one(params, res, g, scale, &mut grad);
        }
        Ok(grad)
    }

    fn backward_one(&self, params: &[f64], res: &ForwardResult, g: &[f64], scale: f64, grad: &mut [f64]) {
        let mut g = g.to_vec();
        for l in (0..self.layers().len()).rev() {
            let slot = &self.slots()[l];
            let p = &params[slot.offset..slot.offset + slot.len];
            let gp = &mut grad[slot.offset..slot.offset + slot.len];
            g = layer_backward(
                &self.layers()[l],
                slot,
                p,
                gp,
                &res.inputs[l],
                &res.caches[l],
                &g,
                scale,
            );
        }
    }
}

fn layer_forward(layer: &LayerSpec, slot: &LayerSlot, p: &[f64], x: &[f64]) -> (Vec<f64>, LayerCache) {
    match *layer {
        LayerSpec::Dense { d_in, d_out, bias } => {
            let (w, b) = p.split_at(d_in * d_out);
            let out = dense_forward(w, bias.then_some(b), x, d_out);
            (out, LayerCache::Stateless)
        }
        LayerSpec::Relu => (x.iter().map(|v| v.max(0.0)).collect(), LayerCache::Stateless),
        LayerSpec::Frn { eps, .. } => {
            let (out, c) = frn_forward(p, x, eps);
            (out, LayerCache::Frn(c))
        }
        LayerSpec::Residual { width, hidden, eps } => {
            let (wa, rest) = p.split_at(width * hidden);
            let (ba, rest) = rest.split_at(hidden);
            let (pf, rest) = rest.split_at(3 * hidden);
            let (wb, bb) = rest.split_at(hidden * width);
            let frn_in = dense_forward(wa, Some(ba), x, hidden);
            let (relu_in, frn) = frn_forward(pf, &frn_in, eps);
            let relu_out: Vec<f64> = relu_in.iter().map(|v| v.max(0.0)).collect();
            let branch = dense_forward(wb, Some(bb), &relu_out, width);
            let out = x.iter().zip(&branch).map(|(a, b)| a + b).collect();
            debug_assert_eq!(slot.out_dim, width);
            (
                out,
                LayerCache::Residual {
                    frn_in,
                    frn,
                    relu_in,
                    relu_out,
                },
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn layer_backward(
    layer: &LayerSpec,
    _slot: &LayerSlot,
    p: &[f64],
    gp: &mut [f64],
    x: &[f64],
    cache: &LayerCache,
    g: &[f64],
    scale: f64,
) -> Vec<f64> {
    match (*layer, cache) {
        (LayerSpec::Dense { d_in, d_out, bias }, _) => {
            let (w, _) = p.split_at(d_in * d_out);
            let (gw, gb) = gp.split_at_mut(d_in * d_out);
            dense_backward(w, gw, bias.then_some(gb), x, g, scale)
        }
        (LayerSpec::Relu, _) => x
            .iter()
            .zip(g)
            .map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 })
            .collect(),
        (LayerSpec::Frn { .. }, LayerCache::Frn(c)) => frn_backward(p, gp, c, g, scale),
        (
            LayerSpec::Residual { width, hidden, .. },
            LayerCache::Residual {
                frn_in,
                frn,
                relu_in,
                relu_out,
            },
        ) => {
            let (wa, rest) = p.split_at(width * hidden);
            let (_, rest) = rest.split_at(hidden);
            let (pf, rest) = rest.split_at(3 * hidden);
            let (wb, _) = rest.split_at(hidden * width);

            let (gwa, grest) = gp.split_at_mut(width * hidden);
            let (gba, grest) = grest.split_at_mut(hidden);
            let (gpf, grest) = grest.split_at_mut(3 * hidden);
            let (gwb, gbb) = grest.split_at_mut(hidden * width);

            let g_relu_out = dense_backward(wb, gwb, Some(gbb), relu_out, g, scale);
            let g_relu_in: Vec<f64> = relu_in
                .iter()
                .zip(&g_relu_out)
                .map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 })
                .collect();
            let g_frn_in = frn_backward(pf, gpf, frn, &g_relu_in, scale);
            debug_assert_eq!(frn_in.len(), hidden);
            let g_branch_in = dense_backward(wa, gwa, Some(gba), x, &g_frn_in, scale);
            g.iter().zip(&g_branch_in).map(|(a, b)| a + b).collect()
        }
        _ => unreachable!("layer cache built from a different layer type"),
    }
}
