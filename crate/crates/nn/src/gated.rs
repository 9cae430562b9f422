//! Gated convolution: output = LeakyReLU(conv_feat(x)) * sigmoid(conv_gate(g)),
//! where g is x itself except at the network's first layer, whose gate branch
//! sees x concatenated with the brain-mask channel. With the gate absent this
//! degrades to a plain conv + LeakyReLU (the ungated baseline).

use crate::act::{leaky_relu, leaky_relu_backward, sigmoid, sigmoid_backward};
use crate::conv::{conv3d_backward, conv3d_forward, ConvGrads, ConvShape};
use crate::error::Result;
use crate::tensor::LayerTensor;

/// Parameter views for one gated (or plain) convolution.
#[derive(Debug, Clone, Copy)]
pub struct GatedParams<'a> {
    pub feat_w: &'a [f64],
    pub feat_b: &'a [f64],
    pub feat_shape: &'a ConvShape,
    /// None = ungated plain conv + LeakyReLU.
    pub gate: Option<(&'a [f64], &'a [f64], &'a ConvShape)>,
    pub slope: f64,
}

/// Forward intermediates needed for the exact backward pass. The LeakyReLU
/// output is recomputed from `feat_lin` in backward rather than stored.
#[derive(Debug, Clone)]
pub struct GatedCache {
    pub x: LayerTensor,
    /// Present iff the gate branch consumed concat(x, extra).
    pub gate_input: Option<LayerTensor>,
    pub feat_lin: LayerTensor,
    pub gate_sig: Option<LayerTensor>,
}

#[inline]
fn mul_elem(a: &LayerTensor, b: &LayerTensor) -> LayerTensor {
    debug_assert_eq!(a.data.len(), b.data.len());
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    LayerTensor {
        channels: a.channels,
        dims: a.dims,
        data,
    }
}

/// Run one gated conv. `gate_extra` holds the channels concatenated to the
/// gate branch input (the brain mask at layer one); it must be None when the
/// gate shape expects no extra channels.
pub fn gated_forward(
    x: &LayerTensor,
    gate_extra: Option<&LayerTensor>,
    p: GatedParams<'_>,
) -> Result<(LayerTensor, GatedCache)> {
    let feat_lin = conv3d_forward(x, p.feat_w, p.feat_b, p.feat_shape)?;
    let act = leaky_relu(&feat_lin, p.slope);
    match p.gate {
        None => {
            debug_assert!(gate_extra.is_none());
            Ok((
                act,
                GatedCache {
                    x: x.clone(),
                    gate_input: None,
                    feat_lin,
                    gate_sig: None,
                },
            ))
        }
        Some((gw, gb, gshape)) => {
            let gate_input = match gate_extra {
                Some(extra) => Some(x.concat(extra)?),
                None => None,
            };
            let gin = gate_input.as_ref().unwrap_or(x);
            let gate_lin = conv3d_forward(gin, gw, gb, gshape)?;
            let sig = sigmoid(&gate_lin);
            let out = mul_elem(&act, &sig);
            Ok((
                out,
                GatedCache {
                    x: x.clone(),
                    gate_input,
                    feat_lin,
                    gate_sig: Some(sig),
                },
            ))
        }
    }
}

/// Gradients from one gated conv: wrt the layer input, the extra gate
/// channels (if any), and both branches' parameters.
pub struct GatedBackward {
    pub g_x: LayerTensor,
    pub g_extra: Option<LayerTensor>,
    pub feat: ConvGrads,
    pub gate: Option<ConvGrads>,
}

pub fn gated_backward(
    cache: &GatedCache,
    gout: &LayerTensor,
    p: GatedParams<'_>,
) -> Result<GatedBackward> {
    match (p.gate, &cache.gate_sig) {
        (None, _) => {
            let g_feat_lin = leaky_relu_backward(&cache.feat_lin, gout, p.slope);
            let (g_x, feat) = conv3d_backward(&cache.x, &g_feat_lin, p.feat_w, p.feat_shape)?;
            Ok(GatedBackward {
                g_x,
                g_extra: None,
                feat,
                gate: None,
            })
        }
        (Some((gw, _, gshape)), Some(sig)) => {
            let act = leaky_relu(&cache.feat_lin, p.slope);
            let g_act = mul_elem(gout, sig);
            let g_sig = mul_elem(gout, &act);
            let g_feat_lin = leaky_relu_backward(&cache.feat_lin, &g_act, p.slope);
            let g_gate_lin = sigmoid_backward(sig, &g_sig);
            let (g_x_feat, feat) = conv3d_backward(&cache.x, &g_feat_lin, p.feat_w, p.feat_shape)?;
            let gin = cache.gate_input.as_ref().unwrap_or(&cache.x);
            let (g_gin, gate) = conv3d_backward(gin, &g_gate_lin, gw, gshape)?;
            // Fold the gate-branch input gradient back onto x (and the extra
            // channels when the branch consumed a concatenation).
            let mut g_x = g_x_feat;
            let xc = cache.x.channels;
            let nvox = cache.x.nvox();
            for c in 0..xc {
                let dst = g_x.channel_mut(c);
                let src = g_gin.channel(c);
                for i in 0..nvox {
                    dst[i] += src[i];
                }
            }
            let g_extra = if g_gin.channels > xc {
                Some(LayerTensor {
                    channels: g_gin.channels - xc,
                    dims: g_gin.dims,
                    data: g_gin.data[xc * nvox..].to_vec(),
                })
            } else {
                None
            };
            Ok(GatedBackward {
                g_x,
                g_extra,
                feat,
                gate: Some(gate),
            })
        }
        (Some(_), None) => unreachable!("gate params without gate cache"),
    }
}
