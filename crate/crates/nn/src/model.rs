//! The inpainting network: a 3D U-shaped encoder/decoder built from gated
//! convolutions, with an ablation ladder expressed as one enum.
//!
//! Variant ladder (each adds one mechanism):
//! - `Baseline`: plain convolutions, mask channel ignored, single decoder.
//! - `NoBa`: gated convolutions, mask channel still ignored.
//! - `NoTw`: brain-aware — the first gate additionally sees the mask channel.
//! - `Full`: six per-coefficient output heads instead of one shared head.
//!
//! All parameters live in one flat `Vec<f64>` addressed through a registry of
//! named tensor views, so the optimizer, gradient accumulation, and
//! checkpointing all operate on plain slices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conv::{conv3d_backward, conv3d_forward, xavier_uniform, ConvShape};
use crate::error::{NnError, Result};
use crate::gated::{gated_backward, gated_forward, GatedCache, GatedParams};
use crate::resample::{downsample2, downsample2_backward, upsample2, upsample2_backward};
use crate::tensor::LayerTensor;
use dti_core::{CounterRng, COEFF_LABELS, PATCH_CHANNELS};

/// Tensor-coefficient channels the network reconstructs.
pub const COEFF_CHANNELS: usize = 6;

// ---------------------------------------------------------------------------
// Variants and configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// Plain convolutions, single shared decoder head.
    Baseline,
    /// Gated convolutions, but the gate never sees the brain mask.
    NoBa,
    /// Gated + brain-aware first gate, single shared decoder head.
    NoTw,
    /// Gated + brain-aware + six per-coefficient heads.
    Full,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Baseline,
        ModelVariant::NoBa,
        ModelVariant::NoTw,
        ModelVariant::Full,
    ];

    /// Whether convolutions carry a sigmoid gate branch.
    pub fn gated(self) -> bool {
        !matches!(self, ModelVariant::Baseline)
    }

    /// Whether the first gate consumes the brain-mask channel.
    pub fn brain_aware(self) -> bool {
        matches!(self, ModelVariant::NoTw | ModelVariant::Full)
    }

    /// Whether the model ends in one head per tensor coefficient.
    pub fn tensor_wise(self) -> bool {
        matches!(self, ModelVariant::Full)
    }

    pub fn head_count(self) -> usize {
        if self.tensor_wise() {
            COEFF_CHANNELS
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Baseline => "baseline",
            ModelVariant::NoBa => "noba",
            ModelVariant::NoTw => "notw",
            ModelVariant::Full => "full",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(ModelVariant::Baseline),
            "noba" => Ok(ModelVariant::NoBa),
            "notw" => Ok(ModelVariant::NoTw),
            "full" => Ok(ModelVariant::Full),
            other => Err(NnError::BadConfig(format!(
                "unknown model variant '{other}' (expected baseline|noba|notw|full)"
            ))),
        }
    }
}

/// Network hyperparameters. Decoder widths mirror the encoder, so only the
/// encoder ladder and bottleneck width are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder_channels: Vec<usize>,
    pub bottleneck_channels: usize,
    pub leaky_slope: f64,
    /// When true the shared decoder stops one level short of full resolution
    /// and every head performs the final upsample itself.
    pub head_upsample: bool,
    /// Seed for deterministic weight initialization.
    pub seed: u64,
}

impl ModelConfig {
    /// Production-scale profile.
    pub fn default_profile() -> Self {
        ModelConfig {
            encoder_channels: vec![32, 64, 128, 256],
            bottleneck_channels: 512,
            leaky_slope: 0.01,
            head_upsample: false,
            seed: 42,
        }
    }

    /// Small profile for tests and CPU-budget experiments.
    pub fn tiny() -> Self {
        ModelConfig {
            encoder_channels: vec![8, 16, 32],
            bottleneck_channels: 64,
            leaky_slope: 0.01,
            head_upsample: false,
            seed: 42,
        }
    }

    pub fn depth(&self) -> usize {
        self.encoder_channels.len()
    }

    pub fn decoder_channels(&self) -> Vec<usize> {
        let mut v = self.encoder_channels.clone();
        v.reverse();
        v
    }

    /// Number of shared-decoder stages (one fewer when heads upsample).
    pub fn trunk_stages(&self) -> usize {
        if self.head_upsample {
            self.depth() - 1
        } else {
            self.depth()
        }
    }

    /// Channel width entering the heads.
    pub fn trunk_channels(&self) -> usize {
        if self.head_upsample {
            self.encoder_channels[1]
        } else {
            self.encoder_channels[0]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_channels.is_empty() {
            return Err(NnError::BadConfig(
                "encoder_channels must not be empty".into(),
            ));
        }
        if self.encoder_channels.contains(&0) || self.bottleneck_channels == 0 {
            return Err(NnError::BadConfig("channel widths must be positive".into()));
        }
        if self.head_upsample && self.depth() < 2 {
            return Err(NnError::BadConfig(
                "head_upsample requires at least two encoder levels".into(),
            ));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(NnError::BadConfig("leaky_slope must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::default_profile()
    }
}

// ---------------------------------------------------------------------------
// Parameter registry and graph description
// ---------------------------------------------------------------------------

/// Named view into the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// One convolution's parameter handles (indices into the meta registry).
#[derive(Debug, Clone)]
struct ConvSlot {
    w: usize,
    b: usize,
    shape: ConvShape,
}

/// A gated (or, for the baseline, plain) convolution in the graph.
#[derive(Debug, Clone)]
struct GatedSlot {
    feat: ConvSlot,
    gate: Option<ConvSlot>,
    /// The gate branch consumes concat(features, brain mask).
    takes_mask: bool,
}

#[derive(Debug, Clone)]
struct HeadSlot {
    conv: GatedSlot,
    out: ConvSlot,
}

#[derive(Debug, Clone)]
struct Graph {
    enc: Vec<[GatedSlot; 2]>,
    bottleneck: [GatedSlot; 2],
    trunk: Vec<GatedSlot>,
    heads: Vec<HeadSlot>,
}

struct Builder {
    metas: Vec<TensorMeta>,
    params: Vec<f64>,
    rng: CounterRng,
}

impl Builder {
    fn push(&mut self, name: String, shape: Vec<usize>, values: Vec<f64>) -> usize {
        let len: usize = shape.iter().product();
        debug_assert_eq!(len, values.len());
        let offset = self.params.len();
        self.params.extend_from_slice(&values);
        self.metas.push(TensorMeta {
            name,
            shape,
            offset,
            len,
        });
        self.metas.len() - 1
    }

    fn conv(&mut self, name: &str, out_ch: usize, in_ch: usize) -> Result<ConvSlot> {
        let shape = ConvShape::new(out_ch, in_ch, 3);
        shape.validate()?;
        let weights = xavier_uniform(&shape, &mut self.rng);
        let w = self.push(
            format!("{name}.w"),
            vec![out_ch, in_ch, shape.k, shape.k, shape.k],
            weights,
        );
        let b = self.push(format!("{name}.b"), vec![out_ch], vec![0.0; out_ch]);
        Ok(ConvSlot { w, b, shape })
    }

    fn gated(
        &mut self,
        name: &str,
        out_ch: usize,
        in_ch: usize,
        use_gate: bool,
        takes_mask: bool,
    ) -> Result<GatedSlot> {
        let feat = self.conv(&format!("{name}.feat"), out_ch, in_ch)?;
        let gate = if use_gate {
            let extra = usize::from(takes_mask);
            Some(self.conv(&format!("{name}.gate"), out_ch, in_ch + extra)?)
        } else {
            None
        };
        Ok(GatedSlot {
            feat,
            gate,
            takes_mask: use_gate && takes_mask,
        })
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct Model {
    pub variant: ModelVariant,
    pub config: ModelConfig,
    /// Every trainable parameter, in registry order.
    pub params: Vec<f64>,
    pub metas: Vec<TensorMeta>,
    graph: Graph,
}

/// Forward intermediates for one training example.
pub struct Tape {
    enc: Vec<[GatedCache; 2]>,
    bottleneck: [GatedCache; 2],
    trunk: Vec<GatedCache>,
    /// Per head: gated-conv cache and the input to the final linear conv.
    heads: Vec<(GatedCache, LayerTensor)>,
}

impl Model {
    /// Builds the network with deterministic Xavier-uniform weights and zero
    /// biases, seeded from `config.seed`.
    pub fn build(variant: ModelVariant, config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let gated = variant.gated();
        let depth = config.depth();
        let enc_ch = &config.encoder_channels;
        let mut b = Builder {
            metas: Vec::new(),
            params: Vec::new(),
            rng: CounterRng::new(config.seed),
        };

        let mut enc = Vec::with_capacity(depth);
        for i in 0..depth {
            let in_ch = if i == 0 {
                COEFF_CHANNELS
            } else {
                enc_ch[i - 1]
            };
            let out_ch = enc_ch[i];
            let takes_mask = i == 0 && variant.brain_aware();
            let c1 = b.gated(
                &format!("enc{}.conv1", i + 1),
                out_ch,
                in_ch,
                gated,
                takes_mask,
            )?;
            let c2 = b.gated(&format!("enc{}.conv2", i + 1), out_ch, out_ch, gated, false)?;
            enc.push([c1, c2]);
        }

        let bw = config.bottleneck_channels;
        let bottleneck = [
            b.gated("bottleneck.conv1", bw, enc_ch[depth - 1], gated, false)?,
            b.gated("bottleneck.conv2", bw, bw, gated, false)?,
        ];

        let stages = config.trunk_stages();
        let mut trunk = Vec::with_capacity(stages);
        let mut prev = bw;
        for s in 0..stages {
            let skip_ch = enc_ch[depth - 1 - s];
            let slot = b.gated(
                &format!("dec{}", s + 1),
                skip_ch,
                prev + skip_ch,
                gated,
                false,
            )?;
            trunk.push(slot);
            prev = skip_ch;
        }

        let trunk_ch = config.trunk_channels();
        debug_assert_eq!(prev, trunk_ch);
        let mut heads = Vec::with_capacity(variant.head_count());
        if variant.tensor_wise() {
            for label in COEFF_LABELS {
                let name = format!("head_{label}");
                let conv = b.gated(&format!("{name}.conv"), trunk_ch, trunk_ch, gated, false)?;
                let out = b.conv(&format!("{name}.out"), 1, trunk_ch)?;
                heads.push(HeadSlot { conv, out });
            }
        } else {
            let conv = b.gated("head.conv", trunk_ch, trunk_ch, gated, false)?;
            let out = b.conv("head.out", COEFF_CHANNELS, trunk_ch)?;
            heads.push(HeadSlot { conv, out });
        }

        Ok(Model {
            variant,
            config,
            params: b.params,
            metas: b.metas,
            graph: Graph {
                enc,
                bottleneck,
                trunk,
                heads,
            },
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Fresh zeroed gradient buffer matching `params`.
    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    fn tensor(&self, idx: usize) -> &[f64] {
        let m = &self.metas[idx];
        &self.params[m.offset..m.offset + m.len]
    }

    fn gated_params<'a>(&'a self, slot: &'a GatedSlot) -> GatedParams<'a> {
        GatedParams {
            feat_w: self.tensor(slot.feat.w),
            feat_b: self.tensor(slot.feat.b),
            feat_shape: &slot.feat.shape,
            gate: slot
                .gate
                .as_ref()
                .map(|g| (self.tensor(g.w), self.tensor(g.b), &g.shape)),
            slope: self.config.leaky_slope,
        }
    }

    fn accumulate(&self, grads: &mut [f64], idx: usize, values: &[f64]) {
        let m = &self.metas[idx];
        debug_assert_eq!(m.len, values.len());
        let dst = &mut grads[m.offset..m.offset + m.len];
        for (d, v) in dst.iter_mut().zip(values) {
            *d += v;
        }
    }

    fn validate_input(&self, payload: &LayerTensor) -> Result<()> {
        if payload.channels != PATCH_CHANNELS {
            return Err(NnError::ChannelMismatch {
                context: "model input",
                got: payload.channels,
                expected: PATCH_CHANNELS,
            });
        }
        let divisor = 1usize << self.config.depth();
        if payload.dims.iter().any(|&d| d == 0 || d % divisor != 0) {
            return Err(NnError::IndivisibleDims {
                dims: payload.dims,
                divisor,
                depth: self.config.depth(),
            });
        }
        Ok(())
    }

    fn split_payload(payload: &LayerTensor) -> (LayerTensor, LayerTensor) {
        let nvox = payload.nvox();
        let coeffs = LayerTensor {
            channels: COEFF_CHANNELS,
            dims: payload.dims,
            data: payload.data[..COEFF_CHANNELS * nvox].to_vec(),
        };
        let mask = LayerTensor {
            channels: 1,
            dims: payload.dims,
            data: payload.data[COEFF_CHANNELS * nvox..PATCH_CHANNELS * nvox].to_vec(),
        };
        (coeffs, mask)
    }

    /// Training forward pass: returns the 6-channel reconstruction and the
    /// tape of intermediates needed by [`Model::backward`].
    pub fn forward_train(&self, payload: &LayerTensor) -> Result<(LayerTensor, Tape)> {
        self.validate_input(payload)?;
        let (coeffs, mask) = Self::split_payload(payload);
        let depth = self.config.depth();

        let mut enc_caches = Vec::with_capacity(depth);
        let mut skips: Vec<LayerTensor> = Vec::with_capacity(depth);
        let mut x = coeffs;
        for block in &self.graph.enc {
            let extra = if block[0].takes_mask {
                Some(&mask)
            } else {
                None
            };
            let (h, c1) = gated_forward(&x, extra, self.gated_params(&block[0]))?;
            let (out, c2) = gated_forward(&h, None, self.gated_params(&block[1]))?;
            enc_caches.push([c1, c2]);
            x = downsample2(&out)?;
            skips.push(out);
        }

        let (h, b1) = gated_forward(&x, None, self.gated_params(&self.graph.bottleneck[0]))?;
        let (mut t, b2) = gated_forward(&h, None, self.gated_params(&self.graph.bottleneck[1]))?;

        let mut trunk_caches = Vec::with_capacity(self.graph.trunk.len());
        for (s, slot) in self.graph.trunk.iter().enumerate() {
            let up = upsample2(&t);
            let skip = &skips[depth - 1 - s];
            let cat = up.concat(skip)?;
            let (out, cache) = gated_forward(&cat, None, self.gated_params(slot))?;
            trunk_caches.push(cache);
            t = out;
        }

        let mut head_caches = Vec::with_capacity(self.graph.heads.len());
        let mut head_outs = Vec::with_capacity(self.graph.heads.len());
        for head in &self.graph.heads {
            let hin = if self.config.head_upsample {
                upsample2(&t)
            } else {
                t.clone()
            };
            let (c1, cache) = gated_forward(&hin, None, self.gated_params(&head.conv))?;
            let out = conv3d_forward(
                &c1,
                self.tensor(head.out.w),
                self.tensor(head.out.b),
                &head.out.shape,
            )?;
            head_caches.push((cache, c1));
            head_outs.push(out);
        }

        let output = assemble_heads(&head_outs)?;
        let tape = Tape {
            enc: enc_caches,
            bottleneck: [b1, b2],
            trunk: trunk_caches,
            heads: head_caches,
        };
        Ok((output, tape))
    }

    /// Inference forward pass (no tape, less memory).
    pub fn forward(&self, payload: &LayerTensor) -> Result<LayerTensor> {
        let (out, _tape) = self.forward_train(payload)?;
        Ok(out)
    }

    /// Reverse pass: accumulates parameter gradients into `grads` (adding to
    /// whatever is already there, so batches sum naturally) and returns the
    /// gradient with respect to the 7-channel payload.
    pub fn backward(
        &self,
        tape: &Tape,
        g_output: &LayerTensor,
        grads: &mut [f64],
    ) -> Result<LayerTensor> {
        if grads.len() != self.params.len() {
            return Err(NnError::BadConfig(format!(
                "gradient buffer has {} entries, model has {} parameters",
                grads.len(),
                self.params.len()
            )));
        }
        if g_output.channels != COEFF_CHANNELS {
            return Err(NnError::ChannelMismatch {
                context: "output gradient",
                got: g_output.channels,
                expected: COEFF_CHANNELS,
            });
        }
        let depth = self.config.depth();

        // Heads (gradients sum into the shared trunk output).
        let mut g_trunk: Option<LayerTensor> = None;
        for (h, head) in self.graph.heads.iter().enumerate() {
            let g_head = if self.variant.tensor_wise() {
                g_output.extract_channel(h)
            } else {
                g_output.clone()
            };
            let (cache, out_in) = &tape.heads[h];
            let (g_c1, out_grads) =
                conv3d_backward(out_in, &g_head, self.tensor(head.out.w), &head.out.shape)?;
            self.accumulate(grads, head.out.w, &out_grads.w);
            self.accumulate(grads, head.out.b, &out_grads.b);
            let back = gated_backward(cache, &g_c1, self.gated_params(&head.conv))?;
            self.accumulate_gated(grads, &head.conv, &back);
            let g_hin = if self.config.head_upsample {
                upsample2_backward(&back.g_x)
            } else {
                back.g_x
            };
            match &mut g_trunk {
                None => g_trunk = Some(g_hin),
                Some(acc) => {
                    for (a, v) in acc.data.iter_mut().zip(&g_hin.data) {
                        *a += v;
                    }
                }
            }
        }
        let mut g = g_trunk.expect("at least one head");

        // Shared decoder, in reverse.
        let mut g_skips: Vec<Option<LayerTensor>> = (0..depth).map(|_| None).collect();
        for (s, slot) in self.graph.trunk.iter().enumerate().rev() {
            let back = gated_backward(&tape.trunk[s], &g, self.gated_params(slot))?;
            self.accumulate_gated(grads, slot, &back);
            let skip_ch = self.config.encoder_channels[depth - 1 - s];
            let g_cat = back.g_x;
            let nvox = g_cat.nvox();
            let up_ch = g_cat.channels - skip_ch;
            let g_up = LayerTensor {
                channels: up_ch,
                dims: g_cat.dims,
                data: g_cat.data[..up_ch * nvox].to_vec(),
            };
            let g_skip = LayerTensor {
                channels: skip_ch,
                dims: g_cat.dims,
                data: g_cat.data[up_ch * nvox..].to_vec(),
            };
            g_skips[depth - 1 - s] = Some(g_skip);
            g = upsample2_backward(&g_up);
        }

        // Bottleneck.
        let back = gated_backward(
            &tape.bottleneck[1],
            &g,
            self.gated_params(&self.graph.bottleneck[1]),
        )?;
        self.accumulate_gated(grads, &self.graph.bottleneck[1], &back);
        let back = gated_backward(
            &tape.bottleneck[0],
            &back.g_x,
            self.gated_params(&self.graph.bottleneck[0]),
        )?;
        self.accumulate_gated(grads, &self.graph.bottleneck[0], &back);
        g = back.g_x;

        // Encoder, in reverse. Gradients from the downsample path and the
        // skip connection sum at each block output.
        let mut g_mask: Option<LayerTensor> = None;
        for (i, block) in self.graph.enc.iter().enumerate().rev() {
            let mut g_block = downsample2_backward(&g);
            if let Some(gs) = g_skips[i].take() {
                for (a, v) in g_block.data.iter_mut().zip(&gs.data) {
                    *a += v;
                }
            }
            let back = gated_backward(&tape.enc[i][1], &g_block, self.gated_params(&block[1]))?;
            self.accumulate_gated(grads, &block[1], &back);
            let back = gated_backward(&tape.enc[i][0], &back.g_x, self.gated_params(&block[0]))?;
            self.accumulate_gated(grads, &block[0], &back);
            if let Some(extra) = back.g_extra {
                g_mask = Some(extra);
            }
            g = back.g_x;
        }

        // Assemble the 7-channel payload gradient; the mask channel is zero
        // for variants that never read it.
        let nvox = g.nvox();
        let mut data = Vec::with_capacity(PATCH_CHANNELS * nvox);
        data.extend_from_slice(&g.data);
        match g_mask {
            Some(m) => data.extend_from_slice(&m.data),
            None => data.extend(std::iter::repeat_n(0.0, nvox)),
        }
        Ok(LayerTensor {
            channels: PATCH_CHANNELS,
            dims: g.dims,
            data,
        })
    }

    fn accumulate_gated(
        &self,
        grads: &mut [f64],
        slot: &GatedSlot,
        back: &crate::gated::GatedBackward,
    ) {
        self.accumulate(grads, slot.feat.w, &back.feat.w);
        self.accumulate(grads, slot.feat.b, &back.feat.b);
        if let (Some(gslot), Some(ggrads)) = (&slot.gate, &back.gate) {
            self.accumulate(grads, gslot.w, &ggrads.w);
            self.accumulate(grads, gslot.b, &ggrads.b);
        }
    }
}

/// Concatenates per-head outputs into the 6-channel prediction. A single
/// 6-channel head passes through unchanged.
fn assemble_heads(outs: &[LayerTensor]) -> Result<LayerTensor> {
    if outs.len() == 1 {
        return Ok(outs[0].clone());
    }
    let mut acc = outs[0].clone();
    for o in &outs[1..] {
        acc = acc.concat(o)?;
    }
    if acc.channels != COEFF_CHANNELS {
        return Err(NnError::ChannelMismatch {
            context: "assembled head output",
            got: acc.channels,
            expected: COEFF_CHANNELS,
        });
    }
    Ok(acc)
}
