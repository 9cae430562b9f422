//! Dense activation tensor: channel-major storage over an x-fastest spatial
//! block, matching the core volume layout so patch payloads copy straight in.

use crate::error::{NnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerTensor {
    pub channels: usize,
    pub dims: [usize; 3],
    /// channels * nx*ny*nz values; channel c occupies the contiguous block
    /// c*nvox .. (c+1)*nvox.
    pub data: Vec<f64>,
}

impl LayerTensor {
    pub fn zeros(channels: usize, dims: [usize; 3]) -> Self {
        LayerTensor {
            channels,
            dims,
            data: vec![0.0; channels * dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(channels: usize, dims: [usize; 3], data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            channels * dims[0] * dims[1] * dims[2],
            "tensor length"
        );
        LayerTensor {
            channels,
            dims,
            data,
        }
    }

    #[inline]
    pub fn nvox(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.nvox();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.nvox();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Single-channel view copied out as its own tensor.
    pub fn extract_channel(&self, c: usize) -> LayerTensor {
        LayerTensor {
            channels: 1,
            dims: self.dims,
            data: self.channel(c).to_vec(),
        }
    }

    /// Channel concatenation; spatial dims must agree.
    pub fn concat(&self, other: &LayerTensor) -> Result<LayerTensor> {
        if self.dims != other.dims {
            return Err(NnError::ShapeMismatch {
                context: "concat",
                a: self.dims.to_vec(),
                b: other.dims.to_vec(),
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(LayerTensor {
            channels: self.channels + other.channels,
            dims: self.dims,
            data,
        })
    }

    /// Keep the first `channels` channels.
    pub fn truncate_channels(&self, channels: usize) -> LayerTensor {
        assert!(channels <= self.channels);
        LayerTensor {
            channels,
            dims: self.dims,
            data: self.data[..channels * self.nvox()].to_vec(),
        }
    }

    pub fn assert_finite(&self, context: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NnError::NonFinite(context))
        }
    }
}
