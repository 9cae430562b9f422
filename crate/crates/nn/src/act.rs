//! Elementwise activations with exact backward passes.

use crate::tensor::LayerTensor;

pub fn leaky_relu(x: &LayerTensor, slope: f64) -> LayerTensor {
    let data = x
        .data
        .iter()
        .map(|&v| if v > 0.0 { v } else { slope * v })
        .collect();
    LayerTensor {
        channels: x.channels,
        dims: x.dims,
        data,
    }
}

/// Backward through LeakyReLU given the forward INPUT. The kink at exactly 0
/// takes the negative-side subgradient.
pub fn leaky_relu_backward(x: &LayerTensor, gout: &LayerTensor, slope: f64) -> LayerTensor {
    debug_assert_eq!(x.data.len(), gout.data.len());
    let data = x
        .data
        .iter()
        .zip(&gout.data)
        .map(|(&v, &g)| if v > 0.0 { g } else { slope * g })
        .collect();
    LayerTensor {
        channels: x.channels,
        dims: x.dims,
        data,
    }
}

pub fn sigmoid(x: &LayerTensor) -> LayerTensor {
    let data = x.data.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
    LayerTensor {
        channels: x.channels,
        dims: x.dims,
        data,
    }
}

/// Backward through sigmoid given the forward OUTPUT s: ds/dx = s(1-s).
pub fn sigmoid_backward(s: &LayerTensor, gout: &LayerTensor) -> LayerTensor {
    debug_assert_eq!(s.data.len(), gout.data.len());
    let data = s
        .data
        .iter()
        .zip(&gout.data)
        .map(|(&s, &g)| g * s * (1.0 - s))
        .collect();
    LayerTensor {
        channels: s.channels,
        dims: s.dims,
        data,
    }
}
