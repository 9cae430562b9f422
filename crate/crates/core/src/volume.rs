//! In-memory volume types. Spatial storage is x-fastest (the NIfTI payload
//! order), channels slowest, so file I/O never transposes.

use crate::error::{CoreError, Result};

/// Fixed coefficient ordering of the symmetric diffusion tensor.
pub const COEFF_LABELS: [&str; 6] = ["Dxx", "Dxy", "Dxz", "Dyy", "Dyz", "Dzz"];
/// Channel-order string recorded in `.meta.json` sidecars.
pub const COEFF_ORDER: &str = "DxxDxyDxzDyyDyzDzz";

#[inline]
pub fn voxel_count(dims: [usize; 3]) -> usize {
    dims[0] * dims[1] * dims[2]
}

#[inline]
pub fn spatial_index(dims: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

/// Dense 3D scalar volume of 64-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub data: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(dims: [usize; 3], voxel_size: [f64; 3], data: Vec<f64>) -> Self {
        assert!(dims.iter().all(|&d| d >= 1), "dims must be >= 1: {dims:?}");
        assert!(
            voxel_size.iter().all(|&s| s > 0.0),
            "voxel sizes must be positive: {voxel_size:?}"
        );
        assert_eq!(data.len(), voxel_count(dims), "data length vs dims");
        ScalarVolume {
            dims,
            voxel_size,
            data,
        }
    }

    pub fn zeros(dims: [usize; 3], voxel_size: [f64; 3]) -> Self {
        Self::new(dims, voxel_size, vec![0.0; voxel_count(dims)])
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[spatial_index(self.dims, x, y, z)]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize, z: usize) -> &mut f64 {
        &mut self.data[spatial_index(self.dims, x, y, z)]
    }
}

/// 6-channel symmetric tensor field; channel c occupies the contiguous block
/// `c*nvox .. (c+1)*nvox`, each block x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub coeffs: Vec<f64>,
}

impl TensorField {
    pub fn new(dims: [usize; 3], voxel_size: [f64; 3], coeffs: Vec<f64>) -> Self {
        assert!(dims.iter().all(|&d| d >= 1), "dims must be >= 1: {dims:?}");
        assert!(
            voxel_size.iter().all(|&s| s > 0.0),
            "voxel sizes must be positive: {voxel_size:?}"
        );
        assert_eq!(coeffs.len(), 6 * voxel_count(dims), "coeff length vs dims");
        TensorField {
            dims,
            voxel_size,
            coeffs,
        }
    }

    pub fn zeros(dims: [usize; 3], voxel_size: [f64; 3]) -> Self {
        Self::new(dims, voxel_size, vec![0.0; 6 * voxel_count(dims)])
    }

    #[inline]
    pub fn nvox(&self) -> usize {
        voxel_count(self.dims)
    }

    /// Contiguous slice of one coefficient channel.
    #[inline]
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.nvox();
        &self.coeffs[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.nvox();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    /// The 6 coefficients (Dxx, Dxy, Dxz, Dyy, Dyz, Dzz) at one spatial index.
    #[inline]
    pub fn tensor_at(&self, idx: usize) -> [f64; 6] {
        let n = self.nvox();
        [
            self.coeffs[idx],
            self.coeffs[n + idx],
            self.coeffs[2 * n + idx],
            self.coeffs[3 * n + idx],
            self.coeffs[4 * n + idx],
            self.coeffs[5 * n + idx],
        ]
    }

    #[inline]
    pub fn set_tensor_at(&mut self, idx: usize, t: [f64; 6]) {
        let n = self.nvox();
        for (c, v) in t.into_iter().enumerate() {
            self.coeffs[c * n + idx] = v;
        }
    }

    pub fn same_dims(&self, other: [usize; 3], context: &'static str) -> Result<()> {
        if self.dims != other {
            return Err(CoreError::DimMismatch {
                context,
                a: self.dims,
                b: other,
            });
        }
        Ok(())
    }
}

/// Binary brain mask (1 = inside brain).
#[derive(Debug, Clone, PartialEq)]
pub struct BrainMask {
    pub dims: [usize; 3],
    pub data: Vec<u8>,
}

impl BrainMask {
    pub fn new(dims: [usize; 3], data: Vec<u8>) -> Self {
        assert_eq!(data.len(), voxel_count(dims), "mask length vs dims");
        debug_assert!(data.iter().all(|&v| v <= 1), "mask values must be 0/1");
        BrainMask { dims, data }
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        BrainMask {
            dims,
            data: vec![0; voxel_count(dims)],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[spatial_index(self.dims, x, y, z)] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Axial slice indices containing at least one mask voxel, ascending.
    pub fn brain_slices(&self) -> Vec<usize> {
        let [nx, ny, nz] = self.dims;
        let plane = nx * ny;
        (0..nz)
            .filter(|&z| {
                self.data[z * plane..(z + 1) * plane]
                    .iter()
                    .any(|&v| v != 0)
            })
            .collect()
    }

    /// Number of mask voxels in one axial slice.
    pub fn slice_count(&self, z: usize) -> usize {
        let plane = self.dims[0] * self.dims[1];
        self.data[z * plane..(z + 1) * plane]
            .iter()
            .filter(|&&v| v != 0)
            .count()
    }
}

/// Voxels zeroed by the superior-slice disruption, plus the slice bookkeeping
/// the sidecar records.
#[derive(Debug, Clone, PartialEq)]
pub struct DisruptionMask {
    pub dims: [usize; 3],
    pub data: Vec<u8>,
    /// Zeroed axial slice indices, ascending.
    pub slices: Vec<usize>,
    pub fraction: f64,
}

impl DisruptionMask {
    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[spatial_index(self.dims, x, y, z)] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}
