//! Scalar diffusion metric maps (FA, MD, AD) derived per voxel from the
//! tensor eigenvalues, restricted to the brain mask.

use crate::error::Result;
use crate::metrics::eig::{eig3_symmetric, fa_from_lambda, md_from_lambda};
use crate::volume::{BrainMask, ScalarVolume, TensorField};

/// FA, MD and AD maps plus diagnostics gathered during the eigensolve pass.
/// Values outside the brain mask are zero. Eigenvalues are deliberately not
/// clamped: negative lambdas from noisy or inpainted tensors flow into the
/// maps unchanged and are only counted.
#[derive(Debug)]
pub struct MetricMaps {
    pub fa: ScalarVolume,
    pub md: ScalarVolume,
    pub ad: ScalarVolume,
    pub qc: MetricQc,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricQc {
    /// Brain voxels whose smallest eigenvalue is negative.
    pub negative_eigenvalue_voxels: u64,
    /// Brain voxels processed.
    pub brain_voxels: u64,
}

/// Compute FA/MD/AD over the brain mask. Dimension mismatch and non-finite
/// tensor entries inside the mask are errors.
pub fn scalar_metrics(field: &TensorField, mask: &BrainMask) -> Result<MetricMaps> {
    field.same_dims(mask.dims, "scalar_metrics")?;
    let dims = field.dims;
    let mut fa = ScalarVolume::zeros(dims, field.voxel_size);
    let mut md = ScalarVolume::zeros(dims, field.voxel_size);
    let mut ad = ScalarVolume::zeros(dims, field.voxel_size);
    let mut qc = MetricQc::default();
    let nvox = fa.data.len();
    for idx in 0..nvox {
        if mask.data[idx] == 0 {
            continue;
        }
        let m = field.tensor_at(idx);
        let dec = eig3_symmetric(m).map_err(|e| match e {
            crate::error::CoreError::NonFiniteInput(_) => {
                crate::error::CoreError::NonFiniteInput(idx)
            }
            other => other,
        })?;
        qc.brain_voxels += 1;
        if dec.lambda[2] < 0.0 {
            qc.negative_eigenvalue_voxels += 1;
        }
        fa.data[idx] = fa_from_lambda(dec.lambda);
        md.data[idx] = md_from_lambda(dec.lambda);
        ad.data[idx] = dec.lambda[0];
    }
    Ok(MetricMaps { fa, md, ad, qc })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_voxel_field(coeffs: [f64; 6]) -> (TensorField, BrainMask) {
        let dims = [1, 1, 1];
        let mut f = TensorField::zeros(dims, [1.0; 3]);
        f.set_tensor_at(0, coeffs);
        let mask = BrainMask::new(dims, vec![1]);
        (f, mask)
    }

    #[test]
    fn prolate_tensor_metrics() {
        // lambda = (2,1,1)e-3: FA = 1/sqrt(6), MD = 4/3 e-3, AD = 2e-3.
        let (f, m) = single_voxel_field([2e-3, 0.0, 0.0, 1e-3, 0.0, 1e-3]);
        let maps = scalar_metrics(&f, &m).unwrap();
        assert!((maps.fa.data[0] - 0.4082482904638631).abs() < 1e-13);
        assert!((maps.md.data[0] - (4.0 / 3.0) * 1e-3).abs() < 1e-18);
        assert!((maps.ad.data[0] - 2e-3).abs() < 1e-18);
        assert_eq!(maps.qc.negative_eigenvalue_voxels, 0);
        assert_eq!(maps.qc.brain_voxels, 1);
    }

    #[test]
    fn rotated_tensor_has_same_invariants() {
        // Rotate diag(2,1,1)e-3 by 30 degrees about z; FA/MD/AD are rotation
        // invariant so the map values must match the axis-aligned case.
        let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        let (l1, l2) = (2e-3, 1e-3);
        let dxx = c * c * l1 + s * s * l2;
        let dyy = s * s * l1 + c * c * l2;
        let dxy = c * s * (l1 - l2);
        let (f, m) = single_voxel_field([dxx, dxy, 0.0, dyy, 0.0, 1e-3]);
        let maps = scalar_metrics(&f, &m).unwrap();
        assert!((maps.fa.data[0] - 0.4082482904638631).abs() < 1e-12);
        assert!((maps.md.data[0] - (4.0 / 3.0) * 1e-3).abs() < 1e-15);
        assert!((maps.ad.data[0] - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn negative_eigenvalues_counted_not_clamped() {
        let (f, m) = single_voxel_field([-1e-3, 0.0, 0.0, 2e-3, 0.0, 1e-3]);
        let maps = scalar_metrics(&f, &m).unwrap();
        assert_eq!(maps.qc.negative_eigenvalue_voxels, 1);
        // MD keeps the negative contribution.
        assert!((maps.md.data[0] - (2.0 / 3.0) * 1e-3).abs() < 1e-15);
        assert!(
            maps.fa.data[0] > 1.0,
            "FA exceeds 1 when a lambda is negative"
        );
    }

    #[test]
    fn background_stays_zero_and_uncounted() {
        let dims = [2, 1, 1];
        let mut f = TensorField::zeros(dims, [1.0; 3]);
        f.set_tensor_at(0, [2e-3, 0.0, 0.0, 1e-3, 0.0, 1e-3]);
        f.set_tensor_at(1, [9e-3, 0.0, 0.0, 9e-3, 0.0, 9e-3]);
        let mask = BrainMask::new(dims, vec![1, 0]);
        let maps = scalar_metrics(&f, &mask).unwrap();
        assert_eq!(maps.fa.data[1], 0.0);
        assert_eq!(maps.md.data[1], 0.0);
        assert_eq!(maps.qc.brain_voxels, 1);
    }

    #[test]
    fn non_finite_in_mask_is_error() {
        let (f, m) = single_voxel_field([f64::NAN, 0.0, 0.0, 1e-3, 0.0, 1e-3]);
        assert!(scalar_metrics(&f, &m).is_err());
    }
}
