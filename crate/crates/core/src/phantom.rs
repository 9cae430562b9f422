//! Deterministic synthetic DTI phantom: an ellipsoidal brain containing
//! axially symmetric fiber bundles in an isotropic background, with seeded
//! per-voxel noise. Stands in for acquired data at desk scale.

use crate::error::{CoreError, Result};
use crate::rng::CounterRng;
use crate::volume::{spatial_index, BrainMask, TensorField};
use serde::{Deserialize, Serialize};

/// One fiber bundle: a finite cylinder of axially symmetric tensors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BundleSpec {
    /// Principal diffusion direction and tube axis; normalized on use.
    pub orientation: [f64; 3],
    /// Target fractional anisotropy in [0, 1).
    pub fa: f64,
    /// Target mean diffusivity in mm^2/s, > 0.
    pub md: f64,
    /// Tube center in voxel coordinates.
    pub center: [f64; 3],
    /// Tube radius in voxels.
    pub radius: f64,
    /// Half-extent along the axis in voxels.
    pub half_length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub seed: u64,
    /// Ellipsoidal brain semi-axes in voxels, centered in the volume.
    pub semi_axes: [f64; 3],
    /// Isotropic MD of brain tissue outside every bundle.
    pub background_md: f64,
    /// Width of the linear blend band inside each tube boundary; 0 = hard edge.
    pub smoothing_radius: f64,
    /// Noise sigma as a fraction of the local pre-noise MD (0 disables noise).
    pub noise_fraction: f64,
    pub bundles: Vec<BundleSpec>,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [48, 56, 48],
            voxel_size: [1.25, 1.25, 1.25],
            seed: 42,
            // Chosen so the default brain spans exactly 40 axial slices.
            semi_axes: [20.0, 24.0, 19.75],
            background_md: 0.75e-3,
            smoothing_radius: 1.5,
            noise_fraction: 0.01,
            bundles: vec![
                // Superior bundle crossing the default crop region, so the
                // disrupted slices hold structured anisotropic signal.
                BundleSpec {
                    orientation: [1.0, 0.0, 0.0],
                    fa: 0.78,
                    md: 1.0e-3,
                    center: [23.5, 27.5, 37.0],
                    radius: 9.0,
                    half_length: 1e3,
                },
                BundleSpec {
                    orientation: [0.0, 1.0, 0.0],
                    fa: 0.60,
                    md: 0.9e-3,
                    center: [23.5, 27.5, 20.0],
                    radius: 10.0,
                    half_length: 1e3,
                },
            ],
        }
    }
}

/// Eigenvalues (lambda1, lambda2) of the axially symmetric tensor hitting the
/// FA/MD targets exactly: lambda = (l1, l2, l2) with
/// FA = (l1-l2)/sqrt(l1^2+2*l2^2) and MD = (l1+2*l2)/3.
pub fn axially_symmetric_lambdas(fa: f64, md: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&fa) || !fa.is_finite() {
        return Err(CoreError::InvalidSpec(format!(
            "bundle FA {fa} outside [0, 1)"
        )));
    }
    if md <= 0.0 || !md.is_finite() {
        return Err(CoreError::InvalidSpec(format!(
            "bundle MD {md} must be > 0"
        )));
    }
    let s = (3.0 - 2.0 * fa * fa).sqrt();
    let l1 = md * (1.0 + 2.0 * fa / s);
    let l2 = md * (1.0 - fa / s);
    if l2 <= 0.0 {
        return Err(CoreError::InvalidSpec(format!(
            "FA {fa} with MD {md} yields non-positive radial eigenvalue"
        )));
    }
    Ok((l1, l2))
}

#[inline]
fn normalize(v: [f64; 3]) -> Result<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n <= 0.0 || !n.is_finite() {
        return Err(CoreError::InvalidSpec(
            "bundle orientation must be nonzero".into(),
        ));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

/// Coefficients of D = l2*I + (l1-l2) * u u^T in (Dxx, Dxy, Dxz, Dyy, Dyz, Dzz).
#[inline]
fn bundle_tensor(u: [f64; 3], l1: f64, l2: f64) -> [f64; 6] {
    let d = l1 - l2;
    [
        l2 + d * u[0] * u[0],
        d * u[0] * u[1],
        d * u[0] * u[2],
        l2 + d * u[1] * u[1],
        d * u[1] * u[2],
        l2 + d * u[2] * u[2],
    ]
}

struct PreparedBundle {
    axis: [f64; 3],
    tensor: [f64; 6],
    center: [f64; 3],
    radius: f64,
    half_length: f64,
}

impl PreparedBundle {
    /// Blend weight at a point: 1 deep inside the tube, a linear ramp of
    /// width `smoothing` ending exactly at the boundary, 0 outside.
    fn weight(&self, p: [f64; 3], smoothing: f64) -> f64 {
        let rel = [
            p[0] - self.center[0],
            p[1] - self.center[1],
            p[2] - self.center[2],
        ];
        let axial = rel[0] * self.axis[0] + rel[1] * self.axis[1] + rel[2] * self.axis[2];
        if axial.abs() > self.half_length {
            return 0.0;
        }
        let perp = [
            rel[0] - axial * self.axis[0],
            rel[1] - axial * self.axis[1],
            rel[2] - axial * self.axis[2],
        ];
        let d = (perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2]).sqrt();
        if d > self.radius {
            0.0
        } else if smoothing <= 0.0 {
            1.0
        } else {
            ((self.radius - d) / smoothing).min(1.0)
        }
    }
}

fn validate(spec: &PhantomSpec) -> Result<Vec<PreparedBundle>> {
    if spec.dims.iter().any(|&d| d < 2) {
        return Err(CoreError::InvalidSpec(format!(
            "phantom dims too small: {:?}",
            spec.dims
        )));
    }
    if spec.semi_axes.iter().any(|&a| a <= 0.0 || !a.is_finite()) {
        return Err(CoreError::InvalidSpec(format!(
            "semi-axes must be positive: {:?}",
            spec.semi_axes
        )));
    }
    if spec.background_md <= 0.0 || !spec.background_md.is_finite() {
        return Err(CoreError::InvalidSpec(format!(
            "background MD {} must be > 0",
            spec.background_md
        )));
    }
    if spec.noise_fraction < 0.0 || !spec.noise_fraction.is_finite() {
        return Err(CoreError::InvalidSpec(format!(
            "noise fraction {} must be >= 0",
            spec.noise_fraction
        )));
    }
    spec.bundles
        .iter()
        .map(|b| {
            let (l1, l2) = axially_symmetric_lambdas(b.fa, b.md)?;
            let axis = normalize(b.orientation)?;
            if !(b.radius > 0.0 && b.half_length > 0.0) {
                return Err(CoreError::InvalidSpec(
                    "bundle radius and half_length must be > 0".into(),
                ));
            }
            Ok(PreparedBundle {
                axis,
                tensor: bundle_tensor(axis, l1, l2),
                center: b.center,
                radius: b.radius,
                half_length: b.half_length,
            })
        })
        .collect()
}

/// Generate the phantom tensor field and its analytic-ellipsoid brain mask.
/// Bit-identical output for identical specs: noise is derived per voxel from
/// (seed, voxel index) alone, independent of fill order.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(TensorField, BrainMask)> {
    let bundles = validate(spec)?;
    let [nx, ny, nz] = spec.dims;
    let center = [
        (nx as f64 - 1.0) / 2.0,
        (ny as f64 - 1.0) / 2.0,
        (nz as f64 - 1.0) / 2.0,
    ];
    let background = [
        spec.background_md,
        0.0,
        0.0,
        spec.background_md,
        0.0,
        spec.background_md,
    ];

    let mut field = TensorField::zeros(spec.dims, spec.voxel_size);
    let mut mask = BrainMask::zeros(spec.dims);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [x as f64, y as f64, z as f64];
                let e = ((p[0] - center[0]) / spec.semi_axes[0]).powi(2)
                    + ((p[1] - center[1]) / spec.semi_axes[1]).powi(2)
                    + ((p[2] - center[2]) / spec.semi_axes[2]).powi(2);
                if e > 1.0 {
                    continue;
                }
                let idx = spatial_index(spec.dims, x, y, z);
                mask.data[idx] = 1;
                let mut t = background;
                for b in &bundles {
                    let w = b.weight(p, spec.smoothing_radius);
                    if w > 0.0 {
                        for c in 0..6 {
                            t[c] = (1.0 - w) * t[c] + w * b.tensor[c];
                        }
                    }
                }
                if spec.noise_fraction > 0.0 {
                    add_symmetric_noise(&mut t, spec.seed, idx, spec.noise_fraction);
                }
                field.set_tensor_at(idx, t);
            }
        }
    }
    if mask.count() == 0 {
        return Err(CoreError::EmptyMask);
    }
    Ok((field, mask))
}

/// Add sigma-scaled symmetric Gaussian noise: draw a full 3x3 of normals from
/// the voxel's own stream, symmetrize, add. Sigma = fraction of the local MD.
fn add_symmetric_noise(t: &mut [f64; 6], seed: u64, idx: usize, fraction: f64) {
    let md = (t[0] + t[3] + t[5]) / 3.0;
    let sigma = fraction * md;
    let mut rng = CounterRng::derive(seed, idx as u64);
    let mut e = [[0.0f64; 3]; 3];
    for row in &mut e {
        for v in row.iter_mut() {
            *v = sigma * rng.next_normal();
        }
    }
    t[0] += e[0][0];
    t[1] += 0.5 * (e[0][1] + e[1][0]);
    t[2] += 0.5 * (e[0][2] + e[2][0]);
    t[3] += e[1][1];
    t[4] += 0.5 * (e[1][2] + e[2][1]);
    t[5] += e[2][2];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{eig3_symmetric, fa_from_lambda, md_from_lambda};

    fn noiseless(spec: &PhantomSpec) -> PhantomSpec {
        PhantomSpec {
            noise_fraction: 0.0,
            ..spec.clone()
        }
    }

    #[test]
    fn lambda_inversion_hits_targets() {
        // Frozen: FA 0.8, MD 1e-3.
        let (l1, l2) = axially_symmetric_lambdas(0.8, 1e-3).unwrap();
        assert!((l1 - 0.002219988562660837).abs() < 1e-18);
        assert!((l2 - 0.00039000571866958133).abs() < 1e-18);
        assert!((md_from_lambda([l1, l2, l2]) - 1e-3).abs() < 1e-15);
        assert!((fa_from_lambda([l1, l2, l2]) - 0.8).abs() < 1e-12);
        // FA 0 degenerates to isotropic.
        let (a1, a2) = axially_symmetric_lambdas(0.0, 2e-3).unwrap();
        assert_eq!(a1, a2);
        assert!(axially_symmetric_lambdas(1.0, 1e-3).is_err());
        assert!(axially_symmetric_lambdas(0.5, 0.0).is_err());
    }

    #[test]
    fn default_brain_spans_forty_slices() {
        let spec = noiseless(&PhantomSpec::default());
        let (_, mask) = generate_phantom(&spec).unwrap();
        let slices = mask.brain_slices();
        assert_eq!(slices.len(), 40);
        assert_eq!(slices[0], 4);
        assert_eq!(*slices.last().unwrap(), 43);
    }

    #[test]
    fn mask_is_exactly_the_analytic_ellipsoid() {
        let spec = noiseless(&PhantomSpec::default());
        let (_, mask) = generate_phantom(&spec).unwrap();
        let c = [23.5, 27.5, 23.5];
        for z in 0..48 {
            for y in 0..56 {
                for x in 0..48 {
                    let e = ((x as f64 - c[0]) / 20.0).powi(2)
                        + ((y as f64 - c[1]) / 24.0).powi(2)
                        + ((z as f64 - c[2]) / 19.75).powi(2);
                    assert_eq!(mask.at(x, y, z), e <= 1.0, "at ({x},{y},{z})");
                }
            }
        }
    }

    #[test]
    fn bundle_core_hits_fa_and_md_targets_pre_noise() {
        let spec = noiseless(&PhantomSpec::default());
        let (field, mask) = generate_phantom(&spec).unwrap();
        let b = &spec.bundles[0];
        let core = b.radius - spec.smoothing_radius;
        let mut n = 0usize;
        let (mut fa_sum, mut md_sum) = (0.0, 0.0);
        for z in 0..48 {
            for y in 0..56 {
                for x in 0..48 {
                    if !mask.at(x, y, z) {
                        continue;
                    }
                    let dy = y as f64 - b.center[1];
                    let dz = z as f64 - b.center[2];
                    if (dy * dy + dz * dz).sqrt() > core {
                        continue;
                    }
                    let idx = spatial_index(spec.dims, x, y, z);
                    let dec = eig3_symmetric(field.tensor_at(idx)).unwrap();
                    fa_sum += fa_from_lambda(dec.lambda);
                    md_sum += md_from_lambda(dec.lambda);
                    n += 1;
                }
            }
        }
        assert!(n > 500, "core unexpectedly small: {n}");
        let fa_mean = fa_sum / n as f64;
        let md_mean = md_sum / n as f64;
        assert!((fa_mean - b.fa).abs() < 0.02, "mean FA {fa_mean}");
        assert!((md_mean - b.md).abs() < 0.02 * b.md, "mean MD {md_mean}");
    }

    #[test]
    fn all_tensors_spd_pre_noise_and_nearly_all_post_noise() {
        let base = PhantomSpec::default();
        let (clean, mask) = generate_phantom(&noiseless(&base)).unwrap();
        let mut checked = 0usize;
        for idx in 0..clean.nvox() {
            if mask.data[idx] == 0 {
                continue;
            }
            let dec = eig3_symmetric(clean.tensor_at(idx)).unwrap();
            assert!(dec.lambda[2] > 0.0, "non-SPD pre-noise at {idx}");
            checked += 1;
        }
        assert!(checked > 10_000);
        let (noisy, _) = generate_phantom(&base).unwrap();
        let mut negative = 0usize;
        for idx in 0..noisy.nvox() {
            if mask.data[idx] == 0 {
                continue;
            }
            let dec = eig3_symmetric(noisy.tensor_at(idx)).unwrap();
            if dec.lambda[2] <= 0.0 {
                negative += 1;
            }
        }
        assert!(
            (negative as f64) < 0.001 * checked as f64,
            "negative-eigenvalue fraction too high: {negative}/{checked}"
        );
    }

    #[test]
    fn same_seed_bit_identical_different_seed_not() {
        let spec = PhantomSpec::default();
        let (a, _) = generate_phantom(&spec).unwrap();
        let (b, _) = generate_phantom(&spec).unwrap();
        assert_eq!(a, b);
        let other = PhantomSpec { seed: 43, ..spec };
        let (c, _) = generate_phantom(&other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = PhantomSpec::default();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back: PhantomSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
        // Partial specs inherit defaults.
        let partial: PhantomSpec = serde_json::from_str(r#"{"seed": 7}"#).unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.dims, [48, 56, 48]);
    }
}
