//! Synthetic subject cohorts: jittered phantom variants split into training
//! and held-out test subjects, each with the superior-slice disruption
//! applied.

use dti_core::{
    crop_superior, generate_phantom, BrainMask, CounterRng, DisruptionMask, PhantomSpec,
    TensorField,
};

use crate::error::Result;

/// RNG stream offset for per-subject jitter; keeps subject draws disjoint
/// from the training-loop streams derived from the same user seed.
const SUBJECT_STREAM: u64 = 7_000;

#[derive(Debug, Clone)]
pub struct Subject {
    pub name: String,
    pub gt: TensorField,
    pub mask: BrainMask,
    pub disrupted: TensorField,
    pub dmask: DisruptionMask,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Subject>,
    pub test: Vec<Subject>,
    pub fraction: f64,
}

impl Dataset {
    pub fn subjects(&self) -> impl Iterator<Item = &Subject> {
        self.train.iter().chain(self.test.iter())
    }
}

/// Proportionally rescale the library's default phantom to new dims so small
/// fast cohorts keep the same anatomy: per-axis factors shrink the brain
/// ellipsoid and bundle centers, tube radii shrink by the smallest factor.
pub fn scaled_default_spec(dims: [usize; 3]) -> PhantomSpec {
    let base = PhantomSpec::default();
    let f = [
        dims[0] as f64 / base.dims[0] as f64,
        dims[1] as f64 / base.dims[1] as f64,
        dims[2] as f64 / base.dims[2] as f64,
    ];
    let fmin = f[0].min(f[1]).min(f[2]);
    let mut spec = base;
    spec.dims = dims;
    for axis in 0..3 {
        spec.semi_axes[axis] *= f[axis];
    }
    for b in &mut spec.bundles {
        for axis in 0..3 {
            b.center[axis] *= f[axis];
        }
        b.radius *= fmin;
    }
    spec
}

/// Rotate `v` by `theta` radians about the unit axis `axis` (Rodrigues).
fn rotate(v: [f64; 3], axis: [f64; 3], theta: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    let dot = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
    let cross = [
        axis[1] * v[2] - axis[2] * v[1],
        axis[2] * v[0] - axis[0] * v[2],
        axis[0] * v[1] - axis[1] * v[0],
    ];
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = v[i] * c + cross[i] * s + axis[i] * dot * (1.0 - c);
    }
    out
}

/// Derive an anatomically perturbed variant of `base`: bundle orientations
/// rotate by up to ±0.15 rad, centers shift by up to ±2 voxels, FA targets
/// move by up to ±0.04, MD targets scale by up to ±5%, and the noise
/// realization changes with the subject seed.
pub fn jitter_spec(base: &PhantomSpec, seed: u64, subject: u64) -> PhantomSpec {
    let mut rng = CounterRng::derive(seed, SUBJECT_STREAM + subject);
    let mut spec = base.clone();
    spec.seed = rng.next_u64();
    for b in &mut spec.bundles {
        let mut axis = [rng.next_normal(), rng.next_normal(), rng.next_normal()];
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let theta = rng.uniform(-0.15, 0.15);
        if n > 1e-12 {
            for a in &mut axis {
                *a /= n;
            }
            b.orientation = rotate(b.orientation, axis, theta);
        }
        for axis in 0..3 {
            b.center[axis] += rng.uniform(-2.0, 2.0);
        }
        b.fa = (b.fa + rng.uniform(-0.04, 0.04)).clamp(0.05, 0.95);
        b.md *= 1.0 + rng.uniform(-0.05, 0.05);
    }
    spec
}

/// Generate one disrupted subject from a phantom spec.
pub fn make_subject(spec: &PhantomSpec, name: impl Into<String>, fraction: f64) -> Result<Subject> {
    let (gt, mask) = generate_phantom(spec)?;
    let (disrupted, dmask) = crop_superior(&gt, &mask, fraction)?;
    Ok(Subject {
        name: name.into(),
        gt,
        mask,
        disrupted,
        dmask,
    })
}

/// Build a train/test cohort of jittered variants of `base`. Subject i uses
/// jitter stream i; test subjects continue the stream after the training
/// ones, so train and test anatomy never coincide.
pub fn build_dataset(
    base: &PhantomSpec,
    n_train: usize,
    n_test: usize,
    fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut train = Vec::with_capacity(n_train);
    for i in 0..n_train {
        let spec = jitter_spec(base, seed, i as u64);
        train.push(make_subject(&spec, format!("train{i}"), fraction)?);
    }
    let mut test = Vec::with_capacity(n_test);
    for i in 0..n_test {
        let spec = jitter_spec(base, seed, (n_train + i) as u64);
        test.push(make_subject(&spec, format!("test{i}"), fraction)?);
    }
    Ok(Dataset {
        train,
        test,
        fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_preserves_anatomy_proportions() {
        let spec = scaled_default_spec([32, 32, 32]);
        assert_eq!(spec.dims, [32, 32, 32]);
        let base = PhantomSpec::default();
        // Semi-axes shrink by the per-axis factors.
        let expect = base.semi_axes[1] * 32.0 / 56.0;
        assert!((spec.semi_axes[1] - expect).abs() < 1e-12);
        // The superior bundle still sits in the upper half of the brain.
        assert!(spec.bundles[0].center[2] > spec.dims[2] as f64 / 2.0);
        // Radii stay positive and inside the volume.
        for b in &spec.bundles {
            assert!(b.radius > 1.0 && b.radius < 16.0);
        }
    }

    #[test]
    fn jitter_is_deterministic_and_bounded() {
        let base = scaled_default_spec([32, 32, 32]);
        let a = jitter_spec(&base, 42, 0);
        let b = jitter_spec(&base, 42, 0);
        assert_eq!(a, b);
        let c = jitter_spec(&base, 42, 1);
        assert_ne!(a, c);

        for (orig, j) in base.bundles.iter().zip(&a.bundles) {
            let dot: f64 = orig
                .orientation
                .iter()
                .zip(&j.orientation)
                .map(|(x, y)| x * y)
                .sum();
            // Rotation by at most 0.15 rad keeps the directions aligned.
            assert!(dot.abs() > 0.15f64.cos() - 1e-9, "dot {dot}");
            // Unit length preserved by Rodrigues rotation.
            let n: f64 = j.orientation.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
            assert!((orig.fa - j.fa).abs() <= 0.04 + 1e-12);
            assert!((j.md / orig.md - 1.0).abs() <= 0.05 + 1e-12);
            for axis in 0..3 {
                assert!((orig.center[axis] - j.center[axis]).abs() <= 2.0);
            }
        }
    }

    #[test]
    fn dataset_builds_disrupted_cohort() {
        let base = scaled_default_spec([32, 32, 32]);
        let ds = build_dataset(&base, 2, 1, 0.10, 42).unwrap();
        assert_eq!(ds.train.len(), 2);
        assert_eq!(ds.test.len(), 1);
        for s in ds.subjects() {
            assert!(s.dmask.count() > 0, "{} has no disrupted voxels", s.name);
            assert!(!s.dmask.slices.is_empty());
            // Disruption zeroes whole slices: every in-region tensor is zero.
            let idx = {
                let [nx, ny, _] = s.gt.dims;
                let z = s.dmask.slices[0];
                (0..s.gt.nvox())
                    .find(|&i| i / (nx * ny) == z && s.dmask.data[i] != 0)
                    .unwrap()
            };
            assert_eq!(s.disrupted.tensor_at(idx), [0.0; 6]);
            assert_ne!(s.gt.tensor_at(idx), [0.0; 6]);
        }
        // Train and test anatomy differ.
        assert_ne!(ds.train[0].gt.coeffs, ds.test[0].gt.coeffs);
    }
}
