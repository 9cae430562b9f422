//! Grid coverage and round-trip properties over randomized geometries.

use dti_core::patch::{axis_origins, extract_patches, reconstruct_volume};
use dti_core::volume::voxel_count;
use dti_core::{BrainMask, DisruptionMask, TensorField};
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = ([usize; 3], [usize; 3], [usize; 3])> {
    // dims per axis in 1..=18, patch in 1..=dim, overlap in 0..patch.
    let axis = (1usize..=18).prop_flat_map(|dim| {
        (Just(dim), 1..=dim).prop_flat_map(|(dim, patch)| (Just(dim), Just(patch), 0..patch))
    });
    (axis.clone(), axis.clone(), axis)
        .prop_map(|(x, y, z)| ([x.0, y.0, z.0], [x.1, y.1, z.1], [x.2, y.2, z.2]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_voxel_covered_and_origins_flush((dims, patch, overlap) in geometry()) {
        for axis in 0..3 {
            let origins = axis_origins(dims[axis], patch[axis], patch[axis] - overlap[axis]);
            // In-bounds and flush tail.
            prop_assert!(origins.iter().all(|&o| o + patch[axis] <= dims[axis]));
            prop_assert_eq!(*origins.last().unwrap(), dims[axis] - patch[axis]);
            prop_assert!(origins.windows(2).all(|w| w[0] < w[1]));
            // Coverage along the axis.
            let mut covered = vec![false; dims[axis]];
            for &o in &origins {
                for c in covered.iter_mut().skip(o).take(patch[axis]) {
                    *c = true;
                }
            }
            prop_assert!(covered.iter().all(|&c| c));
        }
    }

    #[test]
    fn identity_round_trip_within_1e12((dims, patch, overlap) in geometry()) {
        let nvox = voxel_count(dims);
        let coeffs: Vec<f64> = (0..6 * nvox).map(|i| (i as f64).sin() * 4e-3).collect();
        let field = TensorField::new(dims, [1.0; 3], coeffs);
        let mask = BrainMask::new(dims, vec![1; nvox]);
        let dmask = DisruptionMask {
            dims,
            data: vec![0; nvox],
            slices: vec![],
            fraction: 0.1,
        };
        let (grid, patches) = extract_patches(&field, &mask, &dmask, patch, overlap).unwrap();
        let preds: Vec<Vec<f64>> = patches
            .iter()
            .map(|p| p.data[..6 * grid.patch_voxels()].to_vec())
            .collect();
        let rec = reconstruct_volume(&grid, &preds, &field).unwrap();
        for c in 0..6 {
            for (a, b) in rec.channel(c).iter().zip(field.channel(c)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
