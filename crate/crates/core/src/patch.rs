//! Overlapping 3D patch extraction and mean-blended reconstruction.

use crate::error::{CoreError, Result};
use crate::volume::{spatial_index, voxel_count, BrainMask, DisruptionMask, TensorField};

/// Channels in an extracted patch payload: six tensor coefficients plus the
/// brain-mask channel.
pub const PATCH_CHANNELS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchFlags {
    pub contains_brain: bool,
    pub contains_disruption: bool,
}

/// Full origin enumeration for a volume/patch/stride combination. Patches are
/// retained (given payloads, expected predictions) iff they contain brain.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub patch: [usize; 3],
    pub stride: [usize; 3],
    pub origins: Vec<[usize; 3]>,
    pub flags: Vec<PatchFlags>,
}

impl PatchGrid {
    /// Origins of retained patches in enumeration order.
    pub fn retained(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.origins
            .iter()
            .zip(&self.flags)
            .filter(|(_, f)| f.contains_brain)
            .map(|(&o, _)| o)
    }

    pub fn retained_count(&self) -> usize {
        self.flags.iter().filter(|f| f.contains_brain).count()
    }

    pub fn patch_voxels(&self) -> usize {
        voxel_count(self.patch)
    }
}

/// One retained patch: origin plus a channel-major payload
/// (6 coefficient channels then the mask channel, x-fastest within each).
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub origin: [usize; 3],
    pub contains_disruption: bool,
    pub data: Vec<f64>,
}

/// Origins along one axis: stride multiples that fit, plus a flush tail at
/// `dim - patch` when the last multiple is not already flush.
pub fn axis_origins(dim: usize, patch: usize, stride: usize) -> Vec<usize> {
    debug_assert!(patch <= dim && stride >= 1);
    let mut origins: Vec<usize> = (0..)
        .step_by(stride)
        .take_while(|o| o + patch <= dim)
        .collect();
    let flush = dim - patch;
    if *origins.last().unwrap() != flush {
        origins.push(flush);
    }
    origins
}

fn validate_geometry(
    dims: [usize; 3],
    patch: [usize; 3],
    overlap: [usize; 3],
) -> Result<[usize; 3]> {
    for axis in 0..3 {
        if patch[axis] == 0 || patch[axis] > dims[axis] {
            return Err(CoreError::PatchTooLarge { patch, dims });
        }
        if overlap[axis] >= patch[axis] {
            return Err(CoreError::InvalidOverlap { overlap, patch });
        }
    }
    Ok([
        patch[0] - overlap[0],
        patch[1] - overlap[1],
        patch[2] - overlap[2],
    ])
}

/// Enumerate the patch grid and extract payloads for brain-containing
/// patches. Background-only candidates stay in the grid (flagged) but get no
/// payload and expect no prediction.
pub fn extract_patches(
    field: &TensorField,
    mask: &BrainMask,
    dmask: &DisruptionMask,
    patch: [usize; 3],
    overlap: [usize; 3],
) -> Result<(PatchGrid, Vec<Patch>)> {
    field.same_dims(mask.dims, "extract_patches")?;
    field.same_dims(dmask.dims, "extract_patches")?;
    let stride = validate_geometry(field.dims, patch, overlap)?;
    let ox = axis_origins(field.dims[0], patch[0], stride[0]);
    let oy = axis_origins(field.dims[1], patch[1], stride[1]);
    let oz = axis_origins(field.dims[2], patch[2], stride[2]);

    let pvox = voxel_count(patch);
    let mask_f64: Vec<f64> = mask.data.iter().map(|&v| v as f64).collect();
    let mut origins = Vec::with_capacity(ox.len() * oy.len() * oz.len());
    let mut flags = Vec::with_capacity(origins.capacity());
    let mut patches = Vec::new();
    // z-outer enumeration order is part of the reconstruction contract.
    for &z0 in &oz {
        for &y0 in &oy {
            for &x0 in &ox {
                let origin = [x0, y0, z0];
                let mut brain = false;
                let mut disrupted = false;
                for z in z0..z0 + patch[2] {
                    for y in y0..y0 + patch[1] {
                        let row = spatial_index(field.dims, x0, y, z);
                        let mrow = &mask.data[row..row + patch[0]];
                        let drow = &dmask.data[row..row + patch[0]];
                        brain |= mrow.iter().any(|&v| v != 0);
                        disrupted |= drow.iter().any(|&v| v != 0);
                    }
                }
                origins.push(origin);
                flags.push(PatchFlags {
                    contains_brain: brain,
                    contains_disruption: disrupted,
                });
                if !brain {
                    continue;
                }
                let mut data = vec![0.0f64; PATCH_CHANNELS * pvox];
                for c in 0..6 {
                    let src = field.channel(c);
                    copy_block(
                        src,
                        field.dims,
                        origin,
                        patch,
                        &mut data[c * pvox..(c + 1) * pvox],
                    );
                }
                copy_block(&mask_f64, field.dims, origin, patch, &mut data[6 * pvox..]);
                patches.push(Patch {
                    origin,
                    contains_disruption: disrupted,
                    data,
                });
            }
        }
    }
    Ok((
        PatchGrid {
            dims: field.dims,
            voxel_size: field.voxel_size,
            patch,
            stride,
            origins,
            flags,
        },
        patches,
    ))
}

fn copy_block(
    src: &[f64],
    dims: [usize; 3],
    origin: [usize; 3],
    patch: [usize; 3],
    dst: &mut [f64],
) {
    let [px, py, pz] = patch;
    for z in 0..pz {
        for y in 0..py {
            let s = spatial_index(dims, origin[0], origin[1] + y, origin[2] + z);
            let d = px * (y + py * z);
            dst[d..d + px].copy_from_slice(&src[s..s + px]);
        }
    }
}

/// Blend per-patch predictions (6 channels each, patch layout) back into a
/// full volume: covered voxels take the mean of all covering predictions in
/// enumeration order, uncovered voxels copy the disrupted input.
pub fn reconstruct_volume(
    grid: &PatchGrid,
    predictions: &[Vec<f64>],
    input: &TensorField,
) -> Result<TensorField> {
    input.same_dims(grid.dims, "reconstruct_volume")?;
    let retained = grid.retained_count();
    if predictions.len() != retained {
        return Err(CoreError::MissingPrediction(
            predictions.len().min(retained),
        ));
    }
    let pvox = grid.patch_voxels();
    let expected = 6 * pvox;
    for (i, p) in predictions.iter().enumerate() {
        if p.len() != expected {
            return Err(CoreError::PredictionShape {
                index: i,
                got: p.len(),
                expected,
            });
        }
    }

    let nvox = input.nvox();
    let mut sum = vec![0.0f64; 6 * nvox];
    let mut count = vec![0u32; nvox];
    let [px, py, pz] = grid.patch;
    for (origin, pred) in grid.retained().zip(predictions) {
        for z in 0..pz {
            for y in 0..py {
                let s = spatial_index(grid.dims, origin[0], origin[1] + y, origin[2] + z);
                let d = px * (y + py * z);
                for c in 0..6 {
                    let dst = &mut sum[c * nvox + s..c * nvox + s + px];
                    let srcr = &pred[c * pvox + d..c * pvox + d + px];
                    for (a, b) in dst.iter_mut().zip(srcr) {
                        *a += *b;
                    }
                }
                for cnt in &mut count[s..s + px] {
                    *cnt += 1;
                }
            }
        }
    }
    let mut out = input.clone();
    for c in 0..6 {
        let chan = out.channel_mut(c);
        for idx in 0..nvox {
            if count[idx] > 0 {
                chan[idx] = sum[c * nvox + idx] / count[idx] as f64;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_dmask(dims: [usize; 3]) -> DisruptionMask {
        DisruptionMask {
            dims,
            data: vec![0; voxel_count(dims)],
            slices: vec![],
            fraction: 0.1,
        }
    }

    fn ramp_field(dims: [usize; 3]) -> TensorField {
        let nvox = voxel_count(dims);
        let coeffs = (0..6 * nvox).map(|i| i as f64 * 1e-5).collect();
        TensorField::new(dims, [1.0; 3], coeffs)
    }

    #[test]
    fn axis_origin_examples() {
        assert_eq!(axis_origins(64, 64, 32), vec![0]);
        assert_eq!(axis_origins(96, 64, 32), vec![0, 32]);
        assert_eq!(axis_origins(48, 32, 16), vec![0, 16]);
        assert_eq!(axis_origins(145, 64, 32), vec![0, 32, 64, 81]);
    }

    #[test]
    fn eight_patch_grid() {
        let dims = [96, 96, 48];
        let field = TensorField::zeros(dims, [1.0; 3]);
        let mask = BrainMask::new(dims, vec![1; voxel_count(dims)]);
        let (grid, patches) = extract_patches(
            &field,
            &mask,
            &empty_dmask(dims),
            [64, 64, 32],
            [32, 32, 16],
        )
        .unwrap();
        assert_eq!(grid.origins.len(), 8);
        assert_eq!(patches.len(), 8);
        assert_eq!(grid.stride, [32, 32, 16]);
    }

    #[test]
    fn background_patches_dropped_but_enumerated() {
        // Brain confined to the low-x half: the x=4 origin column is empty.
        let dims = [8, 4, 4];
        let field = ramp_field(dims);
        let mut mask = BrainMask::zeros(dims);
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..3 {
                    mask.data[spatial_index(dims, x, y, z)] = 1;
                }
            }
        }
        let (grid, patches) =
            extract_patches(&field, &mask, &empty_dmask(dims), [4, 4, 4], [0, 0, 0]).unwrap();
        assert_eq!(grid.origins.len(), 2);
        assert_eq!(patches.len(), 1);
        assert_eq!(patches[0].origin, [0, 0, 0]);
        assert!(grid.flags[0].contains_brain && !grid.flags[1].contains_brain);
    }

    #[test]
    fn payload_carries_mask_channel() {
        let dims = [4, 4, 4];
        let field = ramp_field(dims);
        let mut mask = BrainMask::zeros(dims);
        mask.data[spatial_index(dims, 2, 1, 3)] = 1;
        let (_, patches) =
            extract_patches(&field, &mask, &empty_dmask(dims), [4, 4, 4], [0, 0, 0]).unwrap();
        let p = &patches[0];
        let pvox = 64;
        assert_eq!(p.data.len(), PATCH_CHANNELS * pvox);
        let mask_chan = &p.data[6 * pvox..];
        assert_eq!(mask_chan.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(mask_chan[spatial_index([4, 4, 4], 2, 1, 3)], 1.0);
        // Coefficient channels match the source field block.
        assert_eq!(&p.data[..pvox], field.channel(0));
    }

    #[test]
    fn disruption_flag_set_only_where_it_overlaps() {
        let dims = [8, 4, 4];
        let field = ramp_field(dims);
        let mask = BrainMask::new(dims, vec![1; voxel_count(dims)]);
        let mut dmask = empty_dmask(dims);
        dmask.data[spatial_index(dims, 6, 0, 0)] = 1;
        let (grid, patches) = extract_patches(&field, &mask, &dmask, [4, 4, 4], [0, 0, 0]).unwrap();
        assert!(!grid.flags[0].contains_disruption);
        assert!(grid.flags[1].contains_disruption);
        assert!(!patches[0].contains_disruption && patches[1].contains_disruption);
    }

    #[test]
    fn geometry_errors() {
        let dims = [4, 4, 4];
        let field = ramp_field(dims);
        let mask = BrainMask::new(dims, vec![1; voxel_count(dims)]);
        assert!(matches!(
            extract_patches(&field, &mask, &empty_dmask(dims), [5, 4, 4], [0, 0, 0]),
            Err(CoreError::PatchTooLarge { .. })
        ));
        assert!(matches!(
            extract_patches(&field, &mask, &empty_dmask(dims), [4, 4, 4], [0, 4, 0]),
            Err(CoreError::InvalidOverlap { .. })
        ));
    }

    #[test]
    fn identity_round_trip_is_exact() {
        let dims = [10, 6, 6];
        let field = ramp_field(dims);
        let mask = BrainMask::new(dims, vec![1; voxel_count(dims)]);
        let (grid, patches) =
            extract_patches(&field, &mask, &empty_dmask(dims), [4, 4, 4], [2, 2, 2]).unwrap();
        let preds: Vec<Vec<f64>> = patches
            .iter()
            .map(|p| p.data[..6 * grid.patch_voxels()].to_vec())
            .collect();
        let rec = reconstruct_volume(&grid, &preds, &field).unwrap();
        for c in 0..6 {
            for (a, b) in rec.channel(c).iter().zip(field.channel(c)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn overlap_mean_of_two() {
        // Two 2-wide patches overlapping on x=1 of a 3-voxel row.
        let dims = [3, 1, 1];
        let field = TensorField::zeros(dims, [1.0; 3]);
        let mask = BrainMask::new(dims, vec![1; 3]);
        let (grid, _) =
            extract_patches(&field, &mask, &empty_dmask(dims), [2, 1, 1], [1, 0, 0]).unwrap();
        assert_eq!(grid.origins, vec![[0, 0, 0], [1, 0, 0]]);
        let mut p0 = vec![0.0; 12];
        let mut p1 = vec![0.0; 12];
        p0[1] = 4.0; // channel 0, x=1 of patch at origin 0
        p1[0] = 2.0; // channel 0, x=0 of patch at origin 1
        let rec = reconstruct_volume(&grid, &[p0, p1], &field).unwrap();
        assert_eq!(rec.channel(0)[1], 3.0);
    }

    #[test]
    fn uncovered_voxels_copy_input() {
        // Mask only in the first patch; second origin dropped, so its
        // exclusive voxels fall back to the input field.
        let dims = [8, 4, 4];
        let field = ramp_field(dims);
        let mut mask = BrainMask::zeros(dims);
        mask.data[spatial_index(dims, 1, 1, 1)] = 1;
        let (grid, patches) =
            extract_patches(&field, &mask, &empty_dmask(dims), [4, 4, 4], [0, 0, 0]).unwrap();
        let preds: Vec<Vec<f64>> = patches.iter().map(|_| vec![7.0; 6 * 64]).collect();
        let rec = reconstruct_volume(&grid, &preds, &field).unwrap();
        assert_eq!(rec.channel(0)[spatial_index(dims, 2, 2, 2)], 7.0);
        let idx = spatial_index(dims, 6, 2, 2);
        assert_eq!(rec.channel(0)[idx], field.channel(0)[idx]);
    }

    #[test]
    fn prediction_bookkeeping_errors() {
        let dims = [4, 4, 4];
        let field = ramp_field(dims);
        let mask = BrainMask::new(dims, vec![1; voxel_count(dims)]);
        let (grid, _) =
            extract_patches(&field, &mask, &empty_dmask(dims), [4, 4, 4], [0, 0, 0]).unwrap();
        assert!(matches!(
            reconstruct_volume(&grid, &[], &field),
            Err(CoreError::MissingPrediction(_))
        ));
        let bad = vec![vec![0.0; 5]];
        assert!(matches!(
            reconstruct_volume(&grid, &bad, &field),
            Err(CoreError::PredictionShape { .. })
        ));
    }
}
