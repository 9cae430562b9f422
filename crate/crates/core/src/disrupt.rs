//! Superior-slice disruption synthesis and the valid-slice budget restriction
//! used by the efficiency study.

use crate::error::{CoreError, Result};
use crate::volume::{BrainMask, DisruptionMask, TensorField};

/// Zero the topmost `round(fraction * B)` brain-intersecting axial slices,
/// where B is the number of such slices. Whole slices are zeroed across all
/// six channels; the returned mask marks only the brain voxels within them.
///
/// Rounding is half-away-from-zero (`f64::round`), so a 150-slice brain at
/// fraction 0.10 loses exactly 15 slices.
pub fn crop_superior(
    field: &TensorField,
    mask: &BrainMask,
    fraction: f64,
) -> Result<(TensorField, DisruptionMask)> {
    field.same_dims(mask.dims, "crop_superior")?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CoreError::InvalidFraction(fraction));
    }
    let brain = mask.brain_slices();
    if brain.is_empty() {
        return Err(CoreError::EmptyMask);
    }
    let n = (fraction * brain.len() as f64).round() as usize;
    let slices: Vec<usize> = brain[brain.len() - n..].to_vec();

    let mut out = field.clone();
    let [nx, ny, _] = field.dims;
    let plane = nx * ny;
    let nvox = field.nvox();
    for &z in &slices {
        for c in 0..6 {
            let start = c * nvox + z * plane;
            out.coeffs[start..start + plane].fill(0.0);
        }
    }

    let mut dmask = vec![0u8; nvox];
    for &z in &slices {
        let start = z * plane;
        dmask[start..start + plane].copy_from_slice(&mask.data[start..start + plane]);
    }
    Ok((
        out,
        DisruptionMask {
            dims: field.dims,
            data: dmask,
            slices,
            fraction,
        },
    ))
}

/// Outcome of restricting the training foreground to a slice budget.
/// The tensor data itself is never modified; only the effective mask shrinks.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedTraining {
    /// Brain voxels within the disrupted slices plus the kept valid slices.
    pub effective_mask: BrainMask,
    /// Valid (non-disrupted) brain slice indices kept, ascending.
    pub kept_valid_slices: Vec<usize>,
    pub requested_budget: usize,
    /// min(requested, available valid slices).
    pub effective_budget: usize,
    /// True when the request exceeded the available valid slices.
    pub clamped: bool,
}

/// Keep only the `budget` valid brain slices immediately inferior to the
/// disruption in the training foreground. Lower slices leave the effective
/// mask; their data stays intact. A budget beyond the available valid slices
/// clamps and flags rather than failing.
pub fn restrict_valid_budget(
    mask: &BrainMask,
    dmask: &DisruptionMask,
    budget: usize,
) -> Result<RestrictedTraining> {
    if mask.dims != dmask.dims {
        return Err(CoreError::DimMismatch {
            context: "restrict_valid_budget",
            a: mask.dims,
            b: dmask.dims,
        });
    }
    if budget == 0 {
        return Err(CoreError::InvalidSpec(
            "valid-slice budget must be >= 1".into(),
        ));
    }
    let brain = mask.brain_slices();
    if brain.is_empty() {
        return Err(CoreError::EmptyMask);
    }
    let valid: Vec<usize> = brain
        .iter()
        .copied()
        .filter(|z| !dmask.slices.contains(z))
        .collect();
    let clamped = budget > valid.len();
    let effective_budget = budget.min(valid.len());
    let kept_valid_slices: Vec<usize> = valid[valid.len() - effective_budget..].to_vec();

    let [nx, ny, _] = mask.dims;
    let plane = nx * ny;
    let mut data = vec![0u8; mask.data.len()];
    for z in dmask.slices.iter().chain(&kept_valid_slices) {
        let start = z * plane;
        data[start..start + plane].copy_from_slice(&mask.data[start..start + plane]);
    }
    Ok(RestrictedTraining {
        effective_mask: BrainMask {
            dims: mask.dims,
            data,
        },
        kept_valid_slices,
        requested_budget: budget,
        effective_budget,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::spatial_index;

    /// Brain occupying z in [lo, hi] over a small in-plane square.
    fn block_brain(dims: [usize; 3], lo: usize, hi: usize) -> (TensorField, BrainMask) {
        let mut field = TensorField::zeros(dims, [1.0; 3]);
        let mut mask = BrainMask::zeros(dims);
        for z in lo..=hi {
            for y in 1..dims[1] - 1 {
                for x in 1..dims[0] - 1 {
                    let idx = spatial_index(dims, x, y, z);
                    mask.data[idx] = 1;
                    field.set_tensor_at(idx, [1e-3, 0.0, 0.0, 1e-3, 0.0, 1e-3]);
                }
            }
        }
        (field, mask)
    }

    #[test]
    fn ten_slices_lose_one() {
        let (field, mask) = block_brain([4, 4, 12], 1, 10);
        let (out, dm) = crop_superior(&field, &mask, 0.10).unwrap();
        assert_eq!(dm.slices, vec![10]);
        assert_eq!(dm.count(), mask.slice_count(10));
        // Whole slice zeroed across every channel.
        for c in 0..6 {
            let chan = out.channel(c);
            assert!(chan[10 * 16..11 * 16].iter().all(|&v| v == 0.0));
        }
        // All other voxels bit-identical.
        let nvox = field.nvox();
        for c in 0..6 {
            for idx in 0..nvox {
                if idx / 16 != 10 {
                    assert_eq!(out.channel(c)[idx], field.channel(c)[idx]);
                }
            }
        }
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        // 15 brain slices at 0.10 -> round(1.5) = 2.
        let (field, mask) = block_brain([4, 4, 20], 2, 16);
        let (_, dm) = crop_superior(&field, &mask, 0.10).unwrap();
        assert_eq!(dm.slices, vec![15, 16]);
    }

    #[test]
    fn idempotent_on_cropped_region() {
        let (field, mask) = block_brain([4, 4, 12], 1, 10);
        let (once, dm1) = crop_superior(&field, &mask, 0.25).unwrap();
        let (twice, dm2) = crop_superior(&once, &mask, 0.25).unwrap();
        assert_eq!(once, twice);
        assert_eq!(dm1, dm2);
    }

    #[test]
    fn bad_inputs_rejected() {
        let (field, mask) = block_brain([4, 4, 12], 1, 10);
        assert!(matches!(
            crop_superior(&field, &mask, 0.0),
            Err(CoreError::InvalidFraction(_))
        ));
        assert!(matches!(
            crop_superior(&field, &mask, 1.0),
            Err(CoreError::InvalidFraction(_))
        ));
        let empty = BrainMask::zeros([4, 4, 12]);
        assert!(matches!(
            crop_superior(&field, &empty, 0.1),
            Err(CoreError::EmptyMask)
        ));
    }

    #[test]
    fn budget_keeps_slices_adjacent_to_disruption() {
        // Brain z in [2, 41] (40 slices); fraction 0.10 crops the top 4.
        let (field, mask) = block_brain([4, 4, 48], 2, 41);
        let (_, dm) = crop_superior(&field, &mask, 0.10).unwrap();
        assert_eq!(dm.slices, vec![38, 39, 40, 41]);
        let r = restrict_valid_budget(&mask, &dm, 10).unwrap();
        assert!(!r.clamped);
        assert_eq!(r.effective_budget, 10);
        assert_eq!(r.kept_valid_slices, (28..38).collect::<Vec<_>>());
        // Foreground depth = disruption + budget.
        let fg: Vec<usize> = r.effective_mask.brain_slices();
        assert_eq!(fg, (28..42).collect::<Vec<_>>());
        // Per-slice voxel counts survive inside the window, vanish below it.
        assert_eq!(r.effective_mask.slice_count(30), mask.slice_count(30));
        assert_eq!(r.effective_mask.slice_count(27), 0);
    }

    #[test]
    fn oversized_budget_clamps_to_original_mask() {
        let (field, mask) = block_brain([4, 4, 12], 1, 10);
        let (_, dm) = crop_superior(&field, &mask, 0.10).unwrap();
        let r = restrict_valid_budget(&mask, &dm, 500).unwrap();
        assert!(r.clamped);
        assert_eq!(r.effective_budget, 9);
        assert_eq!(r.effective_mask, mask);
    }

    #[test]
    fn zero_budget_is_an_error() {
        let (field, mask) = block_brain([4, 4, 12], 1, 10);
        let (_, dm) = crop_superior(&field, &mask, 0.10).unwrap();
        assert!(restrict_valid_budget(&mask, &dm, 0).is_err());
    }
}
