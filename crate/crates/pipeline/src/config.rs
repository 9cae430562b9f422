//! Typed run configuration shared by the training, ablation and sweep
//! harnesses, plus the patch-profile grammar used on the command line.

use dti_nn::{ModelConfig, ModelVariant};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// A named patch geometry: spatial patch extent and the overlap between
/// neighbouring patches along each axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchProfile {
    pub name: String,
    pub patch: [usize; 3],
    pub overlap: [usize; 3],
}

impl PatchProfile {
    /// Desk-scale default: 16^3 patches with half overlap, sized for the
    /// synthetic phantoms and the small model profile.
    pub fn tiny() -> Self {
        PatchProfile {
            name: "tiny".into(),
            patch: [16, 16, 16],
            overlap: [8, 8, 8],
        }
    }

    /// The two desk-scale sweep geometries: a flat profile (half-depth
    /// patches) and a cubic one, mirroring the flat-versus-cubic contrast of
    /// the full-scale profiles at a size that fits the synthetic phantoms.
    pub fn desk_sweep_profiles() -> Vec<Self> {
        vec![
            PatchProfile::parse("16x16x8").expect("static profile"),
            PatchProfile::parse("16x16x16").expect("static profile"),
        ]
    }

    /// Parse a profile name: `tiny`, a named full-scale profile such as
    /// `64x64x32` or `64x64x64`, a generic `AxBxC` (overlap defaults to half
    /// the patch per axis), or an explicit `AxBxC/DxExF` patch/overlap pair.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "tiny" {
            return Ok(PatchProfile::tiny());
        }
        let bad = |why: &str| PipelineError::BadConfig(format!("patch profile '{s}': {why}"));
        let (patch_part, overlap_part) = match s.split_once('/') {
            Some((p, o)) => (p, Some(o)),
            None => (s, None),
        };
        let patch = parse_triplet(patch_part).ok_or_else(|| bad("expected AxBxC dims"))?;
        if patch.contains(&0) {
            return Err(bad("patch dims must be positive"));
        }
        let overlap = match overlap_part {
            Some(o) => parse_triplet(o).ok_or_else(|| bad("expected AxBxC overlap"))?,
            None => [patch[0] / 2, patch[1] / 2, patch[2] / 2],
        };
        for axis in 0..3 {
            if overlap[axis] >= patch[axis] {
                return Err(bad("overlap must be smaller than the patch"));
            }
        }
        Ok(PatchProfile {
            name: s.to_string(),
            patch,
            overlap,
        })
    }

    pub fn stride(&self) -> [usize; 3] {
        [
            self.patch[0] - self.overlap[0],
            self.patch[1] - self.overlap[1],
            self.patch[2] - self.overlap[2],
        ]
    }
}

/// Parse an `AxBxC` dimension triplet such as `48x56x48`.
pub fn parse_dims(s: &str) -> Result<[usize; 3]> {
    parse_triplet(s)
        .filter(|d| d.iter().all(|&v| v > 0))
        .ok_or_else(|| PipelineError::BadConfig(format!("bad dims '{s}': expected AxBxC")))
}

fn parse_triplet(s: &str) -> Option<[usize; 3]> {
    let mut it = s.split('x');
    let a = it.next()?.parse().ok()?;
    let b = it.next()?.parse().ok()?;
    let c = it.next()?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some([a, b, c])
}

/// Hyperparameters and geometry for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Patches per optimizer step; gradients are averaged over the batch.
    pub batch: usize,
    pub profile: PatchProfile,
    pub seed: u64,
    /// Valid-slice budget for the efficiency study; `None` trains on the
    /// whole brain foreground.
    pub budget: Option<usize>,
    pub variant: ModelVariant,
    /// Network size profile. Its seed field is overridden by `seed` when the
    /// model is built, so one knob controls the whole run.
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            lr: 1e-3,
            batch: 4,
            profile: PatchProfile::tiny(),
            seed: 42,
            budget: None,
            variant: ModelVariant::Full,
            model: ModelConfig::tiny(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(PipelineError::BadConfig("epochs must be >= 1".into()));
        }
        if self.batch == 0 {
            return Err(PipelineError::BadConfig("batch must be >= 1".into()));
        }
        if self.lr < 0.0 || !self.lr.is_finite() {
            return Err(PipelineError::BadConfig(format!(
                "learning rate {} must be finite and >= 0",
                self.lr
            )));
        }
        if let Some(b) = self.budget {
            if b == 0 {
                return Err(PipelineError::BadConfig(
                    "valid-slice budget must be >= 1".into(),
                ));
            }
            if b < self.profile.patch[2] {
                log::warn!(
                    "valid-slice budget {b} is below the patch depth {}; \
                     training patches will always straddle the disruption",
                    self.profile.patch[2]
                );
            }
        }
        self.model.validate().map_err(PipelineError::Nn)?;
        Ok(())
    }

    /// The model configuration actually used for building: the run seed
    /// replaces whatever the profile carried.
    pub fn model_for_run(&self) -> ModelConfig {
        let mut m = self.model.clone();
        m.seed = self.seed;
        m
    }
}
