//! Direction-encoded color rendering: per pixel FA * |e1| maps to (R, G, B),
//! emitted as binary PPM (P6).

use crate::error::{CoreError, Result};
use crate::metrics::eig::{eig3_symmetric, fa_from_lambda};
use crate::volume::{spatial_index, BrainMask, TensorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Axial,
    Coronal,
    Sagittal,
}

impl Plane {
    pub fn name(self) -> &'static str {
        match self {
            Plane::Axial => "axial",
            Plane::Coronal => "coronal",
            Plane::Sagittal => "sagittal",
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "axial" => Ok(Plane::Axial),
            "coronal" => Ok(Plane::Coronal),
            "sagittal" => Ok(Plane::Sagittal),
            other => Err(CoreError::InvalidSpec(format!(
                "unknown plane {other:?}; expected axial, coronal or sagittal"
            ))),
        }
    }
}

/// 8-bit RGB raster, rows top to bottom, pixels left to right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// width*height*3 bytes, interleaved R, G, B.
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let off = 3 * (row * self.width + col);
        [self.pixels[off], self.pixels[off + 1], self.pixels[off + 2]]
    }

    /// Serialize as binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.pixels.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }
}

#[inline]
fn channel_byte(fa: f64, component: f64) -> u8 {
    (255.0 * fa * component.abs()).round().clamp(0.0, 255.0) as u8
}

/// Render one slice with direction-encoded color: R, G, B carry diffusion
/// along x, y, z via FA * |e1|. Voxels outside the mask are black.
///
/// Image axes: axial slices are (x wide, y tall), coronal (x, z),
/// sagittal (y, z); the second axis increases downward.
pub fn render_rgb_slice(
    field: &TensorField,
    mask: &BrainMask,
    plane: Plane,
    index: usize,
) -> Result<RgbImage> {
    field.same_dims(mask.dims, "render_rgb_slice")?;
    let [nx, ny, nz] = field.dims;
    let (width, height, max) = match plane {
        Plane::Axial => (nx, ny, nz),
        Plane::Coronal => (nx, nz, ny),
        Plane::Sagittal => (ny, nz, nx),
    };
    if index >= max {
        return Err(CoreError::PlaneIndex {
            plane: plane.name(),
            index,
            max,
        });
    }
    let mut pixels = vec![0u8; width * height * 3];
    for row in 0..height {
        for col in 0..width {
            let (x, y, z) = match plane {
                Plane::Axial => (col, row, index),
                Plane::Coronal => (col, index, row),
                Plane::Sagittal => (index, col, row),
            };
            let idx = spatial_index(field.dims, x, y, z);
            if mask.data[idx] == 0 {
                continue;
            }
            let dec = eig3_symmetric(field.tensor_at(idx))?;
            let fa = fa_from_lambda(dec.lambda);
            let off = 3 * (row * width + col);
            for c in 0..3 {
                pixels[off + c] = channel_byte(fa, dec.e[0][c]);
            }
        }
    }
    Ok(RgbImage {
        width,
        height,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_with(coeffs: [f64; 6]) -> (TensorField, BrainMask) {
        let dims = [2, 3, 4];
        let mut f = TensorField::zeros(dims, [1.0; 3]);
        let mut m = BrainMask::zeros(dims);
        let idx = spatial_index(dims, 1, 2, 3);
        f.set_tensor_at(idx, coeffs);
        m.data[idx] = 1;
        (f, m)
    }

    #[test]
    fn x_aligned_stick_is_pure_red() {
        // lambda = (1e-3, 0, 0): FA = 1, e1 = x.
        let (f, m) = field_with([1e-3, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let img = render_rgb_slice(&f, &m, Plane::Axial, 3).unwrap();
        assert_eq!(img.width, 2);
        assert_eq!(img.height, 3);
        assert_eq!(img.pixel(1, 2), [255, 0, 0]);
        assert_eq!(img.pixel(0, 0), [0, 0, 0]);
    }

    #[test]
    fn isotropic_voxel_is_black() {
        let (f, m) = field_with([1e-3, 0.0, 0.0, 1e-3, 0.0, 1e-3]);
        let img = render_rgb_slice(&f, &m, Plane::Axial, 3).unwrap();
        assert_eq!(img.pixel(1, 2), [0, 0, 0]);
    }

    #[test]
    fn diagonal_direction_splits_evenly() {
        // Construct lambda1 direction (1,1,1)/sqrt(3) with FA exactly 0.9 by
        // solving a two-distinct-eigenvalue tensor: D = a*I + b*uu^T.
        // FA for (a+b, a, a) = b / sqrt(b^2 + 3a^2 + ... ) -- instead pick
        // eigenvalues analytically: lambda = (l1, l2, l2) gives
        // FA = (l1-l2) / sqrt(l1^2 + 2*l2^2). Choose l2 = 1e-3 and solve l1.
        let l2 = 1e-3;
        let fa = 0.9f64;
        // (l1-l2)^2 = fa^2 (l1^2 + 2 l2^2): quadratic in l1, positive root.
        let a = 1.0 - fa * fa;
        let b = -2.0 * l2;
        let c = l2 * l2 * (1.0 - 2.0 * fa * fa);
        let l1 = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        let s3 = 3f64.sqrt();
        let u = [1.0 / s3, 1.0 / s3, 1.0 / s3];
        let d = |i: usize, j: usize| (if i == j { l2 } else { 0.0 }) + (l1 - l2) * u[i] * u[j];
        let coeffs = [d(0, 0), d(0, 1), d(0, 2), d(1, 1), d(1, 2), d(2, 2)];
        let (f, m) = field_with(coeffs);
        let img = render_rgb_slice(&f, &m, Plane::Axial, 3).unwrap();
        // Frozen: round(255 * 0.9 / sqrt(3)) = 133.
        assert_eq!(img.pixel(1, 2), [133, 133, 133]);
    }

    #[test]
    fn plane_axes_and_bounds() {
        let (f, m) = field_with([1e-3, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let cor = render_rgb_slice(&f, &m, Plane::Coronal, 2).unwrap();
        assert_eq!((cor.width, cor.height), (2, 4));
        assert_eq!(cor.pixel(1, 3), [255, 0, 0]);
        let sag = render_rgb_slice(&f, &m, Plane::Sagittal, 1).unwrap();
        assert_eq!((sag.width, sag.height), (3, 4));
        assert_eq!(sag.pixel(2, 3), [255, 0, 0]);
        let err = render_rgb_slice(&f, &m, Plane::Axial, 4).unwrap_err();
        assert!(matches!(
            err,
            CoreError::PlaneIndex {
                index: 4,
                max: 4,
                ..
            }
        ));
    }

    #[test]
    fn ppm_bytes() {
        let img = RgbImage {
            width: 2,
            height: 1,
            pixels: vec![255, 0, 0, 0, 128, 0],
        };
        let ppm = img.to_ppm();
        assert_eq!(&ppm[..9], b"P6\n2 1\n25");
        assert_eq!(ppm.len(), "P6\n2 1\n255\n".len() + 6);
        assert_eq!(&ppm[ppm.len() - 6..], &[255, 0, 0, 0, 128, 0]);
    }
}
