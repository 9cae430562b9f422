//! Spatial resampling: 2x2x2 average pooling down, trilinear doubling up.
//! Both are linear maps; the backward passes are their exact adjoints.

use crate::error::{NnError, Result};
use crate::tensor::LayerTensor;

/// 2x2x2 average pooling; every spatial dim must be even.
pub fn downsample2(x: &LayerTensor) -> Result<LayerTensor> {
    let [nx, ny, nz] = x.dims;
    if nx % 2 != 0 || ny % 2 != 0 || nz % 2 != 0 {
        return Err(NnError::OddDims { dims: x.dims });
    }
    let (ox, oy, oz) = (nx / 2, ny / 2, nz / 2);
    let mut out = LayerTensor::zeros(x.channels, [ox, oy, oz]);
    for c in 0..x.channels {
        let src = x.channel(c);
        let dst = out.channel_mut(c);
        for z in 0..oz {
            for y in 0..oy {
                for xo in 0..ox {
                    let mut s = 0.0;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            let base = nx * ((2 * y + dy) + ny * (2 * z + dz)) + 2 * xo;
                            s += src[base] + src[base + 1];
                        }
                    }
                    dst[xo + ox * (y + oy * z)] = s / 8.0;
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of downsample2: spread each output gradient evenly over its 8
/// source voxels.
pub fn downsample2_backward(gout: &LayerTensor) -> LayerTensor {
    let [ox, oy, oz] = gout.dims;
    let (nx, ny, nz) = (2 * ox, 2 * oy, 2 * oz);
    let mut gin = LayerTensor::zeros(gout.channels, [nx, ny, nz]);
    for c in 0..gout.channels {
        let src = gout.channel(c);
        let dst = gin.channel_mut(c);
        for z in 0..oz {
            for y in 0..oy {
                for xo in 0..ox {
                    let g = src[xo + ox * (y + oy * z)] / 8.0;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            let base = nx * ((2 * y + dy) + ny * (2 * z + dz)) + 2 * xo;
                            dst[base] += g;
                            dst[base + 1] += g;
                        }
                    }
                }
            }
        }
    }
    gin
}

/// One separable doubling pass along an axis, half-voxel aligned: output cell
/// centers sit at source coordinate j/2 - 1/4, so
/// out[2i] = 0.25*in[i-1] + 0.75*in[i] and out[2i+1] = 0.75*in[i] + 0.25*in[i+1],
/// with indices clamped at the edges.
fn double_axis(data: &[f64], dims: [usize; 3], axis: usize) -> (Vec<f64>, [usize; 3]) {
    let mut odims = dims;
    odims[axis] *= 2;
    let n = dims[axis];
    let mut out = vec![0.0f64; odims[0] * odims[1] * odims[2]];
    // Iterate lines along `axis`; (su, sv) index the other two axes.
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let stride_of = |d: [usize; 3], ax: usize| -> usize {
        match ax {
            0 => 1,
            1 => d[0],
            _ => d[0] * d[1],
        }
    };
    let (is, ius, ivs) = (
        stride_of(dims, axis),
        stride_of(dims, u),
        stride_of(dims, v),
    );
    let (os, ous, ovs) = (
        stride_of(odims, axis),
        stride_of(odims, u),
        stride_of(odims, v),
    );
    for vv in 0..dims[v] {
        for uu in 0..dims[u] {
            let ibase = uu * ius + vv * ivs;
            let obase = uu * ous + vv * ovs;
            for i in 0..n {
                let prev = i.saturating_sub(1);
                let next = (i + 1).min(n - 1);
                let c = data[ibase + i * is];
                let lo = 0.25 * data[ibase + prev * is] + 0.75 * c;
                let hi = 0.75 * c + 0.25 * data[ibase + next * is];
                out[obase + (2 * i) * os] = lo;
                out[obase + (2 * i + 1) * os] = hi;
            }
        }
    }
    (out, odims)
}

/// Adjoint of double_axis: scatter output weights back to the sources.
fn double_axis_adjoint(gout: &[f64], odims: [usize; 3], axis: usize) -> (Vec<f64>, [usize; 3]) {
    let mut idims = odims;
    idims[axis] /= 2;
    let n = idims[axis];
    let mut gin = vec![0.0f64; idims[0] * idims[1] * idims[2]];
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let stride_of = |d: [usize; 3], ax: usize| -> usize {
        match ax {
            0 => 1,
            1 => d[0],
            _ => d[0] * d[1],
        }
    };
    let (is, ius, ivs) = (
        stride_of(idims, axis),
        stride_of(idims, u),
        stride_of(idims, v),
    );
    let (os, ous, ovs) = (
        stride_of(odims, axis),
        stride_of(odims, u),
        stride_of(odims, v),
    );
    for vv in 0..idims[v] {
        for uu in 0..idims[u] {
            let ibase = uu * ius + vv * ivs;
            let obase = uu * ous + vv * ovs;
            for i in 0..n {
                let prev = i.saturating_sub(1);
                let next = (i + 1).min(n - 1);
                let glo = gout[obase + (2 * i) * os];
                let ghi = gout[obase + (2 * i + 1) * os];
                gin[ibase + prev * is] += 0.25 * glo;
                gin[ibase + i * is] += 0.75 * glo + 0.75 * ghi;
                gin[ibase + next * is] += 0.25 * ghi;
            }
        }
    }
    (gin, idims)
}

/// Trilinear doubling of every spatial dim (separable x, then y, then z).
pub fn upsample2(x: &LayerTensor) -> LayerTensor {
    let nvox_out = 8 * x.nvox();
    let mut out = LayerTensor::zeros(x.channels, [2 * x.dims[0], 2 * x.dims[1], 2 * x.dims[2]]);
    for c in 0..x.channels {
        let (a, d1) = double_axis(x.channel(c), x.dims, 0);
        let (b, d2) = double_axis(&a, d1, 1);
        let (f, d3) = double_axis(&b, d2, 2);
        debug_assert_eq!(d3, out.dims);
        debug_assert_eq!(f.len(), nvox_out);
        out.channel_mut(c).copy_from_slice(&f);
    }
    out
}

/// Exact adjoint of upsample2 (axes undone in reverse order).
pub fn upsample2_backward(gout: &LayerTensor) -> LayerTensor {
    let idims = [gout.dims[0] / 2, gout.dims[1] / 2, gout.dims[2] / 2];
    let mut gin = LayerTensor::zeros(gout.channels, idims);
    for c in 0..gout.channels {
        let (a, d1) = double_axis_adjoint(gout.channel(c), gout.dims, 2);
        let (b, d2) = double_axis_adjoint(&a, d1, 1);
        let (f, d3) = double_axis_adjoint(&b, d2, 0);
        debug_assert_eq!(d3, idims);
        gin.channel_mut(c).copy_from_slice(&f);
    }
    gin
}

#[cfg(test)]
mod tests {
    use super::*;
    use dti_core::CounterRng;

    #[test]
    fn constants_preserved() {
        let x = LayerTensor::from_vec(2, [2, 4, 2], vec![3.5; 32]);
        let up = upsample2(&x);
        assert_eq!(up.dims, [4, 8, 4]);
        assert!(up.data.iter().all(|&v| (v - 3.5).abs() < 1e-15));
        let down = downsample2(&up).unwrap();
        assert_eq!(down.dims, x.dims);
        assert!(down.data.iter().all(|&v| (v - 3.5).abs() < 1e-15));
    }

    #[test]
    fn odd_dims_rejected_for_pooling() {
        let x = LayerTensor::zeros(1, [3, 4, 4]);
        assert!(matches!(downsample2(&x), Err(NnError::OddDims { .. })));
    }

    #[test]
    fn pooling_matches_hand_values() {
        let x = LayerTensor::from_vec(1, [2, 2, 2], (1..=8).map(f64::from).collect());
        let d = downsample2(&x).unwrap();
        assert_eq!(d.data, vec![4.5]);
    }

    #[test]
    fn upsample_matches_direct_trilinear_oracle() {
        // Independent oracle: for each output voxel evaluate the trilinear
        // formula at source coordinate (j + 0.5)/2 - 0.5 with edge clamping,
        // using the full 8-corner weighting rather than separable passes.
        let dims = [4, 3, 2];
        let mut rng = CounterRng::new(11);
        let data: Vec<f64> = (0..dims[0] * dims[1] * dims[2])
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect();
        let x = LayerTensor::from_vec(1, dims, data.clone());
        let up = upsample2(&x);
        let at = |xi: i64, yi: i64, zi: i64| -> f64 {
            let cx = xi.clamp(0, dims[0] as i64 - 1) as usize;
            let cy = yi.clamp(0, dims[1] as i64 - 1) as usize;
            let cz = zi.clamp(0, dims[2] as i64 - 1) as usize;
            data[cx + dims[0] * (cy + dims[1] * cz)]
        };
        for z in 0..2 * dims[2] {
            for y in 0..2 * dims[1] {
                for xo in 0..2 * dims[0] {
                    let src = |j: usize| (j as f64 + 0.5) / 2.0 - 0.5;
                    let (sx, sy, sz) = (src(xo), src(y), src(z));
                    let (fx, fy, fz) = (sx.floor(), sy.floor(), sz.floor());
                    let (tx, ty, tz) = (sx - fx, sy - fy, sz - fz);
                    let mut acc = 0.0;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let w = (if dx == 0 { 1.0 - tx } else { tx })
                                    * (if dy == 0 { 1.0 - ty } else { ty })
                                    * (if dz == 0 { 1.0 - tz } else { tz });
                                acc += w * at(fx as i64 + dx, fy as i64 + dy, fz as i64 + dz);
                            }
                        }
                    }
                    let got = up.channel(0)[xo + 2 * dims[0] * (y + 2 * dims[1] * z)];
                    assert!(
                        (got - acc).abs() < 1e-12,
                        "mismatch at ({xo},{y},{z}): {got} vs {acc}"
                    );
                }
            }
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        // <up(x), y> must equal <x, up_backward(y)> for a linear op and its
        // exact adjoint; same for pooling.
        let mut rng = CounterRng::new(3);
        let x = LayerTensor::from_vec(
            2,
            [4, 2, 2],
            (0..32).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let y = LayerTensor::from_vec(
            2,
            [8, 4, 4],
            (0..256).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let up = upsample2(&x);
        let lhs: f64 = up.data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let adj = upsample2_backward(&y);
        let rhs: f64 = x.data.iter().zip(&adj.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);

        let yd = LayerTensor::from_vec(
            2,
            [2, 1, 1],
            (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let down = downsample2(&x).unwrap();
        let lhs2: f64 = down.data.iter().zip(&yd.data).map(|(a, b)| a * b).sum();
        let adj2 = downsample2_backward(&yd);
        let rhs2: f64 = x.data.iter().zip(&adj2.data).map(|(a, b)| a * b).sum();
        assert!((lhs2 - rhs2).abs() < 1e-12);
    }
}
