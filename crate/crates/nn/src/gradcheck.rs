//! Central-difference gradient verification shared by the unit and
//! integration test suites.

/// Outcome of a finite-difference sweep over a set of coordinates.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Largest relative error among checked coordinates.
    pub max_rel: f64,
    /// Coordinates actually compared.
    pub checked: usize,
    /// Coordinates skipped because both sides were numerically negligible.
    pub skipped: usize,
    /// Coordinates skipped because a kink sat inside the FD interval.
    pub kinked: usize,
}

/// Compares `analytic[i]` against a central difference of `eval` for every
/// index in `coords`, perturbing `point` in place (and restoring it).
///
/// Relative error is |a - n| / max(|a|, |n|). Coordinates where both the
/// analytic and numeric values fall below `tiny` carry no signal (the
/// denominator would amplify roundoff) and are counted as skipped.
///
/// With `kink_frac > 0`, a coordinate whose one-sided differences disagree by
/// more than `kink_frac` relative is treated as straddling a non-smooth point
/// (an |.| tie or a LeakyReLU kink inside [x-h, x+h]); the central difference
/// is meaningless there, so it is counted in `kinked` instead of compared.
/// For smooth coordinates the one-sided split is O(h * f''), far below any
/// sensible `kink_frac`, so genuine gradient bugs are never masked: a wrong
/// analytic value still fails against a cleanly smooth numeric estimate.
pub fn central_diff_check(
    eval: &mut dyn FnMut(&[f64]) -> f64,
    point: &mut [f64],
    analytic: &[f64],
    coords: &[usize],
    h: f64,
    tiny: f64,
    kink_frac: f64,
) -> GradCheckReport {
    assert_eq!(point.len(), analytic.len(), "gradient length mismatch");
    let f0 = if kink_frac > 0.0 { eval(point) } else { 0.0 };
    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut kinked = 0usize;
    for &i in coords {
        let saved = point[i];
        point[i] = saved + h;
        let fp = eval(point);
        point[i] = saved - h;
        let fm = eval(point);
        point[i] = saved;
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic[i];
        if a.abs() < tiny && numeric.abs() < tiny {
            skipped += 1;
            continue;
        }
        if kink_frac > 0.0 {
            let fwd = (fp - f0) / h;
            let bwd = (f0 - fm) / h;
            let scale = fwd.abs().max(bwd.abs());
            if scale > 0.0 && (fwd - bwd).abs() > kink_frac * scale {
                kinked += 1;
                continue;
            }
        }
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
        if rel > max_rel {
            max_rel = rel;
        }
        checked += 1;
    }
    GradCheckReport {
        max_rel,
        checked,
        skipped,
        kinked,
    }
}

/// Deterministically spaced sample of `count` coordinate indices in
/// `[0, len)`, always including the first and last.
pub fn sample_coords(len: usize, count: usize) -> Vec<usize> {
    assert!(len > 0);
    if count >= len {
        return (0..len).collect();
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        // Evenly spaced with exact endpoints.
        let idx = if count == 1 {
            0
        } else {
            k * (len - 1) / (count - 1)
        };
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    out
}
