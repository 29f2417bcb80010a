//! Central finite-difference gradient checking.

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference<F>(x: &[f64], h: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe);
            probe[i] = orig - h;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub passed: bool,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    /// Index of the worst offending coordinate, if any failed.
    pub worst: Option<usize>,
}

/// A coordinate passes when `|a - n| <= rel_tol * max(|a|, |n|)` or
/// `|a - n| <= abs_floor`.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64], rel_tol: f64, abs_floor: f64) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let mut report = GradCheckReport {
        passed: true,
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        worst: None,
    };
    let mut worst_excess = 0.0;
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let diff = (a - n).abs();
        let scale = a.abs().max(n.abs());
        let rel = if scale > 0.0 { diff / scale } else { 0.0 };
        report.max_abs_err = report.max_abs_err.max(diff);
        if diff > abs_floor {
            report.max_rel_err = report.max_rel_err.max(rel);
        }
        let ok = diff <= abs_floor || diff <= rel_tol * scale;
        if !ok || diff.is_nan() {
            report.passed = false;
            if rel >= worst_excess || report.worst.is_none() {
                worst_excess = rel;
                report.worst = Some(i);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivative() {
        let g = central_difference(&[1.0, -2.0], 1e-5, |x| x[0] * x[0] + 3.0 * x[1]);
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn report_flags_mismatch() {
        let r = compare_gradients(&[1.0, 2.0], &[1.0, 2.1], 1e-4, 1e-6);
        assert!(!r.passed);
        assert_eq!(r.worst, Some(1));
        let r = compare_gradients(&[0.0, 1e-8], &[1e-7, 0.0], 1e-4, 1e-6);
        assert!(r.passed);
    }
}
