//! Scalar search and quadrature used by the bound evaluators.

use crate::ExtReal;

/// Result of a one-dimensional minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub arg: f64,
    pub value: ExtReal,
}

const SCAN_POINTS: usize = 241;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes `f` over `[lo, hi]`: a uniform scan brackets the best sample,
/// then golden-section refines inside the bracket until its width drops
/// below `tol · max(1, |x|)`.
///
/// `+∞` values are ordinary (largest) values, so infinite branches are never
/// returned when any finite sample exists.
pub fn golden_section_min<F>(f: F, lo: f64, hi: f64, tol: f64) -> Minimum
where
    F: Fn(f64) -> ExtReal,
{
    assert!(hi >= lo, "empty search interval");
    if hi == lo {
        return Minimum {
            arg: lo,
            value: f(lo),
        };
    }
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut best_i = 0;
    let mut best = ExtReal::PosInfinity;
    let mut best_x = lo;
    for i in 0..SCAN_POINTS {
        let x = lo + step * i as f64;
        let v = f(x);
        if v < best || i == 0 {
            best = v;
            best_i = i;
            best_x = x;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol * 1f64.max(c.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (x, v) = if fc <= fd { (c, fc) } else { (d, fd) };
    if v <= best {
        Minimum { arg: x, value: v }
    } else {
        Minimum {
            arg: best_x,
            value: best,
        }
    }
}

/// Minimizes `g(t)` over `t ∈ (lo, hi)` where the caller's variable is
/// `x = exp(t)`; the returned `arg` is `x`, not `t`.
pub fn golden_section_min_log<F>(g: F, log_lo: f64, log_hi: f64, tol: f64) -> Minimum
where
    F: Fn(f64) -> ExtReal,
{
    let m = golden_section_min(|t| g(t.exp()), log_lo, log_hi, tol);
    Minimum {
        arg: m.arg.exp(),
        value: m.value,
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to relative tolerance `tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let eps = (tol * whole.abs()).max(1e-15);
    simpson_step(&f, a, b, fa, fm, fb, whole, eps, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// `n` equispaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Numerically stable `log Σ exp(v_i)`; `-∞` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let m = golden_section_min(|x| ExtReal::Finite((x - 0.3).powi(2)), -5.0, 5.0, 1e-10);
        assert!((m.arg - 0.3).abs() < 1e-8);
    }

    #[test]
    fn golden_section_avoids_infinite_branch() {
        // 1/x on (0, 2], +inf beyond 2: minimum sits on the boundary.
        let m = golden_section_min(
            |x| if x <= 2.0 { ExtReal::Finite(1.0 / x) } else { ExtReal::PosInfinity },
            0.1,
            10.0,
            1e-12,
        );
        assert!((m.value.to_f64() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn simpson_matches_closed_form() {
        let v = adaptive_simpson(|x| x.powf(-0.5), 0.01, 1.0, 1e-10);
        assert!((v - 1.8).abs() < 1e-8, "{v}");
    }

    #[test]
    fn log_sum_exp_is_shift_stable() {
        let v = log_sum_exp(&[-800.0, -800.0]);
        assert!((v - (-800.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
