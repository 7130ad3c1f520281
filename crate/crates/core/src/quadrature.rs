//! Composite Simpson rule for integrands that are smooth between known
//! breakpoints. Each panel uses its endpoints and midpoint; endpoints lying on
//! a breakpoint are evaluated as one-sided limits from inside the panel.

use crate::curves::Side;

/// `∫_a^b f` with `panels` Simpson panels; `f` must be smooth on `(a, b)`.
pub fn simpson<F>(f: F, a: f64, b: f64, panels: usize) -> f64
where
    F: Fn(f64, Side) -> f64,
{
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let mut acc = f(a, Side::Right) + f(b, Side::Left);
    for k in 0..n {
        let left = a + h * k as f64;
        acc += 4.0 * f(left + 0.5 * h, Side::Right);
        if k > 0 {
            acc += 2.0 * f(left, Side::Right);
        }
    }
    acc * h / 6.0
}

/// Splits `[a, b]` at the interior `breakpoints` and spreads roughly
/// `total_panels` panels over the pieces in proportion to their length.
pub fn simpson_piecewise<F>(f: F, a: f64, b: f64, breakpoints: &[f64], total_panels: usize) -> f64
where
    F: Fn(f64, Side) -> f64,
{
    if b <= a {
        return 0.0;
    }
    let mut cuts = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&t| t > a && t < b));
    cuts.push(b);
    let len = b - a;
    cuts.windows(2)
        .map(|w| {
            let share = ((w[1] - w[0]) / len * total_panels as f64).ceil() as usize;
            simpson(&f, w[0], w[1], share.max(1))
        })
        .sum()
}
