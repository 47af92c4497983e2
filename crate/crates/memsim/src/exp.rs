//! Shift-and-add exponential: `x` is decomposed greedily into terms
//! `ln(1 + 2^-i)`, so the result is a product of `(1 + 2^-i)` factors.

fn term(i: usize) -> f64 {
    (1.0 + (-(i as f64)).exp2()).ln()
}

/// Largest argument the decomposition covers with unlimited iterations.
pub fn exp_range() -> f64 {
    (0..64).map(term).sum()
}

pub fn exp_unit(x: f64, iterations: usize) -> f64 {
    assert!(x.is_finite(), "exp_unit needs a finite input");
    if x < 0.0 {
        return 1.0 / exp_unit(-x, iterations);
    }
    let range = exp_range();
    let mut k = 0;
    let mut y = x;
    while y > range {
        y /= 2.0;
        k += 1;
    }
    let mut acc = 1.0;
    for i in 0..iterations {
        let t = term(i);
        if y >= t {
            y -= t;
            acc *= 1.0 + (-(i as f64)).exp2();
        }
    }
    for _ in 0..k {
        acc *= acc;
    }
    acc
}
