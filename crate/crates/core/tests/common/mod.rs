//! Reference implementations shared by the integration tests. Nothing here
//! calls into the library's special functions.

#![allow(dead_code)]

use std::f64::consts::PI;

const TAYLOR_LIMIT: f64 = 2.5;

/// erf by its Maclaurin series for small arguments and by the continued
/// fraction of erfc for large ones.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        -erf(-x)
    } else if x <= TAYLOR_LIMIT {
        taylor(x)
    } else {
        1.0 - erfc_continued_fraction(x)
    }
}

pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x <= TAYLOR_LIMIT {
        1.0 - taylor(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// `2/sqrt(pi) * exp(-x^2) * sum 2^n x^(2n+1) / (1 * 3 * ... * (2n+1))`.
/// Every term is positive, so there is no cancellation for moderate x.
fn taylor(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 1u32;
    loop {
        term *= 2.0 * x2 / (2 * n + 1) as f64;
        sum += term;
        if (n >= 30 && term < 1e-18 * sum) || n > 300 {
            break;
        }
        n += 1;
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

/// `erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`,
/// evaluated bottom-up.
fn erfc_continued_fraction(x: f64) -> f64 {
    let mut t = x;
    for k in (1..=400).rev() {
        t = x + (k as f64 / 2.0) / t;
    }
    (-x * x).exp() / PI.sqrt() / t
}

pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn rg(sigma: f64, sigma1: f64) -> f64 {
    (1.0 + (sigma1 / sigma).powi(2)).sqrt()
}

pub fn rgd(sigma: f64, sigma1: f64) -> f64 {
    erf(1.0 / (2f64.sqrt() * sigma)) / erf(1.0 / (2.0 * (sigma * sigma + sigma1 * sigma1)).sqrt())
}

pub fn mgd(sigma: f64) -> f64 {
    erf(2f64.sqrt() / sigma) / erf(1.0 / (2f64.sqrt() * sigma))
}

/// Relative error of the continuous inverse fed with the discrete ratio.
pub fn erg(sigma: f64, sigma1: f64) -> f64 {
    let r = rgd(sigma, sigma1);
    ((sigma1 / sigma) / (r * r - 1.0).sqrt() - 1.0).abs()
}

/// Blurred ideal step: `i_min + (i_max - i_min) * Phi(x / sigma)`.
pub fn step(x: f64, i_min: f64, i_max: f64, sigma: f64) -> f64 {
    i_min + (i_max - i_min) * phi(x / sigma)
}

/// Self-check against published values.
pub fn check_oracle() -> Result<(), String> {
    let known = [
        (0.5, 0.520_499_877_813_046_5),
        (1.0, 0.842_700_792_949_714_9),
        (2.0, 0.995_322_265_018_952_7),
        (3.0, 0.999_977_909_503_001_4),
    ];
    for (x, want) in known {
        let got = erf(x);
        if (got - want).abs() > 4e-16 {
            return Err(format!("oracle erf({x}) = {got}, expected {want}"));
        }
    }
    let tails = [(3.0, 2.209_049_699_858_544e-5), (5.0, 1.537_459_794_428_035e-12)];
    for (x, want) in tails {
        let got = erfc(x);
        if ((got - want) / want).abs() > 1e-13 {
            return Err(format!("oracle erfc({x}) = {got}, expected {want}"));
        }
    }
    Ok(())
}
