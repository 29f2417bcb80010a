//! Special functions.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_factorials() {
        let mut fact = 1.0f64;
        for n in 1..60u32 {
            // Gamma(n) = (n-1)!
            let got = ln_gamma(n as f64);
            assert!((got - fact.ln()).abs() < 1e-10 * fact.ln().abs().max(1.0), "n={n}");
            fact *= n as f64;
        }
    }

    #[test]
    fn half_integer_and_small() {
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-13);
        // Gamma(x) ~ 1/x - euler_gamma as x -> 0
        let x: f64 = 1e-4;
        let approx = (1.0 / x - 0.577_215_664_901_532_9).ln();
        assert!((ln_gamma(x) - approx).abs() < 1e-7);
    }

    #[test]
    fn recurrence_holds() {
        for &x in &[0.01, 0.3, 1.7, 12.25, 480.5] {
            let lhs = ln_gamma(x + 1.0);
            let rhs = ln_gamma(x) + f64::ln(x);
            assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0), "x={x}");
        }
    }
}
