//! Real-root helpers for the low-degree polynomials arising in the solvers.

use nalgebra::DMatrix;

/// Real roots of `a x^2 + b x + c = 0`, using the numerically stable
/// formulation that avoids cancellation between `-b` and the discriminant.
/// Degrades gracefully to the linear case when `a` is (near) zero relative
/// to the other coefficients.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() < 1e-14 * scale {
        if b.abs() < 1e-14 * scale {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sd = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sd);
    if q == 0.0 {
        // b == 0 and disc == 0 (c == 0): double root at the origin.
        return vec![0.0];
    }
    let r1 = q / a;
    let r2 = c / q;
    if (r1 - r2).abs() < 1e-12 * (1.0 + r1.abs()) {
        vec![r1]
    } else {
        vec![r1, r2]
    }
}

/// Real roots of a polynomial with coefficients in descending degree order
/// (`coeffs[0] x^n + ... + coeffs[n]`), up to degree 4.
///
/// Leading near-zero coefficients are deflated; degrees 3 and 4 are solved
/// through the eigenvalues of the companion matrix, then polished with two
/// Newton steps.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut cs: Vec<f64> = coeffs.to_vec();
    while cs.len() > 1 && cs[0].abs() < 1e-13 * scale {
        cs.remove(0);
    }
    let degree = cs.len() - 1;
    match degree {
        0 => Vec::new(),
        1 => vec![-cs[1] / cs[0]],
        2 => quadratic_roots(cs[0], cs[1], cs[2]),
        _ => {
            let monic: Vec<f64> = cs[1..].iter().map(|c| c / cs[0]).collect();
            let n = monic.len();
            let mut comp = DMatrix::<f64>::zeros(n, n);
            for (j, c) in monic.iter().enumerate() {
                comp[(0, j)] = -c;
            }
            for i in 1..n {
                comp[(i, i - 1)] = 1.0;
            }
            let eigen = comp.complex_eigenvalues();
            let mut roots = Vec::with_capacity(n);
            for ev in eigen.iter() {
                if ev.im.abs() <= 1e-8 * (1.0 + ev.re.abs()) {
                    roots.push(polish(&cs, ev.re));
                }
            }
            roots
        }
    }
}

/// Two Newton refinement steps on a root estimate.
fn polish(coeffs: &[f64], mut x: f64) -> f64 {
    for _ in 0..2 {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &c in coeffs {
            dp = dp * x + p;
            p = p * x + c;
        }
        if dp.abs() < 1e-300 {
            break;
        }
        let step = p / dp;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

/// Evaluates a polynomial given in descending-degree coefficient order.
pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn quadratic_simple() {
        let r = sorted(quadratic_roots(1.0, -3.0, 2.0));
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_empty());
        let r = quadratic_roots(0.0, 2.0, -4.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_avoids_cancellation() {
        // Roots 1e-8 and 1e8: the naive formula loses the small root.
        let r = sorted(quadratic_roots(1.0, -(1e8 + 1e-8), 1.0));
        assert!((r[0] - 1e-8).abs() < 1e-16);
        assert!((r[1] - 1e8).abs() < 1e-4);
    }

    #[test]
    fn quartic_known_roots() {
        // (x-1)(x+2)(x-3)(x+4) = x^4 + 2x^3 - 13x^2 - 14x + 24
        let r = sorted(real_roots(&[1.0, 2.0, -13.0, -14.0, 24.0]));
        let expect = [-4.0, -2.0, 1.0, 3.0];
        assert_eq!(r.len(), 4);
        for (got, want) in r.iter().zip(expect) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn quartic_with_complex_pair() {
        // (x^2+1)(x-2)(x+5) = x^4 + 3x^3 - 9x^2 + 3x - 10
        let r = sorted(real_roots(&[1.0, 3.0, -9.0, 3.0, -10.0]));
        assert_eq!(r.len(), 2);
        assert!((r[0] + 5.0).abs() < 1e-9 && (r[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_all_zero() {
        assert!(real_roots(&[0.0, 0.0, 0.0, 0.0, 0.0]).is_empty());
    }

    #[test]
    fn leading_zero_deflates_to_cubic() {
        // 0 x^4 + (x-1)(x+1)(x-5)
        let r = sorted(real_roots(&[0.0, 1.0, -5.0, -1.0, 5.0]));
        assert_eq!(r.len(), 3);
        assert!((r[0] + 1.0).abs() < 1e-9 && (r[1] - 1.0).abs() < 1e-9 && (r[2] - 5.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn quartic_recovers_planted_roots(
            r1 in -50.0..50.0f64, r2 in -50.0..50.0f64,
            r3 in -50.0..50.0f64, r4 in -50.0..50.0f64,
        ) {
            prop_assume!([(r1, r2), (r1, r3), (r1, r4), (r2, r3), (r2, r4), (r3, r4)]
                .iter().all(|(a, b)| (a - b).abs() > 0.1));
            // Expand (x-r1)(x-r2)(x-r3)(x-r4).
            let e1 = r1 + r2 + r3 + r4;
            let e2 = r1*r2 + r1*r3 + r1*r4 + r2*r3 + r2*r4 + r3*r4;
            let e3 = r1*r2*r3 + r1*r2*r4 + r1*r3*r4 + r2*r3*r4;
            let e4 = r1*r2*r3*r4;
            let roots = sorted(real_roots(&[1.0, -e1, e2, -e3, e4]));
            let want = sorted(vec![r1, r2, r3, r4]);
            prop_assert_eq!(roots.len(), 4);
            for (got, expect) in roots.iter().zip(want) {
                prop_assert!((got - expect).abs() < 1e-6 * (1.0 + expect.abs()));
            }
        }
    }
}
