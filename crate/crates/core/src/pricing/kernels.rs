//! Closed-form integrals of exponential-polynomials against e^{i alpha x}.

use num_complex::Complex64;

use crate::quadrature::gauss_legendre;

/// int_a^b x^m e^{z x} dx for m <= 3.
pub fn exp_moment(z: Complex64, m: usize, a: f64, b: f64) -> Complex64 {
    assert!(m <= 3, "moment order {m} not supported");
    let len = b - a;
    if len == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    // y = x - a, int_0^L y^j e^{z y} dy
    let mut y_mom = [Complex64::new(0.0, 0.0); 4];
    if (z * len).norm() < 1.0 {
        let (nodes, weights) = gauss_legendre(24);
        for (xi, wi) in nodes.iter().zip(&weights) {
            let y = 0.5 * len * (xi + 1.0);
            let e = (z * y).exp() * (0.5 * len * wi);
            let mut p = 1.0;
            for mom in y_mom.iter_mut().take(m + 1) {
                *mom += e * p;
                p *= y;
            }
        }
    } else {
        let ezl = (z * len).exp();
        y_mom[0] = (ezl - 1.0) / z;
        let mut lp = 1.0;
        for j in 1..=m {
            lp *= len;
            y_mom[j] = (ezl * lp - y_mom[j - 1] * j as f64) / z;
        }
    }
    // x^m = sum_j binom(m, j) a^{m-j} y^j
    let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..=m {
        acc += y_mom[j] * (binom[m][j] * a.powi((m - j) as i32));
    }
    acc * (z * a).exp()
}

/// sum_j poly_j(x) e^{rate_j x} on [a, b], polynomials of degree <= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPolyPiece {
    pub a: f64,
    pub b: f64,
    pub terms: Vec<(f64, [f64; 3])>,
}

impl ExpPolyPiece {
    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|(rate, c)| (c[0] + x * (c[1] + x * c[2])) * (rate * x).exp())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpPoly {
    pub pieces: Vec<ExpPolyPiece>,
}

impl ExpPoly {
    pub fn eval(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| x >= p.a && x < p.b)
            .map(|p| p.eval(x))
            .sum()
    }

    /// Multiply every term by e^{shift x}.
    pub fn shifted(&self, shift: f64) -> Self {
        ExpPoly {
            pieces: self
                .pieces
                .iter()
                .map(|p| ExpPolyPiece {
                    a: p.a,
                    b: p.b,
                    terms: p.terms.iter().map(|(r, c)| (r + shift, *c)).collect(),
                })
                .collect(),
        }
    }

    pub fn scaled(&self, w: f64) -> Self {
        ExpPoly {
            pieces: self
                .pieces
                .iter()
                .map(|p| ExpPolyPiece {
                    a: p.a,
                    b: p.b,
                    terms: p.terms.iter().map(|(r, c)| (*r, [w * c[0], w * c[1], w * c[2]])).collect(),
                })
                .collect(),
        }
    }

    /// (int f e^{i alpha (x - x_b)} dx, int (x - x0) f e^{i alpha (x - x_b)} dx).
    pub fn wave(&self, alpha: f64, x_b: f64, x0: f64) -> (Complex64, Complex64) {
        let phase = Complex64::new(0.0, -alpha * x_b).exp();
        let mut w0 = Complex64::new(0.0, 0.0);
        let mut w1 = Complex64::new(0.0, 0.0);
        for p in &self.pieces {
            for (rate, c) in &p.terms {
                let z = Complex64::new(*rate, alpha);
                let mom: Vec<Complex64> = (0..=3).map(|m| exp_moment(z, m, p.a, p.b)).collect();
                let i0 = mom[0] * c[0] + mom[1] * c[1] + mom[2] * c[2];
                let ix = mom[1] * c[0] + mom[2] * c[1] + mom[3] * c[2];
                w0 += i0;
                w1 += ix - i0 * x0;
            }
        }
        (w0 * phase, w1 * phase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_adaptive, QuadratureConfig};

    #[test]
    fn moments_match_quadrature() {
        let cfg = QuadratureConfig::default().with_tol(1e-14, 1e-13);
        for z in [
            Complex64::new(0.3, 0.0),
            Complex64::new(1e-9, 0.0),
            Complex64::new(-0.7, 40.0),
            Complex64::new(0.0, 0.2),
            Complex64::new(1.2, -3.0),
        ] {
            for m in 0..=3 {
                let (a, b) = (0.4, 0.95);
                let f = |x: f64| (z * x).exp() * x.powi(m as i32);
                let num = integrate_adaptive(&f, a, b, &cfg).unwrap().value;
                let closed = exp_moment(z, m, a, b);
                assert!((num - closed).norm() < 1e-12 * (1.0 + num.norm()), "z={z} m={m}: {num} vs {closed}");
            }
        }
    }

    #[test]
    fn wave_matches_quadrature() {
        let poly = ExpPoly {
            pieces: vec![
                ExpPolyPiece {
                    a: -0.2,
                    b: 0.3,
                    terms: vec![(0.5, [1.0, -2.0, 0.5])],
                },
                ExpPolyPiece {
                    a: 0.3,
                    b: 0.9,
                    terms: vec![(1.1, [0.3, 0.0, 0.0]), (-0.4, [0.0, 1.0, 0.0])],
                },
            ],
        };
        let (alpha, xb, x0) = (7.3, -0.2, 0.35);
        let (w0, w1) = poly.wave(alpha, xb, x0);
        let cfg = QuadratureConfig::default().with_tol(1e-14, 1e-13);
        let g0 = |x: f64| Complex64::new(0.0, alpha * (x - xb)).exp() * poly.eval(x);
        let g1 = |x: f64| g0(x) * (x - x0);
        let n0 = integrate_adaptive(&g0, -0.2, 0.3, &cfg).unwrap().value + integrate_adaptive(&g0, 0.3, 0.9, &cfg).unwrap().value;
        let n1 = integrate_adaptive(&g1, -0.2, 0.3, &cfg).unwrap().value + integrate_adaptive(&g1, 0.3, 0.9, &cfg).unwrap().value;
        assert!((w0 - n0).norm() < 1e-12);
        assert!((w1 - n1).norm() < 1e-12);
    }
}
