//! First-order correction machinery: the operator A1, its matrix elements in
//! the zeroth-order basis, and the eigen-corrections a1 / lambda1.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{classify_spectrum, Interval, MarketParams, SpectrumCase};
use crate::error::{Result, SpecVolError};
use crate::quadrature::QuadratureConfig;
use crate::spectral::{eigenpair, inner_product, EigenPair, SpectralIndex, WeightDensity};

/// V3 (d^3 - d^2) + V2 (d^2 - d).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A1Operator {
    pub v2: f64,
    pub v3: f64,
}

impl A1Operator {
    pub fn new(v2: f64, v3: f64) -> Self {
        A1Operator { v2, v3 }
    }

    /// Action given [f, f', f'', f'''].
    pub fn apply(&self, d: &[Complex64; 4]) -> Complex64 {
        (d[3] - d[2]) * self.v3 + (d[2] - d[1]) * self.v2
    }

    pub fn apply_real(&self, d: &[f64; 4]) -> f64 {
        self.v3 * (d[3] - d[2]) + self.v2 * (d[2] - d[1])
    }

    /// Symbol on exponentials: A1 e^{zx} = symbol(z) e^{zx}.
    pub fn symbol(&self, z: Complex64) -> Complex64 {
        (z * z * z - z * z) * self.v3 + (z * z - z) * self.v2
    }

    pub fn symbol_real(&self, p: f64) -> f64 {
        self.v3 * (p * p * p - p * p) + self.v2 * (p * p - p)
    }
}

/// Barrier-case constants for frequency alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreekConstants {
    pub chi: f64,
    pub eta: f64,
    pub xi: f64,
    pub gamma: f64,
}

pub fn greek_constants(c: f64, alpha: f64) -> GreekConstants {
    let a2 = alpha * alpha;
    GreekConstants {
        chi: 2.0 * c + 1.0,
        eta: a2 - (3.0 * c * c + 2.0 * c),
        xi: -a2 + (c * c + c),
        gamma: (3.0 * c + 1.0) * a2 - (c * c * c + c * c),
    }
}

/// Full-line constants beta = z^3 - z^2, zeta = z^2 - z with z = i nu - c.
pub fn beta_zeta(c: f64, nu: Complex64) -> (Complex64, Complex64) {
    let z = Complex64::i() * nu - c;
    (z * z * z - z * z, z * z - z)
}

/// Which constant multiplies V2 in the off-diagonal barrier elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingVariant {
    /// V2 chi + V3 eta_n (matches the quadrature oracle).
    #[default]
    Chi,
    /// V2 xi_n + V3 eta_n, as printed for the double-barrier case.
    Xi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixElements {
    pub case: SpectrumCase,
    pub interval: Interval,
    pub c: f64,
    pub sigma_sq: f64,
    pub v2: f64,
    pub v3: f64,
    pub variant: CouplingVariant,
}

impl MatrixElements {
    fn alpha(&self, q: SpectralIndex) -> Result<Complex64> {
        match (self.case, q) {
            (SpectrumCase::Discrete, SpectralIndex::Discrete(n)) if n >= 1 => {
                let len = self.interval.r.finite().unwrap() - self.interval.l.finite().unwrap();
                Ok(Complex64::new(n as f64 * PI / len, 0.0))
            }
            (SpectrumCase::ContinuousFullLine, SpectralIndex::Real(v)) => Ok(Complex64::new(v, 0.0)),
            (SpectrumCase::ContinuousFullLine, SpectralIndex::Complex(v)) => Ok(v),
            (SpectrumCase::ContinuousHalfLineUpper | SpectrumCase::ContinuousHalfLineLower, SpectralIndex::Real(v))
                if v >= 0.0 =>
            {
                Ok(Complex64::new(v, 0.0))
            }
            _ => Err(SpecVolError::InvalidIndex(format!("{q:?} invalid for {:?}", self.case))),
        }
    }

    /// Coupling K_q multiplying the off-diagonal kernel.
    pub fn coupling(&self, q: SpectralIndex) -> Result<f64> {
        if self.case == SpectrumCase::ContinuousFullLine {
            return Ok(0.0);
        }
        let a = self.alpha(q)?.re;
        let g = greek_constants(self.c, a);
        Ok(match self.variant {
            CouplingVariant::Chi => self.v2 * g.chi + self.v3 * g.eta,
            CouplingVariant::Xi => self.v2 * g.xi + self.v3 * g.eta,
        })
    }

    /// Off-diagonal kernel C1(m, n); zero on the diagonal.
    pub fn c1(&self, m: SpectralIndex, n: SpectralIndex) -> Result<Complex64> {
        let am = self.alpha(m)?;
        let an = self.alpha(n)?;
        if self.case == SpectrumCase::ContinuousFullLine || m == n {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let k = self.coupling(n)?;
        let (am, an) = (am.re, an.re);
        let val = match self.case {
            SpectrumCase::Discrete => {
                let (SpectralIndex::Discrete(mi), SpectralIndex::Discrete(ni)) = (m, n) else {
                    unreachable!()
                };
                let parity = if (mi + ni) % 2 == 0 { 0.0 } else { -2.0 };
                let len = self.interval.r.finite().unwrap() - self.interval.l.finite().unwrap();
                parity * 2.0 * am * an / (len * (am * am - an * an)) * k
            }
            SpectrumCase::ContinuousHalfLineUpper => 2.0 * am * an / (PI * (am * am - an * an)) * k,
            SpectrumCase::ContinuousHalfLineLower => -2.0 * am * an / (PI * (am * am - an * an)) * k,
            SpectrumCase::ContinuousFullLine => 0.0,
        };
        Ok(Complex64::new(val, 0.0))
    }

    /// Diagonal part D1(n) = lambda1_n.
    pub fn d1(&self, n: SpectralIndex) -> Result<Complex64> {
        let a = self.alpha(n)?;
        match self.case {
            SpectrumCase::ContinuousFullLine => {
                let (b, z) = beta_zeta(self.c, a);
                Ok(b * self.v3 + z * self.v2)
            }
            _ => {
                let g = greek_constants(self.c, a.re);
                Ok(Complex64::new(self.v2 * g.xi + self.v3 * g.gamma, 0.0))
            }
        }
    }

    pub fn lambda0(&self, q: SpectralIndex) -> Result<Complex64> {
        let a = self.alpha(q)?;
        Ok(-(self.sigma_sq / 2.0) * (self.c * self.c + a * a))
    }

    /// Anchor x0 of the closed-form correction Psi1 = (K/sigma^2)(x - x0) Psi0.
    pub fn correction_anchor(&self) -> f64 {
        match self.case {
            SpectrumCase::Discrete => 0.5 * (self.interval.l.finite().unwrap() + self.interval.r.finite().unwrap()),
            SpectrumCase::ContinuousHalfLineUpper => self.interval.r.finite().unwrap(),
            SpectrumCase::ContinuousHalfLineLower => self.interval.l.finite().unwrap(),
            SpectrumCase::ContinuousFullLine => 0.0,
        }
    }

    /// Scaled copy, (V2, V3) -> (w V2, w V3).
    pub fn scaled(&self, w: f64) -> Self {
        MatrixElements {
            v2: w * self.v2,
            v3: w * self.v3,
            ..*self
        }
    }
}

pub fn matrix_elements(
    case: SpectrumCase,
    interval: &Interval,
    params: &MarketParams,
    v2: f64,
    v3: f64,
) -> Result<MatrixElements> {
    matrix_elements_with(case, interval, params, v2, v3, CouplingVariant::Chi)
}

pub fn matrix_elements_with(
    case: SpectrumCase,
    interval: &Interval,
    params: &MarketParams,
    v2: f64,
    v3: f64,
    variant: CouplingVariant,
) -> Result<MatrixElements> {
    params.validate()?;
    if classify_spectrum(interval)? != case {
        return Err(SpecVolError::UnsupportedCase(format!("interval {interval} is not of case {case:?}")));
    }
    if !(v2.is_finite() && v3.is_finite()) {
        return Err(SpecVolError::InvalidParams("group parameters must be finite".into()));
    }
    Ok(MatrixElements {
        case,
        interval: *interval,
        c: params.c(),
        sigma_sq: params.sigma_sq,
        v2,
        v3,
        variant,
    })
}

/// (Psi_m, A1 Psi_n)_s by quadrature, using the closed-form derivatives.
/// Only meaningful for the discrete case; the continuous ones are distributional.
#[allow(clippy::too_many_arguments)]
pub fn matrix_elements_numeric(
    case: SpectrumCase,
    interval: &Interval,
    params: &MarketParams,
    v2: f64,
    v3: f64,
    m: usize,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    if case != SpectrumCase::Discrete {
        return Err(SpecVolError::UnsupportedCase(
            "numeric matrix elements need a finite interval".into(),
        ));
    }
    let pm = eigenpair(case, interval, params, SpectralIndex::Discrete(m))?;
    let pn = eigenpair(case, interval, params, SpectralIndex::Discrete(n))?;
    let op = A1Operator::new(v2, v3);
    let w = WeightDensity::new(params);
    Ok(inner_product(|x| pm.psi(x), |x| op.apply(&pn.derivs(x)), interval, &w, cfg)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCorrection {
    /// a1_{q,p}: coefficient of Psi_p in Psi1_q.
    pub a1: Complex64,
    pub lambda1: Complex64,
}

pub fn eigen_correction(me: &MatrixElements, q: SpectralIndex, p: SpectralIndex) -> Result<EigenCorrection> {
    let lambda1 = me.d1(q)?;
    if q == p {
        return Ok(EigenCorrection {
            a1: Complex64::new(0.0, 0.0),
            lambda1,
        });
    }
    let gap = me.lambda0(q)? - me.lambda0(p)?;
    if gap.norm() == 0.0 {
        return Err(SpecVolError::Degeneracy(format!("lambda0 equal for {q:?} and {p:?}")));
    }
    Ok(EigenCorrection {
        a1: me.c1(p, q)? / gap,
        lambda1,
    })
}

/// Closed-form first-order eigenfunction correction.
///
/// Psi1_q(x) = (K_q / sigma^2) (x - x0) Psi0_q(x) solves
/// (L0 - lambda0) Psi1 = (lambda1 - A1) Psi0 with zero boundary values and no
/// Psi0_q component; its expansion coefficients are a1_{q,p}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderEigen {
    pub pair: EigenPair,
    pub kappa: f64,
    pub anchor: f64,
    pub lambda1: Complex64,
}

impl FirstOrderEigen {
    pub fn new(me: &MatrixElements, pair: EigenPair) -> Result<Self> {
        let kappa = me.coupling(pair.index)? / me.sigma_sq;
        Ok(FirstOrderEigen {
            pair,
            kappa,
            anchor: me.correction_anchor(),
            lambda1: me.d1(pair.index)?,
        })
    }

    pub fn psi1(&self, x: f64) -> Complex64 {
        if self.kappa == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.pair.psi(x) * (self.kappa * (x - self.anchor))
    }

    /// Psi1 and its first two derivatives.
    pub fn psi1_derivs(&self, x: f64) -> [Complex64; 3] {
        let d = self.pair.derivs(x);
        let y = x - self.anchor;
        let k = self.kappa;
        [d[0] * (k * y), (d[1] * y + d[0]) * k, (d[2] * y + d[1] * 2.0) * k]
    }
}

/// Truncated series sum_{p <= m_max, p != n} a1_{n,p} Psi_p(x).
pub fn psi1_series(me: &MatrixElements, n: usize, x: f64, m_max: usize) -> Result<f64> {
    let mut acc = 0.0;
    for p in 1..=m_max {
        if p == n {
            continue;
        }
        let a = eigen_correction(me, SpectralIndex::Discrete(n), SpectralIndex::Discrete(p))?.a1.re;
        if a == 0.0 {
            continue;
        }
        let params = MarketParams {
            mu: (me.c + 0.5) * me.sigma_sq,
            sigma_sq: me.sigma_sq,
            v2_eps: 0.0,
            v3_eps: 0.0,
            eps: None,
        };
        let e = eigenpair(me.case, &me.interval, &params, SpectralIndex::Discrete(p))?;
        acc += a * e.psi_real(x);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MarketParams {
        MarketParams::new(0.05, 0.34 * 0.34, 0.0, 0.0).unwrap()
    }

    fn db() -> Interval {
        Interval::finite(1.5f64.ln(), 2.5f64.ln()).unwrap()
    }

    #[test]
    fn beta_example() {
        let (b, z) = beta_zeta(0.0, Complex64::new(1.0, 0.0));
        assert!((b - Complex64::new(1.0, -1.0)).norm() < 1e-15);
        assert!((z - Complex64::new(-1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn even_parity_vanishes_and_zero_params() {
        let me = matrix_elements(SpectrumCase::Discrete, &db(), &params(), 0.3, -0.2).unwrap();
        assert_eq!(me.c1(SpectralIndex::Discrete(1), SpectralIndex::Discrete(3)).unwrap().re, 0.0);
        assert_ne!(me.c1(SpectralIndex::Discrete(1), SpectralIndex::Discrete(2)).unwrap().re, 0.0);
        let zero = matrix_elements(SpectrumCase::Discrete, &db(), &params(), 0.0, 0.0).unwrap();
        for m in 1..5 {
            for n in 1..5 {
                let (mi, ni) = (SpectralIndex::Discrete(m), SpectralIndex::Discrete(n));
                assert_eq!(zero.c1(mi, ni).unwrap().norm(), 0.0);
                assert_eq!(zero.d1(ni).unwrap().norm(), 0.0);
                let ec = eigen_correction(&zero, ni, mi).unwrap();
                assert_eq!(ec.a1.norm() + ec.lambda1.norm(), 0.0);
            }
        }
    }

    #[test]
    fn full_line_has_no_off_diagonal() {
        let me = matrix_elements(SpectrumCase::ContinuousFullLine, &Interval::full_line(), &params(), 0.3, 0.1).unwrap();
        let nu = SpectralIndex::Real(1.3);
        assert_eq!(me.c1(SpectralIndex::Real(0.4), nu).unwrap().norm(), 0.0);
        let (b, z) = beta_zeta(me.c, Complex64::new(1.3, 0.0));
        assert!((me.d1(nu).unwrap() - (b * 0.1 + z * 0.3)).norm() < 1e-15);
        let ec = eigen_correction(&me, nu, SpectralIndex::Real(0.4)).unwrap();
        assert_eq!(ec.a1.norm(), 0.0);
    }

    #[test]
    fn full_line_conjugate_symmetry() {
        let me = matrix_elements(SpectrumCase::ContinuousFullLine, &Interval::full_line(), &params(), 0.7, -0.4).unwrap();
        for nu in [0.1, 1.0, 3.7] {
            let a = me.d1(SpectralIndex::Real(nu)).unwrap();
            let b = me.d1(SpectralIndex::Real(-nu)).unwrap();
            assert!((a - b.conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn closed_form_matches_quadrature_small() {
        let p = params();
        let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-12);
        let me = matrix_elements(SpectrumCase::Discrete, &db(), &p, 0.2, 0.1).unwrap();
        for (m, n) in [(1, 2), (2, 1), (3, 3), (2, 5)] {
            let num = matrix_elements_numeric(SpectrumCase::Discrete, &db(), &p, 0.2, 0.1, m, n, &cfg).unwrap();
            let closed = if m == n {
                me.d1(SpectralIndex::Discrete(n)).unwrap()
            } else {
                me.c1(SpectralIndex::Discrete(m), SpectralIndex::Discrete(n)).unwrap()
            };
            assert!((num - closed).norm() < 1e-7 * (1.0 + closed.norm()), "({m},{n}): {num} vs {closed}");
        }
    }

    #[test]
    fn xi_variant_disagrees_with_quadrature() {
        let p = params();
        let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-12);
        let me = matrix_elements_with(SpectrumCase::Discrete, &db(), &p, 0.2, 0.0, CouplingVariant::Xi).unwrap();
        let num = matrix_elements_numeric(SpectrumCase::Discrete, &db(), &p, 0.2, 0.0, 1, 2, &cfg).unwrap();
        let closed = me.c1(SpectralIndex::Discrete(1), SpectralIndex::Discrete(2)).unwrap();
        assert!((num - closed).norm() > 1e-3 * num.norm());
    }

    #[test]
    fn closed_psi1_equals_series() {
        let p = params();
        let me = matrix_elements(SpectrumCase::Discrete, &db(), &p, 0.2, 0.1).unwrap();
        let e = eigenpair(SpectrumCase::Discrete, &db(), &p, SpectralIndex::Discrete(2)).unwrap();
        let fo = FirstOrderEigen::new(&me, e).unwrap();
        for x in [0.45, 0.6, 0.8] {
            let closed = fo.psi1(x).re;
            // coefficients decay like p^-3, so the tail after M terms is O(M^-2)
            let s1 = psi1_series(&me, 2, x, 2000).unwrap();
            let s2 = psi1_series(&me, 2, x, 4000).unwrap();
            let rich = (4.0 * s2 - s1) / 3.0;
            assert!((rich - closed).abs() < 1e-7 * (1.0 + closed.abs()), "{x}: {rich} vs {closed}");
        }
    }

    #[test]
    fn closed_psi1_solves_correction_equation() {
        // (L0 - lambda0) Psi1 = (lambda1 - A1) Psi0 for all barrier cases
        let p = params();
        let s2 = p.sigma_sq;
        let drift = p.mu - 0.5 * s2;
        let cases = [
            (SpectrumCase::Discrete, db(), SpectralIndex::Discrete(3), 0.6),
            (SpectrumCase::ContinuousHalfLineUpper, Interval::below(0.9).unwrap(), SpectralIndex::Real(2.2), 0.1),
            (SpectrumCase::ContinuousHalfLineLower, Interval::above(-0.3).unwrap(), SpectralIndex::Real(1.7), 0.4),
        ];
        for (case, iv, q, x) in cases {
            let me = matrix_elements(case, &iv, &p, 0.3, -0.5).unwrap();
            let e = eigenpair(case, &iv, &p, q).unwrap();
            let fo = FirstOrderEigen::new(&me, e).unwrap();
            let d = fo.psi1_derivs(x);
            let lhs = d[1] * drift + d[2] * (0.5 * s2) - d[0] * e.lambda0;
            let rhs = e.psi(x) * fo.lambda1 - A1Operator::new(0.3, -0.5).apply(&e.derivs(x));
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()), "{case:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn half_line_kernel_matches_closed_anchor() {
        // a1_{nu,omega} from C1 / (lambda_nu - lambda_omega) equals the printed kernel
        let p = params();
        let iv = Interval::below(0.9).unwrap();
        let me = matrix_elements(SpectrumCase::ContinuousHalfLineUpper, &iv, &p, 0.3, 0.2).unwrap();
        let (nu, om) = (1.3, 2.9);
        let a = eigen_correction(&me, SpectralIndex::Real(nu), SpectralIndex::Real(om)).unwrap().a1.re;
        let k = me.coupling(SpectralIndex::Real(nu)).unwrap();
        let printed = (2.0 / p.sigma_sq) * 2.0 * om * nu / (PI * (om * om - nu * nu).powi(2)) * k;
        assert!((a - printed).abs() < 1e-14 * printed.abs());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn linear_in_group_parameters(v2 in -1.0f64..1.0, v3 in -1.0f64..1.0, w in -3.0f64..3.0, m in 1usize..12, n in 1usize..12) {
                let me = matrix_elements(SpectrumCase::Discrete, &db(), &params(), v2, v3).unwrap();
                let ms = me.scaled(w);
                let (mi, ni) = (SpectralIndex::Discrete(m), SpectralIndex::Discrete(n));
                let c = me.c1(mi, ni).unwrap().re;
                let d = me.d1(ni).unwrap().re;
                prop_assert!((ms.c1(mi, ni).unwrap().re - w * c).abs() <= 1e-12 * (1.0 + c.abs()));
                prop_assert!((ms.d1(ni).unwrap().re - w * d).abs() <= 1e-12 * (1.0 + d.abs()));
                let a = eigen_correction(&me, ni, mi).unwrap().a1.re;
                let aw = eigen_correction(&ms, ni, mi).unwrap().a1.re;
                prop_assert!((aw - w * a).abs() <= 1e-12 * (1.0 + a.abs()));
            }

            #[test]
            fn a1_vanishes_on_diagonal(n in 1usize..40) {
                let me = matrix_elements(SpectrumCase::Discrete, &db(), &params(), 0.4, 0.9).unwrap();
                let i = SpectralIndex::Discrete(n);
                prop_assert_eq!(eigen_correction(&me, i, i).unwrap().a1.norm(), 0.0);
            }
        }
    }
}
