//! Symmetric proper losses for class-probability estimation.
//!
//! Every loss is described by its pointwise Bayes risk `phi`, normalized so
//! that `phi(1/2) = 1` and `phi(0) = phi(1) = 0`. The M-alpha family
//! interpolates between the 0/1 risk (`alpha = 0`) and the Matsushita risk
//! `2 sqrt(u (1 - u))` (`alpha = 1`):
//!
//! ```text
//! phi_alpha(u) = 2 (alpha sqrt(u (1 - u)) + (1 - alpha) min(u, 1 - u))
//! ```
//!
//! From `phi` we derive the canonical link `-phi'`, its inverse, the convex
//! surrogate `psi(z) = (-phi)*(-z)`, the curvature `-phi''`, the perspective
//! `v phi(u / v)` and the closed-form sensitivity bounds of the per-leaf
//! splitting criterion.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Slack accepted on probability arguments before reporting a domain error.
const PROB_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    /// The M-alpha loss, `alpha` in `[0, 1]`.
    MAlpha(f64),
    /// Log loss, Bayes risk is the binary entropy in bits.
    Log,
    /// Square loss, Bayes risk `4 u (1 - u)`.
    Square,
    /// 0/1 loss, Bayes risk `2 min(u, 1 - u)`. Same as `MAlpha(0.0)`.
    ZeroOne,
}

impl LossSpec {
    pub const MATSUSHITA: LossSpec = LossSpec::MAlpha(1.0);

    pub fn m_alpha(alpha: f64) -> Result<Self> {
        let spec = LossSpec::MAlpha(alpha);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::MAlpha(a) if !(0.0..=1.0).contains(&a) => Err(Error::domain(format!("alpha {a} outside [0, 1]"))),
            _ => Ok(()),
        }
    }

    /// The Matsushita weight `alpha` carried by the loss: 0 for the 0/1 loss,
    /// `None` for the classical smooth losses.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            LossSpec::MAlpha(a) => Some(a),
            LossSpec::ZeroOne => Some(0.0),
            LossSpec::Log | LossSpec::Square => None,
        }
    }

    /// Pointwise Bayes risk `phi(q)`.
    pub fn bayes_risk(&self, q: f64) -> Result<f64> {
        let q = check_unit(q, "bayes_risk")?;
        Ok(self.phi(q))
    }

    /// Unchecked Bayes risk for hot loops; `q` must already lie in `[0, 1]`.
    #[inline]
    pub(crate) fn phi(&self, q: f64) -> f64 {
        match *self {
            LossSpec::MAlpha(a) => 2.0 * (a * (q * (1.0 - q)).sqrt() + (1.0 - a) * q.min(1.0 - q)),
            LossSpec::ZeroOne => 2.0 * q.min(1.0 - q),
            LossSpec::Square => 4.0 * q * (1.0 - q),
            LossSpec::Log => (xlogx_neg(q) + xlogx_neg(1.0 - q)) / LN_2,
        }
    }

    /// Canonical link `-phi'(u)`.
    ///
    /// For `alpha < 1` the M-alpha link is set-valued at `u = 1/2`, where the
    /// subdifferential is `2 (1 - alpha) [-1, 1]`; the midpoint 0 is returned.
    pub fn canonical_link(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("canonical_link needs u in (0, 1), got {u}")));
        }
        Ok(self.link_unchecked(u))
    }

    #[inline]
    pub(crate) fn link_unchecked(&self, u: f64) -> f64 {
        match *self {
            LossSpec::MAlpha(a) => m_alpha_link(a, u),
            LossSpec::ZeroOne => m_alpha_link(0.0, u),
            LossSpec::Square => 8.0 * u - 4.0,
            LossSpec::Log => (u / (1.0 - u)).ln() / LN_2,
        }
    }

    /// The full subdifferential of `-phi` at `u`, as a closed interval.
    /// Degenerate (`lo == hi`) everywhere except at `u = 1/2` for the
    /// non-differentiable members of the M-alpha family.
    pub fn canonical_link_interval(&self, u: f64) -> Result<(f64, f64)> {
        let v = self.canonical_link(u)?;
        match self.alpha() {
            Some(a) if u == 0.5 && a < 1.0 => {
                let half_width = 2.0 * (1.0 - a);
                Ok((-half_width, half_width))
            }
            _ => Ok((v, v)),
        }
    }

    /// Inverse canonical link, total on the real line.
    ///
    /// For the M-alpha family the inverse is flat at 1/2 on the band
    /// `|z| <= 2 (1 - alpha)`.
    pub fn inverse_link(&self, z: f64) -> f64 {
        match *self {
            LossSpec::MAlpha(a) => m_alpha_inverse_link(a, z),
            LossSpec::ZeroOne => m_alpha_inverse_link(0.0, z),
            LossSpec::Square => ((z + 4.0) / 8.0).clamp(0.0, 1.0),
            LossSpec::Log => 1.0 / (1.0 + (-z).exp2()),
        }
    }

    /// Convex surrogate `psi(z) = (-phi)*(-z)`; `psi(0) = 1`, non-increasing.
    pub fn surrogate(&self, z: f64) -> f64 {
        match *self {
            LossSpec::MAlpha(a) => m_alpha_surrogate(a, z),
            LossSpec::ZeroOne => m_alpha_surrogate(0.0, z),
            LossSpec::Square => {
                if z <= -4.0 {
                    -z
                } else if z >= 4.0 {
                    0.0
                } else {
                    (4.0 - z) * (4.0 - z) / 16.0
                }
            }
            // log2(1 + 2^-z), written to avoid overflow for large |z|
            LossSpec::Log => {
                let t = -z;
                if t > 0.0 {
                    t + (1.0 + (-t).exp2()).log2()
                } else {
                    (1.0 + t.exp2()).log2()
                }
            }
        }
    }

    /// Perspective `v phi(u / v)` of the Bayes risk.
    ///
    /// Callers query `0 <= u <= v`. The recession value at `v = 0` is never
    /// needed and is reported as 0.
    pub fn perspective_at(&self, u: f64, v: f64) -> Result<f64> {
        if u < 0.0 || v < 0.0 || !u.is_finite() || !v.is_finite() {
            return Err(Error::domain(format!("perspective needs u, v >= 0, got ({u}, {v})")));
        }
        if u > v {
            return Err(Error::domain(format!("perspective needs u <= v, got ({u}, {v})")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        Ok(v * self.phi(u / v))
    }

    /// Closed-form sensitivity bound of the per-leaf criterion
    /// `w(leaf) phi(w1(leaf) / w(leaf))` on samples of size `m`.
    ///
    /// M-alpha: `3 + 2 alpha (sqrt(m) - 1)`. Classical losses:
    /// `max(3, 1 + D(m))` with `D` equal to `2 sqrt(m)` (Matsushita),
    /// `(1 + ln(m + 1)) / ln 2` (log), `4 m / (m + 1)` (square) and 2 (0/1).
    pub fn sensitivity_bound(&self, m: usize) -> f64 {
        let m = m.max(1) as f64;
        match *self {
            LossSpec::MAlpha(a) => 3.0 + 2.0 * a * (m.sqrt() - 1.0),
            LossSpec::ZeroOne => 3.0,
            LossSpec::Square => f64::max(3.0, 1.0 + 4.0 * m / (m + 1.0)),
            LossSpec::Log => f64::max(3.0, 1.0 + (1.0 + (m + 1.0).ln()) / LN_2),
        }
    }

    /// The closed-form value `D(m)` bounding `perspective_at(1, m + 1)`
    /// for the classical losses (equality except for the log loss, where it
    /// is an upper bound).
    pub fn perspective_closed_form(&self, m: usize) -> f64 {
        let m = m as f64;
        match *self {
            LossSpec::MAlpha(a) => a * 2.0 * m.sqrt() + (1.0 - a) * 2.0,
            LossSpec::ZeroOne => 2.0,
            LossSpec::Square => 4.0 * m / (m + 1.0),
            LossSpec::Log => (1.0 + (m + 1.0).ln()) / LN_2,
        }
    }

    /// Weight function `-phi''(u)`. The 0/1 part contributes 0 (its kink at
    /// 1/2 is not a curvature query).
    pub fn curvature(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("curvature needs u in (0, 1), got {u}")));
        }
        let g = u * (1.0 - u);
        Ok(match *self {
            LossSpec::MAlpha(a) => a * 0.5 * g.powf(-1.5),
            LossSpec::ZeroOne => 0.0,
            LossSpec::Square => 8.0,
            LossSpec::Log => 1.0 / (g * LN_2),
        })
    }
}

fn check_unit(q: f64, what: &str) -> Result<f64> {
    if !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&q) {
        return Err(Error::domain(format!("{what} needs q in [0, 1], got {q}")));
    }
    Ok(q.clamp(0.0, 1.0))
}

#[inline]
fn xlogx_neg(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

#[inline]
fn m_alpha_link(a: f64, u: f64) -> f64 {
    let smooth = if a > 0.0 {
        a * (2.0 * u - 1.0) / (u * (1.0 - u)).sqrt()
    } else {
        0.0
    };
    let step = if u < 0.5 {
        1.0
    } else if u > 0.5 {
        -1.0
    } else {
        0.0
    };
    smooth - 2.0 * (1.0 - a) * step
}

#[inline]
fn m_alpha_inverse_link(a: f64, z: f64) -> f64 {
    let band = 2.0 * (1.0 - a);
    if z.abs() <= band {
        return 0.5;
    }
    let excess = z.abs() / 2.0 - (1.0 - a);
    let ratio = excess / (a * a + excess * excess).sqrt();
    (0.5 * (1.0 + z.signum() * ratio)).clamp(0.0, 1.0)
}

#[inline]
fn m_alpha_surrogate(a: f64, z: f64) -> f64 {
    let band = 2.0 * (1.0 - a);
    let base = 1.0 - z / 2.0;
    if z.abs() <= band {
        return base;
    }
    let excess = z.abs() / 2.0 - (1.0 - a);
    base + ((a * a + excess * excess).sqrt() - a)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [LossSpec; 6] = [
        LossSpec::MAlpha(0.0),
        LossSpec::MAlpha(0.3),
        LossSpec::MAlpha(1.0),
        LossSpec::Log,
        LossSpec::Square,
        LossSpec::ZeroOne,
    ];

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Numeric Legendre conjugate `sup_u {z u + phi(u)}` by grid search with
    /// local refinement; independent of the closed forms under test.
    fn conjugate_oracle(spec: LossSpec, z: f64) -> f64 {
        let f = |u: f64| z * u + spec.phi(u);
        let n = 20_000;
        let mut best = (0usize, f(0.0));
        for i in 0..=n {
            let v = f(i as f64 / n as f64);
            if v > best.1 {
                best = (i, v);
            }
        }
        let (mut lo, mut hi) = (
            (best.0.saturating_sub(1)) as f64 / n as f64,
            ((best.0 + 1).min(n)) as f64 / n as f64,
        );
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        f((lo + hi) / 2.0).max(best.1)
    }

    #[test]
    fn bayes_risk_examples() {
        assert!(close(LossSpec::MAlpha(0.7).bayes_risk(0.5).unwrap(), 1.0, 1e-15));
        assert_eq!(LossSpec::MAlpha(0.3).bayes_risk(0.0).unwrap(), 0.0);
        // 0.5 * 2 sqrt(0.1875) + 0.5 * 2 * 0.25
        let v = LossSpec::MAlpha(0.5).bayes_risk(0.25).unwrap();
        assert!(close(v, 0.683_012_701_892_219_3, 1e-12), "{v}");
    }

    #[test]
    fn normalization_and_fairness() {
        for spec in ALL {
            assert!(close(spec.bayes_risk(0.5).unwrap(), 1.0, 1e-15), "{spec:?}");
            assert_eq!(spec.bayes_risk(0.0).unwrap(), 0.0, "{spec:?}");
            assert_eq!(spec.bayes_risk(1.0).unwrap(), 0.0, "{spec:?}");
        }
    }

    #[test]
    fn bayes_risk_rejects_out_of_range() {
        assert!(LossSpec::Log.bayes_risk(1.1).is_err());
        assert!(LossSpec::Log.bayes_risk(-1e-6).is_err());
        assert!(LossSpec::Log.bayes_risk(f64::NAN).is_err());
        assert_eq!(LossSpec::Square.bayes_risk(1.0 + 1e-13).unwrap(), 0.0);
        assert!(LossSpec::m_alpha(1.5).is_err());
    }

    #[test]
    fn canonical_link_examples() {
        assert_eq!(LossSpec::MATSUSHITA.canonical_link(0.5).unwrap(), 0.0);
        assert!(close(LossSpec::MATSUSHITA.canonical_link(0.8).unwrap(), 1.5, 1e-12));
        assert_eq!(LossSpec::MAlpha(0.0).canonical_link(0.3).unwrap(), -2.0);
        assert!(LossSpec::MATSUSHITA.canonical_link(0.0).is_err());
        assert!(LossSpec::MATSUSHITA.canonical_link(1.0).is_err());
    }

    #[test]
    fn link_interval_at_half() {
        let (lo, hi) = LossSpec::MAlpha(0.25).canonical_link_interval(0.5).unwrap();
        assert_eq!((lo, hi), (-1.5, 1.5));
        let (lo, hi) = LossSpec::MATSUSHITA.canonical_link_interval(0.5).unwrap();
        assert_eq!((lo, hi), (0.0, 0.0));
    }

    #[test]
    fn inverse_link_examples() {
        assert_eq!(LossSpec::MAlpha(0.4).inverse_link(0.0), 0.5);
        assert!(close(
            LossSpec::MATSUSHITA.inverse_link(2.0),
            0.853_553_390_593_273_7,
            1e-12
        ));
        assert_eq!(LossSpec::MAlpha(0.5).inverse_link(1.0), 0.5);
        assert!(close(
            LossSpec::MAlpha(0.3).inverse_link(3.0),
            0.968_164_588_784_522_3,
            1e-12
        ));
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(LossSpec::MAlpha(0.2).surrogate(0.0), 1.0);
        assert!(close(LossSpec::MATSUSHITA.surrogate(2.0), 2f64.sqrt() - 1.0, 1e-12));
        assert!(close(LossSpec::MAlpha(0.0).surrogate(3.0), 0.0, 1e-15));
        for z in [-3.0, -0.5, 0.0, 1.7, 4.0] {
            let mat = (1.0 + z * z / 4.0_f64).sqrt() - z / 2.0;
            assert!(close(LossSpec::MATSUSHITA.surrogate(z), mat, 1e-12));
        }
    }

    #[test]
    fn surrogate_matches_numeric_conjugate() {
        for spec in ALL {
            for z in [-6.0, -2.5, -1.0, -0.2, 0.0, 0.4, 1.9, 3.0, 7.5] {
                let oracle = conjugate_oracle(spec, -z);
                let got = spec.surrogate(z);
                assert!(close(got, oracle, 1e-7), "{spec:?} z={z}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn perspective_examples() {
        let v = LossSpec::MATSUSHITA.perspective_at(1.0, 4.0).unwrap();
        assert!(close(v, 2.0 * 3f64.sqrt(), 1e-12));
        let v = LossSpec::Square.perspective_at(1.0, 6.0).unwrap();
        assert!(close(v, 10.0 / 3.0, 1e-12));
        let v = LossSpec::ZeroOne.perspective_at(1.0, 100.0).unwrap();
        assert!(close(v, 2.0, 1e-12));
        assert_eq!(LossSpec::Log.perspective_at(0.0, 0.0).unwrap(), 0.0);
        assert!(LossSpec::Log.perspective_at(2.0, 1.0).is_err());
    }

    #[test]
    fn sensitivity_bound_examples() {
        assert_eq!(LossSpec::MAlpha(0.0).sensitivity_bound(1000), 3.0);
        assert!(close(LossSpec::MATSUSHITA.sensitivity_bound(100), 21.0, 1e-12));
        assert!(close(LossSpec::Log.sensitivity_bound(7), 5.442_695_040_888_963, 1e-12));
        assert_eq!(LossSpec::ZeroOne.sensitivity_bound(50), 3.0);
    }

    #[test]
    fn sensitivity_bound_monotone() {
        for spec in ALL {
            let mut prev = 0.0;
            for m in 1..500 {
                let b = spec.sensitivity_bound(m);
                assert!(b >= prev, "{spec:?} at m={m}");
                prev = b;
            }
        }
        for m in [1, 5, 80] {
            let mut prev = 0.0;
            for i in 0..=20 {
                let b = LossSpec::MAlpha(i as f64 / 20.0).sensitivity_bound(m);
                assert!(b >= prev);
                prev = b;
            }
        }
    }

    #[test]
    fn curvature_examples() {
        // 4u(1-u) has constant second derivative -8
        assert_eq!(LossSpec::Square.curvature(0.3).unwrap(), 8.0);
        assert!(close(LossSpec::MATSUSHITA.curvature(0.5).unwrap(), 4.0, 1e-12));
        assert_eq!(LossSpec::ZeroOne.curvature(0.3).unwrap(), 0.0);
        assert!(LossSpec::Log.curvature(1.0).is_err());
    }

    #[test]
    fn curvature_matches_finite_differences() {
        let h = 1e-4;
        for spec in [
            LossSpec::MATSUSHITA,
            LossSpec::MAlpha(0.6),
            LossSpec::Log,
            LossSpec::Square,
        ] {
            for u in [0.1, 0.27, 0.62, 0.9] {
                let fd = -(spec.phi(u + h) - 2.0 * spec.phi(u) + spec.phi(u - h)) / (h * h);
                let c = spec.curvature(u).unwrap();
                assert!((fd - c).abs() <= 1e-4 * c.max(1.0), "{spec:?} u={u}: {fd} vs {c}");
            }
        }
    }

    #[test]
    fn link_is_derivative_of_risk() {
        let h = 1e-6;
        for spec in [
            LossSpec::MATSUSHITA,
            LossSpec::MAlpha(0.4),
            LossSpec::Log,
            LossSpec::Square,
        ] {
            for u in [0.05, 0.3, 0.71, 0.95] {
                let fd = -(spec.phi(u + h) - spec.phi(u - h)) / (2.0 * h);
                let l = spec.canonical_link(u).unwrap();
                assert!((fd - l).abs() <= 1e-5 * l.abs().max(1.0), "{spec:?} u={u}");
            }
        }
    }

    #[test]
    fn perspective_derivative_brackets_curvature() {
        // d/dv [v phi(1/v)] at v = x equals phi(1/x) - phi'(1/x)/x, which by a
        // second-order Taylor expansion around 1/x (using phi(0) = 0) is
        // (1/2) x^-2 (-phi'')(a) for some a in [0, 1/x].
        for spec in [LossSpec::MATSUSHITA, LossSpec::Square] {
            for m in [1usize, 3, 10, 99] {
                let x = (m + 1) as f64;
                let h = 1e-5;
                let d =
                    (spec.perspective_at(1.0, x + h).unwrap() - spec.perspective_at(1.0, x - h).unwrap()) / (2.0 * h);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 1..=10_000 {
                    let a = (i as f64 / 10_000.0) / x;
                    let c = 0.5 * spec.curvature(a.min(1.0 - 1e-12)).unwrap() / (x * x);
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
                assert!(
                    d >= lo * (1.0 - 1e-6) && d <= hi * (1.0 + 1e-6),
                    "{spec:?} m={m}: {d} not in [{lo}, {hi}]"
                );
            }
        }
    }

    #[test]
    fn surrogate_curvature_sup() {
        for a in [0.1, 0.5, 1.0] {
            let spec = LossSpec::MAlpha(a);
            let h = 1e-4;
            let mut sup: f64 = 0.0;
            for i in -4000..=4000 {
                let z = i as f64 / 500.0;
                // skip the kinks at the band edges
                if ((z.abs()) - 2.0 * (1.0 - a)).abs() < 2.0 * h {
                    continue;
                }
                let d2 = (spec.surrogate(z + h) - 2.0 * spec.surrogate(z) + spec.surrogate(z - h)) / (h * h);
                sup = sup.max(d2);
            }
            assert!(sup <= 1.0 / (2.0 * a) + 1e-6, "alpha={a}: {sup}");
        }
    }
}
