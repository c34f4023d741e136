//! The monotone constitutive map `A` and its inverse `B = A⁻¹`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Shape of a scalar map on `[0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Concave,
    Convex,
    Linear,
    Unknown,
}

impl Curvature {
    fn flipped(self) -> Self {
        match self {
            Curvature::Concave => Curvature::Convex,
            Curvature::Convex => Curvature::Concave,
            other => other,
        }
    }
}

type ScalarMap<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// User supplied `A`, `A'`, `B`, `B'`.
#[derive(Clone)]
pub struct CustomMaps<T: Real> {
    pub a: ScalarMap<T>,
    pub da: ScalarMap<T>,
    pub b: ScalarMap<T>,
    pub db: ScalarMap<T>,
}

#[derive(Clone)]
enum Kind<T: Real> {
    Power(T),
    Custom(CustomMaps<T>),
}

/// Increasing nonlinearity of the parabolic form `u_t + L A(u) = f`
/// together with its inverse `B`, used by the elliptic form `h L v + B(v) = f`.
#[derive(Clone)]
pub struct Nonlinearity<T: Real = f64> {
    kind: Kind<T>,
    b_curvature: Curvature,
}

impl<T: Real> fmt::Debug for Nonlinearity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Power(m) => write!(f, "Power {{ m: {m} }}"),
            Kind::Custom(_) => write!(f, "Custom {{ B: {:?} }}", self.b_curvature),
        }
    }
}

/// Log-spaced positive probe values between `10^lo` and `10^hi`.
fn probe_points(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |k| 10f64.powf(lo + (hi - lo) * k as f64 / (count - 1) as f64))
}

impl<T: Real> Nonlinearity<T> {
    /// `A(u) = sign(u)|u|^m`, `B(v) = sign(v)|v|^{1/m}`.
    pub fn power(m: T) -> Result<Self> {
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::param("m", format!("power must be positive and finite, got {m}")));
        }
        let b_curvature = if m == T::one() {
            Curvature::Linear
        } else if m > T::one() {
            Curvature::Concave
        } else {
            Curvature::Convex
        };
        let nl = Self {
            kind: Kind::Power(m),
            b_curvature,
        };
        nl.spot_check()?;
        Ok(nl)
    }

    pub fn linear() -> Self {
        Self {
            kind: Kind::Power(T::one()),
            b_curvature: Curvature::Linear,
        }
    }

    /// Custom pair; `b_curvature` is the caller's claim about `B`.
    pub fn custom(maps: CustomMaps<T>, b_curvature: Curvature) -> Result<Self> {
        let nl = Self {
            kind: Kind::Custom(maps),
            b_curvature,
        };
        nl.spot_check()?;
        Ok(nl)
    }

    fn spot_check(&self) -> Result<()> {
        if self.a(T::zero()) != T::zero() || self.b(T::zero()) != T::zero() {
            return Err(Error::Nonlinearity("A(0) and B(0) must vanish".into()));
        }
        let tol = 1e-10f64.max(64.0 * T::epsilon().as_f64());
        for t in probe_points(-6.0, 6.0, 25) {
            let t = T::lit(t);
            let a = self.a(t);
            if !a.is_finite() {
                // outside the representable range of this scalar type
                continue;
            }
            if !(self.da(t) > T::zero()) || !(self.db(a) > T::zero()) {
                return Err(Error::Nonlinearity(format!("derivative not positive near t = {t}")));
            }
            let back = self.b(a);
            if ((back - t) / t).abs().as_f64() > tol {
                return Err(Error::Nonlinearity(format!("B(A({t})) = {back}")));
            }
        }
        Ok(())
    }

    /// Exponent `m` when this is a power nonlinearity.
    pub fn exponent(&self) -> Option<T> {
        match self.kind {
            Kind::Power(m) => Some(m),
            Kind::Custom(_) => None,
        }
    }

    pub fn b_curvature(&self) -> Curvature {
        self.b_curvature
    }

    pub fn a_curvature(&self) -> Curvature {
        self.b_curvature.flipped()
    }

    #[inline]
    pub fn a(&self, u: T) -> T {
        match &self.kind {
            Kind::Power(m) => signed_pow(u, *m),
            Kind::Custom(c) => (c.a)(u),
        }
    }

    #[inline]
    pub fn da(&self, u: T) -> T {
        match &self.kind {
            Kind::Power(m) => *m * u.abs().powf(*m - T::one()),
            Kind::Custom(c) => (c.da)(u),
        }
    }

    #[inline]
    pub fn b(&self, v: T) -> T {
        match &self.kind {
            Kind::Power(m) => signed_pow(v, m.recip()),
            Kind::Custom(c) => (c.b)(v),
        }
    }

    #[inline]
    pub fn db(&self, v: T) -> T {
        match &self.kind {
            Kind::Power(m) => {
                let q = m.recip();
                q * v.abs().powf(q - T::one())
            }
            Kind::Custom(c) => (c.db)(v),
        }
    }
}

#[inline]
fn signed_pow<T: Real>(t: T, p: T) -> T {
    if p == T::one() {
        t
    } else if t < T::zero() {
        -(-t).powf(p)
    } else {
        t.powf(p)
    }
}

/// Critical exponent `m_c = (N - σ)/N` for self-similar source solutions.
pub fn critical_exponent(dimension: usize, sigma: f64) -> f64 {
    let n = dimension as f64;
    (n - sigma) / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_round_trip() {
        for m in [0.3, 0.5, 1.0, 2.0, 3.5] {
            let nl = Nonlinearity::<f64>::power(m).unwrap();
            for t in probe_points(-6.0, 6.0, 101) {
                assert!(((nl.a(nl.b(t)) - t) / t).abs() < 1e-12, "m={m} t={t}");
                assert!(((nl.b(nl.a(t)) - t) / t).abs() < 1e-12, "m={m} t={t}");
            }
        }
    }

    #[test]
    fn curvature_tags() {
        assert_eq!(Nonlinearity::<f64>::power(2.0).unwrap().b_curvature(), Curvature::Concave);
        assert_eq!(Nonlinearity::<f64>::power(2.0).unwrap().a_curvature(), Curvature::Convex);
        assert_eq!(Nonlinearity::<f64>::power(0.5).unwrap().b_curvature(), Curvature::Convex);
        assert_eq!(Nonlinearity::<f64>::linear().b_curvature(), Curvature::Linear);
    }

    #[test]
    fn odd_extension() {
        let nl = Nonlinearity::<f64>::power(2.0).unwrap();
        assert_eq!(nl.a(-3.0), -9.0);
        assert_eq!(nl.b(-9.0), -3.0);
        assert_eq!(nl.da(-3.0), 6.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let nl = Nonlinearity::<f64>::power(1.7).unwrap();
        for t in [0.01, 0.3, 2.0, 17.0] {
            let e = 1e-6 * t;
            let fd = (nl.a(t + e) - nl.a(t - e)) / (2.0 * e);
            assert!((fd - nl.da(t)).abs() < 1e-6 * nl.da(t));
            let fd = (nl.b(t + e) - nl.b(t - e)) / (2.0 * e);
            assert!((fd - nl.db(t)).abs() < 1e-6 * nl.db(t));
        }
    }

    #[test]
    fn rejects_bad_power_and_inconsistent_custom() {
        assert!(Nonlinearity::<f64>::power(0.0).is_err());
        assert!(Nonlinearity::<f64>::power(-1.0).is_err());
        let wrong = CustomMaps {
            a: Arc::new(|u: f64| u * u * u),
            da: Arc::new(|u: f64| 3.0 * u * u),
            b: Arc::new(|v: f64| v.sqrt()),
            db: Arc::new(|v: f64| 0.5 / v.sqrt()),
        };
        assert!(Nonlinearity::custom(wrong, Curvature::Unknown).is_err());
        let shifted = CustomMaps {
            a: Arc::new(|u: f64| u + 1.0),
            da: Arc::new(|_| 1.0),
            b: Arc::new(|v: f64| v - 1.0),
            db: Arc::new(|_| 1.0),
        };
        assert!(Nonlinearity::custom(shifted, Curvature::Linear).is_err());
    }

    #[test]
    fn custom_exponential_pair() {
        // A(u) = e^u - 1, B(v) = ln(1 + v)
        let maps = CustomMaps {
            a: Arc::new(|u: f64| u.exp_m1()),
            da: Arc::new(|u: f64| u.exp()),
            b: Arc::new(|v: f64| v.ln_1p()),
            db: Arc::new(|v: f64| 1.0 / (1.0 + v)),
        };
        // large probes overflow exp and are skipped
        let nl = Nonlinearity::custom(maps, Curvature::Concave).unwrap();
        assert!((nl.b(nl.a(0.7)) - 0.7).abs() < 1e-15);
        assert_eq!(nl.exponent(), None);
    }

    #[test]
    fn critical_exponent_values() {
        assert_eq!(critical_exponent(1, 1.0), 0.0);
        assert!((critical_exponent(3, 1.5) - 0.5).abs() < 1e-15);
    }
}
