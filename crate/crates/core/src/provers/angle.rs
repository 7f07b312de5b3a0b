//! Measurement-angle adaptation for a prover whose phase is less reliable than its bits.

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{0} must lie in [0, 1]")]
    OutOfRange(&'static str),
    #[error("theta must lie in (-pi/2, pi/2)")]
    ThetaRange,
    #[error("no optimal angle when the computational-state fidelity is at most 1/2")]
    DegenerateModel,
}

/// Probabilities of holding the correct state for computational (`f_par`) and
/// diagonal (`f_perp`) round-3 states, plus the angle actually measured at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleModel<T: Real> {
    pub f_par: T,
    pub f_perp: T,
    pub theta: T,
}

impl<T: Real> AngleModel<T> {
    pub fn new(f_par: T, f_perp: T, theta: T) -> Result<Self, ModelError> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(f_par) {
            return Err(ModelError::OutOfRange("f_par"));
        }
        if !unit(f_perp) {
            return Err(ModelError::OutOfRange("f_perp"));
        }
        if !(theta.abs() < T::FRAC_PI_2()) {
            return Err(ModelError::ThetaRange);
        }
        Ok(Self { f_par, f_perp, theta })
    }

    /// Model at its own optimal angle.
    pub fn optimal(f_par: T, f_perp: T) -> Result<Self, ModelError> {
        Self::new(f_par, f_perp, optimal_theta(f_par, f_perp)?)
    }

    pub fn pm(&self) -> T {
        pm_of_theta(self)
    }
}

/// Expected round-3 acceptance rate of the model.
pub fn pm_of_theta<T: Real>(m: &AngleModel<T>) -> T {
    let half = T::lit(0.5);
    let a = m.theta * half;
    let b = a - T::FRAC_PI_4();
    let sq = |v: T| v * v;
    half * (sq(a.cos()) * m.f_par
        + sq(b.cos()) * m.f_perp
        + sq(a.sin()) * (T::one() - m.f_par)
        + sq(b.sin()) * (T::one() - m.f_perp))
}

/// Angle maximizing `pm_of_theta`: `atan((2 f_perp - 1) / (2 f_par - 1))`.
pub fn optimal_theta<T: Real>(f_par: T, f_perp: T) -> Result<T, ModelError> {
    let two = T::lit(2.0);
    let den = two * f_par - T::one();
    if den <= T::zero() {
        return Err(ModelError::DegenerateModel);
    }
    Ok(((two * f_perp - T::one()) / den).atan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_4, PI};

    fn pm(a: f64, b: f64, t: f64) -> f64 {
        AngleModel::new(a, b, t).unwrap().pm()
    }

    #[test]
    fn reference_values() {
        assert!((pm(1.0, 1.0, FRAC_PI_4) - (PI / 8.0).cos().powi(2)).abs() < 1e-12);
        assert!((pm(1.0, 0.5, FRAC_PI_4) - 0.676_776_695).abs() < 1e-6);
        let d = 0.1;
        assert!((pm(1.0, 0.5 + d, d) - (0.75 + 3.0 * d * d / 8.0)).abs() < 1e-3);
        assert!((pm(1.0, 0.5 + d, d) - 0.7537).abs() < 1e-4);
    }

    #[test]
    fn optimal_angles() {
        assert!((optimal_theta(1.0, 1.0).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert!((optimal_theta(1.0, 0.6).unwrap() - 0.2f64.atan()).abs() < 1e-12);
        assert!((optimal_theta(1.0f64, 0.6).unwrap() - 0.1974).abs() < 1e-4);
        assert_eq!(optimal_theta(1.0, 0.5).unwrap(), 0.0);
        assert_eq!(optimal_theta(0.5, 0.9), Err(ModelError::DegenerateModel));
        assert!(AngleModel::new(1.2, 0.5, 0.0).is_err());
        assert!(AngleModel::new(1.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn optimum_dominates_a_grid() {
        for i in 1..=20 {
            for j in 1..=20 {
                let (a, b) = (0.5 + 0.025 * f64::from(i), 0.5 + 0.025 * f64::from(j));
                let best = AngleModel::optimal(a, b).unwrap().pm();
                for k in 0..1000 {
                    let t = -PI / 2.0 + PI * (f64::from(k) + 0.5) / 1000.0;
                    assert!(best >= pm(a, b, t) - 1e-12, "a={a} b={b} t={t}");
                }
            }
        }
    }

    #[test]
    fn single_precision_agrees() {
        let m = AngleModel::<f32>::optimal(0.9, 0.7).unwrap();
        let d = AngleModel::<f64>::optimal(0.9, 0.7).unwrap();
        assert!((f64::from(m.pm()) - d.pm()).abs() < 1e-6);
    }
}
