//! Closed-form predictions: growth time scale, early linear growth, the
//! vanishing-seed final size of the uncorrelated system and the asymptotic
//! prevalence laws near threshold.

use serde::Serialize;

use super::ModelParams;
use crate::ensemble::{continuum_threshold, DegreeDistribution};
use crate::error::{invalid, Error, Result};
use crate::numeric;

/// Growth time scale `τ = (1/β) / (ρ/ρ_c − 1)`.
pub fn predict_tau(params: ModelParams, rho_c: f64) -> Result<f64> {
    let rho = params.rho();
    if !(rho_c > 0.0) || rho <= rho_c {
        return Err(Error::NoOutbreak { rho, rho_c });
    }
    Ok((1.0 / params.beta()) / (rho / rho_c - 1.0))
}

/// `1/τ` for a scale-free network with γ > 3 in the continuum limit,
/// `(αλ(γ−2) − β(γ−3)) / (γ−3)`; infinite for γ ≤ 3.
pub fn predict_efficiency_sf(gamma: f64, params: ModelParams) -> f64 {
    if gamma <= 3.0 {
        return f64::INFINITY;
    }
    let al = params.alpha() * params.lambda();
    (al * (gamma - 2.0) - params.beta() * (gamma - 3.0)) / (gamma - 3.0)
}

/// Aggregate active fraction of the linearized uncorrelated system started
/// from `a_k(0) = a0` in every class:
/// `a0 e^{−βt} (1 + ⟨k⟩²/⟨k²⟩ (e^{(1/τ+β)t} − 1))`.
pub fn early_growth(dist: &DegreeDistribution, params: ModelParams, a0: f64, t: f64) -> f64 {
    let m = dist.moments();
    let growth = params.alpha() * params.lambda() * m.heterogeneity;
    let beta = params.beta();
    a0 * (-beta * t).exp() * (1.0 + m.mean_k * m.mean_k / m.mean_k2 * ((growth * t).exp() - 1.0))
}

/// Final prevalence of the uncorrelated system in the limit of a vanishing
/// seed. With `z = λ ∫ Σ q(k') a_k' dt` the long-time limit obeys
/// `z = ρ Σ_k q(k) (1 − e^{−kz})` and `P = Σ_k P(k) (1 − e^{−kz})`.
/// Returns zero at or below threshold.
pub fn final_prevalence(dist: &DegreeDistribution, rho: f64) -> Result<f64> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(invalid(format!("rho must be finite and nonnegative, got {rho}")));
    }
    if rho * dist.moments().heterogeneity <= 1.0 {
        return Ok(0.0);
    }
    let k: Vec<f64> = dist.degrees().iter().map(|&d| d as f64).collect();
    let q = dist.excess_vector();
    let f = |z: f64| z - rho * numeric::sum(k.iter().zip(&q).map(|(k, q)| -q * (-k * z).exp_m1()));
    // f < 0 just above zero (supercritical) and f(ρ) ≥ 0.
    let mut hi = rho;
    let mut lo = hi;
    while f(lo) >= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let z = 0.5 * (lo + hi);
    Ok(numeric::sum(
        dist.probs().iter().zip(&k).map(|(p, k)| -p * (-k * z).exp_m1()),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum ScalingRegime {
    /// `P ∼ ρ^{1/(3−γ)}`: log-log slope of P against ρ.
    Heterogeneous { loglog_slope: f64 },
    /// `P ∼ e^{−1/ρ}`: slope of ln P against 1/ρ.
    Marginal { inverse_rho_slope: f64 },
    /// `P ∼ (1 − ρ_c/ρ)^{1/(γ−3)}`: log-log slope against `1 − ρ_c/ρ`.
    Intermediate { loglog_slope: f64 },
    /// `P ∼ 1 − ρ_c/ρ` (γ > 4; integer exponents carry log corrections).
    Homogeneous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub gamma: f64,
    pub regime: ScalingRegime,
    /// Continuum threshold used by the near-threshold forms.
    pub rho_c: f64,
    pub rho: Vec<f64>,
    /// Predicted shape on `rho`, up to an unidentified constant; NaN below
    /// threshold.
    pub shape: Vec<f64>,
}

/// Asymptotic prevalence law for exponent `gamma` evaluated on `rho_grid`.
pub fn predict_prevalence_scaling(gamma: f64, rho_grid: &[f64]) -> Result<ScalingReport> {
    if !(gamma > 2.0) {
        return Err(invalid(format!("scaling laws need gamma > 2, got {gamma}")));
    }
    let rho_c = continuum_threshold(gamma);
    let regime = if gamma < 3.0 {
        ScalingRegime::Heterogeneous {
            loglog_slope: 1.0 / (3.0 - gamma),
        }
    } else if gamma == 3.0 {
        ScalingRegime::Marginal {
            inverse_rho_slope: -1.0,
        }
    } else if gamma < 4.0 {
        ScalingRegime::Intermediate {
            loglog_slope: 1.0 / (gamma - 3.0),
        }
    } else {
        ScalingRegime::Homogeneous
    };
    let shape = rho_grid
        .iter()
        .map(|&r| match regime {
            ScalingRegime::Heterogeneous { loglog_slope } => r.powf(loglog_slope),
            ScalingRegime::Marginal { .. } => (-1.0 / r).exp(),
            ScalingRegime::Intermediate { loglog_slope } if r > rho_c => {
                (1.0 - rho_c / r).powf(loglog_slope)
            }
            ScalingRegime::Homogeneous if r > rho_c => 1.0 - rho_c / r,
            _ => f64::NAN,
        })
        .collect();
    Ok(ScalingReport {
        gamma,
        regime,
        rho_c,
        rho: rho_grid.to_vec(),
        shape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_at_twice_threshold() {
        let p = ModelParams::new(0.6, 1.0, 0.3).unwrap();
        let tau = predict_tau(p, p.rho() / 2.0).unwrap();
        assert!((tau - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tau_diverges_at_threshold() {
        let p = ModelParams::new(0.6, 1.0, 0.3).unwrap();
        let near = predict_tau(p, p.rho() * (1.0 - 1e-9)).unwrap();
        assert!(near > 1e8);
        assert!(matches!(
            predict_tau(p, p.rho()),
            Err(Error::NoOutbreak { .. })
        ));
    }

    #[test]
    fn efficiency_forms_agree() {
        let g = 5.0;
        let p = ModelParams::new(0.5, 1.0, 0.3).unwrap();
        let tau = predict_tau(p, continuum_threshold(g)).unwrap();
        assert!((1.0 / tau - predict_efficiency_sf(g, p)).abs() < 1e-10);
    }

    #[test]
    fn scaling_regimes() {
        let r = predict_prevalence_scaling(2.5, &[0.1]).unwrap();
        assert_eq!(r.regime, ScalingRegime::Heterogeneous { loglog_slope: 2.0 });
        let r = predict_prevalence_scaling(3.0, &[0.5]).unwrap();
        assert!(matches!(r.regime, ScalingRegime::Marginal { .. }));
        assert!((r.shape[0] - (-2.0f64).exp()).abs() < 1e-15);
        let r = predict_prevalence_scaling(5.0, &[0.5, 1.0]).unwrap();
        assert_eq!(r.regime, ScalingRegime::Homogeneous);
        assert!(r.shape[0].is_nan());
        assert!((r.shape[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(predict_prevalence_scaling(2.0, &[0.5]).is_err());
    }

    #[test]
    fn final_prevalence_point_mass_matches_scalar_equation() {
        // k = 2 everywhere: z = ρ(1 − e^{−2z}), P = 1 − e^{−2z}.
        let d = DegreeDistribution::point_mass(2).unwrap();
        let rho = 1.0;
        let p = final_prevalence(&d, rho).unwrap();
        let z = rho * p;
        assert!((p - (1.0 - (-2.0 * z).exp())).abs() < 1e-12);
        assert_eq!(final_prevalence(&d, 0.4).unwrap(), 0.0);
    }
}
