use super::{
    check_class, describe_axis, grid, invert, strict_residual, validate_grid, Certificate, GainClass, GainError,
    GainFn, TimeWeight, Tracker, DEFAULT_GROWTH_FLOOR,
};

/// The maps built from a K∞ reserve `ρ` and a gain `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionMaps {
    /// `κ(s) = s + ρ⁻¹(s)`
    pub kappa: GainFn,
    /// `φ(s) = s + ρ(s)`
    pub phi: GainFn,
    /// `g(s) = γ(s) + ρ(γ(s))`
    pub g: GainFn,
}

/// Build `κ`, `φ` and `g` for a reserve `rho` and gain `gamma`.
///
/// `rho` must be strictly increasing on the default log grid and reach
/// [`DEFAULT_GROWTH_FLOOR`] below the inversion bracket cap.
pub fn build_contraction_maps(rho: &GainFn, gamma: &GainFn) -> Result<ContractionMaps, GainError> {
    rho.validate()?;
    gamma.validate()?;
    let cert = check_class(rho, GainClass::K, &grid::default_s_grid())?;
    if !cert.passed() {
        return Err(GainError::NotKInfinity(format!(
            "reserve fails the class K check at {:?} (residual {:e})",
            cert.witness, cert.worst_residual
        )));
    }
    if let Err(e) = invert(rho, DEFAULT_GROWTH_FLOOR, 1.0) {
        return Err(GainError::NotKInfinity(format!("reserve looks bounded: {e}")));
    }
    Ok(ContractionMaps {
        kappa: GainFn::sum(GainFn::Identity, GainFn::inverse(rho.clone())),
        phi: GainFn::sum(GainFn::Identity, rho.clone()),
        g: GainFn::sum(gamma.clone(), GainFn::compose(rho.clone(), gamma.clone())),
    })
}

/// Grid certificate for the nonlinear small-gain hypothesis
/// `g1(δ1(t) g2(δ2(τ) s)) <= s` for `0 <= τ <= t`, together with
/// `δ1(t) <= m_bound`.
///
/// The `τ` axis is every `t_grid` point not after `t`.
#[allow(clippy::too_many_arguments)]
pub fn small_gain_h3_check(
    gamma1: &GainFn,
    gamma2: &GainFn,
    delta1: &TimeWeight,
    delta2: &TimeWeight,
    rho: &GainFn,
    m_bound: f64,
    s_grid: &[f64],
    t_grid: &[f64],
) -> Result<Certificate, GainError> {
    validate_grid(s_grid)?;
    validate_grid(t_grid)?;
    delta1.validate()?;
    delta2.validate()?;
    let g1 = build_contraction_maps(rho, gamma1)?.g;
    let g2 = build_contraction_maps(rho, gamma2)?.g;

    let mut bound = Tracker::new("delta1_bound");
    for &t in t_grid {
        bound.observe(delta1.eval(t) - m_bound, &[("t", t)]);
    }

    let mut contraction = Tracker::new("contraction");
    for (i, &t) in t_grid.iter().enumerate() {
        let d1 = delta1.eval(t);
        for &tau in &t_grid[..=i] {
            let d2 = delta2.eval(tau);
            for &s in s_grid {
                let lhs = g2
                    .eval(d2 * s)
                    .and_then(|inner| g1.eval(d1 * inner))
                    .unwrap_or(f64::INFINITY);
                contraction.observe(lhs - s, &[("t", t), ("tau", tau), ("s", s)]);
            }
        }
    }

    let grid = format!("{}; {}", describe_axis("s", s_grid), describe_axis("t", t_grid));
    Ok(Certificate::from_components("small_gain_h3", grid, vec![bound.finish(), contraction.finish()]))
}

/// Linear-gain reduction: pass iff
/// `K1 K2 max_t δ1(t) max_{τ<=t} δ2(τ) < 1` over `t_grid`.
///
/// The inequality is strict, so an exact tie reports the smallest positive
/// residual.
pub fn linear_small_gain_check(
    k1: f64,
    k2: f64,
    delta1: &TimeWeight,
    delta2: &TimeWeight,
    t_grid: &[f64],
) -> Result<Certificate, GainError> {
    if !(k1 >= 0.0 && k2 >= 0.0) {
        return Err(GainError::InvalidParameter(format!("linear gains must be non-negative, got {k1}, {k2}")));
    }
    validate_grid(t_grid)?;
    delta1.validate()?;
    delta2.validate()?;
    let mut loop_gain = Tracker::new("loop_gain");
    for &t in t_grid {
        let value = k1 * k2 * delta1.eval(t) * delta2.prefix_max(t);
        loop_gain.observe(strict_residual(value, 1.0), &[("t", t), ("loop_gain", value)]);
    }
    Ok(Certificate::from_components("linear_small_gain", describe_axis("t", t_grid), vec![loop_gain.finish()]))
}

/// Grid certificate for `γ1(w) + ρ(γ1(w)) <= s` with
/// `w = γ2(s)/R + ρ(γ2(s)/R)`.
pub fn a3_check(
    gamma1: &GainFn,
    gamma2: &GainFn,
    rho: &GainFn,
    reserve: f64,
    s_grid: &[f64],
) -> Result<Certificate, GainError> {
    if !(reserve >= 1.0 && reserve.is_finite()) {
        return Err(GainError::InvalidParameter(format!("R = {reserve} must be at least 1")));
    }
    validate_grid(s_grid)?;
    gamma1.validate()?;
    gamma2.validate()?;
    rho.validate()?;
    let mut tracker = Tracker::new("a3");
    for &s in s_grid {
        let lhs = (|| -> Result<f64, GainError> {
            let v = gamma2.eval(s)? / reserve;
            let w = v + rho.eval(v)?;
            let g = gamma1.eval(w)?;
            Ok(g + rho.eval(g)?)
        })()
        .unwrap_or(f64::INFINITY);
        tracker.observe(lhs - s, &[("s", s)]);
    }
    Ok(Certificate::from_components("a3", describe_axis("s", s_grid), vec![tracker.finish()]))
}

/// Pointwise maximum of the four weights.
pub fn combine_weight(d1u: &TimeWeight, d2u: &TimeWeight, q1u: &TimeWeight, q2u: &TimeWeight) -> TimeWeight {
    TimeWeight::MaxWeight { terms: vec![d1u.clone(), d2u.clone(), q1u.clone(), q2u.clone()] }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_grid() -> Vec<f64> {
        grid::default_t_grid(10.0)
    }

    #[test]
    fn contraction_map_values() {
        let m = build_contraction_maps(&GainFn::Identity, &GainFn::Identity).unwrap();
        assert_eq!(m.phi.eval(2.0).unwrap(), 4.0);
        assert_eq!(m.g.eval(2.0).unwrap(), 4.0);
        assert!((m.kappa.eval(2.0).unwrap() - 4.0).abs() < 1e-11);
        let m = build_contraction_maps(&GainFn::scale(0.1), &GainFn::power(0.2, 2.0)).unwrap();
        assert!((m.g.eval(3.0).unwrap() - 1.98).abs() < 1e-14);
        let m = build_contraction_maps(&GainFn::power(1.0, 3.0), &GainFn::Identity).unwrap();
        assert!((m.kappa.eval(8.0).unwrap() - 10.0).abs() < 1e-10);
        assert!(build_contraction_maps(&GainFn::Zero, &GainFn::Identity).is_err());
    }

    #[test]
    fn h3_examples() {
        let s = grid::default_s_grid();
        let one = TimeWeight::one();
        let zero = small_gain_h3_check(&GainFn::Zero, &GainFn::power(3.0, 2.0), &one, &one, &GainFn::Identity, 1.0, &s, &t_grid())
            .unwrap();
        assert!(zero.passed());
        let ok = small_gain_h3_check(&GainFn::scale(0.5), &GainFn::scale(1.5), &one, &one, &GainFn::scale(1e-6), 1.0, &s, &t_grid())
            .unwrap();
        assert!(ok.passed());
        let bad = small_gain_h3_check(&GainFn::Identity, &GainFn::scale(1.2), &one, &one, &GainFn::scale(0.01), 1.0, &s, &t_grid())
            .unwrap();
        assert!(!bad.passed());
        assert_eq!(bad.witness["s"], 1e6);
    }

    #[test]
    fn linear_examples() {
        let one = TimeWeight::one();
        assert!(linear_small_gain_check(0.5, 1.5, &one, &one, &t_grid()).unwrap().passed());
        assert!(!linear_small_gain_check(1.0, 1.0, &one, &one, &t_grid()).unwrap().passed());
        let ramp = TimeWeight::rational(1.0, 1.0, 0.0);
        let cert = linear_small_gain_check(0.5, 1.5, &one, &ramp, &[0.0, 0.5, 1.0]).unwrap();
        assert!(!cert.passed());
        assert!((cert.worst_residual - 0.5).abs() < 1e-15);
    }

    #[test]
    fn a3_examples() {
        let s = grid::default_s_grid();
        let pass = a3_check(&GainFn::sqrt_scale(0.9), &GainFn::power(0.5, 2.0), &GainFn::scale(0.1), 1.0, &s).unwrap();
        assert!(pass.passed());
        let slope = 1.1 * (1.1f64 * 0.5 / 0.9).sqrt() - 1.0;
        assert!((pass.worst_residual - slope * 1e-6).abs() < 1e-18);
        let fail = a3_check(&GainFn::sqrt_scale(0.5), &GainFn::power(0.99, 2.0), &GainFn::Identity, 1.0, &s).unwrap();
        assert!(!fail.passed());
        assert!(a3_check(&GainFn::Identity, &GainFn::Zero, &GainFn::Identity, 1.0, &s).unwrap().passed());
        assert!(a3_check(&GainFn::Identity, &GainFn::Zero, &GainFn::Identity, 0.5, &s).is_err());
    }

    #[test]
    fn combined_weight_is_pointwise_max() {
        let w = combine_weight(&TimeWeight::one(), &TimeWeight::constant(2.0), &TimeWeight::exp(1.0, 1.0), &TimeWeight::one());
        assert_eq!(w.eval(0.0), 2.0);
        let w = combine_weight(&TimeWeight::one(), &TimeWeight::one(), &TimeWeight::one(), &TimeWeight::rational(1.0, 1.0, 0.0));
        assert_eq!(w.eval(3.0), 4.0);
    }
}
