//! Student's t distribution tail probabilities.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Two-tailed p-value of a Student's t statistic with `df` degrees of freedom.
///
/// Uses the identity `P(|T| >= |t|) = I_x(df/2, 1/2)` with `x = df / (df + t^2)`,
/// where `I_x` is the regularized incomplete beta function.
pub fn two_tailed_t_p(t: f64, df: u32) -> Result<f64> {
    if df < 1 {
        return Err(Error::invalid(
            "t-test needs at least one degree of freedom",
        ));
    }
    if !t.is_finite() {
        return Err(Error::invalid(format!(
            "t statistic must be finite, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let nu = f64::from(df);
    let x = nu / (nu + t * t);
    Ok(beta_reg(nu / 2.0, 0.5, x).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_statistic_is_certain() {
        assert_eq!(two_tailed_t_p(0.0, 4).unwrap(), 1.0);
    }

    #[test]
    fn rejects_zero_df_and_non_finite_t() {
        assert!(two_tailed_t_p(1.0, 0).is_err());
        assert!(two_tailed_t_p(f64::NAN, 3).is_err());
        assert!(two_tailed_t_p(f64::INFINITY, 3).is_err());
    }

    #[test]
    fn sign_symmetric() {
        for df in [1, 3, 9] {
            for t in [0.3, 1.7, 4.2] {
                assert_eq!(
                    two_tailed_t_p(t, df).unwrap(),
                    two_tailed_t_p(-t, df).unwrap()
                );
            }
        }
    }

    #[test]
    fn cauchy_closed_form() {
        // df = 1 is the Cauchy distribution: p = 1 - 2 atan(t) / pi.
        for t in [0.5_f64, 1.0, 3.0, 12.0] {
            let expected = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
            assert!((two_tailed_t_p(t, 1).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_values_at_five_percent() {
        // mpmath quadrature of the t density: p(2.776, 4) = 0.0500228
        assert!((two_tailed_t_p(2.776, 4).unwrap() - 0.050_022_78).abs() < 1e-7);
        assert!(two_tailed_t_p(22.36, 4).unwrap() < 0.001);
    }
}
