//! Small helpers around exact rational numbers: construction shortcuts and
//! the canonical `p/q` text form used by golden files and the CLI.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Exact rational from an integer.
pub fn rat_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational `p/q`.
pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Canonical text form: `p` for integers, `p/q` otherwise, `-` in front.
pub fn rat_to_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse the canonical `p/q` form (also plain integers).
pub fn rat_from_str(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    let mk = |t: &str| t.parse::<BigInt>().map_err(|e| format!("bad rational '{s}': {e}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let num = mk(p)?;
            let den = mk(q)?;
            if den.is_zero() {
                return Err(format!("bad rational '{s}': zero denominator"));
            }
            Ok(BigRational::new(num, den))
        }
        None => Ok(BigRational::from_integer(mk(s)?)),
    }
}

/// Rational to the nearest f64 (numerator/denominator division).
pub fn rat_to_f64(r: &BigRational) -> f64 {
    // BigRational has no direct conversion; go through a scaled division to
    // keep precision for large numerators/denominators.
    let num = r.numer();
    let den = r.denom();
    let fnum = bigint_to_f64(num);
    let fden = bigint_to_f64(den);
    if fnum.is_finite() && fden.is_finite() && fden != 0.0 {
        fnum / fden
    } else {
        // fall back to string parsing digit by digit; adequate for diagnostics
        let s = format!("{num}");
        let t = format!("{den}");
        s.parse::<f64>().unwrap_or(f64::NAN) / t.parse::<f64>().unwrap_or(f64::NAN)
    }
}

fn bigint_to_f64(b: &BigInt) -> f64 {
    let (sign, digits) = b.to_u64_digits();
    let mut x = 0.0f64;
    for d in digits.iter().rev() {
        x = x * 1.8446744073709552e19 + *d as f64;
    }
    if sign == num_bigint::Sign::Minus {
        -x
    } else {
        x
    }
}

/// Sum of absolute values of a slice of rationals as f64 (residual norms).
pub fn abs_norm(rs: &[BigRational]) -> f64 {
    rs.iter().map(|r| rat_to_f64(&r.abs())).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_text_form() {
        for (p, q) in [(1i64, 2i64), (-7, 3), (5, 1), (0, 9)] {
            let r = rat(p, q);
            assert_eq!(rat_from_str(&rat_to_string(&r)).unwrap(), r);
        }
    }

    #[test]
    fn f64_conversion() {
        assert_eq!(rat_to_f64(&rat(1, 2)), 0.5);
        assert!((rat_to_f64(&rat(1, 3)) - 1.0 / 3.0).abs() < 1e-15);
    }
}
