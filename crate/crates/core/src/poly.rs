//! Exact univariate polynomials over arbitrary-precision rationals, with
//! the running-sum operation the backwards-heat-equation levels need:
//! `sum_{y=a}^{x} p(y)` as a polynomial in `x`, computed through the
//! binomial basis so every coefficient stays exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Dense coefficients, lowest degree first. The zero polynomial is an
/// empty vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatPoly {
    coeffs: Vec<BigRational>,
}

fn rat(n: i64) -> BigRational {
    BigRational::from(BigInt::from(n))
}

impl RatPoly {
    pub fn zero() -> Self {
        RatPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            RatPoly { coeffs: vec![c] }
        }
    }

    /// `2^k` as an exact rational constant (k may be negative).
    pub fn dyadic_constant(k: i64) -> BigRational {
        if k >= 0 {
            BigRational::from(BigInt::one() << k as usize)
        } else {
            BigRational::new(BigInt::one(), BigInt::one() << (-k) as usize)
        }
    }

    pub fn from_coeffs(coeffs: Vec<BigRational>) -> Self {
        let mut p = RatPoly { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().map_or(false, |c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn eval(&self, x: i64) -> BigRational {
        let x = rat(x);
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * &x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: i64) -> f64 {
        rational_to_f64(&self.eval(x))
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![BigRational::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        RatPoly::from_coeffs(out)
    }

    pub fn neg(&self) -> RatPoly {
        RatPoly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn scale(&self, s: &BigRational) -> RatPoly {
        RatPoly::from_coeffs(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Multiplication by the linear factor `(x + shift)`.
    fn mul_linear(&self, shift: &BigRational) -> RatPoly {
        let mut out = vec![BigRational::zero(); self.coeffs.len() + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i + 1] += c;
            out[i] += c * shift;
        }
        RatPoly::from_coeffs(out)
    }

    /// Forward difference `p(x + 1) - p(x)`.
    pub fn forward_difference(&self) -> RatPoly {
        self.shift_arg(1).add(&self.neg())
    }

    /// `p(x + k)` as a polynomial in `x`.
    pub fn shift_arg(&self, k: i64) -> RatPoly {
        // Horner in (x + k)
        let mut acc = RatPoly::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul_linear(&rat(k));
            acc = acc.add(&RatPoly::constant(c.clone()));
        }
        acc
    }

    /// The polynomial `S` with `S(x) = sum_{y=a}^{x} p(y)` for `x >= a-1`
    /// (and by polynomial continuation for all integers; in particular
    /// `S(a-1) = 0`).
    ///
    /// Works in the binomial basis: if `p(a + j) = sum_m c_m C(j, m)`
    /// with `c_m` the forward differences of `p` at `a`, then
    /// `S(a + j) = sum_m c_m C(j + 1, m + 1)`.
    pub fn sum_from(&self, a: i64) -> RatPoly {
        if self.coeffs.is_empty() {
            return RatPoly::zero();
        }
        let d = self.coeffs.len() - 1;
        // forward differences of p at a
        let mut diffs = Vec::with_capacity(d + 1);
        let mut cur = self.shift_arg(a);
        for _ in 0..=d {
            diffs.push(cur.eval(0));
            cur = cur.forward_difference();
        }
        // S(a + j) = sum_m diffs[m] * C(j+1, m+1); build in j then shift
        let mut s_in_j = RatPoly::zero();
        let mut binom = RatPoly::from_coeffs(vec![rat(1), rat(1)]); // C(j+1, 1) = j + 1
        for (m, c) in diffs.iter().enumerate() {
            s_in_j = s_in_j.add(&binom.scale(c));
            // C(j+1, m+2) = C(j+1, m+1) * (j - m) / (m + 2)
            let next = binom
                .mul_linear(&rat(-(m as i64)))
                .scale(&BigRational::new(BigInt::one(), BigInt::from(m as i64 + 2)));
            binom = next;
        }
        // substitute j = x - a
        s_in_j.shift_arg(-a)
    }
}

/// Rounds an exact rational to the nearest f64 through a quotient with
/// 80 extra bits of headroom.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let num = r.numer();
    let den = r.denom();
    let shift = 80i64 + den.bits() as i64 - num.bits() as i64;
    let scaled: BigInt = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    // scaled ~ 2^80-sized: representable path via i128 after reduction
    let bits = scaled.bits();
    if bits <= 127 {
        let v: i128 = i128::try_from(&scaled).expect("fits by construction");
        (v as f64) * 2f64.powi(-shift as i32)
    } else {
        let drop = bits - 100;
        let top: BigInt = &scaled >> drop as usize;
        let v: i128 = i128::try_from(&top).expect("fits by construction");
        (v as f64) * 2f64.powi((drop as i64 - shift) as i32)
    }
}
