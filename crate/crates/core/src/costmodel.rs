//! Multiply-accumulate counts for standard and depthwise-separable convolutions.

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Kernel size `dk`, input channels `m`, output channels `n`, output map size `df`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub dk: u64,
    pub m: u64,
    pub n: u64,
    pub df: u64,
}

impl ConvSpec {
    pub fn new(dk: u64, m: u64, n: u64, df: u64) -> Result<Self> {
        let s = ConvSpec { dk, m, n, df };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dk == 0 || self.m == 0 || self.n == 0 || self.df == 0 {
            return Err(Error::Domain(format!("conv spec fields must be positive: {self:?}")));
        }
        Ok(())
    }
}

fn product(factors: &[u64], what: &'static str) -> Result<u128> {
    factors
        .iter()
        .try_fold(1u128, |acc, &f| acc.checked_mul(f as u128))
        .ok_or(Error::Overflow(what))
}

/// `dk^2 * m * n * df^2` multiply-accumulates.
pub fn cost_standard(s: &ConvSpec) -> Result<u128> {
    s.validate()?;
    product(&[s.dk, s.dk, s.m, s.n, s.df, s.df], "standard convolution cost")
}

/// Depthwise `dk^2 * m * df^2` plus pointwise `m * n * df^2` multiply-accumulates.
pub fn cost_dw_separable(s: &ConvSpec) -> Result<u128> {
    s.validate()?;
    let depthwise = product(&[s.dk, s.dk, s.m, s.df, s.df], "depthwise cost")?;
    let pointwise = product(&[s.m, s.n, s.df, s.df], "pointwise cost")?;
    depthwise
        .checked_add(pointwise)
        .ok_or(Error::Overflow("depthwise-separable cost"))
}

/// Separable over standard cost, reduced to lowest terms.
pub fn cost_ratio(s: &ConvSpec) -> Result<Ratio<u128>> {
    Ok(Ratio::new(cost_dw_separable(s)?, cost_standard(s)?))
}

/// Closed form of the ratio: `1/n + 1/dk^2`.
pub fn cost_ratio_closed_form(s: &ConvSpec) -> Result<Ratio<u128>> {
    s.validate()?;
    let dk2 = (s.dk as u128)
        .checked_mul(s.dk as u128)
        .ok_or(Error::Overflow("dk^2"))?;
    Ok(Ratio::new(1, s.n as u128) + Ratio::new(1, dk2))
}

pub fn ratio_to_f64(r: &Ratio<u128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_layer() {
        let s = ConvSpec::new(3, 32, 64, 112).unwrap();
        assert_eq!(cost_standard(&s).unwrap(), 231_211_008);
        assert_eq!(cost_dw_separable(&s).unwrap(), 3_612_672 + 25_690_112);
        assert_eq!(cost_dw_separable(&s).unwrap(), 29_302_784);
        let r = cost_ratio(&s).unwrap();
        assert_eq!(r, Ratio::new(1, 64) + Ratio::new(1, 9));
        assert!((ratio_to_f64(&r) - 0.126736).abs() < 1e-6);
        assert!((ratio_to_f64(&r) - (1.0 / 64.0 + 1.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn trivial_and_degenerate() {
        let one = ConvSpec::new(1, 1, 1, 1).unwrap();
        assert_eq!(cost_standard(&one).unwrap(), 1);
        assert_eq!(cost_ratio(&one).unwrap(), Ratio::from_integer(2));
        let s = ConvSpec::new(1, 5, 7, 3).unwrap();
        assert_eq!(cost_dw_separable(&s).unwrap(), 5 * 9 + 5 * 7 * 9);
        assert!(ConvSpec::new(0, 1, 1, 1).is_err());
    }

    #[test]
    fn doubling_n_doubles_standard_cost() {
        let a = ConvSpec::new(5, 16, 24, 56).unwrap();
        let b = ConvSpec { n: 48, ..a };
        assert_eq!(cost_standard(&b).unwrap(), 2 * cost_standard(&a).unwrap());
    }

    #[test]
    fn overflow_is_reported() {
        let s = ConvSpec::new(u64::MAX, u64::MAX, u64::MAX, 2).unwrap();
        assert!(matches!(cost_standard(&s), Err(Error::Overflow(_))));
    }

    proptest! {
        #[test]
        fn ratio_matches_closed_form(dk in 1u64..16, m in 1u64..2048, n in 1u64..2048, df in 1u64..512) {
            let s = ConvSpec::new(dk, m, n, df).unwrap();
            prop_assert_eq!(cost_ratio(&s).unwrap(), cost_ratio_closed_form(&s).unwrap());
            if n > 1 && dk > 1 {
                prop_assert!(cost_dw_separable(&s).unwrap() < cost_standard(&s).unwrap());
            }
        }

        #[test]
        fn costs_are_monotone(dk in 1u64..10, m in 1u64..100, n in 1u64..100, df in 1u64..100, which in 0usize..4) {
            let s = ConvSpec::new(dk, m, n, df).unwrap();
            let mut t = s;
            match which { 0 => t.dk += 1, 1 => t.m += 1, 2 => t.n += 1, _ => t.df += 1 }
            prop_assert!(cost_standard(&t).unwrap() >= cost_standard(&s).unwrap());
            prop_assert!(cost_dw_separable(&t).unwrap() >= cost_dw_separable(&s).unwrap());
        }
    }
}
