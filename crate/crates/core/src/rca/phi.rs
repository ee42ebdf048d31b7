use crate::error::{Error, Result};

/// 2x2 contingency table of two binary vectors: `nXY` counts rows where the
/// first vector is `X` and the second is `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Contingency {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl Contingency {
    pub fn from_pairs(a: &[bool], b: &[bool]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidParameter(format!(
                "binary vectors differ in length ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        let mut t = Contingency::default();
        for (&x, &y) in a.iter().zip(b) {
            match (x, y) {
                (true, true) => t.n11 += 1,
                (true, false) => t.n10 += 1,
                (false, true) => t.n01 += 1,
                (false, false) => t.n00 += 1,
            }
        }
        Ok(t)
    }

    /// Phi coefficient, `None` when any marginal is zero.
    pub fn phi(&self) -> Option<f64> {
        let a1 = self.n11 + self.n10;
        let a0 = self.n01 + self.n00;
        let b1 = self.n11 + self.n01;
        let b0 = self.n10 + self.n00;
        if a1 == 0 || a0 == 0 || b1 == 0 || b0 == 0 {
            return None;
        }
        let num = self.n11 as f64 * self.n00 as f64 - self.n10 as f64 * self.n01 as f64;
        let den = ((a1 * a0) as f64 * (b1 * b0) as f64).sqrt();
        Some(num / den)
    }
}

/// Pearson's phi for two binary vectors; `Ok(None)` where undefined.
pub fn phi(a: &[bool], b: &[bool]) -> Result<Option<f64>> {
    Ok(Contingency::from_pairs(a, b)?.phi())
}

/// `|phi|`, with undefined mapped to zero.
pub fn abs_phi_or_zero(a: &[bool], b: &[bool]) -> Result<f64> {
    Ok(phi(a, b)?.map_or(0.0, f64::abs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        let x = [true, false, true, true, false];
        assert_eq!(phi(&x, &x).unwrap(), Some(1.0));
        let a = [true, true, false, false];
        let b = [true, false, true, false];
        assert_eq!(phi(&a, &b).unwrap(), Some(0.0));
        assert_eq!(phi(&[false; 4], &b).unwrap(), None);
        assert_eq!(abs_phi_or_zero(&[false; 4], &b).unwrap(), 0.0);
        let inv: Vec<bool> = x.iter().map(|v| !v).collect();
        assert_eq!(phi(&x, &inv).unwrap(), Some(-1.0));
        assert!(phi(&[true], &[true, false]).is_err());
    }

    #[test]
    fn half_shared_anomaly_mass() {
        // the KPI flags two rows; the counter flags one of them
        let m = 100_000;
        let mut kpi = vec![false; m];
        let mut counter = vec![false; m];
        kpi[10] = true;
        kpi[20] = true;
        counter[10] = true;
        let r = abs_phi_or_zero(&counter, &kpi).unwrap();
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4, "{r}");
    }

    proptest! {
        #[test]
        fn symmetric_in_magnitude(pairs in prop::collection::vec(any::<(bool, bool)>(), 0..64)) {
            let (a, b): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
            prop_assert_eq!(abs_phi_or_zero(&a, &b).unwrap(), abs_phi_or_zero(&b, &a).unwrap());
            let p = phi(&a, &b).unwrap();
            prop_assert!(p.is_none_or(|p| (-1.0 - 1e-12..=1.0 + 1e-12).contains(&p)));
        }
    }
}
