use crate::error::{Error, Result};

/// One-way random-effects mean squares for `k = 2` ratings per unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaTerms {
    pub msb: f64,
    pub msw: f64,
}

pub fn one_way_anova(pairs: &[(f64, f64)]) -> Result<AnovaTerms> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::Domain(format!("ICC needs at least 3 units, got {n}")));
    }
    let k = 2.0;
    let grand = pairs.iter().map(|(a, b)| a + b).sum::<f64>() / (k * n as f64);
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for &(a, b) in pairs {
        let m = (a + b) / k;
        ssb += k * (m - grand).powi(2);
        ssw += (a - m).powi(2) + (b - m).powi(2);
    }
    Ok(AnovaTerms {
        msb: ssb / (n as f64 - 1.0),
        msw: ssw / (n as f64 * (k - 1.0)),
    })
}

/// ICC(1) of (acquired, synthetic) pairs, floored at -1.
pub fn icc(pairs: &[(f64, f64)]) -> Result<f64> {
    let AnovaTerms { msb, msw } = one_way_anova(pairs)?;
    let denom = msb + msw;
    if !(denom > 0.0) {
        return Err(Error::Degenerate("ICC of constant ratings is undefined".into()));
    }
    Ok(((msb - msw) / denom).max(-1.0))
}
