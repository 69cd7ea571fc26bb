use super::{Result, StatsError};

/// Zero bias and alternation rate of a bit sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasStats {
    pub p0: f64,
    /// Fraction of adjacent pairs that differ; `None` for a single bit.
    pub alternation: Option<f64>,
}

pub fn bias_stats(bits: &[u8]) -> Result<BiasStats> {
    if bits.is_empty() {
        return Err(StatsError::Invalid("no bits".into()));
    }
    let zeros = bits.iter().filter(|b| **b == 0).count();
    let alternation = (bits.len() >= 2).then(|| {
        let flips = bits.windows(2).filter(|w| (w[0] == 0) != (w[1] == 0)).count();
        flips as f64 / (bits.len() - 1) as f64
    });
    Ok(BiasStats {
        p0: zeros as f64 / bits.len() as f64,
        alternation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s = bias_stats(&[0, 0, 0, 0]).unwrap();
        assert_eq!((s.p0, s.alternation), (1.0, Some(0.0)));
        let s = bias_stats(&[0, 1, 0, 1]).unwrap();
        assert_eq!((s.p0, s.alternation), (0.5, Some(1.0)));
        assert_eq!(bias_stats(&[1]).unwrap().alternation, None);
        assert!(bias_stats(&[]).is_err());
    }
}
