use super::{BellResult, Result, StatsError, TimeBinCounts, TimeBinTerm, Violation};

pub const K_LOCAL_BOUND: f64 = 0.0;

/// The time-bin CH functional `K`, each term normalized by the trials at
/// its own setting pair. Local models satisfy `K <= 0`.
///
/// Terms measured at the same setting pair are disjoint outcomes of one
/// multinomial trial, so their frequencies are summed before taking the
/// binomial variance; setting pairs are independent.
pub fn k_statistic(t: &TimeBinCounts) -> Result<BellResult> {
    t.validate()?;
    let mut value = 0.0;
    for term in TimeBinTerm::ALL {
        let c = t.term(term);
        if c.trials == 0 {
            return Err(StatsError::NoData(format!("term {}", term.name())));
        }
        value += term.sign() * c.events as f64 / c.trials as f64;
    }

    let mut var = 0.0;
    let mut groups: Vec<((u8, u8), u64, u64)> = Vec::new();
    for term in TimeBinTerm::ALL {
        let c = t.term(term);
        match groups
            .iter_mut()
            .find(|g| g.0 == term.settings() && g.1 == c.trials)
        {
            Some(g) => g.2 += c.events,
            None => groups.push((term.settings(), c.trials, c.events)),
        }
    }
    for (_, trials, events) in groups {
        let p = events as f64 / trials as f64;
        var += p * (1.0 - p) / trials as f64;
    }
    Ok(BellResult::new(value, K_LOCAL_BOUND, var.sqrt(), Violation::Above))
}
