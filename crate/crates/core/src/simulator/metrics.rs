use super::SimError;
use serde::{Deserialize, Serialize};

/// Share of mines found after every timestep, plus the route that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearanceHistory {
    pub shares: Vec<f64>,
    /// Empty for averaged histories.
    pub route: Vec<usize>,
}

impl ClearanceHistory {
    /// Pointwise mean of equally long histories.
    pub fn average(histories: &[ClearanceHistory]) -> Result<ClearanceHistory, SimError> {
        let first = histories.first().ok_or(SimError::NoRuns)?;
        let n = first.shares.len();
        if let Some(h) = histories.iter().find(|h| h.shares.len() != n) {
            return Err(SimError::IncompleteHistory { got: h.shares.len(), expected: n });
        }
        let k = histories.len() as f64;
        let shares = (0..n).map(|i| histories.iter().map(|h| h.shares[i]).sum::<f64>() / k).collect();
        Ok(ClearanceHistory { shares, route: Vec::new() })
    }

    pub fn scorecard(&self, n_tiles: usize) -> Result<Scorecard, SimError> {
        Scorecard::from_shares(&self.shares, n_tiles)
    }
}

fn check_complete(shares: &[f64], n_tiles: usize) -> Result<(), SimError> {
    if shares.len() != n_tiles || n_tiles == 0 {
        return Err(SimError::IncompleteHistory { got: shares.len(), expected: n_tiles });
    }
    Ok(())
}

/// Mean share of mines found over all timesteps.
pub fn demining_score(shares: &[f64], n_tiles: usize) -> Result<f64, SimError> {
    check_complete(shares, n_tiles)?;
    Ok(shares.iter().sum::<f64>() / n_tiles as f64)
}

/// Percentage of tiles cleared when `x` percent of mines had been found.
pub fn t_x(shares: &[f64], x: f64) -> f64 {
    let n = shares.len();
    let target = x / 100.0;
    // guard against the last share summing to 1 - ulp when averaged
    let first = shares.iter().position(|&l| l >= target - 1e-12).unwrap_or(n.saturating_sub(1));
    100.0 * (first + 1) as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub demining_score: f64,
    pub t50: f64,
    pub t75: f64,
    pub t90: f64,
    pub t100: f64,
}

impl Scorecard {
    pub fn from_shares(shares: &[f64], n_tiles: usize) -> Result<Scorecard, SimError> {
        let demining_score = demining_score(shares, n_tiles)?;
        Ok(Scorecard {
            demining_score,
            t50: t_x(shares, 50.0),
            t75: t_x(shares, 75.0),
            t90: t_x(shares, 90.0),
            t100: t_x(shares, 100.0),
        })
    }

    pub fn is_ordered(&self) -> bool {
        self.t50 <= self.t75 && self.t75 <= self.t90 && self.t90 <= self.t100 && self.t100 <= 100.0
    }
}
