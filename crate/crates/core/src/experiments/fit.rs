use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::study::{Column, ConvergenceTable};

/// Least-squares fit of `log value = intercept + slope * log N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Fits the empirical rate of `column`; needs at least four rows with positive values.
pub fn fit_rate(table: &ConvergenceTable, column: Column) -> Result<RateFit> {
    if table.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 4 rows, got {}",
            table.len()
        )));
    }
    let mut xs = Vec::with_capacity(table.len());
    let mut ys = Vec::with_capacity(table.len());
    for r in &table.rows {
        let v = r.get(column).ok_or_else(|| {
            Error::InvalidArgument(format!("column {column:?} is missing at N = {}", r.n))
        })?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "nonpositive value {v} in column {column:?} at N = {}",
                r.n
            )));
        }
        xs.push((r.n as f64).ln());
        ys.push(v.ln());
    }
    Ok(ols(&xs, &ys))
}

pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> RateFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    RateFit { slope, intercept, r2 }
}
