use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::error::{Error, Result};

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub positive: usize,
    pub negative: usize,
    pub ties: usize,
    /// P(at least `positive` successes) under Binomial(positive + negative, 1/2).
    pub p_value: f64,
}

/// One-sided paired sign test of H1: `a` tends to exceed `b`. Ties are dropped.
pub fn sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let (mut pos, mut neg) = (0usize, 0usize);
    for (x, y) in a.iter().zip(b) {
        if x > y {
            pos += 1;
        } else if x < y {
            neg += 1;
        }
    }
    let n = pos + neg;
    let p_value = if n == 0 || pos == 0 {
        1.0
    } else {
        let bin = Binomial::new(0.5, n as u64).map_err(|e| Error::Contract(e.to_string()))?;
        bin.sf(pos as u64 - 1)
    };
    Ok(SignTest { positive: pos, negative: neg, ties: a.len() - n, p_value })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of homogeneity on an r×c table of counts. Rows or
/// columns that are all zero are dropped.
pub fn chi_square(table: &[Vec<u64>]) -> Result<ChiSquare> {
    let cols = table.first().map_or(0, Vec::len);
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::Contract("ragged contingency table".into()));
    }
    let rows: Vec<&Vec<u64>> = table.iter().filter(|r| r.iter().any(|&c| c > 0)).collect();
    let live: Vec<usize> = (0..cols).filter(|&j| rows.iter().any(|r| r[j] > 0)).collect();
    if rows.len() < 2 || live.len() < 2 {
        return Err(Error::input(None, "chi-square needs at least a 2x2 table with nonzero margins"));
    }
    let total: f64 = rows.iter().flat_map(|r| live.iter().map(move |&j| r[j] as f64)).sum();
    let col_sum: Vec<f64> = live.iter().map(|&j| rows.iter().map(|r| r[j] as f64).sum()).collect();
    let mut stat = 0.0;
    for r in &rows {
        let row_sum: f64 = live.iter().map(|&j| r[j] as f64).sum();
        for (k, &j) in live.iter().enumerate() {
            let e = row_sum * col_sum[k] / total;
            stat += (r[j] as f64 - e).powi(2) / e;
        }
    }
    let dof = (rows.len() - 1) * (live.len() - 1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Contract(e.to_string()))?;
    Ok(ChiSquare { statistic: stat, dof, p_value: dist.sf(stat) })
}
