//! Paired t-test and Fleiss' kappa.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    /// Zero-variance differences with a nonzero mean: `t` is infinite and `p` is 0.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::validation("paired t-test needs at least 2 pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest {
                t: 0.0,
                p: 1.0,
                df,
                degenerate: false,
            }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                p: 0.0,
                df,
                degenerate: true,
            }
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        p,
        df,
        degenerate: false,
    })
}

/// Fleiss' kappa over an items x categories matrix of rating counts.
pub fn fleiss_kappa(counts: &[Vec<u32>]) -> Result<f64> {
    let first = counts
        .first()
        .ok_or_else(|| Error::validation("fleiss' kappa needs at least one item"))?;
    let k = first.len();
    let n: u32 = first.iter().sum();
    if n < 2 {
        return Err(Error::validation(
            "fleiss' kappa needs at least 2 ratings per item",
        ));
    }
    for (i, row) in counts.iter().enumerate() {
        if row.len() != k || row.iter().sum::<u32>() != n {
            return Err(Error::validation(format!(
                "item {i} has a different number of ratings or categories than item 0"
            )));
        }
    }
    let items = counts.len() as f64;
    let n = f64::from(n);
    let p_bar = counts
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| f64::from(c).powi(2)).sum();
            (sq - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..k)
        .map(|j| {
            let pj = counts.iter().map(|row| f64::from(row[j])).sum::<f64>() / (items * n);
            pj * pj
        })
        .sum();
    if p_e == 1.0 {
        return if p_bar == 1.0 {
            Ok(1.0)
        } else {
            Err(Error::Degenerate("chance agreement is 1".into()))
        };
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}
