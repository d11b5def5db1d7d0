//! Partition-agreement scores: normalized mutual information (geometric
//! mean normalizer, natural logs) and the Rand index.

use crate::error::{Error, Result};

/// Contingency table between two labelings.
#[derive(Debug, Clone)]
pub struct Contingency {
    table: Vec<Vec<usize>>,
    row_marginals: Vec<usize>,
    col_marginals: Vec<usize>,
    total: usize,
}

impl Contingency {
    pub fn from_labels(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension(format!(
                "label slices have lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        let rows = a.iter().max().map_or(0, |&m| m + 1);
        let cols = b.iter().max().map_or(0, |&m| m + 1);
        let mut table = vec![vec![0usize; cols]; rows];
        for (&u, &v) in a.iter().zip(b) {
            table[u][v] += 1;
        }
        let row_marginals: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
        let col_marginals: Vec<usize> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        Ok(Contingency {
            table,
            row_marginals,
            col_marginals,
            total: a.len(),
        })
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

fn entropy(marginals: &[usize], total: usize) -> f64 {
    let n = total as f64;
    marginals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `I(a;b) / sqrt(H(a) H(b))`.
///
/// Two single-cluster partitions score 1; exactly one zero-entropy
/// partition scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty label slices".into()));
    }
    let ct = Contingency::from_labels(a, b)?;
    let n = ct.total as f64;
    let ha = entropy(&ct.row_marginals, ct.total);
    let hb = entropy(&ct.col_marginals, ct.total);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (u, row) in ct.table.iter().enumerate() {
        for (v, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let p_uv = c as f64 / n;
            let p_u = ct.row_marginals[u] as f64 / n;
            let p_v = ct.col_marginals[v] as f64 / n;
            mi += p_uv * (p_uv / (p_u * p_v)).ln();
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

fn choose2(c: usize) -> u64 {
    let c = c as u64;
    if c < 2 {
        0
    } else {
        c * (c - 1) / 2
    }
}

/// Rand index: the fraction of sample pairs on which the two partitions
/// agree (co-clustered in both, or separated in both). Computed from
/// contingency sums.
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "rand index needs at least 2 samples".into(),
        ));
    }
    let ct = Contingency::from_labels(a, b)?;
    let together_both: u64 = ct
        .table
        .iter()
        .flat_map(|r| r.iter())
        .map(|&c| choose2(c))
        .sum();
    let together_a: u64 = ct.row_marginals.iter().map(|&c| choose2(c)).sum();
    let together_b: u64 = ct.col_marginals.iter().map(|&c| choose2(c)).sum();
    let all_pairs = choose2(ct.total);
    let disagreements = (together_a - together_both) + (together_b - together_both);
    Ok((all_pairs - disagreements) as f64 / all_pairs as f64)
}
