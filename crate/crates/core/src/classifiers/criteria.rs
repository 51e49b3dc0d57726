//! Split criteria and the test statistics behind the statistical trees.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

fn total(counts: &[f64]) -> Result<f64> {
    if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
        return Err(Error::invalid("class counts must be finite and nonnegative"));
    }
    let n: f64 = counts.iter().sum();
    if n <= 0.0 {
        return Err(Error::Degenerate("class counts sum to zero".into()));
    }
    Ok(n)
}

/// `1 - Σ p²`.
pub fn gini_impurity(counts: &[f64]) -> Result<f64> {
    let n = total(counts)?;
    Ok(1.0 - counts.iter().map(|c| (c / n).powi(2)).sum::<f64>())
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(counts: &[f64]) -> Result<f64> {
    let n = total(counts)?;
    Ok(-counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|c| {
            let p = c / n;
            p * p.log2()
        })
        .sum::<f64>())
}

pub(crate) fn gini2(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (a, b) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - a * a - b * b
}

pub(crate) fn entropy2(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    c.iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Pearson statistic `Σ (O - E)² / E` with expected counts from the margins,
/// and its degrees of freedom `(r - 1)(c - 1)`.
pub fn chi_square(table: &[Vec<f64>]) -> Result<(f64, usize)> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 || table.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("contingency table must be rectangular and at least 2x2"));
    }
    if table.iter().flatten().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("contingency counts must be finite and nonnegative"));
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    if row_sums.iter().chain(&col_sums).any(|&s| s <= 0.0) {
        return Err(Error::Degenerate("contingency table has an empty margin".into()));
    }
    let n: f64 = row_sums.iter().sum();
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = row_sums[i] * col_sums[j] / n;
            stat += (o - e).powi(2) / e;
        }
    }
    Ok((stat, (rows - 1) * (cols - 1)))
}

/// Upper-tail probability of a chi-square statistic.
pub fn chi_square_p(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .map(|d| d.sf(stat))
        .unwrap_or(1.0)
}

/// Chi-square p-value of a `groups × class` table, ignoring empty rows and
/// columns. A table that collapses below 2×2 has p = 1.
pub(crate) fn table_p_value(table: &[[usize; 2]]) -> (f64, usize) {
    let rows: Vec<&[usize; 2]> = table.iter().filter(|r| r[0] + r[1] > 0).collect();
    let cols: Vec<usize> = (0..2)
        .filter(|&j| rows.iter().any(|r| r[j] > 0))
        .collect();
    if rows.len() < 2 || cols.len() < 2 {
        return (1.0, 0);
    }
    let t: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| cols.iter().map(|&j| r[j] as f64).collect())
        .collect();
    let (stat, dof) = chi_square(&t).expect("margins are positive");
    (chi_square_p(stat, dof), dof)
}

/// One-way ANOVA F-test p-value across groups of values.
pub(crate) fn anova_p_value(groups: &[&[f64]]) -> f64 {
    let groups: Vec<&[f64]> = groups.iter().copied().filter(|g| !g.is_empty()).collect();
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if k < 2 || n <= k {
        return 1.0;
    }
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for g in &groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (m - grand).powi(2);
        within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let scale = groups
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| (x - grand).powi(2))
        .sum::<f64>();
    if between <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return 1.0;
    }
    if within <= 0.0 {
        return 0.0;
    }
    let df1 = (k - 1) as f64;
    let df2 = (n - k) as f64;
    let f = (between / df1) / (within / df2);
    FisherSnedecor::new(df1, df2)
        .map(|d| d.sf(f))
        .unwrap_or(1.0)
}

/// Number of ways `c` categories can be merged into `r` nonempty groups
/// (Stirling number of the second kind); the Bonferroni multiplier for a
/// nominal predictor.
pub(crate) fn nominal_bonferroni(c: usize, r: usize) -> f64 {
    if r == 0 || r > c {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut fact_i = 1.0;
    for i in 0..r {
        if i > 0 {
            fact_i *= i as f64;
        }
        let fact_ri: f64 = (1..=(r - i)).map(|v| v as f64).product();
        let term = ((r - i) as f64).powi(c as i32) / (fact_i * fact_ri);
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum.round().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[10.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[5.0, 5.0]).unwrap(), 0.5);
        assert!((gini_impurity(&[7.0, 3.0]).unwrap() - 0.42).abs() < 1e-12);
        assert!(gini_impurity(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[8.0, 0.0]).unwrap(), 0.0);
        assert_eq!(entropy(&[4.0, 4.0]).unwrap(), 1.0);
        assert!((entropy(&[3.0, 1.0]).unwrap() - 0.8113).abs() < 1e-4);
        assert!(entropy(&[0.0]).is_err());
    }

    #[test]
    fn chi_square_examples() {
        let (s, d) = chi_square(&[vec![10.0, 10.0], vec![10.0, 10.0]]).unwrap();
        assert_eq!((s, d), (0.0, 1));
        let (s, d) = chi_square(&[vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap();
        assert_eq!((s, d), (20.0, 1));
        assert!(chi_square(&[vec![0.0, 0.0], vec![1.0, 2.0]]).is_err());
        assert!(chi_square(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn p_values() {
        // 3.841 is the 95th percentile of chi-square(1).
        assert!((chi_square_p(3.841459, 1) - 0.05).abs() < 1e-6);
        assert_eq!(table_p_value(&[[3, 0], [4, 0]]).0, 1.0);
        assert!(anova_p_value(&[&[1.0, 1.1, 0.9], &[5.0, 5.1, 4.9]]) < 1e-4);
        assert_eq!(anova_p_value(&[&[1.0, 2.0], &[1.0, 2.0]]), 1.0);
        assert_eq!(anova_p_value(&[&[1.0, 1.0], &[2.0, 2.0]]), 0.0);
    }

    #[test]
    fn bonferroni_counts_partitions() {
        assert_eq!(nominal_bonferroni(5, 2), 15.0);
        assert_eq!(nominal_bonferroni(4, 3), 6.0);
        assert_eq!(nominal_bonferroni(3, 3), 1.0);
        assert_eq!(nominal_bonferroni(2, 2), 1.0);
    }
}
