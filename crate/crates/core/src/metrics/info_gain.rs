use std::collections::HashMap;

use crate::error::{Error, Result};

/// Shannon entropy in bits of a label multiset.
pub fn entropy(grades: &[u8]) -> f64 {
    if grades.is_empty() {
        return 0.0;
    }
    let mut counts = [0usize; 256];
    for &g in grades {
        counts[g as usize] += 1;
    }
    let n = grades.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Bin index per value. When there are at most `bins` distinct values each
/// gets its own bin; otherwise bins are equal-frequency over the sorted values,
/// with every copy of a value placed in the bin of its first occurrence.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut distinct = 0usize;
    for w in order.windows(2) {
        if values[w[0]] != values[w[1]] {
            distinct += 1;
        }
    }
    if n > 0 {
        distinct += 1;
    }

    let mut out = vec![0usize; n];
    let mut current_bin = 0usize;
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 && values[i] != values[order[pos - 1]] {
            current_bin = if distinct <= bins {
                current_bin + 1
            } else {
                pos * bins / n
            };
        }
        out[i] = current_bin;
    }
    out
}

/// `H(grade) - H(grade | binned feature)` in bits.
pub fn info_gain(feature_values: &[f64], grades: &[u8], bins: usize) -> Result<f64> {
    if feature_values.len() != grades.len() {
        return Err(Error::Precondition(format!(
            "{} feature values for {} grades",
            feature_values.len(),
            grades.len()
        )));
    }
    if grades.is_empty() {
        return Err(Error::Precondition("info gain needs at least one value".into()));
    }
    if bins == 0 {
        return Err(Error::Precondition("bin count must be positive".into()));
    }
    let total = entropy(grades);
    let assignment = equal_frequency_bins(feature_values, bins);
    let mut per_bin: HashMap<usize, Vec<u8>> = HashMap::new();
    for (&b, &g) in assignment.iter().zip(grades) {
        per_bin.entry(b).or_default().push(g);
    }
    let n = grades.len() as f64;
    let mut bins_sorted: Vec<_> = per_bin.into_iter().collect();
    bins_sorted.sort_unstable_by_key(|(b, _)| *b);
    let conditional: f64 = bins_sorted
        .iter()
        .map(|(_, gs)| gs.len() as f64 / n * entropy(gs))
        .sum();
    Ok((total - conditional).clamp(0.0, total))
}
