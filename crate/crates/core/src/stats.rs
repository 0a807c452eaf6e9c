//! Order-independent sample moments.

/// Mean and sample standard deviation (n − 1 denominator) of `values`.
///
/// The values are sorted and accumulated as offsets from the smallest one,
/// so the result is bit-identical under any permutation of the input and
/// an all-equal input yields exactly that value with zero deviation.
/// Returns `None` for an empty slice. A single value has deviation 0.
pub fn mean_and_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let origin = sorted[0];
    let offset_sum: f64 = sorted.iter().map(|v| v - origin).sum();
    let mean = origin + offset_sum / n;
    if sorted.len() == 1 {
        return Some((mean, 0.0));
    }
    let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((mean, (ss / (n - 1.0)).sqrt()))
}
