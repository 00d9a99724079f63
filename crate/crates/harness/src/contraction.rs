//! Empirical contraction rates from per-round squared distances.

use verisim_core::Error as CoreError;

use crate::error::Result;
use crate::stats::linear_fit;

/// Fewest rounds [`estimate_contraction`] fits by default.
pub const DEFAULT_MIN_ROUNDS: usize = 10;

/// `exp(slope / 2)` of the least-squares line through `log values[k]`
/// against `k`, over rounds `burn_in..`.
///
/// Values should be mean squared distances, so the result estimates the
/// per-round contraction of the distance itself.
pub fn estimate_contraction(values: &[f64], burn_in: usize, min_rounds: usize) -> Result<f64> {
    let tail = values.get(burn_in..).unwrap_or(&[]);
    let usable = tail.iter().take_while(|v| **v > 0.0 && v.is_finite()).count();
    if usable < min_rounds.max(2) || usable < tail.len() {
        return Err(CoreError::InsufficientRounds {
            needed: min_rounds.max(2),
            found: usable,
        }
        .into());
    }
    let x: Vec<f64> = (burn_in..values.len()).map(|k| k as f64).collect();
    let y: Vec<f64> = tail.iter().map(|v| v.ln()).collect();
    let (_, slope) = linear_fit(&x, &y).expect("at least two distinct rounds");
    Ok((0.5 * slope).exp())
}

/// Rounds `burn_in..end` where each value exceeds `factor` times its noise,
/// stopping at the first that does not.
pub fn resolved_rounds(values: &[f64], noise: &[f64], burn_in: usize, factor: f64) -> usize {
    let resolved = values
        .iter()
        .zip(noise)
        .skip(burn_in)
        .take_while(|(v, n)| **v > factor * **n)
        .count();
    burn_in + resolved
}

/// [`estimate_contraction`] over the rounds the signal resolves above noise.
pub fn estimate_contraction_resolved(
    values: &[f64],
    noise: &[f64],
    burn_in: usize,
    factor: f64,
    min_rounds: usize,
) -> Result<f64> {
    let end = resolved_rounds(values, noise, burn_in, factor);
    estimate_contraction(&values[..end.min(values.len())], burn_in, min_rounds)
}
