//! Censoring-aware evaluation metrics.

use crate::curve::SurvivalCurve;
use crate::error::{Result, SurvError};

/// Smallest censoring-survival value used as an IPCW denominator.
pub const CENSOR_FLOOR: f64 = 1e-8;

/// Harrell's concordance index.
///
/// A pair is comparable when `T_i > T_j` and unit `j` had the event; it is
/// concordant when the earlier failure `j` has the higher risk. Equal risks
/// count one half.
pub fn c_index(times: &[f64], events: &[bool], risks: &[f64]) -> Result<f64> {
    let n = times.len();
    if events.len() != n {
        return Err(SurvError::Dimension { expected: n, actual: events.len() });
    }
    if risks.len() != n {
        return Err(SurvError::Dimension { expected: n, actual: risks.len() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut concordant = 0.0;
    let mut comparable = 0u64;
    for (pos, &j) in order.iter().enumerate() {
        if !events[j] {
            continue;
        }
        for &i in &order[pos + 1..] {
            if times[i] <= times[j] {
                continue;
            }
            comparable += 1;
            if risks[j] > risks[i] {
                concordant += 1.0;
            } else if risks[j] == risks[i] {
                concordant += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(SurvError::NoComparablePairs);
    }
    Ok(concordant / comparable as f64)
}

fn check_lengths(times: &[f64], events: &[bool], preds: &[f64]) -> Result<()> {
    if events.len() != times.len() {
        return Err(SurvError::Dimension { expected: times.len(), actual: events.len() });
    }
    if preds.len() != times.len() {
        return Err(SurvError::Dimension { expected: times.len(), actual: preds.len() });
    }
    if times.is_empty() {
        return Err(SurvError::InvalidInput("no observations".into()));
    }
    Ok(())
}

/// Brier score at `t` for data with no censoring at or before `t`.
pub fn brier(t: f64, times: &[f64], events: &[bool], predicted_survival: &[f64]) -> Result<f64> {
    check_lengths(times, events, predicted_survival)?;
    if times.iter().zip(events).any(|(&ti, &e)| !e && ti <= t) {
        return Err(SurvError::CensoredBeforeTime(t));
    }
    let sum: f64 = times
        .iter()
        .zip(predicted_survival)
        .map(|(&ti, &s)| {
            let alive = if ti > t { 1.0 } else { 0.0 };
            (alive - s).powi(2)
        })
        .sum();
    Ok(sum / times.len() as f64)
}

/// IPCW Brier score at `t` with the count of denominators that hit
/// [`CENSOR_FLOOR`].
///
/// Units with an event at or before `t` are weighted by `1/G(T_i-)`, units
/// still at risk after `t` by `1/G(t)`; units censored at or before `t`
/// contribute nothing but stay in the `1/N` normalization.
pub fn weighted_brier_counted(
    t: f64,
    times: &[f64],
    events: &[bool],
    predicted_survival: &[f64],
    censor_curve: &SurvivalCurve,
) -> Result<(f64, usize)> {
    check_lengths(times, events, predicted_survival)?;
    let mut floored = 0;
    let mut weight = |g: f64| {
        if g < CENSOR_FLOOR {
            floored += 1;
            1.0 / CENSOR_FLOOR
        } else {
            1.0 / g
        }
    };
    let g_t = censor_curve.eval(t);
    let mut sum = 0.0;
    for ((&ti, &e), &s) in times.iter().zip(events).zip(predicted_survival) {
        if ti <= t {
            if e {
                sum += s * s * weight(censor_curve.left_limit(ti));
            }
        } else {
            sum += (1.0 - s).powi(2) * weight(g_t);
        }
    }
    Ok((sum / times.len() as f64, floored))
}

pub fn weighted_brier(
    t: f64,
    times: &[f64],
    events: &[bool],
    predicted_survival: &[f64],
    censor_curve: &SurvivalCurve,
) -> Result<f64> {
    let (bs, floored) = weighted_brier_counted(t, times, events, predicted_survival, censor_curve)?;
    if floored > 0 {
        log::warn!("weighted Brier at t={t}: {floored} censoring weights floored at {CENSOR_FLOOR}");
    }
    Ok(bs)
}

/// Last time at which IPCW weights from `censor_curve` stay finite: the
/// largest training time before the censoring estimate reaches zero, or
/// infinity when it never does.
pub fn ipcw_horizon(train_times: &[f64], censor_curve: &SurvivalCurve) -> f64 {
    let Some(pos) = censor_curve.values().iter().position(|&g| g <= 0.0) else {
        return f64::INFINITY;
    };
    let zero_at = censor_curve.knots()[pos];
    train_times.iter().copied().filter(|&t| t < zero_at).fold(0.0, f64::max)
}

/// Trapezoidal time-average of `BS(t)` over the evaluation grid.
pub fn integrated_brier(eval_times: &[f64], scores: &[f64]) -> Result<f64> {
    if eval_times.len() != scores.len() {
        return Err(SurvError::Dimension { expected: eval_times.len(), actual: scores.len() });
    }
    if eval_times.len() < 2 {
        return Err(SurvError::InvalidInput("integrated Brier score needs at least 2 time points".into()));
    }
    if eval_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SurvError::InvalidInput("evaluation times must be strictly increasing".into()));
    }
    let area: f64 = eval_times
        .windows(2)
        .zip(scores.windows(2))
        .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
        .sum();
    Ok(area / (eval_times[eval_times.len() - 1] - eval_times[0]))
}

/// `points` equally spaced times on `[0, max_time]`.
pub fn evaluation_grid(max_time: f64, points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points).map(|i| max_time * i as f64 / last).collect()
}
