/// Why a fit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Windowed medians of the monitored log-likelihood stopped moving.
    Tolerance,
    MaxIterations,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Tolerance => "tol",
            StopReason::MaxIterations => "max_iter",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Relative change between the medians of the last two windows of `trace`,
/// or `None` while fewer than `2 · window` values are available.
pub fn window_change(trace: &[f64], window: usize) -> Option<f64> {
    if trace.len() < 2 * window {
        return None;
    }
    let end = trace.len();
    let current = median(&trace[end - window..]);
    let previous = median(&trace[end - 2 * window..end - window]);
    Some((current - previous).abs() / previous.abs().max(f64::MIN_POSITIVE))
}

pub fn converged(trace: &[f64], window: usize, tol: f64) -> bool {
    window_change(trace, window).is_some_and(|c| c < tol)
}
