/// Width of the moving average applied to `L_k`.
pub const STOP_WINDOW: usize = 5;
/// Consecutive increases of the moving average that trigger a stop.
pub const STOP_PATIENCE: usize = 3;

/// Heuristic stopping rule on `L_k = EL_k + cost·k`.
///
/// `trace` holds `(k, EL_k)` pairs in step order. Fires once the moving
/// average of `L_k` has risen [`STOP_PATIENCE`] times in a row. A cost of 0
/// disables the rule.
pub fn stop_rule(trace: &[(usize, f64)], stop_cost: f64) -> bool {
    if !(stop_cost > 0.0) || trace.len() < STOP_WINDOW + STOP_PATIENCE {
        return false;
    }
    let penalized: Vec<f64> = trace.iter().map(|&(k, el)| el + stop_cost * k as f64).collect();
    let averages: Vec<f64> =
        penalized.windows(STOP_WINDOW).map(|w| w.iter().sum::<f64>() / STOP_WINDOW as f64).collect();
    averages[averages.len() - STOP_PATIENCE - 1..].windows(2).all(|w| w[1] > w[0])
}
