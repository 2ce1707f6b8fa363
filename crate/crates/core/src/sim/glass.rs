//! Closed-form pieces of the Glass gate model `γ dx/dt = -x + Λ`.

/// State after relaxing for `dt_ns` toward the constant Boolean target.
#[inline]
pub fn relax_node(x0: f64, target: bool, dt_ns: f64, gamma_ns: f64) -> f64 {
    let l = if target { 1.0 } else { 0.0 };
    l + (x0 - l) * (-dt_ns / gamma_ns).exp()
}

/// Time until a trajectory relaxing toward `target` from `x0` crosses the
/// threshold `q`, or `None` when it starts on the target's side or never
/// reaches `q`. A node reads high while `x >= q`.
#[inline]
pub fn crossing_time(x0: f64, target: bool, q: f64, gamma_ns: f64) -> Option<f64> {
    if target {
        // rising toward 1: output turns on once x reaches q
        if x0 >= q {
            return None;
        }
        Some(gamma_ns * ((x0 - 1.0) / (q - 1.0)).ln())
    } else {
        // falling toward 0: output turns off once x drops below q
        if x0 < q {
            return None;
        }
        Some(gamma_ns * (x0 / q).ln())
    }
}
