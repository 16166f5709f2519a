pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradient and hessian of the logistic loss w.r.t. the raw score.
pub fn logistic_grad_hess(raw: f64, y: f64) -> (f64, f64) {
    let p = sigmoid(raw);
    (p - y, p * (1.0 - p))
}

/// Binary cross-entropy of label `y` at raw score `raw`, computed stably.
pub fn log_loss(raw: f64, y: f64) -> f64 {
    // log(1 + e^raw) - y * raw
    let softplus = if raw > 0.0 {
        raw + (-raw).exp().ln_1p()
    } else {
        raw.exp().ln_1p()
    };
    softplus - y * raw
}
