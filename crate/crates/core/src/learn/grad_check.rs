//! Finite-difference verification of analytic gradients.

/// Compare `analytic` against central differences of `eval` at `params`,
/// parameter-wise. Returns the maximum relative error; `params` is restored
/// on exit.
pub fn grad_check(
    params: &mut [f64],
    mut eval: impl FnMut(&[f64]) -> f64,
    analytic: &[f64],
    h: f64,
) -> f64 {
    assert_eq!(params.len(), analytic.len());
    let mut max_rel: f64 = 0.0;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        let lp = eval(params);
        params[i] = orig - h;
        let lm = eval(params);
        params[i] = orig;
        let numeric = (lp - lm) / (2.0 * h);
        let denom = numeric.abs().max(analytic[i].abs()).max(1e-8);
        max_rel = max_rel.max((numeric - analytic[i]).abs() / denom);
    }
    max_rel
}
