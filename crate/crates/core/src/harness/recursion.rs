use super::HarnessError;

/// Default exponent `e` in the `K^e` loss of one induction step.
pub const DEFAULT_K_EXPONENT: f64 = 4.0;

/// `n` with `R = K^n`, or an error when `R` is not a power of `K`.
fn steps(k: u64, r: u64) -> Result<u32, HarnessError> {
    if k < 2 {
        return Err(HarnessError::NonCompatibleScales(format!("K = {k} < 2")));
    }
    let mut n = 0;
    let mut v = 1u64;
    while v < r {
        v = v
            .checked_mul(k)
            .ok_or_else(|| HarnessError::NonCompatibleScales(format!("R = {r} overflows powers of K = {k}")))?;
        n += 1;
    }
    if v != r || n == 0 {
        return Err(HarnessError::NonCompatibleScales(format!("R = {r} is not a positive power of K = {k}")));
    }
    Ok(n)
}

/// Bounds `D(K), D(K²), …, D(R)` from
/// `D(K) = C K^e`, `D(K^j) = C K^e K^{jε} + 2 C K^ε D(K^{j−1})`.
pub fn recursion_trajectory(c: f64, k: u64, eps: f64, r: u64, e: f64) -> Result<Vec<f64>, HarnessError> {
    let n = steps(k, r)?;
    let kf = k as f64;
    let base = c * kf.powf(e);
    let mut out = Vec::with_capacity(n as usize);
    let mut d = base;
    out.push(d);
    for j in 2..=n {
        d = base * kf.powf(j as f64 * eps) + 2.0 * c * kf.powf(eps) * d;
        out.push(d);
    }
    Ok(out)
}

/// The bound on `D(R)` after iterating from `D(K)` down to scale `K`.
pub fn recursion_iterate(c: f64, k: u64, eps: f64, r: u64, e: f64) -> Result<f64, HarnessError> {
    Ok(*recursion_trajectory(c, k, eps, r, e)?.last().expect("at least one scale"))
}

/// Unrolled form `C K^e R^ε Σ_{i<n−1} (2C)^i + (2C K^ε)^{n−1} C K^e`.
pub fn recursion_closed_form(c: f64, k: u64, eps: f64, r: u64, e: f64) -> Result<f64, HarnessError> {
    let n = steps(k, r)? as i32;
    let kf = k as f64;
    let q = 2.0 * c;
    let geo = if (q - 1.0).abs() < 1e-12 {
        (n - 1) as f64
    } else {
        (q.powi(n - 1) - 1.0) / (q - 1.0)
    };
    let base = c * kf.powf(e);
    Ok(base * (r as f64).powf(eps) * geo + (q * kf.powf(eps)).powi(n - 1) * base)
}
