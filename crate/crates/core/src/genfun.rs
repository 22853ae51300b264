//! Generating functions of the cumulative mean-fitness products.
//!
//! With `W_n = w_0 w_1 ... w_{n-1}` and `beta_bar` defined by
//! `(1 - beta_bar)^k = prod_i (1 - beta_i)`, the residue-split series
//!
//! ```text
//! w^(i)(z) = sum_{n >= 1, n = i (mod k)} W_n z^n / (1 - beta_bar)^n
//! ```
//!
//! converges for `0 <= z < z_c` and admits a determinant closed form: with
//! `M` the column of residue-split moment generating functions of `p_0`
//! (its residue-0 entry stripped of the `n = 0` term, since the series
//! starts at `n = 1`),
//!
//! ```text
//! w^(j)(z) = c_{j,0} det((I - A(z), M)_j) / det(I - A(z)),
//! ```
//!
//! where `(I - A, M)_j` replaces the `j`-th column by `M` and the constants
//! `c_{i,j}` are consecutive products of `(1 - beta)/(1 - beta_bar)`
//! factors. Both routes are computed here, the series with a self-certifying
//! geometric tail bound, and the linear recurrence tying them together can
//! be checked at any truncation depth.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::measure::Measure;
use crate::recursion::{iterate, ModelInstance};
use crate::spectral::{build_a, find_critical};

/// `1 - exp(mean log(1 - beta_i))`, the stable evaluation of the geometric
/// mean constraint `(1 - beta_bar)^k = prod (1 - beta_i)`.
pub fn beta_bar(betas: &[f64]) -> f64 {
    let mean_log = betas.iter().map(|b| (1.0 - b).ln()).sum::<f64>() / betas.len() as f64;
    1.0 - mean_log.exp()
}

/// The reciprocal-pair coefficient matrix: `c_{i,i} = 1` and, for `i != j`
/// with `d = (i - j) mod k`,
/// `c_{i,j} = prod_{q=0}^{d-1} (1 - beta_{[i-q]}) / (1 - beta_bar)^d`.
/// Satisfies `c_{i,j} c_{j,i} = 1`.
pub fn c_matrix(betas: &[f64]) -> Vec<f64> {
    let k = betas.len();
    let bb = beta_bar(betas);
    let mut c = vec![1.0; k * k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = (i + k - j) % k;
            let mut prod = 1.0;
            for q in 0..d {
                prod *= (1.0 - betas[(i + k - q) % k]) / (1.0 - bb);
            }
            c[i * k + j] = prod;
        }
    }
    c
}

/// Residue-split moment generating function of the initial distribution:
/// `m^(i)(z) = sum_{n >= 0, n = i (mod k)} z^n m_n
///           = integral (zx)^i / (1 - (zx)^k) p_0(dx)`.
pub fn m_gen(p0: &Measure, residue: usize, z: f64, k: usize) -> Result<f64> {
    let mut acc = 0.0;
    for atom in p0.atoms() {
        let zx = z * atom.location;
        if zx >= 1.0 - 1e-12 {
            return Err(Error::OutsideDomain { zx });
        }
        acc += atom.mass * zx.powi(residue as i32) / (1.0 - zx.powi(k as i32));
    }
    Ok(acc)
}

/// The `M` column of the closed form: `m^(i)(z)` with the `n = 0` term
/// removed from the residue-0 entry.
fn m_column(model: &ModelInstance, z: f64) -> Result<Vec<f64>> {
    let k = model.k();
    (0..k)
        .map(|i| {
            let raw = m_gen(model.p0(), i, z, k)?;
            Ok(if i == 0 { raw - 1.0 } else { raw })
        })
        .collect()
}

/// Truncated series values per residue plus self-certifying tail bounds.
#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub values: Vec<f64>,
    /// Geometric remainder bound from the observed period-block ratios plus
    /// a floating-point summation allowance.
    pub tail_bounds: Vec<f64>,
    pub terms_used: usize,
}

fn disk_gate(model: &ModelInstance, z: f64) -> Result<f64> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::InvalidModel(format!("z = {z} must be a non-negative real")));
    }
    let z_c = find_critical(model)?.z_c;
    if z >= z_c {
        return Err(Error::OutsideConvergenceDisk { z, z_c });
    }
    Ok(z_c)
}

/// Partial sums of `w^(i)` up to `n = n_terms`, from a simulated trajectory.
pub fn weight_series(model: &ModelInstance, z: f64, n_terms: usize) -> Result<SeriesResult> {
    disk_gate(model, z)?;
    let k = model.k();
    let traj = iterate(model, n_terms)?;
    let log_scale = if z > 0.0 {
        z.ln() - (1.0 - beta_bar(&model.cycle().betas())).ln()
    } else {
        f64::NEG_INFINITY
    };
    let mut values = vec![0.0f64; k];
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); k];
    for n in 1..=n_terms {
        let rec = &traj.records[n];
        let t = if z > 0.0 {
            (rec.log_weight_product + n as f64 * log_scale).exp()
        } else {
            0.0
        };
        values[rec.residue] += t;
        terms[rec.residue].push(t);
    }
    let tail_bounds = (0..k)
        .map(|i| {
            let ts = &terms[i];
            let fp_allowance = 1e-14 * (1.0 + values[i].abs());
            let Some(&last) = ts.last() else {
                return fp_allowance;
            };
            if last <= 0.0 {
                return fp_allowance;
            }
            let mut ratio: f64 = 0.0;
            for pair in ts.windows(2).rev().take(3) {
                if pair[0] > 0.0 {
                    ratio = ratio.max(pair[1] / pair[0]);
                }
            }
            let ratio = ratio * (1.0 + 1e-6);
            if ratio >= 1.0 {
                f64::INFINITY
            } else {
                last * ratio / (1.0 - ratio) + fp_allowance
            }
        })
        .collect();
    Ok(SeriesResult {
        values,
        tail_bounds,
        terms_used: n_terms,
    })
}

/// Determinant closed form for the same values, through Cramer's rule on
/// `I - A(z)` with the `j`-th column replaced by the `M` column.
pub fn weight_closed_form(model: &ModelInstance, z: f64) -> Result<Vec<f64>> {
    disk_gate(model, z)?;
    let k = model.k();
    let a = build_a(model.cycle(), z)?;
    if !a.all_finite() {
        return Err(Error::DivergentMatrix { z });
    }
    let mut i_minus_a = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            i_minus_a[i * k + j] = if i == j { 1.0 } else { 0.0 } - a.get(i, j);
        }
    }
    let denom = linalg::lu_det(i_minus_a.clone(), k);
    if denom.abs() < 1e-300 {
        return Err(Error::NumericFailure(format!(
            "det(I - A(z)) vanished at z = {z} inside the disk"
        )));
    }
    let m = m_column(model, z)?;
    let c = c_matrix(&model.cycle().betas());
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let mut replaced = i_minus_a.clone();
        for i in 0..k {
            replaced[i * k + j] = m[i];
        }
        out.push(c[j * k] * linalg::lu_det(replaced, k) / denom);
    }
    Ok(out)
}

/// Residual of the linear recurrence tying the series together, evaluated
/// with truncated-series values:
/// `max_i |w^(i) - sum_j c_{i,j} A_{i,j}(z) w^(j) - c_{i,0} M_i|`.
/// Shrinks geometrically with the truncation depth until floating-point
/// noise dominates.
pub fn recurrence_check(model: &ModelInstance, z: f64, n_terms: usize) -> Result<f64> {
    let series = weight_series(model, z, n_terms)?.values;
    let k = model.k();
    let a = build_a(model.cycle(), z)?;
    let c = c_matrix(&model.cycle().betas());
    let m = m_column(model, z)?;
    let mut worst = 0.0f64;
    for i in 0..k {
        let mut rhs = c[i * k] * m[i];
        for j in 0..k {
            rhs += c[i * k + j] * a.get(i, j) * series[j];
        }
        worst = worst.max((series[i] - rhs).abs());
    }
    Ok(worst)
}

/// Everything the genfun surface reports for one `z`.
#[derive(Clone, Debug)]
pub struct WeightGenFun {
    pub z: f64,
    pub series: Vec<f64>,
    pub closed: Vec<f64>,
    pub tail_bounds: Vec<f64>,
    pub beta_bar: f64,
    /// Row-major `c_{i,j}`.
    pub c: Vec<f64>,
    /// Raw residue-split moment generating functions of `p_0`.
    pub m_gen: Vec<f64>,
    pub recurrence_residual: f64,
    pub terms_used: usize,
}

pub fn evaluate(model: &ModelInstance, z: f64, n_terms: usize) -> Result<WeightGenFun> {
    let series = weight_series(model, z, n_terms)?;
    let closed = weight_closed_form(model, z)?;
    let recurrence_residual = recurrence_check(model, z, n_terms)?;
    let k = model.k();
    let m_gen_raw = (0..k)
        .map(|i| m_gen(model.p0(), i, z, k))
        .collect::<Result<Vec<f64>>>()?;
    Ok(WeightGenFun {
        z,
        series: series.values,
        closed,
        tail_bounds: series.tail_bounds,
        beta_bar: beta_bar(&model.cycle().betas()),
        c: c_matrix(&model.cycle().betas()),
        m_gen: m_gen_raw,
        recurrence_residual,
        terms_used: n_terms,
    })
}

/// Over random matrices, the normalized deviation
/// `|det(C o A) - det(A)| / scale` of the Hadamard-product identity, where
/// `C` is the reciprocal-pair matrix of the given betas and the scale is a
/// Hadamard bound on the determinant. The identity is exact in exact
/// arithmetic for any `A`.
pub fn hadamard_check(betas: &[f64], trials: usize, seed: u64) -> Result<f64> {
    if betas.iter().any(|b| !(b.is_finite() && *b > 0.0 && *b < 1.0)) {
        return Err(Error::InvalidModel(
            "hadamard check needs betas strictly inside (0,1)".into(),
        ));
    }
    let k = betas.len();
    let c = c_matrix(betas);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let a: Vec<f64> = (0..k * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hadamard: Vec<f64> = a.iter().zip(&c).map(|(x, y)| x * y).collect();
        // Hadamard's inequality on the row norms bounds the determinant scale.
        let scale = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| hadamard[i * k + j] * hadamard[i * k + j])
                    .sum::<f64>()
                    .sqrt()
            })
            .product::<f64>()
            .max(1.0);
        let det_a = linalg::lu_det(a, k);
        let det_h = linalg::lu_det(hadamard, k);
        worst = worst.max((det_h - det_a).abs() / scale);
    }
    Ok(worst)
}
