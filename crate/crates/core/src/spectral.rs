//! The moment matrix `A(z)`, its Perron eigenvalue, and the condensation
//! criteria built on it.
//!
//! For a cycle of `k` environments `(beta_j, q_j)` and `z >= 0`, the entries
//! are residue-split moment generating functions of the sub-probability
//! measures `beta_j q_j(dx)`:
//!
//! ```text
//! A(z)[i][j] = mu_j^{[i-j]}(z),    mu_j^i(z) = integral (zx)^i / (1 - (zx)^k) beta_j q_j(dx).
//! ```
//!
//! The phase of the model is read off the Perron eigenvalue `rho(A(z))` at
//! `z = 1/eta0`: below 1 an atom condenses at the top fitness, at or above 1
//! it does not. The critical parameter is
//! `z_c = sup { z <= 1/eta0 : rho(A(z)) <= 1 }`, and the pair `(U, alpha)`
//! solving `A(z_c) U + alpha 1 = U` with `U_0 = 1` parameterizes the limit
//! laws. Equivalent sign tests (`det(I - A(z))`, the two-environment
//! two-term form, the column-sum sandwich) are provided alongside, plus a
//! census of real eigenvalues at least 1 which certifies that the
//! determinant test is legitimate.

use crate::error::{Error, Result};
use crate::linalg;
use crate::recursion::{Environment, EnvironmentCycle, ModelInstance, SelectionCycle};

/// Relative band around `z x = 1` treated as a pole.
const POLE_TOL: f64 = 1e-12;
/// `|rho(A(1/eta0)) - 1|` below this is classified as the boundary regime.
const BOUNDARY_TOL: f64 = 1e-10;

/// A single entry of the moment matrix: finite value or divergent series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MuValue {
    Finite(f64),
    Divergent,
}

impl MuValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            MuValue::Finite(v) => Some(v),
            MuValue::Divergent => None,
        }
    }
}

/// Residue-split moment generating function of `beta q(dx)`:
/// `mu^residue(z) = sum_{n >= 0, n = residue (mod k)} z^n integral x^n beta q(dx)`.
///
/// Divergent exactly when some atom satisfies `z x = 1`; atoms with
/// `z x > 1` put `z` outside the admissible domain and are an error.
pub fn mu(env: &Environment, residue: usize, z: f64, k: usize) -> Result<MuValue> {
    debug_assert!(residue < k);
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::InvalidModel(format!("z = {z} must be a non-negative real")));
    }
    let mut acc = 0.0;
    let mut divergent = false;
    for atom in env.q().atoms() {
        let zx = z * atom.location;
        if zx > 1.0 + POLE_TOL {
            return Err(Error::OutsideDomain { zx });
        }
        if zx >= 1.0 - POLE_TOL {
            divergent = true;
        } else {
            acc += atom.mass * zx.powi(residue as i32) / (1.0 - zx.powi(k as i32));
        }
    }
    if divergent {
        Ok(MuValue::Divergent)
    } else {
        Ok(MuValue::Finite(env.beta() * acc))
    }
}

/// Column-sum integral `rho_j(z) = integral beta_j q_j(dx) / (1 - z x)`,
/// evaluated directly (not via the matrix).
pub fn rho_j(env: &Environment, z: f64) -> Result<f64> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::InvalidModel(format!("z = {z} must be a non-negative real")));
    }
    let mut acc = 0.0;
    for atom in env.q().atoms() {
        let zx = z * atom.location;
        if zx > 1.0 + POLE_TOL {
            return Err(Error::OutsideDomain { zx });
        }
        if zx >= 1.0 - POLE_TOL {
            return Err(Error::DivergentMatrix { z });
        }
        acc += atom.mass / (1.0 - zx);
    }
    Ok(env.beta() * acc)
}

/// The k x k moment matrix at a fixed `z`, with per-entry divergence flags.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    z: f64,
    k: usize,
    entries: Vec<f64>,
    divergent: Vec<bool>,
}

impl MomentMatrix {
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    pub fn is_divergent(&self, i: usize, j: usize) -> bool {
        self.divergent[i * self.k + j]
    }

    pub fn all_finite(&self) -> bool {
        self.divergent.iter().all(|&d| !d)
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.k).map(|i| self.get(i, j)).sum()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Build `A(z)` for the cycle.
pub fn build_a(cycle: &EnvironmentCycle, z: f64) -> Result<MomentMatrix> {
    let k = cycle.k();
    let mut entries = vec![0.0; k * k];
    let mut divergent = vec![false; k * k];
    for i in 0..k {
        for j in 0..k {
            let residue = (i + k - j) % k;
            match mu(cycle.env(j), residue, z, k)? {
                MuValue::Finite(v) => entries[i * k + j] = v,
                MuValue::Divergent => {
                    entries[i * k + j] = f64::INFINITY;
                    divergent[i * k + j] = true;
                }
            }
        }
    }
    Ok(MomentMatrix {
        z,
        k,
        entries,
        divergent,
    })
}

/// Build the selective analog `A^s(z)` for a periodic selection cycle:
///
/// ```text
/// mu_j^i(z) = integral z^i s_{[j+1]}(x) ... s_{[j+i]}(x) / (1 - z^k s(x)^k) beta_j q_j(dx)
/// ```
///
/// with `s(x)` the geometric mean of the selection maps.
pub fn build_a_selective(
    cycle: &EnvironmentCycle,
    selection: &SelectionCycle,
    z: f64,
) -> Result<MomentMatrix> {
    let k = cycle.k();
    if selection.k() != k {
        return Err(Error::InvalidModel(
            "selection cycle length does not match environment cycle".into(),
        ));
    }
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::InvalidModel(format!("z = {z} must be a non-negative real")));
    }
    let mut entries = vec![0.0; k * k];
    let mut divergent = vec![false; k * k];
    for j in 0..k {
        let env = cycle.env(j);
        for atom in env.q().atoms() {
            let x = atom.location;
            let s_geo = selection.geometric_mean_at(x)?;
            let zs = z * s_geo;
            if zs > 1.0 + POLE_TOL {
                return Err(Error::OutsideDomain { zx: zs });
            }
            if zs >= 1.0 - POLE_TOL {
                for i in 0..k {
                    let row = (i + j) % k;
                    entries[row * k + j] = f64::INFINITY;
                    divergent[row * k + j] = true;
                }
                continue;
            }
            let denom = 1.0 - zs.powi(k as i32);
            // residue i entry of column j sits in row [i + j].
            let mut numerator = 1.0; // empty product at i = 0
            for i in 0..k {
                let row = (i + j) % k;
                if !divergent[row * k + j] {
                    entries[row * k + j] +=
                        env.beta() * atom.mass * z.powi(i as i32) * numerator / denom;
                }
                numerator *= selection.map_mod(j + 1 + i).eval(x)?;
            }
        }
    }
    Ok(MomentMatrix {
        z,
        k,
        entries,
        divergent,
    })
}

/// Perron eigenpair of the moment matrix.
#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub rho: f64,
    /// Positive eigenvector normalized to sum 1; empty when `rho` is the
    /// divergence sentinel.
    pub eigvec: Vec<f64>,
    /// `max_i |(A R)_i - rho R_i|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Perron eigenvalue and eigenvector. A matrix with divergent entries
/// returns the `rho = +inf` sentinel (the spectral radius blows up at the
/// pole).
pub fn perron(a: &MomentMatrix) -> Result<SpectralResult> {
    if !a.all_finite() {
        return Ok(SpectralResult {
            rho: f64::INFINITY,
            eigvec: Vec::new(),
            residual: 0.0,
            iterations: 0,
        });
    }
    let (rho, eigvec, residual, iterations) = linalg::perron_positive(a.entries(), a.k())?;
    Ok(SpectralResult {
        rho,
        eigvec,
        residual,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    NonCondensation,
    Condensation,
    /// `rho(A(1/eta0)) = 1` to within classification tolerance; treated as
    /// the non-condensation side (`alpha = 0`).
    Boundary,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::NonCondensation => "non_condensation",
            Regime::Condensation => "condensation",
            Regime::Boundary => "boundary",
        }
    }
}

/// The critical parameter and the positive solution of
/// `A(z_c) U + alpha 1 = U`, `U_0 = 1`.
#[derive(Clone, Debug)]
pub struct CriticalSolution {
    pub z_c: f64,
    pub regime: Regime,
    /// Limiting atom mass at the top fitness for the residue-0 law;
    /// positive exactly in the condensation regime.
    pub alpha: f64,
    pub u: Vec<f64>,
    /// `max_i |(A(z_c) U)_i + alpha - U_i|`.
    pub residual: f64,
}

/// Locate `z_c` and solve for `(U, alpha)` for the plain model.
pub fn find_critical(model: &ModelInstance) -> Result<CriticalSolution> {
    critical_from_builder(|z| build_a(model.cycle(), z), 1.0 / model.eta0())
}

/// Shared dichotomy driver: `z_top` is `1/eta0` (or its selective analog).
///
/// If `rho(A(z_top)) >= 1` (divergent entries count as infinite), bisect the
/// increasing map `z -> rho(A(z))` to its unit crossing and return the
/// Perron eigenvector there with `alpha = 0`. Otherwise `z_c = z_top` and
/// `(U, alpha)` comes from the linear solve `(I - A) Y = 1`, `U = Y/Y_0`,
/// `alpha = 1/Y_0 > 0`.
pub(crate) fn critical_from_builder(
    build: impl Fn(f64) -> Result<MomentMatrix>,
    z_top: f64,
) -> Result<CriticalSolution> {
    let top = build(z_top)?;
    let spectral_top = perron(&top)?;
    let rho_top = spectral_top.rho;

    if (rho_top - 1.0).abs() < BOUNDARY_TOL {
        let u = scale_to_first(&spectral_top.eigvec)?;
        let residual = fixpoint_residual(&top, &u, 0.0);
        return Ok(CriticalSolution {
            z_c: z_top,
            regime: Regime::Boundary,
            alpha: 0.0,
            u,
            residual,
        });
    }

    if rho_top < 1.0 {
        // Condensation: z_c saturates at the top of the interval.
        let k = top.k();
        let mut i_minus_a = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                i_minus_a[i * k + j] = if i == j { 1.0 } else { 0.0 } - top.get(i, j);
            }
        }
        let y = linalg::lu_solve(i_minus_a, k, vec![1.0; k])?;
        if y.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::NumericFailure(
                "condensation solve produced a non-positive vector".into(),
            ));
        }
        let alpha = 1.0 / y[0];
        let u: Vec<f64> = y.iter().map(|&v| v / y[0]).collect();
        let residual = fixpoint_residual(&top, &u, alpha);
        return Ok(CriticalSolution {
            z_c: z_top,
            regime: Regime::Condensation,
            alpha,
            u,
            residual,
        });
    }

    // Non-condensation: rho crosses 1 strictly inside (0, z_top]; rho(A(0))
    // is the largest beta, below 1, so the bracket is valid.
    let (mut lo, mut hi) = (0.0f64, z_top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let rho_mid = perron(&build(mid)?)?.rho;
        if rho_mid >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let z_c = 0.5 * (lo + hi);
    let at_zc = build(z_c)?;
    let spectral = perron(&at_zc)?;
    if !spectral.rho.is_finite() {
        return Err(Error::NumericFailure(
            "bisection landed on a divergent matrix".into(),
        ));
    }
    let u = scale_to_first(&spectral.eigvec)?;
    let residual = fixpoint_residual(&at_zc, &u, 0.0);
    if residual > 1e-8 {
        return Err(Error::NumericFailure(format!(
            "eigenvector equation residual {residual} at z_c = {z_c}"
        )));
    }
    Ok(CriticalSolution {
        z_c,
        regime: Regime::NonCondensation,
        alpha: 0.0,
        u,
        residual,
    })
}

fn scale_to_first(v: &[f64]) -> Result<Vec<f64>> {
    let first = *v.first().ok_or(Error::NumericFailure(
        "empty eigenvector".into(),
    ))?;
    if !(first.is_finite() && first > 0.0) {
        return Err(Error::NumericFailure(
            "eigenvector has a non-positive leading coordinate".into(),
        ));
    }
    Ok(v.iter().map(|&x| x / first).collect())
}

fn fixpoint_residual(a: &MomentMatrix, u: &[f64], alpha: f64) -> f64 {
    let au = linalg::mat_vec(a.entries(), a.k(), u);
    au.iter()
        .zip(u)
        .map(|(&aui, &ui)| (aui + alpha - ui).abs())
        .fold(0.0f64, f64::max)
}

/// The column-centered matrix
/// `B(z) = A(z) - I - (1/k)(rho_j(z) - 1)_{i,j}`; every column sums to zero.
pub fn build_b(cycle: &EnvironmentCycle, z: f64) -> Result<Vec<f64>> {
    let a = build_a(cycle, z)?;
    if !a.all_finite() {
        return Err(Error::DivergentMatrix { z });
    }
    let k = cycle.k();
    let mut b = vec![0.0; k * k];
    for j in 0..k {
        let rho = rho_j(cycle.env(j), z)?;
        for i in 0..k {
            let identity = if i == j { 1.0 } else { 0.0 };
            b[i * k + j] = a.get(i, j) - identity - (rho - 1.0) / k as f64;
        }
    }
    Ok(b)
}

/// Closed-form route to `(U, alpha)` through the diagonal minors of
/// `B(z_c)`: `U_j = N_j / N_0` and
/// `alpha = (1/k) sum_j (N_j / N_0)(1 - rho_j(z_c))`.
pub fn minors_solution(cycle: &EnvironmentCycle, z_c: f64) -> Result<(Vec<f64>, f64)> {
    let k = cycle.k();
    let b = build_b(cycle, z_c)?;
    let minors: Vec<f64> = (0..k).map(|j| linalg::minor_det(&b, k, j, j)).collect();
    let scale = minors.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 || minors[0].abs() < 1e-13 * scale {
        return Err(Error::MinorDegenerate { n0: minors[0] });
    }
    let u: Vec<f64> = minors.iter().map(|&n| n / minors[0]).collect();
    let mut alpha = 0.0;
    for j in 0..k {
        alpha += u[j] * (1.0 - rho_j(cycle.env(j), z_c)?);
    }
    alpha /= k as f64;
    Ok((u, alpha))
}

/// `Psi(z) = det(I - A(z))`; its sign matches `1 - rho(A(z))`.
pub fn psi(cycle: &EnvironmentCycle, z: f64) -> Result<f64> {
    let a = build_a(cycle, z)?;
    if !a.all_finite() {
        return Err(Error::PsiUndefinedAtPole { z });
    }
    let k = cycle.k();
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            m[i * k + j] = if i == j { 1.0 } else { 0.0 } - a.get(i, j);
        }
    }
    Ok(linalg::lu_det(m, k))
}

/// Two-environment criterion: a sum of two single-environment terms whose
/// sign matches `1 - rho(A(z))` when `k = 2`.
pub fn gamma2(cycle: &EnvironmentCycle, z: f64) -> Result<f64> {
    if cycle.k() != 2 {
        return Err(Error::RequiresPeriodTwo { k: cycle.k() });
    }
    let mut total = 0.0;
    for env in cycle.envs() {
        let numerator = 1.0 - rho_j(env, z)?;
        let mut minus = 0.0;
        for atom in env.q().atoms() {
            minus += atom.mass / (1.0 + z * atom.location);
        }
        let denominator = 1.0 - env.beta() * minus;
        // Both denominators are positive since beta < 1.
        total += numerator / denominator;
    }
    Ok(total)
}

/// The column-sum sandwich around the Perron eigenvalue, plus the
/// eigenvector mixture `sum_i R_i rho_i(z)` (an independent route to the
/// same eigenvalue).
#[derive(Clone, Copy, Debug)]
pub struct RhoBounds {
    pub min_rho_j: f64,
    pub rho: f64,
    pub max_rho_j: f64,
    pub mixed: f64,
}

pub fn rho_bounds(cycle: &EnvironmentCycle, z: f64) -> Result<RhoBounds> {
    let a = build_a(cycle, z)?;
    if !a.all_finite() {
        return Err(Error::DivergentMatrix { z });
    }
    let spectral = perron(&a)?;
    let rhos: Vec<f64> = cycle
        .envs()
        .iter()
        .map(|env| rho_j(env, z))
        .collect::<Result<_>>()?;
    let mixed = spectral
        .eigvec
        .iter()
        .zip(&rhos)
        .map(|(&r, &rho)| r * rho)
        .sum();
    Ok(RhoBounds {
        min_rho_j: rhos.iter().copied().fold(f64::INFINITY, f64::min),
        rho: spectral.rho,
        max_rho_j: rhos.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mixed,
    })
}

/// The real eigenvalues of `A(z)` that are at least 1, from a general
/// (Schur-based) eigensolver.
pub fn real_eigenvalues_ge_one(a: &MomentMatrix) -> Result<Vec<f64>> {
    if !a.all_finite() {
        return Err(Error::DivergentMatrix { z: a.z() });
    }
    let k = a.k();
    let m = nalgebra::DMatrix::from_fn(k, k, |i, j| a.get(i, j));
    let eigenvalues = m.complex_eigenvalues();
    let scale = a.max_entry().max(1.0);
    Ok(eigenvalues
        .iter()
        .filter(|l| l.im.abs() <= 1e-9 * scale && l.re >= 1.0)
        .map(|l| l.re)
        .collect())
}

/// Number of real eigenvalues `>= 1` of `A(z)`; the structure of the matrix
/// guarantees at most one (the Perron eigenvalue itself).
pub fn real_eigen_census(a: &MomentMatrix) -> Result<usize> {
    Ok(real_eigenvalues_ge_one(a)?.len())
}
