//! The periodic mutation-selection recursion on fitness distributions.
//!
//! One step with mutation environment `(beta, q)` maps a probability measure
//! `p` on `[0,1]` to
//!
//! ```text
//! beta q(dx) + (1 - beta) x p(dx) / w,      w = integral of x p(dx),
//! ```
//!
//! and the environments repeat with period `k`: step `n+1` uses environment
//! `(n+1) mod k`. The module iterates this map, records mean fitnesses and
//! their cumulative products, exposes the split of `p_n` into the
//! mutation-descended and initial-condition-descended parts, and runs the
//! variant where selection acts through arbitrary non-negative maps instead
//! of the identity.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::measure::Measure;

/// One mutation environment: mutation probability `beta` in `(0,1)` and
/// mutant fitness law `q` (a probability measure with positive support max).
#[derive(Clone, Debug)]
pub struct Environment {
    beta: f64,
    q: Measure,
    eta_q: f64,
}

impl Environment {
    pub fn new(beta: f64, q: Measure) -> Result<Self> {
        if !(beta.is_finite() && 0.0 < beta && beta < 1.0) {
            return Err(Error::InvalidModel(format!(
                "mutation probability {beta} outside the open interval (0,1)"
            )));
        }
        if q.kind() != crate::measure::MeasureKind::Probability {
            return Err(Error::InvalidModel(
                "mutant fitness law must be a probability measure".into(),
            ));
        }
        let eta_q = q.support_max()?;
        if eta_q <= 0.0 {
            return Err(Error::InvalidModel(
                "mutant fitness law concentrated at 0".into(),
            ));
        }
        Ok(Environment { beta, q, eta_q })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn q(&self) -> &Measure {
        &self.q
    }

    /// Support max of the mutant law.
    pub fn eta_q(&self) -> f64 {
        self.eta_q
    }
}

/// The `k` mutation environments applied cyclically.
#[derive(Clone, Debug)]
pub struct EnvironmentCycle {
    envs: Vec<Environment>,
}

impl EnvironmentCycle {
    pub fn new(envs: Vec<Environment>) -> Result<Self> {
        if envs.is_empty() {
            return Err(Error::InvalidModel("cycle needs at least one environment".into()));
        }
        Ok(EnvironmentCycle { envs })
    }

    pub fn k(&self) -> usize {
        self.envs.len()
    }

    pub fn envs(&self) -> &[Environment] {
        &self.envs
    }

    pub fn env(&self, i: usize) -> &Environment {
        &self.envs[i]
    }

    /// Environment used for the step onto index `n`.
    pub fn env_mod(&self, n: usize) -> &Environment {
        &self.envs[n % self.envs.len()]
    }

    pub fn betas(&self) -> Vec<f64> {
        self.envs.iter().map(|e| e.beta).collect()
    }

    /// Largest support max among the mutant laws.
    pub fn eta_q(&self) -> f64 {
        self.envs.iter().map(|e| e.eta_q).fold(0.0, f64::max)
    }

    /// Cyclic shift: environment `i` of the result is environment `i+1`
    /// (mod k) of the original.
    pub fn rotated(&self) -> EnvironmentCycle {
        let k = self.k();
        EnvironmentCycle {
            envs: (0..k).map(|i| self.envs[(i + 1) % k].clone()).collect(),
        }
    }
}

/// A cycle together with an initial fitness distribution satisfying the
/// standing assumption `eta_0 >= eta_{q_i} > 0`.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    cycle: EnvironmentCycle,
    p0: Measure,
    eta0: f64,
    eta_q: f64,
}

impl ModelInstance {
    pub fn new(cycle: EnvironmentCycle, p0: Measure) -> Result<Self> {
        if p0.kind() != crate::measure::MeasureKind::Probability {
            return Err(Error::InvalidModel(
                "initial distribution must be a probability measure".into(),
            ));
        }
        let eta0 = p0.support_max()?;
        if eta0 <= 0.0 {
            return Err(Error::InvalidModel(
                "initial distribution concentrated at 0".into(),
            ));
        }
        for (i, env) in cycle.envs().iter().enumerate() {
            if eta0 < env.eta_q() {
                return Err(Error::InvalidModel(format!(
                    "eta0 < eta_q: support max {eta0} of p0 is below support max {} of q_{i}",
                    env.eta_q()
                )));
            }
        }
        let eta_q = cycle.eta_q();
        Ok(ModelInstance {
            cycle,
            p0,
            eta0,
            eta_q,
        })
    }

    pub fn cycle(&self) -> &EnvironmentCycle {
        &self.cycle
    }

    pub fn p0(&self) -> &Measure {
        &self.p0
    }

    pub fn k(&self) -> usize {
        self.cycle.k()
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn eta_q(&self) -> f64 {
        self.eta_q
    }

    /// Same cycle and dynamics shifted by one step: the rotated cycle run
    /// from `p_1`. Subsequence limits of the result are those of the
    /// original, relabeled by one.
    pub fn rotated(&self) -> Result<ModelInstance> {
        let (p1, _) = step(&self.p0, self.cycle.env_mod(1))?;
        ModelInstance::new(self.cycle.rotated(), p1)
    }
}

/// One recursion step. Returns the next distribution and the mean fitness
/// `w` of the input.
pub fn step(p: &Measure, env: &Environment) -> Result<(Measure, f64)> {
    let w = p.moment(1);
    if w <= 0.0 {
        return Err(Error::DegenerateSelection);
    }
    let beta = env.beta();
    let atoms = env
        .q()
        .atoms()
        .iter()
        .map(|a| (a.location, beta * a.mass))
        .chain(
            p.atoms()
                .iter()
                .map(|a| (a.location, (1.0 - beta) * a.location * a.mass / w)),
        );
    let next = Measure::probability(atoms)?;
    Ok((next, w))
}

/// One step of the variant where selection acts through `s` instead of the
/// identity: `beta q + (1-beta) s(x) p(dx) / integral(s dp)`. Returns the
/// next distribution and the selection integral.
pub fn step_selective(p: &Measure, env: &Environment, s: &SelectionFn) -> Result<(Measure, f64)> {
    let mut sw = 0.0;
    let mut weights = Vec::with_capacity(p.atoms().len());
    for a in p.atoms() {
        let v = s.eval(a.location)?;
        weights.push(v);
        sw += v * a.mass;
    }
    if sw <= 0.0 {
        return Err(Error::SelectionAnnihilatesSupport);
    }
    let beta = env.beta();
    let atoms = env
        .q()
        .atoms()
        .iter()
        .map(|a| (a.location, beta * a.mass))
        .chain(
            p.atoms()
                .iter()
                .zip(&weights)
                .map(|(a, &v)| (a.location, (1.0 - beta) * v * a.mass / sw)),
        );
    let next = Measure::probability(atoms)?;
    Ok((next, sw))
}

/// Non-negative selection map on `[0,1]`.
#[derive(Clone, Debug)]
pub enum SelectionFn {
    Identity,
    Constant(f64),
    /// `x^p` with `p >= 0`.
    Power(f64),
    /// Values tabulated at atom locations; evaluation elsewhere is an error.
    Table(Vec<(f64, f64)>),
}

impl SelectionFn {
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            SelectionFn::Identity => Ok(x),
            SelectionFn::Constant(c) => Ok(*c),
            SelectionFn::Power(p) => Ok(x.powf(*p)),
            SelectionFn::Table(entries) => entries
                .iter()
                .find(|(loc, _)| (loc - x).abs() <= crate::measure::LOCATION_MERGE_TOL)
                .map(|(_, v)| *v)
                .ok_or_else(|| {
                    Error::InvalidModel(format!("selection table has no value at {x}"))
                }),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidModel(what));
        match self {
            SelectionFn::Identity => Ok(()),
            SelectionFn::Constant(c) if c.is_finite() && *c >= 0.0 => Ok(()),
            SelectionFn::Constant(c) => bad(format!("selection constant {c} negative")),
            SelectionFn::Power(p) if p.is_finite() && *p >= 0.0 => Ok(()),
            SelectionFn::Power(p) => bad(format!("selection exponent {p} negative")),
            SelectionFn::Table(entries) => {
                if entries.iter().all(|(x, v)| {
                    x.is_finite() && (0.0..=1.0).contains(x) && v.is_finite() && *v >= 0.0
                }) {
                    Ok(())
                } else {
                    bad("selection table entries must be non-negative on [0,1]".into())
                }
            }
        }
    }
}

/// The `k` selection maps applied cyclically (step `n+1` uses map
/// `(n+1) mod k`).
#[derive(Clone, Debug)]
pub struct SelectionCycle {
    maps: Vec<SelectionFn>,
}

impl SelectionCycle {
    pub fn new(maps: Vec<SelectionFn>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidModel("selection cycle needs at least one map".into()));
        }
        for m in &maps {
            m.validate()?;
        }
        Ok(SelectionCycle { maps })
    }

    pub fn identity(k: usize) -> Self {
        SelectionCycle {
            maps: vec![SelectionFn::Identity; k],
        }
    }

    pub fn k(&self) -> usize {
        self.maps.len()
    }

    pub fn map(&self, i: usize) -> &SelectionFn {
        &self.maps[i]
    }

    pub fn map_mod(&self, n: usize) -> &SelectionFn {
        &self.maps[n % self.maps.len()]
    }

    /// Geometric mean `(prod_i s_i(x))^(1/k)`.
    pub fn geometric_mean_at(&self, x: f64) -> Result<f64> {
        let mut prod = 1.0;
        for m in &self.maps {
            prod *= m.eval(x)?;
        }
        Ok(prod.powf(1.0 / self.maps.len() as f64))
    }
}

/// Driver holding the current distribution; `advance` applies the next
/// environment (and selection map, when present).
pub struct Evolution<'a> {
    model: &'a ModelInstance,
    selection: Option<&'a SelectionCycle>,
    p: Measure,
    n: usize,
}

impl<'a> Evolution<'a> {
    pub fn new(model: &'a ModelInstance) -> Self {
        Evolution {
            model,
            selection: None,
            p: model.p0().clone(),
            n: 0,
        }
    }

    pub fn with_selection(model: &'a ModelInstance, selection: &'a SelectionCycle) -> Result<Self> {
        if selection.k() != model.k() {
            return Err(Error::InvalidModel(format!(
                "selection cycle length {} does not match environment cycle length {}",
                selection.k(),
                model.k()
            )));
        }
        Ok(Evolution {
            model,
            selection: Some(selection),
            p: model.p0().clone(),
            n: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn current(&self) -> &Measure {
        &self.p
    }

    pub fn mean_fitness(&self) -> f64 {
        self.p.moment(1)
    }

    pub fn advance(&mut self) -> Result<()> {
        let env = self.model.cycle().env_mod(self.n + 1);
        let (next, _) = match self.selection {
            None => step(&self.p, env)?,
            Some(sel) => step_selective(&self.p, env, sel.map_mod(self.n + 1))?,
        };
        self.p = next;
        self.n += 1;
        Ok(())
    }
}

/// Scalar record for step `n`: the mean fitness `w_n`, the cumulative weight
/// `W_n = w_0 ... w_{n-1}` (`W_0 = 1`) both raw and in logs, and the mass at
/// the top of the support.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    pub n: usize,
    /// `n mod k`.
    pub residue: usize,
    pub w: f64,
    pub weight_product: f64,
    pub log_weight_product: f64,
    pub mass_at_top: f64,
}

/// A simulated trajectory: scalars for every step, full measures only at
/// checkpoints (powers of two plus the last `2k` steps) to keep long runs
/// cheap.
#[derive(Clone, Debug)]
pub struct Trajectory {
    k: usize,
    pub records: Vec<StepRecord>,
    pub measures: BTreeMap<usize, Measure>,
    /// First index at which the tail-convergence detector fired, if it did.
    pub converged_at: Option<usize>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.records.len() - 1
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn final_measure(&self) -> &Measure {
        self.measures
            .get(&self.horizon())
            .expect("final measure is always checkpointed")
    }

    pub fn measure_at(&self, n: usize) -> Option<&Measure> {
        self.measures.get(&n)
    }

    /// Tail estimates of the limiting mean fitnesses: for each residue `i`,
    /// the last recorded `w_n` with `n = i (mod k)`.
    pub fn tail_means(&self) -> Vec<f64> {
        let mut out = vec![f64::NAN; self.k];
        for rec in self.records.iter().rev() {
            if out[rec.residue].is_nan() {
                out[rec.residue] = rec.w;
            }
        }
        out
    }
}

fn default_checkpoints(horizon: usize, k: usize) -> Vec<usize> {
    let mut points = vec![0usize];
    let mut p = 1usize;
    while p <= horizon {
        points.push(p);
        p *= 2;
    }
    for back in 0..(2 * k).min(horizon + 1) {
        points.push(horizon - back);
    }
    points.sort_unstable();
    points.dedup();
    points
}

/// Tail-convergence detector: the earliest period start after which
/// `max_i |w_{n + k + i} - w_{n + i}| < 1e-12` holds through the end of the
/// run, provided at least 10 such quiet periods were observed. Heuristic;
/// reported, never relied upon.
pub fn convergence_onset(ws: &[f64], k: usize) -> Option<usize> {
    const PERIODS: usize = 10;
    const TOL: f64 = 1e-12;
    let mut onset = 0usize;
    let mut quiet_from_onset = 0usize;
    let mut start = 0;
    while start + 2 * k <= ws.len() {
        let quiet = (0..k).all(|i| (ws[start + k + i] - ws[start + i]).abs() < TOL);
        if quiet {
            quiet_from_onset += 1;
        } else {
            onset = start + k;
            quiet_from_onset = 0;
        }
        start += k;
    }
    (quiet_from_onset >= PERIODS).then_some(onset)
}

/// Iterate the recursion for `n_steps` steps, recording scalars at every
/// index and measures at the default checkpoints.
pub fn iterate(model: &ModelInstance, n_steps: usize) -> Result<Trajectory> {
    let k = model.k();
    let checkpoints = default_checkpoints(n_steps, k);
    let mut next_checkpoint = 0usize;
    let mut records = Vec::with_capacity(n_steps + 1);
    let mut measures = BTreeMap::new();
    let mut evo = Evolution::new(model);
    let mut weight_product = 1.0;
    let mut log_weight_product = 0.0;
    for n in 0..=n_steps {
        let w = evo.mean_fitness();
        records.push(StepRecord {
            n,
            residue: n % k,
            w,
            weight_product,
            log_weight_product,
            mass_at_top: evo.current().mass_at(model.eta0()),
        });
        if next_checkpoint < checkpoints.len() && checkpoints[next_checkpoint] == n {
            measures.insert(n, evo.current().clone());
            next_checkpoint += 1;
        }
        if n < n_steps {
            evo.advance()?;
            weight_product *= w;
            log_weight_product += w.ln();
        }
    }
    let ws: Vec<f64> = records.iter().map(|r| r.w).collect();
    Ok(Trajectory {
        k,
        records,
        measures,
        converged_at: convergence_onset(&ws, k),
    })
}

/// Split `p_n` into the mutation-descended part `a_n` and the part descended
/// from the initial distribution `b_n`, so that `a_n + b_n = p_n`:
///
/// ```text
/// a_n(dx) = sum_{l=0}^{n-1} (prod_{i<l} (1-beta_{[n-i]}) x / w_{n-i-1}) beta_{[n-l]} q_{[n-l]}(dx)
/// b_n(dx) = (prod_{i<n} (1-beta_{[n-i]}) x / w_{n-i-1}) p_0(dx)
/// ```
pub fn decompose(model: &ModelInstance, n: usize) -> Result<(Measure, Measure)> {
    if n == 0 {
        return Err(Error::InvalidModel("decomposition requires n >= 1".into()));
    }
    let k = model.k();
    let traj = iterate(model, n - 1)?;
    let w: Vec<f64> = traj.records.iter().map(|r| r.w).collect();

    // prefix[l] = prod_{i=0}^{l-1} (1 - beta_{[n-i]}) / w_{n-i-1}
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(1.0f64);
    for l in 0..n {
        let beta = model.cycle().env_mod(n - l).beta();
        prefix.push(prefix[l] * (1.0 - beta) / w[n - 1 - l]);
    }

    let mut a_atoms: Vec<(f64, f64)> = Vec::new();
    for l in 0..n {
        let env = model.cycle().env_mod(n - l);
        let coef = prefix[l] * env.beta();
        for atom in env.q().atoms() {
            a_atoms.push((atom.location, coef * atom.location.powi(l as i32) * atom.mass));
        }
    }
    let b_atoms: Vec<(f64, f64)> = model
        .p0()
        .atoms()
        .iter()
        .map(|atom| (atom.location, prefix[n] * atom.location.powi(n as i32) * atom.mass))
        .collect();

    let _ = k;
    Ok((
        Measure::sub_probability(a_atoms)?,
        Measure::sub_probability(b_atoms)?,
    ))
}
