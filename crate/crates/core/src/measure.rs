//! Finite atomic measures on `[0,1]`.
//!
//! Every distribution the recursion touches (fitness laws, mutant laws,
//! limit laws, the decomposition parts) is represented as a finite list of
//! atoms `(location, mass)` with strictly increasing locations. Integrals
//! against such measures are exact finite sums, so no quadrature error
//! enters the core; densities are admitted only through the midpoint-rule
//! discretizer in [`discretize`].

use crate::error::{Error, Result};

/// Locations closer than this are merged (masses summed).
pub const LOCATION_MERGE_TOL: f64 = 1e-12;
/// Atoms lighter than this are dropped; probability measures are then
/// renormalized so iteration cost stays bounded.
pub const MASS_FLOOR: f64 = 1e-15;
/// Probability measures must carry unit mass within this tolerance before
/// renormalization.
pub const PROBABILITY_MASS_TOL: f64 = 1e-12;
/// Slack used when comparing atom masses in the partial order.
const ORDER_MASS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    Probability,
    SubProbability,
}

/// Closed sub-interval of `[0,1]`, used as a total-variation window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi || lo < 0.0 || hi > 1.0 {
            return Err(Error::InvalidMeasure(format!(
                "window [{lo}, {hi}] is not a closed sub-interval of [0,1]"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Finite atomic measure on `[0,1]` with strictly increasing atom locations
/// and positive masses.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    atoms: Vec<Atom>,
    kind: MeasureKind,
}

/// Sort, merge locations within [`LOCATION_MERGE_TOL`], drop atoms below
/// [`MASS_FLOOR`].
fn clean_atoms(raw: impl IntoIterator<Item = (f64, f64)>) -> Result<Vec<Atom>> {
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (location, mass) in raw {
        if !location.is_finite() || !(0.0..=1.0).contains(&location) {
            return Err(Error::InvalidMeasure(format!(
                "atom location {location} outside [0,1]"
            )));
        }
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::InvalidMeasure(format!(
                "atom mass {mass} is not a non-negative real"
            )));
        }
        if mass > 0.0 {
            atoms.push((location, mass));
        }
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for (location, mass) in atoms {
        match merged.last_mut() {
            Some(last) if location - last.location <= LOCATION_MERGE_TOL => last.mass += mass,
            _ => merged.push(Atom { location, mass }),
        }
    }
    merged.retain(|a| a.mass >= MASS_FLOOR);
    Ok(merged)
}

impl Measure {
    /// Probability measure from raw atoms. The masses must sum to 1 within
    /// [`PROBABILITY_MASS_TOL`]; the result is renormalized exactly.
    pub fn probability(raw: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::probability_with_tol(raw, PROBABILITY_MASS_TOL)
    }

    /// As [`Measure::probability`] with an explicit mass-defect gate. Used
    /// where an upstream tolerance (bisection residuals, boundary-regime
    /// classification) legitimately exceeds the default.
    pub fn probability_with_tol(
        raw: impl IntoIterator<Item = (f64, f64)>,
        tol: f64,
    ) -> Result<Self> {
        let mut atoms = clean_atoms(raw)?;
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidMeasure(format!(
                "probability mass is {total}, not 1 (tolerance {tol})"
            )));
        }
        for a in &mut atoms {
            a.mass /= total;
        }
        Ok(Measure {
            atoms,
            kind: MeasureKind::Probability,
        })
    }

    /// Sub-probability measure (total mass at most 1, up to tolerance).
    /// Masses are kept as given; no renormalization.
    pub fn sub_probability(raw: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms = clean_atoms(raw)?;
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidMeasure(format!(
                "sub-probability mass {total} exceeds 1"
            )));
        }
        Ok(Measure {
            atoms,
            kind: MeasureKind::SubProbability,
        })
    }

    /// Point mass at `x`.
    pub fn delta(x: f64) -> Result<Self> {
        Self::probability([(x, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// Largest atom location, `eta` in the model's notation.
    pub fn support_max(&self) -> Result<f64> {
        self.atoms
            .last()
            .map(|a| a.location)
            .ok_or(Error::EmptySupport)
    }

    /// n-th moment `sum mass * location^n`.
    pub fn moment(&self, n: u32) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.mass * a.location.powi(n as i32))
            .sum()
    }

    /// Mass carried by the atom at `x`, if any (location matched within
    /// [`LOCATION_MERGE_TOL`]).
    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .find(|a| (a.location - x).abs() <= LOCATION_MERGE_TOL)
            .map_or(0.0, |a| a.mass)
    }

    /// Size-biased measure `x m(dx) / w` together with the mean `w`.
    /// Any atom at 0 loses all mass and disappears.
    pub fn size_bias(&self) -> Result<(Measure, f64)> {
        let w = self.moment(1);
        if w <= 0.0 {
            return Err(Error::DegenerateSelection);
        }
        let biased = Measure::probability(
            self.atoms
                .iter()
                .map(|a| (a.location, a.location * a.mass / w)),
        )?;
        Ok((biased, w))
    }

    /// Collapse all mass at locations `>= threshold` onto a single atom at
    /// `threshold`. Total mass is preserved.
    pub fn truncate(&self, threshold: f64) -> Result<Measure> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::InvalidMeasure(format!(
                "truncation threshold {threshold} outside (0,1]"
            )));
        }
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.atoms.len());
        let mut collapsed = 0.0;
        for a in &self.atoms {
            if a.location >= threshold {
                collapsed += a.mass;
            } else {
                atoms.push((a.location, a.mass));
            }
        }
        if collapsed > 0.0 {
            atoms.push((threshold, collapsed));
        }
        match self.kind {
            MeasureKind::Probability => Measure::probability(atoms),
            MeasureKind::SubProbability => Measure::sub_probability(atoms),
        }
    }

    /// Total-variation distance restricted to a closed window: the sum of
    /// absolute mass differences over the union of atom locations inside the
    /// window. Lies in `[0,2]` for pairs of sub-probability measures.
    pub fn tv_distance(&self, other: &Measure, window: Interval) -> f64 {
        let mut acc = 0.0;
        merge_walk(&self.atoms, &other.atoms, |location, ma, mb| {
            if window.contains(location) {
                acc += (ma - mb).abs();
            }
        });
        acc
    }

    /// Total-variation distance over the whole interval with the atom at
    /// `excluded` (if any) left out of the comparison.
    pub fn tv_distance_excluding(&self, other: &Measure, excluded: f64) -> f64 {
        let mut acc = 0.0;
        merge_walk(&self.atoms, &other.atoms, |location, ma, mb| {
            if (location - excluded).abs() > LOCATION_MERGE_TOL {
                acc += (ma - mb).abs();
            }
        });
        acc
    }

    /// Atomic specialization of the set-wise order below `eta`: true iff at
    /// every atom location `x < eta` this measure carries no more mass than
    /// `other`. `eta` must lie in `(0,1]`.
    pub fn leq_eta(&self, other: &Measure, eta: f64) -> bool {
        debug_assert!(eta > 0.0 && eta <= 1.0, "eta must lie in (0,1]");
        let mut ok = true;
        merge_walk(&self.atoms, &other.atoms, |location, ma, mb| {
            if location < eta && ma > mb + ORDER_MASS_TOL {
                ok = false;
            }
        });
        ok
    }

    /// Measure scaled by a non-negative constant (sub-probability result).
    pub fn scaled(&self, c: f64) -> Result<Measure> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidMeasure(format!("scale factor {c}")));
        }
        Measure::sub_probability(self.atoms.iter().map(|a| (a.location, a.mass * c)))
    }

    /// Atom-wise sum (sub-probability result).
    pub fn add(&self, other: &Measure) -> Result<Measure> {
        Measure::sub_probability(
            self.atoms
                .iter()
                .chain(other.atoms.iter())
                .map(|a| (a.location, a.mass)),
        )
    }

    /// The same atoms with the one at `x` (if any) removed; used to compare
    /// measure bodies separately from a designated atom.
    pub fn without_atom(&self, x: f64) -> Result<Measure> {
        Measure::sub_probability(
            self.atoms
                .iter()
                .filter(|a| (a.location - x).abs() > LOCATION_MERGE_TOL)
                .map(|a| (a.location, a.mass)),
        )
    }
}

/// Walk two sorted atom lists in lockstep, invoking `f(location, mass_a,
/// mass_b)` once per location in the union (locations within
/// [`LOCATION_MERGE_TOL`] are identified).
fn merge_walk(a: &[Atom], b: &[Atom], mut f: impl FnMut(f64, f64, f64)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if i < a.len() && j < b.len() {
            let (xa, xb) = (a[i].location, b[j].location);
            if (xa - xb).abs() <= LOCATION_MERGE_TOL {
                f(xa, a[i].mass, b[j].mass);
                i += 1;
                j += 1;
            } else if xa < xb {
                f(xa, a[i].mass, 0.0);
                i += 1;
            } else {
                f(xb, 0.0, b[j].mass);
                j += 1;
            }
        } else if i < a.len() {
            f(a[i].location, a[i].mass, 0.0);
            i += 1;
        } else {
            f(b[j].location, 0.0, b[j].mass);
            j += 1;
        }
    }
}

/// Density families the config discretizer understands. Normalization
/// constants are irrelevant: cell masses are renormalized after sampling.
#[derive(Clone, Debug, PartialEq)]
pub enum DensityFamily {
    /// Uniform on `[lo, hi] ⊆ [0,1]`.
    Uniform { lo: f64, hi: f64 },
    /// Beta(alpha, beta) on `[0,1]`.
    Beta { alpha: f64, beta: f64 },
}

/// Midpoint-rule discretization of a density into a `cells`-atom probability
/// measure.
pub fn discretize(family: &DensityFamily, cells: usize) -> Result<Measure> {
    if cells == 0 {
        return Err(Error::InvalidMeasure("grid needs at least one cell".into()));
    }
    let (lo, hi, density): (f64, f64, Box<dyn Fn(f64) -> f64>) = match family {
        DensityFamily::Uniform { lo, hi } => {
            if !(0.0 <= *lo && lo < hi && *hi <= 1.0) {
                return Err(Error::InvalidMeasure(format!(
                    "uniform support [{lo}, {hi}] invalid"
                )));
            }
            (*lo, *hi, Box::new(|_| 1.0))
        }
        DensityFamily::Beta { alpha, beta } => {
            if !(alpha.is_finite() && beta.is_finite() && *alpha > 0.0 && *beta > 0.0) {
                return Err(Error::InvalidMeasure(format!(
                    "beta({alpha}, {beta}) parameters must be positive"
                )));
            }
            let (a, b) = (*alpha, *beta);
            (
                0.0,
                1.0,
                Box::new(move |x: f64| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0)),
            )
        }
    };
    let width = (hi - lo) / cells as f64;
    let atoms: Vec<(f64, f64)> = (0..cells)
        .map(|i| {
            let mid = lo + (i as f64 + 0.5) * width;
            (mid, density(mid))
        })
        .collect();
    let total: f64 = atoms.iter().map(|(_, m)| m).sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::InvalidMeasure(
            "density integrates to zero on the grid".into(),
        ));
    }
    Measure::probability(atoms.into_iter().map(|(x, m)| (x, m / total)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(atoms: &[(f64, f64)]) -> Measure {
        Measure::probability(atoms.iter().copied()).unwrap()
    }

    #[test]
    fn support_max_examples() {
        assert_eq!(Measure::delta(1.0).unwrap().support_max().unwrap(), 1.0);
        assert_eq!(m(&[(0.25, 0.5), (0.5, 0.5)]).support_max().unwrap(), 0.5);
        assert_eq!(m(&[(0.5, 0.2), (0.8, 0.8)]).support_max().unwrap(), 0.8);
        let empty = Measure::sub_probability(std::iter::empty()).unwrap();
        assert!(matches!(empty.support_max(), Err(Error::EmptySupport)));
    }

    #[test]
    fn moment_examples() {
        assert!((Measure::delta(0.5).unwrap().moment(2) - 0.25).abs() < 1e-15);
        assert!((m(&[(0.3, 0.4), (0.9, 0.6)]).moment(0) - 1.0).abs() < 1e-15);
        assert!((m(&[(0.5, 0.2), (1.0, 0.8)]).moment(1) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn size_bias_examples() {
        let (d, w) = Measure::delta(0.5).unwrap().size_bias().unwrap();
        assert_eq!(d, Measure::delta(0.5).unwrap());
        assert!((w - 0.5).abs() < 1e-15);

        let (b, w) = m(&[(0.5, 0.5), (1.0, 0.5)]).size_bias().unwrap();
        assert!((w - 0.75).abs() < 1e-15);
        assert!((b.mass_at(0.5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.mass_at(1.0) - 2.0 / 3.0).abs() < 1e-15);

        let degenerate = Measure::delta(0.0).unwrap();
        assert!(matches!(
            degenerate.size_bias(),
            Err(Error::DegenerateSelection)
        ));
    }

    #[test]
    fn size_bias_drops_atom_at_zero() {
        let p = m(&[(0.0, 0.5), (0.5, 0.5)]);
        let (b, w) = p.size_bias().unwrap();
        assert!((w - 0.25).abs() < 1e-15);
        assert_eq!(b.atoms().len(), 1);
        assert!((b.mass_at(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncate_examples() {
        let t = Measure::delta(1.0).unwrap().truncate(0.9).unwrap();
        assert_eq!(t, Measure::delta(0.9).unwrap());

        let t = m(&[(0.5, 0.5), (1.0, 0.5)]).truncate(0.75).unwrap();
        assert!((t.mass_at(0.5) - 0.5).abs() < 1e-15);
        assert!((t.mass_at(0.75) - 0.5).abs() < 1e-15);

        let p = m(&[(0.3, 0.4), (0.6, 0.6)]);
        assert_eq!(p.truncate(1.0).unwrap(), p);

        assert!(p.truncate(0.0).is_err());
        assert!(p.truncate(1.5).is_err());
    }

    #[test]
    fn tv_distance_examples() {
        let p = m(&[(0.5, 0.2), (1.0, 0.8)]);
        assert_eq!(p.tv_distance(&p, Interval::UNIT), 0.0);

        let a = Measure::delta(0.5).unwrap();
        let b = Measure::delta(0.8).unwrap();
        assert!((a.tv_distance(&b, Interval::UNIT) - 2.0).abs() < 1e-15);
        let w = Interval::new(0.0, 0.6).unwrap();
        assert!((a.tv_distance(&b, w) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn leq_eta_examples() {
        let p = m(&[(0.5, 0.5), (1.0, 0.5)]);
        assert!(p.leq_eta(&p, 1.0));
        // A point mass at the top carries no mass below eta = 1.
        assert!(Measure::delta(1.0).unwrap().leq_eta(&p, 1.0));
        let heavier = m(&[(0.5, 0.6), (1.0, 0.4)]);
        assert!(!heavier.leq_eta(&p, 1.0));
        assert!(p.leq_eta(&heavier, 1.0));
    }

    #[test]
    fn atom_merge_and_floor() {
        let p = Measure::probability([(0.5, 0.4), (0.5 + 1e-13, 0.6)]).unwrap();
        assert_eq!(p.atoms().len(), 1);
        assert!((p.mass_at(0.5) - 1.0).abs() < 1e-15);

        // A sub-threshold atom is dropped and the probability renormalized.
        let q = Measure::probability([(0.2, 1e-16), (0.7, 1.0)]).unwrap();
        assert_eq!(q.atoms().len(), 1);
        assert!((q.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn probability_mass_gate() {
        assert!(Measure::probability([(0.5, 0.9)]).is_err());
        assert!(Measure::probability([(0.5, 0.5), (0.7, 0.5000001)]).is_err());
        assert!(Measure::sub_probability([(0.5, 1.2)]).is_err());
        assert!(Measure::probability([(1.5, 1.0)]).is_err());
        assert!(Measure::probability([(0.5, -1.0)]).is_err());
    }

    #[test]
    fn discretizer_families() {
        let u = discretize(&DensityFamily::Uniform { lo: 0.0, hi: 1.0 }, 4).unwrap();
        assert_eq!(u.atoms().len(), 4);
        assert!((u.total_mass() - 1.0).abs() < 1e-12);
        assert!((u.mass_at(0.125) - 0.25).abs() < 1e-15);
        assert!((u.support_max().unwrap() - 0.875).abs() < 1e-15);

        let b = discretize(
            &DensityFamily::Beta {
                alpha: 2.0,
                beta: 5.0,
            },
            1024,
        )
        .unwrap();
        assert_eq!(b.atoms().len(), 1024);
        assert!((b.total_mass() - 1.0).abs() < 1e-12);
        // Beta(2,5) has mean 2/7; the midpoint rule should land close.
        assert!((b.moment(1) - 2.0 / 7.0).abs() < 1e-4);

        assert!(discretize(&DensityFamily::Uniform { lo: 0.5, hi: 0.2 }, 8).is_err());
        assert!(discretize(
            &DensityFamily::Beta {
                alpha: -1.0,
                beta: 2.0
            },
            8
        )
        .is_err());
    }

    /// Strategy: a random probability measure with 1..=6 well-separated atoms.
    fn arb_probability() -> impl Strategy<Value = Measure> {
        proptest::collection::vec((0u32..200, 0.05f64..1.0), 1..=6).prop_map(|raw| {
            let atoms: Vec<(f64, f64)> = raw
                .into_iter()
                .map(|(slot, mass)| (0.005 + slot as f64 * 0.004975, mass))
                .collect();
            let total: f64 = atoms.iter().map(|(_, m)| m).sum();
            Measure::probability(atoms.into_iter().map(|(x, m)| (x, m / total))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn size_bias_is_probability_and_keeps_top(p in arb_probability()) {
            prop_assume!(p.moment(1) > 0.0);
            let (b, w) = p.size_bias().unwrap();
            prop_assert!((b.total_mass() - 1.0).abs() < 1e-12);
            prop_assert!((w - p.moment(1)).abs() < 1e-15);
            prop_assert!(b.support_max().unwrap() <= p.support_max().unwrap() + 1e-15);
        }

        #[test]
        fn truncate_preserves_mass(p in arb_probability(), t in 0.01f64..1.0) {
            let tr = p.truncate(t).unwrap();
            prop_assert!((tr.total_mass() - p.total_mass()).abs() < 1e-12);
            prop_assert!(tr.support_max().unwrap() <= t + 1e-15);
        }

        #[test]
        fn tv_is_a_pseudometric(a in arb_probability(), b in arb_probability(), c in arb_probability()) {
            let w = Interval::UNIT;
            prop_assert_eq!(a.tv_distance(&a, w), 0.0);
            prop_assert!((a.tv_distance(&b, w) - b.tv_distance(&a, w)).abs() < 1e-12);
            prop_assert!(a.tv_distance(&c, w) <= a.tv_distance(&b, w) + b.tv_distance(&c, w) + 1e-12);
        }

        #[test]
        fn leq_eta_is_a_partial_order(a in arb_probability(), b in arb_probability(), c in arb_probability(), eta in 0.1f64..=1.0) {
            // Reflexivity.
            prop_assert!(a.leq_eta(&a, eta));
            // Transitivity.
            if a.leq_eta(&b, eta) && b.leq_eta(&c, eta) {
                prop_assert!(a.leq_eta(&c, eta));
            }
            // Antisymmetry on the restriction to [0, eta).
            if a.leq_eta(&b, eta) && b.leq_eta(&a, eta) {
                let mut max_diff = 0.0f64;
                for atom in a.atoms().iter().chain(b.atoms().iter()) {
                    if atom.location < eta {
                        max_diff = max_diff
                            .max((a.mass_at(atom.location) - b.mass_at(atom.location)).abs());
                    }
                }
                prop_assert!(max_diff <= 2.0 * 1e-12);
            }
        }
    }
}
