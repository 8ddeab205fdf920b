//! Delta-peak vaccination policies and their `ψ` measures.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Most atoms a policy may carry.
pub const MAX_ATOMS: usize = 3;
/// A `ψ` weight this close to the remaining unvaccinated fraction is read
/// as total depletion.
pub const DEPLETION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intensity {
    Finite(f64),
    /// `c = ∞`: every remaining susceptible and exposed individual is vaccinated.
    Deplete,
}

impl Intensity {
    /// `e^{-c}`.
    pub fn survival(self) -> f64 {
        match self {
            Intensity::Finite(c) => (-c).exp(),
            Intensity::Deplete => 0.0,
        }
    }

    /// `1 - e^{-c}`.
    pub fn vaccinated(self) -> f64 {
        match self {
            Intensity::Finite(c) => -(-c).exp_m1(),
            Intensity::Deplete => 1.0,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Intensity::Finite(c) => c,
            Intensity::Deplete => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub age: f64,
    pub intensity: Intensity,
}

/// `v(a) = Σ c_j δ(a - A_j)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VaccinationPolicy {
    atoms: Vec<Atom>,
}

impl VaccinationPolicy {
    pub fn new(atoms: Vec<Atom>, a_max: f64) -> Result<Self> {
        if atoms.len() > MAX_ATOMS {
            return Err(Error::InvalidPolicy(format!("{} atoms given, at most {MAX_ATOMS} allowed", atoms.len())));
        }
        for (j, atom) in atoms.iter().enumerate() {
            if !(atom.age >= 0.0 && atom.age < a_max) {
                return Err(Error::InvalidPolicy(format!("atom age {} outside [0, {a_max})", atom.age)));
            }
            if j > 0 && atom.age <= atoms[j - 1].age {
                return Err(Error::InvalidPolicy("atom ages must be strictly increasing".into()));
            }
            match atom.intensity {
                Intensity::Finite(c) if !(c.is_finite() && c > 0.0) => {
                    return Err(Error::InvalidPolicy(format!("intensity must be > 0 and finite, got {c}")));
                }
                Intensity::Deplete if j + 1 < atoms.len() => {
                    return Err(Error::InvalidPolicy("no atoms may follow a depleting atom".into()));
                }
                _ => {}
            }
        }
        Ok(Self { atoms })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `D(a) = exp(-∫₀^a v)` as a right-continuous step function.
    pub fn unvaccinated_fraction(&self) -> StepFunction {
        let mut total = 0.0;
        let mut depleted = false;
        let mut steps = Vec::with_capacity(self.atoms.len());
        for atom in &self.atoms {
            match atom.intensity {
                Intensity::Finite(c) => total += c,
                Intensity::Deplete => depleted = true,
            }
            steps.push((atom.age, if depleted { 0.0 } else { (-total).exp() }));
        }
        StepFunction { initial: 1.0, steps }
    }
}

/// `ψ = e^{-∫₀^a v} v`, a finite measure of atoms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PsiMeasure {
    atoms: Vec<(f64, f64)>,
}

impl PsiMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for (j, &(age, w)) in atoms.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) || !(age >= 0.0) {
                return Err(Error::InvalidPolicy(format!("psi atom ({age}, {w}) needs age >= 0 and weight > 0")));
            }
            if j > 0 && age <= atoms[j - 1].0 {
                return Err(Error::InvalidPolicy("psi atom ages must be strictly increasing".into()));
            }
        }
        let q: f64 = atoms.iter().map(|a| a.1).sum();
        if q > 1.0 + DEPLETION_TOL {
            return Err(Error::InvalidPolicy(format!("total psi mass {q} exceeds 1")));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `Q(ψ) = ∫ ψ`.
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `D(a) = 1 - ∫₀^a ψ` as a right-continuous step function.
    pub fn unvaccinated_fraction(&self) -> StepFunction {
        let mut used = 0.0;
        let steps = self
            .atoms
            .iter()
            .map(|&(age, w)| {
                used += w;
                (age, (1.0 - used).max(0.0))
            })
            .collect();
        StepFunction { initial: 1.0, steps }
    }
}

/// Piecewise-constant function: `initial` before the first break, then the
/// value attached to the latest break at or below the argument.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub initial: f64,
    pub steps: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn eval(&self, a: f64) -> f64 {
        self.steps.iter().take_while(|s| s.0 <= a).last().map_or(self.initial, |s| s.1)
    }

    /// Largest value gap between two step functions with the same breaks,
    /// or `None` when the breaks differ.
    pub fn max_gap(&self, other: &StepFunction) -> Option<f64> {
        if self.steps.len() != other.steps.len() || self.steps.iter().zip(&other.steps).any(|(x, y)| x.0 != y.0) {
            return None;
        }
        let gaps = self.steps.iter().zip(&other.steps).map(|(x, y)| (x.1 - y.1).abs());
        Some(gaps.fold((self.initial - other.initial).abs(), f64::max))
    }
}

pub fn policy_to_psi(p: &VaccinationPolicy) -> PsiMeasure {
    let mut remaining = 1.0;
    let mut atoms = Vec::with_capacity(p.atoms.len());
    for atom in &p.atoms {
        let w = remaining * atom.intensity.vaccinated();
        remaining *= atom.intensity.survival();
        if w > 0.0 {
            atoms.push((atom.age, w));
        }
    }
    PsiMeasure { atoms }
}

/// Inverse of [`policy_to_psi`]: `c_j = -ln(1 - w_j / D(A_j-))`.
pub fn psi_to_policy(psi: &PsiMeasure, a_max: f64) -> Result<VaccinationPolicy> {
    let mut remaining = 1.0;
    let mut atoms = Vec::with_capacity(psi.atoms.len());
    for &(age, w) in &psi.atoms {
        if remaining <= 0.0 {
            return Err(Error::InvalidPolicy("psi mass after total depletion".into()));
        }
        let frac = w / remaining;
        let intensity = if frac >= 1.0 - DEPLETION_TOL { Intensity::Deplete } else { Intensity::Finite(-(-frac).ln_1p()) };
        remaining = if intensity == Intensity::Deplete { 0.0 } else { remaining - w };
        atoms.push(Atom { age, intensity });
    }
    VaccinationPolicy::new(atoms, a_max)
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Atom", 3)?;
        st.serialize_field("age", &self.age)?;
        match self.intensity {
            Intensity::Finite(c) => st.serialize_field("intensity", &c)?,
            Intensity::Deplete => st.serialize_field("intensity", &Option::<f64>::None)?,
        }
        st.serialize_field("deplete", &(self.intensity == Intensity::Deplete))?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn policy(atoms: &[(f64, Intensity)]) -> VaccinationPolicy {
        VaccinationPolicy::new(atoms.iter().map(|&(age, intensity)| Atom { age, intensity }).collect(), 100.0).unwrap()
    }

    #[test]
    fn one_atom_ln2_is_half() {
        let psi = policy_to_psi(&policy(&[(5.0, Intensity::Finite(std::f64::consts::LN_2))]));
        assert_eq!(psi.atoms().len(), 1);
        assert!((psi.atoms()[0].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn depleting_second_atom_fills_mass() {
        let c1 = 0.7;
        let psi = policy_to_psi(&policy(&[(5.0, Intensity::Finite(c1)), (9.0, Intensity::Deplete)]));
        let w = psi.atoms();
        assert!((w[0].1 - (1.0 - (-c1).exp())).abs() < 1e-15);
        assert!((w[1].1 - (-c1).exp()).abs() < 1e-15);
        assert!((psi.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_atom_weights() {
        let (c1, c2, c3) = (0.2, 0.5, 1.1);
        let psi = policy_to_psi(&policy(&[
            (1.0, Intensity::Finite(c1)),
            (2.0, Intensity::Finite(c2)),
            (3.0, Intensity::Finite(c3)),
        ]));
        let w3 = (-c1 - c2).exp() * (1.0 - (-c3).exp());
        assert!((psi.atoms()[2].1 - w3).abs() < 1e-15);
        assert!((psi.total() - (1.0 - (-(c1 + c2 + c3)).exp())).abs() < 1e-15);
    }

    #[test]
    fn empty_policy() {
        let psi = policy_to_psi(&VaccinationPolicy::empty());
        assert!(psi.atoms().is_empty());
        assert_eq!(psi.total(), 0.0);
    }

    #[test]
    fn invalid_policies_rejected() {
        let a = |age, c| Atom { age, intensity: Intensity::Finite(c) };
        assert!(VaccinationPolicy::new(vec![a(1.0, 1.0), a(2.0, 1.0), a(3.0, 1.0), a(4.0, 1.0)], 100.0).is_err());
        assert!(VaccinationPolicy::new(vec![a(2.0, 1.0), a(1.0, 1.0)], 100.0).is_err());
        assert!(VaccinationPolicy::new(vec![a(100.0, 1.0)], 100.0).is_err());
        assert!(VaccinationPolicy::new(vec![a(1.0, 0.0)], 100.0).is_err());
        let dep = Atom { age: 1.0, intensity: Intensity::Deplete };
        assert!(VaccinationPolicy::new(vec![dep, a(2.0, 1.0)], 100.0).is_err());
        assert!(PsiMeasure::new(vec![(1.0, 0.6), (2.0, 0.6)]).is_err());
    }

    #[test]
    fn deplete_serializes_as_null() {
        let v = serde_json::to_value(Atom { age: 3.0, intensity: Intensity::Deplete }).unwrap();
        assert!(v["intensity"].is_null());
        assert_eq!(v["deplete"], true);
    }

    #[test]
    fn step_function_eval() {
        let d = policy(&[(5.0, Intensity::Finite(1.0))]).unvaccinated_fraction();
        assert_eq!(d.eval(4.9), 1.0);
        assert_eq!(d.eval(5.0), (-1.0f64).exp());
    }

    fn arb_policy() -> impl Strategy<Value = VaccinationPolicy> {
        (proptest::collection::btree_set(0u32..9999, 0..=3), proptest::collection::vec(0.01f64..5.0, 3), any::<bool>())
            .prop_map(|(ages, cs, deplete_last)| {
                let n = ages.len();
                let atoms = ages
                    .into_iter()
                    .zip(cs)
                    .enumerate()
                    .map(|(j, (a, c))| Atom {
                        age: a as f64 / 100.0,
                        intensity: if deplete_last && j + 1 == n { Intensity::Deplete } else { Intensity::Finite(c) },
                    })
                    .collect();
                VaccinationPolicy::new(atoms, 100.0).unwrap()
            })
    }

    proptest! {
        #[test]
        fn both_d_representations_agree(p in arb_policy()) {
            let psi = policy_to_psi(&p);
            let gap = p.unvaccinated_fraction().max_gap(&psi.unvaccinated_fraction()).unwrap();
            prop_assert!(gap <= 1e-14);
        }

        #[test]
        fn psi_round_trip(p in arb_policy()) {
            let back = psi_to_policy(&policy_to_psi(&p), 100.0).unwrap();
            prop_assert_eq!(back.atoms().len(), p.atoms().len());
            for (x, y) in back.atoms().iter().zip(p.atoms()) {
                prop_assert_eq!(x.age, y.age);
                match (x.intensity, y.intensity) {
                    (Intensity::Finite(a), Intensity::Finite(b)) => prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0)),
                    (Intensity::Deplete, Intensity::Deplete) => {}
                    other => prop_assert!(false, "intensity mismatch {:?}", other),
                }
            }
        }
    }
}
