//! Coordinate models of the bundles in the triple and the canonical maps between them.
//!
//! Every point stores its blocks as `Vec<f64>` of a common length `m`, the
//! dimension of the target chart. The base is fixed to `ℝ²`, so jets carry two
//! derivative blocks.
//!
//! | type | bundle | blocks |
//! |------|--------|--------|
//! | [`Jet`] | `T²M` | `(q, q̇₁, q̇₂)` |
//! | [`Phase`] | `T²*M` | `(q, p¹, p²)` |
//! | [`PhaseJet`] | `T²T²*M` | `(q, p¹, p², q̇₁, ṗ¹₁, ṗ²₁, q̇₂, ṗ¹₂, ṗ²₂)` |
//! | [`JetTangent`] | `T T²M` | `(q, q̇₁, q̇₂, δq, δq̇₁, δq̇₂)` |
//! | [`JetVariation`] | `T²TM` | `(q, δq, q̇₁, δq̇₁, q̇₂, δq̇₂)` |
//! | [`JetCovector`] | `T*T²M` | `(q, q̇₁, q̇₂, a, b¹, b²)` |
//! | [`PhaseTangent`] | `T T²*M` | `(q, p¹, p², δq, δp¹, δp²)` |
//! | [`PhaseCovector`] | `T*T²*M` | `(q, p¹, p², φ, ψ¹, ψ²)` |
//!
//! Phase coordinates `(p¹, p²)` stand for the covector-valued form
//! `p¹_b dq^b ⊗ dx² − p²_c dq^c ⊗ dx¹`.

use crate::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(what: &str, m: usize, blocks: &[&[f64]]) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput(format!("{what}: dimension must be at least 1")));
    }
    for (k, b) in blocks.iter().enumerate() {
        if b.len() != m {
            return Err(Error::InvalidInput(format!(
                "{what}: block {k} has length {}, expected {m}",
                b.len()
            )));
        }
    }
    Ok(())
}

/// Infinitesimal configuration: value and first partials of a map at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub q: Vec<f64>,
    pub qdot1: Vec<f64>,
    pub qdot2: Vec<f64>,
}

impl Jet {
    pub fn new(q: Vec<f64>, qdot1: Vec<f64>, qdot2: Vec<f64>) -> Result<Self> {
        let jet = Jet { q, qdot1, qdot2 };
        jet.validate()?;
        Ok(jet)
    }

    pub fn zeros(m: usize) -> Self {
        Jet { q: vec![0.0; m], qdot1: vec![0.0; m], qdot2: vec![0.0; m] }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("jet", self.q.len(), &[&self.qdot1, &self.qdot2])
    }

    /// `(q, q̇₁, q̇₂)` concatenated, the argument layout of a Lagrangian.
    pub fn to_flat(&self) -> Vec<f64> {
        [self.q.as_slice(), &self.qdot1, &self.qdot2].concat()
    }

    pub fn from_flat(x: &[f64]) -> Result<Self> {
        if x.is_empty() || x.len() % 3 != 0 {
            return Err(Error::InvalidInput(format!(
                "flat jet has length {}, expected a positive multiple of 3",
                x.len()
            )));
        }
        let m = x.len() / 3;
        Ok(Jet { q: x[..m].to_vec(), qdot1: x[m..2 * m].to_vec(), qdot2: x[2 * m..].to_vec() })
    }
}

/// Momentum point of the phase space `T²*M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub q: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl Phase {
    pub fn new(q: Vec<f64>, p1: Vec<f64>, p2: Vec<f64>) -> Result<Self> {
        let ph = Phase { q, p1, p2 };
        ph.validate()?;
        Ok(ph)
    }

    pub fn zeros(m: usize) -> Self {
        Phase { q: vec![0.0; m], p1: vec![0.0; m], p2: vec![0.0; m] }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("phase", self.q.len(), &[&self.p1, &self.p2])
    }

    /// `(q, p¹, p²)` concatenated, the argument layout of a Hamiltonian.
    pub fn to_flat(&self) -> Vec<f64> {
        [self.q.as_slice(), &self.p1, &self.p2].concat()
    }

    pub fn from_flat(x: &[f64]) -> Result<Self> {
        let j = Jet::from_flat(x)?;
        Ok(Phase { q: j.q, p1: j.qdot1, p2: j.qdot2 })
    }
}

/// Derivatives of `(q, p¹, p²)` along one base direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDerivs {
    pub qdot: Vec<f64>,
    pub p1dot: Vec<f64>,
    pub p2dot: Vec<f64>,
}

impl PhaseDerivs {
    pub fn zeros(m: usize) -> Self {
        PhaseDerivs { qdot: vec![0.0; m], p1dot: vec![0.0; m], p2dot: vec![0.0; m] }
    }
}

/// First jet of a momentum field, an element of `T²T²*M`.
///
/// `d1` holds the `x¹`-derivatives `(q̇₁, ṗ¹₁, ṗ²₁)`, `d2` the `x²`-derivatives
/// `(q̇₂, ṗ¹₂, ṗ²₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseJet {
    pub base: Phase,
    pub d1: PhaseDerivs,
    pub d2: PhaseDerivs,
}

impl PhaseJet {
    pub fn zeros(m: usize) -> Self {
        PhaseJet { base: Phase::zeros(m), d1: PhaseDerivs::zeros(m), d2: PhaseDerivs::zeros(m) }
    }

    pub fn dim(&self) -> usize {
        self.base.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.base;
        check_len(
            "phase jet",
            b.q.len(),
            &[
                &b.p1,
                &b.p2,
                &self.d1.qdot,
                &self.d1.p1dot,
                &self.d1.p2dot,
                &self.d2.qdot,
                &self.d2.p1dot,
                &self.d2.p2dot,
            ],
        )
    }
}

/// Tangent vector to `T²M`: block order `(q, q̇₁, q̇₂, δq, δq̇₁, δq̇₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetTangent {
    pub jet: Jet,
    pub dq: Vec<f64>,
    pub dqdot1: Vec<f64>,
    pub dqdot2: Vec<f64>,
}

impl JetTangent {
    pub fn validate(&self) -> Result<()> {
        self.jet.validate()?;
        check_len("jet tangent", self.jet.dim(), &[&self.dq, &self.dqdot1, &self.dqdot2])
    }
}

/// Jet of a variation, an element of `T²TM`: block order `(q, δq, q̇₁, δq̇₁, q̇₂, δq̇₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetVariation {
    pub jet: Jet,
    pub dq: Vec<f64>,
    pub dqdot1: Vec<f64>,
    pub dqdot2: Vec<f64>,
}

impl JetVariation {
    pub fn validate(&self) -> Result<()> {
        self.jet.validate()?;
        check_len("jet variation", self.jet.dim(), &[&self.dq, &self.dqdot1, &self.dqdot2])
    }

    /// Values in the adapted ordering `(q, δq, q̇₁, δq̇₁, q̇₂, δq̇₂)`.
    pub fn to_flat(&self) -> Vec<f64> {
        [
            self.jet.q.as_slice(),
            &self.dq,
            &self.jet.qdot1,
            &self.dqdot1,
            &self.jet.qdot2,
            &self.dqdot2,
        ]
        .concat()
    }
}

/// Covector on `T²M`, dual to `(δq, δq̇₁, δq̇₂)` at `jet`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetCovector {
    pub jet: Jet,
    pub a: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
}

impl JetCovector {
    pub fn validate(&self) -> Result<()> {
        self.jet.validate()?;
        check_len("jet covector", self.jet.dim(), &[&self.a, &self.b1, &self.b2])
    }

    /// Canonical evaluation of `T*T²M` on `T T²M` over the same jet.
    pub fn pair(&self, v: &JetTangent) -> Result<f64> {
        self.validate()?;
        v.validate()?;
        if self.jet != v.jet {
            return Err(Error::IncompatiblePoints(
                "covector and tangent vector sit over different jets".into(),
            ));
        }
        Ok(dot(&self.a, &v.dq) + dot(&self.b1, &v.dqdot1) + dot(&self.b2, &v.dqdot2))
    }
}

/// Tangent vector to the phase space: `(q, p¹, p², δq, δp¹, δp²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTangent {
    pub phase: Phase,
    pub dq: Vec<f64>,
    pub dp1: Vec<f64>,
    pub dp2: Vec<f64>,
}

impl PhaseTangent {
    pub fn validate(&self) -> Result<()> {
        self.phase.validate()?;
        check_len("phase tangent", self.phase.dim(), &[&self.dq, &self.dp1, &self.dp2])
    }
}

/// Covector on the phase space, dual to `(dq, dp¹, dp²)` at `phase`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCovector {
    pub phase: Phase,
    pub phi: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
}

impl PhaseCovector {
    pub fn validate(&self) -> Result<()> {
        self.phase.validate()?;
        check_len("phase covector", self.phase.dim(), &[&self.phi, &self.psi1, &self.psi2])
    }

    pub fn pair(&self, u: &PhaseTangent) -> Result<f64> {
        self.validate()?;
        u.validate()?;
        if self.phase != u.phase {
            return Err(Error::IncompatiblePoints(
                "covector and tangent vector sit over different phase points".into(),
            ));
        }
        Ok(dot(&self.phi, &u.dq) + dot(&self.psi1, &u.dp1) + dot(&self.psi2, &u.dp2))
    }
}

/// Tangent vector to `T*M`, `(q, p, q̇, ṗ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentVector {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
}

/// Covector on `T*M`, `(q, p, a, b)` dual to `(dq, dp)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentCovector {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CotangentCovector {
    pub fn pair(&self, v: &CotangentVector) -> Result<f64> {
        check_len("cotangent covector", self.q.len(), &[&self.p, &self.a, &self.b])?;
        check_len("cotangent vector", v.q.len(), &[&v.p, &v.dq, &v.dp])?;
        if self.q != v.q || self.p != v.p {
            return Err(Error::IncompatiblePoints("different base points in T*M".into()));
        }
        Ok(dot(&self.a, &v.dq) + dot(&self.b, &v.dp))
    }
}

/// Canonical flip `T T²M → T²TM`. A pure block permutation.
pub fn kappa(v: &JetTangent) -> Result<JetVariation> {
    v.validate()?;
    Ok(JetVariation {
        jet: v.jet.clone(),
        dq: v.dq.clone(),
        dqdot1: v.dqdot1.clone(),
        dqdot2: v.dqdot2.clone(),
    })
}

/// Inverse of [`kappa`].
pub fn kappa_inv(w: &JetVariation) -> Result<JetTangent> {
    w.validate()?;
    Ok(JetTangent {
        jet: w.jet.clone(),
        dq: w.dq.clone(),
        dqdot1: w.dqdot1.clone(),
        dqdot2: w.dqdot2.clone(),
    })
}

/// Jet of `(q, q̇₁, q̇₂)` underlying a phase jet.
fn configuration_jet(w: &PhaseJet) -> Jet {
    Jet { q: w.base.q.clone(), qdot1: w.d1.qdot.clone(), qdot2: w.d2.qdot.clone() }
}

/// Pairing of a momentum jet with a variation jet over the same configuration jet:
/// `(ṗ¹₁ + ṗ²₂)·δq + p²·δq̇₂ + p¹·δq̇₁`.
pub fn pair_jet(w: &PhaseJet, dv: &JetVariation) -> Result<f64> {
    w.validate()?;
    dv.validate()?;
    if configuration_jet(w) != dv.jet {
        return Err(Error::IncompatiblePoints(
            "momentum jet and variation jet project to different jets".into(),
        ));
    }
    let div: f64 = w
        .d1
        .p1dot
        .iter()
        .zip(&w.d2.p2dot)
        .zip(&dv.dq)
        .map(|((a, b), d)| (a + b) * d)
        .sum();
    Ok(div + dot(&w.base.p2, &dv.dqdot2) + dot(&w.base.p1, &dv.dqdot1))
}

/// `α: T²T²*M → T*T²M`, the map fixed by `⟨α(w), v⟩ = ⟨⟨w, κ(v)⟩⟩`.
pub fn alpha(w: &PhaseJet) -> Result<JetCovector> {
    w.validate()?;
    let a = w.d1.p1dot.iter().zip(&w.d2.p2dot).map(|(x, y)| x + y).collect();
    Ok(JetCovector { jet: configuration_jet(w), a, b1: w.base.p1.clone(), b2: w.base.p2.clone() })
}

/// `β: T²T²*M → T*T²*M`, `(q, p¹, p², −ṗ¹₁ − ṗ²₂, q̇₁, q̇₂)`.
pub fn beta(w: &PhaseJet) -> Result<PhaseCovector> {
    w.validate()?;
    let phi = w.d1.p1dot.iter().zip(&w.d2.p2dot).map(|(x, y)| -(x + y)).collect();
    Ok(PhaseCovector {
        phase: w.base.clone(),
        phi,
        psi1: w.d1.qdot.clone(),
        psi2: w.d2.qdot.clone(),
    })
}

/// Classical `β_M: T T*M → T*T*M` given by the canonical symplectic form,
/// `(q, p, q̇, ṗ) ↦ (q, p, −ṗ, q̇)`.
pub fn beta_m(v: &CotangentVector) -> Result<CotangentCovector> {
    check_len("cotangent vector", v.q.len(), &[&v.p, &v.dq, &v.dp])?;
    Ok(CotangentCovector {
        q: v.q.clone(),
        p: v.p.clone(),
        a: v.dp.iter().map(|x| -x).collect(),
        b: v.dq.clone(),
    })
}

/// `(T pr₁ × T pr₂) ∘ ι`: the two classical tangent lifts carried by a phase jet.
pub fn split_phase_jet(w: &PhaseJet) -> Result<(CotangentVector, CotangentVector)> {
    w.validate()?;
    let first = CotangentVector {
        q: w.base.q.clone(),
        p: w.base.p1.clone(),
        dq: w.d1.qdot.clone(),
        dp: w.d1.p1dot.clone(),
    };
    let second = CotangentVector {
        q: w.base.q.clone(),
        p: w.base.p2.clone(),
        dq: w.d2.qdot.clone(),
        dp: w.d2.p2dot.clone(),
    };
    Ok((first, second))
}

/// Pullback of a pair of covectors along `(q, p¹, p²) ↦ ((q, p¹), (q, p²))`.
pub fn pullback_pair(first: &CotangentCovector, second: &CotangentCovector) -> Result<PhaseCovector> {
    let m = first.q.len();
    check_len("cotangent covector", m, &[&first.p, &first.a, &first.b])?;
    check_len("cotangent covector", m, &[&second.q, &second.p, &second.a, &second.b])?;
    if first.q != second.q {
        return Err(Error::IncompatiblePoints("factors sit over different points of M".into()));
    }
    Ok(PhaseCovector {
        phase: Phase { q: first.q.clone(), p1: first.p.clone(), p2: second.p.clone() },
        phi: first.a.iter().zip(&second.a).map(|(x, y)| x + y).collect(),
        psi1: first.b.clone(),
        psi2: second.b.clone(),
    })
}

/// `β` rebuilt from two copies of the classical `β_M` without reference to `α`:
/// `j* ∘ (β_M × β_M) ∘ (T pr₁ × T pr₂) ∘ ι`.
pub fn beta_tilde(w: &PhaseJet) -> Result<PhaseCovector> {
    let (first, second) = split_phase_jet(w)?;
    pullback_pair(&beta_m(&first)?, &beta_m(&second)?)
}

/// The bi-form `ω² = d¹q⊗dp¹ + d²q⊗dp² − d¹p¹⊗dq − d²p²⊗dq` evaluated on
/// a phase jet and a tangent vector over the same phase point.
pub fn omega2_pair(w: &PhaseJet, u: &PhaseTangent) -> Result<f64> {
    w.validate()?;
    u.validate()?;
    if w.base != u.phase {
        return Err(Error::IncompatiblePoints("phase jet and tangent over different points".into()));
    }
    let div: f64 = w
        .d1
        .p1dot
        .iter()
        .zip(&w.d2.p2dot)
        .zip(&u.dq)
        .map(|((a, b), d)| (a + b) * d)
        .sum();
    Ok(dot(&w.d1.qdot, &u.dp1) + dot(&w.d2.qdot, &u.dp2) - div)
}

/// Projection onto the configuration jets `T²M`.
pub trait ProjectToJet {
    fn project_to_jet(&self) -> Jet;
}

/// Projection onto the phase space `T²*M`.
pub trait ProjectToPhase {
    fn project_to_phase(&self) -> Phase;
}

impl ProjectToJet for JetCovector {
    fn project_to_jet(&self) -> Jet {
        self.jet.clone()
    }
}

impl ProjectToJet for PhaseJet {
    fn project_to_jet(&self) -> Jet {
        configuration_jet(self)
    }
}

/// `ζ: T*T²*M → T²M`, reading the fibre coordinates `(ψ¹, ψ²)` as velocities.
impl ProjectToJet for PhaseCovector {
    fn project_to_jet(&self) -> Jet {
        Jet { q: self.phase.q.clone(), qdot1: self.psi1.clone(), qdot2: self.psi2.clone() }
    }
}

impl ProjectToPhase for PhaseCovector {
    fn project_to_phase(&self) -> Phase {
        self.phase.clone()
    }
}

impl ProjectToPhase for PhaseJet {
    fn project_to_phase(&self) -> Phase {
        self.base.clone()
    }
}

/// `ξ: T*T²M → T²*M`, restriction of the covector to vertical vectors.
impl ProjectToPhase for JetCovector {
    fn project_to_phase(&self) -> Phase {
        Phase { q: self.jet.q.clone(), p1: self.b1.clone(), p2: self.b2.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn example_phase_jet() -> PhaseJet {
        // (q, p¹, p², q̇₁, ṗ¹₁, ṗ²₁, q̇₂, ṗ¹₂, ṗ²₂) = (1..9)
        PhaseJet {
            base: Phase { q: v(&[1.0]), p1: v(&[2.0]), p2: v(&[3.0]) },
            d1: PhaseDerivs { qdot: v(&[4.0]), p1dot: v(&[5.0]), p2dot: v(&[6.0]) },
            d2: PhaseDerivs { qdot: v(&[7.0]), p1dot: v(&[8.0]), p2dot: v(&[9.0]) },
        }
    }

    #[test]
    fn kappa_permutes_blocks() {
        let t = JetTangent {
            jet: Jet { q: v(&[1.0]), qdot1: v(&[2.0]), qdot2: v(&[3.0]) },
            dq: v(&[4.0]),
            dqdot1: v(&[5.0]),
            dqdot2: v(&[6.0]),
        };
        let w = kappa(&t).unwrap();
        assert_eq!(w.to_flat(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(kappa_inv(&w).unwrap(), t);
    }

    #[test]
    fn kappa_zero() {
        let t = JetTangent { jet: Jet::zeros(2), dq: v(&[0.0; 2]), dqdot1: v(&[0.0; 2]), dqdot2: v(&[0.0; 2]) };
        assert!(kappa(&t).unwrap().to_flat().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn kappa_rejects_ragged_blocks() {
        let t = JetTangent {
            jet: Jet { q: v(&[1.0, 2.0]), qdot1: v(&[2.0]), qdot2: v(&[3.0, 1.0]) },
            dq: v(&[4.0, 0.0]),
            dqdot1: v(&[5.0, 0.0]),
            dqdot2: v(&[6.0, 0.0]),
        };
        assert!(matches!(kappa(&t), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn pair_jet_hand_value() {
        let mut w = PhaseJet::zeros(1);
        w.base.p1 = v(&[1.0]);
        w.base.p2 = v(&[2.0]);
        w.d1.p1dot = v(&[3.0]);
        w.d2.p2dot = v(&[4.0]);
        let dv = JetVariation { jet: Jet::zeros(1), dq: v(&[1.0]), dqdot1: v(&[1.0]), dqdot2: v(&[1.0]) };
        assert_eq!(pair_jet(&w, &dv).unwrap(), 10.0);
        let zero = JetVariation { jet: Jet::zeros(1), dq: v(&[0.0]), dqdot1: v(&[0.0]), dqdot2: v(&[0.0]) };
        assert_eq!(pair_jet(&w, &zero).unwrap(), 0.0);
    }

    #[test]
    fn pair_jet_rejects_mismatched_projection() {
        let w = PhaseJet::zeros(1);
        let dv = JetVariation {
            jet: Jet { q: v(&[0.5]), qdot1: v(&[0.0]), qdot2: v(&[0.0]) },
            dq: v(&[1.0]),
            dqdot1: v(&[0.0]),
            dqdot2: v(&[0.0]),
        };
        assert!(matches!(pair_jet(&w, &dv), Err(Error::IncompatiblePoints(_))));
    }

    #[test]
    fn alpha_hand_value() {
        let c = alpha(&example_phase_jet()).unwrap();
        assert_eq!(c.jet, Jet { q: v(&[1.0]), qdot1: v(&[4.0]), qdot2: v(&[7.0]) });
        assert_eq!((c.a[0], c.b1[0], c.b2[0]), (14.0, 2.0, 3.0));
        assert_eq!(c.project_to_jet(), Jet { q: v(&[1.0]), qdot1: v(&[4.0]), qdot2: v(&[7.0]) });
        assert_eq!(c.project_to_phase(), Phase { q: v(&[1.0]), p1: v(&[2.0]), p2: v(&[3.0]) });
    }

    #[test]
    fn beta_hand_value() {
        let c = beta(&example_phase_jet()).unwrap();
        assert_eq!(c.phase, Phase { q: v(&[1.0]), p1: v(&[2.0]), p2: v(&[3.0]) });
        assert_eq!((c.phi[0], c.psi1[0], c.psi2[0]), (-14.0, 4.0, 7.0));
        assert_eq!(beta_tilde(&example_phase_jet()).unwrap(), c);
        assert_eq!(c.project_to_phase(), Phase { q: v(&[1.0]), p1: v(&[2.0]), p2: v(&[3.0]) });
    }

    #[test]
    fn zero_maps_to_zero() {
        let w = PhaseJet::zeros(3);
        let a = alpha(&w).unwrap();
        assert!(a.a.iter().chain(&a.b1).chain(&a.b2).all(|x| *x == 0.0));
        let b = beta(&w).unwrap();
        assert!(b.phi.iter().chain(&b.psi1).chain(&b.psi2).all(|x| *x == 0.0));
        assert_eq!(beta_tilde(&w).unwrap(), b);
    }

    #[test]
    fn beta_m_hand_value() {
        let t = CotangentVector { q: v(&[0.0]), p: v(&[0.0]), dq: v(&[1.0]), dp: v(&[1.0]) };
        let c = beta_m(&t).unwrap();
        assert_eq!((c.a[0], c.b[0]), (-1.0, 1.0));
    }

    /// `ω(v, w)` of `T*M` computed only from the Liouville form `θ = p dq` along the
    /// homotopy `(a, b) ↦ (q₀ + a q̇_v + b q̇_w, p₀ + a ṗ_v + b ṗ_w)`, differentiated by
    /// central differences in the homotopy parameters.
    fn omega_from_liouville(v: &CotangentVector, w: &CotangentVector) -> f64 {
        let h = 1e-4;
        let point = |a: f64, b: f64| -> (Vec<f64>, Vec<f64>) {
            let q = (0..v.q.len()).map(|i| v.q[i] + a * v.dq[i] + b * w.dq[i]).collect();
            let p = (0..v.q.len()).map(|i| v.p[i] + a * v.dp[i] + b * w.dp[i]).collect();
            (q, p)
        };
        // θ evaluated on the tangent of the curve in `a` (resp. `b`) through (a, b)
        let theta_along_a = |a: f64, b: f64| {
            let (_, p) = point(a, b);
            let (q_plus, _) = point(a + h, b);
            let (q_minus, _) = point(a - h, b);
            (0..p.len()).map(|i| p[i] * (q_plus[i] - q_minus[i]) / (2.0 * h)).sum::<f64>()
        };
        let theta_along_b = |a: f64, b: f64| {
            let (_, p) = point(a, b);
            let (q_plus, _) = point(a, b + h);
            let (q_minus, _) = point(a, b - h);
            (0..p.len()).map(|i| p[i] * (q_plus[i] - q_minus[i]) / (2.0 * h)).sum::<f64>()
        };
        (theta_along_a(0.0, h) - theta_along_a(0.0, -h)) / (2.0 * h)
            - (theta_along_b(h, 0.0) - theta_along_b(-h, 0.0)) / (2.0 * h)
    }

    #[test]
    fn beta_m_matches_liouville_form() {
        let v1 = CotangentVector { q: v(&[0.3, -0.2]), p: v(&[1.1, 0.4]), dq: v(&[0.7, -1.3]), dp: v(&[0.2, 0.9]) };
        let w1 = CotangentVector { q: v1.q.clone(), p: v1.p.clone(), dq: v(&[-0.4, 0.5]), dp: v(&[1.6, -0.8]) };
        let expected = omega_from_liouville(&v1, &w1);
        let got = beta_m(&v1).unwrap().pair(&w1).unwrap();
        assert!((expected - got).abs() < 1e-8, "{expected} vs {got}");

        let unit = CotangentVector { q: v(&[0.0]), p: v(&[0.0]), dq: v(&[1.0]), dp: v(&[1.0]) };
        let probe = CotangentVector { q: v(&[0.0]), p: v(&[0.0]), dq: v(&[0.0]), dp: v(&[1.0]) };
        assert!((omega_from_liouville(&unit, &probe) - beta_m(&unit).unwrap().pair(&probe).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn omega2_hand_value() {
        let mut w = PhaseJet::zeros(1);
        w.d1.qdot = v(&[1.0]);
        w.d1.p1dot = v(&[2.0]);
        w.d2.p2dot = v(&[3.0]);
        let u = PhaseTangent { phase: Phase::zeros(1), dq: v(&[1.0]), dp1: v(&[5.0]), dp2: v(&[0.0]) };
        assert_eq!(omega2_pair(&w, &u).unwrap(), 0.0);
        let zero = PhaseTangent { phase: Phase::zeros(1), dq: v(&[0.0]), dp1: v(&[0.0]), dp2: v(&[0.0]) };
        assert_eq!(omega2_pair(&w, &zero).unwrap(), 0.0);
    }

    #[test]
    fn omega2_rejects_other_base() {
        let w = PhaseJet::zeros(1);
        let u = PhaseTangent { phase: Phase { q: v(&[1.0]), p1: v(&[0.0]), p2: v(&[0.0]) }, dq: v(&[1.0]), dp1: v(&[0.0]), dp2: v(&[0.0]) };
        assert!(matches!(omega2_pair(&w, &u), Err(Error::IncompatiblePoints(_))));
    }

    #[test]
    fn covector_projections() {
        let c = beta(&example_phase_jet()).unwrap();
        assert_eq!(c.project_to_jet(), Jet { q: v(&[1.0]), qdot1: v(&[4.0]), qdot2: v(&[7.0]) });
        assert_eq!(PhaseCovector { phase: Phase::zeros(2), phi: v(&[0.0; 2]), psi1: v(&[0.0; 2]), psi2: v(&[0.0; 2]) }.project_to_jet(), Jet::zeros(2));
    }
}
