//! Hamiltonian side: `dH`, the phase relation `β⁻¹(dH(T²*M))`, numeric inversion
//! of the Legendre map and the Legendre transform of a Lagrangian.

use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::autodiff::{self, Dual, HyperDual, ScalarField};
use crate::jetcore::{beta, Jet, Phase, PhaseCovector, PhaseDerivs, PhaseJet};
use crate::lagrangian::{legendre, max_diff, LagrangianModel};
use crate::{Error, Result};

/// Convergence threshold of the Legendre inversion, max-norm on momenta.
pub const INVERSION_TOL: f64 = 1e-10;
pub const INVERSION_MAX_ITER: usize = 50;
pub const MAX_HALVINGS: usize = 20;

pub type PhasePredicate = Arc<dyn Fn(&Phase) -> bool + Send + Sync>;

/// A Hamiltonian `H(q, p¹, p²)` on the phase space of an `m`-dimensional chart.
#[derive(Clone)]
pub struct HamiltonianModel {
    name: String,
    m: usize,
    hamiltonian: Arc<dyn ScalarField>,
    admissible: PhasePredicate,
}

impl fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianModel").field("name", &self.name).field("m", &self.m).finish()
    }
}

impl HamiltonianModel {
    pub fn new(
        name: impl Into<String>,
        m: usize,
        field: Arc<dyn ScalarField>,
        admissible: PhasePredicate,
    ) -> Result<Self> {
        if m == 0 || field.arity() != 3 * m {
            return Err(Error::InvalidParameter(format!(
                "Hamiltonian of arity {} does not match dimension {m}",
                field.arity()
            )));
        }
        Ok(HamiltonianModel { name: name.into(), m, hamiltonian: field, admissible })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn field(&self) -> &dyn ScalarField {
        self.hamiltonian.as_ref()
    }

    pub fn is_admissible(&self, ph: &Phase) -> bool {
        ph.dim() == self.m && (self.admissible)(ph)
    }

    fn check(&self, ph: &Phase) -> Result<Vec<f64>> {
        ph.validate()?;
        if ph.dim() != self.m {
            return Err(Error::InvalidInput(format!(
                "phase of dimension {} for a model of dimension {}",
                ph.dim(),
                self.m
            )));
        }
        if !(self.admissible)(ph) {
            return Err(Error::Domain(format!("phase is not admissible for the {} Hamiltonian", self.name)));
        }
        Ok(ph.to_flat())
    }

    pub fn value(&self, ph: &Phase) -> Result<f64> {
        let x = self.check(ph)?;
        autodiff::value(self.field(), &x)
    }
}

/// `dH` at `ph`: `(φ, ψ¹, ψ²) = (∂H/∂q, ∂H/∂p¹, ∂H/∂p²)`.
pub fn dh(model: &HamiltonianModel, ph: &Phase) -> Result<PhaseCovector> {
    let x = model.check(ph)?;
    let g = autodiff::grad(model.field(), &x)?;
    let m = model.m;
    Ok(PhaseCovector {
        phase: ph.clone(),
        phi: g[..m].to_vec(),
        psi1: g[m..2 * m].to_vec(),
        psi2: g[2 * m..].to_vec(),
    })
}

/// Max-norm distance of `β(w)` from `dH` at the base of `w`.
pub fn ham_phase_residual(model: &HamiltonianModel, w: &PhaseJet) -> Result<f64> {
    let lhs = beta(w)?;
    let rhs = dh(model, &w.base)?;
    Ok(max_diff(&[(&lhs.phi, &rhs.phi), (&lhs.psi1, &rhs.psi1), (&lhs.psi2, &rhs.psi2)]))
}

/// One member of `β⁻¹(dH)` over `ph`: `q̇ᵢ = ∂H/∂pⁱ`, `ṗ¹₁ = −∂H/∂q`, other free blocks zero.
pub fn hamiltonian_member(model: &HamiltonianModel, ph: &Phase) -> Result<PhaseJet> {
    let c = dh(model, ph)?;
    let m = model.m;
    Ok(PhaseJet {
        base: ph.clone(),
        d1: PhaseDerivs { qdot: c.psi1, p1dot: c.phi.iter().map(|x| -x).collect(), p2dot: vec![0.0; m] },
        d2: PhaseDerivs { qdot: c.psi2, p1dot: vec![0.0; m], p2dot: vec![0.0; m] },
    })
}

/// Result of a Newton inversion of the Legendre map.
#[derive(Debug, Clone)]
pub struct InversionOutcome {
    pub jet: Jet,
    pub iterations: usize,
    pub residual: f64,
}

fn momentum_mismatch(model: &LagrangianModel, jet: &Jet, ph: &Phase) -> Result<(Vec<f64>, f64)> {
    let p = legendre(model, jet)?;
    let f: Vec<f64> = p.p1.iter().chain(&p.p2).zip(ph.p1.iter().chain(&ph.p2)).map(|(a, b)| a - b).collect();
    let norm = f.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    Ok((f, norm))
}

/// Solves `J δ = rhs`, rejecting (numerically) singular `J`.
pub(crate) fn solve_dense(j: DMatrix<f64>, rhs: DVector<f64>, iteration: usize) -> Result<DVector<f64>> {
    let lu = j.lu();
    let diag = lu.u().diagonal();
    let max = diag.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let min = diag.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
    if !(max > 0.0) || min <= 1e-14 * max {
        return Err(Error::SingularJacobian { iteration });
    }
    let x = lu.solve(&rhs).ok_or(Error::SingularJacobian { iteration })?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularJacobian { iteration })
    }
}

/// Like [`legendre_invert`], also reporting iterations and the final momentum mismatch.
pub fn newton_legendre(model: &LagrangianModel, ph: &Phase, guess: &Jet) -> Result<InversionOutcome> {
    ph.validate()?;
    let m = model.dim();
    if ph.dim() != m {
        return Err(Error::InvalidInput(format!("phase of dimension {} for a model of dimension {m}", ph.dim())));
    }
    let mut jet = Jet { q: ph.q.clone(), qdot1: guess.qdot1.clone(), qdot2: guess.qdot2.clone() };
    model.check(&jet)?;
    let (mut f, mut norm) = momentum_mismatch(model, &jet, ph)?;
    for it in 0..INVERSION_MAX_ITER {
        if norm <= INVERSION_TOL {
            return Ok(InversionOutcome { jet, iterations: it, residual: norm });
        }
        let h = autodiff::hessian(model.field(), &jet.to_flat())?;
        let k = 3 * m;
        let jac = DMatrix::from_fn(2 * m, 2 * m, |r, c| h[(m + r) * k + m + c]);
        let step = solve_dense(jac, -DVector::from_column_slice(&f), it)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = Jet {
                q: jet.q.clone(),
                qdot1: (0..m).map(|a| jet.qdot1[a] + t * step[a]).collect(),
                qdot2: (0..m).map(|a| jet.qdot2[a] + t * step[m + a]).collect(),
            };
            if model.is_admissible(&cand) {
                if let Ok((fc, nc)) = momentum_mismatch(model, &cand, ph) {
                    if nc < norm {
                        accepted = Some((cand, fc, nc));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, fc, nc)) => {
                jet = cand;
                f = fc;
                norm = nc;
            }
            None => return Err(Error::NoConvergence { iterations: it + 1, residual: norm }),
        }
    }
    if norm <= INVERSION_TOL {
        return Ok(InversionOutcome { jet, iterations: INVERSION_MAX_ITER, residual: norm });
    }
    Err(Error::NoConvergence { iterations: INVERSION_MAX_ITER, residual: norm })
}

/// Finds velocities whose Legendre image is `ph`, by damped Newton from `guess`.
///
/// The step is halved (up to 20 times) until the momentum mismatch decreases and
/// the iterate stays admissible.
pub fn legendre_invert(model: &LagrangianModel, ph: &Phase, guess: &Jet) -> Result<Jet> {
    newton_legendre(model, ph, guess).map(|o| o.jet)
}

pub type PhaseToJet = Arc<dyn Fn(&Phase) -> Result<Jet> + Send + Sync>;

/// How the Legendre transform recovers velocities from momenta.
#[derive(Clone)]
pub enum Inversion {
    /// An explicit inverse of the Legendre map.
    ClosedForm(PhaseToJet),
    /// Newton from the last solution found, falling back to `seed` when that fails.
    Newton { seed: PhaseToJet },
}

/// `H(q, p¹, p²) = p¹·v₁ + p²·v₂ − L(q, v₁, v₂)` with `(v₁, v₂)` the inverse Legendre image.
///
/// Derivatives follow from the envelope identities `∂H/∂p = v`, `∂H/∂q = −∂L/∂q`
/// and, at second order, from the inverse of the velocity Hessian of `L`.
struct LegendreTransform {
    lagrangian: LagrangianModel,
    inversion: Inversion,
    warm: Mutex<Option<Jet>>,
}

impl LegendreTransform {
    fn invert(&self, ph: &Phase) -> Result<Jet> {
        match &self.inversion {
            Inversion::ClosedForm(f) => f(ph),
            Inversion::Newton { seed } => {
                let warm = self.warm.lock().expect("warm-start cache poisoned").clone();
                let from_warm = warm
                    .filter(|w| w.dim() == ph.dim())
                    .and_then(|w| newton_legendre(&self.lagrangian, ph, &w).ok());
                let found = match from_warm {
                    Some(o) => o.jet,
                    None => newton_legendre(&self.lagrangian, ph, &seed(ph)?)?.jet,
                };
                *self.warm.lock().expect("warm-start cache poisoned") = Some(found.clone());
                Ok(found)
            }
        }
    }

    /// Value, gradient and (optionally) Hessian of `H` at the flat phase point `x`.
    fn local(&self, x: &[f64], second: bool) -> Result<(f64, Vec<f64>, Option<Vec<f64>>)> {
        let m = self.lagrangian.dim();
        let ph = Phase::from_flat(x)?;
        let jet = self.invert(&ph)?;
        let z = self.lagrangian.check(&jet)?;
        let l = autodiff::value(self.lagrangian.field(), &z)?;
        let lg = autodiff::grad(self.lagrangian.field(), &z)?;
        let value: f64 = ph.p1.iter().zip(&jet.qdot1).map(|(p, v)| p * v).sum::<f64>()
            + ph.p2.iter().zip(&jet.qdot2).map(|(p, v)| p * v).sum::<f64>()
            - l;
        let mut g: Vec<f64> = lg[..m].iter().map(|d| -d).collect();
        g.extend_from_slice(&jet.qdot1);
        g.extend_from_slice(&jet.qdot2);
        if !second {
            return Ok((value, g, None));
        }
        let k = 3 * m;
        let lh = autodiff::hessian(self.lagrangian.field(), &z)?;
        let a = DMatrix::from_fn(2 * m, 2 * m, |r, c| lh[(m + r) * k + m + c]);
        let b = DMatrix::from_fn(2 * m, m, |r, c| lh[(m + r) * k + c]);
        let c = DMatrix::from_fn(m, m, |r, cc| lh[r * k + cc]);
        let a_inv = a.try_inverse().ok_or(Error::SingularJacobian { iteration: 0 })?;
        let dv_dq = -(&a_inv * &b);
        let h_qq = -c + b.transpose() * &a_inv * &b;
        let mut hess = vec![0.0; k * k];
        for r in 0..k {
            for cc in 0..k {
                hess[r * k + cc] = match (r < m, cc < m) {
                    (true, true) => h_qq[(r, cc)],
                    (false, true) => dv_dq[(r - m, cc)],
                    (true, false) => dv_dq[(cc - m, r)],
                    (false, false) => a_inv[(r - m, cc - m)],
                };
            }
        }
        Ok((value, g, Some(hess)))
    }
}

impl ScalarField for LegendreTransform {
    fn arity(&self) -> usize {
        3 * self.lagrangian.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.local(x, false)?.0)
    }

    fn value_dual(&self, x: &[Dual]) -> Result<Dual> {
        let base: Vec<f64> = x.iter().map(|d| d.value).collect();
        let (value, g, _) = self.local(&base, false)?;
        let deriv = g.iter().zip(x).map(|(gi, d)| gi * d.deriv).sum();
        Ok(Dual { value, deriv })
    }

    fn value_hyper(&self, x: &[HyperDual]) -> Result<HyperDual> {
        let base: Vec<f64> = x.iter().map(|d| d.value).collect();
        let (value, g, hess) = self.local(&base, true)?;
        let hess = hess.expect("second-order data requested");
        let k = x.len();
        let mut d12: f64 = g.iter().zip(x).map(|(gi, d)| gi * d.d12).sum();
        for r in 0..k {
            for c in 0..k {
                d12 += x[r].d1 * hess[r * k + c] * x[c].d2;
            }
        }
        Ok(HyperDual {
            value,
            d1: g.iter().zip(x).map(|(gi, d)| gi * d.d1).sum(),
            d2: g.iter().zip(x).map(|(gi, d)| gi * d.d2).sum(),
            d12,
        })
    }
}

/// Legendre transform of `model`.
///
/// Inversion failures (singular or non-convergent Legendre map) surface as errors
/// when the Hamiltonian is evaluated. The Newton strategy keeps its warm start
/// per returned model; give each thread its own model.
pub fn hamiltonian_from_lagrangian(model: &LagrangianModel, invert: Inversion) -> HamiltonianModel {
    let m = model.dim();
    HamiltonianModel {
        name: format!("{}-legendre", model.name()),
        m,
        hamiltonian: Arc::new(LegendreTransform { lagrangian: model.clone(), inversion: invert, warm: Mutex::new(None) }),
        admissible: Arc::new(|_| true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Function, Scalar};

    struct Harmonic1;
    impl Function for Harmonic1 {
        fn arity(&self) -> usize {
            3
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
            Ok((x[1] * x[1] + x[2] * x[2]) * 0.5)
        }
    }

    struct Affine;
    impl Function for Affine {
        fn arity(&self) -> usize {
            3
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
            Ok(x[1])
        }
    }

    struct HalfMomentumSquare;
    impl Function for HalfMomentumSquare {
        fn arity(&self) -> usize {
            3
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
            Ok((x[1] * x[1] + x[2] * x[2]) * 0.5)
        }
    }

    fn phase1(q: f64, a: f64, b: f64) -> Phase {
        Phase { q: vec![q], p1: vec![a], p2: vec![b] }
    }

    fn zero_seed() -> Inversion {
        Inversion::Newton { seed: Arc::new(|ph: &Phase| Ok(Jet::zeros(ph.dim()))) }
    }

    #[test]
    fn dh_of_kinetic_hamiltonian() {
        let h = HamiltonianModel::new("kinetic", 1, Arc::new(HalfMomentumSquare), Arc::new(|_| true)).unwrap();
        let c = dh(&h, &phase1(0.0, 2.0, -3.0)).unwrap();
        assert_eq!((c.phi[0], c.psi1[0], c.psi2[0]), (0.0, 2.0, -3.0));
    }

    #[test]
    fn inadmissible_phase_is_domain_error() {
        let h = HamiltonianModel::new("kinetic", 1, Arc::new(HalfMomentumSquare), Arc::new(|p: &Phase| p.p1[0] > 0.0)).unwrap();
        assert!(dh(&h, &phase1(0.0, -2.0, 0.0)).unwrap_err().is_domain());
    }

    #[test]
    fn kinetic_member_and_perturbation() {
        let h = HamiltonianModel::new("kinetic", 1, Arc::new(HalfMomentumSquare), Arc::new(|_| true)).unwrap();
        let mut w = PhaseJet::zeros(1);
        w.base = phase1(0.2, 0.7, -0.4);
        w.d1 = PhaseDerivs { qdot: vec![0.7], p1dot: vec![0.3], p2dot: vec![9.0] };
        w.d2 = PhaseDerivs { qdot: vec![-0.4], p1dot: vec![1.0], p2dot: vec![-0.3] };
        assert_eq!(ham_phase_residual(&h, &w).unwrap(), 0.0);
        w.d1.qdot[0] += 1e-3;
        assert!((ham_phase_residual(&h, &w).unwrap() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn harmonic_inversion_takes_one_step() {
        let l = LagrangianModel::everywhere("harmonic", 1, Arc::new(Harmonic1)).unwrap();
        let out = newton_legendre(&l, &phase1(0.5, 2.0, -3.0), &Jet::zeros(1)).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!((out.jet.qdot1[0], out.jet.qdot2[0]), (2.0, -3.0));
    }

    #[test]
    fn affine_lagrangian_is_singular() {
        let l = LagrangianModel::everywhere("affine", 1, Arc::new(Affine)).unwrap();
        let err = legendre_invert(&l, &phase1(0.0, 2.0, 1.0), &Jet::zeros(1)).unwrap_err();
        assert_eq!(err, Error::SingularJacobian { iteration: 0 });
        let h = hamiltonian_from_lagrangian(&l, zero_seed());
        assert!(matches!(dh(&h, &phase1(0.0, 2.0, 1.0)), Err(Error::SingularJacobian { .. })));
    }

    #[test]
    fn harmonic_transform_is_kinetic_energy() {
        let l = LagrangianModel::everywhere("harmonic", 1, Arc::new(Harmonic1)).unwrap();
        let h = hamiltonian_from_lagrangian(&l, zero_seed());
        let ph = phase1(0.3, 1.5, -0.5);
        assert!((h.value(&ph).unwrap() - 0.5 * (1.5 * 1.5 + 0.25)).abs() < 1e-12);
        let c = dh(&h, &ph).unwrap();
        assert_eq!((c.phi[0], c.psi1[0], c.psi2[0]), (0.0, 1.5, -0.5));
        // second derivatives: H_pp = identity
        assert!((autodiff::hessian_mixed(h.field(), &ph.to_flat(), 1, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(autodiff::hessian_mixed(h.field(), &ph.to_flat(), 1, 2).unwrap().abs() < 1e-12);
    }
}
