//! Lagrangian side: `dL`, the Legendre map, the phase relation `α⁻¹(dL(T²M))`
//! and the pointwise Euler-Lagrange residual.

use std::fmt;
use std::sync::Arc;

use crate::autodiff::{self, ScalarField};
use crate::jetcore::{alpha, Jet, JetCovector, Phase, PhaseDerivs, PhaseJet};
use crate::{Error, Result};

pub type JetPredicate = Arc<dyn Fn(&Jet) -> bool + Send + Sync>;

/// A Lagrangian `L(q, q̇₁, q̇₂)` on the jets of maps into an `m`-dimensional chart.
#[derive(Clone)]
pub struct LagrangianModel {
    name: String,
    m: usize,
    lagrangian: Arc<dyn ScalarField>,
    admissible: JetPredicate,
}

impl fmt::Debug for LagrangianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianModel").field("name", &self.name).field("m", &self.m).finish()
    }
}

impl LagrangianModel {
    /// `field` must have arity `3m` over `(q, q̇₁, q̇₂)`.
    pub fn new(
        name: impl Into<String>,
        m: usize,
        field: Arc<dyn ScalarField>,
        admissible: JetPredicate,
    ) -> Result<Self> {
        if m == 0 || field.arity() != 3 * m {
            return Err(Error::InvalidParameter(format!(
                "Lagrangian of arity {} does not match dimension {m}",
                field.arity()
            )));
        }
        Ok(LagrangianModel { name: name.into(), m, lagrangian: field, admissible })
    }

    /// A model defined on every jet.
    pub fn everywhere(name: impl Into<String>, m: usize, field: Arc<dyn ScalarField>) -> Result<Self> {
        Self::new(name, m, field, Arc::new(|_| true))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn field(&self) -> &dyn ScalarField {
        self.lagrangian.as_ref()
    }

    pub fn is_admissible(&self, j: &Jet) -> bool {
        j.dim() == self.m && (self.admissible)(j)
    }

    /// Validates dimension and admissibility and returns the flat argument.
    pub(crate) fn check(&self, j: &Jet) -> Result<Vec<f64>> {
        j.validate()?;
        if j.dim() != self.m {
            return Err(Error::InvalidInput(format!(
                "jet of dimension {} for a model of dimension {}",
                j.dim(),
                self.m
            )));
        }
        if !(self.admissible)(j) {
            return Err(Error::Domain(format!("jet is not admissible for the {} model", self.name)));
        }
        Ok(j.to_flat())
    }

    pub fn value(&self, j: &Jet) -> Result<f64> {
        let x = self.check(j)?;
        autodiff::value(self.field(), &x)
    }
}

/// Second-order data of a map at a point: its jet plus `∂²u/∂x¹²`, `∂²u/∂x¹∂x²`, `∂²u/∂x²²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondJet {
    pub jet: Jet,
    pub d11: Vec<f64>,
    pub d12: Vec<f64>,
    pub d22: Vec<f64>,
}

impl SecondJet {
    pub fn validate(&self) -> Result<()> {
        self.jet.validate()?;
        let m = self.jet.dim();
        if [&self.d11, &self.d12, &self.d22].iter().any(|b| b.len() != m) {
            return Err(Error::InvalidInput("second-jet blocks must have length m".into()));
        }
        Ok(())
    }
}

/// `dL` at `j` as a covector `(∂L/∂q, ∂L/∂q̇₁, ∂L/∂q̇₂)` over `j`.
pub fn dl(model: &LagrangianModel, j: &Jet) -> Result<JetCovector> {
    let x = model.check(j)?;
    let g = autodiff::grad(model.field(), &x)?;
    let m = model.m;
    Ok(JetCovector {
        jet: j.clone(),
        a: g[..m].to_vec(),
        b1: g[m..2 * m].to_vec(),
        b2: g[2 * m..].to_vec(),
    })
}

/// Legendre map `(q, q̇₁, q̇₂) ↦ (q, ∂L/∂q̇₁, ∂L/∂q̇₂)`.
pub fn legendre(model: &LagrangianModel, j: &Jet) -> Result<Phase> {
    let c = dl(model, j)?;
    Ok(Phase { q: c.jet.q, p1: c.b1, p2: c.b2 })
}

/// Max-norm distance of `α(w)` from `dL` at the configuration jet of `w`.
///
/// Zero exactly when `w` belongs to the phase dynamics generated by the model.
pub fn phase_relation_residual(model: &LagrangianModel, w: &PhaseJet) -> Result<f64> {
    let lhs = alpha(w)?;
    let rhs = dl(model, &lhs.jet)?;
    Ok(max_diff(&[(&lhs.a, &rhs.a), (&lhs.b1, &rhs.b1), (&lhs.b2, &rhs.b2)]))
}

pub(crate) fn max_diff(pairs: &[(&Vec<f64>, &Vec<f64>)]) -> f64 {
    pairs
        .iter()
        .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// One member of the phase relation over `j`: momenta from the Legendre map,
/// `ṗ¹₁ = ∂L/∂q`, and every other free block zero.
pub fn canonical_member(model: &LagrangianModel, j: &Jet) -> Result<PhaseJet> {
    let c = dl(model, j)?;
    let m = model.m;
    Ok(PhaseJet {
        base: Phase { q: j.q.clone(), p1: c.b1, p2: c.b2 },
        d1: PhaseDerivs { qdot: j.qdot1.clone(), p1dot: c.a, p2dot: vec![0.0; m] },
        d2: PhaseDerivs { qdot: j.qdot2.clone(), p1dot: vec![0.0; m], p2dot: vec![0.0; m] },
    })
}

/// `∂L/∂q − D₁(∂L/∂q̇₁) − D₂(∂L/∂q̇₂)` along a map with the given second jet,
/// total derivatives expanded by the chain rule.
pub fn el_residual_pointwise(model: &LagrangianModel, s: &SecondJet) -> Result<Vec<f64>> {
    s.validate()?;
    let x = model.check(&s.jet)?;
    let m = model.m;
    let k = 3 * m;
    let g = autodiff::grad(model.field(), &x)?;
    let h = autodiff::hessian(model.field(), &x)?;
    // second derivatives u_{ij} of each component, indexed [i][j]
    let second = [[&s.d11, &s.d12], [&s.d12, &s.d22]];
    let first = [&s.jet.qdot1, &s.jet.qdot2];
    let mut res = Vec::with_capacity(m);
    for a in 0..m {
        let mut r = g[a];
        for i in 0..2 {
            let row = (1 + i) * m + a;
            let mut total = 0.0;
            for b in 0..m {
                total += h[row * k + b] * first[i][b];
                for j in 0..2 {
                    total += h[row * k + (1 + j) * m + b] * second[i][j][b];
                }
            }
            r -= total;
        }
        res.push(r);
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Function, Scalar};
    use crate::jetcore::PhaseDerivs;

    struct Harmonic1;
    impl Function for Harmonic1 {
        fn arity(&self) -> usize {
            3
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
            Ok((x[1] * x[1] + x[2] * x[2]) * 0.5)
        }
    }

    fn harmonic() -> LagrangianModel {
        LagrangianModel::everywhere("harmonic", 1, Arc::new(Harmonic1)).unwrap()
    }

    fn jet1(q: f64, a: f64, b: f64) -> Jet {
        Jet { q: vec![q], qdot1: vec![a], qdot2: vec![b] }
    }

    #[test]
    fn dl_and_legendre_of_harmonic() {
        let c = dl(&harmonic(), &jet1(0.0, 2.0, -3.0)).unwrap();
        assert_eq!((c.a[0], c.b1[0], c.b2[0]), (0.0, 2.0, -3.0));
        let p = legendre(&harmonic(), &jet1(0.0, 2.0, -3.0)).unwrap();
        assert_eq!(p, Phase { q: vec![0.0], p1: vec![2.0], p2: vec![-3.0] });
    }

    #[test]
    fn inadmissible_is_domain_error() {
        let model = LagrangianModel::new("half", 1, Arc::new(Harmonic1), Arc::new(|j: &Jet| j.q[0] > 0.0)).unwrap();
        assert!(dl(&model, &jet1(-1.0, 0.0, 0.0)).unwrap_err().is_domain());
    }

    #[test]
    fn harmonic_member_has_zero_residual() {
        let mut w = PhaseJet::zeros(1);
        w.d1 = PhaseDerivs { qdot: vec![0.5], p1dot: vec![1.5], p2dot: vec![0.0] };
        w.d2 = PhaseDerivs { qdot: vec![-0.25], p1dot: vec![0.0], p2dot: vec![-1.5] };
        w.base.p1 = vec![0.5];
        w.base.p2 = vec![-0.25];
        assert_eq!(phase_relation_residual(&harmonic(), &w).unwrap(), 0.0);
        w.base.p1[0] += 1e-3;
        assert!((phase_relation_residual(&harmonic(), &w).unwrap() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn el_residual_of_harmonic_polynomials() {
        // u = x² − y² at (x, y) = (0.3, 0.7)
        let (x, y) = (0.3, 0.7);
        let s = SecondJet { jet: jet1(x * x - y * y, 2.0 * x, -2.0 * y), d11: vec![2.0], d12: vec![0.0], d22: vec![-2.0] };
        assert_eq!(el_residual_pointwise(&harmonic(), &s).unwrap(), vec![0.0]);
        // u = x²
        let s = SecondJet { jet: jet1(x * x, 2.0 * x, 0.0), d11: vec![2.0], d12: vec![0.0], d22: vec![0.0] };
        assert_eq!(el_residual_pointwise(&harmonic(), &s).unwrap(), vec![-2.0]);
        // constant map
        let s = SecondJet { jet: jet1(1.0, 0.0, 0.0), d11: vec![0.0], d12: vec![0.0], d22: vec![0.0] };
        assert_eq!(el_residual_pointwise(&harmonic(), &s).unwrap(), vec![0.0]);
    }
}
