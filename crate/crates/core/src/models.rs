//! Built-in models: harmonic maps with a constant target metric, the sphere-valued
//! sigma model in a stereographic chart, and the Nambu string in Minkowski space.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::autodiff::{Function, Scalar};
use crate::hamiltonian::{HamiltonianModel, Inversion};
use crate::jetcore::{Jet, Phase};
use crate::lagrangian::LagrangianModel;
use crate::{Error, Result};

/// Margin below zero required of the momentum Gram determinant on the dual side.
pub const DUAL_DET_MARGIN: f64 = 1e-8;
/// Gram determinant bound used when sampling admissible string jets.
pub const SAMPLING_DET_BOUND: f64 = -1e-3;

/// Minkowski form of signature `(+ − − −)` in an inertial chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinkowskiMetric;

impl MinkowskiMetric {
    pub const DIM: usize = 4;
    pub const SIGNATURE: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

    /// `η(v, w)`.
    pub fn pair<S: Scalar>(&self, v: &[S], w: &[S]) -> S {
        let mut acc = v[0] * w[0];
        for i in 1..4 {
            acc = acc - v[i] * w[i];
        }
        acc
    }

    /// The dual form on covectors. Diagonal `±1` entries make it the same formula.
    pub fn pair_dual<S: Scalar>(&self, p: &[S], r: &[S]) -> S {
        self.pair(p, r)
    }

    /// `η̃: V → V*`.
    pub fn lower(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(Self::SIGNATURE).map(|(x, s)| s * x).collect()
    }

    /// `η̃⁻¹: V* → V`.
    pub fn raise(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(Self::SIGNATURE).map(|(x, s)| s * x).collect()
    }
}

/// Symmetric 2×2 Gram matrix of a worldsheet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramMatrix<S = f64> {
    pub g11: S,
    pub g12: S,
    pub g22: S,
}

impl<S: Scalar> GramMatrix<S> {
    /// `[[η(v₁,v₁), η(v₁,v₂)], [η(v₁,v₂), η(v₂,v₂)]]`.
    pub fn of_velocities(eta: &MinkowskiMetric, v1: &[S], v2: &[S]) -> Self {
        GramMatrix { g11: eta.pair(v1, v1), g12: eta.pair(v1, v2), g22: eta.pair(v2, v2) }
    }

    /// `[[−η(p²,p²), η(p¹,p²)], [η(p¹,p²), −η(p¹,p¹)]]`.
    pub fn of_momenta(eta: &MinkowskiMetric, p1: &[S], p2: &[S]) -> Self {
        GramMatrix {
            g11: -eta.pair_dual(p2, p2),
            g12: eta.pair_dual(p1, p2),
            g22: -eta.pair_dual(p1, p1),
        }
    }

    pub fn det(&self) -> S {
        self.g11 * self.g22 - self.g12 * self.g12
    }
}

fn check_string_dim(m: usize) -> Result<()> {
    if m != MinkowskiMetric::DIM {
        return Err(Error::InvalidInput(format!("the string lives in 4-dimensional Minkowski space, got m = {m}")));
    }
    Ok(())
}

/// `L = ½ g_ab (q̇₁ᵃ q̇₁ᵇ + q̇₂ᵃ q̇₂ᵇ)` with a constant metric.
struct QuadraticKinetic {
    m: usize,
    metric: Vec<f64>,
}

impl Function for QuadraticKinetic {
    fn arity(&self) -> usize {
        3 * self.m
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let m = self.m;
        let mut acc = S::zero();
        for block in [&x[m..2 * m], &x[2 * m..3 * m]] {
            for a in 0..m {
                for b in 0..m {
                    let g = self.metric[a * m + b];
                    if g != 0.0 {
                        acc = acc + block[a] * block[b] * g;
                    }
                }
            }
        }
        Ok(acc * 0.5)
    }
}

fn check_spd(m: usize, metric: &[f64]) -> Result<DMatrix<f64>> {
    if m == 0 || metric.len() != m * m {
        return Err(Error::InvalidParameter(format!("metric must be {m}×{m}, got {} entries", metric.len())));
    }
    let g = DMatrix::from_row_slice(m, m, metric);
    let scale = metric.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if (&g - g.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidParameter("metric is not symmetric".into()));
    }
    if g.clone().cholesky().is_none() {
        return Err(Error::InvalidParameter("metric is not positive definite".into()));
    }
    Ok(g)
}

/// Harmonic-map Lagrangian for a constant SPD target metric (row-major `m×m`).
pub fn harmonic_lagrangian(m: usize, metric: &[f64]) -> Result<LagrangianModel> {
    check_spd(m, metric)?;
    LagrangianModel::everywhere("harmonic", m, Arc::new(QuadraticKinetic { m, metric: metric.to_vec() }))
}

/// Its exact Legendre transform `H = ½ gᵃᵇ (p¹ₐp¹ᵦ + p²ₐp²ᵦ)`.
pub fn harmonic_hamiltonian(m: usize, metric: &[f64]) -> Result<HamiltonianModel> {
    let g = check_spd(m, metric)?;
    let inv = g.try_inverse().ok_or_else(|| Error::InvalidParameter("metric is singular".into()))?;
    let inverse: Vec<f64> = (0..m * m).map(|k| inv[(k / m, k % m)]).collect();
    HamiltonianModel::new("harmonic", m, Arc::new(QuadraticKinetic { m, metric: inverse }), Arc::new(|_| true))
}

pub fn identity_metric(m: usize) -> Vec<f64> {
    (0..m * m).map(|k| if k / m == k % m { 1.0 } else { 0.0 }).collect()
}

/// Harmonic maps into the round sphere through a stereographic chart:
/// `L = 2 (|q̇₁|² + |q̇₂|²) / (1 + |q|²)²`.
struct StereographicSigma {
    m: usize,
}

impl Function for StereographicSigma {
    fn arity(&self) -> usize {
        3 * self.m
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let m = self.m;
        let mut r2 = S::constant(1.0);
        let mut kinetic = S::zero();
        for a in 0..m {
            r2 = r2 + x[a] * x[a];
            kinetic = kinetic + x[m + a] * x[m + a] + x[2 * m + a] * x[2 * m + a];
        }
        Ok(kinetic * 2.0 / (r2 * r2))
    }
}

pub fn sigma_lagrangian(m: usize) -> Result<LagrangianModel> {
    if m == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    LagrangianModel::everywhere("sigma", m, Arc::new(StereographicSigma { m }))
}

/// `L(q, v₁, v₂) = √(−det g)`, the area density of the worldsheet.
struct NambuArea;

impl Function for NambuArea {
    fn arity(&self) -> usize {
        12
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let g = GramMatrix::of_velocities(&MinkowskiMetric, &x[4..8], &x[8..12]);
        let det = g.det();
        if !(det.value() < 0.0) {
            return Err(Error::Domain(format!("Gram determinant {:e} is not negative", det.value())));
        }
        Ok((-det).sqrt())
    }
}

/// `H(q, p¹, p²) = √(−det g)` with the momentum Gram matrix.
struct NambuDualArea;

impl Function for NambuDualArea {
    fn arity(&self) -> usize {
        12
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let g = GramMatrix::of_momenta(&MinkowskiMetric, &x[4..8], &x[8..12]);
        let det = g.det();
        if !(det.value() < -DUAL_DET_MARGIN) {
            return Err(Error::Domain(format!("momentum Gram determinant {:e} is not negative", det.value())));
        }
        Ok((-det).sqrt())
    }
}

fn velocity_det(j: &Jet) -> f64 {
    GramMatrix::of_velocities(&MinkowskiMetric, &j.qdot1, &j.qdot2).det()
}

fn momentum_det(ph: &Phase) -> f64 {
    GramMatrix::of_momenta(&MinkowskiMetric, &ph.p1, &ph.p2).det()
}

/// The Nambu string, defined where the Gram matrix of `(v₁, v₂)` has negative determinant.
pub fn nambu_lagrangian() -> LagrangianModel {
    LagrangianModel::new("nambu", 4, Arc::new(NambuArea), Arc::new(|j: &Jet| velocity_det(j) < 0.0))
        .expect("arity 12 matches m = 4")
}

/// The string Hamiltonian `√(−det g(p))`, defined where the momentum Gram determinant
/// is below `−1e−8`.
///
/// This is the Legendre transform `p¹·v₁ + p²·v₂ − L` of [`nambu_lagrangian`]; its
/// momentum gradient returns the velocities `(v₁, v₂)`.
pub fn nambu_hamiltonian() -> HamiltonianModel {
    HamiltonianModel::new(
        "nambu",
        4,
        Arc::new(NambuDualArea),
        Arc::new(|ph: &Phase| momentum_det(ph) < -DUAL_DET_MARGIN),
    )
    .expect("arity 12 matches m = 4")
}

/// Momenta of the string in closed form:
/// `p¹ = [η(v₁,v₂) η̃(v₂) − η(v₂,v₂) η̃(v₁)] / √(−det g)`,
/// `p² = [η(v₁,v₂) η̃(v₁) − η(v₁,v₁) η̃(v₂)] / √(−det g)`.
pub fn nambu_legendre_closed_form(j: &Jet) -> Result<Phase> {
    j.validate()?;
    check_string_dim(j.dim())?;
    let eta = MinkowskiMetric;
    let g = GramMatrix::of_velocities(&eta, &j.qdot1, &j.qdot2);
    let det = g.det();
    if !(det < 0.0) {
        return Err(Error::Domain(format!("Gram determinant {det:e} is not negative")));
    }
    let root = (-det).sqrt();
    let (l1, l2) = (eta.lower(&j.qdot1), eta.lower(&j.qdot2));
    let p1 = (0..4).map(|a| (g.g12 * l2[a] - g.g22 * l1[a]) / root).collect();
    let p2 = (0..4).map(|a| (g.g12 * l1[a] - g.g11 * l2[a]) / root).collect();
    Ok(Phase { q: j.q.clone(), p1, p2 })
}

/// Velocities of the string in closed form:
/// `v₁ = [η(p¹,p²) η̃⁻¹(p²) − η(p²,p²) η̃⁻¹(p¹)] / √(−det g)`,
/// `v₂ = [η(p¹,p²) η̃⁻¹(p¹) − η(p¹,p¹) η̃⁻¹(p²)] / √(−det g)`,
/// with `g` the momentum Gram matrix.
pub fn nambu_legendre_inverse_closed_form(ph: &Phase) -> Result<Jet> {
    ph.validate()?;
    check_string_dim(ph.dim())?;
    let eta = MinkowskiMetric;
    let det = momentum_det(ph);
    if !(det < 0.0) {
        return Err(Error::Domain(format!("momentum Gram determinant {det:e} is not negative")));
    }
    let root = (-det).sqrt();
    let e12 = eta.pair_dual(&ph.p1, &ph.p2);
    let e11 = eta.pair_dual(&ph.p1, &ph.p1);
    let e22 = eta.pair_dual(&ph.p2, &ph.p2);
    let (r1, r2) = (eta.raise(&ph.p1), eta.raise(&ph.p2));
    let qdot1 = (0..4).map(|a| (e12 * r2[a] - e22 * r1[a]) / root).collect();
    let qdot2 = (0..4).map(|a| (e12 * r1[a] - e11 * r2[a]) / root).collect();
    Ok(Jet { q: ph.q.clone(), qdot1, qdot2 })
}

fn random_unit3<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-2 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Admissible string jet: `v₁ = e₀ + ½·n` for a random spatial unit `n`, `v₂` spatial
/// with `|v₂| ∈ [½, 2]`, rejected until `det g < −10⁻³`.
pub fn sample_nambu_jet<R: Rng + ?Sized>(rng: &mut R) -> Jet {
    loop {
        let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = random_unit3(rng);
        let u = random_unit3(rng);
        let s: f64 = rng.gen_range(0.5..=2.0);
        let qdot1 = vec![1.0, 0.5 * n[0], 0.5 * n[1], 0.5 * n[2]];
        let qdot2 = vec![0.0, s * u[0], s * u[1], s * u[2]];
        let jet = Jet { q, qdot1, qdot2 };
        if velocity_det(&jet) < SAMPLING_DET_BOUND {
            return jet;
        }
    }
}

/// Uniform jet in `[−1, 1]^{3m}`.
pub fn sample_box_jet<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Jet {
    let mut block = || (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    Jet { q: block(), qdot1: block(), qdot2: block() }
}

/// Named entries of the model catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Catalog {
    Harmonic,
    Sigma,
    Nambu,
}

impl Catalog {
    pub const ALL: [Catalog; 3] = [Catalog::Harmonic, Catalog::Sigma, Catalog::Nambu];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "harmonic" => Ok(Catalog::Harmonic),
            "sigma" => Ok(Catalog::Sigma),
            "nambu" => Ok(Catalog::Nambu),
            other => Err(Error::InvalidParameter(format!(
                "unknown model '{other}' (expected harmonic, sigma or nambu)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Catalog::Harmonic => "harmonic",
            Catalog::Sigma => "sigma",
            Catalog::Nambu => "nambu",
        }
    }

    /// Checks `m` against the model; the string only exists for `m = 4`.
    pub fn validate_dim(&self, m: usize) -> Result<()> {
        match self {
            Catalog::Nambu => check_string_dim(m),
            _ if m == 0 => Err(Error::InvalidParameter("dimension must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn lagrangian(&self, m: usize) -> Result<LagrangianModel> {
        self.validate_dim(m)?;
        match self {
            Catalog::Harmonic => harmonic_lagrangian(m, &identity_metric(m)),
            Catalog::Sigma => sigma_lagrangian(m),
            Catalog::Nambu => Ok(nambu_lagrangian()),
        }
    }

    /// A closed-form Hamiltonian, where the catalog has one.
    pub fn hamiltonian(&self, m: usize) -> Result<Option<HamiltonianModel>> {
        self.validate_dim(m)?;
        Ok(match self {
            Catalog::Harmonic => Some(harmonic_hamiltonian(m, &identity_metric(m))?),
            Catalog::Sigma => None,
            Catalog::Nambu => Some(nambu_hamiltonian()),
        })
    }

    pub fn sample_jet<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> Jet {
        match self {
            Catalog::Nambu => sample_nambu_jet(rng),
            _ => sample_box_jet(rng, m),
        }
    }

    /// Newton inversion seeded for this model: at rest for the quadratic models,
    /// from the closed-form inverse scaled by 1.1 for the string.
    pub fn newton_inversion(&self) -> Inversion {
        match self {
            Catalog::Nambu => Inversion::Newton {
                seed: Arc::new(|ph: &Phase| {
                    let mut j = nambu_legendre_inverse_closed_form(ph)?;
                    j.qdot1.iter_mut().chain(j.qdot2.iter_mut()).for_each(|x| *x *= 1.1);
                    Ok(j)
                }),
            },
            _ => Inversion::Newton { seed: Arc::new(|ph: &Phase| Ok(Jet { q: ph.q.clone(), ..Jet::zeros(ph.dim()) })) },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::dh;
    use crate::lagrangian::{dl, legendre};

    fn e(k: usize) -> Vec<f64> {
        (0..4).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
    }

    fn reference_jet() -> Jet {
        Jet { q: vec![0.0; 4], qdot1: e(0), qdot2: e(1) }
    }

    #[test]
    fn minkowski_form() {
        let eta = MinkowskiMetric;
        assert_eq!(eta.pair(&e(0), &e(0)), 1.0);
        for i in 1..4 {
            assert_eq!(eta.pair(&e(i), &e(i)), -1.0);
        }
        let v = [0.3, -1.2, 0.5, 2.0];
        let w = [1.1, 0.4, -0.7, 0.2];
        assert_eq!(eta.pair(&v, &w), eta.pair(&w, &v));
        assert_eq!(eta.raise(&eta.lower(&v)), v.to_vec());
    }

    #[test]
    fn harmonic_value_and_momenta() {
        let l = harmonic_lagrangian(1, &[1.0]).unwrap();
        let j = Jet { q: vec![0.0], qdot1: vec![2.0], qdot2: vec![-3.0] };
        assert_eq!(l.value(&j).unwrap(), 6.5);
        let g = [2.0, 0.5, 0.5, 1.0];
        let l = harmonic_lagrangian(2, &g).unwrap();
        let j = Jet { q: vec![0.1, 0.2], qdot1: vec![1.0, -2.0], qdot2: vec![0.5, 0.25] };
        let p = legendre(&l, &j).unwrap();
        assert!((p.p1[0] - (2.0 - 1.0)).abs() < 1e-15 && (p.p1[1] - (0.5 - 2.0)).abs() < 1e-15);
        assert!((p.p2[0] - (1.0 + 0.125)).abs() < 1e-15 && (p.p2[1] - (0.25 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn harmonic_rejects_bad_metric() {
        assert!(matches!(harmonic_lagrangian(2, &[1.0, 2.0, 2.0, 1.0]), Err(Error::InvalidParameter(_))));
        assert!(matches!(harmonic_lagrangian(2, &[1.0, 0.5, 0.0, 1.0]), Err(Error::InvalidParameter(_))));
        assert!(matches!(harmonic_lagrangian(2, &[1.0]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn nambu_reference_point() {
        let l = nambu_lagrangian();
        let g = GramMatrix::of_velocities(&MinkowskiMetric, &e(0), &e(1));
        assert_eq!((g.g11, g.g12, g.g22, g.det()), (1.0, 0.0, -1.0, -1.0));
        assert_eq!(l.value(&reference_jet()).unwrap(), 1.0);
        let c = dl(&l, &reference_jet()).unwrap();
        assert_eq!(c.b1, e(0));
        assert_eq!(c.b2, e(1));
        assert_eq!(c.a, vec![0.0; 4]);
        let p = nambu_legendre_closed_form(&reference_jet()).unwrap();
        assert_eq!((p.p1.clone(), p.p2.clone()), (e(0), e(1)));
        let back = nambu_legendre_inverse_closed_form(&p).unwrap();
        assert_eq!(back, reference_jet());
    }

    #[test]
    fn nambu_degenerate_sheet_is_domain_error() {
        let j = Jet { q: vec![0.0; 4], qdot1: vec![1.0, 0.2, 0.0, 0.0], qdot2: vec![1.0, 0.2, 0.0, 0.0] };
        assert!(nambu_lagrangian().value(&j).unwrap_err().is_domain());
        assert!(nambu_legendre_closed_form(&j).unwrap_err().is_domain());
        let ph = Phase { q: vec![0.0; 4], p1: e(0), p2: e(0) };
        assert!(nambu_legendre_inverse_closed_form(&ph).unwrap_err().is_domain());
        assert!(dh(&nambu_hamiltonian(), &ph).unwrap_err().is_domain());
    }

    #[test]
    fn nambu_swap_invariance() {
        let j = Jet { q: vec![0.0; 4], qdot1: vec![1.0, 0.3, -0.2, 0.1], qdot2: vec![0.2, 0.9, 0.4, -0.5] };
        let swapped = Jet { q: j.q.clone(), qdot1: j.qdot2.clone(), qdot2: j.qdot1.clone() };
        let l = nambu_lagrangian();
        assert_eq!(l.value(&j).unwrap(), l.value(&swapped).unwrap());
    }

    #[test]
    fn nambu_hamiltonian_reference_point() {
        let h = nambu_hamiltonian();
        let ph = Phase { q: vec![0.0; 4], p1: e(0), p2: e(1) };
        assert_eq!(h.value(&ph).unwrap(), 1.0);
        let c = dh(&h, &ph).unwrap();
        assert_eq!(c.psi1, e(0));
        assert_eq!(c.psi2, e(1));
        assert_eq!(c.phi, vec![0.0; 4]);
    }

    #[test]
    fn scaling_first_velocity() {
        use rand::SeedableRng;
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let l = nambu_lagrangian();
        for _ in 0..20 {
            let j = sample_nambu_jet(&mut rng);
            let scaled = Jet { q: j.q.clone(), qdot1: j.qdot1.iter().map(|x| 2.0 * x).collect(), qdot2: j.qdot2.clone() };
            let (p, ps) = (legendre(&l, &j).unwrap(), legendre(&l, &scaled).unwrap());
            for a in 0..4 {
                assert!((ps.p1[a] - p.p1[a]).abs() < 1e-12);
                assert!((ps.p2[a] - 2.0 * p.p2[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampled_jets_are_admissible() {
        use rand::SeedableRng;
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let j = sample_nambu_jet(&mut rng);
            assert!(velocity_det(&j) < SAMPLING_DET_BOUND);
            let ph = nambu_legendre_closed_form(&j).unwrap();
            assert!(nambu_hamiltonian().is_admissible(&ph));
        }
    }

    #[test]
    fn catalog_names() {
        for c in Catalog::ALL {
            assert_eq!(Catalog::from_name(c.name()).unwrap(), c);
        }
        assert!(Catalog::from_name("polyakov").is_err());
        assert!(Catalog::Nambu.lagrangian(3).is_err());
        assert!(Catalog::Sigma.lagrangian(2).is_ok());
    }
}
