//! Seeded random-point checks behind `check-maps`, `legendre` and `phase-check`.

use field_triple::hamiltonian::{dh, ham_phase_residual, hamiltonian_from_lagrangian, hamiltonian_member, newton_legendre, Inversion};
use field_triple::jetcore::*;
use field_triple::lagrangian::{canonical_member, legendre, phase_relation_residual};
use field_triple::models::{nambu_legendre_closed_form, nambu_legendre_inverse_closed_form, Catalog};
use field_triple::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const MAP_TOL: f64 = 1e-12;
pub const ROUND_TRIP_TOL: f64 = 1e-9;
pub const CLOSED_FORM_TOL: f64 = 1e-10;
pub const LAGRANGIAN_RESIDUAL_TOL: f64 = 1e-9;
pub const HAMILTONIAN_RESIDUAL_TOL: f64 = 1e-8;

pub const MAP_DIMS: [usize; 3] = [1, 2, 4];

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max)
}

fn lin(s: f64, x: &[f64], t: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| s * a + t * b).collect()
}

/// Worst deviations of the canonical-map identities at one dimension.
#[derive(Debug, Clone, Serialize)]
pub struct MapCheck {
    pub m: usize,
    pub points: usize,
    /// `⟨α(w), v⟩` against `pair_jet(w, κ(v))`, relative.
    pub alpha_kappa: f64,
    /// Points where `β` and `β̃` differ in any bit.
    pub beta_tilde_mismatches: usize,
    /// `⟨β(w), u⟩` against `omega2_pair(w, u)`, relative.
    pub beta_omega2: f64,
    pub projections_commute: bool,
    pub kappa_round_trip: bool,
    /// Fiber linearity of `α` and `β`, relative.
    pub fiber_linearity: f64,
    pub pass: bool,
}

fn block(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-10.0..10.0)).collect()
}

fn phase_jet(rng: &mut ChaCha8Rng, m: usize) -> PhaseJet {
    let mut b = || block(rng, m);
    PhaseJet {
        base: Phase { q: b(), p1: b(), p2: b() },
        d1: PhaseDerivs { qdot: b(), p1dot: b(), p2dot: b() },
        d2: PhaseDerivs { qdot: b(), p1dot: b(), p2dot: b() },
    }
}

fn check_at(rng: &mut ChaCha8Rng, m: usize, c: &mut MapCheck) -> Result<()> {
    let w = phase_jet(rng, m);
    let v = JetTangent { jet: w.project_to_jet(), dq: block(rng, m), dqdot1: block(rng, m), dqdot2: block(rng, m) };
    let u = PhaseTangent { phase: w.base.clone(), dq: block(rng, m), dp1: block(rng, m), dp2: block(rng, m) };

    let a = alpha(&w)?;
    c.alpha_kappa = c.alpha_kappa.max(rel(a.pair(&v)?, pair_jet(&w, &kappa(&v)?)?));
    let b = beta(&w)?;
    if b != beta_tilde(&w)? {
        c.beta_tilde_mismatches += 1;
    }
    c.beta_omega2 = c.beta_omega2.max(rel(b.pair(&u)?, omega2_pair(&w, &u)?));
    c.projections_commute &= a.project_to_jet() == w.project_to_jet()
        && a.b1 == w.base.p1
        && a.b2 == w.base.p2
        && b.project_to_phase() == w.base
        && w.project_to_phase() == w.base;
    c.kappa_round_trip &= kappa_inv(&kappa(&v)?)? == v;

    // a second point in the fibers over w: same configuration jet for α, same base for β
    let (s, t) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let other = phase_jet(rng, m);
    let mut wa = other.clone();
    wa.base.q = w.base.q.clone();
    wa.d1.qdot = w.d1.qdot.clone();
    wa.d2.qdot = w.d2.qdot.clone();
    let mut comb = w.clone();
    comb.base.p1 = lin(s, &w.base.p1, t, &wa.base.p1);
    comb.base.p2 = lin(s, &w.base.p2, t, &wa.base.p2);
    for (dc, (dw, da)) in [(&mut comb.d1, (&w.d1, &wa.d1)), (&mut comb.d2, (&w.d2, &wa.d2))] {
        dc.p1dot = lin(s, &dw.p1dot, t, &da.p1dot);
        dc.p2dot = lin(s, &dw.p2dot, t, &da.p2dot);
    }
    let (a2, ac) = (alpha(&wa)?, alpha(&comb)?);
    let mut worst = rel_vec(&ac.a, &lin(s, &a.a, t, &a2.a))
        .max(rel_vec(&ac.b1, &lin(s, &a.b1, t, &a2.b1)))
        .max(rel_vec(&ac.b2, &lin(s, &a.b2, t, &a2.b2)));

    let wb = PhaseJet { base: w.base.clone(), ..other };
    let mix = |x: &PhaseDerivs, y: &PhaseDerivs| PhaseDerivs {
        qdot: lin(s, &x.qdot, t, &y.qdot),
        p1dot: lin(s, &x.p1dot, t, &y.p1dot),
        p2dot: lin(s, &x.p2dot, t, &y.p2dot),
    };
    let comb = PhaseJet { base: w.base.clone(), d1: mix(&w.d1, &wb.d1), d2: mix(&w.d2, &wb.d2) };
    let (b2, bc) = (beta(&wb)?, beta(&comb)?);
    worst = worst
        .max(rel_vec(&bc.phi, &lin(s, &b.phi, t, &b2.phi)))
        .max(rel_vec(&bc.psi1, &lin(s, &b.psi1, t, &b2.psi1)))
        .max(rel_vec(&bc.psi2, &lin(s, &b.psi2, t, &b2.psi2)));
    c.fiber_linearity = c.fiber_linearity.max(worst);
    Ok(())
}

/// Canonical-map identities at `points` random points for each of `m = 1, 2, 4`.
pub fn check_maps(seed: u64, points: usize) -> Result<Vec<MapCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MAP_DIMS
        .iter()
        .map(|&m| {
            let mut c = MapCheck {
                m,
                points,
                alpha_kappa: 0.0,
                beta_tilde_mismatches: 0,
                beta_omega2: 0.0,
                projections_commute: true,
                kappa_round_trip: true,
                fiber_linearity: 0.0,
                pass: false,
            };
            for _ in 0..points {
                check_at(&mut rng, m, &mut c)?;
            }
            c.pass = c.alpha_kappa <= MAP_TOL
                && c.beta_tilde_mismatches == 0
                && c.beta_omega2 <= MAP_TOL
                && c.projections_commute
                && c.kappa_round_trip
                && c.fiber_linearity <= MAP_TOL;
            Ok(c)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LegendreCheck {
    pub model: String,
    pub m: usize,
    pub points: usize,
    /// Max-norm of `λ_L⁻¹(λ_L(j)) − j` with Newton inversion.
    pub velocity_round_trip: f64,
    /// Max-norm of `λ_L(λ_L⁻¹(p)) − p`.
    pub momentum_round_trip: f64,
    pub max_newton_iterations: usize,
    pub newton_failures: usize,
    /// Closed-form momenta against automatic differentiation, relative max-norm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_momenta: Option<f64>,
    /// Round trip through the closed-form inverse.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_round_trip: Option<f64>,
    pub pass: bool,
}

pub fn check_legendre(model: Catalog, m: usize, seed: u64, points: usize) -> Result<LegendreCheck> {
    let l = model.lagrangian(m)?;
    let Inversion::Newton { seed: guess } = model.newton_inversion() else {
        unreachable!("catalog inversions are Newton")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nambu = model == Catalog::Nambu;
    let mut c = LegendreCheck {
        model: model.name().into(),
        m,
        points,
        velocity_round_trip: 0.0,
        momentum_round_trip: 0.0,
        max_newton_iterations: 0,
        newton_failures: 0,
        closed_form_momenta: nambu.then_some(0.0),
        closed_form_round_trip: nambu.then_some(0.0),
        pass: false,
    };
    for _ in 0..points {
        let j = model.sample_jet(&mut rng, m);
        let p = legendre(&l, &j)?;
        match newton_legendre(&l, &p, &guess(&p)?) {
            Ok(out) => {
                c.max_newton_iterations = c.max_newton_iterations.max(out.iterations);
                c.velocity_round_trip = c.velocity_round_trip.max(max_diff(&out.jet.to_flat(), &j.to_flat()));
                let back = legendre(&l, &out.jet)?;
                c.momentum_round_trip = c.momentum_round_trip.max(max_diff(&back.to_flat(), &p.to_flat()));
            }
            Err(_) => c.newton_failures += 1,
        }
        if nambu {
            let closed = nambu_legendre_closed_form(&j)?;
            let err = max_diff(&closed.to_flat(), &p.to_flat()) / max_abs(&p.to_flat()).max(f64::MIN_POSITIVE);
            c.closed_form_momenta = c.closed_form_momenta.map(|e| e.max(err));
            let back = nambu_legendre_inverse_closed_form(&closed)?;
            let trip = max_diff(&back.to_flat(), &j.to_flat())
                .max(max_diff(&nambu_legendre_closed_form(&back)?.to_flat(), &closed.to_flat()));
            c.closed_form_round_trip = c.closed_form_round_trip.map(|e| e.max(trip));
        }
    }
    c.pass = c.newton_failures == 0
        && c.velocity_round_trip <= ROUND_TRIP_TOL
        && c.momentum_round_trip <= ROUND_TRIP_TOL
        && c.closed_form_momenta.is_none_or(|e| e <= CLOSED_FORM_TOL)
        && c.closed_form_round_trip.is_none_or(|e| e <= ROUND_TRIP_TOL);
    Ok(c)
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseCheck {
    pub model: String,
    pub m: usize,
    pub points: usize,
    /// Which Hamiltonian was compared: the catalog closed form or the Legendre transform.
    pub hamiltonian: String,
    /// Members built from `L`: worst Lagrangian and Hamiltonian residuals.
    pub lagrangian_side: [f64; 2],
    /// Members built from `H`: worst Lagrangian and Hamiltonian residuals.
    pub hamiltonian_side: [f64; 2],
    /// `∂H/∂p` against the velocities, max-norm.
    pub velocity_recovery: f64,
    pub pass: bool,
}

pub fn check_phase(model: Catalog, m: usize, seed: u64, points: usize) -> Result<PhaseCheck> {
    let l = model.lagrangian(m)?;
    let (h, which) = match model.hamiltonian(m)? {
        Some(h) => (h, "closed form"),
        None => (hamiltonian_from_lagrangian(&l, model.newton_inversion()), "Legendre transform"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = PhaseCheck {
        model: model.name().into(),
        m,
        points,
        hamiltonian: which.into(),
        lagrangian_side: [0.0; 2],
        hamiltonian_side: [0.0; 2],
        velocity_recovery: 0.0,
        pass: false,
    };
    for _ in 0..points {
        let j = model.sample_jet(&mut rng, m);
        let from_l = canonical_member(&l, &j)?;
        c.lagrangian_side[0] = c.lagrangian_side[0].max(phase_relation_residual(&l, &from_l)?);
        c.lagrangian_side[1] = c.lagrangian_side[1].max(ham_phase_residual(&h, &from_l)?);
        let from_h = hamiltonian_member(&h, &from_l.base)?;
        c.hamiltonian_side[0] = c.hamiltonian_side[0].max(phase_relation_residual(&l, &from_h)?);
        c.hamiltonian_side[1] = c.hamiltonian_side[1].max(ham_phase_residual(&h, &from_h)?);
        let d = dh(&h, &from_l.base)?;
        let v = max_diff(&d.psi1, &j.qdot1).max(max_diff(&d.psi2, &j.qdot2));
        c.velocity_recovery = c.velocity_recovery.max(v);
    }
    c.pass = c.lagrangian_side[0] <= LAGRANGIAN_RESIDUAL_TOL
        && c.hamiltonian_side[0] <= LAGRANGIAN_RESIDUAL_TOL
        && c.lagrangian_side[1] <= HAMILTONIAN_RESIDUAL_TOL
        && c.hamiltonian_side[1] <= HAMILTONIAN_RESIDUAL_TOL;
    Ok(c)
}
