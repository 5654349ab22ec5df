//! The hierarchy engine: concrete Lax operators, flows, Hamiltonian
//! densities, two-point functions, normal coordinates and foldings.
//!
//! For the order-6 family the operator is built in normal coordinates from
//! the dictionary
//!
//! ```text
//! L = D^6 + D^{-1} sum_i (u~^i D^{2i-1} + D^{2i-1} u~^i) + D^{-1} u~^4 D^{-1} u~^4
//! ```
//!
//! with `u~^3 = w^3/2`, `u~^4 = w^4/2`, `u~^2 = w^2/2 + (w^3)^2/8 - w^3_xx`
//! and the longer `u~^1(w)` expression; masked variants freeze `w^4` (rank 3)
//! or `w^2, w^4` (rank 2) to zero. Flows are extracted as residues of
//! commutators with the positive parts of root powers, converted to the
//! `t^{α,p}` normalization, and dispersion-rescaled so that the `h^g` stratum
//! of a flow carries jet degree `2g+1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Model, ModelKind, RootKind};
use crate::pdo::{PdOp, PdoError};
use crate::ring::{rfrac, rint, DiffPoly, Rat, RingError};

#[derive(Error, Debug)]
pub enum LaxError {
    #[error(transparent)]
    BadModel(#[from] crate::model::BadModel),
    #[error(transparent)]
    Pdo(#[from] PdoError),
    #[error("flow ({beta},{q}) of masked coordinate {alpha} does not vanish on the invariant locus")]
    NonInvariantFlow { alpha: u16, beta: u16, q: u16 },
    #[error("requested index ({alpha},{p}) exceeds the prepared truncation pmax={pmax}")]
    TruncationInsufficient { alpha: u16, p: u16, pmax: u16 },
    #[error("two-point integrand is not exact; this indicates an engine bug")]
    NotExact(#[from] RingError),
}

fn w(alpha: u16, k: u16) -> DiffPoly {
    DiffPoly::var(alpha, k)
}

/// The `u~^i(w)` coefficient package of the order-6 family, with masked
/// coordinates already frozen to zero.
pub fn tilde_u_of_w(mask: &[u16]) -> [DiffPoly; 4] {
    let kill = |p: DiffPoly| -> DiffPoly {
        let mut p = p;
        for &m in mask {
            p = p.kill_coordinate(m);
        }
        p
    };
    let u1 = w(1, 0)
        .scale(&rfrac(1, 2))
        .add(&w(2, 0).mul(&w(3, 0)).scale(&rfrac(1, 12)))
        .add(&w(3, 0).mul(&w(3, 0)).mul(&w(3, 0)).scale(&rfrac(1, 216)))
        .add(&w(3, 1).mul(&w(3, 1)).scale(&rfrac(-1, 4)))
        .add(&w(2, 2).scale(&rfrac(-1, 3)))
        .add(&w(3, 0).mul(&w(3, 2)).scale(&rfrac(-2, 9)))
        .add(&w(3, 4).scale(&rfrac(23, 45)));
    let u2 = w(2, 0)
        .scale(&rfrac(1, 2))
        .add(&w(3, 0).mul(&w(3, 0)).scale(&rfrac(1, 8)))
        .sub(&w(3, 2));
    let u3 = w(3, 0).scale(&rfrac(1, 2));
    let u4 = w(4, 0).scale(&rfrac(1, 2));
    [kill(u1), kill(u2), kill(u3), kill(u4)]
}

/// The `u~^i` package of the rank-4 operator in lowest-weight-gauge
/// coordinates `u^1..u^4`.
pub fn tilde_u_of_u() -> [DiffPoly; 4] {
    let u = |i: u16, k: u16| DiffPoly::var(i, k);
    let u1 = u(4, 0)
        .scale(&rint(2))
        .add(&u(1, 0).mul(&u(2, 0)).scale(&rint(28)))
        .add(&u(1, 0).mul(&u(1, 0)).mul(&u(1, 0)).scale(&rint(-144)))
        .add(&u(1, 1).mul(&u(1, 1)).scale(&rfrac(-293, 2)))
        .add(&u(1, 0).mul(&u(1, 2)).scale(&rint(-118)))
        .add(&u(2, 2).scale(&rint(4)))
        .add(&u(1, 4).scale(&rint(-17)));
    let u2 = u(1, 0)
        .mul(&u(1, 0))
        .scale(&rint(98))
        .add(&u(1, 2).scale(&rint(28)))
        .add(&u(2, 0).scale(&rint(-6)));
    let u3 = u(1, 0).scale(&rint(-14));
    let u4 = u(3, 0).scale(&rint(2));
    [u1, u2, u3, u4]
}

/// Normal coordinates of the rank-4 model expressed in the gauge
/// coordinates `u^1..u^4`.
pub fn w_of_u() -> [DiffPoly; 4] {
    let u = |i: u16, k: u16| DiffPoly::var(i, k);
    let w1 = u(1, 0)
        .mul(&u(1, 0))
        .mul(&u(1, 0))
        .scale(&rfrac(-2288, 27))
        .add(&u(4, 0).scale(&rint(4)))
        .add(&u(1, 1).mul(&u(1, 1)).scale(&rint(99)))
        .add(&u(1, 0).mul(&u(1, 2)).scale(&rfrac(1012, 9)))
        .add(&u(1, 4).scale(&rfrac(-242, 45)));
    [
        w1,
        u(2, 0).scale(&rint(-12)),
        u(1, 0).scale(&rint(-28)),
        u(3, 0).scale(&rint(4)),
    ]
}

/// Assemble the order-6 operator from a `u~` package.
fn order6_op(tu: &[DiffPoly; 4], floor: i32) -> PdOp {
    let mut l = PdOp::dpow(6);
    for i in 1..=3usize {
        let f = &tu[i - 1];
        if f.is_zero() {
            continue;
        }
        let k = (2 * i - 1) as i32;
        let left = PdOp::dpow(-1).compose(&PdOp::from_poly(f.clone()).compose(&PdOp::dpow(k), floor), floor);
        let right = PdOp::dpow(-1).compose(&PdOp::dpow(k).compose(&PdOp::from_poly(f.clone()), floor), floor);
        l = l.add(&left).add(&right);
    }
    if !tu[3].is_zero() {
        let half = PdOp::dpow(-1).compose(&PdOp::from_poly(tu[3].clone()), floor - 2);
        l = l.add(&half.compose(&half, floor));
    }
    l
}

/// Scalar Lax operator of the model, in normal coordinates.
pub fn build_lax(model: &Model, floor: i32) -> PdOp {
    match model.kind {
        ModelKind::A1 => {
            let mut l = PdOp::dpow(2);
            l.add_to(0, &w(1, 0));
            l
        }
        ModelKind::D4Family => order6_op(&tilde_u_of_w(&model.mask), floor),
    }
}

/// Rank-4 operator in gauge coordinates (for the matrix cross-check).
pub fn build_lax_u(floor: i32) -> PdOp {
    order6_op(&tilde_u_of_u(), floor)
}

/// Plain A-type operator `D^{2n} + u~^{2n-1} D^{2n-2} + ... + u~^1` with the
/// coefficients as raw jet coordinates `alpha = i`.
pub fn a_scalar_lax(n: u32) -> PdOp {
    let mut l = PdOp::dpow(2 * n as i32);
    for i in 1..=(2 * n - 1) as u16 {
        l.add_to(i as i32 - 1, &DiffPoly::var(i, 0));
    }
    l
}

/// Generic even-order D-type operator
/// `D^{-1} (D^{2n+1} + sum_i (u~^i D^{2i-1} + D^{2i-1} u~^i) + rho D^{-1} rho)`
/// with raw coordinates `alpha = 1..n+1` (`rho = u~^{n+1}`).
pub fn d_scalar_lax(n: u32, floor: i32) -> PdOp {
    let mut inner = PdOp::dpow(2 * n as i32 + 1);
    for i in 1..=n as u16 {
        let f = DiffPoly::var(i, 0);
        let k = (2 * i - 1) as i32;
        inner = inner
            .add(&PdOp::from_poly(f.clone()).compose(&PdOp::dpow(k), floor - 1))
            .add(&PdOp::dpow(k).compose(&PdOp::from_poly(f), floor - 1));
    }
    let rho = DiffPoly::var(n as u16 + 1, 0);
    inner = inner.add(
        &PdOp::from_poly(rho.clone())
            .compose(&PdOp::dpow(-1).compose(&PdOp::from_poly(rho), floor - 1), floor - 1),
    );
    PdOp::dpow(-1).compose(&inner, floor)
}

/// Raw flow of a scalar operator: `dL/dt_k = [(P^k)_+, L]` with
/// `P = L^{1/order}`.
pub fn raw_lax_flow(l: &PdOp, k: u32, floor: i32) -> Result<PdOp, PdoError> {
    let ord = l.order();
    let depth = floor - k as i32 - 2;
    let p = l.root(ord as u32, depth)?;
    let gen = p.power(k, -1).pos_part();
    Ok(gen.commutator(l, floor))
}

/// Key for the memoized root powers.
type PowKey = (RootKind, u32, i32);

/// Hierarchy engine for one normalized model at a fixed truncation depth.
pub struct Engine {
    pub model: Model,
    pub pmax: u16,
    p_root: PdOp,
    q_root: Option<PdOp>,
    l_op: PdOp,
    pows: Mutex<HashMap<PowKey, Arc<PdOp>>>,
    flows: Mutex<HashMap<(u16, u16), Arc<HashMap<u16, DiffPoly>>>>,
    dens: Mutex<HashMap<(u16, i32), Arc<DiffPoly>>>,
    omegas: Mutex<HashMap<(u16, u16, u16, u16), Arc<DiffPoly>>>,
}

impl Engine {
    /// Prepare roots deep enough for all indices with `p <= pmax`.
    pub fn new(model: Model, pmax: u16) -> Result<Engine, LaxError> {
        let p = pmax as i32;
        // deepest generator order over all slots
        let genmax: i32 = model
            .coords
            .iter()
            .map(|c| {
                let j = (c.step as i32) * p + c.exponent as i32;
                match c.root {
                    RootKind::P => j,
                    RootKind::Q => 3 * j,
                }
            })
            .max()
            .unwrap();
        // deepest residue powers per root kind
        let res_p: i32 = model
            .coords
            .iter()
            .filter(|c| c.root == RootKind::P)
            .map(|c| c.step as i32 * (p + 1) + c.exponent as i32)
            .max()
            .unwrap_or(0);
        let res_q: i32 = model
            .coords
            .iter()
            .filter(|c| c.root == RootKind::Q)
            .map(|c| c.step as i32 * (p + 1) + c.exponent as i32)
            .max()
            .unwrap_or(0);
        let max_e_p: i32 = model
            .coords
            .iter()
            .map(|c| model.normal_coordinate_residue(c.alpha))
            .filter(|(r, _, _)| *r == RootKind::P)
            .map(|(_, e, _)| e as i32)
            .max()
            .unwrap_or(1);
        let floor_p = -(res_p.max(genmax + max_e_p + 2) + 2);
        let floor_l = floor_p - 2;
        let l_op = build_lax(&model, floor_l);
        let h = l_op.order() as u32;
        let p_root = l_op.root(h, floor_p)?;
        let q_root = if model.coords.iter().any(|c| c.root == RootKind::Q) {
            let tail = tilde_u_of_w(&model.mask)[3].clone();
            let floor_q = -((3 * (res_q - 1)).max(genmax + 3) + 4);
            Some(l_op.sqrt_with_tail(&tail, floor_q.min(floor_l + 2))?)
        } else {
            None
        };
        Ok(Engine {
            model,
            pmax,
            p_root,
            q_root,
            l_op,
            pows: Mutex::new(HashMap::new()),
            flows: Mutex::new(HashMap::new()),
            dens: Mutex::new(HashMap::new()),
            omegas: Mutex::new(HashMap::new()),
        })
    }

    pub fn by_name(name: &str, pmax: u16) -> Result<Engine, LaxError> {
        Ok(Engine::new(Model::by_name(name)?, pmax)?)
    }

    pub fn lax(&self) -> &PdOp {
        &self.l_op
    }

    pub fn root(&self, kind: RootKind) -> &PdOp {
        match kind {
            RootKind::P => &self.p_root,
            RootKind::Q => self.q_root.as_ref().expect("model has a Q root"),
        }
    }

    /// Memoized `root^k` truncated at `floor`.
    pub fn pow(&self, kind: RootKind, k: u32, floor: i32) -> Arc<PdOp> {
        let key = (kind, k, floor);
        if let Some(hit) = self.pows.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let val = Arc::new(self.root(kind).power(k, floor));
        self.pows.lock().unwrap().entry(key).or_insert(val).clone()
    }

    fn check_index(&self, alpha: u16, p: u16) -> Result<(), LaxError> {
        if self.model.coord(alpha).is_none() {
            return Err(LaxError::BadModel(crate::model::BadModel(format!(
                "coordinate {alpha} not active in {}",
                self.model.name
            ))));
        }
        if p > self.pmax {
            return Err(LaxError::TruncationInsufficient { alpha, p, pmax: self.pmax });
        }
        Ok(())
    }

    /// Generator `(R^{j})_+` of the `t^{β,q}` flow, without the rational
    /// prefactor.
    fn generator(&self, beta: u16, q: u16) -> Arc<PdOp> {
        let c = self.model.coord(beta).expect("active");
        let j = self.model.raw_index(beta, q);
        Arc::new(self.pow(c.root, j, -1).pos_part())
    }

    /// The dispersion-rescaled flow `∂w^α/∂t^{β,q}` for every active `α`.
    pub fn flow(&self, beta: u16, q: u16) -> Result<Arc<HashMap<u16, DiffPoly>>, LaxError> {
        self.check_index(beta, q)?;
        if let Some(hit) = self.flows.lock().unwrap().get(&(beta, q)) {
            return Ok(hit.clone());
        }
        let generator = self.generator(beta, q);
        let pref = self.model.flow_prefactor(beta, q);
        let jord = generator.order();
        let mut table = HashMap::new();
        for c in &self.model.coords {
            let (root, e, norm) = self.model.normal_coordinate_residue(c.alpha);
            let base = self.pow(root, e, -2 - jord);
            let raw = generator.commutator(&base, -2).res();
            let scaled = raw.scale(&(&pref * &norm));
            // jets to (h/2)^{k/2}, then one global (h/2)^{-1/2} for the
            // left-hand side
            let flow = scaled.substitute_hbar().mul_hbar_half_pow(-1);
            flow.assert_exportable();
            table.insert(c.alpha, flow);
        }
        let arc = Arc::new(table);
        Ok(self
            .flows
            .lock()
            .unwrap()
            .entry((beta, q))
            .or_insert(arc)
            .clone())
    }

    /// Precompute every flow with `q <= pmax` (parallel).
    pub fn warm_flows(&self) -> Result<(), LaxError> {
        let idx: Vec<(u16, u16)> = self
            .model
            .alphas()
            .into_iter()
            .flat_map(|a| (0..=self.pmax).map(move |q| (a, q)))
            .collect();
        let results: Vec<Result<(), LaxError>> = idx
            .par_iter()
            .map(|&(b, q)| self.flow(b, q).map(|_| ()))
            .collect();
        for r in results {
            r?;
        }
        Ok(())
    }

    /// Dispersion-rescaled Hamiltonian density `h_{β,q}`, `q >= -1`.
    pub fn density(&self, beta: u16, q: i32) -> Result<Arc<DiffPoly>, LaxError> {
        assert!(q >= -1);
        self.check_index(beta, q.max(0) as u16)?;
        if let Some(hit) = self.dens.lock().unwrap().get(&(beta, q)) {
            return Ok(hit.clone());
        }
        let c = self.model.coord(beta).expect("active");
        let power = self.model.density_power(beta, q);
        let pref = self.model.density_prefactor(beta, q);
        let raw = self.pow(c.root, power, -2).res();
        let dens = raw.scale(&pref).substitute_hbar();
        dens.assert_exportable();
        let arc = Arc::new(dens);
        Ok(self
            .dens
            .lock()
            .unwrap()
            .entry((beta, q))
            .or_insert(arc)
            .clone())
    }

    /// Two-point function `Ω_{α,p;β,q} = d_x^{-1} ( ∂h_{α,p-1} / ∂t^{β,q} )`.
    pub fn two_point(&self, alpha: u16, p: u16, beta: u16, q: u16) -> Result<Arc<DiffPoly>, LaxError> {
        let key = (alpha, p, beta, q);
        if let Some(hit) = self.omegas.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let h = self.density(alpha, p as i32 - 1)?;
        let flow = self.flow(beta, q)?;
        let prolonged = h.prolong(&|a| flow.get(&a).cloned().unwrap_or_else(DiffPoly::zero));
        let omega = prolonged.integrate_x()?;
        omega.assert_exportable();
        let arc = Arc::new(omega);
        Ok(self
            .omegas
            .lock()
            .unwrap()
            .entry(key)
            .or_insert(arc)
            .clone())
    }

    /// Normal coordinates read back from the operator; the round trip is the
    /// identity when the operator was built in `w`-coordinates.
    pub fn normal_coordinates(&self) -> HashMap<u16, DiffPoly> {
        let mut out = HashMap::new();
        for c in &self.model.coords {
            let (root, e, norm) = self.model.normal_coordinate_residue(c.alpha);
            out.insert(c.alpha, self.pow(root, e, -2).res().scale(&norm));
        }
        out
    }

    /// Weighted degree of the `t^{β,q}` flow acting on `w^α`:
    /// `deg w^α + step·q + m_β`.
    pub fn flow_degree(&self, alpha: u16, beta: u16, q: u16) -> i64 {
        let c = self.model.coord(beta).expect("active");
        self.model.weight_of(alpha) + (c.step as i64) * q as i64 + c.exponent as i64
    }
}

/// Apply a simultaneous same-order linear substitution to every coefficient
/// of an operator.
pub fn map_op_coeffs(op: &PdOp, f: &dyn Fn(&DiffPoly) -> DiffPoly) -> PdOp {
    let mut out = PdOp::zero();
    for (&m, c) in op.iter() {
        out.set(m, f(c));
    }
    out.valid = op.valid;
    out
}

/// The order-2 folding at the operator level: `w^4 -> -w^4`.
pub fn sigma1_lax(l: &PdOp) -> PdOp {
    map_op_coeffs(l, &|c| c.linear_subst(&[(4, vec![(rint(-1), 4)])]))
}

/// Restrict a flow table of the rank-4 model to an invariant locus: the
/// masked jets are frozen to zero. Fails when a masked coordinate's flow
/// does not vanish on the locus.
pub fn restrict_flow_table(
    flows: &HashMap<(u16, u16), Arc<HashMap<u16, DiffPoly>>>,
    mask: &[u16],
    surviving_betas: &[u16],
) -> Result<HashMap<(u16, u16), HashMap<u16, DiffPoly>>, LaxError> {
    let kill = |p: &DiffPoly| -> DiffPoly {
        let mut p = p.clone();
        for &m in mask {
            p = p.kill_coordinate(m);
        }
        p
    };
    let mut out = HashMap::new();
    for (&(beta, q), table) in flows {
        if !surviving_betas.contains(&beta) {
            continue;
        }
        let mut restricted = HashMap::new();
        for (&alpha, rhs) in table.iter() {
            let r = kill(rhs);
            if mask.contains(&alpha) {
                if !r.is_zero() {
                    return Err(LaxError::NonInvariantFlow { alpha, beta, q });
                }
            } else {
                restricted.insert(alpha, r);
            }
        }
        out.insert((beta, q), restricted);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use once_cell::sync::Lazy;

    static D4_ENGINE: Lazy<Engine> = Lazy::new(|| Engine::by_name("d4", 0).unwrap());

    #[test]
    fn d4_operator_top_coefficients() {
        let l = D4_ENGINE.lax();
        // coefficient of D^4 is 2 u~^3 = w^3
        assert_eq!(l.coeff(4), w(3, 0));
        assert_eq!(l.coeff(5), DiffPoly::zero());
        // all w = 0 collapses to D^6
        let zeroed = map_op_coeffs(l, &|c| {
            let mut c = c.clone();
            for a in 1..=4 {
                c = c.kill_coordinate(a);
            }
            c
        });
        assert_eq!(zeroed.truncate(-8), PdOp::dpow(6).truncate(-8));
    }

    #[test]
    fn d4_operator_is_homogeneous() {
        let model = &D4_ENGINE.model;
        let weight = |a: u16| model.weight_of(a);
        assert!(D4_ENGINE.lax().check_homogeneous(6, &weight));
        assert!(D4_ENGINE.root(RootKind::P).check_homogeneous(1, &weight));
        let q = D4_ENGINE.root(RootKind::Q);
        assert!(q.check_homogeneous(3, &weight));
        // no degree-1 differential polynomial exists, so [Q]_2 = 0
        assert_eq!(q.coeff(2), DiffPoly::zero());
    }

    #[test]
    fn d4_normal_coordinate_round_trip() {
        let nc = D4_ENGINE.normal_coordinates();
        for a in 1..=4u16 {
            assert_eq!(nc[&a], w(a, 0), "normal coordinate {a}");
        }
    }

    #[test]
    fn d4_densities_at_level_minus_one() {
        // h_{β,-1} = η_{βγ} w^γ
        for (beta, dual, c) in [(1u16, 3u16, rfrac(1, 6)), (2, 2, rfrac(1, 6)), (3, 1, rfrac(1, 6)), (4, 4, rfrac(1, 2))] {
            let h = D4_ENGINE.density(beta, -1).unwrap();
            assert_eq!(*h, w(dual, 0).scale(&c), "beta={beta}");
        }
    }

    #[test]
    fn d4_simple_flows() {
        let id = D4_ENGINE.flow(1, 0).unwrap();
        for a in 1..=4u16 {
            assert_eq!(id[&a], w(a, 1));
        }
        let f20 = D4_ENGINE.flow(2, 0).unwrap();
        assert_eq!(f20[&3], w(2, 1));
        // ∂w^4/∂t^{2,0} = 1/6 w3 w4_x + 1/6 w4 w3_x + (h/6) w4_xxx
        let expect = w(3, 0)
            .mul(&w(4, 1))
            .scale(&rfrac(1, 6))
            .add(&w(4, 0).mul(&w(3, 1)).scale(&rfrac(1, 6)))
            .add(&DiffPoly::eps_pow(2).mul(&w(4, 3)).scale(&rfrac(1, 6)));
        assert_eq!(f20[&4], expect);
        let f40 = D4_ENGINE.flow(4, 0).unwrap();
        assert_eq!(f40[&3], w(4, 1).scale(&rint(3)));
        // ∂w^2/∂t^{4,0} = 1/2 w3 w4_x + 1/2 w4 w3_x + (h/2) w4_xxx
        let expect2 = w(3, 0)
            .mul(&w(4, 1))
            .scale(&rfrac(1, 2))
            .add(&w(4, 0).mul(&w(3, 1)).scale(&rfrac(1, 2)))
            .add(&DiffPoly::eps_pow(2).mul(&w(4, 3)).scale(&rfrac(1, 2)));
        assert_eq!(f40[&2], expect2);
    }

    #[test]
    fn d4_flow_homogeneity_and_parity() {
        let model = &D4_ENGINE.model;
        let weight = |a: u16| model.weight_of(a);
        for beta in 1..=4u16 {
            let f = D4_ENGINE.flow(beta, 0).unwrap();
            for alpha in 1..=4u16 {
                if f[&alpha].is_zero() {
                    continue;
                }
                assert_eq!(
                    f[&alpha].homogeneous_degree(&weight),
                    Some(D4_ENGINE.flow_degree(alpha, beta, 0)),
                    "degree of flow ({beta},0) on w^{alpha}"
                );
                // parity under w^4 -> -w^4
                let is_q = beta == 4;
                let flipped = f[&alpha].linear_subst(&[(4, vec![(rint(-1), 4)])]);
                let expect = if (alpha == 4) ^ is_q { f[&alpha].neg() } else { f[&alpha].clone() };
                assert_eq!(flipped, expect, "parity of flow ({beta},0) on w^{alpha}");
            }
        }
    }

    #[test]
    fn d4_two_point_basics() {
        // Ω_{α,p;1,0} = h_{α,p-1}
        for (a, p) in [(1u16, 0u16), (2, 0), (4, 0)] {
            let omega = D4_ENGINE.two_point(a, p, 1, 0).unwrap();
            let h = D4_ENGINE.density(a, p as i32 - 1).unwrap();
            assert_eq!(*omega, *h);
        }
        // symmetry Ω_{2,0;3,0} = Ω_{3,0;2,0}
        let a = D4_ENGINE.two_point(2, 0, 3, 0).unwrap();
        let b = D4_ENGINE.two_point(3, 0, 2, 0).unwrap();
        assert_eq!(*a, *b);
    }

    #[test]
    fn sigma1_leaves_operator_invariant() {
        assert_eq!(sigma1_lax(D4_ENGINE.lax()), *D4_ENGINE.lax());
    }

    #[test]
    fn a1_is_dispersed_kdv() {
        let e = Engine::by_name("a1", 1).unwrap();
        let f = e.flow(1, 0).unwrap();
        assert_eq!(f[&1], w(1, 1));
        // ∂w/∂t^{1,1} = w w_x + (h/12) w_xxx
        let f11 = e.flow(1, 1).unwrap();
        let expect = w(1, 0)
            .mul(&w(1, 1))
            .add(&DiffPoly::eps_pow(2).mul(&w(1, 3)).scale(&rfrac(1, 12)));
        assert_eq!(f11[&1], expect);
        // h_{1,-1} = w
        assert_eq!(*e.density(1, -1).unwrap(), w(1, 0));
        assert_eq!(*e.normal_coordinates().get(&1).unwrap(), w(1, 0));
    }

    #[test]
    fn a3_adjoint_locus_closes_under_odd_flows() {
        // L = L^† is the locus u~^2 = u~^3_x; its flows stay on the locus
        let l = a_scalar_lax(2);
        for k in [1u32, 3] {
            let ldot = raw_lax_flow(&l, k, -1).unwrap();
            let ldot_dag = ldot.adjoint(-1);
            let diff = ldot.sub(&ldot_dag);
            for m in 0..=diff.order().max(0) {
                let on_locus = diff.coeff(m).subst_coordinate(2, &DiffPoly::var(3, 1));
                assert!(on_locus.is_zero(), "t_{k} flow leaves the locus at D^{m}");
            }
        }
    }

    #[test]
    fn b3_and_g2_build() {
        let b3 = Engine::by_name("b3", 0).unwrap();
        assert_eq!(b3.lax().coeff(4), w(3, 0));
        let g2 = Engine::by_name("g2", 0).unwrap();
        let f = g2.flow(3, 0).unwrap();
        assert_eq!(f[&3], w(1, 1));
        assert!(g2.flow(3, 0).unwrap()[&1].homogeneous_degree(&|a| g2.model.weight_of(a)) == Some(11));
    }

    #[test]
    fn restriction_matches_directly_built_models() {
        let d4 = Engine::by_name("d4", 0).unwrap();
        d4.warm_flows().unwrap();
        let flows = {
            let mut m = HashMap::new();
            for b in 1..=4u16 {
                m.insert((b, 0u16), d4.flow(b, 0).unwrap());
            }
            m
        };
        let b3 = Engine::by_name("b3", 0).unwrap();
        let restricted = restrict_flow_table(&flows, &[4], &[1, 2, 3]).unwrap();
        for beta in 1..=3u16 {
            let own = b3.flow(beta, 0).unwrap();
            for alpha in 1..=3u16 {
                assert_eq!(restricted[&(beta, 0)][&alpha], own[&alpha], "b3 flow ({beta},0) on {alpha}");
            }
        }
    }
}
