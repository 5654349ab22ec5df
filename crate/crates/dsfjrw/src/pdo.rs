//! Pseudo-differential operators over the differential-polynomial ring.
//!
//! An operator is a finite sum `sum_m f_m D^m` with `D = d/dx`, stored sparsely
//! by integer power. Negative powers form an infinite expansion in general, so
//! every operator carries a storage `floor` (powers below it are dropped) and
//! a `valid` bound: coefficients at powers `>= valid` are exact, lower ones
//! are unknown. Extraction operations (`res`, `coeff`, `pos_part`) assert
//! validity so a too-shallow truncation fails loudly instead of silently.
//!
//! Composition uses the generalized Leibniz rule
//! `D^m f = sum_j C(m,j) f^{(j)} D^{m-j}` with the generalized binomial
//! coefficient, valid for negative `m` as well.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::ring::{rint, DiffPoly, Rat};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum PdoError {
    #[error("leading coefficient is not 1")]
    NotMonic,
    #[error("operator order {order} is not divisible by {divisor}")]
    NotDivisible { order: i32, divisor: i32 },
    #[error("root recursion failed to close at power {power}")]
    Inconsistent { power: i32 },
    #[error("truncation floor {floor} too shallow for requested power {power}")]
    TruncationInsufficient { floor: i32, power: i32 },
}

/// Exactness bound: `Entire` means every coefficient (including absent ones)
/// is exact; `Above(v)` means coefficients at powers `>= v` are exact.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Valid {
    Entire,
    Above(i32),
}

impl Valid {
    fn bound(self) -> Option<i32> {
        match self {
            Valid::Entire => None,
            Valid::Above(v) => Some(v),
        }
    }

    fn max(self, other: Valid) -> Valid {
        match (self.bound(), other.bound()) {
            (None, None) => Valid::Entire,
            (Some(a), None) => Valid::Above(a),
            (None, Some(b)) => Valid::Above(b),
            (Some(a), Some(b)) => Valid::Above(a.max(b)),
        }
    }

    fn shift(self, d: i32) -> Valid {
        match self {
            Valid::Entire => Valid::Entire,
            Valid::Above(v) => Valid::Above(v + d),
        }
    }

    pub fn covers(self, m: i32) -> bool {
        match self {
            Valid::Entire => true,
            Valid::Above(v) => m >= v,
        }
    }
}

/// Sparse pseudo-differential operator.
#[derive(Clone)]
pub struct PdOp {
    terms: BTreeMap<i32, DiffPoly>,
    pub valid: Valid,
}

/// Equality compares stored coefficients only; the exactness bound is
/// bookkeeping, not part of the value.
impl PartialEq for PdOp {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Eq for PdOp {}

impl PdOp {
    pub fn zero() -> Self {
        PdOp { terms: BTreeMap::new(), valid: Valid::Entire }
    }

    /// The operator `D^m`.
    pub fn dpow(m: i32) -> Self {
        let mut t = BTreeMap::new();
        t.insert(m, DiffPoly::one());
        PdOp { terms: t, valid: Valid::Entire }
    }

    /// Multiplication operator by a differential polynomial (order 0).
    pub fn from_poly(f: DiffPoly) -> Self {
        let mut op = Self::zero();
        op.set(0, f);
        op
    }

    pub fn set(&mut self, m: i32, f: DiffPoly) {
        if f.is_zero() {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, f);
        }
    }

    pub fn add_to(&mut self, m: i32, f: &DiffPoly) {
        let cur = self.terms.remove(&m).unwrap_or_else(DiffPoly::zero);
        let sum = cur.add(f);
        if !sum.is_zero() {
            self.terms.insert(m, sum);
        }
    }

    pub fn coeff(&self, m: i32) -> DiffPoly {
        assert!(
            self.valid.covers(m),
            "coefficient at power {m} is below the exactness floor {:?}",
            self.valid
        );
        self.terms.get(&m).cloned().unwrap_or_else(DiffPoly::zero)
    }

    /// Highest power with a nonzero coefficient.
    pub fn order(&self) -> i32 {
        self.terms.keys().next_back().copied().unwrap_or(i32::MIN)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&i32, &DiffPoly)> {
        self.terms.iter()
    }

    pub fn truncate(&self, floor: i32) -> PdOp {
        let mut t = BTreeMap::new();
        for (&m, f) in &self.terms {
            if m >= floor {
                t.insert(m, f.clone());
            }
        }
        PdOp { terms: t, valid: self.valid.max(Valid::Above(floor)) }
    }

    pub fn add(&self, other: &PdOp) -> PdOp {
        let mut r = self.clone();
        for (&m, f) in &other.terms {
            r.add_to(m, f);
        }
        r.valid = self.valid.max(other.valid);
        r
    }

    pub fn sub(&self, other: &PdOp) -> PdOp {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PdOp {
        PdOp {
            terms: self.terms.iter().map(|(&m, f)| (m, f.neg())).collect(),
            valid: self.valid,
        }
    }

    pub fn scale(&self, c: &Rat) -> PdOp {
        if c.is_zero() {
            return PdOp { terms: BTreeMap::new(), valid: self.valid };
        }
        PdOp {
            terms: self.terms.iter().map(|(&m, f)| (m, f.scale(c))).collect(),
            valid: self.valid,
        }
    }

    /// Leibniz composition truncated at `floor`.
    pub fn compose(&self, other: &PdOp, floor: i32) -> PdOp {
        // derivative cache per right-hand term
        let bterms: Vec<(i32, &DiffPoly)> = other.terms.iter().map(|(&k, f)| (k, f)).collect();
        let mut dcache: Vec<Vec<DiffPoly>> = bterms.iter().map(|(_, f)| vec![(*f).clone()]).collect();
        let mut out: BTreeMap<i32, DiffPoly> = BTreeMap::new();
        for (&m, f) in &self.terms {
            for (bi, &(k, _)) in bterms.iter().enumerate() {
                let mut jmax = m + k - floor;
                if m >= 0 {
                    jmax = jmax.min(m);
                }
                if jmax < 0 {
                    continue;
                }
                let mut binom = Rat::one();
                for j in 0..=jmax {
                    if j > 0 {
                        binom = binom * rint((m - j + 1) as i64) / rint(j as i64);
                    }
                    if binom.is_zero() {
                        break;
                    }
                    let der = {
                        while dcache[bi].len() <= j as usize {
                            let next = dcache[bi].last().unwrap().d_x();
                            dcache[bi].push(next);
                        }
                        &dcache[bi][j as usize]
                    };
                    if der.is_zero() {
                        continue;
                    }
                    let contrib = f.mul(der).scale(&binom);
                    if contrib.is_zero() {
                        continue;
                    }
                    let target = m + k - j;
                    let cur = out.remove(&target).unwrap_or_else(DiffPoly::zero);
                    let sum = cur.add(&contrib);
                    if !sum.is_zero() {
                        out.insert(target, sum);
                    }
                }
            }
        }
        // a missing term of `self` below its bound can pollute powers up to
        // bound - 1 + order(other), and symmetrically
        let va = self.valid.shift(if other.is_zero() { 0 } else { other.order() });
        let vb = other.valid.shift(if self.is_zero() { 0 } else { self.order() });
        let valid = va.max(vb).max(Valid::Above(floor));
        PdOp { terms: out, valid }
    }

    pub fn commutator(&self, other: &PdOp, floor: i32) -> PdOp {
        self.compose(other, floor).sub(&other.compose(self, floor))
    }

    /// The differential-operator part (powers >= 0).
    pub fn pos_part(&self) -> PdOp {
        assert!(self.valid.covers(0), "positive part requested below exactness floor");
        let mut t = BTreeMap::new();
        for (&m, f) in &self.terms {
            if m >= 0 {
                t.insert(m, f.clone());
            }
        }
        PdOp { terms: t, valid: Valid::Entire }
    }

    /// Residue: the coefficient of `D^{-1}`.
    pub fn res(&self) -> DiffPoly {
        self.coeff(-1)
    }

    /// `self^k` via binary splitting; intermediates carry graduated floors so
    /// the result is exact down to `floor` whenever `self` is.
    pub fn power(&self, k: u32, floor: i32) -> PdOp {
        assert!(k >= 1);
        let ord = self.order();
        if k == 1 {
            return self.truncate(floor);
        }
        let half = k / 2;
        let rem = k - half;
        let x = self.power(half, floor - rem as i32 * ord);
        let y = if rem == half {
            x.clone()
        } else {
            self.power(rem, floor - half as i32 * ord)
        };
        x.compose(&y, floor)
    }

    /// `h`-th root of a monic operator whose order is divisible by `h`:
    /// returns `P` with leading term `D^{order/h}` and `P^h = self` down to
    /// `floor`. Coefficients are determined uniquely top-down.
    pub fn root(&self, h: u32, floor: i32) -> Result<PdOp, PdoError> {
        let d = self.order();
        if d == i32::MIN || d % h as i32 != 0 || d < 0 {
            return Err(PdoError::NotDivisible { order: d, divisor: h as i32 });
        }
        let dr = d / h as i32;
        if self.coeff(d) != DiffPoly::one() {
            return Err(PdoError::NotMonic);
        }
        let mut p = PdOp::dpow(dr);
        for m in (floor..=dr - 1).rev() {
            let target = m + (h as i32 - 1) * dr;
            // treat the partial root as formally exact during the solve; the
            // defect at `target` is exactly h times the unknown coefficient
            let mut probe = p.clone();
            probe.valid = Valid::Entire;
            let ph = probe.power(h, target);
            let mut e = self
                .terms
                .get(&target)
                .cloned()
                .unwrap_or_else(DiffPoly::zero);
            if !self.valid.covers(target) {
                return Err(PdoError::TruncationInsufficient { floor: target, power: target });
            }
            e = e.sub(&ph.terms.get(&target).cloned().unwrap_or_else(DiffPoly::zero));
            if !e.is_zero() {
                p.set(m, e.scale(&(Rat::one() / rint(h as i64))));
            }
        }
        p.valid = Valid::Above(floor);
        Ok(p)
    }

    /// Square root with the designated `D^{-1} tail` shape: returns
    /// `Q = D^{d/2} + q_{d/2-1} D^{d/2-1} + ... + q_0 + expand(D^{-1} tail)`
    /// with `Q^2 = self` to the validity bound; the finitely many positive
    /// coefficients are forced by homogeneity. Fails with `Inconsistent` when
    /// the remaining powers do not match (wrong tail datum).
    pub fn sqrt_with_tail(&self, tail: &DiffPoly, floor: i32) -> Result<PdOp, PdoError> {
        let d = self.order();
        if d < 0 || d % 2 != 0 {
            return Err(PdoError::NotDivisible { order: d, divisor: 2 });
        }
        let half = d / 2;
        if self.coeff(d) != DiffPoly::one() {
            return Err(PdoError::NotMonic);
        }
        // expansion of D^{-1} ∘ tail into the plain algebra
        let mut q = PdOp::dpow(half);
        let mut der = tail.clone();
        let mut sign = Rat::one();
        for i in 0.. {
            let m = -1 - i;
            if m < floor {
                break;
            }
            q.add_to(m, &der.scale(&sign));
            der = der.d_x();
            sign = -sign;
        }
        q.valid = Valid::Entire; // formal during the solve
        // unknown coefficients at powers half-1 .. 0
        for m in (0..=half - 1).rev() {
            let target = m + half;
            let q2 = q.power(2, target);
            let mut e = self.terms.get(&target).cloned().unwrap_or_else(DiffPoly::zero);
            e = e.sub(&q2.terms.get(&target).cloned().unwrap_or_else(DiffPoly::zero));
            if !e.is_zero() {
                q.set(m, e.scale(&(Rat::one() / rint(2))));
            }
        }
        q.valid = Valid::Above(floor);
        // consistency: all remaining powers must already match
        let q2 = q.power(2, floor + d + 1);
        let diff = self.truncate(floor + d + 1).sub(&q2);
        for (&m, f) in &diff.terms {
            if diff.valid.covers(m) && !f.is_zero() {
                return Err(PdoError::Inconsistent { power: m });
            }
        }
        Ok(q)
    }

    /// Formal adjoint `sum (-D)^m ∘ f_m`.
    pub fn adjoint(&self, floor: i32) -> PdOp {
        let mut out = PdOp::zero();
        for (&m, f) in &self.terms {
            let sign = if m.rem_euclid(2) == 0 { Rat::one() } else { -Rat::one() };
            let mut jmax = m - floor;
            if m >= 0 {
                jmax = jmax.min(m);
            }
            let mut binom = Rat::one();
            let mut der = f.clone();
            for j in 0..=jmax.max(0) {
                if j > 0 {
                    binom = binom * rint((m - j + 1) as i64) / rint(j as i64);
                    der = der.d_x();
                }
                if binom.is_zero() {
                    break;
                }
                out.add_to(m - j, &der.scale(&(&sign * &binom)));
            }
        }
        out.valid = self.valid.max(Valid::Above(floor));
        out
    }

    /// Per-term homogeneity check: with operator degree `deg`, the
    /// coefficient at power `m` must be homogeneous of weighted degree
    /// `deg - m`.
    pub fn check_homogeneous(&self, deg: i64, weight: &dyn Fn(u16) -> i64) -> bool {
        self.terms.iter().all(|(&m, f)| {
            f.is_zero() || f.homogeneous_degree(weight) == Some(deg - m as i64)
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let floor = match self.valid {
            Valid::Entire => serde_json::Value::Null,
            Valid::Above(v) => serde_json::json!(v),
        };
        let mut terms = serde_json::Map::new();
        for (&m, f) in self.terms.iter().rev() {
            terms.insert(m.to_string(), f.to_json());
        }
        serde_json::json!({ "floor": floor, "terms": terms })
    }
}

impl fmt::Display for PdOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(&m, c)| format!("({}) D^{}", c.to_text(), m))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl fmt::Debug for PdOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} [valid {:?}]", self.valid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::rfrac;

    fn w(alpha: u16, k: u16) -> DiffPoly {
        DiffPoly::var(alpha, k)
    }

    #[test]
    fn leibniz_rule() {
        // D ∘ w1 = w1 D + w1_x
        let a = PdOp::dpow(1).compose(&PdOp::from_poly(w(1, 0)), -5);
        assert_eq!(a.coeff(1), w(1, 0));
        assert_eq!(a.coeff(0), w(1, 1));
        // D^{-1} ∘ w1 = w1 D^{-1} - w1_x D^{-2} + w1_xx D^{-3} - ...
        let b = PdOp::dpow(-1).compose(&PdOp::from_poly(w(1, 0)), -3);
        assert_eq!(b.coeff(-1), w(1, 0));
        assert_eq!(b.coeff(-2), w(1, 1).neg());
        assert_eq!(b.coeff(-3), w(1, 2));
    }

    #[test]
    fn root_of_schroedinger() {
        // L = D^2 + w1, P = L^{1/2} = D + 1/2 w1 D^{-1} - 1/4 w1_x D^{-2} + ...
        let mut l = PdOp::dpow(2);
        l.add_to(0, &w(1, 0));
        let p = l.root(2, -8).unwrap();
        assert_eq!(p.coeff(-1), w(1, 0).scale(&rfrac(1, 2)));
        assert_eq!(p.coeff(-2), w(1, 1).scale(&rfrac(-1, 4)));
        // round trip P^2 = L
        let p2 = p.power(2, -6);
        for m in -6..=2 {
            if p2.valid.covers(m) {
                assert_eq!(p2.coeff(m), l.terms.get(&m).cloned().unwrap_or_else(DiffPoly::zero), "power {m}");
            }
        }
        // res L^{1/2} = w1/2
        assert_eq!(p.res(), w(1, 0).scale(&rfrac(1, 2)));
    }

    #[test]
    fn classical_kdv_residues() {
        let mut l = PdOp::dpow(2);
        l.add_to(0, &w(1, 0));
        let p = l.root(2, -12).unwrap();
        // res L^{3/2} = (3 u^2 + u'')/8
        let p3 = p.power(3, -2);
        let expect = w(1, 0)
            .mul(&w(1, 0))
            .scale(&rfrac(3, 8))
            .add(&w(1, 2).scale(&rfrac(1, 8)));
        assert_eq!(p3.res(), expect);
        // res L^{5/2} = (10u^3 + 10 u u'' + 5 (u')^2 + u'''')/32
        let p5 = p.power(5, -2);
        let u = w(1, 0);
        let expect5 = u
            .mul(&u)
            .mul(&u)
            .scale(&rfrac(10, 32))
            .add(&u.mul(&w(1, 2)).scale(&rfrac(10, 32)))
            .add(&w(1, 1).mul(&w(1, 1)).scale(&rfrac(5, 32)))
            .add(&w(1, 4).scale(&rfrac(1, 32)));
        assert_eq!(p5.res(), expect5);
    }

    #[test]
    fn pos_part_and_res() {
        let mut a = PdOp::dpow(3);
        a.add_to(-1, &w(1, 0));
        assert_eq!(a.pos_part(), PdOp::dpow(3));
        assert_eq!(a.res(), w(1, 0));
    }

    #[test]
    fn trivial_roots() {
        let l = PdOp::dpow(6);
        let p = l.root(6, -4).unwrap();
        assert_eq!(p.truncate(0), PdOp::dpow(1).truncate(0));
        assert!(PdOp::dpow(6).scale(&rint(2)).root(6, -2).is_err());
        assert!(PdOp::dpow(5).root(2, -2).is_err());
    }

    #[test]
    fn power_of_d() {
        let p = PdOp::dpow(1).power(6, 0);
        assert_eq!(p.coeff(6), DiffPoly::one());
        assert_eq!(p.order(), 6);
    }

    #[test]
    fn adjoint_involution() {
        assert_eq!(PdOp::dpow(1).adjoint(-4), PdOp::dpow(1).neg());
        let mut l = PdOp::dpow(4);
        l.add_to(2, &w(3, 0));
        l.add_to(1, &w(2, 0));
        l.add_to(0, &w(1, 0));
        let ll = l.adjoint(-6).adjoint(-6);
        for m in 0..=4 {
            assert_eq!(ll.coeff(m), l.coeff(m));
        }
    }

    #[test]
    fn sqrt_with_zero_tail() {
        let q = PdOp::dpow(6).sqrt_with_tail(&DiffPoly::zero(), -8).unwrap();
        assert_eq!(q.truncate(0), PdOp::dpow(3).truncate(0));
    }

    #[test]
    fn associativity_at_finite_floor() {
        // compare only powers where all three parenthesizations are exact
        let mut a = PdOp::dpow(2);
        a.add_to(-1, &w(1, 0));
        a.valid = Valid::Above(-1);
        let mut b = PdOp::dpow(1);
        b.add_to(0, &w(2, 0));
        let mut c = PdOp::dpow(-1);
        c.add_to(-2, &w(3, 1));
        c.valid = Valid::Above(-2);
        let floor = -6;
        let left = a.compose(&b, floor).compose(&c, floor);
        let right = a.compose(&b.compose(&c, floor), floor);
        let v = left.valid.max(right.valid);
        if let Valid::Above(vb) = v {
            for m in vb..=left.order().max(right.order()) {
                assert_eq!(
                    left.terms.get(&m).cloned().unwrap_or_else(DiffPoly::zero),
                    right.terms.get(&m).cloned().unwrap_or_else(DiffPoly::zero),
                    "power {m}"
                );
            }
        }
    }

    #[test]
    fn adler_trace_property() {
        // res[A,B] is a total x-derivative
        let mut a = PdOp::dpow(2);
        a.add_to(0, &w(1, 0));
        let p = a.root(2, -10).unwrap();
        let p3 = p.power(3, -8);
        let comm = p3.pos_part().commutator(&p, -2);
        assert!(comm.res().integrate_x().is_ok());
    }
}
