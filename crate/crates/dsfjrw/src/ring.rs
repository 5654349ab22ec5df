//! Differential polynomials in jet variables over exact rationals.
//!
//! A [`DiffPoly`] is a sparse sum of monomials. A monomial is a multiset of
//! jet variables `w^{α,k}` (the `k`-th `x`-derivative of the coordinate
//! `w^α`), an integer power of the dispersion symbol `eps` with `eps^2 = h`
//! (`h` is the dispersion parameter), and a power of the auxiliary symbol
//! `s2` with `s2^2 = 2`. The `s2` symbol only appears transiently while
//! applying the half-integer rescaling; every exported value must have
//! `s2`-power zero and even `eps`-power, which callers assert via
//! [`DiffPoly::assert_exportable`].
//!
//! Invariants: no zero coefficients are stored; jet lists are sorted by
//! `(alpha, k)` with positive exponents; `s2`-powers are normalized to `{0,1}`
//! by folding pairs into the rational coefficient.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;
use thiserror::Error;

/// Arbitrary-precision rational; denominator positive, fraction reduced.
pub type Rat = num_rational::BigRational;

/// `n` as a rational.
pub fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `n/d` as a rational.
pub fn rfrac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Parse "num/den" or "num".
pub fn rparse(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => Some(Rat::new(n.trim().parse().ok()?, d.trim().parse().ok()?)),
        None => Some(Rat::from_integer(s.parse().ok()?)),
    }
}

/// Render a rational as `num/den` (or `num` when the denominator is 1).
pub fn rstr(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A jet variable `w^{alpha,k}`: the `k`-th `x`-derivative of coordinate
/// `w^alpha`. Coordinates are indexed from 1.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct JetVar {
    pub alpha: u16,
    pub k: u16,
}

impl JetVar {
    pub fn new(alpha: u16, k: u16) -> Self {
        JetVar { alpha, k }
    }

    /// Order by derivative level first; used when peeling leading jets.
    fn level_order(self) -> (u16, u16) {
        (self.k, self.alpha)
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.k == 0 {
            write!(f, "w{}", self.alpha)
        } else {
            write!(f, "w{}_{}", self.alpha, self.k)
        }
    }
}

type Jets = SmallVec<[(JetVar, u32); 6]>;

/// A monomial: sorted jet powers, an `eps`-power and an `s2`-power in `{0,1}`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Mono {
    pub jets: Jets,
    pub eps: i32,
    pub s2: u8,
}

impl Mono {
    pub fn one() -> Self {
        Mono { jets: SmallVec::new(), eps: 0, s2: 0 }
    }

    pub fn var(v: JetVar) -> Self {
        let mut jets = SmallVec::new();
        jets.push((v, 1));
        Mono { jets, eps: 0, s2: 0 }
    }

    pub fn is_unit(&self) -> bool {
        self.jets.is_empty() && self.eps == 0 && self.s2 == 0
    }

    /// Sum of `k * exponent` over all jet factors.
    pub fn jet_degree(&self) -> u32 {
        self.jets.iter().map(|&(v, e)| v.k as u32 * e).sum()
    }

    /// Total exponent sum (jets only).
    pub fn total_exp(&self) -> u32 {
        self.jets.iter().map(|&(_, e)| e).sum()
    }

    /// Weighted degree with the given per-coordinate weights; each jet level
    /// adds one.
    pub fn weighted_degree(&self, weight: &dyn Fn(u16) -> i64) -> i64 {
        self.jets
            .iter()
            .map(|&(v, e)| (weight(v.alpha) + v.k as i64) * e as i64)
            .sum()
    }

    pub fn exponent_of(&self, v: JetVar) -> u32 {
        self.jets
            .iter()
            .find(|&&(u, _)| u == v)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    /// Merge two monomials; returns the product monomial and a factor of 2
    /// for every folded `s2` pair.
    fn mul(&self, other: &Mono) -> (Mono, u32) {
        let mut jets: Jets = SmallVec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.jets.len() && j < other.jets.len() {
            let (a, ea) = self.jets[i];
            let (b, eb) = other.jets[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => {
                    jets.push((a, ea));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    jets.push((b, eb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    jets.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        jets.extend_from_slice(&self.jets[i..]);
        jets.extend_from_slice(&other.jets[j..]);
        let s2 = self.s2 + other.s2;
        (Mono { jets, eps: self.eps + other.eps, s2: s2 % 2 }, (s2 / 2) as u32)
    }

    /// Canonical ordering: `eps`-power, total degree, then lexicographic on
    /// the `(alpha, k)` factor list. Keeps the text form deterministic.
    fn canon_key(&self) -> (i32, u32, Vec<(u16, u16, u32)>, u8) {
        (
            self.eps,
            self.total_exp(),
            self.jets.iter().map(|&(v, e)| (v.alpha, v.k, e)).collect(),
            self.s2,
        )
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum RingError {
    /// The argument is not a total `x`-derivative: its variational derivative
    /// is nonzero (equivalently the reduction leaves a jet-degree-0 remainder).
    #[error("not a total x-derivative")]
    NotExact,
}

/// Sparse differential polynomial with exact rational coefficients.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct DiffPoly {
    terms: HashMap<Mono, Rat>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        DiffPoly { terms: HashMap::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        let mut p = Self::zero();
        p.add_term(Mono::one(), c);
        p
    }

    pub fn var(alpha: u16, k: u16) -> Self {
        let mut p = Self::zero();
        p.add_term(Mono::var(JetVar::new(alpha, k)), Rat::one());
        p
    }

    /// `eps^e` as a polynomial; `e` may be negative (Laurent in `eps`).
    pub fn eps_pow(e: i32) -> Self {
        let mut p = Self::zero();
        p.add_term(Mono { jets: SmallVec::new(), eps: e, s2: 0 }, Rat::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, m: Mono, c: Rat) {
        if c.is_zero() {
            return;
        }
        use std::collections::hash_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &DiffPoly) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn add(&self, other: &DiffPoly) -> DiffPoly {
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn sub(&self, other: &DiffPoly) -> DiffPoly {
        let mut r = self.clone();
        for (m, c) in &other.terms {
            r.add_term(m.clone(), -c.clone());
        }
        r
    }

    pub fn neg(&self) -> DiffPoly {
        let mut r = self.clone();
        for c in r.terms.values_mut() {
            *c = -c.clone();
        }
        r
    }

    pub fn scale(&self, c: &Rat) -> DiffPoly {
        if c.is_zero() {
            return Self::zero();
        }
        let mut r = Self::zero();
        for (m, a) in &self.terms {
            r.terms.insert(m.clone(), a * c);
        }
        r
    }

    pub fn mul(&self, other: &DiffPoly) -> DiffPoly {
        let mut r = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let (m, twos) = ma.mul(mb);
                let mut c = ca * cb;
                if twos > 0 {
                    c *= Rat::from_integer(BigInt::from(2).pow(twos));
                }
                r.add_term(m, c);
            }
        }
        r
    }

    /// Multiply by `eps^e` (Laurent shift of the dispersion power).
    pub fn mul_eps(&self, e: i32) -> DiffPoly {
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            let mut m = m.clone();
            m.eps += e;
            r.terms.insert(m, c.clone());
        }
        r
    }

    /// Total `x`-derivative: `w^{α,k} -> w^{α,k+1}` by the Leibniz rule.
    pub fn d_x(&self) -> DiffPoly {
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            for idx in 0..m.jets.len() {
                let (v, e) = m.jets[idx];
                // replace one factor v by its derivative
                let mut rest: Jets = SmallVec::new();
                for (pos, &(u, eu)) in m.jets.iter().enumerate() {
                    let eu = if pos == idx { eu - 1 } else { eu };
                    if eu > 0 {
                        rest.push((u, eu));
                    }
                }
                let rest = Mono { jets: rest, eps: m.eps, s2: m.s2 };
                let (mono, twos) = rest.mul(&Mono::var(JetVar::new(v.alpha, v.k + 1)));
                debug_assert_eq!(twos, 0);
                r.add_term(mono, c * rint(e as i64));
            }
        }
        r
    }

    /// `k`-fold total derivative.
    pub fn d_x_n(&self, k: u16) -> DiffPoly {
        let mut r = self.clone();
        for _ in 0..k {
            r = r.d_x();
        }
        r
    }

    /// Partial derivative with respect to the single jet variable `v`.
    pub fn partial(&self, v: JetVar) -> DiffPoly {
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            let e = m.exponent_of(v);
            if e == 0 {
                continue;
            }
            let mut jets: Jets = SmallVec::new();
            for &(u, eu) in &m.jets {
                if u == v {
                    if eu > 1 {
                        jets.push((u, eu - 1));
                    }
                } else {
                    jets.push((u, eu));
                }
            }
            r.add_term(Mono { jets, eps: m.eps, s2: m.s2 }, c * rint(e as i64));
        }
        r
    }

    /// All jet variables occurring in the polynomial.
    pub fn variables(&self) -> Vec<JetVar> {
        let mut vs: Vec<JetVar> = Vec::new();
        for m in self.terms.keys() {
            for &(v, _) in &m.jets {
                if !vs.contains(&v) {
                    vs.push(v);
                }
            }
        }
        vs.sort();
        vs
    }

    /// Maximal derivative order present, or `None` for jet-free polynomials.
    pub fn max_jet_order(&self) -> Option<u16> {
        self.variables().iter().map(|v| v.k).max()
    }

    /// Variational derivative with respect to coordinate `alpha`:
    /// `sum_k (-d_x)^k ∂/∂w^{α,k}`. Zero for every coordinate iff the
    /// polynomial is a total `x`-derivative up to a jet-free constant.
    pub fn variational(&self, alpha: u16) -> DiffPoly {
        let mut r = Self::zero();
        let kmax = self
            .variables()
            .iter()
            .filter(|v| v.alpha == alpha)
            .map(|v| v.k)
            .max();
        let Some(kmax) = kmax else { return r };
        for k in 0..=kmax {
            let mut t = self.partial(JetVar::new(alpha, k)).d_x_n(k);
            if k % 2 == 1 {
                t = t.neg();
            }
            r.add_assign(&t);
        }
        r
    }

    /// Formal `x`-integration: returns `g` with `d_x(g) = self` and no
    /// jet-free additive constant. Fails with [`RingError::NotExact`] when the
    /// variational derivative is nonzero or a jet-free remainder appears.
    pub fn integrate_x(&self) -> Result<DiffPoly, RingError> {
        // quick exactness test via the variational derivative
        let alphas: Vec<u16> = {
            let mut a: Vec<u16> = self.variables().iter().map(|v| v.alpha).collect();
            a.dedup();
            a
        };
        for &alpha in &alphas {
            if !self.variational(alpha).is_zero() {
                return Err(RingError::NotExact);
            }
        }
        // jet-free part must vanish
        for m in self.terms.keys() {
            if m.jets.is_empty() {
                return Err(RingError::NotExact);
            }
        }

        // peel one derivative level at a time, reconstructing the level
        // gradient by Poincare integration in the level-(k-1) variables
        let mut f = self.clone();
        let mut g = DiffPoly::zero();
        loop {
            if f.is_zero() {
                return Ok(g);
            }
            let top = f
                .variables()
                .into_iter()
                .max_by_key(|v| v.level_order())
                .expect("nonzero polynomial has variables");
            if top.k == 0 {
                return Err(RingError::NotExact);
            }
            let level = top.k;
            // top-level variables must occur linearly and one per monomial
            for m in f.terms.keys() {
                let tot: u32 = m
                    .jets
                    .iter()
                    .filter(|&&(v, _)| v.k == level)
                    .map(|&(_, e)| e)
                    .sum();
                if tot > 1 {
                    return Err(RingError::NotExact);
                }
            }
            let alphas_here: Vec<u16> = {
                let mut a: Vec<u16> = f
                    .variables()
                    .iter()
                    .filter(|v| v.k == level)
                    .map(|v| v.alpha)
                    .collect();
                a.sort();
                a.dedup();
                a
            };
            // gradient components A_α = ∂f/∂w^{α,level}
            let grads: Vec<(u16, DiffPoly)> = alphas_here
                .iter()
                .map(|&a| (a, f.partial(JetVar::new(a, level))))
                .collect();
            // Poincare integration in the u-variables w^{α,level-1}
            let mut g1 = DiffPoly::zero();
            for (a, grad) in &grads {
                let u = JetVar::new(*a, level - 1);
                for (m, c) in &grad.terms {
                    let (m2, twos) = m.mul(&Mono::var(u));
                    debug_assert_eq!(twos, 0);
                    let udeg: i64 = m2
                        .jets
                        .iter()
                        .filter(|&&(v, _)| v.k == level - 1)
                        .map(|&(_, e)| e as i64)
                        .sum();
                    g1.add_term(m2, c / rint(udeg));
                }
            }
            f = f.sub(&g1.d_x());
            // progress guard: the whole level must be gone
            if f.variables().iter().any(|v| v.k >= level) {
                return Err(RingError::NotExact);
            }
            g.add_assign(&g1);
        }
    }

    /// Apply `w^{α,k} -> (h/2)^{k/2} w^{α,k}` for `k >= 1`, tracked exactly
    /// through the `eps` and `s2` symbols.
    pub fn substitute_hbar(&self) -> DiffPoly {
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            let j = m.jet_degree() as i32;
            let (m2, c2) = shift_half_pow(m, c, j);
            r.add_term(m2, c2);
        }
        r
    }

    /// Multiply every monomial by `(h/2)^{p/2}` for a fixed integer `p`
    /// (possibly negative). Used when rescaling flows.
    pub fn mul_hbar_half_pow(&self, p: i32) -> DiffPoly {
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            let (m2, c2) = shift_half_pow(m, c, p);
            r.add_term(m2, c2);
        }
        r
    }

    /// Substitute coordinate `alpha` (all its jets) by zero.
    pub fn kill_coordinate(&self, alpha: u16) -> DiffPoly {
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            if m.jets.iter().all(|&(v, _)| v.alpha != alpha) {
                r.terms.insert(m.clone(), c.clone());
            }
        }
        r
    }

    /// Linear change of coordinates: every jet of coordinate `alpha` is sent
    /// to the same-order jet combination `sum_i c_i * w^{beta_i}`.
    /// Coordinates not listed are left untouched.
    pub fn linear_subst(&self, rules: &[(u16, Vec<(Rat, u16)>)]) -> DiffPoly {
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            let mut acc = DiffPoly::constant(c.clone());
            acc = acc.mul(&DiffPoly::eps_pow(m.eps));
            if m.s2 != 0 {
                let mut s = DiffPoly::zero();
                s.add_term(Mono { jets: SmallVec::new(), eps: 0, s2: m.s2 }, Rat::one());
                acc = acc.mul(&s);
            }
            for &(v, e) in &m.jets {
                let factor = match rules.iter().find(|(a, _)| *a == v.alpha) {
                    None => Self::var(v.alpha, v.k),
                    Some((_, combo)) => {
                        let mut s = DiffPoly::zero();
                        for (coef, beta) in combo {
                            s.add_assign(&Self::var(*beta, v.k).scale(coef));
                        }
                        s
                    }
                };
                for _ in 0..e {
                    acc = acc.mul(&factor);
                }
            }
            r.add_assign(&acc);
        }
        r
    }

    /// Substitute one coordinate by a differential polynomial: every jet
    /// `w^{alpha,k}` is replaced by `d_x^k(repl)`. The replacement must not
    /// involve the substituted coordinate itself.
    pub fn subst_coordinate(&self, alpha: u16, repl: &DiffPoly) -> DiffPoly {
        debug_assert!(repl.variables().iter().all(|v| v.alpha != alpha));
        let mut dcache: Vec<DiffPoly> = vec![repl.clone()];
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            let mut acc = DiffPoly::zero();
            let mut rest = Mono { jets: SmallVec::new(), eps: m.eps, s2: m.s2 };
            let mut subst_factors: Vec<(u16, u32)> = Vec::new();
            for &(v, e) in &m.jets {
                if v.alpha == alpha {
                    subst_factors.push((v.k, e));
                } else {
                    rest.jets.push((v, e));
                }
            }
            acc.add_term(rest, c.clone());
            for (k, e) in subst_factors {
                while dcache.len() <= k as usize {
                    let next = dcache.last().unwrap().d_x();
                    dcache.push(next);
                }
                for _ in 0..e {
                    acc = acc.mul(&dcache[k as usize]);
                }
            }
            r.add_assign(&acc);
        }
        r
    }

    /// Chain rule along a table of coordinate flows: for `∂f/∂t` where
    /// `∂w^α/∂t = flow(α)`, returns `Σ_{α,k} ∂f/∂w^{α,k} · d_x^k(flow(α))`.
    pub fn prolong(&self, flow: &dyn Fn(u16) -> DiffPoly) -> DiffPoly {
        let vars = self.variables();
        let mut dcache: HashMap<(u16, u16), DiffPoly> = HashMap::new();
        let mut r = DiffPoly::zero();
        for v in vars {
            let part = self.partial(v);
            if part.is_zero() {
                continue;
            }
            let dxk = dcache
                .entry((v.alpha, v.k))
                .or_insert_with(|| flow(v.alpha).d_x_n(v.k))
                .clone();
            r.add_assign(&part.mul(&dxk));
        }
        r
    }

    /// Every exported value must be free of `s2` and have even `eps`-powers.
    pub fn assert_exportable(&self) {
        for m in self.terms.keys() {
            assert_eq!(m.s2, 0, "exported value carries an s2 factor: {self}");
            assert!(m.eps >= 0 && m.eps % 2 == 0, "exported value has odd or negative eps power: {self}");
        }
    }

    /// Split into strata by `h`-power (`eps = 2g`). Panics if not exportable.
    pub fn hbar_strata(&self) -> Vec<(u32, DiffPoly)> {
        self.assert_exportable();
        let mut by: HashMap<u32, DiffPoly> = HashMap::new();
        for (m, c) in &self.terms {
            let g = (m.eps / 2) as u32;
            let mut m2 = m.clone();
            m2.eps = 0;
            by.entry(g).or_insert_with(DiffPoly::zero).add_term(m2, c.clone());
        }
        let mut out: Vec<_> = by.into_iter().collect();
        out.sort_by_key(|&(g, _)| g);
        out
    }

    /// Uniform weighted degree of all monomials, or `None` when mixed/zero.
    /// `eps` and `s2` carry weight zero.
    pub fn homogeneous_degree(&self, weight: &dyn Fn(u16) -> i64) -> Option<i64> {
        let mut deg = None;
        for m in self.terms.keys() {
            let d = m.weighted_degree(weight);
            match deg {
                None => deg = Some(d),
                Some(d0) if d0 != d => return None,
                _ => {}
            }
        }
        deg
    }

    /// Canonical term list, sorted by the documented monomial order.
    pub fn sorted_terms(&self) -> Vec<(Mono, Rat)> {
        let mut ts: Vec<(Mono, Rat)> = self.terms.iter().map(|(m, c)| (m.clone(), c.clone())).collect();
        ts.sort_by(|a, b| a.0.canon_key().cmp(&b.0.canon_key()));
        ts
    }

    /// Deterministic text form; see the module docs for the ordering.
    pub fn to_text(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.sorted_terms().into_iter().enumerate() {
            let neg = c.is_negative();
            let mag = if neg { -c.clone() } else { c.clone() };
            if i == 0 {
                if neg {
                    out.push_str("-");
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            if m.eps != 0 {
                debug_assert!(m.eps % 2 == 0);
                let g = m.eps / 2;
                factors.push(if g == 1 { "h".into() } else { format!("h^{g}") });
            }
            if m.s2 != 0 {
                factors.push("s2".into());
            }
            for &(v, e) in &m.jets {
                factors.push(if e == 1 { format!("{v}") } else { format!("{v}^{e}") });
            }
            out.push_str(&rstr(&mag));
            if !factors.is_empty() {
                out.push(' ');
                out.push_str(&factors.join("*"));
            }
        }
        out
    }

    /// JSON form: a list of `{"eps": int, "jets": [[alpha,k,exp],..], "coef": "num/den"}`.
    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .sorted_terms()
            .into_iter()
            .map(|(m, c)| {
                assert_eq!(m.s2, 0, "JSON export requires s2-free values");
                serde_json::json!({
                    "eps": m.eps,
                    "jets": m.jets.iter().map(|&(v, e)| vec![v.alpha as i64, v.k as i64, e as i64]).collect::<Vec<_>>(),
                    "coef": rstr(&c),
                })
            })
            .collect();
        serde_json::Value::Array(terms)
    }

    /// Parse the JSON form produced by [`DiffPoly::to_json`].
    pub fn from_json(v: &serde_json::Value) -> Option<DiffPoly> {
        let mut p = DiffPoly::zero();
        for t in v.as_array()? {
            let eps = t.get("eps").and_then(|x| x.as_i64()).unwrap_or(0) as i32;
            let coef = rparse(t.get("coef")?.as_str()?)?;
            let mut jets: Jets = SmallVec::new();
            for j in t.get("jets")?.as_array()? {
                let j = j.as_array()?;
                jets.push((
                    JetVar::new(j[0].as_u64()? as u16, j[1].as_u64()? as u16),
                    j[2].as_u64()? as u32,
                ));
            }
            jets.sort();
            p.add_term(Mono { jets, eps, s2: 0 }, coef);
        }
        Some(p)
    }
}

/// Multiply `(m, c)` by `(h/2)^{p/2}`: `eps += p`, and `2^{-p/2}` folded into
/// `s2`/`c` with `s2^2 = 2`.
fn shift_half_pow(m: &Mono, c: &Rat, p: i32) -> (Mono, Rat) {
    let mut m2 = m.clone();
    let mut c2 = c.clone();
    m2.eps += p;
    // total s2-power after the shift
    let mut s2 = m2.s2 as i32 - p;
    // fold even part into the coefficient, keep parity in {0,1}
    let fold = if s2 >= 0 { s2 / 2 } else { (s2 - 1) / 2 };
    if fold != 0 {
        let two = BigInt::from(2);
        if fold > 0 {
            c2 *= Rat::from_integer(two.pow(fold as u32));
        } else {
            c2 /= Rat::from_integer(two.pow((-fold) as u32));
        }
    }
    s2 -= 2 * fold;
    debug_assert!(s2 == 0 || s2 == 1);
    m2.s2 = s2 as u8;
    (m2, c2)
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl fmt::Debug for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(alpha: u16, k: u16) -> DiffPoly {
        DiffPoly::var(alpha, k)
    }

    #[test]
    fn add_identities() {
        let a = w(1, 0);
        assert_eq!(a.add(&DiffPoly::zero()), a);
        assert!(a.add(&a.neg()).is_zero());
        let half = w(1, 0).scale(&rfrac(1, 2));
        assert_eq!(half.add(&half), a);
    }

    #[test]
    fn mul_basics() {
        let p = w(1, 0).mul(&w(2, 0));
        assert_eq!(p.num_terms(), 1);
        let cube = w(3, 0).mul(&w(3, 0)).mul(&w(3, 0));
        let m = cube.sorted_terms();
        assert_eq!(m[0].0.jets[0], (JetVar::new(3, 0), 3));
        // eps * eps * w1 = h * w1 as eps^2 w1
        let e = DiffPoly::eps_pow(1).mul(&DiffPoly::eps_pow(1)).mul(&w(1, 0));
        assert_eq!(e.sorted_terms()[0].0.eps, 2);
    }

    #[test]
    fn d_x_cases() {
        assert_eq!(w(1, 0).d_x(), w(1, 1));
        let half_sq = w(1, 0).mul(&w(1, 0)).scale(&rfrac(1, 2));
        assert_eq!(half_sq.d_x(), w(1, 0).mul(&w(1, 1)));
        assert!(DiffPoly::constant(rint(5)).d_x().is_zero());
        // every surviving monomial gains exactly one jet level
        let f = w(1, 1).mul(&w(2, 1)).add(&w(3, 2));
        for (m, _) in f.d_x().terms() {
            assert_eq!(m.jet_degree(), 3);
        }
    }

    #[test]
    fn integrate_basics() {
        assert_eq!(w(1, 1).integrate_x().unwrap(), w(1, 0));
        let f = w(1, 0).mul(&w(1, 1));
        assert_eq!(f.integrate_x().unwrap(), w(1, 0).mul(&w(1, 0)).scale(&rfrac(1, 2)));
        assert_eq!(w(1, 0).integrate_x(), Err(RingError::NotExact));
        // mixed-coordinate inexact case
        let bad = w(1, 2).mul(&w(2, 1));
        assert_eq!(bad.integrate_x(), Err(RingError::NotExact));
    }

    #[test]
    fn substitute_hbar_cases() {
        // w1_x * w1_x -> (h/2) (w1_x)^2
        let f = w(1, 1).mul(&w(1, 1));
        let s = f.substitute_hbar();
        let terms = s.sorted_terms();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].0.eps, 2);
        assert_eq!(terms[0].0.s2, 0);
        assert_eq!(terms[0].1, rfrac(1, 2));
        // k = 0 untouched
        assert_eq!(w(1, 0).substitute_hbar(), w(1, 0));
        // jet-degree 4 picks up (h/2)^2
        let g = w(3, 3).mul(&w(3, 1)).substitute_hbar();
        let t = g.sorted_terms();
        assert_eq!(t[0].0.eps, 4);
        assert_eq!(t[0].1, rfrac(1, 4));
        // eps power always equals the source jet degree
        let mixed = w(1, 2).mul(&w(2, 1)).add(&w(3, 1));
        for (m, _) in mixed.substitute_hbar().terms() {
            assert_eq!(m.eps as u32, m.jet_degree());
        }
    }

    #[test]
    fn prolong_cases() {
        // f = w3, flow sending w3 -> w2_x
        let flow = |alpha: u16| if alpha == 3 { w(2, 1) } else { DiffPoly::zero() };
        assert_eq!(w(3, 0).prolong(&flow), w(2, 1));
        assert!(DiffPoly::constant(rint(1)).prolong(&flow).is_zero());
        // Leibniz
        let f = w(3, 0).mul(&w(3, 1));
        let expect = w(2, 1).mul(&w(3, 1)).add(&w(3, 0).mul(&w(2, 2)));
        assert_eq!(f.prolong(&flow), expect);
    }

    #[test]
    fn text_form_is_deterministic() {
        let f = w(1, 0)
            .mul(&w(2, 1))
            .scale(&rfrac(-1, 6))
            .add(&w(3, 0).scale(&rint(3)))
            .add(&DiffPoly::eps_pow(2).mul(&w(1, 3)).scale(&rfrac(1, 20)));
        assert_eq!(f.to_text(), "3 w3 - 1/6 w1*w2_1 + 1/20 h*w1_3");
        let round = DiffPoly::from_json(&f.to_json()).unwrap();
        assert_eq!(round, f);
    }

    fn arb_poly() -> impl Strategy<Value = DiffPoly> {
        let mono = (
            proptest::collection::vec(((1u16..4), (0u16..3), (1u32..3)), 0..3),
            -6i64..7,
        );
        proptest::collection::vec(mono, 0..5).prop_map(|ts| {
            let mut p = DiffPoly::zero();
            for (jets, c) in ts {
                let mut m = Mono::one();
                for (a, k, e) in jets {
                    for _ in 0..e {
                        let (mm, _) = m.mul(&Mono::var(JetVar::new(a, k)));
                        m = mm;
                    }
                }
                p.add_term(m, rint(c));
            }
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]

        #[test]
        fn mul_commutative_associative(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            prop_assert_eq!(a.mul(&b), b.mul(&a));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        }

        #[test]
        fn integrate_then_differentiate(a in arb_poly()) {
            // d_x . integrate_x = id on the image of d_x
            let f = a.d_x();
            let g = f.integrate_x().expect("derivatives are exact");
            prop_assert_eq!(g.d_x(), f);
        }

        #[test]
        fn prolong_commutes_with_dx(a in arb_poly()) {
            // flows commute with d_x
            let flow = |alpha: u16| match alpha {
                1 => DiffPoly::var(2, 1),
                2 => DiffPoly::var(1, 0).mul(&DiffPoly::var(1, 1)),
                _ => DiffPoly::var(3, 1),
            };
            prop_assert_eq!(a.d_x().prolong(&flow), a.prolong(&flow).d_x());
        }
    }
}
