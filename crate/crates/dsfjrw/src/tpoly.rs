//! Sparse polynomials in the time variables `t^{α,p}` (and, with `p = 0`,
//! in the flat coordinates `v^α`), plus a Laurent series in the dispersion
//! parameter `h` with such polynomials as coefficients.
//!
//! Variables are encoded as `(alpha << 16) | p`; exponents are positive;
//! monomials are kept sorted. No zero coefficients are stored.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;

use crate::ring::{rint, rparse, rstr, Rat};

/// Encoded time variable `t^{α,p}`.
pub type TVar = u32;

pub fn tvar(alpha: u16, p: u16) -> TVar {
    ((alpha as u32) << 16) | p as u32
}

pub fn tvar_alpha(v: TVar) -> u16 {
    (v >> 16) as u16
}

pub fn tvar_p(v: TVar) -> u16 {
    (v & 0xffff) as u16
}

type TJets = SmallVec<[(TVar, u32); 6]>;

/// Monomial in time variables.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct TMono {
    pub vars: TJets,
}

impl TMono {
    pub fn one() -> Self {
        TMono { vars: SmallVec::new() }
    }

    pub fn var(v: TVar) -> Self {
        let mut vars = SmallVec::new();
        vars.push((v, 1));
        TMono { vars }
    }

    pub fn mul(&self, other: &TMono) -> TMono {
        let mut vars: TJets = SmallVec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.vars.len() && j < other.vars.len() {
            let (a, ea) = self.vars[i];
            let (b, eb) = other.vars[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => {
                    vars.push((a, ea));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    vars.push((b, eb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    vars.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        vars.extend_from_slice(&self.vars[i..]);
        vars.extend_from_slice(&other.vars[j..]);
        TMono { vars }
    }

    pub fn total_degree(&self) -> u32 {
        self.vars.iter().map(|&(_, e)| e).sum()
    }

    /// Degree counted over variables with `p >= 1` only.
    pub fn positive_degree(&self) -> u32 {
        self.vars
            .iter()
            .filter(|&&(v, _)| tvar_p(v) >= 1)
            .map(|&(_, e)| e)
            .sum()
    }

    /// Degree counted over variables with `p = 0` only.
    pub fn zero_degree(&self) -> u32 {
        self.total_degree() - self.positive_degree()
    }

    pub fn max_p(&self) -> u16 {
        self.vars.iter().map(|&(v, _)| tvar_p(v)).max().unwrap_or(0)
    }

    pub fn exponent_of(&self, v: TVar) -> u32 {
        self.vars
            .iter()
            .find(|&&(u, _)| u == v)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    fn canon_key(&self) -> (u32, Vec<(u16, u16, u32)>) {
        (
            self.total_degree(),
            self.vars
                .iter()
                .map(|&(v, e)| (tvar_alpha(v), tvar_p(v), e))
                .collect(),
        )
    }
}

/// Sparse polynomial in time variables over exact rationals.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct TPoly {
    terms: HashMap<TMono, Rat>,
}

impl TPoly {
    pub fn zero() -> Self {
        TPoly { terms: HashMap::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        let mut p = Self::zero();
        p.add_term(TMono::one(), c);
        p
    }

    pub fn var(v: TVar) -> Self {
        let mut p = Self::zero();
        p.add_term(TMono::var(v), Rat::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TMono, &Rat)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, m: TMono, c: Rat) {
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

    pub fn add_assign(&mut self, other: &TPoly) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn add(&self, other: &TPoly) -> TPoly {
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn sub(&self, other: &TPoly) -> TPoly {
        let mut r = self.clone();
        for (m, c) in &other.terms {
            r.add_term(m.clone(), -c.clone());
        }
        r
    }

    pub fn neg(&self) -> TPoly {
        let mut r = self.clone();
        for c in r.terms.values_mut() {
            *c = -c.clone();
        }
        r
    }

    pub fn scale(&self, c: &Rat) -> TPoly {
        if c.is_zero() {
            return Self::zero();
        }
        let mut r = Self::zero();
        for (m, a) in &self.terms {
            r.terms.insert(m.clone(), a * c);
        }
        r
    }

    pub fn mul(&self, other: &TPoly) -> TPoly {
        self.mul_trunc(other, None)
    }

    /// Product, optionally truncated by positive-`p` degree.
    pub fn mul_trunc(&self, other: &TPoly, max_pos_degree: Option<u32>) -> TPoly {
        let mut r = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                if let Some(d) = max_pos_degree {
                    if m.positive_degree() > d {
                        continue;
                    }
                }
                r.add_term(m, ca * cb);
            }
        }
        r
    }

    pub fn partial(&self, v: TVar) -> TPoly {
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            let e = m.exponent_of(v);
            if e == 0 {
                continue;
            }
            let mut vars: TJets = SmallVec::new();
            for &(u, eu) in &m.vars {
                if u == v {
                    if eu > 1 {
                        vars.push((u, eu - 1));
                    }
                } else {
                    vars.push((u, eu));
                }
            }
            r.add_term(TMono { vars }, c * rint(e as i64));
        }
        r
    }

    /// Substitute whole polynomials for a set of variables, truncating by
    /// positive-`p` degree when requested. Unlisted variables are kept.
    pub fn substitute_map(
        &self,
        map: &HashMap<TVar, TPoly>,
        max_pos_degree: Option<u32>,
    ) -> TPoly {
        let mut r = Self::zero();
        let mut pow_cache: HashMap<(TVar, u32), TPoly> = HashMap::new();
        for (m, c) in &self.terms {
            let mut acc = TPoly::constant(c.clone());
            for &(v, e) in &m.vars {
                match map.get(&v) {
                    None => {
                        let mut mono = TMono::one();
                        for _ in 0..e {
                            mono = mono.mul(&TMono::var(v));
                        }
                        acc = acc.mul_trunc(&TPoly { terms: HashMap::from([(mono, Rat::one())]) }, max_pos_degree);
                    }
                    Some(repl) => {
                        let powed = pow_cache.entry((v, e)).or_insert_with(|| {
                            let mut p = TPoly::one();
                            for _ in 0..e {
                                p = p.mul_trunc(repl, max_pos_degree);
                            }
                            p
                        });
                        acc = acc.mul_trunc(powed, max_pos_degree);
                    }
                }
                if acc.is_zero() {
                    break;
                }
            }
            r.add_assign(&acc);
        }
        r
    }

    /// Substitute a single variable by a polynomial (no truncation).
    pub fn substitute(&self, v: TVar, repl: &TPoly) -> TPoly {
        let mut map = HashMap::new();
        map.insert(v, repl.clone());
        self.substitute_map(&map, None)
    }

    /// Keep only monomials selected by the predicate.
    pub fn filter<F: Fn(&TMono) -> bool>(&self, pred: F) -> TPoly {
        let mut r = Self::zero();
        for (m, c) in &self.terms {
            if pred(m) {
                r.terms.insert(m.clone(), c.clone());
            }
        }
        r
    }

    pub fn coefficient(&self, m: &TMono) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn constant_term(&self) -> Rat {
        self.coefficient(&TMono::one())
    }

    pub fn max_positive_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.positive_degree()).max().unwrap_or(0)
    }

    /// Euler scaling check: weighted degree of every monomial against the
    /// supplied variable weights; `None` when mixed.
    pub fn homogeneous_degree(&self, weight: &dyn Fn(TVar) -> Rat) -> Option<Rat> {
        let mut deg: Option<Rat> = None;
        for m in self.terms.keys() {
            let d: Rat = m
                .vars
                .iter()
                .map(|&(v, e)| weight(v) * rint(e as i64))
                .fold(Rat::zero(), |a, b| a + b);
            match &deg {
                None => deg = Some(d),
                Some(d0) if *d0 != d => return None,
                _ => {}
            }
        }
        deg
    }

    pub fn sorted_terms(&self) -> Vec<(TMono, Rat)> {
        let mut ts: Vec<(TMono, Rat)> =
            self.terms.iter().map(|(m, c)| (m.clone(), c.clone())).collect();
        ts.sort_by(|a, b| a.0.canon_key().cmp(&b.0.canon_key()));
        ts
    }

    /// Deterministic text form using the given variable namer.
    pub fn to_text_with(&self, name: &dyn Fn(TVar) -> String) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.sorted_terms().into_iter().enumerate() {
            let neg = c.is_negative();
            let mag = if neg { -c.clone() } else { c.clone() };
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            out.push_str(&rstr(&mag));
            let factors: Vec<String> = m
                .vars
                .iter()
                .map(|&(v, e)| {
                    if e == 1 {
                        name(v)
                    } else {
                        format!("{}^{}", name(v), e)
                    }
                })
                .collect();
            if !factors.is_empty() {
                out.push(' ');
                out.push_str(&factors.join("*"));
            }
        }
        out
    }

    /// Default text form with `t[α,p]` variables.
    pub fn to_text(&self) -> String {
        self.to_text_with(&|v| format!("t[{},{}]", tvar_alpha(v), tvar_p(v)))
    }

    /// Text form for flat coordinates (`p = 0` variables printed as `vα`).
    pub fn to_text_flat(&self) -> String {
        self.to_text_with(&|v| format!("v{}", tvar_alpha(v)))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .sorted_terms()
            .into_iter()
            .map(|(m, c)| {
                serde_json::json!({
                    "vars": m.vars.iter().map(|&(v, e)| vec![tvar_alpha(v) as i64, tvar_p(v) as i64, e as i64]).collect::<Vec<_>>(),
                    "coef": rstr(&c),
                })
            })
            .collect();
        serde_json::Value::Array(terms)
    }

    pub fn from_json(v: &serde_json::Value) -> Option<TPoly> {
        let mut p = TPoly::zero();
        for t in v.as_array()? {
            let coef = rparse(t.get("coef")?.as_str()?)?;
            let mut vars: TJets = SmallVec::new();
            for j in t.get("vars")?.as_array()? {
                let j = j.as_array()?;
                vars.push((
                    tvar(j[0].as_u64()? as u16, j[1].as_u64()? as u16),
                    j[2].as_u64()? as u32,
                ));
            }
            vars.sort();
            p.add_term(TMono { vars }, coef);
        }
        Some(p)
    }
}

impl fmt::Display for TPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl fmt::Debug for TPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// Laurent polynomial in the dispersion parameter `h` with [`TPoly`]
/// coefficients. One negative power is enough for the Virasoro blocks, but
/// the representation is general.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct HSeries {
    pub strata: BTreeMap<i32, TPoly>,
}

impl HSeries {
    pub fn zero() -> Self {
        HSeries { strata: BTreeMap::new() }
    }

    pub fn from_poly(p: TPoly, hpow: i32) -> Self {
        let mut s = Self::zero();
        s.set(hpow, p);
        s
    }

    pub fn set(&mut self, hpow: i32, p: TPoly) {
        if !p.is_zero() {
            self.strata.insert(hpow, p);
        }
    }

    pub fn get(&self, hpow: i32) -> TPoly {
        self.strata.get(&hpow).cloned().unwrap_or_else(TPoly::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn add_assign(&mut self, other: &HSeries) {
        for (k, p) in &other.strata {
            let sum = self.get(*k).add(p);
            if sum.is_zero() {
                self.strata.remove(k);
            } else {
                self.strata.insert(*k, sum);
            }
        }
    }

    pub fn add(&self, other: &HSeries) -> HSeries {
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn sub(&self, other: &HSeries) -> HSeries {
        let mut r = self.clone();
        for (k, p) in &other.strata {
            let sum = r.get(*k).sub(p);
            if sum.is_zero() {
                r.strata.remove(k);
            } else {
                r.strata.insert(*k, sum);
            }
        }
        r
    }

    pub fn scale(&self, c: &Rat) -> HSeries {
        let mut r = Self::zero();
        for (k, p) in &self.strata {
            r.set(*k, p.scale(c));
        }
        r
    }

    pub fn mul(&self, other: &HSeries) -> HSeries {
        let mut r = Self::zero();
        for (ka, pa) in &self.strata {
            for (kb, pb) in &other.strata {
                let prod = pa.mul(pb);
                let sum = r.get(ka + kb).add(&prod);
                if sum.is_zero() {
                    r.strata.remove(&(ka + kb));
                } else {
                    r.strata.insert(ka + kb, sum);
                }
            }
        }
        r
    }

    pub fn mul_poly(&self, p: &TPoly) -> HSeries {
        let mut r = Self::zero();
        for (k, q) in &self.strata {
            r.set(*k, q.mul(p));
        }
        r
    }

    pub fn shift_h(&self, d: i32) -> HSeries {
        HSeries { strata: self.strata.iter().map(|(k, p)| (k + d, p.clone())).collect() }
    }

    /// Apply a polynomial map to every stratum.
    pub fn map<F: Fn(&TPoly) -> TPoly>(&self, f: F) -> HSeries {
        let mut r = Self::zero();
        for (k, p) in &self.strata {
            r.set(*k, f(p));
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::rfrac;

    #[test]
    fn basic_algebra() {
        let x = TPoly::var(tvar(1, 0));
        let y = TPoly::var(tvar(3, 1));
        let p = x.add(&y).mul(&x.sub(&y));
        let xx = x.mul(&x).sub(&y.mul(&y));
        assert_eq!(p, xx);
        assert_eq!(p.partial(tvar(1, 0)), x.scale(&rint(2)));
    }

    #[test]
    fn positive_degree_truncation() {
        let x = TPoly::var(tvar(1, 0));
        let s = TPoly::var(tvar(1, 1));
        let p = x.add(&s);
        let sq = p.mul_trunc(&p, Some(1));
        // s^2 dropped, x^2 and 2xs kept
        assert_eq!(sq.num_terms(), 2);
        assert_eq!(sq.coefficient(&TMono::var(tvar(1, 1)).mul(&TMono::var(tvar(1, 0)))), rint(2));
    }

    #[test]
    fn substitution() {
        let v = TPoly::var(tvar(2, 0));
        let expr = v.mul(&v).scale(&rfrac(1, 2));
        let repl = TPoly::var(tvar(1, 0)).add(&TPoly::constant(rint(3)));
        let got = expr.substitute(tvar(2, 0), &repl);
        let x = TPoly::var(tvar(1, 0));
        let want = x.mul(&x).scale(&rfrac(1, 2)).add(&x.scale(&rint(3))).add(&TPoly::constant(rfrac(9, 2)));
        assert_eq!(got, want);
    }

    #[test]
    fn hseries_roundtrip() {
        let mut a = HSeries::zero();
        a.set(-1, TPoly::var(tvar(1, 0)));
        a.set(1, TPoly::one());
        let b = a.mul(&a);
        assert_eq!(b.get(-2), TPoly::var(tvar(1, 0)).mul(&TPoly::var(tvar(1, 0))));
        assert_eq!(b.get(0), TPoly::var(tvar(1, 0)).scale(&rint(2)));
        assert_eq!(b.get(2), TPoly::one());
    }
}
