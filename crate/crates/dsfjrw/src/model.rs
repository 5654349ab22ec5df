//! Model registry: the concrete hierarchies supported by the engine.
//!
//! A normalized model carries, per flat slot `α`: the coordinate weight, the
//! exponent attached to its time series, which root of the Lax operator the
//! slot uses (`P` of full order, or the designated square root `Q`), the
//! degree step of that root, the time-normalization constant, and the data
//! needed to read off the normal coordinate `w^α` as a residue. The covariant
//! and contravariant metrics, Euler degrees and charge feed the Frobenius and
//! Virasoro layers.
//!
//! Raw models (`a3`, generic `dn`) expose only the scalar Lax operator and
//! unnormalized flows; they are used for operator-level reduction checks.

use num_traits::One;
use thiserror::Error;

use crate::ring::{rfrac, rint, Rat};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum RootKind {
    /// Full-order root `P = L^{1/h}`.
    P,
    /// Designated square root `Q = L^{1/2}` with the `D^{-1}` tail.
    Q,
}

/// Per-slot data of a normalized model.
#[derive(Clone, Debug)]
pub struct CoordSpec {
    pub alpha: u16,
    /// Weighted degree of `w^α`.
    pub weight: i64,
    /// Exponent `m_α` indexing this slot's time series.
    pub exponent: u32,
    /// Root whose powers generate this slot's flows and densities.
    pub root: RootKind,
    /// Degree step `r_α` of that root's raw time indices.
    pub step: u32,
    /// Time normalization constant; pins the raw-time dictionary so that
    /// the `(1,0)` flow is `d/dx`.
    pub cscale_time: Rat,
    /// Density normalization constant; pins `h_{α,-1} = η_{αγ} w^γ`.
    pub cscale_dens: Rat,
    /// Metric-dual slot.
    pub dual: u16,
}

/// Where the superpotential has poles.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PoleSet {
    InfinityOnly,
    InfinityAndZero,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ModelKind {
    /// `L = D^2 + w^1`.
    A1,
    /// The order-6 family in normal coordinates; `mask` lists the
    /// coordinates frozen to zero (none, {4}, or {2,4}).
    D4Family,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
#[error("unknown model `{0}`")]
pub struct BadModel(pub String);

/// A normalized model: everything the hierarchy engine and the Frobenius /
/// tau layers need to know.
#[derive(Clone, Debug)]
pub struct Model {
    pub name: String,
    pub kind: ModelKind,
    /// Coxeter number of the underlying diagram.
    pub hcox: u32,
    pub coords: Vec<CoordSpec>,
    /// Coordinates of the ambient order-6 family frozen to zero.
    pub mask: Vec<u16>,
    /// Euler degrees `d_α`, aligned with `coords`.
    pub euler: Vec<Rat>,
    /// Conformal charge, from `E(F) = (3 - charge) F`.
    pub charge: Rat,
    /// Covariant metric entries, `coords`-aligned square matrix.
    pub eta: Vec<Vec<Rat>>,
    /// Contravariant metric (inverse of `eta`).
    pub eta_inv: Vec<Vec<Rat>>,
    /// Residue normalization of the superpotential pairing.
    pub residue_factor: Rat,
    pub poles: PoleSet,
}

impl Model {
    pub fn by_name(name: &str) -> Result<Model, BadModel> {
        match name {
            "a1" => Ok(Self::a1()),
            "d4" => Ok(Self::d4_family("d4", &[])),
            "b3" => Ok(Self::d4_family("b3", &[4])),
            "g2" => Ok(Self::d4_family("g2", &[2, 4])),
            _ => Err(BadModel(name.to_string())),
        }
    }

    pub fn a1() -> Model {
        Model {
            name: "a1".into(),
            kind: ModelKind::A1,
            hcox: 2,
            coords: vec![CoordSpec {
                alpha: 1,
                weight: 2,
                exponent: 1,
                root: RootKind::P,
                step: 2,
                cscale_time: rint(2),
                cscale_dens: Rat::one(),
                dual: 1,
            }],
            mask: vec![],
            euler: vec![rint(1)],
            charge: rint(0),
            eta: vec![vec![rint(1)]],
            eta_inv: vec![vec![rint(1)]],
            residue_factor: rint(2),
            poles: PoleSet::InfinityOnly,
        }
    }

    fn d4_family(name: &str, mask: &[u16]) -> Model {
        let full: Vec<CoordSpec> = vec![
            CoordSpec { alpha: 1, weight: 6, exponent: 1, root: RootKind::P, step: 6, cscale_time: rint(6), cscale_dens: rint(6), dual: 3 },
            CoordSpec { alpha: 2, weight: 4, exponent: 3, root: RootKind::P, step: 6, cscale_time: rint(6), cscale_dens: rint(6), dual: 2 },
            CoordSpec { alpha: 3, weight: 2, exponent: 5, root: RootKind::P, step: 6, cscale_time: rint(6), cscale_dens: rint(6), dual: 1 },
            CoordSpec { alpha: 4, weight: 4, exponent: 1, root: RootKind::Q, step: 2, cscale_time: rint(2), cscale_dens: rint(2), dual: 4 },
        ];
        let euler_full = [rint(1), rfrac(2, 3), rfrac(1, 3), rfrac(2, 3)];
        let coords: Vec<CoordSpec> = full
            .into_iter()
            .filter(|c| !mask.contains(&c.alpha))
            .collect();
        let euler: Vec<Rat> = coords.iter().map(|c| euler_full[c.alpha as usize - 1].clone()).collect();
        let n = coords.len();
        let mut eta = vec![vec![rint(0); n]; n];
        let mut eta_inv = vec![vec![rint(0); n]; n];
        for (i, ci) in coords.iter().enumerate() {
            let j = coords.iter().position(|c| c.alpha == ci.dual).expect("dual is active");
            eta_inv[i][j] = ci.cscale_dens.clone();
            eta[i][j] = Rat::one() / ci.cscale_dens.clone();
        }
        Model {
            name: name.into(),
            kind: ModelKind::D4Family,
            hcox: 6,
            coords,
            mask: mask.to_vec(),
            euler,
            charge: rfrac(2, 3),
            eta,
            eta_inv,
            residue_factor: rint(1),
            poles: PoleSet::InfinityAndZero,
        }
    }

    pub fn rank(&self) -> usize {
        self.coords.len()
    }

    /// Active coordinate labels.
    pub fn alphas(&self) -> Vec<u16> {
        self.coords.iter().map(|c| c.alpha).collect()
    }

    pub fn coord(&self, alpha: u16) -> Option<&CoordSpec> {
        self.coords.iter().find(|c| c.alpha == alpha)
    }

    /// Position of a label in the `coords` vector.
    pub fn index_of(&self, alpha: u16) -> Option<usize> {
        self.coords.iter().position(|c| c.alpha == alpha)
    }

    pub fn weight_of(&self, alpha: u16) -> i64 {
        self.coord(alpha).map(|c| c.weight).unwrap_or(0)
    }

    pub fn eta_at(&self, a: u16, b: u16) -> Rat {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.eta[i][j].clone(),
            _ => rint(0),
        }
    }

    pub fn eta_inv_at(&self, a: u16, b: u16) -> Rat {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.eta_inv[i][j].clone(),
            _ => rint(0),
        }
    }

    /// Hodge grading `μ_α = 1 - charge/2 - d_α`.
    pub fn mu(&self) -> Vec<Rat> {
        self.euler
            .iter()
            .map(|d| Rat::one() - self.charge.clone() / rint(2) - d.clone())
            .collect()
    }

    /// Raw time index of `t^{α,p}`.
    pub fn raw_index(&self, alpha: u16, p: u16) -> u32 {
        let c = self.coord(alpha).expect("active coordinate");
        c.step * p as u32 + c.exponent
    }

    /// Rational prefactor turning the raw flow `[ (R^j)_+ , . ]` into the
    /// `t^{α,p}` flow: `1 / (c_α · prod_{i=0..p} (m_α/r_α + i))`.
    pub fn flow_prefactor(&self, alpha: u16, p: u16) -> Rat {
        let c = self.coord(alpha).expect("active coordinate");
        let base = Rat::new(rint(c.exponent as i64).numer().clone(), rint(c.step as i64).numer().clone());
        let mut prod = c.cscale_time.clone();
        for i in 0..=p {
            prod *= base.clone() + rint(i as i64);
        }
        Rat::one() / prod
    }

    /// Prefactor of the Hamiltonian density `h_{α,q}`, `q >= -1`:
    /// `1 / (c_α · prod_{i=0..q+1} (m_α/r_α + i))`.
    pub fn density_prefactor(&self, alpha: u16, q: i32) -> Rat {
        assert!(q >= -1);
        let c = self.coord(alpha).expect("active coordinate");
        let base = Rat::new(rint(c.exponent as i64).numer().clone(), rint(c.step as i64).numer().clone());
        let mut prod = c.cscale_dens.clone();
        let mut i = 0i64;
        loop {
            prod *= base.clone() + rint(i);
            if i == (q + 1) as i64 {
                break;
            }
            i += 1;
        }
        Rat::one() / prod
    }

    /// Root power whose residue enters `h_{α,q}`.
    pub fn density_power(&self, alpha: u16, q: i32) -> u32 {
        let c = self.coord(alpha).expect("active coordinate");
        (c.step as i64 * (q as i64 + 1) + c.exponent as i64) as u32
    }

    /// Normal-coordinate data: `w^α = norm · res R^{e}` where `(R, e)` come
    /// from the dual slot.
    pub fn normal_coordinate_residue(&self, alpha: u16) -> (RootKind, u32, Rat) {
        let c = self.coord(alpha).expect("active coordinate");
        let d = self.coord(c.dual).expect("dual active");
        let norm = self.eta_inv_at(alpha, c.dual)
            * rint(d.step as i64)
            / (d.cscale_dens.clone() * rint(d.exponent as i64));
        (d.root, d.exponent, norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d4_metric_and_times() {
        let m = Model::by_name("d4").unwrap();
        assert_eq!(m.eta_inv_at(1, 3), rint(6));
        assert_eq!(m.eta_inv_at(2, 2), rint(6));
        assert_eq!(m.eta_inv_at(4, 4), rint(2));
        assert_eq!(m.eta_at(1, 3), rfrac(1, 6));
        // t^{2,0} = 3 t_3, so the flow prefactor is 1/3
        assert_eq!(m.flow_prefactor(2, 0), rfrac(1, 3));
        assert_eq!(m.flow_prefactor(1, 0), rint(1));
        assert_eq!(m.flow_prefactor(4, 0), rint(1));
        assert_eq!(m.raw_index(3, 1), 11);
        assert_eq!(m.raw_index(4, 2), 5);
        // h_{1,-1} carries prefactor 1 on res P
        assert_eq!(m.density_prefactor(1, -1), rint(1));
        assert_eq!(m.density_prefactor(2, -1), rfrac(1, 3));
        assert_eq!(m.density_prefactor(3, -1), rfrac(1, 5));
        assert_eq!(m.density_power(3, 1), 17);
        let (root, e, n) = m.normal_coordinate_residue(1);
        assert_eq!((root, e), (RootKind::P, 5));
        assert_eq!(n, rfrac(6, 5));
        let (root, e, n) = m.normal_coordinate_residue(4);
        assert_eq!((root, e), (RootKind::Q, 1));
        assert_eq!(n, rint(2));
    }

    #[test]
    fn masks() {
        let b3 = Model::by_name("b3").unwrap();
        assert_eq!(b3.alphas(), vec![1, 2, 3]);
        let g2 = Model::by_name("g2").unwrap();
        assert_eq!(g2.alphas(), vec![1, 3]);
        assert_eq!(g2.eta_inv_at(1, 3), rint(6));
        // Hodge gradings
        let d4 = Model::by_name("d4").unwrap();
        assert_eq!(d4.mu(), vec![rfrac(-1, 3), rint(0), rfrac(1, 3), rint(0)]);
        assert_eq!(g2.mu(), vec![rfrac(-1, 3), rfrac(1, 3)]);
    }

    #[test]
    fn a1_normalization() {
        let a1 = Model::a1();
        assert_eq!(a1.flow_prefactor(1, 0), rint(1));
        assert_eq!(a1.flow_prefactor(1, 1), rfrac(2, 3));
        assert_eq!(a1.density_prefactor(1, -1), rint(2));
        assert_eq!(a1.density_prefactor(1, 1), rfrac(8, 15));
        let (root, e, n) = a1.normal_coordinate_residue(1);
        assert_eq!((root, e), (RootKind::P, 1));
        assert_eq!(n, rint(2));
        assert_eq!(a1.mu(), vec![rint(0)]);
    }
}
