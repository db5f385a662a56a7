//! Cohomology classes of finite abelian groups, their standard cocycles, the
//! unique μ-irrep per class, the commutation homomorphism `φ_μ`, the projective
//! center, and the operator bases built from μ-irreps.

use crate::cohomology::{self, Cocycle, GroupTable};
use crate::error::{Error, Result};
use crate::group_core::{character, GroupElement, GroupSpec};
use crate::linalg::{self, CMat};
use crate::phase::{gcd, RationalPhase};
use std::fmt;

/// Seed for the commutant element used in block extraction.
const EXTRACTION_SEED: u64 = 0x5eed_0001;

/// Class in `H²(H, U(1)) ≅ ∏_{i<j} Z_{gcd(|H_i|,|H_j|)}`, stored as a strictly
/// upper-triangular matrix with reduced entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CocycleClass {
    group: GroupSpec,
    mu: Vec<Vec<usize>>,
}

impl CocycleClass {
    /// Validates shape, strict upper-triangularity and that every entry is
    /// already reduced modulo `gcd(|H_i|, |H_j|)`.
    pub fn new(group: &GroupSpec, mu: Vec<Vec<usize>>) -> Result<Self> {
        let m = group.rank();
        if mu.len() != m || mu.iter().any(|r| r.len() != m) {
            return Err(Error::Structural(format!("class matrix must be {m}x{m}")));
        }
        for i in 0..m {
            for j in 0..m {
                let v = mu[i][j];
                if j <= i {
                    if v != 0 {
                        return Err(Error::Domain(format!("class entry ({i},{j}) must be zero")));
                    }
                } else {
                    let md = Self::modulus_of(group, i, j);
                    if v >= md {
                        return Err(Error::Domain(format!(
                            "class entry ({i},{j}) = {v} not reduced modulo {md}"
                        )));
                    }
                }
            }
        }
        Ok(CocycleClass { group: group.clone(), mu })
    }

    /// Build by reducing arbitrary integer entries.
    pub fn reduced(group: &GroupSpec, raw: &[Vec<i64>]) -> Result<Self> {
        let m = group.rank();
        if raw.len() != m || raw.iter().any(|r| r.len() != m) {
            return Err(Error::Structural(format!("class matrix must be {m}x{m}")));
        }
        let mu = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if j > i {
                            raw[i][j].rem_euclid(Self::modulus_of(group, i, j) as i64) as usize
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(CocycleClass { group: group.clone(), mu })
    }

    pub fn zero(group: &GroupSpec) -> Self {
        let m = group.rank();
        CocycleClass { group: group.clone(), mu: vec![vec![0; m]; m] }
    }

    fn modulus_of(group: &GroupSpec, i: usize, j: usize) -> usize {
        gcd(group.moduli()[i] as u64, group.moduli()[j] as u64) as usize
    }

    pub fn modulus(&self, i: usize, j: usize) -> usize {
        Self::modulus_of(&self.group, i, j)
    }

    /// Every class of the group, in lexicographic order of the upper entries.
    pub fn all(group: &GroupSpec) -> Vec<CocycleClass> {
        let m = group.rank();
        let slots: Vec<(usize, usize)> =
            (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        let mods: Vec<usize> = slots.iter().map(|&(i, j)| Self::modulus_of(group, i, j)).collect();
        let total: usize = mods.iter().product();
        (0..total)
            .map(|mut idx| {
                let mut mu = vec![vec![0; m]; m];
                for s in (0..slots.len()).rev() {
                    mu[slots[s].0][slots[s].1] = idx % mods[s];
                    idx /= mods[s];
                }
                CocycleClass { group: group.clone(), mu }
            })
            .collect()
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn matrix(&self) -> &[Vec<usize>] {
        &self.mu
    }

    pub fn entry(&self, i: usize, j: usize) -> usize {
        self.mu[i][j]
    }

    pub fn is_trivial(&self) -> bool {
        self.mu.iter().flatten().all(|&x| x == 0)
    }

    pub fn inverse(&self) -> Self {
        let m = self.group.rank();
        let mut mu = self.mu.clone();
        for i in 0..m {
            for j in i + 1..m {
                let md = self.modulus(i, j);
                mu[i][j] = (md - mu[i][j] % md) % md;
            }
        }
        CocycleClass { group: self.group.clone(), mu }
    }
}

impl fmt::Display for CocycleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.group.rank();
        let entries: Vec<String> = (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .map(|(i, j)| self.mu[i][j].to_string())
            .collect();
        write!(f, "[{}]", entries.join(","))
    }
}

/// Entrywise sum of two classes of the same group.
pub fn tensor_class_add(a: &CocycleClass, b: &CocycleClass) -> Result<CocycleClass> {
    if a.group != b.group {
        return Err(Error::Structural("classes belong to different groups".into()));
    }
    let m = a.group.rank();
    let mu = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if j > i { (a.mu[i][j] + b.mu[i][j]) % a.modulus(i, j) } else { 0 })
                .collect()
        })
        .collect();
    Ok(CocycleClass { group: a.group.clone(), mu })
}

/// `γ(a,b) = Σ_{i<j} μ_ij a_i b_j / gcd(|H_i|,|H_j|)`.
pub fn standard_phase(class: &CocycleClass, a: &GroupElement, b: &GroupElement) -> RationalPhase {
    let m = class.group.rank();
    let mut acc = RationalPhase::ZERO;
    for i in 0..m {
        for j in i + 1..m {
            let mu = class.mu[i][j];
            if mu != 0 {
                acc = acc + RationalPhase::new((mu * a.0[i] * b.0[j]) as i128, class.modulus(i, j) as u64);
            }
        }
    }
    acc
}

pub fn standard_cocycle(class: &CocycleClass) -> Cocycle {
    let spec = &class.group;
    let els = spec.elements();
    Cocycle::from_fn(&GroupTable::abelian(spec), |a, b| standard_phase(class, &els[a], &els[b]))
}

pub use cohomology::cocycle_is_trivial;

/// Antisymmetric bicharacter `γ(g,h) − γ(h,g)` of the standard cocycle.
fn commutator_phase(class: &CocycleClass, g: &GroupElement, h: &GroupElement) -> RationalPhase {
    standard_phase(class, g, h) - standard_phase(class, h, g)
}

/// Projective center computed exactly from the class.
pub fn exact_center(class: &CocycleClass) -> Vec<GroupElement> {
    let els = class.group.elements();
    els.iter()
        .filter(|g| els.iter().all(|h| commutator_phase(class, g, h).is_zero()))
        .cloned()
        .collect()
}

/// μ-irrep of an abelian group with all derived data.
#[derive(Clone, Debug)]
pub struct ProjectiveRep {
    class: CocycleClass,
    cocycle: Cocycle,
    mats: Vec<CMat>,
    phi: Vec<GroupElement>,
    center: Vec<GroupElement>,
}

impl ProjectiveRep {
    pub fn class(&self) -> &CocycleClass {
        &self.class
    }

    pub fn group(&self) -> &GroupSpec {
        &self.class.group
    }

    pub fn cocycle(&self) -> &Cocycle {
        &self.cocycle
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    /// `ω_g` for every element, in lexicographic order.
    pub fn matrices(&self) -> &[CMat] {
        &self.mats
    }

    pub fn omega(&self, g: &GroupElement) -> &CMat {
        &self.mats[self.group().index(g)]
    }

    pub fn phi(&self, g: &GroupElement) -> &GroupElement {
        &self.phi[self.group().index(g)]
    }

    pub fn center(&self) -> &[GroupElement] {
        &self.center
    }

    /// Largest violation of `ω_g ω_h = γ(g,h) ω_{g⊕h}`.
    pub fn multiplication_residual(&self) -> f64 {
        let spec = self.group();
        let els = spec.elements();
        let mut worst = 0.0f64;
        for (a, g) in els.iter().enumerate() {
            for (b, h) in els.iter().enumerate() {
                let lhs = &self.mats[a] * &self.mats[b];
                let c = self.cocycle.eval(a, b).to_complex();
                let rhs = self.mats[spec.index(&spec.add(g, h))].map(|z| z * c);
                worst = worst.max(linalg::max_diff(&lhs, &rhs));
            }
        }
        worst
    }

    /// Largest violation of `tr ω_h = 0` off the center and `|tr ω_h| = D` on it.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim() as f64;
        let spec = self.group();
        spec.elements()
            .iter()
            .map(|h| {
                let t = linalg::trace(self.omega(h));
                if self.center.contains(h) {
                    (t.norm() - d).abs()
                } else {
                    t.norm()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Build the μ-irrep: block extraction from the twisted regular representation,
/// then `φ_μ` and the center, and a check of every invariant.
pub fn mu_irrep(class: &CocycleClass) -> Result<ProjectiveRep> {
    let spec = class.group.clone();
    let n = spec.order();
    let cocycle = standard_cocycle(class);
    let center_exact = exact_center(class);
    let z = center_exact.len();
    let dim = (1..=n).find(|d| d * d * z == n).ok_or_else(|| {
        Error::Consistency(format!("|H|/|Z| = {n}/{z} is not a perfect square"))
    })?;
    let mats = if class.is_trivial() {
        vec![linalg::identity(1); n]
    } else {
        cohomology::extract_irrep(&cocycle, dim, EXTRACTION_SEED)?
    };
    let mut rep = ProjectiveRep { class: class.clone(), cocycle, mats, phi: Vec::new(), center: Vec::new() };
    rep.phi = compute_phi(&rep)?;
    rep.center = spec.elements().into_iter().filter(|g| rep.phi[spec.index(g)].is_identity()).collect();
    if rep.center != center_exact {
        return Err(Error::Consistency("numerical center disagrees with the class".into()));
    }
    if rep.dim() * rep.dim() * rep.center.len() != n {
        return Err(Error::Consistency("dimension formula violated".into()));
    }
    let mres = rep.multiplication_residual();
    let tres = rep.trace_residual();
    if mres > 1e-10 || tres > 1e-10 {
        return Err(Error::Consistency(format!(
            "μ-irrep residuals: multiplication {mres:.2e}, trace {tres:.2e}"
        )));
    }
    Ok(rep)
}

fn compute_phi(rep: &ProjectiveRep) -> Result<Vec<GroupElement>> {
    let spec = rep.group();
    let els = spec.elements();
    let d = rep.dim() as f64;
    // Character table of H as complex values.
    let chars: Vec<Vec<num_complex::Complex64>> = els
        .iter()
        .map(|p| els.iter().map(|g| character(p, g, spec).to_complex()).collect())
        .collect();
    let mut phi = Vec::with_capacity(els.len());
    for (hi, _) in els.iter().enumerate() {
        let wh = &rep.mats[hi];
        let comm: Vec<num_complex::Complex64> = rep
            .mats
            .iter()
            .map(|wg| linalg::trace(&(wg * wh * wg.adjoint() * wh.adjoint())) / d)
            .collect();
        let found = (0..els.len()).find(|&p| chars[p].iter().zip(&comm).all(|(a, b)| (a - b).norm() < 1e-10));
        match found {
            Some(p) => phi.push(els[p].clone()),
            None => return Err(Error::Consistency(format!("no character matches commutators of {}", els[hi]))),
        }
    }
    Ok(phi)
}

/// `φ_μ` as a list indexed like the group elements.
pub fn phi_mu(rep: &ProjectiveRep) -> Vec<GroupElement> {
    rep.phi.clone()
}

pub fn projective_center(rep: &ProjectiveRep) -> Vec<GroupElement> {
    rep.center.clone()
}

/// Lexicographically smallest representative of each coset of `H/Z^μ(H)`.
pub fn coset_representatives(rep: &ProjectiveRep) -> Vec<GroupElement> {
    let spec = rep.group();
    let mut reps: Vec<GroupElement> = Vec::new();
    for g in spec.elements() {
        if !reps.iter().any(|r| rep.center.contains(&spec.sub(&g, r))) {
            reps.push(g);
        }
    }
    reps
}

/// `{ω_g}_{g∈Q}`, orthonormal under `tr(A†B)/D` when `Q` hits every coset once.
pub fn onb_from_irrep(rep: &ProjectiveRep, q: &[GroupElement]) -> Result<Vec<CMat>> {
    let spec = rep.group();
    let d = rep.dim();
    if q.len() != d * d {
        return Err(Error::Domain(format!("need {} coset representatives, got {}", d * d, q.len())));
    }
    for (i, a) in q.iter().enumerate() {
        if !spec.contains(a) {
            return Err(Error::Domain(format!("{a} is not in H")));
        }
        for b in &q[..i] {
            if rep.center.contains(&spec.sub(a, b)) {
                return Err(Error::Domain(format!("{a} and {b} lie in the same coset")));
            }
        }
    }
    Ok(q.iter().map(|g| rep.omega(g).clone()).collect())
}

/// Normalised Gram matrix `tr(A_i† A_j)/D`.
pub fn gram(ops: &[CMat]) -> CMat {
    let d = ops.first().map_or(1, |m| m.nrows()) as f64;
    CMat::from_fn(ops.len(), ops.len(), |i, j| linalg::hs_inner(&ops[i], &ops[j]) / d)
}

/// Normalise the phases of a projective representation of an abelian group
/// (generators are the unit vectors of each factor) so its cocycle is rational.
pub fn gauge_fix_abelian(spec: &GroupSpec, mats: &[CMat]) -> Result<Vec<CMat>> {
    let m = spec.rank();
    let gens: Vec<(usize, usize)> = (0..m)
        .map(|i| {
            let mut e = vec![0; m];
            e[i] = 1 % spec.moduli()[i].max(1);
            (spec.index(&GroupElement(e)), spec.moduli()[i])
        })
        .collect();
    let words: Vec<Vec<usize>> = spec.elements().into_iter().map(|g| g.0).collect();
    cohomology::gauge_fix(mats, &gens, &words)
}

/// Cocycle of an arbitrary projective representation of an abelian group,
/// after gauge fixing.
pub fn cocycle_of_rep(spec: &GroupSpec, mats: &[CMat]) -> Result<Cocycle> {
    let fixed = gauge_fix_abelian(spec, mats)?;
    let e = spec.exponent() as u64;
    Cocycle::from_matrices(&GroupTable::abelian(spec), &fixed, e * e, 1e-8)
}

/// Class of a projective representation read off its generator commutators.
pub fn infer_class(spec: &GroupSpec, mats: &[CMat]) -> Result<CocycleClass> {
    let m = spec.rank();
    let unit = |i: usize| {
        let mut e = vec![0; m];
        e[i] = 1 % spec.moduli()[i].max(1);
        spec.index(&GroupElement(e))
    };
    let mut raw = vec![vec![0i64; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let md = gcd(spec.moduli()[i] as u64, spec.moduli()[j] as u64);
            if md == 1 {
                continue;
            }
            let (a, b) = (&mats[unit(i)], &mats[unit(j)]);
            let c = linalg::proportionality(&(a * b), &(b * a), 1e-8)
                .ok_or_else(|| Error::Consistency("generators do not commute up to phase".into()))?;
            let p = RationalPhase::from_complex(c, md, 1e-8)
                .ok_or_else(|| Error::Consistency("commutator phase off-grid".into()))?;
            raw[i][j] = (p.num() * (md / p.den())) as i64;
        }
    }
    CocycleClass::reduced(spec, &raw)
}
