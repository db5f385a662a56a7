//! Finite abelian groups `G = ∏ Z_{p^r}`, their aligned subgroups, the two
//! Euclidean-division bijections and linear characters.
//!
//! Elements are residue tuples. Everything that needs a canonical order uses
//! lexicographic order on those tuples, which coincides with the mixed-radix
//! index returned by [`GroupSpec::index`].

use crate::error::{Error, Result};
use crate::phase::RationalPhase;
use crate::proj_reps::CocycleClass;
use std::fmt;

/// Largest group order handled.
pub const MAX_ORDER: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    factors: Vec<(u64, u32)>,
    moduli: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(pub Vec<usize>);

impl GroupElement {
    pub fn residues(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl GroupSpec {
    /// `∏ Z_{p_m^{r_m}}` from `(p, r)` pairs; every `p` prime and `r ≥ 1`.
    /// The empty list is the trivial group.
    pub fn new(factors: &[(u64, u32)]) -> Result<Self> {
        for &(p, r) in factors {
            if !is_prime(p) {
                return Err(Error::Structural(format!("{p} is not prime")));
            }
            if r == 0 {
                return Err(Error::Structural("exponent must be at least 1".into()));
            }
        }
        Self::with_exponents(factors)
    }

    /// Like [`GroupSpec::new`] but allows `r = 0` (a factor of size one). Used
    /// for subgroups and quotients that keep the parent's factor layout.
    pub fn with_exponents(factors: &[(u64, u32)]) -> Result<Self> {
        let mut order: u128 = 1;
        let mut moduli = Vec::with_capacity(factors.len());
        for &(p, r) in factors {
            if !is_prime(p) {
                return Err(Error::Structural(format!("{p} is not prime")));
            }
            let m = (p as u128)
                .checked_pow(r)
                .filter(|&m| m <= MAX_ORDER as u128)
                .ok_or_else(|| Error::Structural(format!("factor {p}^{r} too large")))?;
            order *= m;
            if order > MAX_ORDER as u128 {
                return Err(Error::Structural(format!("group order exceeds {MAX_ORDER}")));
            }
            moduli.push(m as usize);
        }
        Ok(GroupSpec { factors: factors.to_vec(), moduli })
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn moduli(&self) -> &[usize] {
        &self.moduli
    }

    pub fn rank(&self) -> usize {
        self.moduli.len()
    }

    pub fn order(&self) -> usize {
        self.moduli.iter().product()
    }

    /// Least common multiple of the element orders.
    pub fn exponent(&self) -> usize {
        self.moduli
            .iter()
            .fold(1u64, |a, &m| crate::phase::lcm(a, m as u64)) as usize
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(vec![0; self.rank()])
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        g.0.len() == self.rank() && g.0.iter().zip(&self.moduli).all(|(&x, &m)| x < m)
    }

    pub fn element(&self, mut idx: usize) -> GroupElement {
        let mut r = vec![0; self.rank()];
        for m in (0..self.rank()).rev() {
            r[m] = idx % self.moduli[m];
            idx /= self.moduli[m];
        }
        GroupElement(r)
    }

    pub fn index(&self, g: &GroupElement) -> usize {
        g.0.iter().zip(&self.moduli).fold(0, |acc, (&x, &m)| acc * m + x)
    }

    /// All elements in lexicographic order.
    pub fn elements(&self) -> Vec<GroupElement> {
        (0..self.order()).map(|i| self.element(i)).collect()
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if g.0.len() != self.rank() {
            return Err(Error::Structural(format!(
                "element {g} has {} residues, group has {} factors",
                g.0.len(),
                self.rank()
            )));
        }
        if !self.contains(g) {
            return Err(Error::Domain(format!("{g} is not an element of {self}")));
        }
        Ok(())
    }

    pub fn element_from(&self, residues: &[usize]) -> Result<GroupElement> {
        let g = GroupElement(residues.to_vec());
        self.check(&g)?;
        Ok(g)
    }

    pub fn add(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement(
            a.0.iter()
                .zip(&b.0)
                .zip(&self.moduli)
                .map(|((&x, &y), &m)| (x + y) % m)
                .collect(),
        )
    }

    pub fn sub(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement(
            a.0.iter()
                .zip(&b.0)
                .zip(&self.moduli)
                .map(|((&x, &y), &m)| (x + m - y % m) % m)
                .collect(),
        )
    }

    pub fn neg(&self, a: &GroupElement) -> GroupElement {
        self.sub(&self.identity(), a)
    }

    /// Checked addition.
    pub fn try_add(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.add(a, b))
    }

    /// Multiply each residue by an integer, reducing modulo the factor.
    pub fn scale(&self, k: usize, g: &GroupElement) -> GroupElement {
        GroupElement(g.0.iter().zip(&self.moduli).map(|(&x, &m)| (x * k) % m).collect())
    }

    /// Order of an element.
    pub fn element_order(&self, g: &GroupElement) -> usize {
        g.0.iter()
            .zip(&self.moduli)
            .map(|(&x, &m)| m / crate::phase::gcd(x as u64, m as u64) as usize)
            .fold(1, |a, o| crate::phase::lcm(a as u64, o as u64) as usize)
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.moduli.is_empty() {
            return write!(f, "Z1");
        }
        for (i, m) in self.moduli.iter().enumerate() {
            if i > 0 {
                write!(f, "x")?;
            }
            write!(f, "Z{m}")?;
        }
        Ok(())
    }
}

/// `χ^q_g = exp(2πi Σ_m g_m q_m / |G_m|)` as an exact phase; symmetric in `q, g`.
pub fn character(q: &GroupElement, g: &GroupElement, spec: &GroupSpec) -> RationalPhase {
    q.0.iter()
        .zip(&g.0)
        .zip(spec.moduli())
        .map(|((&a, &b), &m)| RationalPhase::new((a * b) as i128, m as u64))
        .sum()
}

/// Which group law to use in [`SubgroupDecomposition::add`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    G,
    H,
    K,
}

/// Aligned subgroup given by exponents `r̃ ≤ r`. `H` is the set of residue
/// tuples below `|H_m| = p^{r̃_m}` with its own modular law; the actual
/// subgroup of `G` is `H̃ = |K|·H`. `K` (residues below `|K_m| = p^{r_m−r̃_m}`)
/// is a system of representatives for `G/H̃`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubgroupDecomposition {
    parent: GroupSpec,
    sub_exponents: Vec<u32>,
    h: GroupSpec,
    k: GroupSpec,
}

impl SubgroupDecomposition {
    pub fn new(parent: &GroupSpec, sub_exponents: &[u32]) -> Result<Self> {
        if sub_exponents.len() != parent.rank() {
            return Err(Error::Structural(format!(
                "subgroup exponent tuple has {} entries, group has {} factors",
                sub_exponents.len(),
                parent.rank()
            )));
        }
        let mut hf = Vec::new();
        let mut kf = Vec::new();
        for (&(p, r), &rt) in parent.factors().iter().zip(sub_exponents) {
            if rt > r {
                return Err(Error::Structural(format!("subgroup exponent {rt} exceeds {r}")));
            }
            hf.push((p, rt));
            kf.push((p, r - rt));
        }
        Ok(SubgroupDecomposition {
            parent: parent.clone(),
            sub_exponents: sub_exponents.to_vec(),
            h: GroupSpec::with_exponents(&hf)?,
            k: GroupSpec::with_exponents(&kf)?,
        })
    }

    /// `H = G`, `K` trivial.
    pub fn whole(parent: &GroupSpec) -> Self {
        let e: Vec<u32> = parent.factors().iter().map(|&(_, r)| r).collect();
        Self::new(parent, &e).expect("full exponents are valid")
    }

    /// `H` trivial, `K = G`.
    pub fn trivial(parent: &GroupSpec) -> Self {
        Self::new(parent, &vec![0; parent.rank()]).expect("zero exponents are valid")
    }

    pub fn parent(&self) -> &GroupSpec {
        &self.parent
    }

    pub fn sub_exponents(&self) -> &[u32] {
        &self.sub_exponents
    }

    /// `H` as an abstract group (same factor layout as the parent).
    pub fn h_group(&self) -> &GroupSpec {
        &self.h
    }

    /// `K ≅ G/H̃` as an abstract group.
    pub fn k_group(&self) -> &GroupSpec {
        &self.k
    }

    pub fn h_moduli(&self) -> &[usize] {
        self.h.moduli()
    }

    pub fn k_moduli(&self) -> &[usize] {
        self.k.moduli()
    }

    pub fn in_h(&self, g: &GroupElement) -> bool {
        self.h.contains(g)
    }

    pub fn in_k(&self, g: &GroupElement) -> bool {
        self.k.contains(g)
    }

    fn spec(&self, mode: Mode) -> &GroupSpec {
        match mode {
            Mode::G => &self.parent,
            Mode::H => &self.h,
            Mode::K => &self.k,
        }
    }

    /// `g1 ⊕ g2` in the selected group structure.
    pub fn add(&self, g1: &GroupElement, g2: &GroupElement, mode: Mode) -> Result<GroupElement> {
        self.spec(mode).try_add(g1, g2)
    }

    /// `g1 ⊖ g2` in the selected group structure.
    pub fn sub(&self, g1: &GroupElement, g2: &GroupElement, mode: Mode) -> Result<GroupElement> {
        let s = self.spec(mode);
        s.check(g1)?;
        s.check(g2)?;
        Ok(s.sub(g1, g2))
    }

    /// `(h(g), k(g))`: per-factor quotient and remainder by `|K_m|`.
    pub fn euclid_split(&self, g: &GroupElement) -> (GroupElement, GroupElement) {
        let km = self.k.moduli();
        (
            GroupElement(g.0.iter().zip(km).map(|(&x, &m)| x / m).collect()),
            GroupElement(g.0.iter().zip(km).map(|(&x, &m)| x % m).collect()),
        )
    }

    pub fn h_of(&self, g: &GroupElement) -> GroupElement {
        self.euclid_split(g).0
    }

    pub fn k_of(&self, g: &GroupElement) -> GroupElement {
        self.euclid_split(g).1
    }

    /// `(ĥ(g), k̂(g))`: per-factor remainder and quotient by `|H_m|`.
    pub fn hat_split(&self, g: &GroupElement) -> (GroupElement, GroupElement) {
        let hm = self.h.moduli();
        (
            GroupElement(g.0.iter().zip(hm).map(|(&x, &m)| x % m).collect()),
            GroupElement(g.0.iter().zip(hm).map(|(&x, &m)| x / m).collect()),
        )
    }

    /// `|K|·h`, the image of `h ∈ H` in `H̃ ≤ G`.
    pub fn embed_h(&self, h: &GroupElement) -> GroupElement {
        GroupElement(h.0.iter().zip(self.k.moduli()).map(|(&x, &m)| x * m).collect())
    }

    /// `|H|·k ∈ K̃`.
    pub fn embed_k_hat(&self, k: &GroupElement) -> GroupElement {
        GroupElement(k.0.iter().zip(self.h.moduli()).map(|(&x, &m)| x * m).collect())
    }

    /// Inverse of the bijection `g ↦ (h(g), k(g))`.
    pub fn compose(&self, h: &GroupElement, k: &GroupElement) -> GroupElement {
        self.parent.add(&self.embed_h(h), k)
    }

    /// Label `|K|·p ∈ G` of the `G`-character restricting to `χ̃^p` on `H`.
    pub fn subgroup_character_embed(&self, p: &GroupElement) -> Result<GroupElement> {
        self.h.check(p)?;
        Ok(self.embed_h(p))
    }

    /// The subgroup `H̃ = |K|·H ≤ G`, lexicographically ordered.
    pub fn h_tilde(&self) -> Vec<GroupElement> {
        let mut v: Vec<GroupElement> = self.h.elements().iter().map(|h| self.embed_h(h)).collect();
        v.sort();
        v
    }
}

impl fmt::Display for SubgroupDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H[")?;
        for (i, (m, k)) in self.h.moduli().iter().zip(self.k.moduli()).enumerate() {
            if i > 0 {
                write!(f, "x")?;
            }
            if *k > 1 {
                write!(f, "{k}")?;
            }
            write!(f, "Z{m}")?;
        }
        write!(f, "]")
    }
}

/// A phase: aligned subgroup `H` plus a cohomology class of `H`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseLabel {
    pub subgroup: SubgroupDecomposition,
    pub class: CocycleClass,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mu={}", self.subgroup, self.class)
    }
}

/// All aligned subgroups (every `r̃ ≤ r`, lexicographic in `r̃`) and, for each,
/// every cohomology class of `H`.
pub fn enumerate_phase_labels(spec: &GroupSpec) -> Vec<PhaseLabel> {
    let ranges: Vec<u32> = spec.factors().iter().map(|&(_, r)| r + 1).collect();
    let total: usize = ranges.iter().map(|&r| r as usize).product();
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rest = idx;
        let mut e = vec![0u32; ranges.len()];
        for m in (0..ranges.len()).rev() {
            e[m] = (rest % ranges[m] as usize) as u32;
            rest /= ranges[m] as usize;
        }
        let sub = SubgroupDecomposition::new(spec, &e).expect("exponents within range");
        for class in CocycleClass::all(sub.h_group()) {
            out.push(PhaseLabel { subgroup: sub.clone(), class });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z4z2() -> GroupSpec {
        GroupSpec::new(&[(2, 2), (2, 1)]).unwrap()
    }

    fn el(v: &[usize]) -> GroupElement {
        GroupElement(v.to_vec())
    }

    #[test]
    fn parent_addition() {
        let g = z4z2();
        assert_eq!(g.try_add(&el(&[3, 1]), &el(&[2, 1])).unwrap(), el(&[1, 0]));
        assert_eq!(g.add(&el(&[3, 1]), &g.identity()), el(&[3, 1]));
    }

    #[test]
    fn subgroup_addition() {
        let s = SubgroupDecomposition::new(&z4z2(), &[1, 1]).unwrap();
        assert_eq!(s.add(&el(&[1, 1]), &el(&[1, 0]), Mode::H).unwrap(), el(&[0, 1]));
        assert!(matches!(s.add(&el(&[2, 0]), &el(&[1, 0]), Mode::H), Err(Error::Domain(_))));
        assert!(matches!(s.add(&el(&[1]), &el(&[1, 0]), Mode::G), Err(Error::Structural(_))));
    }

    #[test]
    fn splits_of_example_element() {
        let s = SubgroupDecomposition::new(&z4z2(), &[1, 1]).unwrap();
        assert_eq!(s.euclid_split(&el(&[3, 1])), (el(&[1, 1]), el(&[1, 0])));
        assert_eq!(s.hat_split(&el(&[3, 1])), (el(&[1, 1]), el(&[1, 0])));
        assert_eq!(s.euclid_split(&el(&[0, 0])), (el(&[0, 0]), el(&[0, 0])));
    }

    #[test]
    fn character_values() {
        let g = z4z2();
        assert_eq!(character(&el(&[1, 0]), &el(&[1, 0]), &g), RationalPhase::new(1, 4));
        assert!(character(&g.identity(), &el(&[3, 1]), &g).is_zero());
    }

    #[test]
    fn embed_character_label() {
        let s = SubgroupDecomposition::new(&z4z2(), &[1, 1]).unwrap();
        assert_eq!(s.subgroup_character_embed(&el(&[1, 0])).unwrap(), el(&[2, 0]));
        assert_eq!(s.subgroup_character_embed(&el(&[0, 0])).unwrap(), el(&[0, 0]));
        assert!(s.subgroup_character_embed(&el(&[2, 0])).is_err());
    }

    #[test]
    fn index_is_lexicographic() {
        let g = z4z2();
        let els = g.elements();
        assert!(els.windows(2).all(|w| w[0] < w[1]));
        for (i, e) in els.iter().enumerate() {
            assert_eq!(g.index(e), i);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GroupSpec::new(&[(4, 1)]).is_err());
        assert!(GroupSpec::new(&[(2, 0)]).is_err());
        assert!(GroupSpec::new(&[(2, 21)]).is_err());
        assert_eq!(GroupSpec::new(&[]).unwrap().order(), 1);
    }
}
