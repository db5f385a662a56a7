//! Multiplication tables, 2-cocycles with exact rational values, and an exact
//! coboundary solver. Works for any finite group given by its table, so the
//! same code serves the abelian groups and the dihedral group of order 8.

use crate::error::{Error, Result};
use crate::group_core::GroupSpec;
use crate::linalg::{self, CMat};
use crate::phase::{lcm, RationalPhase};

/// Finite group as a Cayley table over element indices `0..order`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupTable {
    order: usize,
    identity: usize,
    mult: Vec<usize>,
    inverse: Vec<usize>,
}

impl GroupTable {
    /// Build from a multiplication closure; validates the group axioms.
    pub fn from_fn<F: Fn(usize, usize) -> usize>(order: usize, f: F) -> Result<Self> {
        let mut mult = vec![0; order * order];
        for a in 0..order {
            for b in 0..order {
                let c = f(a, b);
                if c >= order {
                    return Err(Error::Structural("product outside the group".into()));
                }
                mult[a * order + b] = c;
            }
        }
        let identity = (0..order)
            .find(|&e| (0..order).all(|a| mult[e * order + a] == a && mult[a * order + e] == a))
            .ok_or_else(|| Error::Structural("no identity element".into()))?;
        let mut inverse = vec![0; order];
        for a in 0..order {
            inverse[a] = (0..order)
                .find(|&b| mult[a * order + b] == identity)
                .ok_or_else(|| Error::Structural("element without inverse".into()))?;
        }
        for a in 0..order {
            for b in 0..order {
                for c in 0..order {
                    let l = mult[mult[a * order + b] * order + c];
                    let r = mult[a * order + mult[b * order + c]];
                    if l != r {
                        return Err(Error::Structural("table is not associative".into()));
                    }
                }
            }
        }
        Ok(GroupTable { order, identity, mult, inverse })
    }

    /// Table of an abelian group in lexicographic element order.
    pub fn abelian(spec: &GroupSpec) -> Self {
        let n = spec.order();
        let els = spec.elements();
        let mut mult = vec![0; n * n];
        for a in 0..n {
            for b in 0..n {
                mult[a * n + b] = spec.index(&spec.add(&els[a], &els[b]));
            }
        }
        let inverse = (0..n).map(|a| spec.index(&spec.neg(&els[a]))).collect();
        GroupTable { order: n, identity: 0, mult, inverse }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mult[a * self.order + b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|a| (0..self.order).all(|b| self.mul(a, b) == self.mul(b, a)))
    }
}

/// A 2-cocycle `γ(g,h) = e^{2πi·value}` on a table, stored exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cocycle {
    table: GroupTable,
    values: Vec<RationalPhase>,
}

impl Cocycle {
    pub fn from_fn<F: Fn(usize, usize) -> RationalPhase>(table: &GroupTable, f: F) -> Self {
        let n = table.order();
        let mut values = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                values.push(f(a, b));
            }
        }
        Cocycle { table: table.clone(), values }
    }

    pub fn trivial(table: &GroupTable) -> Self {
        Self::from_fn(table, |_, _| RationalPhase::ZERO)
    }

    /// Coboundary `γ(g,h) = ν(gh) − ν(g) − ν(h)`.
    pub fn coboundary(table: &GroupTable, nu: &[RationalPhase]) -> Self {
        Self::from_fn(table, |a, b| nu[table.mul(a, b)] - nu[a] - nu[b])
    }

    /// Read the cocycle off a projective representation: `ω_g ω_h = γ(g,h) ω_{gh}`.
    /// Values are snapped to multiples of `1/den`; fails if a product is not
    /// proportional to the expected matrix or the phase is off-grid.
    pub fn from_matrices(table: &GroupTable, mats: &[CMat], den: u64, tol: f64) -> Result<Self> {
        let n = table.order();
        if mats.len() != n {
            return Err(Error::Shape(format!("{} matrices for a group of order {n}", mats.len())));
        }
        let mut values = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let prod = &mats[a] * &mats[b];
                let c = linalg::proportionality(&prod, &mats[table.mul(a, b)], tol).ok_or_else(|| {
                    Error::Consistency(format!("ω_{a}ω_{b} is not proportional to ω_(ab)"))
                })?;
                let p = RationalPhase::from_complex(c, den, tol)
                    .ok_or_else(|| Error::Consistency(format!("cocycle value {c} not on the 1/{den} grid")))?;
                values.push(p);
            }
        }
        Ok(Cocycle { table: table.clone(), values })
    }

    pub fn table(&self) -> &GroupTable {
        &self.table
    }

    pub fn eval(&self, a: usize, b: usize) -> RationalPhase {
        self.values[a * self.table.order() + b]
    }

    /// Pointwise `γ₁/γ₂`.
    pub fn ratio(&self, other: &Cocycle) -> Result<Cocycle> {
        if self.table != other.table {
            return Err(Error::Structural("cocycles live on different groups".into()));
        }
        Ok(Cocycle {
            table: self.table.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect(),
        })
    }

    /// Pointwise product.
    pub fn product(&self, other: &Cocycle) -> Result<Cocycle> {
        if self.table != other.table {
            return Err(Error::Structural("cocycles live on different groups".into()));
        }
        Ok(Cocycle {
            table: self.table.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect(),
        })
    }

    /// `γ(g,h)γ(gh,k) = γ(h,k)γ(g,hk)` for every triple.
    pub fn satisfies_cocycle_condition(&self) -> bool {
        let t = &self.table;
        let n = t.order();
        (0..n).all(|g| {
            (0..n).all(|h| {
                (0..n).all(|k| {
                    self.eval(g, h) + self.eval(t.mul(g, h), k) == self.eval(h, k) + self.eval(g, t.mul(h, k))
                })
            })
        })
    }

    /// Common denominator of all values.
    pub fn denominator(&self) -> u64 {
        self.values.iter().fold(1, |a, v| lcm(a, v.den()))
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }
}

/// Decide whether `γ` is a coboundary by solving
/// `ν(gh) − ν(g) − ν(h) ≡ γ(g,h)` exactly. Any real solution can be shifted to
/// one with values in `(1/(N·|G|))Z`, `N` the denominator of `γ`, so the system
/// is solved over `Z/(N·|G|)` by unimodular elimination. The returned witness
/// is re-checked against every equation.
pub fn cocycle_is_trivial(gamma: &Cocycle) -> (bool, Option<Vec<RationalPhase>>) {
    let t = gamma.table();
    let n = t.order();
    let modulus = gamma.denominator() as i128 * n as i128;
    let mut rows: Vec<Vec<i128>> = Vec::with_capacity(n * n);
    let mut rhs: Vec<i128> = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let mut row = vec![0i128; n];
            row[t.mul(a, b)] += 1;
            row[a] -= 1;
            row[b] -= 1;
            for x in row.iter_mut() {
                *x = x.rem_euclid(modulus);
            }
            let v = gamma.eval(a, b);
            rows.push(row);
            rhs.push((v.num() as i128 * (modulus / v.den() as i128)).rem_euclid(modulus));
        }
    }
    let Some(sol) = solve_mod(rows, rhs, n, modulus) else {
        return (false, None);
    };
    let nu: Vec<RationalPhase> = sol.iter().map(|&x| RationalPhase::new(x, modulus as u64)).collect();
    let check = Cocycle::coboundary(t, &nu);
    if check.values != gamma.values {
        return (false, None);
    }
    (true, Some(nu))
}

fn xgcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = xgcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// Solve `A x ≡ b (mod m)` with `A` given as rows of length `ncols`: solve
/// modulo each prime power of `m` and glue with the CRT.
fn solve_mod(a: Vec<Vec<i128>>, b: Vec<i128>, ncols: usize, m: i128) -> Option<Vec<i128>> {
    let mut x = vec![0i128; ncols];
    let mut done = 1i128;
    for (p, q) in prime_powers(m) {
        let y = solve_prime_power(&a, &b, ncols, p, q)?;
        let (_, inv, _) = xgcd(done.rem_euclid(q), q);
        for (xi, yi) in x.iter_mut().zip(y) {
            let t = ((yi - *xi).rem_euclid(q) * inv.rem_euclid(q)).rem_euclid(q);
            *xi += done * t;
        }
        done *= q;
    }
    Some(x)
}

fn prime_powers(mut m: i128) -> Vec<(i128, i128)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            let mut q = 1;
            while m % p == 0 {
                m /= p;
                q *= p;
            }
            out.push((p, q));
        }
        p += 1;
    }
    if m > 1 {
        out.push((m, m));
    }
    out
}

/// Gaussian elimination over the local ring `Z/p^k`: pivot on an entry of
/// least `p`-valuation, which then divides everything left in the block.
fn solve_prime_power(a: &[Vec<i128>], b: &[i128], ncols: usize, p: i128, q: i128) -> Option<Vec<i128>> {
    let md = |x: i128| x.rem_euclid(q);
    let val = |mut x: i128| {
        let mut v = 0u32;
        while x % p == 0 {
            x /= p;
            v += 1;
        }
        v
    };
    let mut a: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&x| md(x)).collect()).collect();
    let mut b: Vec<i128> = b.iter().map(|&x| md(x)).collect();
    let nrows = a.len();
    let mut cols: Vec<usize> = (0..ncols).collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    while rank < nrows.min(ncols) {
        let mut best: Option<(u32, usize, usize)> = None;
        'search: for (i, row) in a.iter().enumerate().skip(rank) {
            for (j, &x) in row.iter().enumerate().skip(rank) {
                if x != 0 {
                    let v = val(x);
                    if best.is_none_or(|(bv, _, _)| v < bv) {
                        best = Some((v, i, j));
                        if v == 0 {
                            break 'search;
                        }
                    }
                }
            }
        }
        let Some((v, pi, pj)) = best else { break };
        a.swap(rank, pi);
        b.swap(rank, pi);
        for row in a.iter_mut() {
            row.swap(rank, pj);
        }
        cols.swap(rank, pj);
        let pv = p.pow(v);
        let (_, uinv, _) = xgcd(a[rank][rank] / pv, q);
        let uinv = md(uinv);
        let (head, tail) = a.split_at_mut(rank + 1);
        let prow = &head[rank];
        for (off, row) in tail.iter_mut().enumerate() {
            let x = row[rank];
            if x == 0 {
                continue;
            }
            let f = md(x / pv * uinv);
            for j in rank..ncols {
                row[j] = md(row[j] - f * prow[j]);
            }
            let i = rank + 1 + off;
            b[i] = md(b[i] - f * b[rank]);
        }
        pivots.push((pv, uinv));
        rank += 1;
    }
    if b.iter().skip(rank).any(|&x| x != 0) {
        return None;
    }
    let mut y = vec![0i128; ncols];
    for k in (0..rank).rev() {
        let rhs = md(b[k] - (k + 1..ncols).fold(0, |acc, j| md(acc + a[k][j] * y[j])));
        let (pv, uinv) = pivots[k];
        if rhs % pv != 0 {
            return None;
        }
        y[k] = md(rhs / pv * uinv);
    }
    let mut x = vec![0i128; ncols];
    for (k, &c) in cols.iter().enumerate() {
        x[c] = y[k];
    }
    Some(x)
}

/// Twisted left-regular representation `ω̃_g|x⟩ = γ(g,x)|gx⟩`.
pub fn twisted_regular(gamma: &Cocycle) -> Vec<CMat> {
    let t = gamma.table();
    let n = t.order();
    (0..n)
        .map(|g| {
            let mut m = linalg::zeros(n, n);
            for x in 0..n {
                m[(t.mul(g, x), x)] = gamma.eval(g, x).to_complex();
            }
            m
        })
        .collect()
}

/// Extract one irreducible block of dimension `dim` from the twisted regular
/// representation. A random Hermitian element of the commutant (spanned by the
/// twisted right-regular operators `|x⟩ ↦ γ(x,k)|xk⟩`) is diagonalised; for a
/// generic element each eigenspace is an irreducible invariant subspace.
pub fn extract_irrep(gamma: &Cocycle, dim: usize, seed: u64) -> Result<Vec<CMat>> {
    use rand::{Rng, SeedableRng};
    let t = gamma.table();
    let n = t.order();
    let left = twisted_regular(gamma);
    let right: Vec<CMat> = (0..n)
        .map(|k| {
            let mut m = linalg::zeros(n, n);
            for x in 0..n {
                m[(t.mul(x, k), x)] = gamma.eval(x, k).to_complex();
            }
            m
        })
        .collect();
    for attempt in 0..8u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut c = linalg::zeros(n, n);
        for r in &right {
            let z = num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            c += r.map(|v| v * z);
        }
        let herm = &c + c.adjoint();
        let (vals, vecs) = linalg::eigh(&herm);
        let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let cluster = vals.iter().take_while(|&&v| (v - vals[0]).abs() < 1e-7 * scale).count();
        if cluster != dim || (n > dim && (vals[dim] - vals[dim - 1]).abs() < 1e-4 * scale) {
            continue;
        }
        let basis = vecs.columns(0, dim).into_owned();
        let block: Vec<CMat> = left.iter().map(|w| basis.adjoint() * w * &basis).collect();
        if block.iter().all(|m| linalg::unitarity_residual(m) < 1e-10) {
            return Ok(block);
        }
    }
    Err(Error::Consistency(format!("could not isolate an irreducible block of dimension {dim}")))
}

/// Rescale a projective representation so its cocycle takes values on a finite
/// grid: each generator is normalised to `w^{order} = 𝟙` and every element is
/// rebuilt as the ordered word `w_1^{e_1}…w_k^{e_k}` given in `words`.
pub fn gauge_fix(mats: &[CMat], generators: &[(usize, usize)], words: &[Vec<usize>]) -> Result<Vec<CMat>> {
    let dim = mats.first().map_or(1, |m| m.nrows());
    let mut gens = Vec::with_capacity(generators.len());
    for &(idx, ord) in generators {
        let w = &mats[idx];
        let p = linalg::mat_pow(w, ord);
        let c = linalg::proportionality(&p, &linalg::identity(dim), 1e-9)
            .ok_or_else(|| Error::Consistency("generator power is not scalar".into()))?;
        let root = num_complex::Complex64::from_polar(c.norm().powf(1.0 / ord as f64), c.arg() / ord as f64);
        gens.push(w.map(|z| z / root));
    }
    Ok(words
        .iter()
        .map(|word| {
            let mut acc = linalg::identity(dim);
            for (g, &e) in gens.iter().zip(word) {
                acc = &acc * linalg::mat_pow(g, e);
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_cocycles_are_trivial() {
        let spec = GroupSpec::new(&[(2, 2)]).unwrap();
        let t = GroupTable::abelian(&spec);
        // Carry cocycle of Z4 → Z: γ(a,b) = (a + b ≥ 4)/4, a coboundary over U(1).
        let g = Cocycle::from_fn(&t, |a, b| RationalPhase::new(i128::from(a + b >= 4), 4));
        assert!(g.satisfies_cocycle_condition());
        let (triv, nu) = cocycle_is_trivial(&g);
        assert!(triv);
        assert_eq!(Cocycle::coboundary(&t, &nu.unwrap()), g);
    }

    #[test]
    fn solver_rejects_inconsistent_system() {
        let rows = vec![vec![2i128], vec![0]];
        assert!(solve_mod(rows, vec![1, 0], 1, 4).is_none());
        let rows = vec![vec![2i128]];
        let x = solve_mod(rows, vec![2], 1, 4).unwrap();
        assert_eq!((2 * x[0]).rem_euclid(4), 2);
    }

    #[test]
    fn table_validation() {
        assert!(GroupTable::from_fn(3, |a, b| (a + b) % 3).is_ok());
        assert!(GroupTable::from_fn(3, |a, _| a).is_err());
    }
}
