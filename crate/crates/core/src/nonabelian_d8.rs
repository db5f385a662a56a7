//! The dihedral group of order eight: its tables, the obstruction to symmetric
//! LOCC conversion, and the two join-and-measure protocols (SPT ring and GHZ
//! under the regular representation) with their swap-based error pairing.

use crate::cohomology::{cocycle_is_trivial, extract_irrep, Cocycle, GroupTable};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, ONE, ZERO};
use crate::par;
use crate::phase::RationalPhase;
use crate::sim_engine::{self, check_budget, DenseState, Mode, PRUNE};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

pub const TOL: f64 = 1e-10;
/// Fidelity every corrected branch must reach.
pub const FIDELITY_TOL: f64 = 1e-9;
/// Cap on `(#round-one outcome tuples) × (#amplitudes)` for exhaustive runs.
pub const ENUMERATION_WORK: u128 = 1 << 28;

/// `r^a s^b` is stored at index `a + 4b`.
pub fn element(a: usize, b: usize) -> usize {
    (a % 4) + 4 * (b % 2)
}

pub fn split(g: usize) -> (usize, usize) {
    (g % 4, g / 4)
}

/// `(r^a s^b)(r^c s^e) = r^{a + (-1)^b c} s^{b+e}`.
pub fn d8_mul(x: usize, y: usize) -> usize {
    let (a, b) = split(x);
    let (c, e) = split(y);
    let rot = if b == 0 { a + c } else { a + 4 - c };
    element(rot, b + e)
}

pub fn word(g: usize) -> &'static str {
    ["e", "r", "r2", "r3", "s", "rs", "r2s", "r3s"][g]
}

/// Conjugacy class index: `{e}, {r²}, {r, r³}, {s, r²s}, {rs, r³s}`.
pub fn conjugacy_class(g: usize) -> usize {
    match split(g) {
        (0, 0) => 0,
        (2, 0) => 1,
        (_, 0) => 2,
        (a, _) if a % 2 == 0 => 3,
        _ => 4,
    }
}

/// Value of the real 1D irrep `i` on `g`: `χ(r) ∈ {1,1,-1,-1}`, `χ(s) ∈ {1,-1,1,-1}`.
pub fn chi(i: usize, g: usize) -> f64 {
    let (a, b) = split(g);
    let r = [1.0, 1.0, -1.0, -1.0][i];
    let s = [1.0, -1.0, 1.0, -1.0][i];
    f64::powi(r, a as i32) * f64::powi(s, b as i32)
}

/// The data of the group: table, 1D irreps, the 2D linear irrep and a
/// projective irrep `ω` in the nontrivial class, rotated so that
/// `Φ⁻ = (𝟙⊗Z)Φ⁺` spans the `χ^{(1)}` line of `ω⊗ω*`.
#[derive(Clone, Debug)]
pub struct D8Tables {
    pub table: GroupTable,
    pub chars: [[f64; 8]; 4],
    pub u4: Vec<CMat>,
    pub omega: Vec<CMat>,
    pub cocycle: Cocycle,
}

/// Residuals of the structural checks run on construction.
#[derive(Clone, Debug)]
pub struct TableReport {
    pub char_hom: f64,
    pub u4_hom: f64,
    pub u4_class_pattern: bool,
    /// Multiplicity of each `χ^{(i)}` in `U⁽⁴⁾⊗U⁽⁴⁾`.
    pub tensor_square: [f64; 4],
    pub omega_cocycle: f64,
    pub omega_nontrivial: bool,
    /// Invariance of `Φ⁺` (χ⁰), `Φ⁻` (χ¹) and the `Ψ^±` plane under `ω⊗ω*`.
    pub decomposition: f64,
    /// `|tr(ω⊗ω*|_Ψ) − χ_{U⁽⁴⁾}|`.
    pub psi_character: f64,
}

impl TableReport {
    pub fn pass(&self) -> bool {
        self.char_hom < TOL
            && self.u4_hom < TOL
            && self.u4_class_pattern
            && self.tensor_square.iter().all(|m| (m - 1.0).abs() < TOL)
            && self.omega_cocycle < TOL
            && self.omega_nontrivial
            && self.decomposition < TOL
            && self.psi_character < TOL
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn phi_plus() -> CVec {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![c(h), ZERO, ZERO, c(h)]
}

fn phi_minus() -> CVec {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![c(h), ZERO, ZERO, c(-h)]
}

fn psi(sign: f64) -> CVec {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![ZERO, c(h), c(sign * h), ZERO]
}

/// `𝟙₂ ⊗ Z` on an `(L, R)` site.
pub fn z_right() -> CMat {
    linalg::kron(&linalg::identity(2), &linalg::pauli_z())
}

pub fn z_left() -> CMat {
    linalg::kron(&linalg::pauli_z(), &linalg::identity(2))
}

fn isotypic_projector(us: &[CMat], i: usize) -> CMat {
    let n = us[0].nrows();
    let mut p = linalg::zeros(n, n);
    for (g, u) in us.iter().enumerate() {
        p += u * c(chi(i, g) / 8.0);
    }
    p
}

fn vec_residual(us: &[CMat], v: &[Complex64], character: impl Fn(usize) -> f64) -> f64 {
    us.iter()
        .enumerate()
        .map(|(g, u)| {
            let w = linalg::mat_vec(u, v);
            w.iter().zip(v).map(|(a, b)| (a - b * character(g)).norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn build_tables() -> Result<D8Tables> {
    let table = GroupTable::from_fn(8, d8_mul)?;
    let mut chars = [[0.0; 8]; 4];
    for (i, row) in chars.iter_mut().enumerate() {
        for (g, x) in row.iter_mut().enumerate() {
            *x = chi(i, g);
        }
    }
    let rot = linalg::from_real(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let refl = linalg::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let u4 = (0..8)
        .map(|g| {
            let (a, b) = split(g);
            linalg::mat_pow(&rot, a) * linalg::mat_pow(&refl, b)
        })
        .collect();

    // γ(r^a s^b, r^c s^e) = exp(2πi·bc/4)
    let cocycle = Cocycle::from_fn(&table, |x, y| RationalPhase::new((split(x).1 * split(y).0) as i128, 4));
    if !cocycle.satisfies_cocycle_condition() {
        return Err(Error::Consistency("D8 cocycle fails the cocycle condition".into()));
    }
    let raw = extract_irrep(&cocycle, 2, 0x0d8)?;

    let pair: Vec<CMat> = raw.iter().map(|o| linalg::kron(o, &o.map(|z| z.conj()))).collect();
    let p1 = isotypic_projector(&pair, 1);
    let (_, vecs) = linalg::eigh(&((&p1 + p1.adjoint()) * c(0.5)));
    let top = vecs.column(3);
    let m = CMat::from_fn(2, 2, |i, j| top[2 * i + j]);
    let mut herm = (&m + m.adjoint()) * c(0.5);
    if linalg::max_abs(&herm) < 1e-8 {
        herm = (&m - m.adjoint()) * Complex64::new(0.0, 0.5);
    }
    let (_, w) = linalg::eigh(&herm);
    let w = CMat::from_fn(2, 2, |i, j| w[(i, 1 - j)]);
    let omega = raw.iter().map(|o| w.adjoint() * o * &w).collect();

    let tables = D8Tables { table, chars, u4, omega, cocycle };
    let report = tables.report();
    if !report.pass() {
        return Err(Error::Consistency(format!("D8 tables failed verification: {report:?}")));
    }
    Ok(tables)
}

/// Shared, verified tables.
pub fn d8_tables() -> Result<&'static D8Tables> {
    static CELL: OnceLock<std::result::Result<D8Tables, String>> = OnceLock::new();
    CELL.get_or_init(|| build_tables().map_err(|e| e.to_string()))
        .as_ref()
        .map_err(|e| Error::Consistency(e.clone()))
}

impl D8Tables {
    /// `U_g = ω_g ⊗ ω*_g` on an `(L, R)` site.
    pub fn spt_symmetry(&self) -> Vec<CMat> {
        self.omega.iter().map(|o| linalg::kron(o, &o.map(|z| z.conj()))).collect()
    }

    /// Left regular representation on `C⁸`.
    pub fn regular(&self) -> Vec<CMat> {
        (0..8)
            .map(|g| {
                let mut m = linalg::zeros(8, 8);
                for h in 0..8 {
                    m[(d8_mul(g, h), h)] = ONE;
                }
                m
            })
            .collect()
    }

    pub fn report(&self) -> TableReport {
        let mut char_hom = 0.0f64;
        let mut u4_hom = 0.0f64;
        let mut omega_cocycle = 0.0f64;
        for g in 0..8 {
            for h in 0..8 {
                let gh = self.table.mul(g, h);
                for row in &self.chars {
                    char_hom = char_hom.max((row[g] * row[h] - row[gh]).abs());
                }
                u4_hom = u4_hom.max(linalg::max_diff(&(&self.u4[g] * &self.u4[h]), &self.u4[gh]));
                let lhs = &self.omega[g] * &self.omega[h];
                let rhs = &self.omega[gh] * self.cocycle.eval(g, h).to_complex();
                omega_cocycle = omega_cocycle.max(linalg::max_diff(&lhs, &rhs));
            }
        }
        let pattern = [2.0, -2.0, 0.0, 0.0, 0.0];
        let u4_class_pattern =
            (0..8).all(|g| (linalg::trace(&self.u4[g]) - c(pattern[conjugacy_class(g)])).norm() < TOL);
        let mut tensor_square = [0.0; 4];
        for (i, m) in tensor_square.iter_mut().enumerate() {
            *m = (0..8).map(|g| linalg::trace(&self.u4[g]).re.powi(2) * chi(i, g)).sum::<f64>() / 8.0;
        }
        let us = self.spt_symmetry();
        let pp = phi_plus();
        let pm = phi_minus();
        let mut decomposition = vec_residual(&us, &pp, |_| 1.0).max(vec_residual(&us, &pm, |g| chi(1, g)));
        let psis = [psi(1.0), psi(-1.0)];
        let basis = CMat::from_fn(4, 2, |i, j| psis[j][i]);
        let mut psi_character = 0.0f64;
        for (g, u) in us.iter().enumerate() {
            let r = basis.adjoint() * u * &basis;
            let leak = u * &basis - &basis * &r;
            decomposition = decomposition.max(linalg::max_abs(&leak));
            psi_character = psi_character.max((linalg::trace(&r) - linalg::trace(&self.u4[g])).norm());
        }
        TableReport {
            char_hom,
            u4_hom,
            u4_class_pattern,
            tensor_square,
            omega_cocycle,
            omega_nontrivial: !cocycle_is_trivial(&self.cocycle).0,
            decomposition,
            psi_character,
        }
    }
}

/// True iff the algebra generated by `{ω_g ⊗ ω*_g}` is non-commutative.
pub fn locc_obstruction_check(omega: &[CMat]) -> bool {
    let pair: Vec<CMat> = omega.iter().map(|o| linalg::kron(o, &o.map(|z| z.conj()))).collect();
    let mut worst = 0.0f64;
    for (i, a) in pair.iter().enumerate() {
        for b in &pair[i + 1..] {
            worst = worst.max(linalg::commutator_norm(a, b));
        }
    }
    worst > 1e-8
}

// ---------------------------------------------------------------------------
// SPT ring

/// `⊗_i |Φ⁺⟩_{R_i, L_{i+1}}` on a ring of `(L, R)` sites of dimension 4.
pub fn spt_state(n: usize) -> Result<DenseState> {
    if n == 0 {
        return Err(Error::Domain("ring needs at least one site".into()));
    }
    check_budget(1u128 << (2 * n))?;
    let mut amps = vec![ZERO; 1 << (2 * n)];
    let v = c(f64::powi(0.5, n as i32).sqrt());
    // bits b_i = R_{i-1} = L_i
    for bits in 0..(1usize << n) {
        let mut idx = 0;
        for i in 0..n {
            let l = (bits >> i) & 1;
            let r = (bits >> ((i + 1) % n)) & 1;
            idx = idx * 4 + 2 * l + r;
        }
        amps[idx] = v;
    }
    DenseState::new(vec![4; n], amps)
}

/// `{P₀, P₁, P_f}` on one `(L, R)` site.
pub fn spt_measurement() -> Vec<CMat> {
    let pf = linalg::projector(&psi(1.0)) + linalg::projector(&psi(-1.0));
    vec![linalg::projector(&phi_plus()), linalg::projector(&phi_minus()), pf]
}

/// Residuals of the symmetry and the five local relations of the SPT measurement.
#[derive(Clone, Debug)]
pub struct SptRelations {
    pub commute: f64,
    pub completeness: f64,
    pub phi_minus: f64,
    pub transfer: f64,
    pub anti: f64,
    pub pf_commute: f64,
    pub quasi: f64,
}

impl SptRelations {
    pub fn max(&self) -> f64 {
        [self.commute, self.completeness, self.phi_minus, self.transfer, self.anti, self.pf_commute, self.quasi]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn spt_relations(t: &D8Tables) -> SptRelations {
    let fam = spt_measurement();
    let us = t.spt_symmetry();
    let commute = fam
        .iter()
        .flat_map(|p| us.iter().map(move |u| linalg::commutator_norm(p, u)))
        .fold(0.0, f64::max);
    let sum = fam.iter().fold(linalg::zeros(4, 4), |acc, p| acc + p);
    let zr = z_right();
    let zl = z_left();
    let pp = phi_plus();
    let diff = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let pf = &fam[2];
    let quasi = us
        .iter()
        .map(|u| match linalg::proportionality(&(u * &zr), &(&zr * u), TOL) {
            Some(k) => (k.norm() - 1.0).abs(),
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    SptRelations {
        commute,
        completeness: linalg::max_diff(&sum, &linalg::identity(4)),
        phi_minus: diff(&phi_minus(), &linalg::mat_vec(&zr, &pp)),
        transfer: diff(&linalg::mat_vec(&zr, &pp), &linalg::mat_vec(&zl, &pp)),
        anti: linalg::max_abs(&(pf * &zr + pf * &zl)),
        pf_commute: linalg::commutator_norm(pf, &zr),
        quasi,
    }
}

/// Normalised `P_f^{⊗f}|SPT_f⟩`.
pub fn spt_error_state(f: usize) -> Result<DenseState> {
    let mut s = spt_state(f)?;
    let pf = &spt_measurement()[2];
    for i in 0..f {
        s.apply_local(pf, &[i])?;
    }
    if s.norm() < PRUNE {
        return Err(Error::Degenerate(format!("error state on {f} sites vanishes")));
    }
    s.normalized()
}

/// `(|0110⟩^{⊗f/2} + |1001⟩^{⊗f/2})/√2` with sites in ring order.
pub fn paired_ghz_reference(f: usize) -> Result<DenseState> {
    if f == 0 || f % 2 == 1 {
        return Err(Error::Domain("reference needs an even, positive number of sites".into()));
    }
    check_budget(1u128 << (2 * f))?;
    let mut amps = vec![ZERO; 1 << (2 * f)];
    for x in 0..2 {
        let mut idx = 0;
        for i in 0..f {
            // site (x, 1-x) on even positions, (1-x, x) on odd ones
            let l = (x + i) % 2;
            idx = idx * 4 + 2 * l + (1 - l);
        }
        amps[idx] = c(std::f64::consts::FRAC_1_SQRT_2);
    }
    DenseState::new(vec![4; f], amps)
}

fn pair_ket(bits: usize) -> CVec {
    let mut v = vec![ZERO; 16];
    v[bits] = ONE;
    v
}

/// `η₀ ∝ |0110⟩ + |1001⟩`, `η₁ ∝ |0110⟩ − |1001⟩`.
pub fn eta(k: usize) -> CVec {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let s = if k == 0 { 1.0 } else { -1.0 };
    let a = pair_ket(0b0110);
    let b = pair_ket(0b1001);
    a.iter().zip(&b).map(|(x, y)| (x + y * s) * h).collect()
}

/// `{|η₀⟩⟨η₀|, |η₁⟩⟨η₁|, P⊥}` on two adjacent `(L, R)` sites.
pub fn eta_measurement() -> Vec<CMat> {
    let p0 = linalg::projector(&eta(0));
    let p1 = linalg::projector(&eta(1));
    let rest = linalg::identity(16) - &p0 - &p1;
    vec![p0, p1, rest]
}

/// Checks of the partial-transpose rewrite on `f` sites.
#[derive(Clone, Debug)]
pub struct TransposeCheck {
    /// `(X_{AB} ⊗ 𝟙_C)|Φ⁺⟩_{BC} = (X^{T_B}_{AC} ⊗ 𝟙_B)|Φ⁺⟩_{BC}` for `X = P_f`.
    pub network: f64,
    /// `⟨SPT_f|P_f^{⊗f}|SPT_f⟩`.
    pub direct: f64,
    /// `2^{-f} tr ∏_i P_f^{T_B}(i, i+1)` on an `f`-qubit ring.
    pub ring_trace: f64,
    /// Norm of the operator product `∏_i P_f^{T_B}(i, i+1)`.
    pub product_norm: f64,
}

/// `X` on `A⊗B` (qubits), `Φ⁺` on `B⊗C`; returns the residual of the rewrite.
pub fn transpose_network_residual(x: &CMat) -> f64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // columns: input |a⟩_A, rows: |a', b, c⟩ with A most significant
    let mut lhs = linalg::zeros(8, 2);
    let mut rhs = linalg::zeros(8, 2);
    for a in 0..2 {
        for b in 0..2 {
            // (X_{AB}⊗𝟙_C)|a⟩|b⟩_B|b⟩_C
            for a2 in 0..2 {
                for b2 in 0..2 {
                    lhs[(a2 * 4 + b2 * 2 + b, a)] += x[(a2 * 2 + b2, a * 2 + b)] * h;
                }
            }
            // (X^{T_B}_{AC}⊗𝟙_B)|a⟩|b⟩_B|b⟩_C
            for a2 in 0..2 {
                for c2 in 0..2 {
                    let xt = x[(a2 * 2 + b, a * 2 + c2)];
                    rhs[(a2 * 4 + b * 2 + c2, a)] += xt * h;
                }
            }
        }
    }
    linalg::max_diff(&lhs, &rhs)
}

pub fn partial_transpose_check(f: usize) -> Result<TransposeCheck> {
    if f < 2 {
        return Err(Error::Domain("ring rewrite needs at least two sites".into()));
    }
    check_budget(1u128 << (2 * f))?;
    let pf = spt_measurement()[2].clone();
    let pt = CMat::from_fn(4, 4, |r, col| {
        let (a2, b2) = (r / 2, r % 2);
        let (a, b) = (col / 2, col % 2);
        pf[(a2 * 2 + b, a * 2 + b2)]
    });
    let s = spt_state(f)?;
    let mut t = s.clone();
    for i in 0..f {
        t.apply_local(&pf, &[i])?;
    }
    let direct = linalg::inner(s.amplitudes(), t.amplitudes()).re;

    let dim = 1usize << f;
    let mut prod = linalg::identity(dim);
    for i in 0..f {
        let j = (i + 1) % f;
        let op = embed_two_qubit(&pt, i, j, f);
        prod = &op * &prod;
    }
    Ok(TransposeCheck {
        network: transpose_network_residual(&pf),
        direct,
        ring_trace: linalg::trace(&prod).re / dim as f64,
        product_norm: linalg::max_abs(&prod),
    })
}

/// Two-qubit operator on qubits `(i, j)` of `f`, qubit 0 most significant.
fn embed_two_qubit(op: &CMat, i: usize, j: usize, f: usize) -> CMat {
    let dim = 1usize << f;
    let bit = |x: usize, q: usize| (x >> (f - 1 - q)) & 1;
    CMat::from_fn(dim, dim, |r, col| {
        let others_match = (0..f).filter(|&q| q != i && q != j).all(|q| bit(r, q) == bit(col, q));
        if !others_match {
            return ZERO;
        }
        op[(bit(r, i) * 2 + bit(r, j), bit(col, i) * 2 + bit(col, j))]
    })
}

// ---------------------------------------------------------------------------
// GHZ under the regular representation

/// Regular representation, `|φ_i⟩ = Z̃^i|φ₀⟩`, `Z̃^i` and `P_f` on `C⁸`.
#[derive(Clone, Debug)]
pub struct GhzSetup {
    pub us: Vec<CMat>,
    pub phis: Vec<CVec>,
    pub ztilde: Vec<CMat>,
    pub pf: CMat,
}

pub fn ghz_setup(t: &D8Tables) -> GhzSetup {
    let us = t.regular();
    let ztilde: Vec<CMat> = (0..4).map(|i| linalg::diag(&(0..8).map(|g| c(chi(i, g))).collect::<Vec<_>>())).collect();
    let phi0 = vec![c(1.0 / 8f64.sqrt()); 8];
    let phis: Vec<CVec> = ztilde.iter().map(|z| linalg::mat_vec(z, &phi0)).collect();
    let mut pf = linalg::identity(8);
    for p in &phis {
        pf -= linalg::projector(p);
    }
    GhzSetup { us, phis, ztilde, pf }
}

/// `(|0…0⟩ + … + |7…7⟩)/(2√2)`.
pub fn ghz_state(n: usize) -> Result<DenseState> {
    if n == 0 {
        return Err(Error::Domain("GHZ state needs at least one site".into()));
    }
    check_budget(8u128.pow(n as u32))?;
    let len = 1usize << (3 * n);
    let mut amps = vec![ZERO; len];
    let step = (len - 1) / 7;
    for g in 0..8 {
        amps[g * step] = c(1.0 / 8f64.sqrt());
    }
    DenseState::new(vec![8; n], amps)
}

/// Map `r^a s^b ↦ (a mod 2, ⌊a/2⌋, b)` as three qubits, first most significant.
pub fn ghz_bit_index(g: usize) -> usize {
    let (a, b) = split(g);
    (a % 2) * 4 + (a / 2) * 2 + b
}

#[derive(Clone, Debug)]
pub struct GhzRelations {
    pub orthonormality: f64,
    /// Multiplicities of `χ^{(0..3)}` and `U⁽⁴⁾` in the regular representation.
    pub multiplicities: [f64; 5],
    pub relation1: f64,
    pub relation2: f64,
    pub relation3: f64,
    /// `Π P_f Π† = 𝟙 ⊗ |−⟩⟨−| ⊗ 𝟙`.
    pub pf_factor: f64,
    /// `Π^{⊗n}|GHZ₈⟩ = |GHZ₂⟩^{⊗3}` up to qubit order.
    pub ghz_factor: f64,
}

impl GhzRelations {
    pub fn max(&self) -> f64 {
        let mult = self
            .multiplicities
            .iter()
            .zip([1.0, 1.0, 1.0, 1.0, 2.0])
            .map(|(m, e)| (m - e).abs())
            .fold(0.0, f64::max);
        [self.orthonormality, mult, self.relation1, self.relation2, self.relation3, self.pf_factor, self.ghz_factor]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn ghz_relations(t: &D8Tables, n: usize) -> Result<GhzRelations> {
    if n < 2 {
        return Err(Error::Domain("relations need at least two sites".into()));
    }
    let s = ghz_setup(t);
    let mut orthonormality = 0.0f64;
    for (i, a) in s.phis.iter().enumerate() {
        for (j, b) in s.phis.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            orthonormality = orthonormality.max((linalg::inner(a, b) - c(want)).norm());
        }
    }
    let mut multiplicities = [0.0; 5];
    for g in 0..8 {
        let tr = linalg::trace(&s.us[g]).re;
        for (i, m) in multiplicities.iter_mut().take(4).enumerate() {
            *m += tr * chi(i, g) / 8.0;
        }
        multiplicities[4] += tr * linalg::trace(&t.u4[g]).re / 8.0;
    }

    let ghz = ghz_state(n)?;
    let mut relation1 = 0.0f64;
    for z in &s.ztilde {
        let zd = z.adjoint();
        let mut first = ghz.clone();
        first.apply_local(&zd, &[0])?;
        for k in 1..n {
            let mut other = ghz.clone();
            other.apply_local(&zd, &[k])?;
            let d = first
                .amplitudes()
                .iter()
                .zip(other.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            relation1 = relation1.max(d);
        }
    }
    let reduced = ghz.project_out(0, &s.phis[0])?;
    let smaller = ghz_state(n - 1)?;
    let scale = 1.0 / (2.0 * 2f64.sqrt());
    let relation2 = reduced
        .amplitudes()
        .iter()
        .zip(smaller.amplitudes())
        .map(|(a, b)| (a - b * scale).norm())
        .fold(0.0, f64::max);
    let relation3 = s.ztilde.iter().map(|z| linalg::commutator_norm(&s.pf, &z.adjoint())).fold(0.0, f64::max);

    let perm = CMat::from_fn(8, 8, |r, g| if ghz_bit_index(g) == r { ONE } else { ZERO });
    let minus = vec![c(std::f64::consts::FRAC_1_SQRT_2), c(-std::f64::consts::FRAC_1_SQRT_2)];
    let want = linalg::kron_all([&linalg::identity(2), &linalg::projector(&minus), &linalg::identity(2)]);
    let pf_factor = linalg::max_diff(&(&perm * &s.pf * perm.adjoint()), &want);

    let mut ghz_factor = 0.0f64;
    let amp = ghz.amplitudes();
    for (idx, x) in amp.iter().enumerate() {
        let mut bits = vec![0usize; 3 * n];
        let mut rem = idx;
        for site in (0..n).rev() {
            let g = rem % 8;
            rem /= 8;
            let q = ghz_bit_index(g);
            for k in 0..3 {
                bits[3 * site + k] = (q >> (2 - k)) & 1;
            }
        }
        let each_equal = (0..3).all(|k| (0..n).all(|site| bits[3 * site + k] == bits[k]));
        let expect = if each_equal { f64::powi(std::f64::consts::FRAC_1_SQRT_2, 3) } else { 0.0 };
        ghz_factor = ghz_factor.max((x - c(expect)).norm());
    }
    Ok(GhzRelations { orthonormality, multiplicities, relation1, relation2, relation3, pf_factor, ghz_factor })
}

/// `β_{xz} = |x,−,z⟩⊗|x,−,z⟩` in the group basis, as a 64-vector.
fn ghz_beta(x: usize, z: usize) -> CVec {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![ZERO; 8];
    for y in 0..2 {
        let g = element(x + 2 * y, z);
        v[g] = c(if y == 0 { h } else { -h });
    }
    kron_vec(&v, &v)
}

fn kron_vec(a: &[Complex64], b: &[Complex64]) -> CVec {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Pair basis `e_i` (character `χ^{(i)}` under `U⊗U`) spanning the `β_{xz}`.
pub fn ghz_pair_basis(g: &GhzSetup) -> Result<Vec<CVec>> {
    let pp = linalg::kron(&g.pf, &g.pf);
    let uu: Vec<CMat> = g.us.iter().map(|u| linalg::kron(u, u)).collect();
    let betas: Vec<CVec> = (0..4).map(|k| ghz_beta(k / 2, k % 2)).collect();
    let mut basis = Vec::with_capacity(4);
    for i in 0..4 {
        let proj = isotypic_projector(&uu, i) * &pp;
        let images: Vec<CVec> = betas.iter().map(|b| linalg::mat_vec(&proj, b)).collect();
        let best = images
            .iter()
            .max_by(|a, b| linalg::norm(a).total_cmp(&linalg::norm(b)))
            .ok_or_else(|| Error::Consistency("no pair vectors".into()))?;
        let mut e = best.clone();
        if linalg::normalize(&mut e) < 1e-8 {
            return Err(Error::Consistency(format!("no χ{i} component in the error span")));
        }
        for im in &images {
            let ov = linalg::inner(&e, im);
            let leak = im.iter().zip(&e).map(|(a, b)| (a - b * ov).norm()).fold(0.0, f64::max);
            if leak > 1e-9 {
                return Err(Error::Consistency(format!("χ{i} projections of the error span are not collinear")));
            }
        }
        basis.push(e);
    }
    for b in &betas {
        let rest: f64 = 1.0 - basis.iter().map(|e| linalg::inner(e, b).norm_sqr()).sum::<f64>();
        if rest.abs() > 1e-9 {
            return Err(Error::Consistency("pair basis does not span the error vectors".into()));
        }
    }
    Ok(basis)
}

// ---------------------------------------------------------------------------
// Protocol geometry

/// Coarse round-one outcome: `s` for a 1D-irrep sector, `f` for the rest.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeString {
    pub fine: Vec<usize>,
    pub failed: Vec<bool>,
}

impl OutcomeString {
    pub fn new(fine: Vec<usize>, fail_outcome: usize) -> Self {
        let failed = fine.iter().map(|&k| k == fail_outcome).collect();
        OutcomeString { fine, failed }
    }

    pub fn f_count(&self) -> usize {
        self.failed.iter().filter(|&&x| x).count()
    }

    pub fn f_positions(&self) -> Vec<usize> {
        self.failed.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect()
    }

    pub fn coarse(&self) -> String {
        self.failed.iter().map(|&x| if x { 'f' } else { 's' }).collect()
    }
}

impl fmt::Display for OutcomeString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.coarse())
    }
}

/// Sites of the error state on a ring, and the swap depth available.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorConfiguration {
    n: usize,
    positions: Vec<usize>,
    depth: usize,
}

impl ErrorConfiguration {
    pub fn new(n: usize, positions: Vec<usize>, depth: usize) -> Result<Self> {
        if positions.windows(2).any(|w| w[0] >= w[1]) || positions.last().is_some_and(|&p| p >= n) {
            return Err(Error::Domain(format!("positions {positions:?} not strictly increasing below {n}")));
        }
        Ok(ErrorConfiguration { n, positions, depth })
    }

    pub fn from_failed(failed: &[bool], depth: usize) -> Self {
        let positions = failed.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).collect();
        ErrorConfiguration { n: failed.len(), positions, depth }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn ring_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.n - d)
    }

    /// Every error site has another within ring distance `2l`.
    pub fn correctable(&self) -> bool {
        self.positions.iter().all(|&p| {
            self.positions.iter().any(|&q| q != p && self.ring_distance(p, q) <= 2 * self.depth)
        })
    }
}

/// Swap schedule joining consecutive error sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinSchedule {
    /// Original positions `(a, b)`; `b` follows `a` clockwise.
    pub pairs: Vec<(usize, usize)>,
    /// Each layer is a set of disjoint swaps `(p, p+1 mod n)` on current positions.
    pub layers: Vec<Vec<(usize, usize)>>,
    /// Adjacent positions `(p, p+1 mod n)` holding each pair after the circuit.
    pub joined: Vec<(usize, usize)>,
}

impl JoinSchedule {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum JoinVerdict {
    Schedule(JoinSchedule),
    /// Some error site has no partner within distance `2l`.
    Infeasible,
    /// The distance rule holds but neither consecutive pairing fits in depth `l`.
    Unpairable,
}

impl JoinVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            JoinVerdict::Schedule(_) => "feasible",
            JoinVerdict::Infeasible => "infeasible",
            JoinVerdict::Unpairable => "unpairable",
        }
    }
}

fn pair_depth(dist: usize) -> usize {
    dist.saturating_sub(1).div_ceil(2)
}

fn schedule_for(n: usize, pairs: &[(usize, usize)]) -> JoinSchedule {
    let mut layers: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut joined = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        let (mut p, mut q) = (a, a + (b + n - a) % n);
        let mut t = 0;
        while q - p > 1 {
            if layers.len() == t {
                layers.push(Vec::new());
            }
            layers[t].push((p % n, (p + 1) % n));
            p += 1;
            if q - p > 1 {
                layers[t].push(((q - 1) % n, q % n));
                q -= 1;
            }
            t += 1;
        }
        joined.push((p % n, (p + 1) % n));
    }
    JoinSchedule { pairs: pairs.to_vec(), layers, joined }
}

/// Nearest-neighbour swap schedule pairing ring-consecutive error sites.
pub fn swap_join_circuit(cfg: &ErrorConfiguration) -> JoinVerdict {
    if !cfg.correctable() {
        return JoinVerdict::Infeasible;
    }
    let pos = &cfg.positions;
    let m = pos.len();
    if m == 0 {
        return JoinVerdict::Schedule(JoinSchedule { pairs: vec![], layers: vec![], joined: vec![] });
    }
    if m % 2 == 1 {
        return JoinVerdict::Unpairable;
    }
    let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
    for offset in 0..2 {
        let pairs: Vec<(usize, usize)> = (0..m / 2).map(|k| (pos[(2 * k + offset) % m], pos[(2 * k + 1 + offset) % m])).collect();
        let depth = pairs
            .iter()
            .map(|&(a, b)| pair_depth((b + cfg.n - a) % cfg.n))
            .max()
            .unwrap_or(0);
        if best.as_ref().is_none_or(|(d, _)| depth < *d) {
            best = Some((depth, pairs));
        }
    }
    match best {
        Some((d, pairs)) if d <= cfg.depth => JoinVerdict::Schedule(schedule_for(cfg.n, &pairs)),
        _ => JoinVerdict::Unpairable,
    }
}

/// `n / 2^{4l+1}`.
pub fn p_fail_bound(n: usize, l: usize) -> f64 {
    n as f64 / 2f64.powi(4 * l as i32 + 1)
}

/// A coarse string from the flat law on even-`|f|` strings.
pub fn sample_even_string<R: Rng>(n: usize, rng: &mut R) -> Vec<bool> {
    let mut v: Vec<bool> = (0..n.saturating_sub(1)).map(|_| rng.gen::<bool>()).collect();
    if n > 0 {
        let parity = v.iter().filter(|&&x| x).count() % 2 == 1;
        v.push(parity);
    }
    v
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

#[derive(Clone, Debug)]
pub struct PFailEstimate {
    pub trials: usize,
    pub infeasible: usize,
    pub unpairable: usize,
}

impl PFailEstimate {
    pub fn fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.infeasible as f64 / self.trials as f64
        }
    }

    /// Binomial standard error at probability `p`.
    pub fn sigma(&self, p: f64) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = p.clamp(0.0, 1.0);
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

pub fn p_fail_estimate(n: usize, l: usize, trials: usize, seed: u64) -> PFailEstimate {
    let verdicts = par::map_range(trials, |t| {
        let s = sample_even_string(n, &mut trial_rng(seed, t));
        match swap_join_circuit(&ErrorConfiguration::from_failed(&s, l)) {
            JoinVerdict::Schedule(_) => 0u8,
            JoinVerdict::Infeasible => 1,
            JoinVerdict::Unpairable => 2,
        }
    });
    PFailEstimate {
        trials,
        infeasible: verdicts.iter().filter(|&&v| v == 1).count(),
        unpairable: verdicts.iter().filter(|&&v| v == 2).count(),
    }
}

// ---------------------------------------------------------------------------
// Join-and-measure

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JoinKind {
    Spt,
    Ghz,
}

impl std::str::FromStr for JoinKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spt" => Ok(JoinKind::Spt),
            "ghz" => Ok(JoinKind::Ghz),
            other => Err(Error::Parse(format!("unknown kind `{other}`"))),
        }
    }
}

impl fmt::Display for JoinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JoinKind::Spt => "SPT",
            JoinKind::Ghz => "GHZ",
        })
    }
}

/// Everything a join-and-measure run needs for one kind of state.
#[derive(Clone, Debug)]
pub struct JoinSetup {
    pub kind: JoinKind,
    pub site_dim: usize,
    pub symmetry: Vec<CMat>,
    pub round1: Vec<CMat>,
    pub fail: usize,
    /// Correction after each round-one outcome (identity for `f`).
    pub site_fix: Vec<CMat>,
    pub target: CVec,
    /// Pair family, last entry the complement.
    pub pair: Vec<CMat>,
    /// Correction after each pair outcome, acting on both sites.
    pub pair_fix: Vec<CMat>,
}

/// Unitary exchanging orthonormal `a` and `b`, identity elsewhere.
fn exchange(a: &[Complex64], b: &[Complex64]) -> CMat {
    let n = a.len();
    linalg::identity(n) - linalg::projector(a) - linalg::projector(b) + linalg::outer(a, b) + linalg::outer(b, a)
}

impl JoinSetup {
    pub fn new(kind: JoinKind, t: &D8Tables) -> Result<Self> {
        match kind {
            JoinKind::Spt => Ok(Self::spt(t)),
            JoinKind::Ghz => Self::ghz(t),
        }
    }

    pub fn spt(t: &D8Tables) -> Self {
        let pp = phi_plus();
        let pp2 = kron_vec(&pp, &pp);
        let pm2 = kron_vec(&pp, &phi_minus());
        let zr2 = linalg::kron(&linalg::identity(4), &z_right());
        let pair_fix = vec![exchange(&eta(0), &pp2), zr2 * exchange(&eta(1), &pm2), linalg::identity(16)];
        JoinSetup {
            kind: JoinKind::Spt,
            site_dim: 4,
            symmetry: t.spt_symmetry(),
            round1: spt_measurement(),
            fail: 2,
            site_fix: vec![linalg::identity(4), z_right(), linalg::identity(4)],
            target: pp,
            pair: eta_measurement(),
            pair_fix,
        }
    }

    pub fn ghz(t: &D8Tables) -> Result<Self> {
        let g = ghz_setup(t);
        let basis = ghz_pair_basis(&g)?;
        let mut round1: Vec<CMat> = g.phis.iter().map(|p| linalg::projector(p)).collect();
        round1.push(g.pf.clone());
        let mut site_fix: Vec<CMat> = g.ztilde.iter().map(|z| z.adjoint()).collect();
        site_fix.push(linalg::identity(8));
        let mut pair: Vec<CMat> = basis.iter().map(|e| linalg::projector(e)).collect();
        let rest = pair.iter().fold(linalg::identity(64), |acc, p| acc - p);
        pair.push(rest);
        let mut pair_fix = Vec::with_capacity(5);
        for (i, e) in basis.iter().enumerate() {
            let goal = kron_vec(&g.phis[i], &g.phis[0]);
            pair_fix.push(linalg::kron(&g.ztilde[i].adjoint(), &linalg::identity(8)) * exchange(e, &goal));
        }
        pair_fix.push(linalg::identity(64));
        Ok(JoinSetup {
            kind: JoinKind::Ghz,
            site_dim: 8,
            symmetry: g.us,
            round1,
            fail: 4,
            site_fix,
            target: g.phis[0].clone(),
            pair,
            pair_fix,
        })
    }

    pub fn initial(&self, n: usize) -> Result<DenseState> {
        match self.kind {
            JoinKind::Spt => spt_state(n),
            JoinKind::Ghz => ghz_state(n),
        }
    }

    pub fn target_state(&self, n: usize) -> Result<DenseState> {
        DenseState::product(&vec![self.target.clone(); n])
    }

    /// Largest deviation of any correction from quasi-commuting with the
    /// (single- or two-site) symmetry. Corrections with `|χ| = 1` are liftable.
    pub fn correction_residual(&self) -> f64 {
        let quasi = |op: &CMat, us: &[CMat]| {
            us.iter()
                .map(|u| match linalg::proportionality(&(op * u), &(u * op), TOL) {
                    Some(k) => (k.norm() - 1.0).abs(),
                    None => f64::INFINITY,
                })
                .fold(0.0, f64::max)
        };
        let uu: Vec<CMat> = self.symmetry.iter().map(|u| linalg::kron(u, u)).collect();
        let site = self.site_fix.iter().map(|op| quasi(op, &self.symmetry)).fold(0.0, f64::max);
        let pair = self.pair_fix.iter().map(|op| quasi(op, &uu)).fold(0.0, f64::max);
        let meas = self
            .round1
            .iter()
            .flat_map(|p| self.symmetry.iter().map(move |u| linalg::commutator_norm(p, u)))
            .chain(self.pair.iter().flat_map(|p| uu.iter().map(move |u| linalg::commutator_norm(p, u))))
            .fold(0.0, f64::max);
        site.max(pair).max(meas)
    }
}

fn enumeration_guard(setup: &JoinSetup, n: usize) -> Result<()> {
    let amps = (setup.site_dim as u128).pow(n as u32);
    check_budget(amps)?;
    let work = (setup.round1.len() as u128).pow(n as u32) * amps;
    if work > ENUMERATION_WORK {
        return Err(Error::Budget { needed: work, budget: ENUMERATION_WORK });
    }
    Ok(())
}

/// Visit every round-one branch above the pruning threshold.
fn for_each_round1(
    setup: &JoinSetup,
    state: DenseState,
    visit: &mut dyn FnMut(Vec<usize>, f64, DenseState) -> Result<()>,
) -> Result<()> {
    fn go(
        setup: &JoinSetup,
        site: usize,
        path: &mut Vec<usize>,
        p: f64,
        s: DenseState,
        visit: &mut dyn FnMut(Vec<usize>, f64, DenseState) -> Result<()>,
    ) -> Result<()> {
        if site == s.n_sites() {
            return visit(path.clone(), p, s);
        }
        for b in sim_engine::measure::<ChaCha8Rng>(&s, &setup.round1, &[site], Mode::Enumerate)? {
            path.push(b.outcome);
            go(setup, site + 1, path, p * b.probability, b.state, visit)?;
            path.pop();
        }
        Ok(())
    }
    go(setup, 0, &mut Vec::new(), 1.0, state, visit)
}

/// Exact round-one law over coarse strings.
#[derive(Clone, Debug)]
pub struct Round1Distribution {
    pub n: usize,
    /// Every coarse string, including those of probability zero.
    pub coarse: BTreeMap<String, f64>,
    /// Largest spread of the nonzero fine probabilities within a coarse class.
    pub fine_spread: f64,
    /// Fine outcomes of nonzero classes that never occur. Without error sites
    /// the `Z` corrections must multiply to the identity around the ring, so
    /// half of the fine outcomes of `s^n` vanish.
    pub suppressed: usize,
}

impl Round1Distribution {
    /// `2^{-(n-1)}` on even `|f|`, zero on odd.
    pub fn law(n: usize, coarse: &str) -> f64 {
        if coarse.chars().filter(|&ch| ch == 'f').count() % 2 == 0 {
            f64::powi(0.5, n as i32 - 1)
        } else {
            0.0
        }
    }

    pub fn max_deviation(&self) -> f64 {
        self.coarse.iter().map(|(k, p)| (p - Self::law(self.n, k)).abs()).fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.coarse.values().sum()
    }
}

pub fn round1_distribution(setup: &JoinSetup, n: usize) -> Result<Round1Distribution> {
    enumeration_guard(setup, n)?;
    let mut coarse: BTreeMap<String, f64> = (0..1usize << n)
        .map(|m| ((0..n).map(|i| if (m >> (n - 1 - i)) & 1 == 1 { 'f' } else { 's' }).collect(), 0.0))
        .collect();
    let mut fine: Vec<(OutcomeString, f64)> = Vec::new();
    for_each_round1(setup, setup.initial(n)?, &mut |path, p, _| {
        let o = OutcomeString::new(path, setup.fail);
        *coarse.entry(o.coarse()).or_insert(0.0) += p;
        fine.push((o, p));
        Ok(())
    })?;
    let mut by_class: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (o, p) in &fine {
        by_class.entry(o.coarse()).or_default().push(*p);
    }
    let successes = setup.round1.len() - 1;
    let mut fine_spread = 0.0f64;
    let mut suppressed = 0;
    for (k, ps) in &by_class {
        let lo = ps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ps.iter().copied().fold(0.0, f64::max);
        fine_spread = fine_spread.max(hi - lo);
        let s = k.chars().filter(|&ch| ch == 's').count();
        suppressed += successes.pow(s as u32) - ps.len();
    }
    Ok(Round1Distribution { n, coarse, fine_spread, suppressed })
}

pub fn spt_round1_distribution(n: usize) -> Result<Round1Distribution> {
    round1_distribution(&JoinSetup::spt(d8_tables()?), n)
}

pub fn ghz_round1_distribution(n: usize) -> Result<Round1Distribution> {
    round1_distribution(&JoinSetup::ghz(d8_tables()?)?, n)
}

/// Pair measurement on a bare error state of `f` sites (pairs `(0,1), (2,3), …`).
#[derive(Clone, Debug)]
pub struct ErrorCorrectionReport {
    pub branches: Vec<(Vec<usize>, f64)>,
    /// Largest entanglement entropy of any branch across a cut between pairs
    /// or around a single pair.
    pub max_entropy: f64,
    pub complement_probability: f64,
    /// Smallest fidelity with the target product after pair corrections.
    pub min_fidelity: f64,
}

impl ErrorCorrectionReport {
    pub fn pass(&self) -> bool {
        self.max_entropy < TOL && self.complement_probability < PRUNE && self.min_fidelity >= 1.0 - FIDELITY_TOL
    }
}

fn error_state(setup: &JoinSetup, f: usize) -> Result<DenseState> {
    let mut s = setup.initial(f)?;
    for i in 0..f {
        s.apply_local(&setup.round1[setup.fail], &[i])?;
    }
    if s.norm() < PRUNE {
        return Err(Error::Degenerate(format!("error state on {f} sites vanishes")));
    }
    s.normalized()
}

pub fn error_correction(setup: &JoinSetup, f: usize) -> Result<ErrorCorrectionReport> {
    if f % 2 == 1 {
        return Err(Error::Degenerate(format!("error state on {f} sites vanishes")));
    }
    let s = error_state(setup, f)?;
    let complement = setup.pair.len() - 1;
    let mut branches = Vec::new();
    let mut max_entropy = 0.0f64;
    let mut complement_probability = 0.0;
    let mut min_fidelity = 1.0f64;
    let target = setup.target_state(f)?;
    let pairs: Vec<(usize, usize)> = (0..f / 2).map(|k| (2 * k, 2 * k + 1)).collect();
    for_each_pair_branch(setup, s, &pairs, &mut |outcomes, p, st| {
        if outcomes.contains(&complement) {
            complement_probability += p;
        }
        let mut ent = 0.0f64;
        for &(a, b) in &pairs {
            ent = ent.max(sim_engine::entropy(&st, &(0..=b).collect::<Vec<_>>())?);
            ent = ent.max(sim_engine::entropy(&st, &[a, b])?);
        }
        max_entropy = max_entropy.max(ent);
        let mut fixed = st;
        for (k, &(a, b)) in pairs.iter().enumerate() {
            fixed.apply_local(&setup.pair_fix[outcomes[k]], &[a, b])?;
        }
        min_fidelity = min_fidelity.min(sim_engine::fidelity(&fixed, &target)?);
        branches.push((outcomes, p));
        Ok(())
    })?;
    Ok(ErrorCorrectionReport { branches, max_entropy, complement_probability, min_fidelity })
}

pub fn spt_error_correction(f: usize) -> Result<ErrorCorrectionReport> {
    error_correction(&JoinSetup::spt(d8_tables()?), f)
}

pub fn ghz_error_correction(f: usize) -> Result<ErrorCorrectionReport> {
    error_correction(&JoinSetup::ghz(d8_tables()?)?, f)
}

fn for_each_pair_branch(
    setup: &JoinSetup,
    state: DenseState,
    pairs: &[(usize, usize)],
    visit: &mut dyn FnMut(Vec<usize>, f64, DenseState) -> Result<()>,
) -> Result<()> {
    fn go(
        setup: &JoinSetup,
        k: usize,
        pairs: &[(usize, usize)],
        path: &mut Vec<usize>,
        p: f64,
        s: DenseState,
        visit: &mut dyn FnMut(Vec<usize>, f64, DenseState) -> Result<()>,
    ) -> Result<()> {
        if k == pairs.len() {
            return visit(path.clone(), p, s);
        }
        let (a, b) = pairs[k];
        for br in sim_engine::measure::<ChaCha8Rng>(&s, &setup.pair, &[a, b], Mode::Enumerate)? {
            path.push(br.outcome);
            go(setup, k + 1, pairs, path, p * br.probability, br.state, visit)?;
            path.pop();
        }
        Ok(())
    }
    go(setup, 0, pairs, &mut Vec::new(), 1.0, state, visit)
}

/// One branch of a join-and-measure run.
#[derive(Clone, Debug)]
pub struct JoinTranscript {
    pub round1: OutcomeString,
    pub verdict: &'static str,
    pub depth: Option<usize>,
    pub round2: Vec<usize>,
    /// Born probability of this branch.
    pub probability: f64,
    /// Fidelity with the target after corrections; `None` when not joinable.
    pub fidelity: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JoinMode {
    Enumerate,
    Sample { seed: u64, trials: usize },
}

#[derive(Clone, Debug)]
pub struct JoinRun {
    pub kind: JoinKind,
    pub n: usize,
    pub depth: usize,
    pub mode: JoinMode,
    pub transcripts: Vec<JoinTranscript>,
}

#[derive(Clone, Debug, Default)]
pub struct JoinSummary {
    pub total: f64,
    pub success: f64,
    pub infeasible: f64,
    pub unpairable: f64,
    pub min_fidelity: Option<f64>,
}

impl JoinRun {
    fn weight(&self, t: &JoinTranscript) -> f64 {
        match self.mode {
            JoinMode::Enumerate => t.probability,
            JoinMode::Sample { trials, .. } => 1.0 / trials as f64,
        }
    }

    pub fn summary(&self) -> JoinSummary {
        let mut s = JoinSummary::default();
        for t in &self.transcripts {
            let w = self.weight(t);
            s.total += w;
            match (t.verdict, t.fidelity) {
                ("infeasible", _) => s.infeasible += w,
                ("unpairable", _) => s.unpairable += w,
                (_, Some(f)) => {
                    if f >= 1.0 - FIDELITY_TOL {
                        s.success += w;
                    }
                    s.min_fidelity = Some(s.min_fidelity.map_or(f, |m: f64| m.min(f)));
                }
                _ => {}
            }
        }
        s
    }
}

/// Round two on a post-round-one state: corrections on `s` sites, swaps, pair
/// measurement and pair corrections. Calls `finish` once per pair branch.
fn round2(
    setup: &JoinSetup,
    fine: &[usize],
    state: DenseState,
    schedule: &JoinSchedule,
    target: &DenseState,
    rng: Option<&mut ChaCha8Rng>,
    finish: &mut dyn FnMut(Vec<usize>, f64, f64),
) -> Result<()> {
    let d = setup.site_dim;
    let mut s = state;
    for (i, &k) in fine.iter().enumerate() {
        if k != setup.fail {
            s.apply_local(&setup.site_fix[k], &[i])?;
        }
    }
    let sw = linalg::swap(d, d);
    for layer in &schedule.layers {
        for &(p, q) in layer {
            s.apply_local(&sw, &[p, q])?;
        }
    }
    let pairs = &schedule.joined;
    let close = |outcomes: &[usize], st: &DenseState| -> Result<f64> {
        let mut fixed = st.clone();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            fixed.apply_local(&setup.pair_fix[outcomes[k]], &[a, b])?;
        }
        sim_engine::fidelity(&fixed, target)
    };
    match rng {
        None => {
            for_each_pair_branch(setup, s, pairs, &mut |outcomes, p, st| {
                let fid = close(&outcomes, &st)?;
                finish(outcomes, p, fid);
                Ok(())
            })?;
        }
        Some(rng) => {
            let mut p = 1.0;
            let mut outcomes = Vec::with_capacity(pairs.len());
            for &(a, b) in pairs {
                let br = sim_engine::measure(&s, &setup.pair, &[a, b], Mode::Sample(&mut *rng))?
                    .pop()
                    .ok_or_else(|| Error::Degenerate("empty pair measurement".into()))?;
                p *= br.probability;
                outcomes.push(br.outcome);
                s = br.state;
            }
            let fid = close(&outcomes, &s)?;
            finish(outcomes, p, fid);
        }
    }
    Ok(())
}

fn unjoined(o: OutcomeString, verdict: &JoinVerdict, p: f64) -> JoinTranscript {
    JoinTranscript { round1: o, verdict: verdict.label(), depth: None, round2: vec![], probability: p, fidelity: None }
}

/// Round-one on-site measurement, coarse-graining, swap joining, round-two pair
/// measurement and corrections towards `|Φ⁺⟩^{⊗n}` (SPT) or `|φ₀⟩^{⊗n}` (GHZ).
pub fn run_join_and_measure(kind: JoinKind, n: usize, depth: usize, mode: JoinMode) -> Result<JoinRun> {
    let setup = JoinSetup::new(kind, d8_tables()?)?;
    run_with_setup(&setup, n, depth, mode)
}

pub fn run_with_setup(setup: &JoinSetup, n: usize, depth: usize, mode: JoinMode) -> Result<JoinRun> {
    if n < 2 {
        return Err(Error::Domain("join-and-measure needs at least two sites".into()));
    }
    check_budget((setup.site_dim as u128).pow(n as u32))?;
    let target = setup.target_state(n)?;
    let mut transcripts = Vec::new();
    match mode {
        JoinMode::Enumerate => {
            enumeration_guard(setup, n)?;
            for_each_round1(setup, setup.initial(n)?, &mut |fine, p, st| {
                let o = OutcomeString::new(fine.clone(), setup.fail);
                let verdict = swap_join_circuit(&ErrorConfiguration::from_failed(&o.failed, depth));
                match &verdict {
                    JoinVerdict::Schedule(sched) => {
                        round2(setup, &fine, st, sched, &target, None, &mut |r2, q, fid| {
                            transcripts.push(JoinTranscript {
                                round1: o.clone(),
                                verdict: verdict.label(),
                                depth: Some(sched.depth()),
                                round2: r2,
                                probability: p * q,
                                fidelity: Some(fid),
                            });
                        })?;
                    }
                    _ => transcripts.push(unjoined(o, &verdict, p)),
                }
                Ok(())
            })?;
        }
        JoinMode::Sample { seed, trials } => {
            let initial = setup.initial(n)?;
            let runs = par::map_range(trials, |t| -> Result<JoinTranscript> {
                let mut rng = trial_rng(seed, t);
                let mut s = initial.clone();
                let mut p = 1.0;
                let mut fine = Vec::with_capacity(n);
                for site in 0..n {
                    let br = sim_engine::measure(&s, &setup.round1, &[site], Mode::Sample(&mut rng))?
                        .pop()
                        .ok_or_else(|| Error::Degenerate("empty round-one measurement".into()))?;
                    p *= br.probability;
                    fine.push(br.outcome);
                    s = br.state;
                }
                let o = OutcomeString::new(fine.clone(), setup.fail);
                let verdict = swap_join_circuit(&ErrorConfiguration::from_failed(&o.failed, depth));
                let JoinVerdict::Schedule(sched) = &verdict else {
                    return Ok(unjoined(o, &verdict, p));
                };
                let mut out = None;
                round2(setup, &fine, s, sched, &target, Some(&mut rng), &mut |r2, q, fid| {
                    out = Some((r2, q, fid));
                })?;
                let (r2, q, fid) = out.ok_or_else(|| Error::Degenerate("no pair branch".into()))?;
                Ok(JoinTranscript {
                    round1: o,
                    verdict: verdict.label(),
                    depth: Some(sched.depth()),
                    round2: r2,
                    probability: p * q,
                    fidelity: Some(fid),
                })
            });
            transcripts = runs.into_iter().collect::<Result<Vec<_>>>()?;
        }
    }
    Ok(JoinRun { kind: setup.kind, n, depth, mode, transcripts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_verify() {
        let t = d8_tables().unwrap();
        let r = t.report();
        assert!(r.pass(), "{r:?}");
        assert!(locc_obstruction_check(&t.omega));
        assert!(!locc_obstruction_check(&t.u4[..1]));
    }

    #[test]
    fn spt_relations_hold() {
        let t = d8_tables().unwrap();
        assert!(spt_relations(t).max() < TOL);
    }

    #[test]
    fn spt_state_is_symmetric() {
        let t = d8_tables().unwrap();
        let s = spt_state(4).unwrap();
        for u in t.spt_symmetry() {
            let mut v = s.clone();
            for i in 0..4 {
                v.apply_local(&u, &[i]).unwrap();
            }
            let f = sim_engine::fidelity(&s, &v).unwrap();
            assert!((f - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn error_state_matches_reference() {
        for f in [2, 4, 6] {
            let e = spt_error_state(f).unwrap();
            let r = paired_ghz_reference(f).unwrap();
            assert!(sim_engine::fidelity(&e, &r).unwrap() > 1.0 - TOL);
        }
        assert!(spt_error_state(3).is_err());
    }

    #[test]
    fn schedules() {
        let cfg = ErrorConfiguration::new(8, vec![2, 3], 2).unwrap();
        let JoinVerdict::Schedule(s) = swap_join_circuit(&cfg) else { panic!() };
        assert_eq!(s.depth(), 0);
        let cfg = ErrorConfiguration::new(12, vec![0, 4], 2).unwrap();
        let JoinVerdict::Schedule(s) = swap_join_circuit(&cfg) else { panic!() };
        assert_eq!(s.depth(), 2);
        assert_eq!(s.joined, vec![(2, 3)]);
        let cfg = ErrorConfiguration::new(12, vec![0, 6], 2).unwrap();
        assert_eq!(swap_join_circuit(&cfg), JoinVerdict::Infeasible);
        let cfg = ErrorConfiguration::new(16, vec![0, 1, 2, 8, 9, 10], 1).unwrap();
        assert_eq!(swap_join_circuit(&cfg), JoinVerdict::Unpairable);
    }

    #[test]
    fn corrections_are_liftable() {
        let t = d8_tables().unwrap();
        assert!(JoinSetup::spt(t).correction_residual() < 1e-9);
        assert!(JoinSetup::ghz(t).unwrap().correction_residual() < 1e-9);
    }

    #[test]
    fn small_runs_succeed() {
        for kind in [JoinKind::Spt, JoinKind::Ghz] {
            let run = run_join_and_measure(kind, 2, 1, JoinMode::Enumerate).unwrap();
            let s = run.summary();
            assert!((s.total - 1.0).abs() < 1e-9);
            assert!((s.success - 1.0).abs() < 1e-9, "{kind}: {s:?}");
        }
    }
}
