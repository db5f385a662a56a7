//! Preparation of every phase of a finite abelian symmetry group by symmetric
//! local measurements and feedforward: the block symmetry, the representative
//! tensor, the symmetric generalized Bell measurement, the ring protocol with
//! its slide-through corrections, on-site trivialization and quasi-commuting
//! lifts.

use crate::error::{Error, Result};
use crate::group_core::{character, GroupElement, GroupSpec, PhaseLabel, SubgroupDecomposition};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::mps_core::{self, MpsTensor};
use crate::par;
use crate::proj_reps::{self, standard_phase, CocycleClass, ProjectiveRep};
use crate::sim_engine::{self, check_budget, DenseState, MeasurementStep, OutcomeTree, PRUNE};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-10;
/// Fidelity every corrected branch must reach.
pub const FIDELITY_TOL: f64 = 1e-9;
/// Cap on `(#outcome tuples) × (#amplitudes)` touched by exhaustive runs.
pub const ENUMERATION_WORK: u128 = 1 << 34;

/// The on-site representation `U_g` of `G` carrying the phase `(H, μ)` at the
/// blocked scale, acting on `C^{|K|} ⊗ C^D ⊗ C^D`.
#[derive(Clone, Debug)]
pub struct BlockSymmetry {
    sub: SubgroupDecomposition,
    rep: ProjectiveRep,
    mats: Vec<CMat>,
}

impl BlockSymmetry {
    pub fn subgroup(&self) -> &SubgroupDecomposition {
        &self.sub
    }

    pub fn group(&self) -> &GroupSpec {
        self.sub.parent()
    }

    pub fn rep(&self) -> &ProjectiveRep {
        &self.rep
    }

    pub fn class(&self) -> &CocycleClass {
        self.rep.class()
    }

    pub fn label(&self) -> PhaseLabel {
        PhaseLabel { subgroup: self.sub.clone(), class: self.rep.class().clone() }
    }

    /// `|K| D²`.
    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    /// `D_μ`.
    pub fn irrep_dim(&self) -> usize {
        self.rep.dim()
    }

    pub fn k_order(&self) -> usize {
        self.sub.k_group().order()
    }

    pub fn u(&self, g: &GroupElement) -> &CMat {
        &self.mats[self.group().index(g)]
    }

    /// All `U_g` in lexicographic order of `g`.
    pub fn matrices(&self) -> &[CMat] {
        &self.mats
    }

    /// Largest violation of `U_g U_h = U_{g⊕h}`.
    pub fn representation_residual(&self) -> f64 {
        let g = self.group();
        let els = g.elements();
        let pairs: Vec<(usize, usize)> =
            (0..els.len()).flat_map(|a| (0..els.len()).map(move |b| (a, b))).collect();
        par::map_slice(&pairs, |&(a, b)| {
            let prod = &self.mats[a] * &self.mats[b];
            linalg::max_diff(&prod, &self.mats[g.index(&g.add(&els[a], &els[b]))])
        })
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Whether `U_g` is the identity (elements of the embedded projective center).
    pub fn acts_trivially(&self, g: &GroupElement) -> bool {
        linalg::max_diff(self.u(g), &linalg::identity(self.dim())) < TOL
    }

    /// `h(g ⊕ α)` for `α ∈ K` read as an element of `G`.
    fn h_shift(&self, g: &GroupElement, alpha: &GroupElement) -> GroupElement {
        self.sub.h_of(&self.group().add(g, alpha))
    }
}

/// `U_g = [⊕_{α∈K} ω*_{h(g⊕α)} ⊗ ω_{h(g⊕α)}] (X^{k(g)} ⊗ 𝟙 ⊗ 𝟙)`.
pub fn build_symmetry(sub: &SubgroupDecomposition, class: &CocycleClass) -> Result<BlockSymmetry> {
    if class.group() != sub.h_group() {
        return Err(Error::Structural(format!("class {class} is not a class of the subgroup {sub}")));
    }
    let rep = proj_reps::mu_irrep(class)?;
    let g = sub.parent().clone();
    let kg = sub.k_group().clone();
    let dd = rep.dim();
    let d = kg.order() * dd * dd;
    let kels = kg.elements();
    let mats = par::map_slice(&g.elements(), |x| {
        let kx = sub.k_of(x);
        let mut u = linalg::zeros(d, d);
        for a in &kels {
            let target = kg.sub(a, &kx);
            let w = rep.omega(&sub.h_of(&g.add(x, &target)));
            let blk = linalg::kron(&w.map(|z| z.conj()), w);
            let (ro, co) = (kg.index(&target) * dd * dd, kg.index(a) * dd * dd);
            u.view_mut((ro, co), (dd * dd, dd * dd)).copy_from(&blk);
        }
        u
    });
    let sym = BlockSymmetry { sub: sub.clone(), rep, mats };
    let res = sym.representation_residual();
    if res > TOL {
        return Err(Error::Consistency(format!("U_g is not a linear representation (residual {res:.2e})")));
    }
    Ok(sym)
}

/// Representative tensor `A^{(a,j,k)} = |a⟩⟨a| ⊗ |j⟩⟨k|`: a GHZ state on
/// `C^{|K|}` times a chain of Bell pairs on `C^D ⊗ C^D`. Physical index
/// `a·D² + j·D + k`, bond index `a·D + j`, one block of size `D` per `a ∈ K`.
pub fn build_representative(sym: &BlockSymmetry) -> Result<MpsTensor> {
    let kn = sym.k_order();
    let dd = sym.irrep_dim();
    let bond = kn * dd;
    let mut mats = Vec::with_capacity(kn * dd * dd);
    for a in 0..kn {
        for j in 0..dd {
            for k in 0..dd {
                let mut m = linalg::zeros(bond, bond);
                m[(a * dd + j, a * dd + k)] = ONE;
                mats.push(m);
            }
        }
    }
    MpsTensor::new(mats, Some(vec![dd; kn]))
}

/// Block action of `U_g` on the representative tensor: source block `α`
/// moves to `α ⊕ k(g)` conjugated by `ω_{h(g⊕α)}`.
pub fn representative_action(sym: &BlockSymmetry, g: &GroupElement) -> mps_core::BlockAction {
    let kg = sym.sub.k_group();
    let kx = sym.sub.k_of(g);
    let kels = kg.elements();
    mps_core::BlockAction {
        target: kels.iter().map(|a| kg.index(&kg.add(a, &kx))).collect(),
        omega: kels.iter().map(|a| sym.rep.omega(&sym.h_shift(g, a)).clone()).collect(),
        phase: vec![0.0; kels.len()],
    }
}

/// Per-site state on legs `(L, P, R)`, each of dimension `d`:
/// `Σ |a,w,u⟩_L |a,u,v⟩_P |a,v,w⟩_R`, i.e. the fiducial state of the
/// representative tensor with an extra Bell pair closing the two virtual legs,
/// so that it is invariant under `U_g^{⊗3}`.
pub fn build_fiducial_rep(sym: &BlockSymmetry) -> Result<DenseState> {
    let kn = sym.k_order();
    let dd = sym.irrep_dim();
    let d = sym.dim();
    let idx = |a: usize, j: usize, k: usize| a * dd * dd + j * dd + k;
    let mut amps = vec![ZERO; d * d * d];
    let c = Complex64::new(1.0 / ((kn * dd * dd * dd) as f64).sqrt(), 0.0);
    for a in 0..kn {
        for u in 0..dd {
            for v in 0..dd {
                for w in 0..dd {
                    amps[(idx(a, w, u) * d + idx(a, u, v)) * d + idx(a, v, w)] = c;
                }
            }
        }
    }
    DenseState::new(vec![d, d, d], amps)
}

/// `Z̃^q = Z^{k(q)} · ⊕_{α∈K} χ^{φ_μ(h(q))}_α`, diagonal on `C^{|K|}`.
pub fn build_ztilde(sym: &BlockSymmetry, q: &GroupElement) -> CMat {
    let g = sym.group();
    let (hq, kq) = sym.sub.euclid_split(q);
    let phi = sym.rep.phi(&hq).clone();
    let km = sym.sub.k_moduli();
    let diag: Vec<Complex64> = sym
        .sub
        .k_group()
        .elements()
        .iter()
        .map(|alpha| {
            let mut ph = character(&phi, alpha, g);
            for m in 0..km.len() {
                ph = ph + crate::RationalPhase::new((alpha.0[m] * kq.0[m]) as i128, km[m] as u64);
            }
            ph.to_complex()
        })
        .collect();
    linalg::diag(&diag)
}

/// `Ṽ_q = Z̃^q ⊗ 𝟙 ⊗ ω_{h(q)}`.
pub fn build_vtilde(sym: &BlockSymmetry, q: &GroupElement) -> CMat {
    let dd = sym.irrep_dim();
    let w = sym.rep.omega(&sym.sub.h_of(q));
    linalg::kron(&linalg::kron(&build_ztilde(sym, q), &linalg::identity(dd)), w)
}

/// `|Φ̃⁺⟩ ∝ Σ |a,j,k⟩|a,k,j⟩` on `C^d ⊗ C^d`.
pub fn phi_tilde_plus(sym: &BlockSymmetry) -> Vec<Complex64> {
    let kn = sym.k_order();
    let dd = sym.irrep_dim();
    let d = sym.dim();
    let mut v = vec![ZERO; d * d];
    let c = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    for a in 0..kn {
        for j in 0..dd {
            for k in 0..dd {
                v[(a * dd * dd + j * dd + k) * d + a * dd * dd + k * dd + j] = c;
            }
        }
    }
    v
}

/// Outcome label `(r, q)` of the generalized Bell measurement.
pub type Outcome = (GroupElement, GroupElement);

/// Rank-one projectors onto `(𝟙 ⊗ V_{r,q})|Φ̃⁺⟩`, `V_{r,q} = U_r Ṽ_q`, for
/// `r, q` in the index set.
#[derive(Clone, Debug)]
pub struct MeasurementFamily {
    pub index_set: Vec<GroupElement>,
    pub cosets: Vec<GroupElement>,
    pub anchor: Vec<Complex64>,
    pub labels: Vec<Outcome>,
    pub unitaries: Vec<CMat>,
    pub vectors: Vec<Vec<Complex64>>,
}

impl MeasurementFamily {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn projectors(&self) -> Vec<CMat> {
        self.vectors.iter().map(|v| linalg::projector(v)).collect()
    }

    pub fn position(&self, o: &Outcome) -> Option<usize> {
        self.labels.iter().position(|x| x == o)
    }
}

/// `S^μ = {g : h(g) ∈ Q}` with `Q` the lexicographically smallest coset
/// representatives of `H / Z^μ(H)`.
pub fn index_set(sym: &BlockSymmetry) -> Vec<GroupElement> {
    let q = proj_reps::coset_representatives(&sym.rep);
    sym.group().elements().into_iter().filter(|g| q.contains(&sym.sub.h_of(g))).collect()
}

pub fn build_measurement(sym: &BlockSymmetry) -> MeasurementFamily {
    build_measurement_on(sym, &index_set(sym))
}

/// Same construction with an arbitrary index set (used for negative controls).
pub fn build_measurement_on(sym: &BlockSymmetry, set: &[GroupElement]) -> MeasurementFamily {
    let anchor = phi_tilde_plus(sym);
    let d = sym.dim();
    let mut labels = Vec::new();
    let mut unitaries = Vec::new();
    for r in set {
        for q in set {
            labels.push((r.clone(), q.clone()));
            unitaries.push(sym.u(r) * build_vtilde(sym, q));
        }
    }
    let vectors = par::map_slice(&unitaries, |v| {
        let op = linalg::kron(&linalg::identity(d), v);
        linalg::mat_vec(&op, &anchor)
    });
    MeasurementFamily {
        index_set: set.to_vec(),
        cosets: proj_reps::coset_representatives(&sym.rep),
        anchor,
        labels,
        unitaries,
        vectors,
    }
}

/// Residuals of the three measurement properties plus the trace identity.
#[derive(Clone, Debug)]
pub struct Lemma3Report {
    pub completeness: f64,
    pub symmetry: f64,
    pub orthonormality: f64,
    pub trace_identity: f64,
    pub violated: Vec<String>,
}

impl Lemma3Report {
    pub fn pass(&self) -> bool {
        self.violated.is_empty()
    }
}

pub fn verify_lemma3(fam: &MeasurementFamily, sym: &BlockSymmetry) -> Lemma3Report {
    let d = sym.dim();
    let dd = sym.irrep_dim();
    let mut sum = linalg::zeros(d * d, d * d);
    for v in &fam.vectors {
        sum += linalg::projector(v);
    }
    let completeness = linalg::max_diff(&sum, &linalg::identity(d * d));
    let uu: Vec<CMat> = sym.matrices().iter().map(|u| linalg::kron(u, u)).collect();
    let symmetry = par::map_slice(&fam.vectors, |v| {
        uu.iter()
            .map(|w| {
                // [P, W] = 0 for rank-one P = |v⟩⟨v| iff W|v⟩ ∝ |v⟩.
                let wv = linalg::mat_vec(w, v);
                let c = linalg::inner(v, &wv);
                wv.iter().zip(v).map(|(a, b)| (a - c * b).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let n = fam.unitaries.len();
    let orthonormality = par::map_range(n, |i| {
        (0..n)
            .map(|j| {
                let t = linalg::hs_inner(&fam.unitaries[i], &fam.unitaries[j]) / d as f64;
                let expect = if i == j { ONE } else { ZERO };
                (t - expect).norm()
            })
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let g = sym.group();
    let e = g.identity();
    let vq: Vec<CMat> = fam.index_set.iter().map(|q| build_vtilde(sym, q)).collect();
    let mut trace_identity = 0.0f64;
    for r in &fam.index_set {
        for (q, v) in fam.index_set.iter().zip(&vq) {
            let t = linalg::trace(&(sym.u(r).adjoint() * v));
            let expect = if *r == e && *q == e { (dd * dd * sym.k_order()) as f64 } else { 0.0 };
            trace_identity = trace_identity.max((t - Complex64::new(expect, 0.0)).norm());
        }
    }
    let mut violated = Vec::new();
    for (name, r) in [
        ("completeness", completeness),
        ("symmetry", symmetry),
        ("orthonormality", orthonormality),
        ("trace identity", trace_identity),
    ] {
        if r > TOL {
            violated.push(format!("{name} (residual {r:.2e})"));
        }
    }
    Lemma3Report { completeness, symmetry, orthonormality, trace_identity, violated }
}

/// `Ṽ_p Ṽ_q = phase · Ṽ_{f(p,q)}` with
/// `f = |K|(h(p)⊕h(q)) ⊕ (k(p)⊕k(q)⊕k̂[φ(h(p))⊕φ(h(q))])`.
pub fn compose_v(sym: &BlockSymmetry, p: &GroupElement, q: &GroupElement) -> Result<(GroupElement, Complex64)> {
    let (hp, kp) = sym.sub.euclid_split(p);
    let (hq, kq) = sym.sub.euclid_split(q);
    let h = sym.sub.h_group().add(&hp, &hq);
    let x = sym.group().add(sym.rep.phi(&hp), sym.rep.phi(&hq));
    let k = compose_k(sym, &kp, &kq, &x, false);
    let f = sym.sub.compose(&h, &k);
    let phase = matched_phase(sym, &(build_vtilde(sym, p) * build_vtilde(sym, q)), &f)?;
    let expect = standard_phase(sym.class(), &hp, &hq).to_complex();
    if (phase - expect).norm() > TOL {
        return Err(Error::Consistency(format!("phase of Ṽ_{p}Ṽ_{q} is not γ(h(p),h(q))")));
    }
    Ok((f, phase))
}

/// `Ṽ_p† Ṽ_q = phase · Ṽ_{f̃(p,q)}`, the analogue of [`compose_v`] with `⊖`.
pub fn compose_vdag(sym: &BlockSymmetry, p: &GroupElement, q: &GroupElement) -> Result<(GroupElement, Complex64)> {
    let (hp, kp) = sym.sub.euclid_split(p);
    let (hq, kq) = sym.sub.euclid_split(q);
    let h = sym.sub.h_group().sub(&hq, &hp);
    let x = sym.group().sub(sym.rep.phi(&hq), sym.rep.phi(&hp));
    let k = compose_k(sym, &kp, &kq, &x, true);
    let f = sym.sub.compose(&h, &k);
    let phase = matched_phase(sym, &(build_vtilde(sym, p).adjoint() * build_vtilde(sym, q)), &f)?;
    Ok((f, phase))
}

fn compose_k(sym: &BlockSymmetry, kp: &GroupElement, kq: &GroupElement, x: &GroupElement, dagger: bool) -> GroupElement {
    let kg = sym.sub.k_group();
    let base = if dagger { kg.sub(kq, kp) } else { kg.add(kp, kq) };
    let (_, khat) = sym.sub.hat_split(x);
    kg.add(&base, &khat)
}

fn matched_phase(sym: &BlockSymmetry, prod: &CMat, f: &GroupElement) -> Result<Complex64> {
    let vf = build_vtilde(sym, f);
    let c = linalg::hs_inner(&vf, prod) / sym.dim() as f64;
    if linalg::max_diff(prod, &vf.map(|z| z * c)) > TOL || (c.norm() - 1.0).abs() > TOL {
        return Err(Error::Consistency(format!("product is not proportional to Ṽ_{f}")));
    }
    Ok(c)
}

/// Correction attached to one site: `(U_{g_i} C_{q_i})^{-1}` with
/// `g_i = r_0 ⊕ … ⊕ r_i` and `C_q = Ṽ_q† U_{|K|h(q)}`.
#[derive(Clone, Debug)]
pub struct SiteCorrection {
    /// `g_i`; the correction contains `U†_{g_i}`.
    pub accumulated: GroupElement,
    /// `|K|·h(q_i)`; the correction contains `U†_{|K|h(q_i)}`.
    pub slid: GroupElement,
    /// The quasi-commuting part is `Ṽ_{q_i}`.
    pub quasi: GroupElement,
    pub op: CMat,
}

#[derive(Clone, Debug)]
pub struct CorrectionPlan {
    pub sites: Vec<SiteCorrection>,
    /// `Ũ^{(0)} = ∏ U_{r_j}`, labelled by `⊕ r_j`.
    pub global: GroupElement,
}

/// Outcome `i` belongs to the bond `(R_{i−1}, L_i)`.
pub fn slide_corrections(sym: &BlockSymmetry, fam: &MeasurementFamily, outcomes: &[Outcome]) -> Result<CorrectionPlan> {
    let g = sym.group();
    let mut acc = g.identity();
    let mut sites = Vec::with_capacity(outcomes.len());
    for (r, q) in outcomes {
        if !fam.index_set.contains(r) || !fam.index_set.contains(q) {
            return Err(Error::Domain(format!("outcome ({r},{q}) lies outside the index set")));
        }
        acc = g.add(&acc, r);
        let slid = sym.sub.embed_h(&sym.sub.h_of(q));
        let op = sym.u(&slid).adjoint() * build_vtilde(sym, q) * sym.u(&acc).adjoint();
        sites.push(SiteCorrection { accumulated: acc.clone(), slid, quasi: q.clone(), op });
    }
    Ok(CorrectionPlan { sites, global: acc })
}

/// Ring network of fiducial states with bond vectors: amplitude over the
/// physical legs is `tr[B_{o_1} M^{p_1} ⋯ B_{o_n} M^{p_n}]`, where
/// `M^p_{lr} = F_{l p r}` and `B_o[r,l] = conj(ψ_o[r,l])`.
struct RingNetwork {
    d: usize,
    m: Vec<CMat>,
    b: Vec<CMat>,
}

impl RingNetwork {
    fn new(sym: &BlockSymmetry, fam: &MeasurementFamily) -> Result<Self> {
        let f = build_fiducial_rep(sym)?;
        let d = sym.dim();
        let amps = f.amplitudes();
        let m = (0..d).map(|p| CMat::from_fn(d, d, |l, r| amps[(l * d + p) * d + r])).collect();
        let b = fam.vectors.iter().map(|v| bond_matrix(d, v)).collect();
        Ok(RingNetwork { d, m, b })
    }

    /// `E_o^p = B_o M^p`, indexed `o·d + p`.
    fn e_mats(&self) -> Vec<CMat> {
        let d = self.d;
        par::map_range(self.b.len() * d, |c| &self.b[c / d] * &self.m[c % d])
    }

    fn amplitudes(&self, bonds: &[&CMat]) -> Vec<Complex64> {
        let e: Vec<Vec<CMat>> = bonds.iter().map(|b| self.m.iter().map(|m| *b * m).collect()).collect();
        let n = bonds.len();
        let d = self.d;
        let mut out = vec![ZERO; d.pow(n as u32)];
        fn walk(e: &[Vec<CMat>], site: usize, acc: &CMat, base: usize, out: &mut [Complex64], d: usize) {
            if site == e.len() {
                out[base] = linalg::trace(acc);
                return;
            }
            for p in 0..d {
                walk(e, site + 1, &(acc * &e[site][p]), base * d + p, out, d);
            }
        }
        walk(&e, 0, &linalg::identity(d), 0, &mut out, d);
        out
    }
}

fn bond_matrix(d: usize, v: &[Complex64]) -> CMat {
    CMat::from_fn(d, d, |r, l| v[r * d + l].conj())
}

/// Outcome record of one protocol branch or trial.
#[derive(Clone, Debug)]
pub struct ProtocolTranscript {
    pub outcomes: Vec<Outcome>,
    pub probability: f64,
    pub global: GroupElement,
    pub global_is_identity: bool,
    pub corrections: Vec<SiteCorrection>,
    pub fidelity: f64,
}

#[derive(Clone, Copy, Debug)]
pub enum RunMode {
    Enumerate,
    Sample { seed: u64, trials: usize },
}

/// Everything a protocol run needs, built once.
pub struct AbelianSetup {
    pub sym: BlockSymmetry,
    pub fam: MeasurementFamily,
    pub tensor: MpsTensor,
}

impl AbelianSetup {
    pub fn new(sub: &SubgroupDecomposition, class: &CocycleClass) -> Result<Self> {
        let sym = build_symmetry(sub, class)?;
        let fam = build_measurement(&sym);
        let tensor = build_representative(&sym)?;
        Ok(AbelianSetup { sym, fam, tensor })
    }

    pub fn target(&self, n: usize) -> Result<DenseState> {
        mps_core::expand_state(&self.tensor, n)
    }

    /// Correct the physical state of one branch and score it.
    fn finish(&self, outcomes: Vec<Outcome>, probability: f64, amps: Vec<Complex64>, target: &DenseState) -> Result<ProtocolTranscript> {
        let n = outcomes.len();
        let plan = slide_corrections(&self.sym, &self.fam, &outcomes)?;
        let mut s = DenseState::new(vec![self.sym.dim(); n], amps)?;
        for (i, c) in plan.sites.iter().enumerate() {
            s.apply_local(&c.op, &[i])?;
        }
        let fidelity = sim_engine::fidelity(&s, target)?;
        Ok(ProtocolTranscript {
            global_is_identity: self.sym.acts_trivially(&plan.global),
            global: plan.global,
            outcomes,
            probability,
            corrections: plan.sites,
            fidelity,
        })
    }
}

/// Run the ring protocol on `n` sites: per-site fiducial states, relocation
/// of each right virtual leg next to its neighbour's left leg, the symmetric
/// Bell measurement on every bond and the slide-through corrections. Returns
/// every branch above the pruning threshold (enumerate) or one transcript
/// per trial (sample). Any branch below the fidelity threshold is an error.
pub fn run_protocol(setup: &AbelianSetup, n: usize, mode: RunMode) -> Result<Vec<ProtocolTranscript>> {
    if n == 0 {
        return Err(Error::Domain("need at least one site".into()));
    }
    let d = setup.sym.dim();
    check_budget((d as u128).pow(n as u32))?;
    let net = RingNetwork::new(&setup.sym, &setup.fam)?;
    let target = setup.target(n)?;
    let out = match mode {
        RunMode::Enumerate => enumerate_ring(setup, &net, n, &target)?,
        RunMode::Sample { seed, trials } => sample_ring(setup, &net, n, seed, trials, &target)?,
    };
    if let Some(bad) = out.iter().find(|t| t.fidelity < 1.0 - FIDELITY_TOL) {
        return Err(Error::ProtocolFailure(format!(
            "branch {} corrected only to fidelity {:.3e}",
            format_outcomes(&bad.outcomes),
            bad.fidelity
        )));
    }
    if let Some(bad) = out.iter().find(|t| !t.global_is_identity) {
        return Err(Error::ProtocolFailure(format!(
            "branch {} has probability {:.3e} with a nontrivial global element {}",
            format_outcomes(&bad.outcomes),
            bad.probability,
            bad.global
        )));
    }
    Ok(out)
}

pub fn format_outcomes(o: &[Outcome]) -> String {
    o.iter().map(|(r, q)| format!("{r}{q}")).collect::<Vec<_>>().join(" ")
}

fn enumerate_ring(setup: &AbelianSetup, net: &RingNetwork, n: usize, target: &DenseState) -> Result<Vec<ProtocolTranscript>> {
    let d = net.d;
    let no = net.b.len();
    let work = (no as u128).pow(n as u32) * (d as u128).pow(n as u32);
    if work > ENUMERATION_WORK {
        return Err(Error::Budget { needed: work, budget: ENUMERATION_WORK });
    }
    let e = net.e_mats();
    // Last site handled as one product: rows are physical prefixes, columns
    // are (o_n, p_n); entry = Σ_{ab} X[a,b] E[b,a].
    let e_last = CMat::from_fn(d * d, no * d, |ba, c| e[c][(ba / d, ba % d)]);
    let prefix_count = no.pow(n as u32 - 1);
    let pp = d.pow(n as u32 - 1);
    let chunks = par::map_range(prefix_count, |pidx| -> Result<Vec<ProtocolTranscript>> {
        let mut os = vec![0; n - 1];
        let mut rest = pidx;
        for k in (0..n - 1).rev() {
            os[k] = rest % no;
            rest /= no;
        }
        // Products X over physical prefixes, flattened as X[a,b] at column a·d+b.
        let mut xt = linalg::zeros(pp, d * d);
        let mut row = 0;
        fn walk(e: &[CMat], os: &[usize], d: usize, acc: CMat, xt: &mut CMat, row: &mut usize) {
            if os.is_empty() {
                for a in 0..d {
                    for b in 0..d {
                        xt[(*row, b * d + a)] = acc[(a, b)];
                    }
                }
                *row += 1;
                return;
            }
            for p in 0..d {
                walk(e, &os[1..], d, &acc * &e[os[0] * d + p], xt, row);
            }
        }
        walk(&e, &os, d, linalg::identity(d), &mut xt, &mut row);
        let res = &xt * &e_last;
        let mut found = Vec::new();
        for on in 0..no {
            let mut amps = Vec::with_capacity(pp * d);
            for r in 0..pp {
                for p in 0..d {
                    amps.push(res[(r, on * d + p)]);
                }
            }
            let prob: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            if prob < PRUNE {
                continue;
            }
            let mut all = os.clone();
            all.push(on);
            let outcomes = all.iter().map(|&o| setup.fam.labels[o].clone()).collect();
            found.push(setup.finish(outcomes, prob, amps, target)?);
        }
        Ok(found)
    });
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    let total: f64 = out.iter().map(|t| t.probability).sum();
    if (total - 1.0).abs() > FIDELITY_TOL {
        return Err(Error::ProtocolFailure(format!("branch probabilities sum to {total:.12}")));
    }
    Ok(out)
}

/// Sequential Born sampling: the marginal of the first `k` outcomes is
/// `tr[Q_{o_1}⋯Q_{o_k} T^{n−k}]` with `Q_o = Σ_p E_o^p ⊗ conj(E_o^p)` and
/// `T = Σ_o Q_o`.
fn sample_ring(setup: &AbelianSetup, net: &RingNetwork, n: usize, seed: u64, trials: usize, target: &DenseState) -> Result<Vec<ProtocolTranscript>> {
    let d = net.d;
    let e = net.e_mats();
    let no = net.b.len();
    let q: Vec<CMat> = par::map_range(no, |o| {
        let mut acc = linalg::zeros(d * d, d * d);
        for p in 0..d {
            let x = &e[o * d + p];
            acc += linalg::kron(x, &x.map(|z| z.conj()));
        }
        acc
    });
    let t: CMat = q.iter().fold(linalg::zeros(d * d, d * d), |a, b| a + b);
    let mut tpow = vec![linalg::identity(d * d)];
    for k in 1..=n {
        tpow.push(&tpow[k - 1] * &t);
    }
    let results = par::map_range(trials, |trial| -> Result<ProtocolTranscript> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut prefix = linalg::identity(d * d);
        let mut chosen = Vec::with_capacity(n);
        for k in 0..n {
            let y = &tpow[n - k - 1] * &prefix;
            let w: Vec<f64> = q
                .iter()
                .map(|qo| {
                    let mut s = ZERO;
                    for a in 0..d * d {
                        for b in 0..d * d {
                            s += qo[(a, b)] * y[(b, a)];
                        }
                    }
                    s.re.max(0.0)
                })
                .collect();
            let total: f64 = w.iter().sum();
            let mut u = rng.gen::<f64>() * total;
            let mut pick = no - 1;
            for (o, &x) in w.iter().enumerate() {
                if u < x {
                    pick = o;
                    break;
                }
                u -= x;
            }
            chosen.push(pick);
            prefix = &prefix * &q[pick];
        }
        let bonds: Vec<&CMat> = chosen.iter().map(|&o| &net.b[o]).collect();
        let amps = net.amplitudes(&bonds);
        let prob: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let outcomes = chosen.iter().map(|&o| setup.fam.labels[o].clone()).collect();
        setup.finish(outcomes, prob, amps, target)
    });
    results.into_iter().collect()
}

/// Amplitudes of the ring network with `U_g` inserted on one left leg and
/// trivial outcomes everywhere; vanishes for every `g` acting nontrivially.
pub fn lemma4_network(sym: &BlockSymmetry, g: &GroupElement, n: usize) -> Result<Vec<Complex64>> {
    let fam = build_measurement_on(sym, &[sym.group().identity()]);
    let net = RingNetwork::new(sym, &fam)?;
    let d = sym.dim();
    let twisted = linalg::mat_vec(&linalg::kron(&linalg::identity(d), sym.u(g)), &fam.anchor);
    let b_g = bond_matrix(d, &twisted);
    let mut bonds: Vec<&CMat> = vec![&net.b[0]; n];
    bonds[0] = &b_g;
    Ok(net.amplitudes(&bonds))
}

/// Largest amplitude of the twisted ring over all `g` with `U_g ≠ 𝟙`, and
/// the fidelity of the untwisted ring with the representative state.
#[derive(Clone, Debug)]
pub struct Lemma4Report {
    pub max_twisted: f64,
    pub identity_fidelity: f64,
    pub kernel: Vec<GroupElement>,
}

impl Lemma4Report {
    pub fn pass(&self) -> bool {
        self.max_twisted < PRUNE && self.identity_fidelity > 1.0 - FIDELITY_TOL
    }
}

pub fn verify_lemma4(sym: &BlockSymmetry, tensor: &MpsTensor, n: usize) -> Result<Lemma4Report> {
    check_budget((sym.dim() as u128).pow(n as u32))?;
    let mut max_twisted = 0.0f64;
    let mut kernel = Vec::new();
    for g in sym.group().elements() {
        if sym.acts_trivially(&g) {
            kernel.push(g);
            continue;
        }
        let a = lemma4_network(sym, &g, n)?;
        max_twisted = max_twisted.max(a.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let plain = DenseState::new(vec![sym.dim(); n], lemma4_network(sym, &sym.group().identity(), n)?)?;
    let identity_fidelity = sim_engine::fidelity(&plain, &mps_core::expand_state(tensor, n)?)?;
    Ok(Lemma4Report { max_twisted, identity_fidelity, kernel })
}

/// Operator identities moving symmetry and `Ṽ_q` off a left leg of the
/// per-site state: `U_g^L|F⟩ = (U_g†)^P (U_g†)^R |F⟩` and
/// `Ṽ_q^L|F⟩ = (Z̃^q ⊗ ω_{h(q)}^T ⊗ 𝟙)^P |F⟩`; also `U_g Ṽ_q ∝ Ṽ_q U_g`.
/// Returns the largest residual.
pub fn verify_slide_through(sym: &BlockSymmetry) -> Result<f64> {
    let f = build_fiducial_rep(sym)?;
    let dd = sym.irrep_dim();
    let mut worst = 0.0f64;
    let diff = |a: &DenseState, b: &DenseState| {
        a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    };
    for g in sym.group().elements() {
        let u = sym.u(&g);
        let mut lhs = f.clone();
        lhs.apply_local(u, &[0])?;
        let mut rhs = f.clone();
        rhs.apply_local(&u.adjoint(), &[1])?;
        rhs.apply_local(&u.adjoint(), &[2])?;
        worst = worst.max(diff(&lhs, &rhs));

        let v = build_vtilde(sym, &g);
        let mut lhs = f.clone();
        lhs.apply_local(&v, &[0])?;
        let w = sym.rep.omega(&sym.sub.h_of(&g));
        let p_op = linalg::kron(&linalg::kron(&build_ztilde(sym, &g), &w.transpose()), &linalg::identity(dd));
        let mut rhs = f.clone();
        rhs.apply_local(&p_op, &[1])?;
        worst = worst.max(diff(&lhs, &rhs));

        for x in sym.matrices() {
            let a = x * &v;
            let b = &v * x;
            match linalg::proportionality(&a, &b, TOL) {
                Some(c) if (c.norm() - 1.0).abs() < TOL => {}
                _ => worst = worst.max(1.0),
            }
        }
    }
    Ok(worst)
}

/// Literal circuit run for small instances: each site holds `[A, L, P, R]`
/// with a blank ancilla `A`; nearest-neighbour swaps move every `R_s` into
/// `A_{s+1}`, the Bell measurement acts on `(A_s, L_s)`, and the physical
/// state is read off after the corrections. Swap gates are grouped into
/// layers in which each site takes part in at most one gate.
pub struct CircuitRun {
    pub transcripts: Vec<ProtocolTranscript>,
    pub swap_layers: usize,
}

pub fn run_swap_circuit(setup: &AbelianSetup, n: usize) -> Result<CircuitRun> {
    let d = setup.sym.dim();
    check_budget((d as u128).pow(4 * n as u32))?;
    let f = build_fiducial_rep(&setup.sym)?;
    let mut blank = vec![ZERO; d];
    blank[0] = ONE;
    let site = DenseState::new(vec![d], blank.clone())?.tensor(&f)?;
    let mut state = site.clone();
    for _ in 1..n {
        state = state.tensor(&site)?;
    }
    let layers = swap_layers(n);
    let sw = linalg::swap(d, d);
    for layer in &layers {
        for &s in layer {
            state.apply_local(&sw, &[4 * s + 3, 4 * ((s + 1) % n)])?;
        }
    }
    let steps: Vec<MeasurementStep> = (0..n)
        .map(|s| MeasurementStep { family: setup.fam.projectors(), sites: vec![4 * s, 4 * s + 1] })
        .collect();
    let tree = OutcomeTree::enumerate(&state, &steps)?;
    let target = setup.target(n)?;
    let mut transcripts = Vec::new();
    for leaf in tree.leaves() {
        let mut s = leaf.state.clone();
        for site_idx in (0..n).rev() {
            s = s.project_out(4 * site_idx + 3, &blank)?;
            s = s.group_sites(4 * site_idx, 2)?;
            s = s.project_out(4 * site_idx, &setup.fam.vectors[leaf.outcomes[site_idx]])?;
        }
        let outcomes = leaf.outcomes.iter().map(|&o| setup.fam.labels[o].clone()).collect();
        let amps = s.into_amplitudes();
        transcripts.push(setup.finish(outcomes, leaf.probability, amps, &target)?);
    }
    Ok(CircuitRun { transcripts, swap_layers: layers.len() })
}

/// Bonds `s → s+1` grouped so no site appears twice in a layer.
pub fn swap_layers(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut layers: Vec<Vec<usize>> = Vec::new();
    let mut busy: Vec<Vec<bool>> = Vec::new();
    for s in 0..n {
        let t = (s + 1) % n;
        let slot = (0..layers.len()).find(|&l| !busy[l][s] && !busy[l][t]);
        let l = slot.unwrap_or_else(|| {
            layers.push(Vec::new());
            busy.push(vec![false; n]);
            layers.len() - 1
        });
        layers[l].push(s);
        busy[l][s] = true;
        busy[l][t] = true;
    }
    layers
}

/// Joint eigenbasis (columns) of a commuting family of unitaries.
pub fn joint_eigenbasis(us: &[CMat]) -> Result<CMat> {
    for (i, a) in us.iter().enumerate() {
        for b in &us[..i] {
            if linalg::commutator_norm(a, b) > TOL {
                return Err(Error::Unsupported("symmetry operators do not commute: no common eigenbasis".into()));
            }
        }
    }
    let d = us.first().map_or(1, |u| u.nrows());
    let mut rng = ChaCha8Rng::seed_from_u64(0x7_1e55);
    for _ in 0..8 {
        let mut h = linalg::zeros(d, d);
        for u in us {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            h += u.map(|z| z * c);
        }
        let h = &h + h.adjoint();
        let (_, vecs) = linalg::eigh(&h);
        let ok = us.iter().all(|u| {
            let m = vecs.adjoint() * u * &vecs;
            (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)].norm() < TOL))
        });
        if ok {
            return Ok(vecs);
        }
    }
    Err(Error::Consistency("no joint eigenbasis found".into()))
}

/// Branches of an on-site measurement in the joint eigenbasis.
#[derive(Clone, Debug)]
pub struct TrivialBranch {
    pub outcomes: Vec<usize>,
    pub probability: f64,
    pub state: DenseState,
}

/// Measure every site in the joint eigenbasis of `us`; every branch is a
/// symmetric product state.
pub fn trivialize_onsite(state: &DenseState, us: &[CMat], sites: &[usize]) -> Result<Vec<TrivialBranch>> {
    let basis = joint_eigenbasis(us)?;
    let d = basis.nrows();
    if sites.iter().any(|&s| state.dims().get(s) != Some(&d)) {
        return Err(Error::Shape("site dimension does not match the symmetry".into()));
    }
    let family: Vec<CMat> = (0..d)
        .map(|k| linalg::projector(&basis.column(k).iter().copied().collect::<Vec<_>>()))
        .collect();
    let steps: Vec<MeasurementStep> =
        sites.iter().map(|&s| MeasurementStep { family: family.clone(), sites: vec![s] }).collect();
    let tree = OutcomeTree::enumerate(state, &steps)?;
    Ok(tree
        .leaves()
        .into_iter()
        .map(|l| TrivialBranch { outcomes: l.outcomes, probability: l.probability, state: l.state.clone() })
        .collect())
}

/// A strictly commuting extension of a quasi-commuting unitary.
#[derive(Clone, Debug)]
pub struct Lift {
    pub copies: usize,
    pub phi0: Vec<Complex64>,
    pub phi1: Vec<Complex64>,
    /// Acts on `ancilla ⊗ system`.
    pub op: CMat,
    /// `χ(g)` with `V U_g = χ(g) U_g V`.
    pub character: Vec<Complex64>,
}

/// Largest ancilla dimension searched.
pub const LIFT_ANCILLA_LIMIT: usize = 4096;

/// Extend `V` (with `V U_g = χ(g) U_g V`, `χ` a 1D character) to
/// `Ṽ = |φ₁⟩⟨φ₀| ⊗ V + |φ₀⟩⟨φ₁| ⊗ V† + (𝟙 − Π) ⊗ 𝟙`, where `φ₀` is invariant
/// and `φ₁` transforms with `χ` under `U_g^{⊗m}`, searching `m = 0..=m_max`.
/// `group_mul` is the multiplication table used to check that `χ` is a
/// character.
pub fn quasi_commuting_lift(v: &CMat, us: &[CMat], group_mul: &dyn Fn(usize, usize) -> usize, m_max: usize) -> Result<Lift> {
    let d = v.nrows();
    if us.iter().any(|u| u.nrows() != d) {
        return Err(Error::Shape("V and U_g act on different spaces".into()));
    }
    let mut chi = Vec::with_capacity(us.len());
    for u in us {
        let lhs = v * u;
        let rhs = u * v;
        let c = linalg::proportionality(&lhs, &rhs, TOL)
            .ok_or_else(|| Error::Domain("V does not quasi-commute with the symmetry".into()))?;
        chi.push(c);
    }
    for a in 0..us.len() {
        for b in 0..us.len() {
            if (chi[a] * chi[b] - chi[group_mul(a, b)]).norm() > TOL {
                return Err(Error::Domain("commutation phases do not form a character".into()));
            }
        }
    }
    let order = us.len() as f64;
    for m in 0..=m_max {
        let ad = d.pow(m as u32);
        if ad > LIFT_ANCILLA_LIMIT {
            break;
        }
        let powers: Vec<CMat> = us.iter().map(|u| linalg::kron_all(std::iter::repeat_n(u, m))).collect();
        let iso = |c: &[Complex64]| -> CMat {
            let mut p = linalg::zeros(ad, ad);
            for (w, x) in powers.iter().zip(c) {
                p += w.map(|z| z * x.conj() / order);
            }
            p
        };
        let trivial = vec![ONE; us.len()];
        let b0 = linalg::range_basis(&iso(&trivial), 0.5);
        let b1 = linalg::range_basis(&iso(&chi), 0.5);
        if b0.ncols() == 0 || b1.ncols() == 0 {
            continue;
        }
        let phi0: Vec<Complex64> = b0.column(0).iter().copied().collect();
        let phi1: Vec<Complex64> = if b0 == b1 {
            // χ trivial: V already commutes; φ₁ = φ₀ gives Ṽ = 𝟙 ⊗ V on that line.
            phi0.clone()
        } else {
            b1.column(0).iter().copied().collect()
        };
        let op = if phi0 == phi1 {
            let p = linalg::projector(&phi0);
            linalg::kron(&p, v) + linalg::kron(&(linalg::identity(ad) - &p), &linalg::identity(d))
        } else {
            let p = linalg::projector(&phi0) + linalg::projector(&phi1);
            linalg::kron(&linalg::outer(&phi1, &phi0), v)
                + linalg::kron(&linalg::outer(&phi0, &phi1), &v.adjoint())
                + linalg::kron(&(linalg::identity(ad) - p), &linalg::identity(d))
        };
        return Ok(Lift { copies: m, phi0, phi1, op, character: chi });
    }
    Err(Error::SearchFailed(format!("no suitable ancilla vectors in U^{{⊗m}} for m ≤ {m_max}")))
}

/// Residuals of a lift: commutation with `U_g^{⊗m} ⊗ U_g` and action on the
/// `φ₀` sector for a test state.
pub fn lift_residuals(lift: &Lift, v: &CMat, us: &[CMat], rho: &CMat) -> (f64, f64) {
    let comm = us
        .iter()
        .map(|u| {
            let w = linalg::kron(&linalg::kron_all(std::iter::repeat_n(u, lift.copies)), u);
            linalg::commutator_norm(&lift.op, &w)
        })
        .fold(0.0, f64::max);
    let p0 = linalg::projector(&lift.phi0);
    let p1 = linalg::projector(&lift.phi1);
    let out = &lift.op * linalg::kron(&p0, rho) * lift.op.adjoint();
    let expect = linalg::kron(&p1, &(v * rho * v.adjoint()));
    (comm, linalg::max_diff(&out, &expect))
}

/// Two-stage route from the trivial phase to `(G, μ)` for `H = G`.
#[derive(Clone, Debug)]
pub struct TrivToSptPlan {
    pub target: CocycleClass,
    pub partner: CocycleClass,
    /// `μ ⊕ μ^{-1}`, zero by construction.
    pub combined: CocycleClass,
    pub stages: Vec<String>,
}

pub fn triv_to_spt_plan(class: &CocycleClass) -> Result<TrivToSptPlan> {
    let partner = class.inverse();
    let combined = proj_reps::tensor_class_add(class, &partner)?;
    if !combined.is_trivial() {
        return Err(Error::Consistency("class plus inverse is not trivial".into()));
    }
    let stages = if class.is_trivial() {
        Vec::new()
    } else {
        vec![
            format!("prepare SPT({class}) ⊗ SPT({partner}) from the trivial phase"),
            format!("measure the SPT({partner}) factor on-site in the joint symmetric eigenbasis"),
        ]
    };
    Ok(TrivToSptPlan { target: class.clone(), partner, combined, stages })
}

/// Outcome of executing the plan on a ring of `n` sites.
#[derive(Clone, Debug)]
pub struct TrivToSptRun {
    /// The doubled tensor carries the trivial label `(G, 0)`.
    pub doubled_is_trivial: bool,
    pub min_fidelity: f64,
    pub total_probability: f64,
}

pub fn execute_triv_to_spt(class: &CocycleClass, n: usize) -> Result<TrivToSptRun> {
    let plan = triv_to_spt_plan(class)?;
    let g = class.group().clone();
    let whole = SubgroupDecomposition::whole(&g);
    let sa = build_symmetry(&whole, &plan.target)?;
    let sb = build_symmetry(&whole, &plan.partner)?;
    let ta = build_representative(&sa)?;
    let tb = build_representative(&sb)?;
    let doubled: Vec<CMat> = ta
        .matrices()
        .iter()
        .flat_map(|a| tb.matrices().iter().map(move |b| linalg::kron(a, b)))
        .collect();
    let bond = ta.bond_dim() * tb.bond_dim();
    let doubled = MpsTensor::new(doubled, Some(vec![bond]))?;
    let us: Vec<CMat> = sa.matrices().iter().zip(sb.matrices()).map(|(a, b)| linalg::kron(a, b)).collect();
    let doubled_is_trivial = mps_core::verify_phase_label(
        &doubled,
        &us,
        &PhaseLabel { subgroup: whole.clone(), class: CocycleClass::zero(&g) },
    )?;
    let sa_state = mps_core::expand_state(&ta, n)?;
    let sb_state = mps_core::expand_state(&tb, n)?;
    // Interleave to per-site (a_s, b_s).
    let joint = sa_state.tensor(&sb_state)?;
    let perm: Vec<usize> = (0..n).flat_map(|s| [s, n + s]).collect();
    let joint = joint.permute(&perm)?;
    let b_sites: Vec<usize> = (0..n).map(|s| 2 * s + 1).collect();
    let branches = trivialize_onsite(&joint, sb.matrices(), &b_sites)?;
    let basis = joint_eigenbasis(sb.matrices())?;
    let mut min_fidelity = 1.0f64;
    let mut total = 0.0;
    for br in &branches {
        total += br.probability;
        let prod: Vec<Vec<Complex64>> =
            br.outcomes.iter().map(|&k| basis.column(k).iter().copied().collect()).collect();
        let expect = sa_state.tensor(&DenseState::product(&prod)?)?.permute(&perm)?;
        min_fidelity = min_fidelity.min(sim_engine::fidelity(&br.state, &expect)?);
    }
    Ok(TrivToSptRun { doubled_is_trivial, min_fidelity, total_probability: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> (SubgroupDecomposition, CocycleClass) {
        let g = GroupSpec::new(&[(2, 2), (2, 1)]).unwrap();
        let sub = SubgroupDecomposition::new(&g, &[1, 1]).unwrap();
        let class = CocycleClass::new(sub.h_group(), vec![vec![0, 1], vec![0, 0]]).unwrap();
        (sub, class)
    }

    #[test]
    fn example_symmetry_is_a_representation() {
        let (sub, class) = example();
        let sym = build_symmetry(&sub, &class).unwrap();
        assert_eq!(sym.dim(), 8);
        assert!(sym.representation_residual() < 1e-12);
    }

    #[test]
    fn example_measurement_passes() {
        let (sub, class) = example();
        let sym = build_symmetry(&sub, &class).unwrap();
        let fam = build_measurement(&sym);
        assert_eq!(fam.index_set.len(), 8);
        let r = verify_lemma3(&fam, &sym);
        assert!(r.pass(), "{:?}", r);
    }

    #[test]
    fn slide_through_identities_hold() {
        let (sub, class) = example();
        let sym = build_symmetry(&sub, &class).unwrap();
        assert!(verify_slide_through(&sym).unwrap() < 1e-10);
    }

    #[test]
    fn swap_layers_cover_every_bond() {
        assert_eq!(swap_layers(4).len(), 2);
        assert_eq!(swap_layers(3).len(), 3);
        let all: usize = swap_layers(5).iter().map(|l| l.len()).sum();
        assert_eq!(all, 5);
    }

    fn small_setups() -> Vec<AbelianSetup> {
        let mut out = Vec::new();
        for factors in [vec![(2u64, 1u32)], vec![(2, 2)], vec![(2, 1), (2, 1)]] {
            let g = GroupSpec::new(&factors).unwrap();
            for label in crate::group_core::enumerate_phase_labels(&g) {
                let s = AbelianSetup::new(&label.subgroup, &label.class).unwrap();
                if s.sym.dim() <= 4 {
                    out.push(s);
                }
            }
        }
        out
    }

    #[test]
    fn circuit_and_ring_engines_agree() {
        for setup in small_setups() {
            let n = if setup.sym.dim() <= 2 { 3 } else { 2 };
            let ring = run_protocol(&setup, n, RunMode::Enumerate).unwrap();
            let circ = run_swap_circuit(&setup, n).unwrap();
            assert_eq!(ring.len(), circ.transcripts.len(), "{}", setup.sym.label());
            for (a, b) in ring.iter().zip(&circ.transcripts) {
                assert_eq!(a.outcomes, b.outcomes);
                assert!((a.probability - b.probability).abs() < 1e-10);
                assert!(b.fidelity > 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn lemma4_on_example() {
        let (sub, class) = example();
        let sym = build_symmetry(&sub, &class).unwrap();
        let t = build_representative(&sym).unwrap();
        let r = verify_lemma4(&sym, &t, 3).unwrap();
        assert!(r.pass(), "{r:?}");
        assert_eq!(r.kernel.len(), 1);
    }

    #[test]
    fn sampled_trials_succeed() {
        let (sub, class) = example();
        let setup = AbelianSetup::new(&sub, &class).unwrap();
        let t = run_protocol(&setup, 3, RunMode::Sample { seed: 7, trials: 50 }).unwrap();
        assert_eq!(t.len(), 50);
    }
}
