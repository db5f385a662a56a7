//! Translation-invariant MPS tensors: blocking, fiducial states, block
//! injectivity, statevector expansion on a ring, and numerical checks of how
//! an on-site symmetry acts on the virtual level.

use crate::error::{Error, Result};
use crate::group_core::{GroupSpec, PhaseLabel};
use crate::linalg::{self, CMat, ZERO};
use crate::par;
use crate::proj_reps::{self, cocycle_is_trivial};
use crate::sim_engine::{check_budget, DenseState};
use num_complex::Complex64;
use std::fmt::Write as _;

pub const EQ_TOL: f64 = 1e-10;
pub const RANK_TOL: f64 = 1e-8;

/// `d` matrices `A^i` of size `D×D`, optionally with a declared block
/// partition of the bond dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsTensor {
    mats: Vec<CMat>,
    bond: usize,
    partition: Option<Vec<usize>>,
}

impl MpsTensor {
    pub fn new(mats: Vec<CMat>, partition: Option<Vec<usize>>) -> Result<Self> {
        let bond = mats.first().map(|m| m.nrows()).ok_or_else(|| Error::Shape("tensor needs d ≥ 1".into()))?;
        if bond == 0 || mats.iter().any(|m| m.nrows() != bond || m.ncols() != bond) {
            return Err(Error::Shape("all A^i must be square of one size".into()));
        }
        if let Some(p) = &partition {
            if p.contains(&0) || p.iter().sum::<usize>() != bond {
                return Err(Error::Shape(format!("partition {p:?} does not tile D = {bond}")));
            }
        }
        Ok(MpsTensor { mats, bond, partition })
    }

    pub fn phys_dim(&self) -> usize {
        self.mats.len()
    }

    pub fn bond_dim(&self) -> usize {
        self.bond
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.mats
    }

    pub fn partition(&self) -> Option<&[usize]> {
        self.partition.as_deref()
    }

    pub fn with_partition(mut self, partition: Vec<usize>) -> Result<Self> {
        self.partition = Some(partition);
        let m = std::mem::take(&mut self.mats);
        MpsTensor::new(m, self.partition)
    }

    fn offsets(partition: &[usize]) -> Vec<usize> {
        let mut o = vec![0];
        for &p in partition {
            o.push(o.last().unwrap() + p);
        }
        o
    }

    /// `A^i_α`, the diagonal block `α` of `A^i`.
    pub fn block_of(&self, i: usize, alpha: usize) -> Result<CMat> {
        let p = self.partition.as_ref().ok_or_else(|| Error::Domain("no block partition declared".into()))?;
        let o = Self::offsets(p);
        if alpha >= p.len() {
            return Err(Error::Shape(format!("block {alpha} out of {}", p.len())));
        }
        Ok(self.mats[i].view((o[alpha], o[alpha]), (p[alpha], p[alpha])).into_owned())
    }

    /// Text form: a `d D` header, then `re im` pairs row-major over `(i, l, m)`,
    /// then an optional `partition D_1 D_2 …` line. `#` starts a comment.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.phys_dim(), self.bond);
        for m in &self.mats {
            for l in 0..self.bond {
                let row: Vec<String> = (0..self.bond)
                    .map(|c| format!("{:.17e} {:.17e}", m[(l, c)].re, m[(l, c)].im))
                    .collect();
                let _ = writeln!(s, "{}", row.join("  "));
            }
        }
        if let Some(p) = &self.partition {
            let ps: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "partition {}", ps.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut partition = None;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if let Some(rest) = line.strip_prefix("partition") {
                let p = rest
                    .split_whitespace()
                    .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("partition entry {t:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                partition = Some(p);
            } else {
                tokens.extend(line.split_whitespace().map(str::to_owned));
            }
        }
        let mut it = tokens.into_iter();
        let mut next_usize = |what: &str| -> Result<usize> {
            let t = it.next().ok_or_else(|| Error::Parse(format!("missing {what}")))?;
            t.parse().map_err(|e| Error::Parse(format!("{what} {t:?}: {e}")))
        };
        let d = next_usize("physical dimension")?;
        let bond = next_usize("bond dimension")?;
        let nums = it
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("entry {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if nums.len() != 2 * d * bond * bond {
            return Err(Error::Parse(format!(
                "expected {} numbers for d={d}, D={bond}, found {}",
                2 * d * bond * bond,
                nums.len()
            )));
        }
        let mats = (0..d)
            .map(|i| {
                CMat::from_fn(bond, bond, |l, m| {
                    let k = 2 * ((i * bond + l) * bond + m);
                    Complex64::new(nums[k], nums[k + 1])
                })
            })
            .collect();
        MpsTensor::new(mats, partition)
    }
}

/// `|ψ⟩ = Σ tr[A^{i_1}⋯A^{i_n}] |i_1…i_n⟩` on a ring of `n` sites, normalised.
pub fn expand_state(a: &MpsTensor, n: usize) -> Result<DenseState> {
    if n == 0 {
        return Err(Error::Domain("need at least one site".into()));
    }
    let d = a.phys_dim();
    check_budget((d as u128).checked_pow(n as u32).unwrap_or(u128::MAX))?;
    // Split the index tuple into a prefix handled in parallel and a suffix
    // walked depth-first with reused partial products.
    let mut head = 0;
    while head < n && d.pow(head as u32) < 256 {
        head += 1;
    }
    let tail = n - head;
    let chunk = d.pow(tail as u32);
    let parts = par::map_range(d.pow(head as u32), |p| {
        let mut prefix = linalg::identity(a.bond);
        let mut rest = p;
        let mut digits = vec![0; head];
        for k in (0..head).rev() {
            digits[k] = rest % d;
            rest /= d;
        }
        for &i in &digits {
            prefix = &prefix * &a.mats[i];
        }
        let mut out = vec![ZERO; chunk];
        let mut stack = vec![prefix];
        fill(a, &mut stack, tail, 0, &mut out);
        out
    });
    let amps: Vec<Complex64> = parts.into_iter().flatten().collect();
    DenseState::new(vec![d; n], amps)?
        .normalized()
        .map_err(|_| Error::Degenerate("every trace vanishes: zero state".into()))
}

fn fill(a: &MpsTensor, stack: &mut Vec<CMat>, depth: usize, base: usize, out: &mut [Complex64]) {
    let top = stack.last().unwrap();
    if depth == 0 {
        out[base] = linalg::trace(top);
        return;
    }
    let d = a.phys_dim();
    let stride = d.pow(depth as u32 - 1);
    for i in 0..d {
        let next = stack.last().unwrap() * &a.mats[i];
        stack.push(next);
        fill(a, stack, depth - 1, base + i * stride, out);
        stack.pop();
    }
}

/// Block `l` sites: `Ã^{i_1…i_l} = A^{i_1}⋯A^{i_l}`.
pub fn block(a: &MpsTensor, l: usize) -> Result<MpsTensor> {
    if l == 0 {
        return Err(Error::Domain("block length must be positive".into()));
    }
    let d = a.phys_dim();
    check_budget((d as u128).checked_pow(l as u32).unwrap_or(u128::MAX))?;
    let mats = par::map_range(d.pow(l as u32), |mut idx| {
        let mut digits = vec![0; l];
        for k in (0..l).rev() {
            digits[k] = idx % d;
            idx /= d;
        }
        digits.iter().fold(linalg::identity(a.bond), |acc, &i| acc * &a.mats[i])
    });
    MpsTensor::new(mats, a.partition.clone())
}

/// `|A⟩ = Σ (A^i)_{lm} |l⟩|i⟩|m⟩` over subsystems `(D, d, D)`, normalised.
pub fn fiducial_state(a: &MpsTensor) -> Result<DenseState> {
    let (d, b) = (a.phys_dim(), a.bond);
    let mut amps = vec![ZERO; b * d * b];
    for (i, m) in a.mats.iter().enumerate() {
        for l in 0..b {
            for r in 0..b {
                amps[(l * d + i) * b + r] = m[(l, r)];
            }
        }
    }
    DenseState::new(vec![b, d, b], amps)?
        .normalized()
        .map_err(|_| Error::Degenerate("zero tensor has no fiducial state".into()))
}

/// Whether `{A^i}` spans every block-diagonal matrix of the partition.
pub fn is_block_injective(a: &MpsTensor, partition: &[usize]) -> Result<bool> {
    if partition.contains(&0) || partition.iter().sum::<usize>() != a.bond {
        return Err(Error::Shape(format!("partition {partition:?} does not tile D = {}", a.bond)));
    }
    let o = MpsTensor::offsets(partition);
    let inside = |l: usize, m: usize| (0..partition.len()).any(|k| o[k] <= l && l < o[k + 1] && o[k] <= m && m < o[k + 1]);
    for m in &a.mats {
        for l in 0..a.bond {
            for c in 0..a.bond {
                if !inside(l, c) && m[(l, c)].norm() > EQ_TOL {
                    return Ok(false);
                }
            }
        }
    }
    let cols: usize = partition.iter().map(|p| p * p).sum();
    let coeff = CMat::from_fn(a.phys_dim(), cols, |i, c| {
        let mut c = c;
        for (k, &p) in partition.iter().enumerate() {
            if c < p * p {
                return a.mats[i][(o[k] + c / p, o[k] + c % p)];
            }
            c -= p * p;
        }
        unreachable!()
    });
    Ok(linalg::rank(&coeff, RANK_TOL) == cols)
}

/// `B^i = Σ_j U_{ij} A^j`.
pub fn apply_physical(a: &MpsTensor, u: &CMat) -> Result<Vec<CMat>> {
    let d = a.phys_dim();
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::Shape(format!("U is {}x{}, physical dimension is {d}", u.nrows(), u.ncols())));
    }
    Ok((0..d)
        .map(|i| {
            let mut acc = linalg::zeros(a.bond, a.bond);
            for j in 0..d {
                if u[(i, j)] != ZERO {
                    acc += a.mats[j].map(|z| z * u[(i, j)]);
                }
            }
            acc
        })
        .collect())
}

/// Virtual action of one group element: source block `α` lands on block
/// `target[α]` conjugated by `omega[α]` with phase `e^{i phase[α]}`.
#[derive(Clone, Debug)]
pub struct BlockAction {
    pub target: Vec<usize>,
    pub omega: Vec<CMat>,
    pub phase: Vec<f64>,
}

/// Check `Σ_j U_{ij} A^j = P^T[⊕_α e^{iφ^α} ω_α† A^i_α ω_α] P` for every
/// group element and physical index.
pub fn verify_symmetry_action(a: &MpsTensor, us: &[CMat], actions: &[BlockAction]) -> Result<bool> {
    if us.len() != actions.len() {
        return Err(Error::Shape("one block action per symmetry operator".into()));
    }
    let partition = a.partition.clone().unwrap_or_else(|| vec![a.bond]);
    let m = partition.len();
    let o = MpsTensor::offsets(&partition);
    for (u, act) in us.iter().zip(actions) {
        if act.target.len() != m || act.omega.len() != m || act.phase.len() != m {
            return Err(Error::Shape(format!("block action must cover {m} blocks")));
        }
        let mut seen = vec![false; m];
        for (al, &be) in act.target.iter().enumerate() {
            if be >= m || std::mem::replace(&mut seen[be], true) {
                return Ok(false);
            }
            let w = &act.omega[al];
            if w.nrows() != partition[al] || w.ncols() != partition[al] {
                return Err(Error::Shape(format!("ω for block {al} has the wrong size")));
            }
            if partition[be] != partition[al] {
                return Ok(false);
            }
        }
        let lhs = apply_physical(a, u)?;
        for (i, b) in lhs.iter().enumerate() {
            let mut rhs = linalg::zeros(a.bond, a.bond);
            for al in 0..m {
                let be = act.target[al];
                let w = &act.omega[al];
                let blk = a.mats[i].view((o[al], o[al]), (partition[al], partition[al])).into_owned();
                let c = Complex64::from_polar(1.0, act.phase[al]);
                let img = (w.adjoint() * blk * w).map(|z| z * c);
                rhs.view_mut((o[be], o[be]), (partition[be], partition[be])).copy_from(&img);
            }
            if linalg::max_diff(b, &rhs) > EQ_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Find the block action of `U` on a block-injective tensor: for each source
/// block `α`, the unique target `β` and unitary `W` with
/// `B^i_β = W† A^i_α W` for all `i` (trivial phases). `None` if no
/// consistent action exists.
pub fn detect_block_action(a: &MpsTensor, u: &CMat) -> Result<Option<BlockAction>> {
    let partition = a.partition.clone().unwrap_or_else(|| vec![a.bond]);
    let m = partition.len();
    let o = MpsTensor::offsets(&partition);
    let b = apply_physical(a, u)?;
    let blocks = |mats: &[CMat], k: usize| -> Vec<CMat> {
        mats.iter().map(|x| x.view((o[k], o[k]), (partition[k], partition[k])).into_owned()).collect()
    };
    let mut target = vec![usize::MAX; m];
    let mut omega = vec![CMat::zeros(0, 0); m];
    let mut used = vec![false; m];
    for al in 0..m {
        let src = blocks(&a.mats, al);
        let mut found = None;
        for be in 0..m {
            if used[be] || partition[be] != partition[al] {
                continue;
            }
            if let Some(w) = intertwiner(&src, &blocks(&b, be)) {
                found = Some((be, w));
                break;
            }
        }
        match found {
            Some((be, w)) => {
                used[be] = true;
                target[al] = be;
                omega[al] = w;
            }
            None => return Ok(None),
        }
    }
    let act = BlockAction { target, omega, phase: vec![0.0; m] };
    Ok(if verify_symmetry_action(a, std::slice::from_ref(u), std::slice::from_ref(&act))? { Some(act) } else { None })
}

/// Unitary `W` with `W B^i = A^i W` for all `i`, via the null vector of the
/// stacked linear system.
fn intertwiner(a: &[CMat], b: &[CMat]) -> Option<CMat> {
    let n = a[0].nrows();
    let scale: f64 = a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
    if scale < EQ_TOL {
        return None;
    }
    let mut sys = linalg::zeros(a.len() * n * n, n * n);
    for (i, (ai, bi)) in a.iter().zip(b).enumerate() {
        for r in 0..n {
            for c in 0..n {
                let row = (i * n + r) * n + c;
                // (W B)_{rc} − (A W)_{rc}
                for x in 0..n {
                    sys[(row, r * n + x)] += bi[(x, c)];
                    sys[(row, x * n + c)] -= ai[(r, x)];
                }
            }
        }
    }
    let (sigma, v) = linalg::smallest_right_singular(&sys);
    if sigma > RANK_TOL * scale.max(1.0) {
        return None;
    }
    let w = CMat::from_row_slice(n, n, &v);
    let t = linalg::trace(&(&w * w.adjoint())).re / n as f64;
    if t < 1e-14 {
        return None;
    }
    let w = w.map(|z| z / t.sqrt());
    (linalg::unitarity_residual(&w) < RANK_TOL).then_some(w)
}

/// Whether the tensor carries the phase `label` under the representation `us`
/// (one operator per element of the label's parent group, lexicographic).
pub fn verify_phase_label(a: &MpsTensor, us: &[CMat], label: &PhaseLabel) -> Result<bool> {
    let partition = a.partition.clone().ok_or_else(|| Error::Domain("tensor has no declared partition".into()))?;
    if !is_block_injective(a, &partition)? {
        return Err(Error::Domain("tensor is not block-injective for its partition".into()));
    }
    let sub = &label.subgroup;
    let g: &GroupSpec = sub.parent();
    if us.len() != g.order() {
        return Err(Error::Shape(format!("{} operators for a group of order {}", us.len(), g.order())));
    }
    if partition.len() != sub.k_group().order() {
        return Ok(false);
    }
    let mut actions = Vec::with_capacity(us.len());
    for u in us {
        match detect_block_action(a, u)? {
            Some(act) => actions.push(act),
            None => return Ok(false),
        }
    }
    let stab: Vec<_> = g.elements().into_iter().filter(|x| actions[g.index(x)].target[0] == 0).collect();
    if stab != sub.h_tilde() {
        return Ok(false);
    }
    let h = sub.h_group();
    let omegas: Vec<CMat> = h.elements().iter().map(|x| actions[g.index(&sub.embed_h(x))].omega[0].clone()).collect();
    let cocycle = match proj_reps::cocycle_of_rep(h, &omegas) {
        Ok(c) => c,
        Err(_) => return Ok(false),
    };
    let ratio = cocycle.ratio(&proj_reps::standard_cocycle(&label.class))?;
    Ok(cocycle_is_trivial(&ratio).0)
}
