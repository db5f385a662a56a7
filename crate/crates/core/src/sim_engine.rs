//! Dense statevector simulation: local operators, projective measurements with
//! exhaustive branching or Born-rule sampling, entropies and fidelities.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::par;
use num_complex::Complex64;
use rand::Rng;

/// Largest amplitude count a state may hold.
pub const AMPLITUDE_BUDGET: usize = 1 << 24;
/// Branches below this probability are pruned.
pub const PRUNE: f64 = 1e-12;
/// Tolerance for completeness of a measurement family.
pub const COMPLETENESS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    dims: Vec<usize>,
    amps: Vec<Complex64>,
}

pub fn check_budget(needed: u128) -> Result<()> {
    if needed > AMPLITUDE_BUDGET as u128 {
        return Err(Error::Budget { needed, budget: AMPLITUDE_BUDGET as u128 });
    }
    Ok(())
}

impl DenseState {
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        let len: u128 = dims.iter().map(|&d| d as u128).product();
        check_budget(len)?;
        if len != amps.len() as u128 {
            return Err(Error::Shape(format!("{} amplitudes for dims {:?}", amps.len(), dims)));
        }
        Ok(DenseState { dims, amps })
    }

    /// `|0…0⟩`.
    pub fn zero(dims: Vec<usize>) -> Result<Self> {
        let len: u128 = dims.iter().map(|&d| d as u128).product();
        check_budget(len)?;
        let mut amps = vec![ZERO; len as usize];
        amps[0] = ONE;
        Ok(DenseState { dims, amps })
    }

    /// Tensor product of single-site vectors.
    pub fn product(sites: &[Vec<Complex64>]) -> Result<Self> {
        let mut s = DenseState { dims: vec![], amps: vec![ONE] };
        for v in sites {
            s = s.tensor(&DenseState { dims: vec![v.len()], amps: v.clone() })?;
        }
        Ok(s)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }

    /// Normalise in place; errors on the zero vector.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::Degenerate("zero state cannot be normalised".into()));
        }
        for z in self.amps.iter_mut() {
            *z /= n;
        }
        Ok(n)
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    pub fn tensor(&self, other: &DenseState) -> Result<DenseState> {
        check_budget(self.amps.len() as u128 * other.amps.len() as u128)?;
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let m = other.amps.len();
        let mut amps = vec![ZERO; self.amps.len() * m];
        par::fill_indexed(&mut amps, |i| self.amps[i / m] * other.amps[i % m]);
        Ok(DenseState { dims, amps })
    }

    /// Reorder sites: new site `k` is old site `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<DenseState> {
        let n = self.dims.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Shape(format!("{perm:?} is not a permutation of {n} sites")));
        }
        let old_strides = self.strides();
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut amps = vec![ZERO; self.amps.len()];
        par::fill_indexed(&mut amps, |mut i| {
            let mut src = 0;
            for k in (0..n).rev() {
                let x = i % dims[k];
                i /= dims[k];
                src += x * old_strides[perm[k]];
            }
            self.amps[src]
        });
        Ok(DenseState { dims, amps })
    }

    fn check_sites(&self, sites: &[usize]) -> Result<usize> {
        let mut seen = vec![false; self.dims.len()];
        for &s in sites {
            if s >= self.dims.len() || std::mem::replace(&mut seen[s], true) {
                return Err(Error::Shape(format!("invalid site list {sites:?}")));
            }
        }
        Ok(sites.iter().map(|&s| self.dims[s]).product())
    }

    /// Apply `op` to the listed sites (first listed site most significant).
    pub fn apply_local(&mut self, op: &CMat, sites: &[usize]) -> Result<()> {
        let sub = self.check_sites(sites)?;
        if op.nrows() != sub || op.ncols() != sub {
            return Err(Error::Shape(format!(
                "operator {}x{} on sites of total dimension {sub}",
                op.nrows(),
                op.ncols()
            )));
        }
        let strides = self.strides();
        let sdims: Vec<usize> = sites.iter().map(|&s| self.dims[s]).collect();
        let offsets: Vec<usize> = (0..sub)
            .map(|mut x| {
                let mut off = 0;
                for k in (0..sites.len()).rev() {
                    off += (x % sdims[k]) * strides[sites[k]];
                    x /= sdims[k];
                }
                off
            })
            .collect();
        let others: Vec<usize> = (0..self.dims.len()).filter(|s| !sites.contains(s)).collect();
        let base_of = |mut j: usize| {
            let mut off = 0;
            for &s in others.iter().rev() {
                off += (j % self.dims[s]) * strides[s];
                j /= self.dims[s];
            }
            off
        };
        let opm: Vec<Complex64> = (0..sub * sub).map(|k| op[(k / sub, k % sub)]).collect();
        let src = &self.amps;
        let mut blocks = vec![ZERO; src.len()];
        par::for_each_chunk(&mut blocks, sub, |j, chunk| {
            let base = base_of(j);
            let v: Vec<Complex64> = offsets.iter().map(|&o| src[base + o]).collect();
            for (row, out) in chunk.iter_mut().enumerate() {
                let r = &opm[row * sub..(row + 1) * sub];
                *out = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            }
        });
        let mut out = vec![ZERO; src.len()];
        for (j, chunk) in blocks.chunks(sub).enumerate() {
            let base = base_of(j);
            for (row, x) in chunk.iter().enumerate() {
                out[base + offsets[row]] = *x;
            }
        }
        self.amps = out;
        Ok(())
    }

    /// Contract one site against `⟨v|`, removing it.
    pub fn project_out(&self, site: usize, v: &[Complex64]) -> Result<DenseState> {
        self.check_sites(&[site])?;
        let d = self.dims[site];
        if v.len() != d {
            return Err(Error::Shape(format!("vector of length {} on a site of dimension {d}", v.len())));
        }
        let stride = self.strides()[site];
        let mut dims = self.dims.clone();
        dims.remove(site);
        let len = self.amps.len() / d;
        let mut amps = vec![ZERO; len];
        par::fill_indexed(&mut amps, |j| {
            let (hi, lo) = (j / stride, j % stride);
            let base = hi * stride * d + lo;
            (0..d).map(|x| v[x].conj() * self.amps[base + x * stride]).sum()
        });
        Ok(DenseState { dims, amps })
    }

    /// Merge a contiguous run of sites into one site of the product dimension.
    pub fn group_sites(&self, start: usize, count: usize) -> Result<DenseState> {
        if start + count > self.dims.len() || count == 0 {
            return Err(Error::Shape("site run out of range".into()));
        }
        let mut dims = self.dims[..start].to_vec();
        dims.push(self.dims[start..start + count].iter().product());
        dims.extend_from_slice(&self.dims[start + count..]);
        Ok(DenseState { dims, amps: self.amps.clone() })
    }

    /// `‖P ψ‖²` for an operator on the listed sites.
    pub fn probability(&self, p: &CMat, sites: &[usize]) -> Result<f64> {
        let mut s = self.clone();
        s.apply_local(p, sites)?;
        Ok(s.norm().powi(2))
    }

    /// Reduced density matrix on `sites` (in the listed order).
    pub fn reduced_density(&self, sites: &[usize]) -> Result<CMat> {
        let da = self.check_sites(sites)?;
        let rest: Vec<usize> = (0..self.dims.len()).filter(|s| !sites.contains(s)).collect();
        let mut perm = sites.to_vec();
        perm.extend(&rest);
        let p = self.permute(&perm)?;
        let db = p.amps.len() / da;
        let m = CMat::from_row_slice(da, db, &p.amps);
        Ok(&m * m.adjoint())
    }
}

/// Measurement mode.
pub enum Mode<'a, R: Rng> {
    Enumerate,
    Sample(&'a mut R),
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub outcome: usize,
    pub probability: f64,
    pub state: DenseState,
}

fn check_completeness(family: &[CMat]) -> Result<()> {
    let n = family.first().map_or(0, |p| p.nrows());
    let mut sum = linalg::zeros(n, n);
    for p in family {
        if p.nrows() != n {
            return Err(Error::Shape("projectors of different sizes".into()));
        }
        sum += p;
    }
    let r = linalg::max_diff(&sum, &linalg::identity(n));
    if r > COMPLETENESS_TOL {
        return Err(Error::Domain(format!("measurement family incomplete (residual {r:.2e})")));
    }
    Ok(())
}

/// Projective measurement of `family` on `sites`. Enumerate returns every
/// branch above the pruning threshold with normalised post-measurement states;
/// sampling returns a single branch drawn by the Born rule.
pub fn measure<R: Rng>(state: &DenseState, family: &[CMat], sites: &[usize], mode: Mode<'_, R>) -> Result<Vec<Branch>> {
    check_completeness(family)?;
    let total = state.norm().powi(2);
    let project = |k: usize| -> Result<DenseState> {
        let mut s = state.clone();
        s.apply_local(&family[k], sites)?;
        Ok(s)
    };
    match mode {
        Mode::Enumerate => {
            let mut branches = Vec::new();
            for k in 0..family.len() {
                let mut s = project(k)?;
                let prob = s.norm().powi(2) / total;
                if prob >= PRUNE {
                    s.normalize()?;
                    branches.push(Branch { outcome: k, probability: prob, state: s });
                }
            }
            Ok(branches)
        }
        Mode::Sample(rng) => {
            // Born weights from the reduced state; only the drawn branch is projected
            let rho = state.reduced_density(sites)?;
            let probs: Vec<f64> = family
                .iter()
                .map(|p| {
                    let w = linalg::hs_inner(p, &rho).re / total;
                    if w >= PRUNE { w } else { 0.0 }
                })
                .collect();
            let mass: f64 = probs.iter().sum();
            if mass <= 0.0 {
                return Err(Error::Degenerate("no outcome has positive probability".into()));
            }
            let mut u = rng.gen::<f64>() * mass;
            let last = probs.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            for (k, &w) in probs.iter().enumerate() {
                if w > 0.0 && (u < w || k == last) {
                    let mut s = project(k)?;
                    s.normalize()?;
                    return Ok(vec![Branch { outcome: k, probability: w, state: s }]);
                }
                u -= w;
            }
            Err(Error::Degenerate("no outcome has positive probability".into()))
        }
    }
}

/// One measurement in a sequence.
#[derive(Clone, Debug)]
pub struct MeasurementStep {
    pub family: Vec<CMat>,
    pub sites: Vec<usize>,
}

/// Branching record of a measurement sequence. Each node carries the
/// conditional probability of its outcome; leaves carry the final state.
#[derive(Clone, Debug)]
pub struct OutcomeTree {
    pub step: usize,
    pub outcome: Option<usize>,
    pub probability: f64,
    pub children: Vec<OutcomeTree>,
    pub state: Option<DenseState>,
}

/// A root-to-leaf path of an [`OutcomeTree`].
#[derive(Clone, Debug)]
pub struct Leaf<'a> {
    pub outcomes: Vec<usize>,
    pub probability: f64,
    pub state: &'a DenseState,
}

impl OutcomeTree {
    /// Enumerate every branch of a measurement sequence.
    pub fn enumerate(state: &DenseState, steps: &[MeasurementStep]) -> Result<OutcomeTree> {
        fn grow(step: usize, outcome: Option<usize>, p: f64, s: DenseState, steps: &[MeasurementStep]) -> Result<OutcomeTree> {
            if step == steps.len() {
                return Ok(OutcomeTree { step, outcome, probability: p, children: vec![], state: Some(s) });
            }
            let st = &steps[step];
            let branches = measure::<rand_chacha::ChaCha8Rng>(&s, &st.family, &st.sites, Mode::Enumerate)?;
            let children = branches
                .into_iter()
                .map(|b| grow(step + 1, Some(b.outcome), b.probability, b.state, steps))
                .collect::<Result<Vec<_>>>()?;
            Ok(OutcomeTree { step, outcome, probability: p, children, state: None })
        }
        let s = state.clone().normalized()?;
        grow(0, None, 1.0, s, steps)
    }

    pub fn leaves(&self) -> Vec<Leaf<'_>> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a OutcomeTree, path: &mut Vec<usize>, p: f64, out: &mut Vec<Leaf<'a>>) {
            if let Some(o) = t.outcome {
                path.push(o);
            }
            let p = p * t.probability;
            if let Some(s) = &t.state {
                out.push(Leaf { outcomes: path.clone(), probability: p, state: s });
            }
            for c in &t.children {
                walk(c, path, p, out);
            }
            if t.outcome.is_some() {
                path.pop();
            }
        }
        walk(self, &mut Vec::new(), 1.0, &mut out);
        out
    }

    /// Largest deviation from 1 of the children's probability sum at any node.
    pub fn normalization_defect(&self) -> f64 {
        if self.children.is_empty() {
            return 0.0;
        }
        let s: f64 = self.children.iter().map(|c| c.probability).sum();
        self.children.iter().map(|c| c.normalization_defect()).fold((s - 1.0).abs(), f64::max)
    }
}

/// Entanglement entropy (bits) between `cut` and the remaining sites.
pub fn entropy(state: &DenseState, cut: &[usize]) -> Result<f64> {
    let da = state.check_sites(cut)?;
    let rest: Vec<usize> = (0..state.n_sites()).filter(|s| !cut.contains(s)).collect();
    let mut perm = cut.to_vec();
    perm.extend(&rest);
    let p = state.permute(&perm)?;
    let db = p.len() / da;
    let m = CMat::from_row_slice(da, db, &p.amps);
    let nrm = state.norm().powi(2);
    let sv = linalg::singular_values(&m);
    Ok(sv
        .iter()
        .map(|s| s * s / nrm)
        .filter(|&q| q > 1e-15)
        .map(|q| -q * q.log2())
        .sum::<f64>()
        .max(0.0))
}

/// Largest entropy over the contiguous cuts `{0..k}` and every single site.
pub fn max_cut_entropy(state: &DenseState) -> Result<f64> {
    let n = state.n_sites();
    let mut worst = 0.0f64;
    for k in 1..n {
        worst = worst.max(entropy(state, &(0..k).collect::<Vec<_>>())?);
        worst = worst.max(entropy(state, &[k])?);
    }
    Ok(worst)
}

/// `|⟨a|b⟩|²` for normalised inputs (inputs are normalised on the fly).
pub fn fidelity(a: &DenseState, b: &DenseState) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!("dims {:?} vs {:?}", a.dims(), b.dims())));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("fidelity with the zero vector".into()));
    }
    Ok((linalg::inner(&a.amps, &b.amps).norm() / (na * nb)).powi(2))
}
