use crate::config::{ExperimentConfig, ModeName, DEFAULT_SEED, DEFAULT_TRIALS};
use gcmf::abelian_protocol::{
    build_measurement, build_symmetry, build_vtilde, format_outcomes, lift_residuals, quasi_commuting_lift, run_protocol,
    verify_lemma3, verify_lemma4, verify_slide_through, AbelianSetup, RunMode,
};
use gcmf::group_core::{enumerate_phase_labels, GroupElement};
use gcmf::linalg;
use gcmf::nonabelian_d8::{self as d8, JoinMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;

const TOL: f64 = 1e-10;
const PROB_TOL: f64 = 1e-9;

/// How a command failed; maps onto the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad or incomplete configuration (exit 2).
    Config(String),
    /// A check did not hold or a run could not complete (exit 1).
    Check(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Check(_) => 1,
        }
    }
}

/// Text for stdout plus optional per-branch records.
pub struct Report {
    pub text: String,
    pub records: Option<String>,
    pub ok: bool,
}

fn cfg_err(e: String) -> Failure {
    Failure::Config(e)
}

fn run_err(e: gcmf::Error) -> Failure {
    Failure::Check(e.to_string())
}

struct Checks {
    text: String,
    passed: usize,
    total: usize,
}

impl Checks {
    fn new() -> Self {
        Checks { text: String::new(), passed: 0, total: 0 }
    }

    fn add(&mut self, name: &str, value: f64, ok: bool) {
        self.total += 1;
        self.passed += ok as usize;
        let _ = writeln!(self.text, "check {name} {value:.12e} {}", if ok { "PASS" } else { "FAIL" });
    }

    fn finish(mut self) -> (String, bool) {
        let _ = writeln!(self.text, "summary passed={} total={}", self.passed, self.total);
        (self.text, self.passed == self.total)
    }
}

fn abelian_setup(cfg: &ExperimentConfig) -> Result<AbelianSetup, Failure> {
    let g = cfg.group().map_err(cfg_err)?;
    let sub = cfg.subgroup(&g).map_err(cfg_err)?;
    let class = cfg.class(&sub).map_err(cfg_err)?;
    AbelianSetup::new(&sub, &class).map_err(run_err)
}

fn run_mode(cfg: &ExperimentConfig) -> RunMode {
    match cfg.mode.unwrap_or_default() {
        ModeName::Enumerate => RunMode::Enumerate,
        ModeName::Sample => RunMode::Sample {
            seed: cfg.seed.unwrap_or(DEFAULT_SEED),
            trials: cfg.trials.unwrap_or(DEFAULT_TRIALS),
        },
    }
}

pub fn verify_abelian(cfg: &ExperimentConfig) -> Result<Report, Failure> {
    let n = cfg.n(3).map_err(cfg_err)?;
    let setup = abelian_setup(cfg)?;
    let mut c = Checks::new();
    let _ = writeln!(c.text, "phase {} d={} n={n}", setup.sym.label(), setup.sym.dim());

    let l3 = verify_lemma3(&setup.fam, &setup.sym);
    c.add("lemma3.completeness", l3.completeness, l3.completeness < TOL);
    c.add("lemma3.symmetry", l3.symmetry, l3.symmetry < TOL);
    c.add("lemma3.orthonormality", l3.orthonormality, l3.orthonormality < TOL);
    c.add("lemma3.trace_identity", l3.trace_identity, l3.trace_identity < TOL);

    let l4 = verify_lemma4(&setup.sym, &setup.tensor, n).map_err(run_err)?;
    c.add("lemma4.max_twisted", l4.max_twisted, l4.max_twisted < TOL);
    c.add("lemma4.identity_fidelity", l4.identity_fidelity, l4.identity_fidelity > 1.0 - PROB_TOL);

    let slide = verify_slide_through(&setup.sym).map_err(run_err)?;
    c.add("slide_through", slide, slide < TOL);

    match run_protocol(&setup, n, RunMode::Enumerate) {
        Ok(ts) => {
            let total: f64 = ts.iter().map(|t| t.probability).sum();
            let nontrivial = ts.iter().filter(|t| !t.global_is_identity).count();
            let min_fid = ts.iter().map(|t| t.fidelity).fold(1.0, f64::min);
            c.add("protocol.probability_defect", (total - 1.0).abs(), (total - 1.0).abs() <= PROB_TOL);
            c.add("protocol.nontrivial_global", nontrivial as f64, nontrivial == 0);
            c.add("protocol.min_fidelity", min_fid, min_fid >= 1.0 - PROB_TOL);
        }
        Err(e) => {
            let _ = writeln!(c.text, "check protocol FAIL {e}");
            c.total += 1;
        }
    }
    let (text, ok) = c.finish();
    Ok(Report { text, records: None, ok })
}

pub fn run_abelian(cfg: &ExperimentConfig) -> Result<Report, Failure> {
    let n = cfg.n(3).map_err(cfg_err)?;
    let setup = abelian_setup(cfg)?;
    let mode = run_mode(cfg);
    let ts = run_protocol(&setup, n, mode).map_err(run_err)?;
    let mut records = String::new();
    for t in &ts {
        let _ = writeln!(
            records,
            "outcomes=[{}] probability={:.12e} global={} fidelity={:.12e}",
            format_outcomes(&t.outcomes),
            t.probability,
            t.global,
            t.fidelity
        );
    }
    let total: f64 = ts.iter().map(|t| t.probability).sum();
    let min_fid = ts.iter().map(|t| t.fidelity).fold(1.0, f64::min);
    let all_trivial = ts.iter().all(|t| t.global_is_identity);
    let mut text = String::new();
    let _ = writeln!(text, "phase {} n={n} mode={mode:?}", setup.sym.label());
    let _ = writeln!(text, "branches={}", ts.len());
    let _ = writeln!(text, "probability_sum={total:.12e}");
    let _ = writeln!(text, "min_fidelity={min_fid:.12e}");
    let _ = writeln!(text, "global_trivial={all_trivial}");
    let ok = all_trivial && min_fid >= 1.0 - PROB_TOL;
    Ok(Report { text, records: Some(records), ok })
}

pub fn run_d8(cfg: &ExperimentConfig) -> Result<Report, Failure> {
    let kind = cfg.kind().map_err(cfg_err)?;
    let n = cfg.n(4).map_err(cfg_err)?;
    let l = cfg.l.unwrap_or(1);
    if n < 2 {
        return Err(Failure::Config("run-d8 needs n >= 2".into()));
    }
    let mode = match cfg.mode.unwrap_or_default() {
        ModeName::Enumerate => JoinMode::Enumerate,
        ModeName::Sample => JoinMode::Sample {
            seed: cfg.seed.unwrap_or(DEFAULT_SEED),
            trials: cfg.trials.unwrap_or(DEFAULT_TRIALS),
        },
    };
    let setup = d8::JoinSetup::new(kind, d8::d8_tables().map_err(run_err)?).map_err(run_err)?;
    let run = d8::run_with_setup(&setup, n, l, mode).map_err(run_err)?;

    // coarse string -> (probability, count of fine outcomes or trials)
    let mut table: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    match mode {
        JoinMode::Enumerate => {
            let law = d8::round1_distribution(&setup, n).map_err(run_err)?;
            for (k, p) in &law.coarse {
                table.insert(k.clone(), (*p, 0));
            }
            let mut seen = std::collections::BTreeSet::new();
            for t in &run.transcripts {
                if seen.insert(t.round1.fine.clone()) {
                    table.entry(t.round1.coarse()).or_insert((0.0, 0)).1 += 1;
                }
            }
        }
        JoinMode::Sample { trials, .. } => {
            for t in &run.transcripts {
                let e = table.entry(t.round1.coarse()).or_insert((0.0, 0));
                e.1 += 1;
                e.0 = e.1 as f64 / trials as f64;
            }
        }
    }

    let mut text = String::new();
    let _ = writeln!(text, "# kind={kind} n={n} l={l} mode={mode:?}");
    let _ = writeln!(text, "coarse,probability,count");
    for (k, (p, count)) in &table {
        let _ = writeln!(text, "{k},{p:.12e},{count}");
    }
    let s = run.summary();
    let _ = writeln!(text, "# round 2");
    let _ = writeln!(text, "total={:.12e}", s.total);
    let _ = writeln!(text, "success={:.12e}", s.success);
    let _ = writeln!(text, "infeasible={:.12e}", s.infeasible);
    let _ = writeln!(text, "unpairable={:.12e}", s.unpairable);
    match s.min_fidelity {
        Some(f) => {
            let _ = writeln!(text, "min_fidelity={f:.12e}");
        }
        None => {
            let _ = writeln!(text, "min_fidelity=none");
        }
    }
    let bound = d8::p_fail_bound(n, l);
    let _ = writeln!(text, "p_fail_bound={bound:.12e}");
    let _ = writeln!(text, "p_fail_observed={:.12e}", s.infeasible);

    let mut records = String::new();
    for t in &run.transcripts {
        let depth = t.depth.map_or("-".to_string(), |d| d.to_string());
        let fine: Vec<String> = t.round1.fine.iter().map(|x| x.to_string()).collect();
        let r2: Vec<String> = t.round2.iter().map(|x| x.to_string()).collect();
        let fid = t.fidelity.map_or("-".to_string(), |f| format!("{f:.12e}"));
        let _ = writeln!(
            records,
            "round1={} fine=[{}] verdict={} depth={depth} round2=[{}] probability={:.12e} fidelity={fid}",
            t.round1,
            fine.join(" "),
            t.verdict,
            r2.join(" "),
            t.probability
        );
    }
    let ok = s.min_fidelity.is_none_or(|f| f >= 1.0 - PROB_TOL);
    Ok(Report { text, records: Some(records), ok })
}

pub fn phase_diagram(cfg: &ExperimentConfig) -> Result<Report, Failure> {
    let g = cfg.group().map_err(cfg_err)?;
    let mut text = String::new();
    let _ = writeln!(text, "subgroup,mu,d,irrep_dim,k_order,lemma3");
    let mut ok = true;
    for label in enumerate_phase_labels(&g) {
        let sym = build_symmetry(&label.subgroup, &label.class).map_err(run_err)?;
        let pass = verify_lemma3(&build_measurement(&sym), &sym).pass();
        ok &= pass;
        let _ = writeln!(
            text,
            "{},\"{}\",{},{},{},{}",
            label.subgroup,
            label.class,
            sym.dim(),
            sym.irrep_dim(),
            sym.k_order(),
            if pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(Report { text, records: None, ok })
}

/// Lifts `Ṽ_q` for each generator `q` of the configured group (if any) and
/// `𝟙 ⊗ Z` for the D₈ SPT symmetry.
pub fn lift_check(cfg: &ExperimentConfig) -> Result<Report, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(DEFAULT_SEED));
    let mut c = Checks::new();
    if cfg.group.is_some() {
        let setup = abelian_setup(cfg)?;
        let sym = &setup.sym;
        let g = sym.group().clone();
        let mul = |a: usize, b: usize| g.index(&g.add(&g.element(a), &g.element(b)));
        for m in 0..g.rank() {
            let mut r = vec![0; g.rank()];
            r[m] = 1;
            let q = GroupElement(r);
            let v = build_vtilde(sym, &q);
            match quasi_commuting_lift(&v, sym.matrices(), &mul, 2) {
                Ok(lift) => {
                    let psi = linalg::random_state(v.nrows(), &mut rng);
                    let (comm, sector) = lift_residuals(&lift, &v, sym.matrices(), &linalg::projector(&psi));
                    let _ = writeln!(c.text, "lift V{q} copies={}", lift.copies);
                    c.add(&format!("lift.V{q}.commutator"), comm, comm < TOL);
                    c.add(&format!("lift.V{q}.sector"), sector, sector < TOL);
                }
                Err(e) => {
                    let _ = writeln!(c.text, "check lift.V{q} FAIL {e}");
                    c.total += 1;
                }
            }
        }
    }
    let t = d8::d8_tables().map_err(run_err)?;
    let us = t.spt_symmetry();
    let z = d8::z_right();
    let lift = quasi_commuting_lift(&z, &us, &d8::d8_mul, 2).map_err(run_err)?;
    let psi = linalg::random_state(z.nrows(), &mut rng);
    let (comm, sector) = lift_residuals(&lift, &z, &us, &linalg::projector(&psi));
    let _ = writeln!(c.text, "lift d8.1xZ copies={}", lift.copies);
    c.add("lift.d8.1xZ.commutator", comm, comm < TOL);
    c.add("lift.d8.1xZ.sector", sector, sector < TOL);
    let obstructed = d8::locc_obstruction_check(&t.omega);
    c.add("locc_obstruction.d8", obstructed as u8 as f64, obstructed);
    let (text, ok) = c.finish();
    Ok(Report { text, records: None, ok })
}
