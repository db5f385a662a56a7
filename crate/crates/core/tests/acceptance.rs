//! Acceptance criteria 1–7. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use gcmf::abelian_protocol::{
    build_measurement, build_symmetry, build_vtilde, lift_residuals, quasi_commuting_lift, run_protocol, verify_lemma3,
    AbelianSetup, RunMode,
};
use gcmf::cohomology::{cocycle_is_trivial, Cocycle, GroupTable};
use gcmf::group_core::{enumerate_phase_labels, GroupElement, GroupSpec, SubgroupDecomposition};
use gcmf::linalg;
use gcmf::nonabelian_d8 as d8;
use gcmf::proj_reps::{self, coset_representatives, mu_irrep, onb_from_irrep, standard_cocycle, CocycleClass};
use gcmf::RationalPhase;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

const EQ_TOL: f64 = 1e-10;
const PROB_TOL: f64 = 1e-9;
const FIDELITY_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-12;
const MC_SAMPLES: usize = 100_000;
const MC_SEED: u64 = 20_240_917;

type Check = Result<(bool, String), String>;

fn criterion(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Check) -> bool {
    let t = Instant::now();
    let res = f();
    let el = t.elapsed();
    let (ok, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    let timely = el <= limit;
    let verdict = if ok && timely { "PASS" } else { "FAIL" };
    let late = if timely { "" } else { " [over time limit]" };
    println!(
        "criterion {id} {verdict} {name}: {detail} ({:.2}s / limit {}s){late}",
        el.as_secs_f64(),
        limit.as_secs()
    );
    ok && timely
}

fn spec(factors: &[(u64, u32)]) -> GroupSpec {
    GroupSpec::new(factors).expect("valid group")
}

fn app_b_case() -> Result<(SubgroupDecomposition, CocycleClass), String> {
    let g = spec(&[(2, 2), (2, 1)]);
    let sub = SubgroupDecomposition::new(&g, &[1, 1]).map_err(|e| e.to_string())?;
    let class = CocycleClass::new(sub.h_group(), vec![vec![0, 1], vec![0, 0]]).map_err(|e| e.to_string())?;
    Ok((sub, class))
}

fn lemma3_suite() -> Check {
    let groups = [spec(&[(2, 1)]), spec(&[(2, 2)]), spec(&[(2, 1), (2, 1)]), spec(&[(2, 2), (2, 1)])];
    let (mut comp, mut sym, mut tr) = (0.0f64, 0.0f64, 0.0f64);
    let mut labels = 0;
    for g in &groups {
        for label in enumerate_phase_labels(g) {
            let s = build_symmetry(&label.subgroup, &label.class).map_err(|e| format!("{label}: {e}"))?;
            let fam = build_measurement(&s);
            if fam.len() != s.dim() * s.dim() {
                return Ok((false, format!("{label}: {} projectors for d={}", fam.len(), s.dim())));
            }
            let r = verify_lemma3(&fam, &s);
            comp = comp.max(r.completeness);
            sym = sym.max(r.symmetry);
            tr = tr.max(r.trace_identity);
            labels += 1;
        }
    }
    let (sub, class) = app_b_case()?;
    let s = build_symmetry(&sub, &class).map_err(|e| e.to_string())?;
    let fam = build_measurement(&s);
    let example = s.dim() == 8 && fam.len() == 64 && verify_lemma3(&fam, &s).pass();
    let ok = comp < EQ_TOL && sym < EQ_TOL && tr < EQ_TOL && example;
    Ok((
        ok,
        format!("{labels} labels, completeness {comp:.1e}, symmetry {sym:.1e}, trace {tr:.1e}, example d=8/64 projectors {example}"),
    ))
}

fn protocol_determinism() -> Check {
    let (sub, class) = app_b_case()?;
    let setup = AbelianSetup::new(&sub, &class).map_err(|e| e.to_string())?;
    let ts = run_protocol(&setup, 3, RunMode::Enumerate).map_err(|e| e.to_string())?;
    let total: f64 = ts.iter().map(|t| t.probability).sum();
    let global_ok = ts.iter().all(|t| t.global_is_identity);
    let min_fid = ts.iter().map(|t| t.fidelity).fold(1.0, f64::min);
    let ok = global_ok && (total - 1.0).abs() <= PROB_TOL && min_fid >= 1.0 - FIDELITY_TOL;
    Ok((
        ok,
        format!("{} branches, sum p = {total:.12}, global element trivial {global_ok}, min fidelity {min_fid:.12}", ts.len()),
    ))
}

fn spt_distribution() -> Check {
    let mut dev = 0.0f64;
    let mut odd = 0.0f64;
    for n in 2..=6 {
        let d = d8::spt_round1_distribution(n).map_err(|e| e.to_string())?;
        dev = dev.max(d.max_deviation());
        for (k, p) in &d.coarse {
            if k.chars().filter(|&c| c == 'f').count() % 2 == 1 {
                odd = odd.max(*p);
            }
        }
    }
    let mut ent = 0.0f64;
    let mut comp = 0.0f64;
    let mut fid = 1.0f64;
    for f in [2, 4, 6] {
        let r = d8::spt_error_correction(f).map_err(|e| e.to_string())?;
        ent = ent.max(r.max_entropy);
        comp = comp.max(r.complement_probability);
        fid = fid.min(r.min_fidelity);
    }
    let ok = dev < EQ_TOL && odd < ZERO_TOL && ent < EQ_TOL && comp < ZERO_TOL && fid >= 1.0 - FIDELITY_TOL;
    Ok((
        ok,
        format!("n=2..6 max deviation {dev:.1e}, odd max {odd:.1e}; round 2 entropy {ent:.1e}, complement {comp:.1e}"),
    ))
}

fn ghz_distribution() -> Check {
    let t = d8::d8_tables().map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for n in 2..=4 {
        dev = dev.max(d8::ghz_round1_distribution(n).map_err(|e| e.to_string())?.max_deviation());
    }
    let rel = d8::ghz_relations(t, 3).map_err(|e| e.to_string())?;
    let mut ent = 0.0f64;
    let mut comp = 0.0f64;
    let mut mass = 0.0f64;
    for f in [2, 4] {
        let r = d8::ghz_error_correction(f).map_err(|e| e.to_string())?;
        ent = ent.max(r.max_entropy);
        comp = comp.max(r.complement_probability);
        mass = mass.max((r.branches.iter().map(|b| b.1).sum::<f64>() - 1.0).abs());
    }
    let ok = dev < EQ_TOL
        && rel.pf_factor < EQ_TOL
        && rel.ghz_factor < EQ_TOL
        && rel.max() < EQ_TOL
        && ent < EQ_TOL
        && comp < ZERO_TOL
        && mass < PROB_TOL;
    Ok((
        ok,
        format!(
            "n=2..4 max deviation {dev:.1e}; P_f factor {:.1e}, GHZ factor {:.1e}; round 2 entropy {ent:.1e}, complement {comp:.1e}",
            rel.pf_factor, rel.ghz_factor
        ),
    ))
}

/// Exact infeasible fraction by listing every even string.
fn exact_p_fail(n: usize, l: usize) -> f64 {
    let mut bad = 0u64;
    let mut total = 0u64;
    for m in 0u64..(1 << n) {
        if m.count_ones() % 2 == 1 {
            continue;
        }
        total += 1;
        let failed: Vec<bool> = (0..n).map(|i| (m >> i) & 1 == 1).collect();
        if !d8::ErrorConfiguration::from_failed(&failed, l).correctable() {
            bad += 1;
        }
    }
    bad as f64 / total as f64
}

fn failure_bound() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [8usize, 12, 16] {
        for l in [1usize, 2] {
            // n·2^{n-(4l+1)-1} strings over 2^{n-1}
            let counted = n as f64 * 2f64.powi(n as i32 - (4 * l as i32 + 1) - 1) / 2f64.powi(n as i32 - 1);
            let bound = d8::p_fail_bound(n, l);
            let est = d8::p_fail_estimate(n, l, MC_SAMPLES, MC_SEED);
            let sigma = est.sigma(bound);
            let exact = exact_p_fail(n, l);
            let fine = bound == counted && est.fraction() <= bound + 3.0 * sigma && exact <= bound;
            ok &= fine;
            parts.push(format!("n={n} l={l}: {:.4} (exact {exact:.4}) <= {bound:.4}", est.fraction()));
        }
    }
    Ok((ok, parts.join("; ")))
}

fn rep_theory_suite() -> Check {
    let groups = [
        spec(&[(2, 1)]),
        spec(&[(2, 2)]),
        spec(&[(2, 3)]),
        spec(&[(2, 1), (2, 1)]),
        spec(&[(2, 2), (2, 1)]),
        spec(&[(3, 1), (3, 1)]),
        spec(&[(2, 1), (2, 1), (2, 1)]),
        spec(&[(2, 2), (2, 2)]),
        spec(&[(5, 1), (5, 1)]),
        spec(&[(2, 1), (2, 1), (2, 1), (2, 1)]),
        spec(&[(2, 2), (2, 1), (2, 1)]),
        spec(&[(3, 1), (3, 1), (3, 1)]),
        spec(&[(7, 1), (7, 1)]),
        spec(&[(2, 3), (2, 3)]),
        spec(&[(2, 2), (2, 2), (2, 2)]),
    ];
    let mut classes = 0;
    let mut worst = 0.0f64;
    let mut fails = Vec::new();
    for g in &groups {
        let els = g.elements();
        for class in CocycleClass::all(g) {
            classes += 1;
            if !standard_cocycle(&class).satisfies_cocycle_condition() {
                fails.push(format!("{class}: cocycle condition"));
            }
            let rep = mu_irrep(&class).map_err(|e| format!("{class}: {e}"))?;
            if !rep.cocycle().satisfies_cocycle_condition() {
                fails.push(format!("{class}: rep cocycle condition"));
            }
            worst = worst.max(rep.multiplication_residual()).max(rep.trace_residual());
            let phi = proj_reps::phi_mu(&rep);
            for (i, a) in els.iter().enumerate() {
                for (j, b) in els.iter().enumerate() {
                    let ab = g.index(&g.add(a, b));
                    if phi[ab] != g.add(&phi[i], &phi[j]) {
                        fails.push(format!("{class}: phi not a homomorphism at {a},{b}"));
                    }
                }
            }
            let kernel: Vec<GroupElement> =
                els.iter().zip(&phi).filter(|(_, p)| p.is_identity()).map(|(e, _)| e.clone()).collect();
            if kernel.as_slice() != rep.center() {
                fails.push(format!("{class}: center differs from ker phi"));
            }
            if rep.dim() * rep.dim() * rep.center().len() != g.order() {
                fails.push(format!("{class}: D^2 |Z| != |H|"));
            }
            let basis = onb_from_irrep(&rep, &coset_representatives(&rep)).map_err(|e| e.to_string())?;
            worst = worst.max(linalg::max_diff(&proj_reps::gram(&basis), &linalg::identity(basis.len())));
        }
    }
    // cocycle_is_trivial on coboundaries of random rational ν and on the Pauli cocycle
    let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
    for g in &groups[..8] {
        let table = GroupTable::abelian(g);
        for _ in 0..4 {
            let nu: Vec<RationalPhase> =
                (0..g.order()).map(|i| if i == 0 { RationalPhase::ZERO } else { RationalPhase::new(rng.gen_range(0..24), 24) }).collect();
            let gamma = Cocycle::coboundary(&table, &nu);
            match cocycle_is_trivial(&gamma) {
                (true, Some(w)) => {
                    let back = Cocycle::coboundary(&table, &w);
                    if !gamma.ratio(&back).map_err(|e| e.to_string())?.is_identically_zero() {
                        fails.push(format!("{g}: witness does not reproduce the coboundary"));
                    }
                }
                _ => fails.push(format!("{g}: coboundary not recognised")),
            }
        }
    }
    let z2z2 = spec(&[(2, 1), (2, 1)]);
    let pauli = CocycleClass::new(&z2z2, vec![vec![0, 1], vec![0, 0]]).map_err(|e| e.to_string())?;
    if cocycle_is_trivial(&standard_cocycle(&pauli)).0 {
        fails.push("Pauli cocycle reported trivial".into());
    }
    let ok = fails.is_empty() && worst < EQ_TOL;
    let mut detail = format!("{} groups, {classes} classes, max residual {worst:.1e}", groups.len());
    if let Some(f) = fails.first() {
        detail.push_str(&format!(", {} failures (first: {f})", fails.len()));
    }
    Ok((ok, detail))
}

fn obstruction_and_lift() -> Check {
    let t = d8::d8_tables().map_err(|e| e.to_string())?;
    let d8_true = d8::locc_obstruction_check(&t.omega);
    let mut abelian_false = true;
    for g in [spec(&[(2, 1), (2, 1)]), spec(&[(2, 2), (2, 1)]), spec(&[(2, 2), (2, 2)]), spec(&[(3, 1), (3, 1)])] {
        for class in CocycleClass::all(&g) {
            let rep = mu_irrep(&class).map_err(|e| e.to_string())?;
            abelian_false &= !d8::locc_obstruction_check(rep.matrices());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);

    let (sub, class) = app_b_case()?;
    let sym = build_symmetry(&sub, &class).map_err(|e| e.to_string())?;
    let g = sym.group().clone();
    let v = build_vtilde(&sym, &GroupElement(vec![0, 1]));
    let mul = |a: usize, b: usize| g.index(&g.add(&g.element(a), &g.element(b)));
    let lift = quasi_commuting_lift(&v, sym.matrices(), &mul, 2).map_err(|e| e.to_string())?;
    let psi = linalg::random_state(v.nrows(), &mut rng);
    let (c1, s1) = lift_residuals(&lift, &v, sym.matrices(), &linalg::projector(&psi));

    let z = d8::z_right();
    let us = t.spt_symmetry();
    let lift2 = quasi_commuting_lift(&z, &us, &d8::d8_mul, 2).map_err(|e| e.to_string())?;
    let psi = linalg::random_state(4, &mut rng);
    let (c2, s2) = lift_residuals(&lift2, &z, &us, &linalg::projector(&psi));

    let ok = d8_true && abelian_false && c1.max(c2) < EQ_TOL && s1.max(s2) < EQ_TOL;
    Ok((
        ok,
        format!(
            "D8 obstruction {d8_true}, abelian all commutative {abelian_false}; V-tilde(0,1) lift m={} comm {c1:.1e} sector {s1:.1e}; 1xZ lift m={} comm {c2:.1e} sector {s2:.1e}",
            lift.copies, lift2.copies
        ),
    ))
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        criterion(1, "Lemma 3 suite", s(10), lemma3_suite),
        criterion(2, "protocol determinism", s(120), protocol_determinism),
        criterion(3, "D8 SPT distribution", s(60), spt_distribution),
        criterion(4, "D8 GHZ distribution", s(60), ghz_distribution),
        criterion(5, "failure-probability bound", s(30), failure_bound),
        criterion(6, "representation-theory properties", s(30), rep_theory_suite),
        criterion(7, "LOCC obstruction and lift", s(30), obstruction_and_lift),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
