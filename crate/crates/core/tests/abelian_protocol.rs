use gcmf::abelian_protocol::{
    build_fiducial_rep, build_measurement, build_measurement_on, build_representative, build_symmetry, build_vtilde,
    build_ztilde, compose_v, compose_vdag, execute_triv_to_spt, lemma4_network, lift_residuals, quasi_commuting_lift,
    run_protocol, slide_corrections, triv_to_spt_plan, trivialize_onsite, verify_lemma3, verify_lemma4, AbelianSetup,
    RunMode,
};
use gcmf::group_core::{GroupElement, GroupSpec, SubgroupDecomposition};
use gcmf::linalg::{self, CMat};
use gcmf::mps_core::expand_state;
use gcmf::proj_reps::CocycleClass;
use gcmf::sim_engine::{entropy, fidelity, DenseState};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn e(r: &[usize]) -> GroupElement {
    GroupElement(r.to_vec())
}

fn z4z2() -> GroupSpec {
    GroupSpec::new(&[(2, 2), (2, 1)]).unwrap()
}

fn example() -> (SubgroupDecomposition, CocycleClass) {
    let sub = SubgroupDecomposition::new(&z4z2(), &[1, 1]).unwrap();
    let class = CocycleClass::new(sub.h_group(), vec![vec![0, 1], vec![0, 0]]).unwrap();
    (sub, class)
}

fn invariant_under_all(state: &DenseState, us: &[CMat]) -> bool {
    us.iter().all(|u| {
        let mut s = state.clone();
        for site in 0..state.n_sites() {
            s.apply_local(u, &[site]).unwrap();
        }
        fidelity(&s, state).unwrap() > 1.0 - TOL
    })
}

#[test]
fn example_symmetry() {
    let (sub, class) = example();
    let sym = build_symmetry(&sub, &class).unwrap();
    assert_eq!(sym.dim(), 8);
    let g = z4z2();
    for a in g.elements() {
        for b in g.elements() {
            let prod = sym.u(&a) * sym.u(&b);
            assert!(linalg::max_diff(&prod, sym.u(&g.add(&a, &b))) < TOL);
        }
    }
}

#[test]
fn trivial_subgroup_is_regular_permutation() {
    let g = z4z2();
    let t = SubgroupDecomposition::trivial(&g);
    let sym = build_symmetry(&t, &CocycleClass::zero(t.h_group())).unwrap();
    assert_eq!(sym.dim(), 8);
    for x in g.elements() {
        for a in g.elements() {
            let col = g.index(&a);
            // U_x|a⟩ = |a ⊖ x⟩
            let row = g.index(&g.sub(&a, &x));
            assert!((sym.u(&x)[(row, col)] - Complex64::new(1.0, 0.0)).norm() < TOL);
        }
    }
}

#[test]
fn representative_states() {
    let (sub, class) = example();
    let sym = build_symmetry(&sub, &class).unwrap();
    let psi = expand_state(&build_representative(&sym).unwrap(), 3).unwrap();
    assert!(invariant_under_all(&psi, sym.matrices()));
    let f = build_fiducial_rep(&sym).unwrap();
    assert!(invariant_under_all(&f, sym.matrices()));
}

#[test]
fn ztilde_example_formula() {
    let (sub, class) = example();
    let sym = build_symmetry(&sub, &class).unwrap();
    let i = Complex64::new(0.0, 1.0);
    for q in z4z2().elements() {
        let (cq, dq) = (q.0[0], q.0[1]);
        let want = linalg::mat_pow(&linalg::pauli_z(), cq % 2) * linalg::diag(&[Complex64::new(1.0, 0.0), i.powu(dq as u32)]);
        assert!(linalg::max_diff(&build_ztilde(&sym, &q), &want) < TOL, "q={q}");
    }
    assert!(linalg::max_diff(&build_ztilde(&sym, &z4z2().identity()), &linalg::identity(2)) < TOL);
    for p in z4z2().elements() {
        for q in z4z2().elements() {
            let (f, _) = compose_v(&sym, &p, &q).unwrap();
            let prod = build_ztilde(&sym, &p) * build_ztilde(&sym, &q);
            assert!(linalg::max_diff(&prod, &build_ztilde(&sym, &f)) < TOL);
        }
    }
}

#[test]
fn composition_rules() {
    let (sub, class) = example();
    let sym = build_symmetry(&sub, &class).unwrap();
    let g = z4z2();
    let one = Complex64::new(1.0, 0.0);
    for p in g.elements() {
        let (f, ph) = compose_vdag(&sym, &p, &p).unwrap();
        assert!(f.is_identity() && (ph - one).norm() < TOL);
        let (f, ph) = compose_v(&sym, &g.identity(), &p).unwrap();
        assert!(f == p && (ph - one).norm() < TOL);
        for q in g.elements() {
            let (f, ph) = compose_v(&sym, &p, &q).unwrap();
            let lhs = build_vtilde(&sym, &p) * build_vtilde(&sym, &q);
            assert!(linalg::max_diff(&lhs, &(build_vtilde(&sym, &f) * ph)) < TOL);
            let (f, ph) = compose_vdag(&sym, &p, &q).unwrap();
            let lhs = build_vtilde(&sym, &p).adjoint() * build_vtilde(&sym, &q);
            assert!(linalg::max_diff(&lhs, &(build_vtilde(&sym, &f) * ph)) < TOL);
        }
    }
}

#[test]
fn measurement_families() {
    let (sub, class) = example();
    let sym = build_symmetry(&sub, &class).unwrap();
    let fam = build_measurement(&sym);
    assert_eq!(fam.index_set.len(), 8);
    assert_eq!(fam.len(), 64);
    assert!(verify_lemma3(&fam, &sym).pass());

    // H = {e} for Z2: d = 2 and the family is the Bell basis
    let z2 = GroupSpec::new(&[(2, 1)]).unwrap();
    let t = SubgroupDecomposition::trivial(&z2);
    let sym = build_symmetry(&t, &CocycleClass::zero(t.h_group())).unwrap();
    let fam = build_measurement(&sym);
    assert_eq!(fam.len(), 4);
    assert!(verify_lemma3(&fam, &sym).pass());
    for v in &fam.vectors {
        let s = DenseState::new(vec![2, 2], v.clone()).unwrap();
        assert!((entropy(&s, &[0]).unwrap() - 1.0).abs() < TOL);
    }

    let empty = GroupSpec::new(&[]).unwrap();
    let sym = build_symmetry(&SubgroupDecomposition::whole(&empty), &CocycleClass::zero(&empty)).unwrap();
    assert!(verify_lemma3(&build_measurement(&sym), &sym).pass());
}

/// With a nontrivial projective center the index set is a strict subset;
/// using all of `G` over-completes the family.
#[test]
fn overcomplete_family_fails_completeness() {
    let g = GroupSpec::new(&[(2, 2), (2, 2)]).unwrap();
    let whole = SubgroupDecomposition::whole(&g);
    let class = CocycleClass::new(&g, vec![vec![0, 2], vec![0, 0]]).unwrap();
    let sym = build_symmetry(&whole, &class).unwrap();
    let good = build_measurement(&sym);
    assert!(good.index_set.len() < g.order());
    assert!(verify_lemma3(&good, &sym).pass());
    let over = build_measurement_on(&sym, &g.elements());
    let r = verify_lemma3(&over, &sym);
    assert!(r.completeness > 0.5, "{}", r.completeness);
}

#[test]
fn corrections() {
    let (sub, class) = example();
    let setup = AbelianSetup::new(&sub, &class).unwrap();
    let id = (z4z2().identity(), z4z2().identity());
    let plan = slide_corrections(&setup.sym, &setup.fam, &[id.clone(), id.clone(), id]).unwrap();
    assert!(plan.global.is_identity());
    for s in &plan.sites {
        assert!(linalg::max_diff(&s.op, &linalg::identity(8)) < TOL);
    }
}

#[test]
fn lemma4_cases() {
    let (sub, class) = example();
    let setup = AbelianSetup::new(&sub, &class).unwrap();
    let r = verify_lemma4(&setup.sym, &setup.tensor, 3).unwrap();
    assert!(r.pass());
    assert_eq!(r.kernel.len(), 1);

    // H = {e}: the ring is a GHZ state on the G label
    let g = GroupSpec::new(&[(2, 1), (3, 1)]).unwrap();
    let t = SubgroupDecomposition::trivial(&g);
    let sym = build_symmetry(&t, &CocycleClass::zero(t.h_group())).unwrap();
    for x in g.elements() {
        let amps = lemma4_network(&sym, &x, 3).unwrap();
        let mx = amps.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if x.is_identity() {
            // each of the six GHZ terms carries (1/6)^3 from the three Φ̃⁺ anchors
            assert!((mx - 1.0 / 216.0).abs() < 1e-12);
        } else {
            assert!(mx < 1e-12);
        }
    }
}

#[test]
fn protocol_runs() {
    let z2 = GroupSpec::new(&[(2, 1)]).unwrap();
    let setup = AbelianSetup::new(&SubgroupDecomposition::whole(&z2), &CocycleClass::zero(&z2)).unwrap();
    let ts = run_protocol(&setup, 3, RunMode::Enumerate).unwrap();
    assert!(ts.iter().all(|t| t.fidelity > 1.0 - 1e-9));

    let (sub, class) = example();
    let setup = AbelianSetup::new(&sub, &class).unwrap();
    let ts = run_protocol(&setup, 3, RunMode::Sample { seed: 42, trials: 200 }).unwrap();
    assert_eq!(ts.len(), 200);
    assert!(ts.iter().all(|t| t.global_is_identity && t.fidelity > 1.0 - 1e-9));
    let again = run_protocol(&setup, 3, RunMode::Sample { seed: 42, trials: 200 }).unwrap();
    assert!(ts.iter().zip(&again).all(|(a, b)| a.outcomes == b.outcomes));
}

#[test]
fn onsite_trivialization() {
    let (sub, class) = example();
    let sym = build_symmetry(&sub, &class).unwrap();
    let psi = expand_state(&build_representative(&sym).unwrap(), 2).unwrap();
    let br = trivialize_onsite(&psi, sym.matrices(), &[0, 1]).unwrap();
    let total: f64 = br.iter().map(|b| b.probability).sum();
    assert!((total - 1.0).abs() < 1e-9);
    for b in &br {
        assert!(entropy(&b.state, &[0]).unwrap() < TOL);
    }

    let h = 0.5f64.sqrt();
    let z = Complex64::new(0.0, 0.0);
    let ghz = DenseState::new(vec![2, 2, 2], vec![Complex64::new(h, 0.0), z, z, z, z, z, z, Complex64::new(h, 0.0)]).unwrap();
    let br = trivialize_onsite(&ghz, &[linalg::identity(2), linalg::pauli_x()], &[0, 1, 2]).unwrap();
    for b in &br {
        for site in 0..3 {
            assert!(entropy(&b.state, &[site]).unwrap() < TOL);
        }
        // each site ends in |0⟩ ± |1⟩
        let a = b.state.amplitudes();
        assert!(a.iter().all(|x| (x.norm() - (1.0 / 8f64).sqrt()).abs() < TOL));
    }
    let already = DenseState::product(&vec![vec![Complex64::new(h, 0.0), Complex64::new(h, 0.0)]; 2]).unwrap();
    let br = trivialize_onsite(&already, &[linalg::identity(2), linalg::pauli_x()], &[0, 1]).unwrap();
    assert_eq!(br.len(), 1);
    assert!(fidelity(&br[0].state, &already).unwrap() > 1.0 - TOL);
}

#[test]
fn lifts() {
    let (sub, class) = example();
    let sym = build_symmetry(&sub, &class).unwrap();
    let g = z4z2();
    let mul = |a: usize, b: usize| g.index(&g.add(&g.element(a), &g.element(b)));
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let v = build_vtilde(&sym, &e(&[0, 1]));
    let lift = quasi_commuting_lift(&v, sym.matrices(), &mul, 2).unwrap();
    assert!(lift.copies <= 2);
    let rho = linalg::projector(&linalg::random_state(8, &mut rng));
    let (comm, sector) = lift_residuals(&lift, &v, sym.matrices(), &rho);
    assert!(comm < TOL && sector < TOL);

    let u = sym.u(&e(&[1, 1])).clone();
    let lift = quasi_commuting_lift(&u, sym.matrices(), &mul, 2).unwrap();
    assert_eq!(lift.copies, 0);
    assert!(linalg::max_diff(&lift.op, &u) < TOL);
}

#[test]
fn trivial_to_spt() {
    let v4 = GroupSpec::new(&[(2, 1), (2, 1)]).unwrap();
    let pauli = CocycleClass::new(&v4, vec![vec![0, 1], vec![0, 0]]).unwrap();
    let plan = triv_to_spt_plan(&pauli).unwrap();
    assert!(plan.combined.is_trivial());
    assert_eq!(plan.stages.len(), 2);
    assert!(triv_to_spt_plan(&CocycleClass::zero(&v4)).unwrap().stages.is_empty());
    let run = execute_triv_to_spt(&pauli, 3).unwrap();
    assert!(run.doubled_is_trivial);
    assert!((run.total_probability - 1.0).abs() < 1e-9);
    assert!(run.min_fidelity > 1.0 - 1e-9);
}
