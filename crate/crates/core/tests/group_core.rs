use gcmf::group_core::{character, enumerate_phase_labels, GroupElement, GroupSpec, Mode, SubgroupDecomposition};
use gcmf::RationalPhase;
use proptest::prelude::*;

fn e(r: &[usize]) -> GroupElement {
    GroupElement(r.to_vec())
}

fn z4z2() -> GroupSpec {
    GroupSpec::new(&[(2, 2), (2, 1)]).unwrap()
}

fn example() -> SubgroupDecomposition {
    SubgroupDecomposition::new(&z4z2(), &[1, 1]).unwrap()
}

#[test]
fn addition_examples() {
    let g = z4z2();
    assert_eq!(g.add(&e(&[3, 1]), &e(&[2, 1])), e(&[1, 0]));
    let sub = example();
    assert_eq!(sub.add(&e(&[1, 1]), &e(&[1, 0]), Mode::H).unwrap(), e(&[0, 1]));
    for x in g.elements() {
        assert_eq!(g.add(&x, &g.identity()), x);
    }
}

#[test]
fn euclid_split_examples() {
    let sub = example();
    let g = z4z2();
    assert_eq!(sub.euclid_split(&e(&[3, 1])), (e(&[1, 1]), e(&[1, 0])));
    assert_eq!(sub.euclid_split(&g.identity()), (g.identity(), g.identity()));
    for x in g.elements() {
        let (h, k) = sub.euclid_split(&x);
        assert_eq!(sub.compose(&h, &k), x);
    }
}

#[test]
fn hat_split_examples() {
    let sub = example();
    let g = z4z2();
    assert_eq!(sub.hat_split(&e(&[3, 1])), (e(&[1, 1]), e(&[1, 0])));
    assert_eq!(sub.hat_split(&g.identity()), (g.identity(), g.identity()));
    // h1 ⊕_G h2 = (h1 ⊕_H h2) ⊕_G |H|·k̂(h1 ⊕_G h2), with |H| acting factorwise
    let h_mod = sub.h_moduli().to_vec();
    for h1 in sub.h_group().elements() {
        for h2 in sub.h_group().elements() {
            let sum_g = g.add(&h1, &h2);
            let sum_h = sub.add(&h1, &h2, Mode::H).unwrap();
            let (_, khat) = sub.hat_split(&sum_g);
            let scaled = GroupElement(khat.0.iter().zip(&h_mod).map(|(k, m)| k * m).collect());
            assert_eq!(g.add(&sum_h, &scaled), sum_g, "{h1} {h2}");
        }
    }
}

#[test]
fn character_examples() {
    let g = z4z2();
    assert_eq!(character(&e(&[1, 0]), &e(&[1, 0]), &g), RationalPhase::new(1, 4));
    for x in g.elements() {
        assert_eq!(character(&g.identity(), &x, &g), RationalPhase::ZERO);
    }
    for p in g.elements() {
        for q in g.elements() {
            let s: num_complex::Complex64 =
                g.elements().iter().map(|x| character(&q, x, &g).to_complex() * character(&p, x, &g).to_complex().conj()).sum();
            let want = if p == q { 8.0 } else { 0.0 };
            assert!((s.re - want).abs() < 1e-12 && s.im.abs() < 1e-12);
        }
    }
}

#[test]
fn subgroup_character_embedding() {
    let sub = example();
    let g = z4z2();
    assert_eq!(sub.subgroup_character_embed(&e(&[1, 0])).unwrap(), e(&[2, 0]));
    assert_eq!(sub.subgroup_character_embed(&e(&[0, 0])).unwrap(), g.identity());
    // χ̃^p_h on H equals χ^{|K|p}_h with h read as an element of G
    let hg = sub.h_group();
    for p in hg.elements() {
        let big = sub.subgroup_character_embed(&p).unwrap();
        for h in hg.elements() {
            assert_eq!(character(&p, &h, hg), character(&big, &h, &g));
        }
    }
}

#[test]
fn phase_label_counts() {
    let labels = enumerate_phase_labels(&z4z2());
    assert_eq!(labels.len(), 8);
    let nontrivial: Vec<_> = labels.iter().filter(|l| !l.class.is_trivial()).collect();
    assert_eq!(nontrivial.len(), 2);
    assert!(nontrivial.iter().any(|l| l.subgroup.sub_exponents() == [2, 1]));
    assert!(nontrivial.iter().any(|l| l.subgroup.sub_exponents() == [1, 1]));

    let z2 = enumerate_phase_labels(&GroupSpec::new(&[(2, 1)]).unwrap());
    assert_eq!(z2.len(), 2);
    assert!(z2.iter().all(|l| l.class.is_trivial()));

    let v4 = GroupSpec::new(&[(2, 1), (2, 1)]).unwrap();
    assert!(enumerate_phase_labels(&v4)
        .iter()
        .any(|l| l.subgroup.sub_exponents() == [1, 1] && l.class.matrix()[0][1] == 1));
}

fn group_strategy() -> impl Strategy<Value = GroupSpec> {
    prop::collection::vec((prop::sample::select(vec![2u64, 3, 5]), 1u32..=2), 1..=3)
        .prop_map(|f| GroupSpec::new(&f).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_axioms(g in group_strategy(), seed in any::<u64>()) {
        let n = g.order();
        let pick = |k: u64| g.element((seed.wrapping_mul(k + 1) % n as u64) as usize);
        let (a, b, c) = (pick(1), pick(7), pick(13));
        prop_assert_eq!(g.add(&g.add(&a, &b), &c), g.add(&a, &g.add(&b, &c)));
        prop_assert_eq!(g.add(&a, &b), g.add(&b, &a));
        prop_assert!(g.add(&a, &g.neg(&a)).is_identity());
        prop_assert_eq!(g.element(g.index(&a)), a);
    }

    #[test]
    fn splits_are_bijections(g in group_strategy(), pick in any::<prop::sample::Index>()) {
        let sub_e: Vec<u32> = g.factors().iter().enumerate().map(|(i, &(_, r))| (r + i as u32) % (r + 1)).collect();
        let sub = SubgroupDecomposition::new(&g, &sub_e).unwrap();
        let x = g.element(pick.index(g.order()));
        let (h, k) = sub.euclid_split(&x);
        prop_assert!(sub.h_group().contains(&h));
        prop_assert_eq!(sub.compose(&h, &k), x.clone());
        let (hh, kh) = sub.hat_split(&x);
        prop_assert_eq!(g.add(&hh, &sub.embed_k_hat(&kh)), x);
    }
}
