use offreg::trees::{LabeledTree, SignPath};
use proptest::prelude::*;

fn tree(depth: usize) -> impl Strategy<Value = LabeledTree<u32>> {
    proptest::collection::vec(0u32..100, (1usize << depth) - 1)
        .prop_map(move |flat| LabeledTree::from_flat(depth, &flat).unwrap())
}

proptest! {
    #[test]
    fn labels_depend_only_on_the_prefix((n, x) in (0usize..=10).prop_flat_map(|n| (Just(n), tree(n))), a in any::<u64>(), b in any::<u64>(), t_frac in 0.0..1.0f64) {
        prop_assume!(n > 0);
        let mask = (1u64 << n) - 1;
        let (pa, pb) = (SignPath::from_index(a & mask, n), SignPath::from_index(b & mask, n));
        let t = 1 + ((n as f64 - 1.0) * t_frac) as usize;
        let agree = pa.signs()[..t - 1] == pb.signs()[..t - 1];
        if agree {
            prop_assert_eq!(x.label_at(t, &pa).unwrap(), x.label_at(t, &pb).unwrap());
        }
        // force a shared prefix too
        let mut signs = pa.signs().to_vec();
        signs[t - 1..].iter_mut().for_each(|s| *s = -*s);
        let pc = SignPath::new(signs).unwrap();
        prop_assert_eq!(x.label_at(t, &pa).unwrap(), x.label_at(t, &pc).unwrap());
    }

    #[test]
    fn compose_commutes_with_label_at((n, x) in (1usize..=8).prop_flat_map(|n| (Just(n), tree(n))), a in any::<u64>()) {
        let path = SignPath::from_index(a & ((1u64 << n) - 1), n);
        let g = |v: &u32| -> offreg::Result<f64> { Ok(f64::from(*v) * 0.5 - 3.0) };
        let composed = x.compose(g).unwrap();
        for t in 1..=n {
            prop_assert_eq!(*composed.label_at(t, &path).unwrap(), g(x.label_at(t, &path).unwrap()).unwrap());
        }
    }
}
