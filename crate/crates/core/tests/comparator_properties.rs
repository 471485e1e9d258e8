use offreg::comparators::{ComparatorFamily, Covariate, Predictor};
use offreg::losses::LossModel;
use proptest::prelude::*;

fn history(k: usize, max_len: usize) -> impl Strategy<Value = Vec<(Covariate, f64)>> {
    proptest::collection::vec((0..k, -1.0..=1.0f64).prop_map(|(x, y)| (Covariate::Id(x), y)), 1..max_len)
}

proptest! {
    #[test]
    fn best_loss_is_below_every_member(
        values in proptest::collection::vec(proptest::collection::vec(-1.0..=1.0f64, 3), 1..8),
        hist in history(3, 30),
    ) {
        let fam = ComparatorFamily::finite(values.clone()).unwrap();
        let m = LossModel::square(1.0);
        let best = fam.best_comparator_loss(&m, &hist).unwrap();
        for f in 0..values.len() {
            let loss: f64 = hist.iter().map(|(x, y)| m.value_unchecked(fam.evaluate(&Predictor::Index(f), x).unwrap(), *y)).sum();
            prop_assert!(best <= loss + 1e-12);
        }
    }

    #[test]
    fn linear_best_loss_is_below_random_members(
        pts in proptest::collection::vec((proptest::collection::vec(-0.7..0.7f64, 2), -1.0..=1.0f64), 1..25),
        ws in proptest::collection::vec(proptest::collection::vec(-2.0..2.0f64, 2), 100),
    ) {
        let fam = ComparatorFamily::linear(2, 1.0);
        let m = LossModel::square(1.0);
        let hist: Vec<(Covariate, f64)> = pts.into_iter().map(|(x, y)| (Covariate::Vector(x), y)).collect();
        let best = fam.best_comparator_loss(&m, &hist).unwrap();
        for w in ws {
            let fit: f64 = hist.iter().map(|(x, y)| {
                let p: f64 = x.vector().unwrap().iter().zip(&w).map(|(a, b)| a * b).sum();
                (p - y).powi(2)
            }).sum();
            let penalty: f64 = w.iter().map(|v| v * v).sum();
            prop_assert!(best <= fit + penalty + 1e-9);
        }
    }

    #[test]
    fn appending_a_round_never_lowers_the_value(
        values in proptest::collection::vec(proptest::collection::vec(-1.0..=1.0f64, 2), 1..6),
        hist in history(2, 20),
        x in 0usize..2, y in -1.0..=1.0f64,
    ) {
        let fam = ComparatorFamily::finite(values).unwrap();
        let m = LossModel::absolute(1.0);
        let before = fam.best_comparator_loss(&m, &hist).unwrap();
        let mut longer = hist.clone();
        longer.push((Covariate::Id(x), y));
        prop_assert!(fam.best_comparator_loss(&m, &longer).unwrap() >= before - 1e-12);
    }
}
