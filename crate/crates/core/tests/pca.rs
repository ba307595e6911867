mod common;

use grand_core::represent::fit_pca;
use grand_core::util::seeded_rng;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

#[test]
fn components_round_trip_and_hand_cases() {
    println!("{}", common::pca_checks().unwrap());
}

#[test]
fn truncated_projection_keeps_the_leading_axes() {
    let mut rng: ChaCha8Rng = seeded_rng(5, 5);
    let cloud = common::random_cloud(&mut rng, 60, 6);
    let full = fit_pca(&cloud, 6).unwrap();
    let part = fit_pca(&cloud, 2).unwrap();
    assert_eq!(part.output_dim(), 2);
    for (a, b) in part.explained_variance.iter().zip(&full.explained_variance) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(common::orthonormality_error(&part.components) < 1e-9);
}

proptest! {
    #[test]
    fn projected_coordinates_are_centred(seed in any::<u64>(), n in 3usize..30, d in 1usize..6) {
        let mut rng: ChaCha8Rng = seeded_rng(seed, 0);
        let cloud = common::random_cloud(&mut rng, n, d);
        let m = fit_pca(&cloud, d).unwrap();
        let mut sums = vec![0.0; d];
        for v in &cloud {
            for (s, z) in sums.iter_mut().zip(m.apply(v).unwrap()) {
                *s += z;
            }
        }
        prop_assert!(sums.iter().all(|s| s.abs() < 1e-9 * n as f64));
    }
}
