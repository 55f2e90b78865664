mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use texmesh_core::model::{GlobalMode, Modality, ModelConfig};

fn config_strategy() -> impl Strategy<Value = (ModelConfig, usize, u64)> {
    (
        1usize..=2,
        1usize..=4,
        2usize..=8,
        1usize..=2,
        2usize..=4,
        1usize..=6,
        1usize..=3,
        0usize..3,
        0usize..3,
        0usize..=9,
        any::<u64>(),
    )
        .prop_map(|(heads, d, nf, blocks, classes, p, k, mode, modality, extra_faces, seed)| {
            let cfg = ModelConfig {
                embed_dim: heads * d,
                face_dim: heads * nf,
                blocks,
                heads,
                classes,
                pixels_per_face: p,
                clusters: k,
                modality: [Modality::Both, Modality::Geometry, Modality::Texture][modality],
                global_mode: [GlobalMode::SelfAttention, GlobalMode::CrossAttention, GlobalMode::Disabled][mode],
                dropout: 0.1,
            };
            (cfg, k + extra_faces, seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn padding_leaves_valid_scores_unchanged((cfg, faces, seed) in config_strategy(), face_pad in 0usize..=5, pixel_pad in 0usize..=120) {
        let fx = fixture(cfg, faces, seed);
        let base = padded_scores(&fx, 0, 0);
        prop_assert!(score_diff(&base, &padded_scores(&fx, face_pad, pixel_pad)) <= 1e-6);
    }

    #[test]
    fn masked_contents_never_reach_valid_outputs((cfg, faces, seed) in config_strategy(), face_pad in 1usize..=5, pixel_pad in 1usize..=20) {
        let fx = fixture(cfg, faces, seed);
        let base = padded_scores(&fx, 0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(score_diff(&base, &fuzzed_scores(&fx, face_pad, pixel_pad, &mut rng)) <= 1e-6);
    }

    #[test]
    fn shuffling_within_clusters_and_patches_preserves_scores((cfg, faces, seed) in config_strategy()) {
        let fx = fixture(cfg, faces, seed);
        let base = padded_scores(&fx, 0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(score_diff(&base, &permuted_scores(&fx, &mut rng)) <= 1e-6);
    }

    #[test]
    fn renaming_faces_permutes_scores((cfg, faces, seed) in config_strategy()) {
        use rand::seq::SliceRandom;
        let fx = fixture(cfg, faces, seed);
        let base = padded_scores(&fx, 0, 0);
        let mut perm: Vec<usize> = (0..faces).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(score_diff(&base, &renamed_scores(&fx, &perm)) <= 1e-6);
    }
}

fn two_cluster(mode: GlobalMode, blocks: usize, seed: u64) -> Fixture {
    let cfg = ModelConfig {
        embed_dim: 4,
        face_dim: 8,
        blocks,
        heads: 2,
        classes: 3,
        pixels_per_face: 4,
        clusters: 2,
        modality: Modality::Both,
        global_mode: mode,
        dropout: 0.1,
    };
    fixture(cfg, 8, seed)
}

#[test]
fn clusters_are_isolated_without_the_global_stage() {
    for seed in 0..10 {
        let fx = two_cluster(GlobalMode::Disabled, 2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        assert!(cross_cluster_effect(&fx, 1, &mut rng) <= 1e-6);
    }
}

#[test]
fn cluster_tokens_carry_information_between_clusters() {
    for mode in [GlobalMode::SelfAttention, GlobalMode::CrossAttention] {
        for seed in 0..10 {
            let fx = two_cluster(mode, 2, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert!(cross_cluster_effect(&fx, 1, &mut rng) > 1e-6, "{mode:?} seed {seed}");
        }
    }
}

#[test]
fn empty_cluster_is_harmless() {
    let fx = two_cluster(GlobalMode::SelfAttention, 2, 4);
    let mut members = fx.members.clone();
    members.push(Vec::new());
    let layout = texmesh_core::cluster::BatchLayout::from_members(&members, 0).unwrap();
    let s = predict_scores(&fx.model, &fx.descriptors, &fx.patches, &layout);
    for r in 0..s.rows() {
        assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
