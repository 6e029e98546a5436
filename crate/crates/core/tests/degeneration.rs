use eqvit::verify::degeneration_gaps;

#[test]
fn trivial_group_reduces_to_plain_models() {
    for seed in 0..3 {
        let gaps = degeneration_gaps(seed).unwrap();
        let names: Vec<_> = gaps.iter().map(|g| g.name).collect();
        assert_eq!(names, ["eq_linear", "eq_layernorm", "eq_patch_embed", "eqvit", "eqswin", "eqswin_sr"]);
        for g in gaps {
            assert!(g.max_abs <= 1e-12, "seed {seed} {}: {:e}", g.name, g.max_abs);
        }
    }
}
