use std::path::PathBuf;

use eqvit_cli::config::RunConfig;
use eqvit_cli::experiments::{run_toy_sr, MAX_EQ_PSNR_GAP_DB, SANITY_PSNR_DB};

#[test]
fn toy_sr_is_rotation_consistent_and_the_baseline_is_not() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/sr_eqswin.toml");
    let r = run_toy_sr(&RunConfig::load(&path).unwrap()).unwrap();
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
    assert!(r.eq.gap() <= MAX_EQ_PSNR_GAP_DB, "EQ gap {} dB", r.eq.gap());
    assert!(r.sanity_psnr >= SANITY_PSNR_DB, "sanity {} dB", r.sanity_psnr);
    assert!(r.baseline.gap() > 0.1, "baseline gap {} dB", r.baseline.gap());
    // parameter-matched within one baseline channel's worth
    assert!(r.baseline_params.abs_diff(r.eq_params) * 10 < r.eq_params);
}
