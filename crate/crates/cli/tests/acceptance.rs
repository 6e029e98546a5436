//! One line per acceptance criterion, then a single assertion over all of
//! them. Lines go straight to stdout so they survive output capture.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use eqvit::group::GroupSpec;
use eqvit::layers::eq_linear;
use eqvit::models::{equal_width_vit, EqViT, ParamLedger, PlainViT};
use eqvit::tensor::{NdArray, Precision, Tensor};
use eqvit::verify::{
    audit, degeneration_gaps, grad_audit, linear_shapes, orbit_oracle, toy_vit, AuditTarget, AUDIT_SEEDS,
};
use eqvit_cli::config::RunConfig;
use eqvit_cli::experiments::run_data_efficiency;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    budget: Duration,
    elapsed: Duration,
}

fn timed(budget_secs: u64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    Outcome { pass, detail, budget: Duration::from_secs(budget_secs), elapsed: start.elapsed() }
}

fn worst_audit(targets: &[AuditTarget]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for &t in targets {
        let r = audit(t, GroupSpec::d4(), Precision::F64, &AUDIT_SEEDS).unwrap();
        let limit = t.threshold(Precision::F64);
        pass &= r.cells.len() == 8 * AUDIT_SEEDS.len() && r.passes(limit);
        parts.push(format!("{t} {:.1e}", r.max_abs()));
    }
    (pass, parts.join(", "))
}

/// `out[n, (co, B)] = Σ z[n, (ci, g)] · W_{B⁻¹∘g}[ci, co]`, summed directly.
fn direct_sum(z: &NdArray<f64>, blocks: &[NdArray<f64>], spec: &GroupSpec) -> NdArray<f64> {
    let t = spec.order();
    let (c_in, c_out) = (blocks[0].shape()[0], blocks[0].shape()[1]);
    let n = z.shape()[0];
    NdArray::from_fn(vec![n, c_out * t], |idx| {
        let (row, col) = (idx / (c_out * t), idx % (c_out * t));
        let (co, b) = (col / t, col % t);
        let b_inv = spec.inverse(spec.element(b));
        let mut acc = 0.0;
        for ci in 0..c_in {
            for g in 0..t {
                let w = &blocks[spec.index_of(spec.compose(b_inv, spec.element(g)))];
                acc += z.get(&[row, ci * t + g]) * w.get(&[ci, co]);
            }
        }
        acc
    })
}

fn tiling() -> (bool, String) {
    let groups = [(1, false), (2, false), (4, false), (1, true), (2, true), (4, true)];
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let spec = GroupSpec::new(groups[case % 6].0, groups[case % 6].1).unwrap();
        let t = spec.order();
        let (c_in, c_out, n) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..6));
        let mut draw = |shape: Vec<usize>| {
            let len = shape.iter().product();
            NdArray::new(shape, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let z = draw(vec![n, c_in * t]);
        let blocks: Vec<NdArray<f64>> = (0..t).map(|_| draw(vec![c_in, c_out])).collect();
        let params: Vec<Tensor<f64>> = blocks.iter().cloned().map(Tensor::constant).collect();
        let got = eq_linear(&Tensor::constant(z.clone()), &params, None, &spec).unwrap();
        worst = worst.max(got.value().max_abs_diff(&direct_sum(&z, &blocks, &spec)).unwrap());
    }
    (worst <= 1e-12, format!("50 configurations, worst {worst:.1e}"))
}

fn sharing() -> (bool, String) {
    let cfg = toy_vit(GroupSpec::c4());
    let model = EqViT::<f64>::new(&cfg, 0).unwrap();
    let shapes = linear_shapes(&model).unwrap();
    let shared = !shapes.is_empty() && shapes.iter().all(|s| s.sharing_factor() == (4, 1));
    let eq = ParamLedger::of(&model).block_linear();
    let plain = ParamLedger::of(&PlainViT::<f64>::new(&equal_width_vit(&cfg), 0).unwrap()).block_linear();
    (shared && eq * 4 == plain, format!("{} layers at factor 4; {eq} x 4 vs {plain}", shapes.len()))
}

fn orbits() -> (bool, String) {
    let r = orbit_oracle(16, 8).unwrap();
    let detail = format!(
        "{} positions, {} pairs, {} mismatches",
        r.positions_checked,
        r.pairs_checked,
        r.position_mismatches + r.pair_mismatches
    );
    (r.exact(), detail)
}

fn gradients() -> (bool, String) {
    let results = grad_audit(0).unwrap();
    let worst =
        results.iter().max_by(|a, b| (a.max_rel_err / a.tolerance()).total_cmp(&(b.max_rel_err / b.tolerance())));
    let worst = worst.unwrap();
    let pass = results.iter().all(|r| r.passes());
    (pass, format!("{} checks, tightest {} at {:.1e}", results.len(), worst.name, worst.max_rel_err))
}

fn degeneration() -> (bool, String) {
    let gaps = degeneration_gaps(0).unwrap();
    let worst = gaps.iter().map(|g| g.max_abs).fold(0.0, f64::max);
    (gaps.len() == 6 && worst <= 1e-12, format!("{} layers and models, worst {worst:.1e}", gaps.len()))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn data_efficiency() -> (bool, String) {
    let cfg = RunConfig::load(&config("shapes_eqvit.toml")).unwrap();
    let r = run_data_efficiency(&cfg, &[0, 1, 2, 3, 4]).unwrap();
    let detail = format!(
        "EQ gap {:.2} pts, mean margin {:.1} pts (frozen {:.1})",
        r.max_eq_gap_pts, r.mean_margin_pts, r.frozen_margin_pts
    );
    (r.passes(), detail)
}

fn negative_control() -> (bool, String) {
    let r = audit(AuditTarget::BrokenLinear, GroupSpec::d4(), Precision::F64, &AUDIT_SEEDS).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_eqvit"))
        .args(["audit", "--group", "d4", "--target", "broken_linear"])
        .output()
        .unwrap()
        .status;
    let detail = format!("error {:.2e}, exit code {:?}", r.max_abs(), status.code());
    (r.max_abs() >= 1e-2 && status.code() == Some(1), detail)
}

type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

#[test]
fn acceptance_criteria() {
    let criteria: Vec<Criterion> = vec![
        ("layer equivariance", Box::new(|| timed(60, || worst_audit(&AuditTarget::LAYERS)))),
        ("model invariance", Box::new(|| timed(120, || worst_audit(&AuditTarget::MODELS)))),
        ("tiling equivalence", Box::new(|| timed(10, tiling))),
        ("parameter sharing", Box::new(|| timed(10, sharing))),
        ("orbit machinery", Box::new(|| timed(10, orbits))),
        ("gradient audits", Box::new(|| timed(60, gradients))),
        ("degeneration", Box::new(|| timed(10, degeneration))),
        ("data efficiency", Box::new(|| timed(900, data_efficiency))),
        ("negative control", Box::new(|| timed(10, negative_control))),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout().lock();
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let o = run();
        let pass = o.pass && o.elapsed <= o.budget;
        writeln!(
            out,
            "criterion {} {}: {name}: {} [{:.1?} of {:?}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            o.elapsed,
            o.budget
        )
        .unwrap();
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
