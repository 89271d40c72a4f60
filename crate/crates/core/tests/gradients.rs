mod common;

use common::*;
use hiercap_core::cells::GateMode;
use hiercap_core::gradcheck::{grad_check, grad_check_with, Stencil};
use hiercap_core::model::{RunOptions, Variant};

const EPS: f64 = 1e-5;

fn report_line(name: &str, r: &hiercap_core::gradcheck::GradCheckReport) -> String {
    let worst = r.worst().map(|w| w.name.clone()).unwrap_or_default();
    format!("{name}: max rel err {:.3e} (worst {worst})", r.max_rel_err)
}

#[test]
fn full_caption_path_matches_finite_differences() {
    let m = model(config(Variant::Full, 8, 8, 6, 4, 5), 11);
    let mut r = rng(12);
    let video = features("v", 4, 6, &mut r);
    let cap = caption("v", 4, 8, 5, &mut r);
    let report = grad_check(
        &m.params,
        |tape| {
            let mut opts = RunOptions::gates(GateMode::Soft);
            Ok(m.caption_loss(tape, &video, &cap, &mut opts)?.loss)
        },
        EPS,
        1e-4,
    )
    .unwrap();
    assert!(report.passed(), "{}", report_line("xe", &report));
}

#[test]
fn video_path_matches_finite_differences() {
    let m = model(config(Variant::Full, 8, 8, 6, 4, 5), 21);
    let video = features("v", 4, 6, &mut rng(22));
    let report = grad_check(
        &m.params,
        |tape| {
            let mut opts = RunOptions::gates(GateMode::Soft);
            Ok(m.video_loss(tape, &video, &mut opts)?.loss)
        },
        EPS,
        1e-4,
    )
    .unwrap();
    assert!(report.passed(), "{}", report_line("mse", &report));
    // The loss touches the encoders, attention and the video decoder only.
    for id in m.language_decoder_ids() {
        let check = &report.params[id.index()];
        assert_eq!(check.analytic, 0.0, "{}", check.name);
    }
}

#[test]
fn baseline_path_matches_finite_differences() {
    let m = model(config(Variant::Bi, 5, 4, 3, 2, 3), 31);
    let mut r = rng(32);
    let video = features("v", 2, 3, &mut r);
    let cap = caption("v", 2, 5, 3, &mut r);
    // Several entries have true gradients near 1e-7, where central
    // differences at small h are dominated by round-off.
    let ids: Vec<_> = m.params.ids().collect();
    let report = grad_check_with(
        &m.params,
        &ids,
        |tape| m.forward_baseline_bi(tape, &video, &cap, &mut RunOptions::default()),
        Stencil::FivePoint,
        1e-3,
        1e-6,
    )
    .unwrap();
    assert!(report.passed(), "{}", report_line("bi", &report));
}

#[test]
fn flat_attention_variants_match_finite_differences() {
    for (i, variant) in [Variant::BiBdSa, Variant::BiBdSaVp].into_iter().enumerate() {
        let m = model(config(variant, 6, 4, 3, 2, 3), 40 + i as u64);
        let mut r = rng(50 + i as u64);
        let video = features("v", 2, 3, &mut r);
        let cap = caption("v", 2, 6, 3, &mut r);
        let report = grad_check(
            &m.params,
            |tape| {
                let mut opts = RunOptions::gates(GateMode::Soft);
                Ok(m.caption_loss(tape, &video, &cap, &mut opts)?.loss)
            },
            EPS,
            1e-4,
        )
        .unwrap();
        assert!(report.passed(), "{}", report_line(variant.name(), &report));
    }
}

#[test]
fn hard_gates_have_straight_through_gradients() {
    // The hard forward pass is piecewise constant in the gate inputs, so
    // finite differences see no gradient there; the tape must still
    // produce a finite, nonzero surrogate gradient for the split gate.
    let m = model(config(Variant::Full, 6, 4, 3, 2, 4), 61);
    let mut r = rng(62);
    let video = features("v", 2, 3, &mut r);
    let cap = caption("v", 3, 6, 4, &mut r);
    let mut tape = hiercap_core::Tape::new(&m.params);
    let loss = m
        .caption_loss(&mut tape, &video, &cap, &mut RunOptions::default())
        .unwrap()
        .loss;
    let adj = tape.backward(loss).unwrap();
    let mut grads = hiercap_core::Grads::for_registry(&m.params);
    tape.accumulate(&adj, &mut grads, 1.0);
    assert!(grads.is_finite());
    let w_s = m.params.id("bgru.w_s").unwrap();
    assert!(grads.get(w_s).iter().any(|&g| g != 0.0));
}
