//! Fuzzes the closed-form models with arbitrary floating-point inputs.
//! Every function validates its domain and reports overflow as an error;
//! no input may panic, and Ok results must be finite and non-negative.

#![no_main]
use arbitrary::Arbitrary;
use libfuzzer_sys::fuzz_target;

use afsim::analytic;
use afsim::units::{Duration, Rate};

#[derive(Arbitrary, Debug)]
struct Inputs {
    p: f64,
    rtt: f64,
    rto: f64,
    wmax: f64,
    mss: u32,
    b_ack: u32,
    target: f64,
    w: f64,
}

fn ok_rate(result: Result<Rate, analytic::AnalyticError>) {
    if let Ok(rate) = result {
        assert!(rate.as_bps().is_finite() && rate.as_bps() >= 0.0);
    }
}

fuzz_target!(|input: Inputs| {
    // Rate and Duration constructors reject non-finite values by contract;
    // the model functions must do their own validation first, so only
    // representable wrappers are handed in.
    let rtt = if input.rtt.is_finite() && input.rtt >= 0.0 { input.rtt } else { 0.0 };
    let rto = if input.rto.is_finite() && input.rto >= 0.0 { input.rto } else { 0.0 };
    let target = if input.target.is_finite() && input.target >= 0.0 { input.target } else { 0.0 };
    let rtt = Duration::secs(rtt);
    let rto = Duration::secs(rto);

    ok_rate(analytic::mathis_rate(input.mss, rtt, input.p));
    ok_rate(analytic::dovrolis_bound(input.mss, rtt, input.p));
    ok_rate(analytic::yeom_epsilon(input.mss, rtt, input.p));
    ok_rate(analytic::yeom_rate(&analytic::YeomParams {
        m: Rate::bps(target),
        k: input.mss,
        rtt,
        p: input.p,
    }));
    let _ = analytic::marker_ineffective(Rate::bps(target), rtt, input.p, input.mss);
    let _ = analytic::padhye_w(input.p, input.b_ack);
    let _ = analytic::padhye_f(input.p);
    if let Ok(q) = analytic::padhye_q(input.p, input.w) {
        assert!((0.0..=1.0).contains(&q));
    }
    ok_rate(analytic::padhye_rate(&analytic::PadhyeParams {
        p: input.p,
        wmax: input.wmax,
        rtt,
        rto,
        mss: input.mss,
        b_ack: input.b_ack,
    }));
    let _ = analytic::invert_padhye(Rate::bps(target), input.wmax, rtt, rto, input.mss, input.b_ack);
});
