//! Closed-form TCP throughput models and provisioning math.
//!
//! Every expression here is a pure function of its arguments, usable both as
//! a conditioner input and as an independent oracle in tests. Rates are
//! returned in bits per second; the models that are naturally stated in
//! segments per second convert through the segment size at the boundary.

use crate::units::{Duration, Rate};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    /// Loss probability of zero makes the model rate unbounded; the caller
    /// must clamp before asking.
    #[error("unbounded model rate: loss probability is zero")]
    UnboundedRate,
    #[error("invalid parameter: {0}")]
    InvalidInput(&'static str),
    /// The requested rate is above what the model can produce even at the
    /// smallest representable loss probability.
    #[error("target exceeds model capacity ({max_bps} bit/s at p = {p_min})")]
    TargetExceedsCapacity { max_bps: f64, p_min: f64 },
}

fn check_loss(p: f64) -> Result<(), AnalyticError> {
    if p == 0.0 {
        return Err(AnalyticError::UnboundedRate);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(AnalyticError::InvalidInput("loss probability must be in (0, 1]"));
    }
    Ok(())
}

fn check_positive(value: f64, what: &'static str) -> Result<(), AnalyticError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(AnalyticError::InvalidInput(what));
    }
    Ok(())
}

/// Model outputs must stay representable; extreme-but-valid inputs (e.g. a
/// subnormal RTT) can overflow the arithmetic, which is an error, not a
/// panic.
fn finite_rate(value: f64) -> Result<Rate, AnalyticError> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(AnalyticError::InvalidInput("model rate overflows"));
    }
    Ok(Rate::bps(value))
}

/// Square-root throughput model: C · MSS / (RTT · √p) with C = √(3/2).
pub fn mathis_rate(mss: u32, rtt: Duration, p: f64) -> Result<Rate, AnalyticError> {
    check_loss(p)?;
    check_positive(rtt.as_secs(), "rtt must be > 0")?;
    check_positive(mss as f64, "mss must be > 0")?;
    let c = (1.5f64).sqrt();
    let bits = mss as f64 * 8.0;
    finite_rate(c * bits / (rtt.as_secs() * p.sqrt()))
}

/// Upper bound on the rate a flow can sustain: 1.5·√(1/3)·k / (RTT·√p).
///
/// The constant differs from `mathis_rate`'s √(3/2) by exactly √2; both are
/// kept verbatim since they are used in different relations.
pub fn dovrolis_bound(k: u32, rtt: Duration, p: f64) -> Result<Rate, AnalyticError> {
    check_loss(p)?;
    check_positive(rtt.as_secs(), "rtt must be > 0")?;
    check_positive(k as f64, "packet size must be > 0")?;
    let c = 1.5 * (1.0f64 / 3.0).sqrt();
    let bits = k as f64 * 8.0;
    finite_rate(c * bits / (rtt.as_secs() * p.sqrt()))
}

/// Drop-rate ratio d1/d2 that equalizes two flows with target rates r1, r2
/// under the square-root model: d1/d2 = r2/r1. Losses per time unit must be
/// inversely proportional to the target rate.
pub fn proportional_drop_ratio(r1: Rate, r2: Rate) -> Result<f64, AnalyticError> {
    check_positive(r1.as_bps(), "r1 must be > 0")?;
    check_positive(r2.as_bps(), "r2 must be > 0")?;
    Ok(r2.as_bps() / r1.as_bps())
}

/// Verdict of the token-bucket ineffectiveness test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IneffectiveVerdict {
    /// True when the marker target is below the threshold, i.e. the token
    /// bucket parameters cannot influence the achieved throughput.
    pub ineffective: bool,
    /// Set when `p_out` was zero: the threshold diverges and the test is
    /// degenerate (the underlying derivation assumes out-profile loss exists).
    pub degenerate_loss: bool,
}

/// Tests whether a token-bucket marker has any effect on a flow's throughput:
/// ineffective iff target < (1/RTT)·√(3/(2·p_out)), with both sides in
/// segments per second. The target is given in bits per second and converted
/// through `mss`.
pub fn marker_ineffective(
    target: Rate,
    rtt: Duration,
    p_out: f64,
    mss: u32,
) -> Result<IneffectiveVerdict, AnalyticError> {
    check_positive(rtt.as_secs(), "rtt must be > 0")?;
    check_positive(mss as f64, "mss must be > 0")?;
    if p_out == 0.0 {
        return Ok(IneffectiveVerdict { ineffective: true, degenerate_loss: true });
    }
    if !(p_out > 0.0 && p_out <= 1.0) {
        return Err(AnalyticError::InvalidInput("loss probability must be in (0, 1]"));
    }
    let target_segments = target.as_packets_per_sec(mss);
    let threshold = (3.0 / (2.0 * p_out)).sqrt() / rtt.as_secs();
    Ok(IneffectiveVerdict { ineffective: target_segments < threshold, degenerate_loss: false })
}

/// Parameters for the marking-target throughput model.
#[derive(Debug, Clone, Copy)]
pub struct YeomParams {
    /// Current marking target m_i.
    pub m: Rate,
    /// Packet size in bytes.
    pub k: u32,
    pub rtt: Duration,
    /// Loss probability seen by the flow.
    pub p: f64,
}

/// Predicted throughput for a flow marked at target m:
/// (3/4)·m + (3k/(4·RTT))·√(2/p).
pub fn yeom_rate(params: &YeomParams) -> Result<Rate, AnalyticError> {
    let eps = yeom_epsilon(params.k, params.rtt, params.p)?;
    finite_rate(0.75 * params.m.as_bps() + eps.as_bps())
}

/// The elastic term of the model: ε = (3k/(4·RTT))·√(2/p). Independent of
/// the marking target.
pub fn yeom_epsilon(k: u32, rtt: Duration, p: f64) -> Result<Rate, AnalyticError> {
    check_loss(p)?;
    check_positive(rtt.as_secs(), "rtt must be > 0")?;
    check_positive(k as f64, "packet size must be > 0")?;
    finite_rate(yeom_epsilon_unchecked(k, rtt, p))
}

fn yeom_epsilon_unchecked(k: u32, rtt: Duration, p: f64) -> f64 {
    let k_bits = k as f64 * 8.0;
    (3.0 * k_bits / (4.0 * rtt.as_secs())) * (2.0 / p).sqrt()
}

/// Expected unconstrained window W(p) = (2+b)/(3b) + √(8(1−p)/(3bp) + ((2+b)/(3b))²),
/// in segments.
pub fn padhye_w(p: f64, b_ack: u32) -> Result<f64, AnalyticError> {
    check_loss(p)?;
    if b_ack < 1 {
        return Err(AnalyticError::InvalidInput("b_ack must be >= 1"));
    }
    let b = b_ack as f64;
    let a = (2.0 + b) / (3.0 * b);
    Ok(a + (8.0 * (1.0 - p) / (3.0 * b * p) + a * a).sqrt())
}

/// Probability that a loss-recovery episode ends in a timeout rather than a
/// fast retransmit, for loss probability p and window w:
/// min(1, (1−(1−p)³)(1+(1−p)³(1−(1−p)^(w−3)))/(1−(1−p)^w)).
pub fn padhye_q(p: f64, w: f64) -> Result<f64, AnalyticError> {
    check_loss(p)?;
    if w < 1.0 || w.is_nan() {
        return Err(AnalyticError::InvalidInput("window must be >= 1"));
    }
    if p == 1.0 {
        // All (1−p) terms vanish; the expression collapses to 1.
        return Ok(1.0);
    }
    let q = 1.0 - p;
    let qw = q.powf(w);
    let denom = 1.0 - qw;
    if denom < 1e-12 {
        // Tiny p with small w loses all precision in the direct form; the
        // first-order expansion of both numerator and denominator gives 3/w.
        return Ok((3.0 / w).min(1.0));
    }
    let q3 = q * q * q;
    let num = (1.0 - q3) * (1.0 + q3 * (1.0 - q.powf(w - 3.0)));
    Ok((num / denom).min(1.0))
}

/// Timeout-backoff series: 1 + p + 2p² + 4p³ + 8p⁴ + 16p⁵ + 32p⁶.
pub fn padhye_f(p: f64) -> Result<f64, AnalyticError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalyticError::InvalidInput("loss probability must be in [0, 1]"));
    }
    Ok(1.0 + p * (1.0 + p * (2.0 + p * (4.0 + p * (8.0 + p * (16.0 + p * 32.0))))))
}

/// Parameters for the full steady-state TCP throughput model.
#[derive(Debug, Clone, Copy)]
pub struct PadhyeParams {
    /// Loss probability in (0, 1].
    pub p: f64,
    /// Maximum window in segments (receive-window cap).
    pub wmax: f64,
    pub rtt: Duration,
    pub rto: Duration,
    /// Segment size in bytes.
    pub mss: u32,
    /// Packets acknowledged per ACK, usually 2.
    pub b_ack: u32,
}

impl PadhyeParams {
    fn validate(&self) -> Result<(), AnalyticError> {
        check_loss(self.p)?;
        if self.wmax < 1.0 || self.wmax.is_nan() {
            return Err(AnalyticError::InvalidInput("wmax must be >= 1"));
        }
        check_positive(self.rtt.as_secs(), "rtt must be > 0")?;
        check_positive(self.rto.as_secs(), "rto must be > 0")?;
        check_positive(self.mss as f64, "mss must be > 0")?;
        if self.b_ack < 1 {
            return Err(AnalyticError::InvalidInput("b_ack must be >= 1"));
        }
        Ok(())
    }
}

/// Steady-state TCP throughput in bits per second, two-branch form selected
/// by whether the loss-determined window W(p) fits under the receive-window
/// cap.
///
/// Both numerator and denominator are multiplied through by (1−p) before
/// evaluation, which is algebraically neutral and keeps p = 1 finite.
pub fn padhye_rate(params: &PadhyeParams) -> Result<Rate, AnalyticError> {
    params.validate()?;
    let p = params.p;
    let b = params.b_ack as f64;
    let rtt = params.rtt.as_secs();
    let rto = params.rto.as_secs();
    let one_minus_p = 1.0 - p;
    let f = padhye_f(p)?;
    let w = padhye_w(p, params.b_ack)?;

    let (num, den) = if w < params.wmax {
        let q = padhye_q(p, w)?;
        let num = one_minus_p * one_minus_p / p + w * one_minus_p + q;
        let den = rtt * (b / 2.0 * w + 1.0) * one_minus_p + q * f * rto;
        (num, den)
    } else {
        let wmax = params.wmax;
        let q = padhye_q(p, wmax)?;
        let num = one_minus_p * one_minus_p / p + wmax * one_minus_p + q;
        let den = rtt * (b / 8.0 * wmax + one_minus_p / (p * wmax) + 2.0) * one_minus_p + q * f * rto;
        (num, den)
    };
    let segments_per_sec = num / den;
    finite_rate(segments_per_sec * params.mss as f64 * 8.0)
}

/// Result of inverting the throughput model for a loss probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadhyeInversion {
    pub p: f64,
    /// Set when the target is at or below the model rate at p = 1; the
    /// returned p saturates at 1.
    pub saturated: bool,
}

/// Smallest loss probability the inversion searches; below this the model is
/// numerically unreliable.
pub const INVERSION_P_MIN: f64 = 1e-8;

/// Finds the loss probability at which the model produces `target`, by
/// bisection on log p over [log(P_MIN), 0]. The model rate is verified to be
/// strictly decreasing in p as a test invariant, which is what makes
/// bisection sound.
pub fn invert_padhye(
    target: Rate,
    wmax: f64,
    rtt: Duration,
    rto: Duration,
    mss: u32,
    b_ack: u32,
) -> Result<PadhyeInversion, AnalyticError> {
    check_positive(target.as_bps(), "target must be > 0")?;
    let rate_at = |p: f64| -> Result<f64, AnalyticError> {
        padhye_rate(&PadhyeParams { p, wmax, rtt, rto, mss, b_ack }).map(Rate::as_bps)
    };
    let goal = target.as_bps();
    let max_rate = rate_at(INVERSION_P_MIN)?;
    if goal > max_rate {
        return Err(AnalyticError::TargetExceedsCapacity { max_bps: max_rate, p_min: INVERSION_P_MIN });
    }
    if goal <= rate_at(1.0)? {
        return Ok(PadhyeInversion { p: 1.0, saturated: true });
    }

    let mut lo = INVERSION_P_MIN.ln(); // rate(lo) >= goal
    let mut hi = 0.0f64; // rate(hi) < goal
    for _ in 0..200 {
        if hi - lo < 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rate_at(mid.exp())? >= goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = (0.5 * (lo + hi)).exp();
    Ok(PadhyeInversion { p, saturated: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{Duration, Rate};

    fn rel_err(actual: f64, expected: f64) -> f64 {
        (actual - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn mathis_hand_evaluation() {
        // √1.5 · 12000 bits / (0.1 s · √0.01) = 1_469_693.8456699068 bit/s
        // (≈ 183_712 B/s ≈ 1.4697 Mb/s).
        let r = mathis_rate(1500, Duration::secs(0.1), 0.01).unwrap();
        assert!(rel_err(r.as_bps(), 1_469_693.845_669_906_8) < 1e-12);
        assert!((r.as_bps() / 8.0 - 183_711.73).abs() < 1.0);
    }

    #[test]
    fn mathis_p_one() {
        let r = mathis_rate(1500, Duration::secs(1.0), 1.0).unwrap();
        assert!(rel_err(r.as_bps(), (1.5f64).sqrt() * 12000.0) < 1e-12);
    }

    #[test]
    fn mathis_halving_rtt_doubles_rate() {
        let a = mathis_rate(1500, Duration::secs(0.2), 0.02).unwrap();
        let b = mathis_rate(1500, Duration::secs(0.1), 0.02).unwrap();
        assert!(rel_err(b.as_bps(), 2.0 * a.as_bps()) < 1e-12);
    }

    #[test]
    fn mathis_zero_loss_is_error() {
        assert_eq!(mathis_rate(1500, Duration::secs(0.1), 0.0), Err(AnalyticError::UnboundedRate));
    }

    #[test]
    fn dovrolis_hand_evaluation() {
        // 1.5·√(1/3)·12000 / (0.1·0.1) = 1_039_230.4845413263 bit/s ≈ 129_904 B/s.
        let r = dovrolis_bound(1500, Duration::secs(0.1), 0.01).unwrap();
        assert!(rel_err(r.as_bps(), 1_039_230.484_541_326_3) < 1e-12);
        let r1 = dovrolis_bound(1500, Duration::secs(1.0), 1.0).unwrap();
        assert!((r1.as_bps() / 8.0 - 1299.04).abs() < 0.01);
    }

    #[test]
    fn mathis_dovrolis_constant_ratio_is_sqrt2() {
        for (mss, rtt, p) in [(1500u32, 0.1, 0.01), (576, 0.25, 0.2), (9000, 0.004, 1.0)] {
            let m = mathis_rate(mss, Duration::secs(rtt), p).unwrap();
            let d = dovrolis_bound(mss, Duration::secs(rtt), p).unwrap();
            assert!(rel_err(m.as_bps() / d.as_bps(), 2.0f64.sqrt()) < 1e-12);
        }
    }

    #[test]
    fn drop_ratio_examples() {
        assert_eq!(proportional_drop_ratio(Rate::mbps(2.0), Rate::mbps(1.0)).unwrap(), 0.5);
        assert_eq!(proportional_drop_ratio(Rate::mbps(3.0), Rate::mbps(3.0)).unwrap(), 1.0);
        let ab = proportional_drop_ratio(Rate::mbps(1.7), Rate::mbps(0.3)).unwrap();
        let ba = proportional_drop_ratio(Rate::mbps(0.3), Rate::mbps(1.7)).unwrap();
        assert!(rel_err(ab * ba, 1.0) < 1e-12);
        assert!(proportional_drop_ratio(Rate::ZERO, Rate::mbps(1.0)).is_err());
    }

    #[test]
    fn ineffectiveness_threshold() {
        // Threshold at rtt = 0.1 s, p_out = 0.01 is √150 / 0.1 ≈ 122.47
        // segments/s. 100 segments/s of 1500 B is 1.2 Mb/s.
        let rtt = Duration::secs(0.1);
        let at_100 = marker_ineffective(Rate::mbps(1.2), rtt, 0.01, 1500).unwrap();
        assert!(at_100.ineffective && !at_100.degenerate_loss);
        let at_200 = marker_ineffective(Rate::mbps(2.4), rtt, 0.01, 1500).unwrap();
        assert!(!at_200.ineffective);
    }

    #[test]
    fn ineffectiveness_threshold_scaling() {
        // Quartering p_out doubles the threshold: pick a target between the
        // two thresholds and watch the verdict flip.
        let rtt = Duration::secs(0.1);
        let threshold_seg = (3.0f64 / (2.0 * 0.01)).sqrt() / 0.1;
        let target = Rate::bps(1.5 * threshold_seg * 1500.0 * 8.0);
        assert!(!marker_ineffective(target, rtt, 0.01, 1500).unwrap().ineffective);
        assert!(marker_ineffective(target, rtt, 0.0025, 1500).unwrap().ineffective);
    }

    #[test]
    fn ineffectiveness_degenerate_loss() {
        let v = marker_ineffective(Rate::mbps(1.0), Duration::secs(0.1), 0.0, 1500).unwrap();
        assert!(v.ineffective && v.degenerate_loss);
    }

    #[test]
    fn yeom_hand_evaluation() {
        // 0.75 Mb/s + (3·12000/(0.4 s))·√50 = 750_000 + 636_396.1030678928.
        let r = yeom_rate(&YeomParams {
            m: Rate::mbps(1.0),
            k: 1500,
            rtt: Duration::secs(0.1),
            p: 0.04,
        })
        .unwrap();
        assert!(rel_err(r.as_bps(), 1_386_396.103_067_892_8) < 1e-12);
    }

    #[test]
    fn yeom_zero_target_is_pure_elastic() {
        let params = YeomParams { m: Rate::ZERO, k: 1500, rtt: Duration::secs(0.1), p: 0.04 };
        let r = yeom_rate(&params).unwrap();
        let eps = yeom_epsilon(1500, Duration::secs(0.1), 0.04).unwrap();
        assert_eq!(r.as_bps(), eps.as_bps());
        assert!(rel_err(eps.as_bps(), 636_396.103_067_892_8) < 1e-12);
    }

    #[test]
    fn yeom_linear_in_target() {
        // rate(m) − rate(0) = (3/4)·m for any inputs.
        for m in [0.1e6, 1.0e6, 7.3e6] {
            let with_m = yeom_rate(&YeomParams { m: Rate::bps(m), k: 1200, rtt: Duration::secs(0.08), p: 0.02 }).unwrap();
            let without = yeom_rate(&YeomParams { m: Rate::ZERO, k: 1200, rtt: Duration::secs(0.08), p: 0.02 }).unwrap();
            assert!(rel_err(with_m.as_bps() - without.as_bps(), 0.75 * m) < 1e-9);
        }
    }

    #[test]
    fn yeom_epsilon_degenerate_p_algebra() {
        // p = 2 is rejected by validation but the raw formula collapses the
        // square root to 1, leaving 3k/(4·RTT).
        assert!(yeom_epsilon(1500, Duration::secs(0.1), 2.0).is_err());
        let raw = yeom_epsilon_unchecked(1500, Duration::secs(0.1), 2.0);
        assert!(rel_err(raw, 3.0 * 12000.0 / 0.4) < 1e-12);
    }

    #[test]
    fn w_at_p_one() {
        assert!(rel_err(padhye_w(1.0, 2).unwrap(), 4.0 / 3.0) < 1e-12);
    }

    #[test]
    fn w_small_p_asymptote() {
        let p = 1e-9;
        let w = padhye_w(p, 2).unwrap();
        let asymptote = (8.0 * (1.0 - p) / (3.0 * 2.0 * p)).sqrt();
        assert!(rel_err(w, asymptote) < 1e-3);
    }

    #[test]
    fn w_strictly_decreasing_in_p() {
        for b in [1u32, 2] {
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let p = 10f64.powf(-6.0 + 6.0 * i as f64 / 199.0);
                let w = padhye_w(p.min(1.0), b).unwrap();
                assert!(w < prev, "W(p) not decreasing at p={p} b={b}");
                prev = w;
            }
        }
    }

    #[test]
    fn q_at_p_one() {
        for w in [3.0, 4.0, 64.0] {
            assert_eq!(padhye_q(1.0, w).unwrap(), 1.0);
        }
    }

    #[test]
    fn q_hand_evaluation() {
        // p=0.5, w=4: (1−0.125)(1+0.125·(1−0.5)) / (1−0.0625) = 119/120.
        let q = padhye_q(0.5, 4.0).unwrap();
        assert!(rel_err(q, 119.0 / 120.0) < 1e-12);
    }

    #[test]
    fn q_bounded_by_one() {
        for p in [1e-9, 1e-4, 0.01, 0.3, 0.9, 1.0] {
            for w in [1.0, 2.0, 4.0, 33.3, 1000.0] {
                let q = padhye_q(p, w).unwrap();
                assert!((0.0..=1.0).contains(&q), "Q({p},{w}) = {q}");
            }
        }
    }

    #[test]
    fn q_series_fallback_matches_direct_form() {
        // Just above the fallback threshold the direct form is still
        // accurate; the series value 3/w must agree there.
        let w = 8.0;
        let p = 1e-11;
        let q = padhye_q(p, w).unwrap();
        assert!(rel_err(q, 3.0 / w) < 1e-3);
        let q_deep = padhye_q(1e-15, w).unwrap();
        assert!(rel_err(q_deep, 3.0 / w) < 1e-12);
    }

    #[test]
    fn f_polynomial_values() {
        assert_eq!(padhye_f(0.0).unwrap(), 1.0);
        assert_eq!(padhye_f(1.0).unwrap(), 64.0);
        assert_eq!(padhye_f(0.5).unwrap(), 4.0);
    }

    fn desk_params(p: f64) -> PadhyeParams {
        PadhyeParams { p, wmax: 64.0, rtt: Duration::secs(0.1), rto: Duration::secs(0.4), mss: 1500, b_ack: 2 }
    }

    #[test]
    fn rate_at_p_one_is_finite() {
        // W(1) = 4/3 < 64 selects the first branch; everything except the
        // timeout term vanishes, leaving MSS/(F(1)·RTO).
        let r = padhye_rate(&PadhyeParams {
            p: 1.0, wmax: 64.0, rtt: Duration::secs(1.0), rto: Duration::secs(1.0), mss: 1500, b_ack: 2,
        })
        .unwrap();
        assert!(rel_err(r.as_bps(), 12000.0 / 64.0) < 1e-12);
    }

    #[test]
    fn rate_small_p_matches_sqrt_model() {
        // With the window cap out of the way, small p approaches
        // √(3/(2b))·MSS/(RTT·√p).
        for b in [1u32, 2] {
            let p = 1e-4;
            let r = padhye_rate(&PadhyeParams {
                p, wmax: 1e9, rtt: Duration::secs(0.1), rto: Duration::secs(0.4), mss: 1500, b_ack: b,
            })
            .unwrap();
            let sqrt_model = (3.0 / (2.0 * b as f64)).sqrt() * 12000.0 / (0.1 * p.sqrt());
            assert!(rel_err(r.as_bps(), sqrt_model) < 0.10, "b={b}: {} vs {}", r.as_bps(), sqrt_model);
        }
    }

    #[test]
    fn rate_window_limited_at_tiny_p() {
        // When W(p) >= wmax the rate saturates near wmax·MSS/RTT.
        let r = padhye_rate(&desk_params(1e-7)).unwrap();
        let cap = 64.0 * 12000.0 / 0.1;
        assert!(r.as_bps() < cap);
        assert!(r.as_bps() > 0.5 * cap);
    }

    /// The p at which W(p) = wmax, solved in closed form from the W
    /// definition: (1−p)/p = (3b/8)·wmax² − ((2+b)/4)·wmax.
    fn branch_crossover_p(wmax: f64, b_ack: u32) -> f64 {
        let b = b_ack as f64;
        let k = 3.0 * b / 8.0 * wmax * wmax - (2.0 + b) / 4.0 * wmax;
        1.0 / (1.0 + k)
    }

    #[test]
    fn branch_continuity_at_crossover() {
        // Test-local oracle: evaluate both printed branch formulas at the
        // crossover and compare (b = 2, where the algebra makes them equal).
        let wmax = 64.0;
        let b = 2.0f64;
        let rtt = 0.1;
        let rto = 0.4;
        let p = branch_crossover_p(wmax, 2);
        let w = padhye_w(p, 2).unwrap();
        assert!(rel_err(w, wmax) < 1e-9, "crossover solve failed: W={w}");
        let q = padhye_q(p, wmax).unwrap();
        let f = padhye_f(p).unwrap();
        let branch1 = ((1.0 - p) / p + w + q / (1.0 - p)) / (rtt * (b / 2.0 * w + 1.0) + q * f * rto / (1.0 - p));
        let branch2 = ((1.0 - p) / p + wmax + q / (1.0 - p))
            / (rtt * (b / 8.0 * wmax + (1.0 - p) / (p * wmax) + 2.0) + q * f * rto / (1.0 - p));
        assert!(rel_err(branch1, branch2) < 1e-9, "branches disagree: {branch1} vs {branch2}");
        let r = padhye_rate(&PadhyeParams { p, wmax, rtt: Duration::secs(rtt), rto: Duration::secs(rto), mss: 1500, b_ack: 2 }).unwrap();
        assert!(rel_err(r.as_bps(), branch1 * 12000.0) < 1e-9);
    }

    #[test]
    fn rate_strictly_decreasing_in_p() {
        // Grid of 60 log-spaced points over [1e-4, 0.5]; underwrites the
        // bisection in invert_padhye.
        for b in [1u32, 2] {
            let mut prev = f64::INFINITY;
            for i in 0..60 {
                let p = 10f64.powf(-4.0 + i as f64 / 59.0 * (0.5f64.log10() + 4.0));
                let r = padhye_rate(&PadhyeParams {
                    p, wmax: 64.0, rtt: Duration::secs(0.1), rto: Duration::secs(0.4), mss: 1500, b_ack: b,
                })
                .unwrap()
                .as_bps();
                assert!(r < prev, "rate not decreasing at p={p} b={b}");
                prev = r;
            }
        }
    }

    #[test]
    fn inversion_round_trip() {
        for i in 0..40 {
            let p0 = 10f64.powf(-4.0 + i as f64 / 39.0 * (0.3f64.log10() + 4.0));
            let rate = padhye_rate(&desk_params(p0)).unwrap();
            let inv = invert_padhye(rate, 64.0, Duration::secs(0.1), Duration::secs(0.4), 1500, 2).unwrap();
            assert!(!inv.saturated);
            assert!(rel_err(inv.p, p0) < 1e-6, "round trip failed at p0={p0}: got {}", inv.p);
        }
    }

    #[test]
    fn inversion_target_too_high() {
        let max = padhye_rate(&desk_params(INVERSION_P_MIN)).unwrap();
        let err = invert_padhye(max * 1.01, 64.0, Duration::secs(0.1), Duration::secs(0.4), 1500, 2).unwrap_err();
        assert!(matches!(err, AnalyticError::TargetExceedsCapacity { .. }));
    }

    #[test]
    fn inversion_saturates_at_p_one() {
        let floor = padhye_rate(&desk_params(1.0)).unwrap();
        let inv = invert_padhye(floor * 0.5, 64.0, Duration::secs(0.1), Duration::secs(0.4), 1500, 2).unwrap();
        assert!(inv.saturated);
        assert_eq!(inv.p, 1.0);
    }

    #[test]
    fn inversion_monotone_in_target() {
        let mut prev_p = 1.0f64;
        for target_mbps in [0.5, 1.0, 2.0, 4.0] {
            let inv = invert_padhye(Rate::mbps(target_mbps), 64.0, Duration::secs(0.1), Duration::secs(0.4), 1500, 2)
                .unwrap();
            assert!(inv.p < prev_p, "larger target must give smaller p");
            prev_p = inv.p;
        }
    }

    #[test]
    fn outputs_finite_and_nonnegative() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let p: f64 = rng.gen_range(1e-8..=1.0);
            let rtt = Duration::secs(rng.gen_range(1e-3..2.0));
            let rto = Duration::secs(rng.gen_range(1e-3..5.0));
            let mss = rng.gen_range(64..9001);
            let wmax = rng.gen_range(1.0..1e4);
            let b_ack = rng.gen_range(1..4);
            let r = padhye_rate(&PadhyeParams { p, wmax, rtt, rto, mss, b_ack }).unwrap();
            assert!(r.as_bps().is_finite() && r.as_bps() >= 0.0);
            let m = mathis_rate(mss, rtt, p).unwrap();
            assert!(m.as_bps().is_finite() && m.as_bps() >= 0.0);
            let e = yeom_epsilon(mss, rtt, p).unwrap();
            assert!(e.as_bps().is_finite() && e.as_bps() >= 0.0);
        }
    }
}
