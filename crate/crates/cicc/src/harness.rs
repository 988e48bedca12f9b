//! Monte-Carlo experiment driver: runs independent frames through encode,
//! channel, and both decoders, then reports frame error rates with Wilson
//! intervals, the fresh-randomness ledger, achieved rates, and membership
//! against the rate-region bounds.
//!
//! Frames parallelize freely because every random draw is addressed by
//! (seed, frame, purpose); the reduction reads outcomes in frame order, so a
//! report is a pure function of (instance, construction, config) regardless
//! of worker count.

use rayon::prelude::*;

use crate::codec::{FrameCodec, FrameTranscript, PayloadSizes};
use crate::construction::{build_construction, ChainingPlan, Construction, EstimatorMode};
use crate::instance::CiccInstance;
use crate::region::{evaluate_region, membership, RateTuple, Violation};
use crate::{Error, Result};

/// Fixed column layout version for CSV emission.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// 95% two-sided normal quantile used by every interval in a report.
const WILSON_Z: f64 = 1.959963984540054;

/// Error-event counts below this leave an interval flagged as weakly
/// determined.
const MIN_EVENTS: usize = 10;

/// Everything one experiment needs beyond the instance itself.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Block length (power of two).
    pub n: usize,
    /// Chained blocks per frame.
    pub m: usize,
    /// Independent frames to simulate.
    pub frames: usize,
    /// Threshold for both the high- and low-entropy index cuts.
    pub delta: f64,
    /// Fraction of each free set actually loaded with content, in (0, 1].
    pub backoff: f64,
    /// Manifest seed; every stream derives from it.
    pub seed: u64,
    /// How entropy profiles are computed.
    pub mode: EstimatorMode,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::Structure("an experiment needs at least one frame".into()));
        }
        if !(self.backoff > 0.0 && self.backoff <= 1.0) {
            return Err(Error::Structure(format!(
                "backoff {} must lie in (0, 1]",
                self.backoff
            )));
        }
        Ok(())
    }
}

/// A binomial rate with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRate {
    pub events: usize,
    pub trials: usize,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
    /// Fewer than ten error events: the interval is honest but weak.
    pub insufficient: bool,
}

impl ErrorRate {
    pub fn from_counts(events: usize, trials: usize) -> Self {
        let (lo, hi) = wilson_interval(events, trials);
        ErrorRate {
            events,
            trials,
            rate: events as f64 / trials as f64,
            lo,
            hi,
            insufficient: events < MIN_EVENTS,
        }
    }
}

/// Wilson score interval at 95% for `events` successes in `trials`.
pub fn wilson_interval(events: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = events as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if events == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if events == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// A leakage figure attached to a report by one of the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageEstimate {
    /// Which estimator produced it ("exact", "plugin", ...).
    pub method: String,
    /// Bits per frame.
    pub value: f64,
    /// One-sigma error bar; zero for exact computation.
    pub err: f64,
}

/// Achieved rates of one plan, in bits per channel use, plus the raw
/// symbol-per-use forms of the randomness figures.
#[derive(Debug, Clone, Copy)]
pub struct AchievedRates {
    pub tuple: RateTuple,
    /// Prefix-layer fresh randomness in symbols per use.
    pub rr_symbols: f64,
    /// Seed symbols per use.
    pub seed_rate: f64,
}

/// Rates from the plan's stream sizes: message streams weighted by their
/// alphabet width, randomness counted over the prefix layer.
pub fn achieved_rates(
    plan: &ChainingPlan,
    sizes: &PayloadSizes,
    alphabets: (usize, usize, usize, usize),
) -> Result<AchievedRates> {
    let (q_x1, q_u, q_v, q_x2) = alphabets;
    let mn = (plan.m * plan.n) as f64;
    let r1 = (sizes.m1_x1 as f64 * (q_x1 as f64).log2() + sizes.m1_u as f64 * (q_u as f64).log2())
        / mn;
    let r2p = (sizes.m2c as f64 * (q_u as f64).log2() + sizes.m2p as f64 * (q_v as f64).log2())
        / mn;
    let r2s = sizes.m2s as f64 * (q_v as f64).log2() / mn;
    let rr_symbols =
        (plan.prefix.w_reuse.len() + plan.m * plan.prefix.fresh.len()) as f64 / mn;
    let rr_bits = rr_symbols * (q_x2 as f64).log2();
    Ok(AchievedRates {
        tuple: RateTuple::new(rr_bits, r1, r2p, r2s)?,
        rr_symbols,
        seed_rate: sizes.seed as f64 / mn,
    })
}

/// The fresh-uniform-symbol ledger of one plan, per frame and per use.
#[derive(Debug, Clone, Copy)]
pub struct RandomnessLedger {
    /// Prefix positions whose draw is shared by all blocks.
    pub w_reuse: usize,
    /// Prefix positions drawn fresh in each block.
    pub fresh_per_block: usize,
    /// Total fresh prefix symbols per frame: reuse + m * fresh.
    pub prefix_per_frame: usize,
    /// Public values drawn per frame: frozen vectors plus terminal specials.
    pub public_per_frame: usize,
    /// Seed symbols per frame.
    pub seed_per_frame: usize,
    pub m: usize,
    pub n: usize,
    /// Prefix symbols per channel use; the quantity the randomness-rate
    /// bound speaks about.
    pub prefix_rate: f64,
    pub seed_rate: f64,
    /// Everything fresh per use: prefix + publics + seed.
    pub total_rate: f64,
    /// How many transcripts were audited against the plan.
    pub frames_checked: usize,
}

/// Counts fresh uniform symbols per frame and per channel use. When
/// transcripts are supplied, each one is first audited for chained-position
/// consistency (which includes reuse of the prefix draw across blocks), so a
/// ledger over transcripts is a measured quantity, not just arithmetic.
pub fn randomness_audit(
    plan: &ChainingPlan,
    transcripts: &[FrameTranscript],
) -> Result<RandomnessLedger> {
    for t in transcripts {
        t.chaining_consistent(plan)?;
    }
    let w_reuse = plan.prefix.w_reuse.len();
    let fresh_per_block = plan.prefix.fresh.len();
    let prefix_per_frame = w_reuse + plan.m * fresh_per_block;
    let public_per_frame: usize = [&plan.layer1, &plan.layer2]
        .iter()
        .map(|c| {
            c.frozen.len()
                + c.own_source.len()
                + c.cross_source.len()
                + c.target.len()
                + c.cross_target.len()
        })
        .sum::<usize>()
        + plan.v.frozen.len();
    let seed_per_frame = plan.seed_symbols();
    let mn = (plan.m * plan.n) as f64;
    Ok(RandomnessLedger {
        w_reuse,
        fresh_per_block,
        prefix_per_frame,
        public_per_frame,
        seed_per_frame,
        m: plan.m,
        n: plan.n,
        prefix_rate: prefix_per_frame as f64 / mn,
        seed_rate: seed_per_frame as f64 / mn,
        total_rate: (prefix_per_frame + public_per_frame + seed_per_frame) as f64 / mn,
        frames_checked: transcripts.len(),
    })
}

/// Everything one experiment measured, ready for CSV or text emission.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub instance_id: String,
    pub n: usize,
    pub m: usize,
    pub case: String,
    pub backoff: f64,
    pub frames: usize,
    /// Receiver 1 frame errors: its shared-message or public-stream decision
    /// differs from what was sent.
    pub pe1: ErrorRate,
    /// Receiver 2 frame errors: any of its five streams differs.
    pub pe2: ErrorRate,
    /// Any receiver got the shared message wrong.
    pub pe_m1: ErrorRate,
    /// Any receiver got the public stream wrong.
    pub pe_m2c: ErrorRate,
    pub pe_m2p: ErrorRate,
    pub pe_m2s: ErrorRate,
    pub leakage: Option<LeakageEstimate>,
    /// Prefix-layer fresh randomness, symbols per channel use.
    pub rr_measured: f64,
    /// Seed symbols per channel use.
    pub seed_rate: f64,
    /// Achieved message rates in bits per channel use.
    pub r1: f64,
    pub r2p: f64,
    pub r2s: f64,
    pub in_region: bool,
    /// The inequalities an out-of-region tuple failed, empty otherwise.
    pub violations: Vec<Violation>,
}

impl MetricsReport {
    pub fn with_leakage(mut self, leakage: LeakageEstimate) -> Self {
        self.leakage = Some(leakage);
        self
    }

    /// The fixed CSV column list, matching [`MetricsReport::to_csv_row`].
    pub fn csv_header() -> &'static str {
        "schema_version,instance_id,N,m,case,backoff,Pe1,Pe1_lo,Pe1_hi,Pe2,Pe2_lo,Pe2_hi,\
         pe_m1,pe_m2c,pe_m2p,pe_m2s,leak_method,leak_value,leak_err,Rr_measured,seed_rate,\
         R1,R2p,R2s,in_region"
    }

    /// One CSV row. Floats use shortest round-trip formatting, so rows are
    /// byte-stable across runs and worker counts.
    pub fn to_csv_row(&self) -> String {
        let (leak_method, leak_value, leak_err) = match &self.leakage {
            Some(l) => (l.method.clone(), l.value.to_string(), l.err.to_string()),
            None => ("none".to_string(), String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            CSV_SCHEMA_VERSION,
            self.instance_id,
            self.n,
            self.m,
            self.case,
            self.backoff,
            self.pe1.rate,
            self.pe1.lo,
            self.pe1.hi,
            self.pe2.rate,
            self.pe2.lo,
            self.pe2.hi,
            self.pe_m1.rate,
            self.pe_m2c.rate,
            self.pe_m2p.rate,
            self.pe_m2s.rate,
            leak_method,
            leak_value,
            leak_err,
            self.rr_measured,
            self.seed_rate,
            self.r1,
            self.r2p,
            self.r2s,
            self.in_region,
        )
    }

    /// A short human-readable account of the same numbers.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "instance {} N={} m={} case {} backoff {} over {} frames\n",
            self.instance_id, self.n, self.m, self.case, self.backoff, self.frames
        ));
        for (name, e) in [
            ("Pe1", &self.pe1),
            ("Pe2", &self.pe2),
            ("pe_m1", &self.pe_m1),
            ("pe_m2c", &self.pe_m2c),
            ("pe_m2p", &self.pe_m2p),
            ("pe_m2s", &self.pe_m2s),
        ] {
            s.push_str(&format!(
                "  {name} = {:.6} [{:.6}, {:.6}] ({}/{} frames{})\n",
                e.rate,
                e.lo,
                e.hi,
                e.events,
                e.trials,
                if e.insufficient { ", insufficient events" } else { "" }
            ));
        }
        match &self.leakage {
            Some(l) => s.push_str(&format!(
                "  leakage ({}) = {:.6} +/- {:.6} bits/frame\n",
                l.method, l.value, l.err
            )),
            None => s.push_str("  leakage: not measured\n"),
        }
        s.push_str(&format!(
            "  Rr = {} sym/use, seed = {} sym/use\n  R1 = {} R2p = {} R2s = {} bits/use, in region: {}\n",
            self.rr_measured, self.seed_rate, self.r1, self.r2p, self.r2s, self.in_region
        ));
        for v in &self.violations {
            s.push_str(&format!("  violated: {} ({} vs {})\n", v.inequality, v.value, v.limit));
        }
        s
    }
}

/// Which streams a single frame got wrong, per receiver.
#[derive(Debug, Clone, Copy, Default)]
struct FrameOutcome {
    rx1_m1: bool,
    rx1_m2c: bool,
    rx2_m1: bool,
    rx2_m2c: bool,
    rx2_m2p: bool,
    rx2_m2s: bool,
}

fn run_one(codec: &FrameCodec, seed: u64, frame: u64) -> Result<FrameOutcome> {
    let payload = codec.random_payload(seed, frame);
    let enc = codec.encode_frame_tx2(&payload, seed, frame)?;
    let (y1, y2) = codec.transmit(&enc.x1.x, &enc.x2.x, seed, frame);
    let r1 = codec.decode_rx1(&y1, &enc.public, &enc.side)?;
    let r2 = codec.decode_rx2(&y2, &enc.public, &enc.side, &payload.seed)?;
    Ok(FrameOutcome {
        rx1_m1: r1.m1_x1 != payload.m1_x1 || r1.m1_u != payload.m1_u,
        rx1_m2c: r1.m2c != payload.m2c,
        rx2_m1: r2.m1_x1 != payload.m1_x1 || r2.m1_u != payload.m1_u,
        rx2_m2c: r2.m2c != payload.m2c,
        rx2_m2p: r2.m2p != payload.m2p,
        rx2_m2s: r2.m2s != payload.m2s,
    })
}

/// Builds the construction for the config and runs the experiment.
pub fn run_experiment(instance: &CiccInstance, cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let construction = build_construction(instance, cfg.n, cfg.delta, cfg.mode, cfg.seed)?;
    run_with_construction(instance, &construction, cfg)
}

/// Runs the experiment against an already-built (possibly cached)
/// construction, verifying it belongs to this instance.
pub fn run_with_construction(
    instance: &CiccInstance,
    construction: &Construction,
    cfg: &ExperimentConfig,
) -> Result<MetricsReport> {
    cfg.validate()?;
    if construction.instance_hash != instance.hash() {
        return Err(Error::Structure(format!(
            "construction was built for instance {}, got {}",
            construction.instance_hash,
            instance.hash()
        )));
    }
    if construction.n != cfg.n {
        return Err(Error::Structure(format!(
            "construction has N = {}, config asks for {}",
            construction.n, cfg.n
        )));
    }
    let plan = construction.plan(cfg.m, cfg.backoff)?;
    let codec = FrameCodec::new(instance, plan)?;

    // Both transmitters must derive the identical shared layer; check once
    // per experiment on the first frame.
    let p0 = codec.random_payload(cfg.seed, 0);
    let x1_alone = codec.encode_frame_tx1(&p0, cfg.seed, 0)?;
    let enc0 = codec.encode_frame_tx2(&p0, cfg.seed, 0)?;
    if x1_alone != enc0.x1.x {
        return Err(Error::Structure(
            "the two transmitters computed different shared layers from the same seed".into(),
        ));
    }

    let outcomes: Vec<FrameOutcome> = (0..cfg.frames)
        .into_par_iter()
        .map(|f| run_one(&codec, cfg.seed, f as u64))
        .collect::<Result<Vec<_>>>()?;

    let count = |f: &dyn Fn(&FrameOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
    let pe1 = ErrorRate::from_counts(count(&|o| o.rx1_m1 || o.rx1_m2c), cfg.frames);
    let pe2 = ErrorRate::from_counts(
        count(&|o| o.rx2_m1 || o.rx2_m2c || o.rx2_m2p || o.rx2_m2s),
        cfg.frames,
    );
    let pe_m1 = ErrorRate::from_counts(count(&|o| o.rx1_m1 || o.rx2_m1), cfg.frames);
    let pe_m2c = ErrorRate::from_counts(count(&|o| o.rx1_m2c || o.rx2_m2c), cfg.frames);
    let pe_m2p = ErrorRate::from_counts(count(&|o| o.rx2_m2p), cfg.frames);
    let pe_m2s = ErrorRate::from_counts(count(&|o| o.rx2_m2s), cfg.frames);

    let rates = achieved_rates(codec.plan(), &codec.payload_sizes(), codec.alphabets())?;
    let bounds = evaluate_region(instance)?;
    let violations = membership(&rates.tuple, &bounds);

    Ok(MetricsReport {
        instance_id: construction.instance_hash.clone(),
        n: construction.n,
        m: cfg.m,
        case: construction.case.label.to_string(),
        backoff: cfg.backoff,
        frames: cfg.frames,
        pe1,
        pe2,
        pe_m1,
        pe_m2c,
        pe_m2p,
        pe_m2s,
        leakage: None,
        rr_measured: rates.rr_symbols,
        seed_rate: rates.seed_rate,
        r1: rates.tuple.r1,
        r2p: rates.tuple.r2p,
        r2s: rates.tuple.r2s,
        in_region: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{JointDist, Var};
    use crate::instance::ChannelModel;

    /// V uniform and independent of (U, X1); X2 = V; receiver 2 sees
    /// (X1, X2) losslessly while receiver 1 sees only X1, so the whole
    /// confidential layer is high-entropy toward receiver 1 and every
    /// decodable stream decodes without error.
    fn secret_identity_instance() -> CiccInstance {
        let (qu, qv, qx1, qx2) = (2usize, 5usize, 2usize, 5usize);
        let mut probs = vec![0.0; qu * qv * qx1 * qx2];
        for u in 0..qu {
            for v in 0..qv {
                for x1 in 0..qx1 {
                    probs[((u * qv + v) * qx1 + x1) * qx2 + v] = 1.0 / 20.0;
                }
            }
        }
        let design = JointDist::new(
            vec![Var::new("U", qu), Var::new("V", qv), Var::new("X1", qx1), Var::new("X2", qx2)],
            probs,
        )
        .unwrap();
        let (y1s, y2s) = (qx1, qx1 * qx2);
        let mut ch = vec![0.0; qx1 * qx2 * y1s * y2s];
        for x1 in 0..qx1 {
            for x2 in 0..qx2 {
                let y2 = x1 * qx2 + x2;
                ch[((x1 * qx2 + x2) * y1s + x1) * y2s + y2] = 1.0;
            }
        }
        CiccInstance::new(design, ChannelModel::new(qx1, qx2, y1s, y2s, ch).unwrap()).unwrap()
    }

    fn exact_cfg() -> ExperimentConfig {
        ExperimentConfig {
            n: 8,
            m: 2,
            frames: 24,
            delta: 0.05,
            backoff: 0.9,
            seed: 7,
            mode: EstimatorMode::Exact,
        }
    }

    #[test]
    fn wilson_matches_reference_values() {
        let cases = [
            (0usize, 50usize, 0.0, 0.07134759913335872),
            (5, 100, 0.02154367915436796, 0.11175046923191913),
            (50, 100, 0.4038315303659956, 0.5961684696340044),
            (1, 1, 0.20654931437723745, 1.0),
        ];
        for (k, n, lo, hi) in cases {
            let (got_lo, got_hi) = wilson_interval(k, n);
            assert!(
                (got_lo - lo).abs() < 1e-12 && (got_hi - hi).abs() < 1e-12,
                "wilson({k}, {n}) = ({got_lo}, {got_hi}), want ({lo}, {hi})"
            );
        }
    }

    #[test]
    fn lossless_channels_run_error_free_and_inside_the_region() {
        let inst = secret_identity_instance();
        let report = run_experiment(&inst, &exact_cfg()).unwrap();
        for (name, e) in [
            ("Pe1", &report.pe1),
            ("Pe2", &report.pe2),
            ("pe_m2s", &report.pe_m2s),
        ] {
            assert_eq!(e.events, 0, "{name} saw {} error frames on a lossless channel", e.events);
        }
        assert!(report.pe1.insufficient, "zero events must be flagged as weakly determined");
        assert!(
            report.in_region,
            "achieved rates must sit inside the bounds, violations: {:?}",
            report.violations
        );
        // Receiver 1 never learns X2, so the confidential stream is wide
        // and the prefix layer needs no fresh randomness.
        assert!(report.r2s > 1.0, "confidential rate {} should be large here", report.r2s);
        assert_eq!(report.rr_measured, 0.0, "X2 is a function of V: no prefix randomness");
        assert_eq!(report.seed_rate, 0.0, "nothing is chained on a two-perfect-layer instance");
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let inst = secret_identity_instance();
        let a = run_experiment(&inst, &exact_cfg()).unwrap();
        let b = run_experiment(&inst, &exact_cfg()).unwrap();
        assert_eq!(a.to_csv_row(), b.to_csv_row(), "same config and seed must reproduce bytes");
        assert_eq!(
            MetricsReport::csv_header().split(',').count(),
            a.to_csv_row().split(',').count(),
            "row column count must match the header"
        );
    }

    #[test]
    fn achieved_rates_follow_the_set_size_arithmetic() {
        let inst = secret_identity_instance();
        let cfg = exact_cfg();
        let construction =
            build_construction(&inst, cfg.n, cfg.delta, cfg.mode, cfg.seed).unwrap();
        let plan = construction.plan(cfg.m, cfg.backoff).unwrap();
        let report = run_with_construction(&inst, &construction, &cfg).unwrap();
        // R1 = |fresh-per-frame| / (mN) in bits: first layer is binary.
        let want_r1 = (plan.layer1.fresh_per_frame(cfg.m) + plan.layer2.fresh_per_frame(cfg.m))
            as f64
            / (cfg.m * cfg.n) as f64;
        assert!(
            (report.r1 - want_r1).abs() < 1e-12,
            "R1 = {} but the set sizes give {want_r1}",
            report.r1
        );
        // Equivalent closed form: per-block share minus the chained refund.
        let core = plan.layer1.core.len() as f64;
        let src = (plan.layer1.own_source.len() + plan.layer1.cross_source.len()) as f64;
        let closed = (core + src) / cfg.n as f64 - src / (cfg.m * cfg.n) as f64;
        let layer2_share = plan.layer2.fresh_per_frame(cfg.m) as f64 / (cfg.m * cfg.n) as f64;
        assert!(
            (report.r1 - closed - layer2_share).abs() < 1e-12,
            "chained-refund form disagrees: {} vs {}",
            report.r1,
            closed + layer2_share
        );
    }

    #[test]
    fn ledger_reuse_contribution_shrinks_linearly_in_m() {
        let inst = secret_identity_instance();
        let cfg = exact_cfg();
        let construction =
            build_construction(&inst, cfg.n, cfg.delta, cfg.mode, cfg.seed).unwrap();
        let plan1 = construction.plan(1, 1.0).unwrap();
        let plan8 = construction.plan(8, 1.0).unwrap();
        let l1 = randomness_audit(&plan1, &[]).unwrap();
        let l8 = randomness_audit(&plan8, &[]).unwrap();
        assert_eq!(l1.w_reuse, l8.w_reuse, "the reused set does not depend on m");
        let per_use_1 = l1.w_reuse as f64 / (l1.m * l1.n) as f64;
        let per_use_8 = l8.w_reuse as f64 / (l8.m * l8.n) as f64;
        assert!(
            (per_use_1 - 8.0 * per_use_8).abs() < 1e-15,
            "reused contribution per use must fall as 1/m: {per_use_1} vs 8 * {per_use_8}"
        );
    }

    #[test]
    fn foreign_constructions_are_rejected() {
        let inst = secret_identity_instance();
        let cfg = exact_cfg();
        let construction =
            build_construction(&inst, cfg.n, cfg.delta, cfg.mode, cfg.seed).unwrap();
        // Same design, different channel: receiver 1 suddenly sees X2 too.
        let (qu, qv, qx1, qx2) = (2usize, 5usize, 2usize, 5usize);
        let mut probs = vec![0.0; qu * qv * qx1 * qx2];
        for u in 0..qu {
            for v in 0..qv {
                for x1 in 0..qx1 {
                    probs[((u * qv + v) * qx1 + x1) * qx2 + v] = 1.0 / 20.0;
                }
            }
        }
        let design = JointDist::new(
            vec![Var::new("U", qu), Var::new("V", qv), Var::new("X1", qx1), Var::new("X2", qx2)],
            probs,
        )
        .unwrap();
        let y = qx1 * qx2;
        let mut ch = vec![0.0; qx1 * qx2 * y * y];
        for x1 in 0..qx1 {
            for x2 in 0..qx2 {
                let s = x1 * qx2 + x2;
                ch[((x1 * qx2 + x2) * y + s) * y + s] = 1.0;
            }
        }
        let other = CiccInstance::new(
            design,
            ChannelModel::new(qx1, qx2, y, y, ch).unwrap(),
        )
        .unwrap();
        let err = run_with_construction(&other, &construction, &cfg).unwrap_err();
        assert!(err.to_string().contains("instance"), "got: {err}");
        let err = run_experiment(&inst, &ExperimentConfig { frames: 0, ..cfg }).unwrap_err();
        assert!(err.to_string().contains("at least one frame"), "got: {err}");
    }
}
