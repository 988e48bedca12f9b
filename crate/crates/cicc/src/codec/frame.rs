//! Whole-frame encoding, channel simulation, and decoding.
//!
//! All randomness is addressed: `(purpose, frame, block, layer)` paths under
//! one manifest seed, so transmitter 1 and transmitter 2 derive the identical
//! first layer, reruns reproduce byte-for-byte, and frames can be processed
//! in any order on any number of workers.
//!
//! Message streams are consumed in one canonical order, blocks ascending:
//! each common layer takes its core values first (the first `u_m2c_core`
//! second-layer core positions read the public stream), then fresh source
//! values, then fresh cross-source values. The confidential layer reads, per
//! block, the repeat slot (block 1 only), the private set, then the chained
//! set (last block reads the seed instead). Decoders extract in the same
//! order, so a stream compares positionally against what was sent.

use rand::Rng;

use crate::alphabet::Symbol;
use crate::construction::{ChainDirection, ChainingPlan, LayerChain, VChain};
use crate::dist::{sample_index, CondTable};
use crate::instance::{ChannelModel, CiccInstance};
use crate::rng::{derive_rng, purpose};
use crate::sets::{IndexSet, PrefixSets};
use crate::{Error, Result};

use super::layer::{sc_decode_layer, sc_encode_layer, Fill};

/// Layer addresses inside randomness paths.
const LAYER_X1: u64 = 0;
const LAYER_U: u64 = 1;
const LAYER_V: u64 = 2;
const LAYER_X2: u64 = 3;

/// Role addresses for the per-frame public draws.
const ROLE_FROZEN: u64 = 0;
const ROLE_SOURCE: u64 = 1;
const ROLE_CROSS_SOURCE: u64 = 2;
const ROLE_TARGET: u64 = 3;
const ROLE_CROSS_TARGET: u64 = 4;

/// The message content of one frame, already split by carrying layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePayload {
    /// Shared-message symbols carried on the first layer.
    pub m1_x1: Vec<Symbol>,
    /// Shared-message symbols carried on the second layer.
    pub m1_u: Vec<Symbol>,
    /// Transmitter 2's public symbols on the second layer.
    pub m2c: Vec<Symbol>,
    /// Transmitter 2's private symbols on the confidential layer.
    pub m2p: Vec<Symbol>,
    /// Transmitter 2's confidential symbols.
    pub m2s: Vec<Symbol>,
    /// The pre-shared secret seed that closes the confidential chain.
    pub seed: Vec<Symbol>,
}

/// Stream lengths one frame consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadSizes {
    pub m1_x1: usize,
    pub m1_u: usize,
    pub m2c: usize,
    pub m2p: usize,
    pub m2s: usize,
    pub seed: usize,
}

/// Per-frame public values for one common layer: the frozen vector reused by
/// every block plus the terminal-block specials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPublic {
    pub frozen: Vec<Symbol>,
    pub source: Vec<Symbol>,
    pub cross_source: Vec<Symbol>,
    pub target: Vec<Symbol>,
    pub cross_target: Vec<Symbol>,
}

/// Everything both receivers (and the eavesdropper) get for free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicSide {
    pub layer1: LayerPublic,
    pub layer2: LayerPublic,
    pub frozen_v: Vec<Symbol>,
}

/// Out-of-band symbols: sampled positions a receiver cannot resolve from its
/// own observation, handed over per block (the confidential-layer set rides
/// the secured link).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideInfo {
    pub rx1_x1: Vec<Vec<Symbol>>,
    pub rx1_u: Vec<Vec<Symbol>>,
    pub rx2_x1: Vec<Vec<Symbol>>,
    pub rx2_u: Vec<Vec<Symbol>>,
    pub rx2_v: Vec<Vec<Symbol>>,
}

/// One layer across the frame: transform-domain and symbol-domain blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerBlocks {
    pub u: Vec<Vec<Symbol>>,
    pub x: Vec<Vec<Symbol>>,
}

/// The complete output of transmitter 2's encoder (which reproduces
/// transmitter 1's layer internally).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedFrame {
    pub x1: LayerBlocks,
    pub u: LayerBlocks,
    pub v: LayerBlocks,
    pub x2: LayerBlocks,
    pub public: PublicSide,
    pub side: SideInfo,
}

/// Receiver 1's decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rx1Result {
    pub m1_x1: Vec<Symbol>,
    pub m1_u: Vec<Symbol>,
    pub m2c: Vec<Symbol>,
    pub u_x1: Vec<Vec<Symbol>>,
    pub u_u: Vec<Vec<Symbol>>,
}

/// Receiver 2's decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rx2Result {
    pub m1_x1: Vec<Symbol>,
    pub m1_u: Vec<Symbol>,
    pub m2c: Vec<Symbol>,
    pub m2p: Vec<Symbol>,
    pub m2s: Vec<Symbol>,
    pub u_x1: Vec<Vec<Symbol>>,
    pub u_u: Vec<Vec<Symbol>>,
    pub u_v: Vec<Vec<Symbol>>,
}

/// A reusable frame encoder/decoder for one (instance, plan) pair.
#[derive(Debug, Clone)]
pub struct FrameCodec {
    plan: ChainingPlan,
    instance_hash: String,
    channel: ChannelModel,
    q_x1: usize,
    q_u: usize,
    q_v: usize,
    q_x2: usize,
    enc_x1: CondTable,
    enc_u: CondTable,
    enc_v: CondTable,
    enc_x2: CondTable,
    dec1_x1: CondTable,
    dec1_u: CondTable,
    dec2_x1: CondTable,
    dec2_u: CondTable,
    dec2_v: CondTable,
}

impl FrameCodec {
    /// Precomputes every conditional the four layers need and validates the
    /// plan's internal consistency.
    pub fn new(instance: &CiccInstance, plan: ChainingPlan) -> Result<Self> {
        let joint = instance.full_joint()?;
        let q_x1 = instance.design().var_size("X1")?;
        let q_u = instance.design().var_size("U")?;
        let q_v = instance.design().var_size("V")?;
        let q_x2 = instance.design().var_size("X2")?;
        if !plan.n.is_power_of_two() {
            return Err(Error::Structure(format!("block length {} is not a power of two", plan.n)));
        }
        validate_plan(&plan)?;
        let crossed = !plan.layer1.cross_target.is_empty() || !plan.layer2.cross_target.is_empty();
        if crossed && q_u != q_x1 {
            return Err(Error::Structure(format!(
                "cross-layer repeats copy symbols between the two common layers, \
                 which needs matching alphabets: |U| = {q_u}, |X1| = {q_x1}"
            )));
        }
        Ok(FrameCodec {
            plan,
            instance_hash: instance.hash(),
            channel: instance.channel().clone(),
            q_x1,
            q_u,
            q_v,
            q_x2,
            enc_x1: joint.conditional("X1", &[])?,
            enc_u: joint.conditional("U", &["X1"])?,
            enc_v: joint.conditional("V", &["X1", "U"])?,
            enc_x2: joint.conditional("X2", &["X1", "U", "V"])?,
            dec1_x1: joint.conditional("X1", &["Y1"])?,
            dec1_u: joint.conditional("U", &["Y1", "X1"])?,
            dec2_x1: joint.conditional("X1", &["Y2"])?,
            dec2_u: joint.conditional("U", &["Y2", "X1"])?,
            dec2_v: joint.conditional("V", &["Y2", "X1", "U"])?,
        })
    }

    pub fn plan(&self) -> &ChainingPlan {
        &self.plan
    }

    /// Hash of the instance this codec was built from.
    pub fn instance_hash(&self) -> &str {
        &self.instance_hash
    }

    /// Alphabet sizes as (first layer, second layer, confidential, prefix).
    pub fn alphabets(&self) -> (usize, usize, usize, usize) {
        (self.q_x1, self.q_u, self.q_v, self.q_x2)
    }

    /// Stream lengths this plan consumes per frame.
    pub fn payload_sizes(&self) -> PayloadSizes {
        let p = &self.plan;
        let k = p.u_m2c_core;
        PayloadSizes {
            m1_x1: p.layer1.fresh_per_frame(p.m),
            m1_u: p.layer2.fresh_per_frame(p.m) - p.m * k,
            m2c: p.m * k,
            m2p: p.private_per_frame(),
            m2s: p.confidential_per_frame(),
            seed: p.seed_symbols(),
        }
    }

    /// Draws uniform messages and a fresh seed for one frame.
    pub fn random_payload(&self, seed: u64, frame: u64) -> FramePayload {
        let s = self.payload_sizes();
        let mut mr = derive_rng(seed, &[purpose::MESSAGES, frame]);
        let mut sr = derive_rng(seed, &[purpose::SEED_SYMBOLS, frame]);
        FramePayload {
            m1_x1: draw_symbols(&mut mr, s.m1_x1, self.q_x1),
            m1_u: draw_symbols(&mut mr, s.m1_u, self.q_u),
            m2c: draw_symbols(&mut mr, s.m2c, self.q_u),
            m2p: draw_symbols(&mut mr, s.m2p, self.q_v),
            m2s: draw_symbols(&mut mr, s.m2s, self.q_v),
            seed: draw_symbols(&mut sr, s.seed, self.q_v),
        }
    }

    /// Transmitter 1: encodes the first layer only. Depends on the shared
    /// message and frame randomness, never on transmitter 2's streams.
    pub fn encode_frame_tx1(
        &self,
        payload: &FramePayload,
        seed: u64,
        frame: u64,
    ) -> Result<Vec<Vec<Symbol>>> {
        self.check_payload(payload)?;
        let public = self.draw_public(seed, frame);
        let (v1, _) = self.common_values(payload, &public)?;
        Ok(self.encode_x1_blocks(&v1, &public, seed, frame)?.x)
    }

    /// Transmitter 2: reproduces the first layer from the shared randomness,
    /// then stacks the second, confidential, and prefix layers.
    pub fn encode_frame_tx2(
        &self,
        payload: &FramePayload,
        seed: u64,
        frame: u64,
    ) -> Result<EncodedFrame> {
        self.check_payload(payload)?;
        let plan = &self.plan;
        let n = plan.n;
        let public = self.draw_public(seed, frame);
        let (v1, v2) = self.common_values(payload, &public)?;
        let vv = self.v_values(payload)?;

        let x1 = self.encode_x1_blocks(&v1, &public, seed, frame)?;
        let mut u = LayerBlocks { u: Vec::with_capacity(plan.m), x: Vec::with_capacity(plan.m) };
        let mut v = LayerBlocks { u: Vec::with_capacity(plan.m), x: Vec::with_capacity(plan.m) };
        let mut x2 = LayerBlocks { u: Vec::with_capacity(plan.m), x: Vec::with_capacity(plan.m) };

        let w_syms = {
            let mut rng = derive_rng(seed, &[purpose::PREFIX, frame, 0]);
            draw_symbols(&mut rng, plan.prefix.w_reuse.len(), self.q_x2)
        };

        for b in 0..plan.m {
            // Second layer.
            let fill = chain_fill(n, &plan.layer2, &v2, &public.layer2.frozen, b);
            let leaves = build_leaves(&self.enc_u, n, |i| vec![x1.x[b][i] as usize]);
            let mut rng = derive_rng(seed, &[purpose::SAMPLING, frame, b as u64, LAYER_U]);
            let (uu, ux) = sc_encode_layer(self.q_u, &leaves, &fill, &mut rng)?;
            u.u.push(uu);
            u.x.push(ux);

            // Confidential layer.
            let fill = v_fill(n, &plan.v, &vv, &public.frozen_v, b);
            let leaves =
                build_leaves(&self.enc_v, n, |i| vec![x1.x[b][i] as usize, u.x[b][i] as usize]);
            let mut rng = derive_rng(seed, &[purpose::SAMPLING, frame, b as u64, LAYER_V]);
            let (vu, vx) = sc_encode_layer(self.q_v, &leaves, &fill, &mut rng)?;
            v.u.push(vu);
            v.x.push(vx);

            // Prefix layer.
            let fresh = {
                let mut rng = derive_rng(seed, &[purpose::PREFIX, frame, 1 + b as u64]);
                draw_symbols(&mut rng, plan.prefix.fresh.len(), self.q_x2)
            };
            let fill = prefix_fill(n, &plan.prefix, &w_syms, &fresh);
            let leaves = build_leaves(&self.enc_x2, n, |i| {
                vec![x1.x[b][i] as usize, u.x[b][i] as usize, v.x[b][i] as usize]
            });
            let mut rng = derive_rng(seed, &[purpose::SAMPLING, frame, b as u64, LAYER_X2]);
            let (xu, xx) = sc_encode_layer(self.q_x2, &leaves, &fill, &mut rng)?;
            x2.u.push(xu);
            x2.x.push(xx);
        }

        let side = SideInfo {
            rx1_x1: gather_blocks(&x1.u, &plan.side1_layer1),
            rx1_u: gather_blocks(&u.u, &plan.side1_layer2),
            rx2_x1: gather_blocks(&x1.u, &plan.side2_layer1),
            rx2_u: gather_blocks(&u.u, &plan.side2_layer2),
            rx2_v: gather_blocks(&v.u, &plan.side2_v),
        };
        Ok(EncodedFrame { x1, u, v, x2, public, side })
    }

    /// Pushes one frame through the memoryless channel.
    pub fn transmit(
        &self,
        x1: &[Vec<Symbol>],
        x2: &[Vec<Symbol>],
        seed: u64,
        frame: u64,
    ) -> (Vec<Vec<Symbol>>, Vec<Vec<Symbol>>) {
        let y2_size = self.channel.y2_size();
        let mut y1 = Vec::with_capacity(x1.len());
        let mut y2 = Vec::with_capacity(x1.len());
        for (b, (xa, xb)) in x1.iter().zip(x2).enumerate() {
            let mut rng = derive_rng(seed, &[purpose::CHANNEL, frame, b as u64]);
            let mut ya = Vec::with_capacity(xa.len());
            let mut yb = Vec::with_capacity(xa.len());
            for (&a, &c) in xa.iter().zip(xb) {
                let row = self.channel.row(a as usize, c as usize);
                let idx = sample_index(row, &mut rng);
                ya.push((idx / y2_size) as Symbol);
                yb.push((idx % y2_size) as Symbol);
            }
            y1.push(ya);
            y2.push(yb);
        }
        (y1, y2)
    }

    /// Receiver 1: blocks in ascending order, first layer then second; the
    /// positions it cannot decode arrive from the previous block's decisions
    /// (or the public terminal values).
    pub fn decode_rx1(
        &self,
        y1: &[Vec<Symbol>],
        public: &PublicSide,
        side: &SideInfo,
    ) -> Result<Rx1Result> {
        let plan = &self.plan;
        let n = plan.n;
        if y1.len() != plan.m {
            return Err(Error::Structure(format!(
                "got {} observation blocks, plan has {}",
                y1.len(),
                plan.m
            )));
        }
        let mut u_x1: Vec<Vec<Symbol>> = Vec::with_capacity(plan.m);
        let mut u_u: Vec<Vec<Symbol>> = Vec::with_capacity(plan.m);
        for b in 0..plan.m {
            let mut known = vec![None; n];
            pin_known(&mut known, &plan.layer1.frozen, &public.layer1.frozen);
            pin_known(&mut known, &plan.side1_layer1, &side.rx1_x1[b]);
            match plan.direction {
                ChainDirection::Forward => {
                    let (t, ct) = if b == 0 {
                        (public.layer1.target.clone(), public.layer1.cross_target.clone())
                    } else {
                        (
                            gather(&u_x1[b - 1], &plan.layer1.own_source),
                            gather(&u_u[b - 1], &plan.layer2.cross_source),
                        )
                    };
                    pin_known(&mut known, &plan.layer1.target, &t);
                    pin_known(&mut known, &plan.layer1.cross_target, &ct);
                }
                ChainDirection::Backward => {
                    let (s, cs) = if b == 0 {
                        (public.layer1.source.clone(), public.layer1.cross_source.clone())
                    } else {
                        (
                            gather(&u_x1[b - 1], &plan.layer1.target),
                            gather(&u_u[b - 1], &plan.layer2.cross_target),
                        )
                    };
                    pin_known(&mut known, &plan.layer1.own_source, &s);
                    pin_known(&mut known, &plan.layer1.cross_source, &cs);
                }
            }
            let leaves = build_leaves(&self.dec1_x1, n, |i| vec![y1[b][i] as usize]);
            let (u1, x1hat) = sc_decode_layer(self.q_x1, &leaves, &known)?;

            let mut known = vec![None; n];
            pin_known(&mut known, &plan.layer2.frozen, &public.layer2.frozen);
            pin_known(&mut known, &plan.side1_layer2, &side.rx1_u[b]);
            match plan.direction {
                ChainDirection::Forward => {
                    let (t, ct) = if b == 0 {
                        (public.layer2.target.clone(), public.layer2.cross_target.clone())
                    } else {
                        (
                            gather(&u_u[b - 1], &plan.layer2.own_source),
                            gather(&u_x1[b - 1], &plan.layer1.cross_source),
                        )
                    };
                    pin_known(&mut known, &plan.layer2.target, &t);
                    pin_known(&mut known, &plan.layer2.cross_target, &ct);
                }
                ChainDirection::Backward => {
                    let (s, cs) = if b == 0 {
                        (public.layer2.source.clone(), public.layer2.cross_source.clone())
                    } else {
                        (
                            gather(&u_u[b - 1], &plan.layer2.target),
                            gather(&u_x1[b - 1], &plan.layer1.cross_target),
                        )
                    };
                    pin_known(&mut known, &plan.layer2.own_source, &s);
                    pin_known(&mut known, &plan.layer2.cross_source, &cs);
                }
            }
            let leaves =
                build_leaves(&self.dec1_u, n, |i| vec![y1[b][i] as usize, x1hat[i] as usize]);
            let (u2, _) = sc_decode_layer(self.q_u, &leaves, &known)?;

            u_x1.push(u1);
            u_u.push(u2);
        }
        let (m1_x1, _) = self.extract_common(&plan.layer1, 0, &u_x1);
        let (m1_u, m2c) = self.extract_common(&plan.layer2, plan.u_m2c_core, &u_u);
        Ok(Rx1Result { m1_x1, m1_u, m2c, u_x1, u_u })
    }

    /// Receiver 2: blocks in descending order; source positions arrive from
    /// the next block's decisions (or the public terminal values), and the
    /// confidential chain unrolls from the pre-shared seed.
    pub fn decode_rx2(
        &self,
        y2: &[Vec<Symbol>],
        public: &PublicSide,
        side: &SideInfo,
        seed_syms: &[Symbol],
    ) -> Result<Rx2Result> {
        let plan = &self.plan;
        let n = plan.n;
        if y2.len() != plan.m {
            return Err(Error::Structure(format!(
                "got {} observation blocks, plan has {}",
                y2.len(),
                plan.m
            )));
        }
        if seed_syms.len() != plan.seed_symbols() {
            return Err(Error::Structure(format!(
                "seed carries {} symbols, the chain needs {}",
                seed_syms.len(),
                plan.seed_symbols()
            )));
        }
        let mut u_x1: Vec<Option<Vec<Symbol>>> = vec![None; plan.m];
        let mut u_u: Vec<Option<Vec<Symbol>>> = vec![None; plan.m];
        let mut u_v: Vec<Option<Vec<Symbol>>> = vec![None; plan.m];
        for b in (0..plan.m).rev() {
            let last = b + 1 == plan.m;
            let mut known = vec![None; n];
            pin_known(&mut known, &plan.layer1.frozen, &public.layer1.frozen);
            pin_known(&mut known, &plan.side2_layer1, &side.rx2_x1[b]);
            match plan.direction {
                ChainDirection::Forward => {
                    let (s, cs) = if last {
                        (public.layer1.source.clone(), public.layer1.cross_source.clone())
                    } else {
                        (
                            gather(u_x1[b + 1].as_ref().unwrap(), &plan.layer1.target),
                            gather(u_u[b + 1].as_ref().unwrap(), &plan.layer2.cross_target),
                        )
                    };
                    pin_known(&mut known, &plan.layer1.own_source, &s);
                    pin_known(&mut known, &plan.layer1.cross_source, &cs);
                }
                ChainDirection::Backward => {
                    let (t, ct) = if last {
                        (public.layer1.target.clone(), public.layer1.cross_target.clone())
                    } else {
                        (
                            gather(u_x1[b + 1].as_ref().unwrap(), &plan.layer1.own_source),
                            gather(u_u[b + 1].as_ref().unwrap(), &plan.layer2.cross_source),
                        )
                    };
                    pin_known(&mut known, &plan.layer1.target, &t);
                    pin_known(&mut known, &plan.layer1.cross_target, &ct);
                }
            }
            let leaves = build_leaves(&self.dec2_x1, n, |i| vec![y2[b][i] as usize]);
            let (u1, x1hat) = sc_decode_layer(self.q_x1, &leaves, &known)?;

            let mut known = vec![None; n];
            pin_known(&mut known, &plan.layer2.frozen, &public.layer2.frozen);
            pin_known(&mut known, &plan.side2_layer2, &side.rx2_u[b]);
            match plan.direction {
                ChainDirection::Forward => {
                    let (s, cs) = if last {
                        (public.layer2.source.clone(), public.layer2.cross_source.clone())
                    } else {
                        (
                            gather(u_u[b + 1].as_ref().unwrap(), &plan.layer2.target),
                            gather(u_x1[b + 1].as_ref().unwrap(), &plan.layer1.cross_target),
                        )
                    };
                    pin_known(&mut known, &plan.layer2.own_source, &s);
                    pin_known(&mut known, &plan.layer2.cross_source, &cs);
                }
                ChainDirection::Backward => {
                    let (t, ct) = if last {
                        (public.layer2.target.clone(), public.layer2.cross_target.clone())
                    } else {
                        (
                            gather(u_u[b + 1].as_ref().unwrap(), &plan.layer2.own_source),
                            gather(u_x1[b + 1].as_ref().unwrap(), &plan.layer1.cross_source),
                        )
                    };
                    pin_known(&mut known, &plan.layer2.target, &t);
                    pin_known(&mut known, &plan.layer2.cross_target, &ct);
                }
            }
            let leaves =
                build_leaves(&self.dec2_u, n, |i| vec![y2[b][i] as usize, x1hat[i] as usize]);
            let (u2, uhat) = sc_decode_layer(self.q_u, &leaves, &known)?;

            let mut known = vec![None; n];
            pin_known(&mut known, &plan.v.frozen, &public.frozen_v);
            pin_known(&mut known, &plan.side2_v, &side.rx2_v[b]);
            let chained = if last {
                seed_syms.to_vec()
            } else {
                gather(u_v[b + 1].as_ref().unwrap(), &plan.v.repeat)
            };
            pin_known(&mut known, &plan.v.chained, &chained);
            let leaves = build_leaves(&self.dec2_v, n, |i| {
                vec![y2[b][i] as usize, x1hat[i] as usize, uhat[i] as usize]
            });
            let (u3, _) = sc_decode_layer(self.q_v, &leaves, &known)?;

            u_x1[b] = Some(u1);
            u_u[b] = Some(u2);
            u_v[b] = Some(u3);
        }
        let u_x1: Vec<Vec<Symbol>> = u_x1.into_iter().map(|v| v.unwrap()).collect();
        let u_u: Vec<Vec<Symbol>> = u_u.into_iter().map(|v| v.unwrap()).collect();
        let u_v: Vec<Vec<Symbol>> = u_v.into_iter().map(|v| v.unwrap()).collect();
        let (m1_x1, _) = self.extract_common(&plan.layer1, 0, &u_x1);
        let (m1_u, m2c) = self.extract_common(&plan.layer2, plan.u_m2c_core, &u_u);
        let (m2p, m2s) = self.extract_v(&u_v);
        Ok(Rx2Result { m1_x1, m1_u, m2c, m2p, m2s, u_x1, u_u, u_v })
    }

    /// Reads one common layer's message streams back out of committed
    /// transform-domain blocks, in the canonical consumption order.
    pub fn extract_common(
        &self,
        chain: &LayerChain,
        k_m2c: usize,
        u_blocks: &[Vec<Symbol>],
    ) -> (Vec<Symbol>, Vec<Symbol>) {
        let mut m1 = Vec::new();
        let mut m2c = Vec::new();
        for (b, u) in u_blocks.iter().enumerate() {
            let core = gather(u, &chain.core);
            m2c.extend_from_slice(&core[..k_m2c]);
            m1.extend_from_slice(&core[k_m2c..]);
            if self.plan.source_is_fresh(b) {
                m1.extend(gather(u, &chain.own_source));
                m1.extend(gather(u, &chain.cross_source));
            }
        }
        (m1, m2c)
    }

    /// Reads the confidential layer's streams back out of committed blocks.
    pub fn extract_v(&self, u_blocks: &[Vec<Symbol>]) -> (Vec<Symbol>, Vec<Symbol>) {
        let v = &self.plan.v;
        let mut m2p = Vec::new();
        let mut m2s = Vec::new();
        for (b, u) in u_blocks.iter().enumerate() {
            if b == 0 {
                m2p.extend(gather(u, &v.repeat));
            }
            m2p.extend(gather(u, &v.private));
            if b + 1 < u_blocks.len() {
                m2p.extend(gather(u, &v.chained));
            }
            m2s.extend(gather(u, &v.secret_fresh));
        }
        (m2p, m2s)
    }

    fn check_payload(&self, p: &FramePayload) -> Result<()> {
        let s = self.payload_sizes();
        let got = [p.m1_x1.len(), p.m1_u.len(), p.m2c.len(), p.m2p.len(), p.m2s.len(), p.seed.len()];
        let want = [s.m1_x1, s.m1_u, s.m2c, s.m2p, s.m2s, s.seed];
        if got != want {
            return Err(Error::Structure(format!(
                "payload stream lengths {got:?} do not match the plan's {want:?} \
                 (m1_x1, m1_u, m2c, m2p, m2s, seed)"
            )));
        }
        Ok(())
    }

    /// The per-frame public draws: frozen vectors and terminal specials.
    pub fn draw_public(&self, seed: u64, frame: u64) -> PublicSide {
        let lp = |layer: u64, chain: &LayerChain, q: usize| {
            let draw = |role: u64, len: usize| {
                let mut rng = derive_rng(seed, &[purpose::FROZEN, frame, layer, role]);
                draw_symbols(&mut rng, len, q)
            };
            LayerPublic {
                frozen: draw(ROLE_FROZEN, chain.frozen.len()),
                source: draw(ROLE_SOURCE, chain.own_source.len()),
                cross_source: draw(ROLE_CROSS_SOURCE, chain.cross_source.len()),
                target: draw(ROLE_TARGET, chain.target.len()),
                cross_target: draw(ROLE_CROSS_TARGET, chain.cross_target.len()),
            }
        };
        let frozen_v = {
            let mut rng = derive_rng(seed, &[purpose::FROZEN, frame, LAYER_V, ROLE_FROZEN]);
            draw_symbols(&mut rng, self.plan.v.frozen.len(), self.q_v)
        };
        PublicSide {
            layer1: lp(LAYER_X1, &self.plan.layer1, self.q_x1),
            layer2: lp(LAYER_U, &self.plan.layer2, self.q_u),
            frozen_v,
        }
    }

    /// Resolves both common layers' per-block pinned values. The first
    /// layer's values never depend on transmitter 2's streams.
    fn common_values(
        &self,
        payload: &FramePayload,
        public: &PublicSide,
    ) -> Result<(ChainValues, ChainValues)> {
        let plan = &self.plan;
        let mut m1_x1 = Cursor::new(&payload.m1_x1, "m1_x1");
        let mut m1_u = Cursor::new(&payload.m1_u, "m1_u");
        let mut m2c = Cursor::new(&payload.m2c, "m2c");
        let mut v1 = self.sources(&plan.layer1, &public.layer1, &mut m1_x1, None)?;
        let mut v2 =
            self.sources(&plan.layer2, &public.layer2, &mut m1_u, Some((&mut m2c, plan.u_m2c_core)))?;
        m1_x1.finish()?;
        m1_u.finish()?;
        m2c.finish()?;
        self.targets(&mut v1, &v2.cross, &public.layer1);
        self.targets(&mut v2, &v1.cross, &public.layer2);
        Ok((v1, v2))
    }

    fn sources(
        &self,
        chain: &LayerChain,
        pubs: &LayerPublic,
        m1: &mut Cursor,
        mut m2c: Option<(&mut Cursor, usize)>,
    ) -> Result<ChainValues> {
        let plan = &self.plan;
        let mut vals = ChainValues::default();
        for b in 0..plan.m {
            let k = m2c.as_ref().map_or(0, |(_, k)| *k);
            let mut core = Vec::with_capacity(chain.core.len());
            if let Some((mc, _)) = m2c.as_mut() {
                core.extend_from_slice(mc.take(k)?);
            }
            core.extend_from_slice(m1.take(chain.core.len() - k)?);
            vals.core.push(core);
            if plan.source_is_fresh(b) {
                vals.source.push(m1.take(chain.own_source.len())?.to_vec());
                vals.cross.push(m1.take(chain.cross_source.len())?.to_vec());
            } else {
                vals.source.push(pubs.source.clone());
                vals.cross.push(pubs.cross_source.clone());
            }
        }
        Ok(vals)
    }

    /// Fills the repeat roles: a block's targets carry the adjacent block's
    /// sources, its cross targets the adjacent block's other-layer crosses.
    fn targets(&self, vals: &mut ChainValues, other_cross: &[Vec<Symbol>], pubs: &LayerPublic) {
        let plan = &self.plan;
        for b in 0..plan.m {
            if plan.target_repeats(b) {
                let o = plan.repeat_origin(b);
                vals.target.push(vals.source[o].clone());
                vals.cross_target.push(other_cross[o].clone());
            } else {
                vals.target.push(pubs.target.clone());
                vals.cross_target.push(pubs.cross_target.clone());
            }
        }
    }

    /// Resolves the confidential layer's per-block values.
    fn v_values(&self, payload: &FramePayload) -> Result<VValues> {
        let plan = &self.plan;
        let v = &plan.v;
        let mut m2p = Cursor::new(&payload.m2p, "m2p");
        let mut m2s = Cursor::new(&payload.m2s, "m2s");
        let mut vals = VValues::default();
        for b in 0..plan.m {
            if b == 0 {
                vals.repeat.push(m2p.take(v.repeat.len())?.to_vec());
            } else {
                vals.repeat.push(vals.chained[b - 1].clone());
            }
            vals.private.push(m2p.take(v.private.len())?.to_vec());
            if b + 1 < plan.m {
                vals.chained.push(m2p.take(v.chained.len())?.to_vec());
            } else {
                vals.chained.push(payload.seed.clone());
            }
            vals.fresh.push(m2s.take(v.secret_fresh.len())?.to_vec());
        }
        m2p.finish()?;
        m2s.finish()?;
        Ok(vals)
    }

    fn encode_x1_blocks(
        &self,
        v1: &ChainValues,
        public: &PublicSide,
        seed: u64,
        frame: u64,
    ) -> Result<LayerBlocks> {
        let plan = &self.plan;
        let n = plan.n;
        let mut leaves = Vec::with_capacity(n * self.q_x1);
        for _ in 0..n {
            leaves.extend_from_slice(self.enc_x1.row(&[]));
        }
        let mut out = LayerBlocks { u: Vec::with_capacity(plan.m), x: Vec::with_capacity(plan.m) };
        for b in 0..plan.m {
            let fill = chain_fill(n, &plan.layer1, v1, &public.layer1.frozen, b);
            let mut rng = derive_rng(seed, &[purpose::SAMPLING, frame, b as u64, LAYER_X1]);
            let (u, x) = sc_encode_layer(self.q_x1, &leaves, &fill, &mut rng)?;
            out.u.push(u);
            out.x.push(x);
        }
        Ok(out)
    }

    /// The complete pin layout this payload/public/prefix assignment commits,
    /// per block and layer, with sampled positions left open. The encoder and
    /// the exact-leakage enumeration both walk this structure, so they cannot
    /// drift apart.
    pub(crate) fn frame_fills(
        &self,
        payload: &FramePayload,
        public: &PublicSide,
        w_syms: &[Symbol],
        fresh: &[Vec<Symbol>],
    ) -> Result<FrameFills> {
        self.check_payload(payload)?;
        let plan = &self.plan;
        let n = plan.n;
        if w_syms.len() != plan.prefix.w_reuse.len()
            || fresh.len() != plan.m
            || fresh.iter().any(|f| f.len() != plan.prefix.fresh.len())
        {
            return Err(Error::Structure("prefix draw lengths do not match the plan".into()));
        }
        let (v1, v2) = self.common_values(payload, public)?;
        let vv = self.v_values(payload)?;
        let mut fills = FrameFills::default();
        for b in 0..plan.m {
            fills.x1.push(chain_fill(n, &plan.layer1, &v1, &public.layer1.frozen, b));
            fills.u.push(chain_fill(n, &plan.layer2, &v2, &public.layer2.frozen, b));
            fills.v.push(v_fill(n, &plan.v, &vv, &public.frozen_v, b));
            fills.x2.push(prefix_fill(n, &plan.prefix, w_syms, &fresh[b]));
        }
        Ok(fills)
    }

    /// The four layers' design conditionals, in encoding order.
    pub(crate) fn enc_tables(&self) -> (&CondTable, &CondTable, &CondTable, &CondTable) {
        (&self.enc_x1, &self.enc_u, &self.enc_v, &self.enc_x2)
    }
}

/// Per-block, per-layer pin layouts of one frame.
#[derive(Debug, Clone, Default)]
pub(crate) struct FrameFills {
    pub x1: Vec<Vec<Fill>>,
    pub u: Vec<Vec<Fill>>,
    pub v: Vec<Vec<Fill>>,
    pub x2: Vec<Vec<Fill>>,
}

fn chain_fill(
    n: usize,
    chain: &LayerChain,
    vals: &ChainValues,
    frozen: &[Symbol],
    b: usize,
) -> Vec<Fill> {
    let mut fill = vec![Fill::Sample; n];
    pin_fill(&mut fill, &chain.core, &vals.core[b]);
    pin_fill(&mut fill, &chain.own_source, &vals.source[b]);
    pin_fill(&mut fill, &chain.cross_source, &vals.cross[b]);
    pin_fill(&mut fill, &chain.target, &vals.target[b]);
    pin_fill(&mut fill, &chain.cross_target, &vals.cross_target[b]);
    pin_fill(&mut fill, &chain.frozen, frozen);
    fill
}

fn v_fill(n: usize, v: &VChain, vals: &VValues, frozen: &[Symbol], b: usize) -> Vec<Fill> {
    let mut fill = vec![Fill::Sample; n];
    pin_fill(&mut fill, &v.secret_fresh, &vals.fresh[b]);
    pin_fill(&mut fill, &v.repeat, &vals.repeat[b]);
    pin_fill(&mut fill, &v.private, &vals.private[b]);
    pin_fill(&mut fill, &v.chained, &vals.chained[b]);
    pin_fill(&mut fill, &v.frozen, frozen);
    fill
}

fn prefix_fill(n: usize, prefix: &PrefixSets, w_syms: &[Symbol], fresh: &[Symbol]) -> Vec<Fill> {
    let mut fill = vec![Fill::Sample; n];
    pin_fill(&mut fill, &prefix.w_reuse, w_syms);
    pin_fill(&mut fill, &prefix.fresh, fresh);
    fill
}

#[derive(Debug, Default)]
struct ChainValues {
    core: Vec<Vec<Symbol>>,
    source: Vec<Vec<Symbol>>,
    cross: Vec<Vec<Symbol>>,
    target: Vec<Vec<Symbol>>,
    cross_target: Vec<Vec<Symbol>>,
}

#[derive(Debug, Default)]
struct VValues {
    fresh: Vec<Vec<Symbol>>,
    repeat: Vec<Vec<Symbol>>,
    private: Vec<Vec<Symbol>>,
    chained: Vec<Vec<Symbol>>,
}

/// A checked sequential reader over one message stream.
struct Cursor<'a> {
    data: &'a [Symbol],
    pos: usize,
    name: &'static str,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [Symbol], name: &'static str) -> Self {
        Cursor { data, pos: 0, name }
    }

    fn take(&mut self, k: usize) -> Result<&'a [Symbol]> {
        if self.pos + k > self.data.len() {
            return Err(Error::Structure(format!(
                "stream {} exhausted at {} of {} symbols",
                self.name,
                self.pos,
                self.data.len()
            )));
        }
        let s = &self.data[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Structure(format!(
                "stream {} has {} unconsumed symbols",
                self.name,
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn draw_symbols<R: Rng>(rng: &mut R, len: usize, q: usize) -> Vec<Symbol> {
    (0..len).map(|_| rng.gen_range(0..q) as Symbol).collect()
}

fn gather(u: &[Symbol], set: &IndexSet) -> Vec<Symbol> {
    set.as_slice().iter().map(|&j| u[j]).collect()
}

fn gather_blocks(blocks: &[Vec<Symbol>], set: &IndexSet) -> Vec<Vec<Symbol>> {
    blocks.iter().map(|u| gather(u, set)).collect()
}

fn pin_known(known: &mut [Option<Symbol>], set: &IndexSet, vals: &[Symbol]) {
    debug_assert_eq!(set.len(), vals.len());
    for (&j, &v) in set.as_slice().iter().zip(vals) {
        known[j] = Some(v);
    }
}

fn pin_fill(fill: &mut [Fill], set: &IndexSet, vals: &[Symbol]) {
    debug_assert_eq!(set.len(), vals.len());
    for (&j, &v) in set.as_slice().iter().zip(vals) {
        fill[j] = Fill::Pin(v);
    }
}

pub(crate) fn build_leaves<F: Fn(usize) -> Vec<usize>>(t: &CondTable, n: usize, key: F) -> Vec<f64> {
    let q = t.target_size;
    let mut l = Vec::with_capacity(n * q);
    for i in 0..n {
        l.extend_from_slice(t.row(&key(i)));
    }
    l
}

/// Structural checks: each layer's roles partition `[0, n)`, repeat sizes
/// match their sources, and the confidential repeat slot fits its chain.
fn validate_plan(plan: &ChainingPlan) -> Result<()> {
    let n = plan.n;
    plan.layer1.check_cover(n)?;
    plan.layer2.check_cover(n)?;
    if plan.layer1.target.len() != plan.layer1.own_source.len()
        || plan.layer2.target.len() != plan.layer2.own_source.len()
    {
        return Err(Error::Structure("repeat sets must match their source sizes".into()));
    }
    if plan.layer1.cross_target.len() != plan.layer2.cross_source.len()
        || plan.layer2.cross_target.len() != plan.layer1.cross_source.len()
    {
        return Err(Error::Structure(
            "cross-repeat sets must match the other layer's cross sources".into(),
        ));
    }
    let v = &plan.v;
    if v.repeat.len() != v.chained.len() {
        return Err(Error::Structure("the repeat slot must match the chained set size".into()));
    }
    let vu = v
        .secret_fresh
        .union(&v.repeat)
        .union(&v.private)
        .union(&v.chained)
        .union(&v.frozen)
        .union(&v.sampled);
    let vtotal = v.secret_fresh.len()
        + v.repeat.len()
        + v.private.len()
        + v.chained.len()
        + v.frozen.len()
        + v.sampled.len();
    if vu.len() != n || vtotal != n {
        return Err(Error::Structure(format!(
            "confidential roles must partition [{n}], covered {}",
            vu.len()
        )));
    }
    let pu = plan.prefix.w_reuse.union(&plan.prefix.fresh).union(&plan.prefix.sampled);
    let ptotal = plan.prefix.w_reuse.len() + plan.prefix.fresh.len() + plan.prefix.sampled.len();
    if pu.len() != n || ptotal != n {
        return Err(Error::Structure(format!(
            "prefix roles must partition [{n}], covered {}",
            pu.len()
        )));
    }
    Ok(())
}
