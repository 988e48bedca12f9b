//! A complete record of one encoded frame: messages, u-domain and x-domain
//! blocks, public values, side transmissions, and channel outputs. Enough to
//! replay a decode offline, audit every chained-position equality, or feed a
//! leakage estimator, without the codec that produced it.

use crate::alphabet::Symbol;
use crate::construction::ChainingPlan;
use crate::sets::IndexSet;
use crate::{Error, Result};

use super::frame::{
    EncodedFrame, FrameCodec, FramePayload, LayerBlocks, LayerPublic, PublicSide, SideInfo,
};

/// Version magic for the binary record format.
const MAGIC: &[u8; 8] = b"CICCFT01";

/// Everything one frame did, in one serializable record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameTranscript {
    /// Hash of the instance the codec was built from.
    pub instance_hash: String,
    /// Structural digest of the chaining plan in force.
    pub plan_digest: u64,
    /// Manifest seed the frame's randomness paths hang under.
    pub seed: u64,
    /// Frame index within the experiment.
    pub frame: u64,
    pub m: usize,
    pub n: usize,
    pub payload: FramePayload,
    pub encoded: EncodedFrame,
    pub y1: Vec<Vec<Symbol>>,
    pub y2: Vec<Vec<Symbol>>,
}

impl FrameTranscript {
    /// Bundles the outputs of one encode + transmit pass.
    pub fn capture(
        codec: &FrameCodec,
        payload: FramePayload,
        encoded: EncodedFrame,
        y1: Vec<Vec<Symbol>>,
        y2: Vec<Vec<Symbol>>,
        seed: u64,
        frame: u64,
    ) -> Self {
        FrameTranscript {
            instance_hash: codec.instance_hash().to_string(),
            plan_digest: codec.plan().digest(),
            seed,
            frame,
            m: codec.plan().m,
            n: codec.plan().n,
            payload,
            encoded,
            y1,
            y2,
        }
    }

    /// Re-extracts every repeated position and checks it against its origin.
    ///
    /// This is pure bookkeeping on the recorded u-domain blocks: chained
    /// targets must equal the previous (or next, for backward plans) block's
    /// sources, cross repeats must equal the other layer's cross sources,
    /// the confidential repeat slot must re-send the prior chained values,
    /// the terminal blocks must hold the public values, and the last block's
    /// chained positions must hold the seed.
    pub fn chaining_consistent(&self, plan: &ChainingPlan) -> Result<()> {
        if plan.digest() != self.plan_digest {
            return Err(Error::Structure(format!(
                "plan digest {:016x} does not match the recorded {:016x}",
                plan.digest(),
                self.plan_digest
            )));
        }
        let enc = &self.encoded;
        let layers: [(&str, &LayerBlocks, &crate::construction::LayerChain, &LayerPublic); 2] = [
            ("first common layer", &enc.x1, &plan.layer1, &enc.public.layer1),
            ("second common layer", &enc.u, &plan.layer2, &enc.public.layer2),
        ];
        for (name, blocks, chain, public) in layers {
            for b in 0..plan.m {
                if plan.target_repeats(b) {
                    let origin = plan.repeat_origin(b);
                    expect_eq(
                        &pick(&blocks.u[b], &chain.target),
                        &pick(&blocks.u[origin], &chain.own_source),
                        &format!("{name}: block {b} targets vs block {origin} sources"),
                    )?;
                } else {
                    expect_eq(
                        &pick(&blocks.u[b], &chain.target),
                        &public.target,
                        &format!("{name}: terminal block {b} targets vs public values"),
                    )?;
                }
                if !plan.source_is_fresh(b) {
                    expect_eq(
                        &pick(&blocks.u[b], &chain.own_source),
                        &public.source,
                        &format!("{name}: terminal block {b} sources vs public values"),
                    )?;
                }
            }
        }
        // Cross wiring: layer 1 repeats layer 2's overflow and vice versa.
        let pairs: [(&str, &LayerBlocks, &IndexSet, &LayerBlocks, &IndexSet, &LayerPublic); 2] = [
            (
                "cross into first layer",
                &enc.x1,
                &plan.layer1.cross_target,
                &enc.u,
                &plan.layer2.cross_source,
                &enc.public.layer1,
            ),
            (
                "cross into second layer",
                &enc.u,
                &plan.layer2.cross_target,
                &enc.x1,
                &plan.layer1.cross_source,
                &enc.public.layer2,
            ),
        ];
        for (name, tgt_blocks, tgt_set, src_blocks, src_set, public) in pairs {
            if tgt_set.is_empty() {
                continue;
            }
            for b in 0..plan.m {
                if plan.target_repeats(b) {
                    let origin = plan.repeat_origin(b);
                    expect_eq(
                        &pick(&tgt_blocks.u[b], tgt_set),
                        &pick(&src_blocks.u[origin], src_set),
                        &format!("{name}: block {b} vs block {origin}"),
                    )?;
                } else {
                    expect_eq(
                        &pick(&tgt_blocks.u[b], tgt_set),
                        &public.cross_target,
                        &format!("{name}: terminal block {b} vs public values"),
                    )?;
                }
            }
        }
        // Confidential layer: repeat slot carries the previous block's
        // chained values; the last block's chained positions hold the seed.
        for b in 0..plan.m {
            if b == 0 {
                continue;
            }
            expect_eq(
                &pick(&enc.v.u[b], &plan.v.repeat),
                &pick(&enc.v.u[b - 1], &plan.v.chained),
                &format!("confidential layer: block {b} repeat slot vs block {} chain", b - 1),
            )?;
        }
        expect_eq(
            &pick(&enc.v.u[plan.m - 1], &plan.v.chained),
            &self.payload.seed,
            "confidential layer: final block chain vs seed",
        )?;
        // Prefix layer: reused randomness identical in every block.
        let w0 = pick(&enc.x2.u[0], &plan.prefix.w_reuse);
        for b in 1..plan.m {
            expect_eq(
                &pick(&enc.x2.u[b], &plan.prefix.w_reuse),
                &w0,
                &format!("prefix layer: block {b} reused randomness vs block 0"),
            )?;
        }
        Ok(())
    }

    /// Serializes to the versioned binary record format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_bytes(&mut buf, self.instance_hash.as_bytes());
        put_u64(&mut buf, self.plan_digest);
        put_u64(&mut buf, self.seed);
        put_u64(&mut buf, self.frame);
        put_u32(&mut buf, self.m as u32);
        put_u32(&mut buf, self.n as u32);
        for stream in [
            &self.payload.m1_x1,
            &self.payload.m1_u,
            &self.payload.m2c,
            &self.payload.m2p,
            &self.payload.m2s,
            &self.payload.seed,
        ] {
            put_syms(&mut buf, stream);
        }
        for public in [&self.encoded.public.layer1, &self.encoded.public.layer2] {
            for vals in [
                &public.frozen,
                &public.source,
                &public.cross_source,
                &public.target,
                &public.cross_target,
            ] {
                put_syms(&mut buf, vals);
            }
        }
        put_syms(&mut buf, &self.encoded.public.frozen_v);
        for blocks in [
            &self.encoded.side.rx1_x1,
            &self.encoded.side.rx1_u,
            &self.encoded.side.rx2_x1,
            &self.encoded.side.rx2_u,
            &self.encoded.side.rx2_v,
        ] {
            put_block_list(&mut buf, blocks);
        }
        for layer in [&self.encoded.x1, &self.encoded.u, &self.encoded.v, &self.encoded.x2] {
            put_block_list(&mut buf, &layer.u);
            put_block_list(&mut buf, &layer.x);
        }
        put_block_list(&mut buf, &self.y1);
        put_block_list(&mut buf, &self.y2);
        buf
    }

    /// Parses a record produced by [`FrameTranscript::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(8)?;
        if magic != MAGIC {
            return Err(Error::Structure(format!(
                "frame record magic {:?} is not {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(MAGIC)
            )));
        }
        let hash_bytes = r.take_bytes()?;
        let instance_hash = String::from_utf8(hash_bytes.to_vec())
            .map_err(|_| Error::Structure("instance hash is not valid text".into()))?;
        let plan_digest = r.take_u64()?;
        let seed = r.take_u64()?;
        let frame = r.take_u64()?;
        let m = r.take_u32()? as usize;
        let n = r.take_u32()? as usize;
        let payload = FramePayload {
            m1_x1: r.take_syms()?,
            m1_u: r.take_syms()?,
            m2c: r.take_syms()?,
            m2p: r.take_syms()?,
            m2s: r.take_syms()?,
            seed: r.take_syms()?,
        };
        let mut publics = Vec::with_capacity(2);
        for _ in 0..2 {
            publics.push(LayerPublic {
                frozen: r.take_syms()?,
                source: r.take_syms()?,
                cross_source: r.take_syms()?,
                target: r.take_syms()?,
                cross_target: r.take_syms()?,
            });
        }
        let layer2_public = publics.pop().expect("two publics pushed");
        let layer1_public = publics.pop().expect("two publics pushed");
        let public = PublicSide {
            layer1: layer1_public,
            layer2: layer2_public,
            frozen_v: r.take_syms()?,
        };
        let side = SideInfo {
            rx1_x1: r.take_block_list()?,
            rx1_u: r.take_block_list()?,
            rx2_x1: r.take_block_list()?,
            rx2_u: r.take_block_list()?,
            rx2_v: r.take_block_list()?,
        };
        let mut layers = Vec::with_capacity(4);
        for _ in 0..4 {
            layers.push(LayerBlocks { u: r.take_block_list()?, x: r.take_block_list()? });
        }
        let x2 = layers.pop().expect("four layers pushed");
        let v = layers.pop().expect("four layers pushed");
        let u = layers.pop().expect("four layers pushed");
        let x1 = layers.pop().expect("four layers pushed");
        let y1 = r.take_block_list()?;
        let y2 = r.take_block_list()?;
        if r.pos != bytes.len() {
            return Err(Error::Structure(format!(
                "frame record has {} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(FrameTranscript {
            instance_hash,
            plan_digest,
            seed,
            frame,
            m,
            n,
            payload,
            encoded: EncodedFrame { x1, u, v, x2, public, side },
            y1,
            y2,
        })
    }
}

fn pick(block: &[Symbol], set: &IndexSet) -> Vec<Symbol> {
    set.iter().map(|i| block[i]).collect()
}

fn expect_eq(got: &[Symbol], want: &[Symbol], what: &str) -> Result<()> {
    if got != want {
        return Err(Error::Structure(format!("{what}: {got:?} != {want:?}")));
    }
    Ok(())
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(buf: &mut Vec<u8>, b: &[u8]) {
    put_u32(buf, b.len() as u32);
    buf.extend_from_slice(b);
}

fn put_syms(buf: &mut Vec<u8>, syms: &[Symbol]) {
    put_u32(buf, syms.len() as u32);
    for &s in syms {
        buf.extend_from_slice(&s.to_le_bytes());
    }
}

fn put_block_list(buf: &mut Vec<u8>, blocks: &[Vec<Symbol>]) {
    put_u32(buf, blocks.len() as u32);
    for b in blocks {
        put_syms(buf, b);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(
            || Error::Structure(format!("frame record truncated at byte {}", self.pos)),
        )?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn take_u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes taken")))
    }

    fn take_u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes taken")))
    }

    fn take_bytes(&mut self) -> Result<&'a [u8]> {
        let len = self.take_u32()? as usize;
        self.take(len)
    }

    fn take_syms(&mut self) -> Result<Vec<Symbol>> {
        let len = self.take_u32()? as usize;
        let raw = self.take(len * 2)?;
        Ok(raw.chunks_exact(2).map(|c| Symbol::from_le_bytes([c[0], c[1]])).collect())
    }

    fn take_block_list(&mut self) -> Result<Vec<Vec<Symbol>>> {
        let count = self.take_u32()? as usize;
        (0..count).map(|_| self.take_syms()).collect()
    }
}

/// Replays a recorded frame through a codec's decoders.
impl FrameTranscript {
    /// Decodes both receivers from the recorded observations and publics.
    pub fn replay(
        &self,
        codec: &FrameCodec,
    ) -> Result<(super::frame::Rx1Result, super::frame::Rx2Result)> {
        if codec.plan().digest() != self.plan_digest {
            return Err(Error::Structure(
                "replay codec was built from a different plan".into(),
            ));
        }
        if codec.instance_hash() != self.instance_hash {
            return Err(Error::Structure(
                "replay codec was built from a different instance".into(),
            ));
        }
        let r1 = codec.decode_rx1(&self.y1, &self.encoded.public, &self.encoded.side)?;
        let r2 = codec.decode_rx2(
            &self.y2,
            &self.encoded.public,
            &self.encoded.side,
            &self.payload.seed,
        )?;
        Ok((r1, r2))
    }
}
