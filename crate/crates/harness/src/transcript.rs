//! Binary transcript files.
//!
//! Layout, integers little-endian:
//!
//! ```text
//! magic "PSTX" | version u16 | N u32 | k u32 | SHA-256 of the set family (32 bytes)
//! per block:  bits a | bits b | bits t | bits x | syms y | syms z | 3 × f64 sampled entropy
//! public:     bits Ψ^U_1 | k × bits Φ^U_i
//! seed:       bits Ψ^{V|U}_k | k × bits Φ^{V|U}_i
//! messages:   k × bits O_i | k × bits S_i | k × bits M_i | k × bits R_i
//! bits Ψ^{X|V}_1
//! ```
//!
//! `bits` is a u32 bit count followed by the bits packed LSB-first into
//! bytes; `syms` is a u32 count followed by u32 symbols. The encoder's
//! carried state is not stored.

use polarsec_core::chain::BlockRecord;
use polarsec_core::{ChainState, IndexSetFamily, PublicBundle, SeedBundle, SessionMessages, Transcript};
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

pub const MAGIC: &[u8; 4] = b"PSTX";
pub const VERSION: u16 = 1;

/// SHA-256 over the block length, β, δ_N and every set of the family.
pub fn family_hash(f: &IndexSetFamily) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((f.n_len as u64).to_le_bytes());
    h.update(f.beta.to_bits().to_le_bytes());
    h.update(f.delta.to_bits().to_le_bytes());
    for set in [
        &f.h_u, &f.v_u, &f.h_u_y, &f.h_u_z, &f.v_v_u, &f.v_v_uz, &f.h_v_uy, &f.v_v_uy, &f.m_uvz, &f.v_x_v,
        &f.v_x_vz, &f.i_uy, &f.i_uz, &f.a_uyz, &f.b_v_uy, &f.psi_vu, &f.phi_vu, &f.phi_u,
    ] {
        h.update((set.len() as u32).to_le_bytes());
        for &p in set {
            h.update((p as u32).to_le_bytes());
        }
    }
    h.finalize().into()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend((v as u32).to_le_bytes());
    }

    fn bits(&mut self, bits: &[u8]) {
        self.u32(bits.len());
        let mut bytes = vec![0u8; bits.len().div_ceil(8)];
        for (i, &b) in bits.iter().enumerate() {
            bytes[i / 8] |= (b & 1) << (i % 8);
        }
        self.0.extend(bytes);
    }

    fn syms(&mut self, s: &[u32]) {
        self.u32(s.len());
        for &v in s {
            self.0.extend(v.to_le_bytes());
        }
    }

    fn many(&mut self, v: &[Vec<u8>]) {
        for b in v {
            self.bits(b);
        }
    }
}

pub fn encode(t: &Transcript, family: &IndexSetFamily) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend(MAGIC);
    w.0.extend(VERSION.to_le_bytes());
    w.u32(t.n_len);
    w.u32(t.k);
    w.0.extend(family_hash(family));
    for b in &t.blocks {
        for bits in [&b.a, &b.b, &b.t, &b.x] {
            w.bits(bits);
        }
        w.syms(&b.y);
        w.syms(&b.z);
        for h in b.sampled_entropy {
            w.0.extend(h.to_bits().to_le_bytes());
        }
    }
    w.bits(&t.public.psi_u1);
    w.many(&t.public.phi_u);
    w.bits(&t.seed.psi_vu_k);
    w.many(&t.seed.phi_vu);
    for m in [&t.messages.o, &t.messages.s, &t.messages.m, &t.messages.r] {
        w.many(m);
    }
    w.bits(&t.psi_xv1);
    w.0
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Transcript(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HarnessError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| err("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, HarnessError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn bits(&mut self, max: usize) -> Result<Vec<u8>, HarnessError> {
        let len = self.u32()?;
        if len > max {
            return Err(err(format!("bit field of length {len} exceeds the block length {max}")));
        }
        let bytes = self.take(len.div_ceil(8))?;
        if len % 8 != 0 && bytes[len / 8] >> (len % 8) != 0 {
            return Err(err("nonzero padding bits"));
        }
        Ok((0..len).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect())
    }

    fn syms(&mut self, max: usize) -> Result<Vec<u32>, HarnessError> {
        let len = self.u32()?;
        if len > max {
            return Err(err(format!("symbol field of length {len} exceeds the block length {max}")));
        }
        (0..len).map(|_| Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))).collect()
    }

    fn many(&mut self, k: usize, max: usize) -> Result<Vec<Vec<u8>>, HarnessError> {
        (0..k).map(|_| self.bits(max)).collect()
    }
}

/// Parses a transcript. With `family` given, the stored family hash must
/// match it.
pub fn decode(bytes: &[u8], family: Option<&IndexSetFamily>) -> Result<(Transcript, [u8; 32]), HarnessError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(err("not a transcript file (bad magic)"));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(err(format!("unsupported version {version}")));
    }
    let n = r.u32()?;
    let k = r.u32()?;
    if n < 2 || !n.is_power_of_two() || k == 0 {
        return Err(err(format!("invalid header N = {n}, k = {k}")));
    }
    let hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    if let Some(f) = family {
        if family_hash(f) != hash || f.n_len != n {
            return Err(err("transcript was written for a different set family"));
        }
    }
    let mut blocks = Vec::with_capacity(k.min(1 << 16));
    for _ in 0..k {
        let (a, b, t, x) = (r.bits(n)?, r.bits(n)?, r.bits(n)?, r.bits(n)?);
        let (y, z) = (r.syms(n)?, r.syms(n)?);
        let mut sampled_entropy = [0.0; 3];
        for h in sampled_entropy.iter_mut() {
            *h = f64::from_bits(u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
        }
        blocks.push(BlockRecord { a, u: Vec::new(), b, v: Vec::new(), t, x, y, z, sampled_entropy });
    }
    for blk in blocks.iter_mut() {
        blk.u = polarsec_core::polar::transform(&blk.a).map_err(|e| err(e.to_string()))?;
        blk.v = polarsec_core::polar::transform(&blk.b).map_err(|e| err(e.to_string()))?;
    }
    let public = PublicBundle { psi_u1: r.bits(n)?, phi_u: r.many(k, n)? };
    let seed = SeedBundle { psi_vu_k: r.bits(n)?, phi_vu: r.many(k, n)? };
    let messages = SessionMessages { o: r.many(k, n)?, s: r.many(k, n)?, m: r.many(k, n)?, r: r.many(k, n)? };
    let psi_xv1 = r.bits(n)?;
    if r.pos != bytes.len() {
        return Err(err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let t = Transcript { n_len: n, k, blocks, public, seed, messages, psi_xv1, state: ChainState::default() };
    Ok((t, hash))
}

/// Equality of everything the file format stores.
pub fn same_content(a: &Transcript, b: &Transcript) -> bool {
    a.n_len == b.n_len
        && a.k == b.k
        && a.blocks == b.blocks
        && a.public == b.public
        && a.seed == b.seed
        && a.messages == b.messages
        && a.psi_xv1 == b.psi_xv1
}

#[cfg(test)]
mod tests {
    use super::*;
    use polarsec_core::sets::build_sets;
    use polarsec_core::{BroadcastChannel, ChainConfig, JointSource, Method, ProfileSet};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> (Transcript, IndexSetFamily) {
        let src = JointSource::bsc_example(0.05, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ps = ProfileSet::estimate(&src, 8, Method::Exact, 0, &mut rng).unwrap();
        let fam = build_sets(&ps, 0.25).unwrap();
        let cfg = ChainConfig::new(src.clone(), fam.clone(), 3).unwrap();
        let msgs = SessionMessages::random(&cfg, &mut rng);
        let mut t = cfg.encode_session(&msgs, &mut rng).unwrap();
        cfg.transmit(&mut t, &BroadcastChannel::from_source(&src).unwrap(), &mut rng).unwrap();
        (t, fam)
    }

    #[test]
    fn round_trip() {
        let (t, fam) = sample();
        let bytes = encode(&t, &fam);
        let (back, hash) = decode(&bytes, Some(&fam)).unwrap();
        assert_eq!(hash, family_hash(&fam));
        assert!(same_content(&t, &back));
        assert_eq!(encode(&back, &fam), bytes);
    }

    #[test]
    fn damaged_files_are_rejected() {
        let (t, fam) = sample();
        let bytes = encode(&t, &fam);
        assert!(decode(&bytes[..bytes.len() - 1], None).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra, None).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode(&magic, None).is_err());
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(decode(&version, None).is_err());
        let mut other = fam.clone();
        other.delta *= 0.5;
        assert!(decode(&bytes, Some(&other)).is_err());
        assert!(decode(&bytes, None).is_ok());
    }
}
