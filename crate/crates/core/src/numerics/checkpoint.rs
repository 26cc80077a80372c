//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size      field
//! 0       8         magic  b"CLNETPRM"
//! 8       4         version (u32) = 2
//! 12      1         hidden activation code (0 = tanh, 1 = linear)
//! 13      1         skip flag (0 = none, 1 = trailing skip gain)
//! 14      4         number of layer widths L (u32)
//! 18      4 * L     layer widths (u32 each)
//! ..      8         parameter count N (u64), including the skip gain
//! ..      8 * N     parameters, f64 little-endian, layer-major, skip gain last
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, NetParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CLNETPRM";
pub const CHECKPOINT_VERSION: u32 = 2;

pub fn encode_params(net: &NetParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * net.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(net.activation().code());
    out.push(u8::from(net.has_skip()));
    out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
    for &s in net.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(net.len() as u64).to_le_bytes());
    for v in net.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_params(bytes: &[u8]) -> Result<NetParams> {
    let mut cur = bytes;
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = cur.split_at(n);
        cur = tail;
        Ok(head)
    };
    if take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic header".into()));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let activation = Activation::from_code(take(1)?[0])
        .ok_or_else(|| Error::Checkpoint("unknown activation code".into()))?;
    let skip = match take(1)?[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Checkpoint(format!("unknown skip flag {other}"))),
    };
    let n_sizes = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
    }
    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    if !cur.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    NetParams::from_values_with_skip(&sizes, activation, skip, values)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn write_params(path: &Path, net: &NetParams) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_params(net))?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<NetParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_params(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomSource;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_is_exact(seed in any::<u64>(), hidden in 1usize..6, skip in any::<bool>()) {
            let mut rng = RandomSource::new(seed, 0);
            let mut net = NetParams::init(&[3, hidden, 2], Activation::Tanh, 1.0, &mut rng).unwrap();
            if skip {
                net = net.with_skip(rng.normal()).unwrap();
            }
            let back = decode_params(&encode_params(&net)).unwrap();
            prop_assert_eq!(back, net);
        }
    }

    #[test]
    fn header_layout() {
        let net = NetParams::zeros(&[2, 1], Activation::Linear).unwrap();
        let bytes = encode_params(&net);
        assert_eq!(&bytes[..8], b"CLNETPRM");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(bytes[12], 1);
        assert_eq!(bytes[13], 0);
        assert_eq!(bytes.len(), 8 + 4 + 1 + 1 + 4 + 8 + 8 + 3 * 8);
    }

    #[test]
    fn corrupt_files_rejected() {
        let net = NetParams::zeros(&[2, 1], Activation::Linear).unwrap();
        let mut bytes = encode_params(&net);
        assert!(decode_params(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(decode_params(&bytes).is_err());
    }
}
