//! Small shared helpers: seeding, digests, stable JSON output.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, stream)`, e.g. one per entity or worker.
pub fn seeded_rng<R: SeedableRng>(seed: u64, stream: u64) -> R {
    R::seed_from_u64(mix64(mix64(seed) ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03)))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with object keys sorted, newline-terminated.
pub fn to_sorted_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // serde_json::Map is a BTreeMap without the preserve_order feature.
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_sorted_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = to_sorted_json(value).map_err(io::Error::other)?;
    let mut file = File::create(path)?;
    file.write_all(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn streams_differ() {
        let mut a: ChaCha8Rng = seeded_rng(7, 0);
        let mut b: ChaCha8Rng = seeded_rng(7, 1);
        let mut a2: ChaCha8Rng = seeded_rng(7, 0);
        let x: u64 = a.random();
        assert_ne!(x, b.random::<u64>());
        assert_eq!(x, a2.random::<u64>());
    }

    #[test]
    fn sorted_keys() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let text = to_sorted_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
    }
}
