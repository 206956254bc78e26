//! Seed derivation for per-record RNG streams.
//!
//! Every randomized stage seeds its own ChaCha stream from
//! `derive_seed(global, stream, item)` so records can be produced in any
//! order (or in parallel) without changing the output bytes.

pub(crate) const STREAM_ASSEMBLE: u64 = 1;
pub(crate) const STREAM_POOL_SHUFFLE: u64 = 2;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn derive_seed(global: u64, stream: u64, item: u64) -> u64 {
    splitmix64(splitmix64(global ^ stream.wrapping_mul(GOLDEN)) ^ item)
}
