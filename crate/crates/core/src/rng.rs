//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a path of tokens hashed into
//! a 64-bit seed, so results never depend on execution order. The mixer is a
//! fixed SplitMix64-style finaliser, stable across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One component of a seed derivation path.
#[derive(Debug, Clone, Copy)]
pub enum Token<'a> {
    Label(&'a str),
    Int(u64),
    Real(f64),
}

impl From<u64> for Token<'_> {
    fn from(v: u64) -> Self {
        Token::Int(v)
    }
}

impl From<usize> for Token<'_> {
    fn from(v: usize) -> Self {
        Token::Int(v as u64)
    }
}

impl From<f64> for Token<'_> {
    fn from(v: f64) -> Self {
        Token::Real(v)
    }
}

impl<'a> From<&'a str> for Token<'a> {
    fn from(v: &'a str) -> Self {
        Token::Label(v)
    }
}

fn absorb(state: u64, word: u64) -> u64 {
    mix(state.wrapping_add(GOLDEN) ^ mix(word.wrapping_add(GOLDEN)))
}

/// Hashes `seed` together with a path of tokens into a child seed.
pub fn derive(seed: u64, path: &[Token<'_>]) -> u64 {
    let mut state = mix(seed ^ GOLDEN);
    for token in path {
        state = match *token {
            Token::Label(s) => {
                // tag labels so "a","b" and "ab" never collide
                let mut h = absorb(state, 0x4C41_4245_4C00 ^ s.len() as u64);
                for chunk in s.as_bytes().chunks(8) {
                    let mut buf = [0u8; 8];
                    buf[..chunk.len()].copy_from_slice(chunk);
                    h = absorb(h, u64::from_le_bytes(buf));
                }
                h
            }
            Token::Int(v) => absorb(absorb(state, 1), v),
            Token::Real(v) => absorb(absorb(state, 2), v.to_bits()),
        };
    }
    state
}

/// Convenience: a ChaCha8 generator seeded from a derived stream.
pub fn stream(seed: u64, path: &[Token<'_>]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, path))
}
