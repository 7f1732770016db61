//! AES-128 first-round byte operations and a single-block reference encryption.
//!
//! The first-round helpers are the values an attacker models: the output of the
//! `AddRoundKey` XOR and the output of the `SubBytes` table lookup. The full
//! encryption is only used to check a recovered key against known
//! plaintext/ciphertext pairs.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Sixteen octets: an AES state, plaintext, ciphertext or key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Block(pub [u8; 16]);

impl Block {
    pub const LEN: usize = 16;

    pub fn new(bytes: [u8; 16]) -> Self {
        Block(bytes)
    }

    /// Builds a block from exactly 16 bytes.
    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        <[u8; 16]>::try_from(bytes).ok().map(Block)
    }

    /// Parses 32 hexadecimal characters (either case).
    pub fn from_hex(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.len() != 32 || !s.is_ascii() {
            return None;
        }
        let mut out = [0u8; 16];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
        }
        Some(Block(out))
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl std::ops::Index<usize> for Block {
    type Output = u8;
    fn index(&self, i: usize) -> &u8 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Block {
    fn index_mut(&mut self, i: usize) -> &mut u8 {
        &mut self.0[i]
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block({})", self.to_hex())
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl From<[u8; 16]> for Block {
    fn from(bytes: [u8; 16]) -> Self {
        Block(bytes)
    }
}

/// The AES forward S-box (FIPS-197, Figure 7).
pub const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

const RCON: [u8; 10] = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36];

/// Which first-round byte is being modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntermediateTarget {
    /// `p XOR k`, the AddRoundKey result.
    XorOutput,
    /// `SBOX[p XOR k]`, the SubBytes result.
    SboxOutput,
}

#[inline]
pub fn add_round_key_byte(p: u8, k: u8) -> u8 {
    p ^ k
}

#[inline]
pub fn sub_bytes_byte(x: u8) -> u8 {
    SBOX[x as usize]
}

#[inline]
pub fn first_round_intermediate(p: u8, k: u8, target: IntermediateTarget) -> u8 {
    let x = add_round_key_byte(p, k);
    match target {
        IntermediateTarget::XorOutput => x,
        IntermediateTarget::SboxOutput => sub_bytes_byte(x),
    }
}

#[inline]
fn xtime(b: u8) -> u8 {
    (b << 1) ^ if b & 0x80 != 0 { 0x1b } else { 0x00 }
}

fn expand_key(key: &Block) -> [[u8; 16]; 11] {
    let mut words = [[0u8; 4]; 44];
    for (i, w) in words.iter_mut().take(4).enumerate() {
        w.copy_from_slice(&key.0[4 * i..4 * i + 4]);
    }
    for i in 4..44 {
        let mut temp = words[i - 1];
        if i % 4 == 0 {
            temp.rotate_left(1);
            for b in temp.iter_mut() {
                *b = sub_bytes_byte(*b);
            }
            temp[0] ^= RCON[i / 4 - 1];
        }
        for j in 0..4 {
            words[i][j] = words[i - 4][j] ^ temp[j];
        }
    }
    let mut round_keys = [[0u8; 16]; 11];
    for (r, rk) in round_keys.iter_mut().enumerate() {
        for c in 0..4 {
            rk[4 * c..4 * c + 4].copy_from_slice(&words[4 * r + c]);
        }
    }
    round_keys
}

fn add_round_key(state: &mut [u8; 16], rk: &[u8; 16]) {
    for (s, k) in state.iter_mut().zip(rk) {
        *s = add_round_key_byte(*s, *k);
    }
}

fn sub_bytes(state: &mut [u8; 16]) {
    for s in state.iter_mut() {
        *s = sub_bytes_byte(*s);
    }
}

// State is column-major: byte index = 4 * column + row.
fn shift_rows(state: &mut [u8; 16]) {
    let old = *state;
    for c in 0..4 {
        for r in 1..4 {
            state[4 * c + r] = old[4 * ((c + r) % 4) + r];
        }
    }
}

fn mix_columns(state: &mut [u8; 16]) {
    for col in state.chunks_exact_mut(4) {
        let [a0, a1, a2, a3] = [col[0], col[1], col[2], col[3]];
        let all = a0 ^ a1 ^ a2 ^ a3;
        col[0] ^= all ^ xtime(a0 ^ a1);
        col[1] ^= all ^ xtime(a1 ^ a2);
        col[2] ^= all ^ xtime(a2 ^ a3);
        col[3] ^= all ^ xtime(a3 ^ a0);
    }
}

/// Encrypts one block with AES-128 (ECB on a single block, ten rounds).
pub fn aes128_encrypt_block(plaintext: &Block, key: &Block) -> Block {
    let round_keys = expand_key(key);
    let mut state = plaintext.0;
    add_round_key(&mut state, &round_keys[0]);
    for rk in &round_keys[1..10] {
        sub_bytes(&mut state);
        shift_rows(&mut state);
        mix_columns(&mut state);
        add_round_key(&mut state, rk);
    }
    sub_bytes(&mut state);
    shift_rows(&mut state);
    add_round_key(&mut state, &round_keys[10]);
    Block(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_examples() {
        assert_eq!(add_round_key_byte(0x00, 0x00), 0x00);
        assert_eq!(add_round_key_byte(0xa7, 0xa7), 0x00);
        assert_eq!(add_round_key_byte(0x53, 0xca), 0x99);
    }

    #[test]
    fn sbox_examples() {
        assert_eq!(sub_bytes_byte(0x00), 0x63);
        assert_eq!(sub_bytes_byte(0x53), 0xed);
        assert_eq!(sub_bytes_byte(0xff), 0x16);
    }

    #[test]
    fn sbox_is_permutation() {
        let mut seen = [false; 256];
        for &v in SBOX.iter() {
            assert!(!seen[v as usize]);
            seen[v as usize] = true;
        }
    }

    // Computes the S-box from its algebraic definition (GF(2^8) inverse
    // followed by the affine map) to check the embedded table.
    #[test]
    fn sbox_matches_algebraic_definition() {
        fn gmul(mut a: u8, mut b: u8) -> u8 {
            let mut p = 0;
            while b != 0 {
                if b & 1 != 0 {
                    p ^= a;
                }
                a = xtime(a);
                b >>= 1;
            }
            p
        }
        for x in 0..=255u8 {
            let inv = if x == 0 {
                0
            } else {
                (1..=255u8).find(|&y| gmul(x, y) == 1).unwrap()
            };
            let s = inv
                ^ inv.rotate_left(1)
                ^ inv.rotate_left(2)
                ^ inv.rotate_left(3)
                ^ inv.rotate_left(4)
                ^ 0x63;
            assert_eq!(SBOX[x as usize], s, "x = {x:#04x}");
        }
    }

    #[test]
    fn first_round_examples() {
        use IntermediateTarget::*;
        assert_eq!(first_round_intermediate(0x00, 0x00, XorOutput), 0x00);
        assert_eq!(first_round_intermediate(0x00, 0x00, SboxOutput), 0x63);
        assert_eq!(first_round_intermediate(0x3a, 0xc5, XorOutput), 0xff);
    }

    #[test]
    fn fips197_appendix_c1() {
        let key = Block::from_hex("000102030405060708090a0b0c0d0e0f").unwrap();
        let pt = Block::from_hex("00112233445566778899aabbccddeeff").unwrap();
        let ct = aes128_encrypt_block(&pt, &key);
        assert_eq!(ct.to_hex(), "69c4e0d86a7b0430d8cdb78070b4c55a");
    }

    #[test]
    fn fips197_appendix_b() {
        let key = Block::from_hex("2b7e151628aed2a6abf7158809cf4f3c").unwrap();
        let pt = Block::from_hex("3243f6a8885a308d313198a2e0370734").unwrap();
        assert_eq!(
            aes128_encrypt_block(&pt, &key).to_hex(),
            "3925841d02dc09fbdc118597196a0b32"
        );
    }

    #[test]
    fn hex_parsing() {
        assert!(Block::from_hex("00").is_none());
        assert!(Block::from_hex("zz0102030405060708090a0b0c0d0e0f").is_none());
        let b = Block::from_hex("000102030405060708090A0B0C0D0E0F").unwrap();
        assert_eq!(b[15], 0x0f);
        assert_eq!(b.to_hex(), "000102030405060708090a0b0c0d0e0f");
    }
}
