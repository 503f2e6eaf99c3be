//! Static canonical Huffman code over zero-run symbols.
//!
//! Codes are assigned canonically: symbols sorted by (length, symbol index),
//! consecutive code values within a length, left-shifted between lengths.
//! The table is part of the packet format; changing it bumps
//! [`TABLE_VERSION`].

use crate::bits::{push_bits, BitCursor, Bits};
use crate::error::{Error, Result};

pub const TABLE_VERSION: u8 = 1;

/// Largest run carried by a dedicated symbol; longer runs use [`Symbol::Esc`].
pub const MAX_DIRECT_RUN: u32 = 63;
pub const ESC_LITERAL_BITS: u32 = 12;
/// An escape literal of this value means "4095 zeros, no one follows".
pub const ESC_CONTINUE: u32 = (1 << ESC_LITERAL_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    /// `n` zeros followed by a one.
    Run(u8),
    /// 12-bit literal follows.
    Esc,
    /// End of map; remaining cells are zero.
    Eom,
}

impl Symbol {
    fn index(self) -> usize {
        match self {
            Symbol::Run(n) => n as usize,
            Symbol::Esc => 64,
            Symbol::Eom => 65,
        }
    }

    fn from_index(i: usize) -> Symbol {
        match i {
            0..=63 => Symbol::Run(i as u8),
            64 => Symbol::Esc,
            _ => Symbol::Eom,
        }
    }
}

const N_SYMBOLS: usize = 66;
const MAX_LEN: usize = 10;

/// Code length per symbol index (runs 0..=63, ESC, EOM).
pub const CODE_LENGTHS: [u8; N_SYMBOLS] = {
    let mut t = [0u8; N_SYMBOLS];
    let mut i = 0;
    while i < 64 {
        t[i] = match i {
            0 => 4,
            1 => 5,
            2..=3 => 6,
            4..=7 => 7,
            8..=15 => 8,
            16..=31 => 9,
            _ => 10,
        };
        i += 1;
    }
    t[64] = 2;
    t[65] = 1;
    t
};

struct Table {
    codes: [u16; N_SYMBOLS],
    /// Per length: first canonical code, count, offset into `sorted`.
    first: [u32; MAX_LEN + 1],
    count: [u32; MAX_LEN + 1],
    offset: [usize; MAX_LEN + 1],
    sorted: [u8; N_SYMBOLS],
}

const TABLE: Table = build();

const fn build() -> Table {
    let mut count = [0u32; MAX_LEN + 1];
    let mut i = 0;
    while i < N_SYMBOLS {
        count[CODE_LENGTHS[i] as usize] += 1;
        i += 1;
    }
    let mut first = [0u32; MAX_LEN + 1];
    let mut offset = [0usize; MAX_LEN + 1];
    let mut code = 0u32;
    let mut off = 0usize;
    let mut len = 1;
    while len <= MAX_LEN {
        code = (code + count[len - 1]) << 1;
        first[len] = code;
        offset[len] = off;
        off += count[len] as usize;
        len += 1;
    }
    let mut sorted = [0u8; N_SYMBOLS];
    let mut codes = [0u16; N_SYMBOLS];
    let mut next = [0u32; MAX_LEN + 1];
    let mut s = 0;
    while s < N_SYMBOLS {
        let l = CODE_LENGTHS[s] as usize;
        sorted[offset[l] + next[l] as usize] = s as u8;
        codes[s] = (first[l] + next[l]) as u16;
        next[l] += 1;
        s += 1;
    }
    Table { codes, first, count, offset, sorted }
}

pub fn code_len(sym: Symbol) -> u32 {
    CODE_LENGTHS[sym.index()] as u32
}

/// Canonical code value (right-aligned) and length.
pub fn code(sym: Symbol) -> (u32, u32) {
    (TABLE.codes[sym.index()] as u32, code_len(sym))
}

pub fn write_symbol(out: &mut Bits, sym: Symbol) {
    let (c, l) = code(sym);
    push_bits(out, c as u64, l);
}

pub fn read_symbol(cur: &mut BitCursor<'_>) -> Result<Symbol> {
    let mut code = 0u32;
    for len in 1..=MAX_LEN {
        code = (code << 1) | cur.read_bit()? as u32;
        let rel = code.wrapping_sub(TABLE.first[len]);
        if code >= TABLE.first[len] && rel < TABLE.count[len] {
            return Ok(Symbol::from_index(TABLE.sorted[TABLE.offset[len] + rel as usize] as usize));
        }
    }
    Err(Error::InvalidArgument(format!("invalid Huffman code word ending at bit {}", cur.position())))
}
