use std::collections::HashMap;
use std::fmt;

use super::{Group, GroupError};

/// Default decodable plaintext bound, `2^20`.
pub const DEFAULT_MAX_MESSAGE: u64 = 1 << 20;

/// Largest baby-step table built automatically.
const MAX_BABY_STEPS: u64 = 1 << 16;

/// Baby-step giant-step table decoding `m * B` for `|m| <= max_message`.
///
/// The table stores `i * B` for `i` in `[0, S)` keyed by the canonical encoding
/// folded to 16 bytes. Lookups subtract multiples of `S * B` in the order
/// `0, -1, +1, -2, +2, ...` so small magnitudes of either sign decode first.
pub struct DlogTable<G: Group> {
    max_message: u64,
    baby_steps: u64,
    table: HashMap<u128, u32>,
    giant: G::Point,
}

impl<G: Group> fmt::Debug for DlogTable<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DlogTable")
            .field("group", &G::NAME)
            .field("max_message", &self.max_message)
            .field("baby_steps", &self.baby_steps)
            .finish()
    }
}

fn key<G: Group>(p: &G::Point) -> u128 {
    // Fold the whole encoding: some encodings keep the sign bit of `y` in the
    // last byte, so a prefix alone would collide for `P` and `-P`.
    let bytes = G::encode_point(p);
    let mut k = [0u8; 16];
    for (i, b) in bytes.iter().enumerate() {
        k[i % 16] ^= b;
    }
    u128::from_le_bytes(k)
}

impl<G: Group> DlogTable<G> {
    pub fn new(max_message: u64) -> Self {
        let baby = (max_message + 1).min(MAX_BABY_STEPS);
        Self::with_baby_steps(max_message, baby)
    }

    pub fn with_baby_steps(max_message: u64, baby_steps: u64) -> Self {
        assert!(baby_steps >= 1 && baby_steps <= u32::MAX as u64);
        let b = G::generator();
        let mut table = HashMap::with_capacity(baby_steps as usize);
        let mut acc = G::identity();
        for i in 0..baby_steps {
            table.insert(key::<G>(&acc), i as u32);
            acc += b;
        }
        DlogTable {
            max_message,
            baby_steps,
            table,
            giant: acc,
        }
    }

    pub fn max_message(&self) -> u64 {
        self.max_message
    }

    /// Returns `m` with `p = m * B`, or `OutOfTableRange`.
    pub fn lookup(&self, p: &G::Point) -> Result<i64, GroupError> {
        let out = GroupError::OutOfTableRange {
            max: self.max_message,
        };
        let s = self.baby_steps as i128;
        let max = self.max_message as i128;
        // Giant-step index bounds covering [-max, max].
        let j_max = max / s;
        let j_min = -((max + s - 1) / s);
        let check = |j: i128, q: &G::Point| -> Option<i64> {
            let i = *self.table.get(&key::<G>(q))? as i128;
            let m = j * s + i;
            (m.abs() <= max).then_some(m as i64)
        };
        let mut up = *p;
        let mut down = *p + self.giant;
        let mut j = 0i128;
        loop {
            let mut probed = false;
            if j <= j_max {
                probed = true;
                if let Some(m) = check(j, &up) {
                    return Ok(m);
                }
                up = up - self.giant;
            }
            if j >= 1 && -j >= j_min {
                probed = true;
                if let Some(m) = check(-j, &down) {
                    return Ok(m);
                }
                down += self.giant;
            }
            if !probed {
                return Err(out);
            }
            j += 1;
        }
    }
}
