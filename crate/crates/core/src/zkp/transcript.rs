use sha2::{Digest, Sha512};

use crate::group::Group;

/// Fiat–Shamir transcript. Every item is absorbed as
/// `len(tag) ‖ tag ‖ len(data) ‖ data`, so distinct item sequences never
/// produce the same hash input.
#[derive(Clone)]
pub struct Transcript {
    hasher: Sha512,
}

impl Transcript {
    pub fn new(label: &[u8]) -> Self {
        let mut t = Transcript {
            hasher: Sha512::new(),
        };
        t.append(b"domain", label);
        t
    }

    pub fn append(&mut self, tag: &[u8], data: &[u8]) {
        self.hasher.update((tag.len() as u64).to_le_bytes());
        self.hasher.update(tag);
        self.hasher.update((data.len() as u64).to_le_bytes());
        self.hasher.update(data);
    }

    pub fn append_u64(&mut self, tag: &[u8], v: u64) {
        self.append(tag, &v.to_le_bytes());
    }

    pub fn append_point<G: Group>(&mut self, tag: &[u8], p: &G::Point) {
        self.append(tag, &G::encode_point(p));
    }

    pub fn append_points<G: Group>(&mut self, tag: &[u8], ps: &[G::Point]) {
        self.append_u64(tag, ps.len() as u64);
        for p in ps {
            self.append_point::<G>(tag, p);
        }
    }

    pub fn append_g2<G: Group>(&mut self, tag: &[u8], p: &G::G2) {
        self.append(tag, &G::encode_g2(p));
    }

    pub fn append_target<G: Group>(&mut self, tag: &[u8], t: &G::Target) {
        self.append(tag, &G::encode_target(t));
    }

    fn squeeze(&self, tag: &[u8], counter: u64) -> [u8; 64] {
        let mut h = self.hasher.clone();
        h.update((tag.len() as u64).to_le_bytes());
        h.update(tag);
        h.update(counter.to_le_bytes());
        h.finalize().into()
    }

    pub fn challenge_scalar<G: Group>(&self, tag: &[u8]) -> G::Scalar {
        G::scalar_from_wide(&self.squeeze(tag, 0))
    }

    /// `n` challenge bits, expanded in counter mode.
    pub fn challenge_bits(&self, tag: &[u8], n: usize) -> Vec<bool> {
        let mut bits = Vec::with_capacity(n);
        let mut counter = 0u64;
        while bits.len() < n {
            for byte in self.squeeze(tag, counter) {
                for k in 0..8 {
                    if bits.len() < n {
                        bits.push(byte >> k & 1 == 1);
                    }
                }
            }
            counter += 1;
        }
        bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Ristretto;

    #[test]
    fn framing_is_unambiguous() {
        let mut a = Transcript::new(b"x");
        a.append(b"ab", b"c");
        let mut b = Transcript::new(b"x");
        b.append(b"a", b"bc");
        assert_ne!(
            a.challenge_scalar::<Ristretto>(b"c"),
            b.challenge_scalar::<Ristretto>(b"c")
        );
        let c = Transcript::new(b"y");
        assert_ne!(
            Transcript::new(b"x").challenge_scalar::<Ristretto>(b"c"),
            c.challenge_scalar::<Ristretto>(b"c")
        );
    }

    #[test]
    fn bits_expand_past_one_block() {
        let t = Transcript::new(b"bits");
        let bits = t.challenge_bits(b"b", 1000);
        assert_eq!(bits.len(), 1000);
        let ones = bits.iter().filter(|&&b| b).count();
        assert!((400..600).contains(&ones));
        assert_eq!(&t.challenge_bits(b"b", 10)[..], &bits[..10]);
    }
}
