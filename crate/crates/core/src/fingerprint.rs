//! Circular fingerprints on the substructure graph and Tanimoto similarity.
//!
//! Identifiers follow the Morgan scheme: radius 0 hashes the node label,
//! radius r hashes the node's radius r-1 identifier together with the sorted
//! `(bond, neighbour identifier)` pairs. Every identifier of every radius
//! sets one bit (FNV-1a 64, masked to the width). Ring sites are ignored.

use thiserror::Error;

use crate::graph::MolGraph;

pub const DEFAULT_WIDTH: usize = 2048;
pub const DEFAULT_RADIUS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint width {0} is not a power of two")]
    BadWidth(usize),
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
}

/// Fixed-width bit set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
}

impl Fingerprint {
    pub fn empty(width: usize) -> Result<Self, FingerprintError> {
        if width == 0 || !width.is_power_of_two() {
            return Err(FingerprintError::BadWidth(width));
        }
        Ok(Fingerprint {
            words: vec![0; width.div_ceil(64)],
            width,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set(&mut self, bit: usize) {
        let bit = bit & (self.width - 1);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn set_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn bits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Fingerprint with the default radius (2) and width (2048).
pub fn fingerprint(g: &MolGraph) -> Fingerprint {
    fingerprint_with(g, DEFAULT_RADIUS, DEFAULT_WIDTH).expect("default width is a power of two")
}

pub fn fingerprint_with(
    g: &MolGraph,
    radius: usize,
    width: usize,
) -> Result<Fingerprint, FingerprintError> {
    let mut fp = Fingerprint::empty(width)?;
    let n = g.num_nodes();
    let mut ids: Vec<u64> = (0..n)
        .map(|v| {
            let mut buf = b"L".to_vec();
            buf.extend_from_slice(g.label_text(v).as_bytes());
            fnv1a64(&buf)
        })
        .collect();
    for &id in &ids {
        fp.set((id & (width as u64 - 1)) as usize);
    }
    for r in 1..=radius {
        let next: Vec<u64> = (0..n)
            .map(|v| {
                let mut env: Vec<(usize, u64)> = g
                    .neighbors(v)
                    .iter()
                    .map(|&(u, e)| (g.edges()[e].bond.index(), ids[u]))
                    .collect();
                env.sort_unstable();
                let mut buf = Vec::with_capacity(16 + env.len() * 16);
                buf.extend_from_slice(&(r as u64).to_le_bytes());
                buf.extend_from_slice(&ids[v].to_le_bytes());
                for (b, id) in env {
                    buf.extend_from_slice(&(b as u64).to_le_bytes());
                    buf.extend_from_slice(&id.to_le_bytes());
                }
                fnv1a64(&buf)
            })
            .collect();
        for &id in &next {
            fp.set((id & (width as u64 - 1)) as usize);
        }
        ids = next;
    }
    Ok(fp)
}

/// |a ∩ b| / |a ∪ b|, with two empty sets counted as identical.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch(a.width, b.width));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(f64::from(inter) / f64::from(union))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;
    use crate::vocab::SubstructureVocab;
    use proptest::prelude::*;

    fn fp(s: &str) -> Fingerprint {
        fingerprint(&parse_smiles(s, &SubstructureVocab::desk()).unwrap())
    }

    #[test]
    fn single_atom_sets_its_environments() {
        let f = fp("C");
        assert!(f.set_count() >= 1);
        // an isolated node has the same neighbourhood at every radius
        assert!(f.set_count() <= 3);
    }

    #[test]
    fn isomorphic_graphs_match() {
        assert_eq!(fp("CCO"), fp("OCC"));
        assert_eq!(tanimoto(&fp("CCO"), &fp("OCC")).unwrap(), 1.0);
    }

    #[test]
    fn heteroatom_changes_bits() {
        assert_ne!(fp("CCO"), fp("CCN"));
    }

    #[test]
    fn tanimoto_hand_values() {
        let mut a = Fingerprint::empty(64).unwrap();
        let mut b = Fingerprint::empty(64).unwrap();
        for i in [1, 2, 3] {
            a.set(i);
        }
        for i in [2, 3, 4] {
            b.set(i);
        }
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        let mut c = Fingerprint::empty(64).unwrap();
        c.set(9);
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        let e = Fingerprint::empty(64).unwrap();
        assert_eq!(tanimoto(&e, &e).unwrap(), 1.0);
        let w = Fingerprint::empty(128).unwrap();
        assert!(matches!(tanimoto(&a, &w), Err(FingerprintError::WidthMismatch(64, 128))));
        assert!(Fingerprint::empty(100).is_err());
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    proptest! {
        #[test]
        fn tanimoto_symmetric_and_bounded(xs in proptest::collection::vec(0usize..256, 0..40),
                                          ys in proptest::collection::vec(0usize..256, 0..40)) {
            let mut a = Fingerprint::empty(256).unwrap();
            let mut b = Fingerprint::empty(256).unwrap();
            for x in xs { a.set(x); }
            for y in ys { b.set(y); }
            let s = tanimoto(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, tanimoto(&b, &a).unwrap());
        }
    }
}
