//! Molecule optimisation by sampling over substructure graphs.
//!
//! Molecules are graphs whose nodes are vocabulary substructures (atoms or
//! single rings). Two pretrained graph networks propose edits (replace a
//! node, grow a leaf, delete a leaf) and a Metropolis-Hastings kernel decides
//! which edits to keep, targeting a density that rewards similarity to the
//! input molecule and improvement in chosen properties.

pub mod canon;
pub mod commands;
pub mod fingerprint;
pub mod properties;
pub mod proposal;
pub mod chem;
pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod profile;
pub mod rings;
pub mod sampler;
pub mod smiles;
pub mod vocab;

pub use canon::{canonical_key, canonical_key_capped, graph_isomorphic, CanonError, CanonicalKey};
pub use chem::{check_validity, enumerate_bond_types, enumerate_ring_attachments, ValidityReport};
pub use graph::{AtomGraph, Edge, GraphError, MolGraph};
pub use smiles::{parse_smiles, write_smiles, SmilesError, SmilesErrorKind};
pub use vocab::{BondType, SubstructureVocab, VocabEntry};
