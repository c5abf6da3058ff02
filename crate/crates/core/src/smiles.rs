//! SMILES subset: tokenizer, atom-level parser, collapse to substructure
//! graphs, and writer.
//!
//! Supported: organic-subset atoms (`B C N O P S F Cl Br I`), aromatic
//! `b c n o p s`, bracket atoms with hydrogen count and charge, bonds
//! `- = # :`, ring closures `0`-`9`, and branches. Stereo markers,
//! isotopes, `%nn` closures and `.` disconnections are rejected.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::chem::{check_validity, Violation};
use crate::graph::{Atom, AtomBond, AtomGraph, Edge, MolGraph};
use crate::rings::perceive_rings;
use crate::vocab::{BondType, SubstructureVocab};

const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

const ORGANIC: [&str; 10] = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];
const AROMATIC_BARE: [&str; 6] = ["b", "c", "n", "o", "p", "s"];
const AROMATIC_BRACKET: [&str; 8] = ["b", "c", "n", "o", "p", "s", "se", "as"];

pub fn is_element(symbol: &str) -> bool {
    ELEMENTS.contains(&symbol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmilesErrorKind {
    Lexical,
    UnbalancedRing,
    UnbalancedBranch,
    UnknownAtom,
    Valence,
    Unsupported,
    Empty,
}

impl fmt::Display for SmilesErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SmilesErrorKind::Lexical => "lexical error",
            SmilesErrorKind::UnbalancedRing => "unbalanced ring closure",
            SmilesErrorKind::UnbalancedBranch => "unbalanced branch",
            SmilesErrorKind::UnknownAtom => "unknown atom",
            SmilesErrorKind::Valence => "valence violation",
            SmilesErrorKind::Unsupported => "unsupported syntax",
            SmilesErrorKind::Empty => "empty input",
        })
    }
}

/// Parse failure with the byte offset it refers to.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}: {message}")]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    pub offset: usize,
    pub message: String,
}

impl SmilesError {
    fn new(kind: SmilesErrorKind, offset: usize, message: impl Into<String>) -> Self {
        SmilesError {
            kind,
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WriteError {
    #[error("vocabulary entry `{0}` has no SMILES spelling")]
    NoSpelling(String),
    #[error("more than ten ring closures open at once")]
    TooManyRings,
    #[error("graph is empty or disconnected")]
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Atom {
        element: String,
        aromatic: bool,
    },
    BracketAtom {
        element: String,
        aromatic: bool,
        hydrogens: u8,
        charge: i8,
    },
    Bond(BondType),
    RingClosure(u8),
    BranchOpen,
    BranchClose,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesToken {
    pub kind: TokenKind,
    /// Source text of the token.
    pub text: String,
    pub offset: usize,
}

/// Splits `s` into tokens; rejects anything outside the supported subset.
pub fn tokenize(s: &str) -> Result<Vec<SmilesToken>, SmilesError> {
    use SmilesErrorKind::*;
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let start = i;
        let c = b[i];
        let kind = match c {
            b'(' => {
                i += 1;
                TokenKind::BranchOpen
            }
            b')' => {
                i += 1;
                TokenKind::BranchClose
            }
            b'-' | b'=' | b'#' | b':' => {
                i += 1;
                TokenKind::Bond(BondType::from_symbol(c as char).expect("bond symbol"))
            }
            b'0'..=b'9' => {
                i += 1;
                TokenKind::RingClosure(c - b'0')
            }
            b'/' | b'\\' => {
                return Err(SmilesError::new(
                    Unsupported,
                    i,
                    "directional bonds are not supported",
                ))
            }
            b'@' => return Err(SmilesError::new(Unsupported, i, "chirality is not supported")),
            b'%' => {
                return Err(SmilesError::new(
                    Unsupported,
                    i,
                    "two-digit ring closures are not supported",
                ))
            }
            b'.' => {
                return Err(SmilesError::new(
                    Unsupported,
                    i,
                    "disconnected structures are not supported",
                ))
            }
            b'[' => {
                let (kind, end) = bracket_atom(b, i)?;
                i = end;
                kind
            }
            b'B' | b'C' => {
                let two = match (c, b.get(i + 1)) {
                    (b'B', Some(b'r')) => Some("Br"),
                    (b'C', Some(b'l')) => Some("Cl"),
                    _ => None,
                };
                let element = match two {
                    Some(e) => {
                        i += 2;
                        e.to_string()
                    }
                    None => {
                        i += 1;
                        (c as char).to_string()
                    }
                };
                TokenKind::Atom {
                    element,
                    aromatic: false,
                }
            }
            b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                i += 1;
                TokenKind::Atom {
                    element: (c as char).to_string(),
                    aromatic: false,
                }
            }
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                i += 1;
                TokenKind::Atom {
                    element: (c as char).to_ascii_uppercase().to_string(),
                    aromatic: true,
                }
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'*' => {
                return Err(SmilesError::new(
                    UnknownAtom,
                    i,
                    format!(
                        "`{}` is not an organic-subset atom; use brackets",
                        c as char
                    ),
                ))
            }
            _ => {
                return Err(SmilesError::new(
                    Lexical,
                    i,
                    format!("unexpected byte 0x{c:02x}"),
                ))
            }
        };
        out.push(SmilesToken {
            kind,
            text: String::from_utf8_lossy(&b[start..i]).into_owned(),
            offset: start,
        });
    }
    Ok(out)
}

fn bracket_atom(b: &[u8], open: usize) -> Result<(TokenKind, usize), SmilesError> {
    use SmilesErrorKind::*;
    let mut i = open + 1;
    let peek = |i: usize| b.get(i).copied();
    if matches!(peek(i), Some(b'0'..=b'9')) {
        return Err(SmilesError::new(Unsupported, i, "isotopes are not supported"));
    }
    let (element, aromatic) = match peek(i) {
        Some(c) if c.is_ascii_uppercase() => {
            let two = peek(i + 1)
                .filter(u8::is_ascii_lowercase)
                .map(|d| format!("{}{}", c as char, d as char));
            match two {
                Some(t) if is_element(&t) => {
                    i += 2;
                    (t, false)
                }
                _ => {
                    let one = (c as char).to_string();
                    if !is_element(&one) {
                        return Err(SmilesError::new(
                            UnknownAtom,
                            i,
                            format!("unknown element `{one}`"),
                        ));
                    }
                    i += 1;
                    (one, false)
                }
            }
        }
        Some(c) if c.is_ascii_lowercase() => {
            let two = peek(i + 1).map(|d| format!("{}{}", c as char, d as char));
            match two {
                Some(t) if AROMATIC_BRACKET.contains(&t.as_str()) => {
                    i += 2;
                    (capitalise(&t), true)
                }
                _ => {
                    let one = (c as char).to_string();
                    if !AROMATIC_BRACKET.contains(&one.as_str()) {
                        return Err(SmilesError::new(
                            UnknownAtom,
                            i,
                            format!("unknown aromatic element `{one}`"),
                        ));
                    }
                    i += 1;
                    (capitalise(&one), true)
                }
            }
        }
        Some(b'*') => return Err(SmilesError::new(Unsupported, i, "wildcard atoms are not supported")),
        Some(_) => return Err(SmilesError::new(Lexical, i, "expected an element symbol")),
        None => return Err(SmilesError::new(Lexical, open, "unterminated bracket atom")),
    };
    if peek(i) == Some(b'@') {
        return Err(SmilesError::new(Unsupported, i, "chirality is not supported"));
    }
    let mut hydrogens = 0u8;
    if peek(i) == Some(b'H') {
        i += 1;
        hydrogens = 1;
        if let Some(d @ b'0'..=b'9') = peek(i) {
            hydrogens = d - b'0';
            i += 1;
        }
    }
    let mut charge = 0i8;
    if let Some(sign @ (b'+' | b'-')) = peek(i) {
        let unit: i8 = if sign == b'+' { 1 } else { -1 };
        i += 1;
        charge = unit;
        if let Some(d @ b'0'..=b'9') = peek(i) {
            charge = unit * (d - b'0') as i8;
            i += 1;
        } else {
            while peek(i) == Some(sign) && charge.abs() < 9 {
                charge += unit;
                i += 1;
            }
        }
    }
    match peek(i) {
        Some(b']') => Ok((
            TokenKind::BracketAtom {
                element,
                aromatic,
                hydrogens,
                charge,
            },
            i + 1,
        )),
        Some(b':') => Err(SmilesError::new(Unsupported, i, "atom classes are not supported")),
        Some(b'@') => Err(SmilesError::new(Unsupported, i, "chirality is not supported")),
        Some(_) => Err(SmilesError::new(Lexical, i, "unexpected byte in bracket atom")),
        None => Err(SmilesError::new(Lexical, open, "unterminated bracket atom")),
    }
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

/// Parses `s` into an atom graph without any vocabulary lookup.
///
/// Unmarked bonds between two aromatic atoms are aromatic unless they turn
/// out to be bridges (e.g. the bond joining two phenyl rings), in which case
/// they are single.
pub fn parse_atom_graph(s: &str) -> Result<AtomGraph, SmilesError> {
    use SmilesErrorKind::*;
    let tokens = tokenize(s)?;
    if tokens.is_empty() {
        return Err(SmilesError::new(Empty, 0, "no atoms"));
    }
    let mut g = AtomGraph::default();
    let mut implicit: Vec<bool> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondType, usize)> = None;
    let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
    let mut open: [Option<(usize, Option<BondType>, usize)>; 10] = [None; 10];

    let connect = |g: &mut AtomGraph,
                       implicit: &mut Vec<bool>,
                       a: usize,
                       b: usize,
                       bond: Option<BondType>,
                       offset: usize|
     -> Result<(), SmilesError> {
        if a == b {
            return Err(SmilesError::new(Lexical, offset, "ring closure onto the same atom"));
        }
        if g.bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return Err(SmilesError::new(Lexical, offset, "duplicate bond between two atoms"));
        }
        let both_aromatic = g.atoms[a].aromatic && g.atoms[b].aromatic;
        let (bond, imp) = match bond {
            Some(t) => (t, false),
            None if both_aromatic => (BondType::Aromatic, true),
            None => (BondType::Single, false),
        };
        g.bonds.push(AtomBond { a, b, bond });
        implicit.push(imp);
        Ok(())
    };

    for tok in &tokens {
        match &tok.kind {
            TokenKind::Atom { element, aromatic } | TokenKind::BracketAtom { element, aromatic, .. } => {
                let (hydrogens, charge) = match tok.kind {
                    TokenKind::BracketAtom {
                        hydrogens, charge, ..
                    } => (Some(hydrogens), charge),
                    _ => (None, 0),
                };
                let idx = g.atoms.len();
                g.atoms.push(Atom {
                    element: element.clone(),
                    aromatic: *aromatic,
                    charge,
                    hydrogens,
                    offset: tok.offset,
                    node: None,
                });
                if let Some(p) = prev {
                    let bond = pending.take().map(|(t, _)| t);
                    connect(&mut g, &mut implicit, p, idx, bond, tok.offset)?;
                } else if let Some((_, off)) = pending {
                    return Err(SmilesError::new(Lexical, off, "bond without a preceding atom"));
                }
                prev = Some(idx);
            }
            TokenKind::Bond(t) => {
                if prev.is_none() {
                    return Err(SmilesError::new(Lexical, tok.offset, "bond without a preceding atom"));
                }
                if pending.is_some() {
                    return Err(SmilesError::new(Lexical, tok.offset, "two consecutive bond symbols"));
                }
                pending = Some((*t, tok.offset));
            }
            TokenKind::BranchOpen => {
                if prev.is_none() {
                    return Err(SmilesError::new(UnbalancedBranch, tok.offset, "branch without a preceding atom"));
                }
                if let Some((_, off)) = pending {
                    return Err(SmilesError::new(Lexical, off, "bond symbol before a branch"));
                }
                branches.push((prev, tok.offset));
            }
            TokenKind::BranchClose => {
                if let Some((_, off)) = pending {
                    return Err(SmilesError::new(Lexical, off, "dangling bond at end of branch"));
                }
                match branches.pop() {
                    Some((p, _)) => prev = p,
                    None => {
                        return Err(SmilesError::new(UnbalancedBranch, tok.offset, "unmatched `)`"))
                    }
                }
            }
            TokenKind::RingClosure(d) => {
                let Some(p) = prev else {
                    return Err(SmilesError::new(UnbalancedRing, tok.offset, "ring closure without an atom"));
                };
                let here = pending.take().map(|(t, _)| t);
                let slot = &mut open[usize::from(*d)];
                match slot.take() {
                    Some((q, there, _)) => {
                        let bond = match (here, there) {
                            (Some(x), Some(y)) if x != y => {
                                return Err(SmilesError::new(
                                    Lexical,
                                    tok.offset,
                                    "ring closure bond symbols disagree",
                                ))
                            }
                            (x, y) => x.or(y),
                        };
                        connect(&mut g, &mut implicit, q, p, bond, tok.offset)?;
                    }
                    None => *slot = Some((p, here, tok.offset)),
                }
            }
        }
    }
    if let Some((_, off)) = pending {
        return Err(SmilesError::new(Lexical, off, "dangling bond at end of input"));
    }
    if let Some(&(_, off)) = branches.first() {
        return Err(SmilesError::new(UnbalancedBranch, off, "unclosed `(`"));
    }
    if let Some((_, _, off)) = open.iter().flatten().min_by_key(|x| x.2) {
        return Err(SmilesError::new(UnbalancedRing, *off, "unclosed ring bond"));
    }
    if g.atoms.is_empty() {
        return Err(SmilesError::new(Empty, 0, "no atoms"));
    }
    let bridges = g.bridges();
    for (i, b) in g.bonds.iter_mut().enumerate() {
        if implicit[i] && bridges[i] {
            b.bond = BondType::Single;
        }
    }
    Ok(g)
}

/// Parses `s` and collapses isolated vocabulary rings into ring nodes.
pub fn parse_smiles(s: &str, vocab: &Arc<SubstructureVocab>) -> Result<MolGraph, SmilesError> {
    let atoms = parse_atom_graph(s)?;
    collapse(&atoms, vocab)
}

/// Maps an atom graph onto substructure nodes.
pub fn collapse(a: &AtomGraph, vocab: &Arc<SubstructureVocab>) -> Result<MolGraph, SmilesError> {
    let n = a.atoms.len();
    if n == 0 {
        return Err(SmilesError::new(SmilesErrorKind::Empty, 0, "no atoms"));
    }
    // (ring entry, site) per collapsed atom
    let mut ring_of: Vec<Option<(usize, usize, u8)>> = vec![None; n];
    let mut collapsed: Vec<(usize, Vec<usize>)> = Vec::new();
    for ring in perceive_rings(a).iter().filter(|r| r.isolated) {
        if let Some((entry, aligned)) = match_ring(a, &ring.atoms, &ring.bonds, vocab) {
            let ri = collapsed.len();
            for (site, &atom) in aligned.iter().enumerate() {
                ring_of[atom] = Some((ri, entry, site as u8));
            }
            collapsed.push((entry, aligned));
        }
    }

    let mut node_of = vec![usize::MAX; n];
    let mut site_of: Vec<Option<u8>> = vec![None; n];
    let mut ring_node: Vec<usize> = vec![usize::MAX; collapsed.len()];
    let mut nodes = Vec::new();
    let mut first_atom = Vec::new();
    for (i, atom) in a.atoms.iter().enumerate() {
        match ring_of[i] {
            Some((ri, entry, site)) => {
                if ring_node[ri] == usize::MAX {
                    ring_node[ri] = nodes.len();
                    nodes.push(entry);
                    first_atom.push(i);
                }
                node_of[i] = ring_node[ri];
                site_of[i] = Some(site);
            }
            None => {
                let id = vocab.atom_id(&atom.element).ok_or_else(|| {
                    SmilesError::new(
                        SmilesErrorKind::UnknownAtom,
                        atom.offset,
                        format!("element `{}` is not in the vocabulary", atom.element),
                    )
                })?;
                node_of[i] = nodes.len();
                nodes.push(id);
                first_atom.push(i);
            }
        }
    }
    let mut edges = Vec::new();
    for b in &a.bonds {
        let (u, v) = (node_of[b.a], node_of[b.b]);
        if u == v {
            continue;
        }
        edges.push(Edge::new(u, v, b.bond).with_sites(site_of[b.a], site_of[b.b]));
    }
    let g = MolGraph::new(vocab.clone(), nodes, edges).map_err(|e| {
        SmilesError::new(SmilesErrorKind::Lexical, 0, format!("malformed structure: {e}"))
    })?;
    let report = check_validity(&g);
    if let Some(v) = report.violations.first() {
        let offset = match v {
            Violation::Empty | Violation::Disconnected => 0,
            Violation::SiteValence { node, site, .. } => a
                .atoms
                .iter()
                .enumerate()
                .find(|(i, _)| node_of[*i] == *node && site_of[*i] == Some(*site))
                .map_or(0, |(_, x)| x.offset),
            other => other.node().map_or(0, |nd| a.atoms[first_atom[nd]].offset),
        };
        return Err(SmilesError::new(SmilesErrorKind::Valence, offset, v.to_string()));
    }
    Ok(g)
}

/// Finds a vocabulary ring matching the cycle by element and bond type.
/// Returns the entry and the cycle atoms listed in template order.
fn match_ring(
    a: &AtomGraph,
    cycle: &[usize],
    cycle_bonds: &[usize],
    vocab: &SubstructureVocab,
) -> Option<(usize, Vec<usize>)> {
    let n = cycle.len();
    for id in vocab.ring_ids() {
        let t = vocab.entry(id).ring.as_ref().expect("ring entry");
        if t.size() != n {
            continue;
        }
        for reflect in [false, true] {
            for shift in 0..n {
                let pos = |i: usize| {
                    if reflect {
                        (shift + n - i % n) % n
                    } else {
                        (shift + i) % n
                    }
                };
                let ok = (0..n).all(|i| {
                    let atom = &a.atoms[cycle[pos(i)]];
                    if atom.element != t.atoms[i].element {
                        return false;
                    }
                    // bond between template i and i+1 sits between cycle positions pos(i), pos(i+1)
                    let (p, q) = (pos(i), pos(i + 1));
                    let bi = if (p + 1) % n == q { cycle_bonds[p] } else { cycle_bonds[q] };
                    a.bonds[bi].bond == t.bonds[i]
                });
                if ok {
                    return Some((id, (0..n).map(|i| cycle[pos(i)]).collect()));
                }
            }
        }
    }
    None
}

/// Writes `g` as SMILES. Ring nodes are spelled with their ring atoms;
/// atom nodes are written in upper case, bracketed outside the organic subset.
pub fn write_smiles(g: &MolGraph) -> Result<String, WriteError> {
    if g.num_nodes() == 0 || !g.is_connected() {
        return Err(WriteError::Disconnected);
    }
    for &id in g.nodes() {
        let e = g.vocab().entry(id);
        if e.ring.is_none() && !is_element(&e.label) {
            return Err(WriteError::NoSpelling(e.label.clone()));
        }
    }
    let a = g.expand();
    let text: Vec<String> = a.atoms.iter().map(atom_text).collect();
    Writer::new(&a, text).run()
}

fn atom_text(atom: &Atom) -> String {
    let h = atom.hydrogens.unwrap_or(0);
    if atom.aromatic {
        let lower = atom.element.to_ascii_lowercase();
        if h == 0 && AROMATIC_BARE.contains(&lower.as_str()) {
            lower
        } else if h == 0 {
            format!("[{lower}]")
        } else if h == 1 {
            format!("[{lower}H]")
        } else {
            format!("[{lower}H{h}]")
        }
    } else if h == 0 && ORGANIC.contains(&atom.element.as_str()) {
        atom.element.clone()
    } else if h == 0 {
        format!("[{}]", atom.element)
    } else if h == 1 {
        format!("[{}H]", atom.element)
    } else {
        format!("[{}H{h}]", atom.element)
    }
}

struct Writer<'a> {
    a: &'a AtomGraph,
    adj: Vec<Vec<(usize, usize)>>,
    text: Vec<String>,
    order: Vec<usize>,
    children: Vec<Vec<(usize, usize)>>,
    // ring bonds: (bond, opened here?) per atom
    ring_events: Vec<Vec<(usize, bool)>>,
    digit_of: Vec<Option<u8>>,
    in_use: [bool; 10],
}

impl<'a> Writer<'a> {
    fn new(a: &'a AtomGraph, text: Vec<String>) -> Self {
        let n = a.atoms.len();
        let mut adj = a.adjacency();
        for l in &mut adj {
            l.sort_unstable();
        }
        Writer {
            a,
            adj,
            text,
            order: vec![usize::MAX; n],
            children: vec![Vec::new(); n],
            ring_events: vec![Vec::new(); n],
            digit_of: vec![None; a.bonds.len()],
            in_use: [false; 10],
        }
    }

    fn run(mut self) -> Result<String, WriteError> {
        let mut counter = 0;
        let mut tree = vec![false; self.a.bonds.len()];
        self.discover(0, &mut counter, &mut tree);
        for (bi, b) in self.a.bonds.iter().enumerate() {
            if tree[bi] {
                continue;
            }
            let (first, second) = if self.order[b.a] < self.order[b.b] {
                (b.a, b.b)
            } else {
                (b.b, b.a)
            };
            self.ring_events[first].push((bi, true));
            self.ring_events[second].push((bi, false));
        }
        for ev in &mut self.ring_events {
            // closings before openings, then by bond index
            ev.sort_by_key(|&(bi, opens)| (opens, bi));
        }
        let mut out = String::new();
        self.emit(0, &mut out)?;
        Ok(out)
    }

    fn discover(&mut self, x: usize, counter: &mut usize, tree: &mut [bool]) {
        self.order[x] = *counter;
        *counter += 1;
        for k in 0..self.adj[x].len() {
            let (y, bi) = self.adj[x][k];
            if self.order[y] == usize::MAX {
                tree[bi] = true;
                self.children[x].push((y, bi));
                self.discover(y, counter, tree);
            }
        }
    }

    fn bond_symbol(&self, bi: usize) -> Option<char> {
        let b = self.a.bonds[bi];
        let aromatic_pair = self.a.atoms[b.a].aromatic && self.a.atoms[b.b].aromatic;
        match (b.bond, aromatic_pair) {
            (BondType::Aromatic, true) | (BondType::Single, false) => None,
            (t, _) => Some(t.symbol()),
        }
    }

    fn emit(&mut self, x: usize, out: &mut String) -> Result<(), WriteError> {
        out.push_str(&self.text[x]);
        let events = self.ring_events[x].clone();
        for (bi, opens) in events {
            if opens {
                let slot = [1u8, 2, 3, 4, 5, 6, 7, 8, 9, 0]
                    .into_iter()
                    .find(|&d| !self.in_use[usize::from(d)])
                    .ok_or(WriteError::TooManyRings)?;
                self.in_use[usize::from(slot)] = true;
                self.digit_of[bi] = Some(slot);
                if let Some(c) = self.bond_symbol(bi) {
                    out.push(c);
                }
                out.push((b'0' + slot) as char);
            } else {
                let d = self.digit_of[bi].expect("ring bond opened before it closes");
                self.in_use[usize::from(d)] = false;
                out.push((b'0' + d) as char);
            }
        }
        let children = self.children[x].clone();
        let last = children.len().saturating_sub(1);
        for (k, (y, bi)) in children.into_iter().enumerate() {
            let branch = k < last;
            if branch {
                out.push('(');
            }
            if let Some(c) = self.bond_symbol(bi) {
                out.push(c);
            }
            self.emit(y, out)?;
            if branch {
                out.push(')');
            }
        }
        Ok(())
    }
}

/// One corpus line: SMILES plus optional name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub line: usize,
    pub smiles: String,
    pub name: Option<String>,
}

/// Reads a corpus: one SMILES per line, optional tab-separated name,
/// `#` comments and blank lines skipped.
pub fn read_corpus(text: &str) -> Vec<CorpusEntry> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                return None;
            }
            let mut parts = line.splitn(2, '\t');
            let smiles = parts.next()?.trim().to_string();
            let name = parts
                .next()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty());
            Some(CorpusEntry {
                line: i + 1,
                smiles,
                name,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::graph_isomorphic;

    fn desk() -> Arc<SubstructureVocab> {
        SubstructureVocab::desk()
    }

    fn kind(s: &str) -> SmilesErrorKind {
        parse_smiles(s, &desk()).unwrap_err().kind
    }

    #[test]
    fn ethanol_is_a_path() {
        let g = parse_smiles("CCO", &desk()).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert!(g.edges().iter().all(|e| e.bond == BondType::Single));
        assert_eq!(g.label_text(2), "O");
    }

    #[test]
    fn benzene_collapses() {
        let g = parse_smiles("c1ccccc1", &desk()).unwrap();
        assert_eq!(g.num_nodes(), 1);
        assert_eq!(g.label_text(0), "c1ccccc1");
        assert_eq!(write_smiles(&g).unwrap(), "c1ccccc1");
    }

    #[test]
    fn toluene_two_nodes() {
        let g = parse_smiles("c1ccccc1C", &desk()).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edges()[0].bond, BondType::Single);
    }

    #[test]
    fn single_atom_writes_itself() {
        let v = desk();
        let g = MolGraph::single(v.clone(), v.lookup("C").unwrap()).unwrap();
        assert_eq!(write_smiles(&g).unwrap(), "C");
    }

    #[test]
    fn biphenyl_bridge_is_single() {
        let a = parse_atom_graph("c1ccccc1c1ccccc1").unwrap();
        let singles = a.bonds.iter().filter(|b| b.bond == BondType::Single).count();
        assert_eq!(singles, 1);
        let g = parse_smiles("c1ccccc1c1ccccc1", &desk()).unwrap();
        assert_eq!(g.num_nodes(), 2);
    }

    #[test]
    fn error_kinds() {
        assert_eq!(kind(""), SmilesErrorKind::Empty);
        assert_eq!(kind("C1CC"), SmilesErrorKind::UnbalancedRing);
        assert_eq!(kind("CC(C"), SmilesErrorKind::UnbalancedBranch);
        assert_eq!(kind("CC)C"), SmilesErrorKind::UnbalancedBranch);
        assert_eq!(kind("C/C=C/C"), SmilesErrorKind::Unsupported);
        assert_eq!(kind("[13C]"), SmilesErrorKind::Unsupported);
        assert_eq!(kind("C.C"), SmilesErrorKind::Unsupported);
        assert_eq!(kind("C%12CC%12"), SmilesErrorKind::Unsupported);
        assert_eq!(kind("[C@H](F)(Cl)Br"), SmilesErrorKind::Unsupported);
        assert_eq!(kind("CC$"), SmilesErrorKind::Lexical);
        assert_eq!(kind("C=="), SmilesErrorKind::Lexical);
        assert_eq!(kind("[Xx]"), SmilesErrorKind::UnknownAtom);
        assert_eq!(kind("CI"), SmilesErrorKind::UnknownAtom);
        assert_eq!(kind("O(C)(C)C"), SmilesErrorKind::Valence);
    }

    #[test]
    fn error_offsets() {
        let e = parse_smiles("CCO(C)C", &desk()).unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::Valence);
        assert_eq!(e.offset, 2);
        let e = parse_smiles("CC[Xx]", &desk()).unwrap_err();
        assert_eq!(e.offset, 3);
        let e = parse_smiles("CCC1CC", &desk()).unwrap_err();
        assert_eq!(e.offset, 3);
    }

    #[test]
    fn fused_rings_stay_atomic() {
        let g = parse_smiles("c1ccc2ccccc2c1", &desk()).unwrap();
        assert_eq!(g.num_nodes(), 10);
        assert_eq!(g.ring_node_count(), 0);
        let back = write_smiles(&g).unwrap();
        let again = parse_smiles(&back, &desk()).unwrap();
        assert!(graph_isomorphic(&g, &again));
    }

    #[test]
    fn pyrrole_nitrogen_substituted() {
        let v = SubstructureVocab::full();
        let g = parse_smiles("Cn1cccc1", &v).unwrap();
        assert_eq!(g.num_nodes(), 2);
        let s = write_smiles(&g).unwrap();
        assert!(!s.contains("nH"), "{s}");
        let g2 = parse_smiles(&s, &v).unwrap();
        assert!(graph_isomorphic(&g, &g2));
        let free = parse_smiles("c1cc[nH]c1", &v).unwrap();
        assert_eq!(write_smiles(&free).unwrap(), "c1cc[nH]c1");
    }

    #[test]
    fn round_trips() {
        let v = SubstructureVocab::full();
        for s in [
            "CC(=O)Oc1ccccc1C(=O)O",
            "C1CCCCC1CC#N",
            "O=C1CCCC1",
            "c1ccncc1-c1ccccc1",
            "CCN(CC)CC",
            "FC(F)(F)c1ccc(Cl)cc1",
            "C1CC1C1CCCC1",
            "C1=CCCCC1",
            "c1ccc2[nH]ccc2c1",
            "C1CCCCCCC1",
        ] {
            let g = parse_smiles(s, &v).unwrap_or_else(|e| panic!("{s}: {e}"));
            let w = write_smiles(&g).unwrap();
            let g2 = parse_smiles(&w, &v).unwrap_or_else(|e| panic!("{s} -> {w}: {e}"));
            assert!(graph_isomorphic(&g, &g2), "{s} -> {w}");
        }
    }

    #[test]
    fn corpus_lines() {
        let c = read_corpus("# header\nCCO\tethanol\n\nc1ccccc1\n");
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].name.as_deref(), Some("ethanol"));
        assert_eq!(c[1].line, 4);
    }

    #[test]
    fn tokens_carry_offsets() {
        let t = tokenize("C[nH]1").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[1].offset, 1);
        assert_eq!(t[1].text, "[nH]");
        assert_eq!(t[2].kind, TokenKind::RingClosure(1));
    }
}
