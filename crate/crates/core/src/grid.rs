//! The fixed 64-character alphabet, its 8×8 grid layout, and the coloring
//! strategies used to paint the grid each round.
//!
//! Every coloring produced here is *balanced*: each of the four color keys
//! covers exactly 16 cells.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Canonical alphabet order. Position in this string is the cell index.
pub const ALPHABET: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789*#";

pub const GRID_SIDE: usize = 8;
pub const CELL_COUNT: usize = 64;
pub const KEY_COUNT: usize = 4;
/// Cells per key in a balanced coloring.
pub const CELLS_PER_KEY: usize = CELL_COUNT / KEY_COUNT;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("character {0:?} is not in the 64-character alphabet")]
    UnknownChar(char),
    #[error("cell index {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("key ordinal {0} is out of range 0..=3")]
    BadOrdinal(u8),
    #[error("coloring must have 64 cells, got {0}")]
    WrongLength(usize),
    #[error("coloring is unbalanced: key counts {0:?}")]
    Unbalanced([usize; KEY_COUNT]),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

/// Position of a character in the canonical alphabet; equivalently its grid
/// cell in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharIndex(u8);

impl CharIndex {
    pub fn new(index: usize) -> Result<Self, GridError> {
        if index < CELL_COUNT {
            Ok(CharIndex(index as u8))
        } else {
            Err(GridError::IndexOutOfRange(index))
        }
    }

    pub fn from_char(c: char) -> Result<Self, GridError> {
        let pos = if c.is_ascii() {
            ALPHABET.iter().position(|&a| a == c as u8)
        } else {
            None
        };
        pos.map(|p| CharIndex(p as u8))
            .ok_or(GridError::UnknownChar(c))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn to_char(self) -> char {
        ALPHABET[self.index()] as char
    }

    pub fn row(self) -> usize {
        self.index() / GRID_SIDE
    }

    pub fn col(self) -> usize {
        self.index() % GRID_SIDE
    }

    pub fn at(row: usize, col: usize) -> Result<Self, GridError> {
        if row >= GRID_SIDE || col >= GRID_SIDE {
            return Err(GridError::IndexOutOfRange(row * GRID_SIDE + col));
        }
        Self::new(row * GRID_SIDE + col)
    }

    pub fn all() -> impl Iterator<Item = CharIndex> {
        (0..CELL_COUNT as u8).map(CharIndex)
    }
}

impl fmt::Display for CharIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

impl Serialize for CharIndex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut buf = [0u8; 4];
        s.serialize_str(self.to_char().encode_utf8(&mut buf))
    }
}

impl<'de> Deserialize<'de> for CharIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => CharIndex::from_char(c).map_err(serde::de::Error::custom),
            _ => Err(serde::de::Error::custom("expected a single character")),
        }
    }
}

/// A set of grid characters, stored as a 64-bit mask over cell indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CharSet(u64);

impl CharSet {
    pub const EMPTY: CharSet = CharSet(0);
    pub const FULL: CharSet = CharSet(u64::MAX);

    pub fn from_bits(bits: u64) -> Self {
        CharSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(c: CharIndex) -> Self {
        CharSet(1 << c.0)
    }

    /// Parses a set from its characters, e.g. `"AGy0"`.
    pub fn parse(chars: &str) -> Result<Self, GridError> {
        chars
            .chars()
            .map(CharIndex::from_char)
            .collect::<Result<CharSet, _>>()
    }

    pub fn insert(&mut self, c: CharIndex) {
        self.0 |= 1 << c.0;
    }

    pub fn contains(self, c: CharIndex) -> bool {
        self.0 & (1 << c.0) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersection(self, other: CharSet) -> CharSet {
        CharSet(self.0 & other.0)
    }

    pub fn union(self, other: CharSet) -> CharSet {
        CharSet(self.0 | other.0)
    }

    pub fn difference(self, other: CharSet) -> CharSet {
        CharSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: CharSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: CharSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Lowest-index member.
    pub fn first(self) -> Option<CharIndex> {
        (self.0 != 0).then(|| CharIndex(self.0.trailing_zeros() as u8))
    }

    pub fn iter(self) -> impl Iterator<Item = CharIndex> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as u8;
                bits &= bits - 1;
                Some(CharIndex(i))
            }
        })
    }
}

impl FromIterator<CharIndex> for CharSet {
    fn from_iter<I: IntoIterator<Item = CharIndex>>(iter: I) -> Self {
        let mut set = CharSet::EMPTY;
        for c in iter {
            set.insert(c);
        }
        set
    }
}

impl fmt::Display for CharSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.iter() {
            write!(f, "{}", c.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for CharSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

impl Serialize for CharSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CharSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CharSet::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Which render style a deployment uses for the four keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Palette {
    #[default]
    Colors,
    /// Colorblind mode.
    Symbols,
}

/// One of the four abstract response keys. Labels are presentation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum ColorKey {
    K0 = 0,
    K1 = 1,
    K2 = 2,
    K3 = 3,
}

impl ColorKey {
    pub const ALL: [ColorKey; KEY_COUNT] = [ColorKey::K0, ColorKey::K1, ColorKey::K2, ColorKey::K3];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(ordinal: u8) -> Result<Self, GridError> {
        ColorKey::ALL
            .get(ordinal as usize)
            .copied()
            .ok_or(GridError::BadOrdinal(ordinal))
    }

    pub fn label(self, palette: Palette) -> &'static str {
        const COLORS: [&str; KEY_COUNT] = ["green", "orange", "red", "yellow"];
        const SYMBOLS: [&str; KEY_COUNT] = ["black", "white", "strips", "dots"];
        match palette {
            Palette::Colors => COLORS[self as usize],
            Palette::Symbols => SYMBOLS[self as usize],
        }
    }
}

impl Serialize for ColorKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.ordinal())
    }
}

impl<'de> Deserialize<'de> for ColorKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        ColorKey::from_ordinal(u8::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// A balanced assignment of keys to all 64 cells.
///
/// On the wire this is a 64-element array of key ordinals in canonical cell
/// order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GridColoring([ColorKey; CELL_COUNT]);

impl GridColoring {
    /// Builds a coloring from key ordinals, rejecting anything that is not
    /// exactly 64 cells with 16 per key.
    pub fn from_ordinals(ordinals: &[u8]) -> Result<Self, GridError> {
        if ordinals.len() != CELL_COUNT {
            return Err(GridError::WrongLength(ordinals.len()));
        }
        let mut cells = [ColorKey::K0; CELL_COUNT];
        for (cell, &o) in cells.iter_mut().zip(ordinals) {
            *cell = ColorKey::from_ordinal(o)?;
        }
        Self::from_keys(cells)
    }

    pub fn from_keys(cells: [ColorKey; CELL_COUNT]) -> Result<Self, GridError> {
        let coloring = GridColoring(cells);
        let counts = coloring.key_counts();
        if counts.iter().any(|&n| n != CELLS_PER_KEY) {
            return Err(GridError::Unbalanced(counts));
        }
        Ok(coloring)
    }

    pub fn ordinals(&self) -> [u8; CELL_COUNT] {
        self.0.map(ColorKey::ordinal)
    }

    pub fn key_at(&self, c: CharIndex) -> ColorKey {
        self.0[c.index()]
    }

    pub fn key_counts(&self) -> [usize; KEY_COUNT] {
        let mut counts = [0; KEY_COUNT];
        for k in self.0 {
            counts[k as usize] += 1;
        }
        counts
    }

    pub fn is_balanced(&self) -> bool {
        self.key_counts().iter().all(|&n| n == CELLS_PER_KEY)
    }

    /// All cells painted with `key`.
    pub fn cells_with(&self, key: ColorKey) -> CharSet {
        CharIndex::all().filter(|&c| self.key_at(c) == key).collect()
    }

    /// The four color classes, indexed by key ordinal.
    pub fn classes(&self) -> [CharSet; KEY_COUNT] {
        let mut classes = [CharSet::EMPTY; KEY_COUNT];
        for c in CharIndex::all() {
            classes[self.key_at(c) as usize].insert(c);
        }
        classes
    }
}

impl fmt::Debug for GridColoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GridColoring [")?;
        for row in 0..GRID_SIDE {
            write!(f, "  ")?;
            for col in 0..GRID_SIDE {
                let c = CharIndex((row * GRID_SIDE + col) as u8);
                write!(f, "{}:{} ", c, self.key_at(c).ordinal())?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Serialize for GridColoring {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.ordinals().as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GridColoring {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let ordinals = Vec::<u8>::deserialize(d)?;
        GridColoring::from_ordinals(&ordinals).map_err(serde::de::Error::custom)
    }
}

/// Disjoint subgroups of grid cells; everything else is filler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupPartition {
    subgroups: Vec<CharSet>,
}

impl SubgroupPartition {
    pub fn new(subgroups: Vec<CharSet>) -> Result<Self, GridError> {
        if subgroups.len() > KEY_COUNT {
            return Err(GridError::InvalidPartition(format!(
                "{} subgroups exceed the {KEY_COUNT} available keys",
                subgroups.len()
            )));
        }
        let mut seen = CharSet::EMPTY;
        for g in &subgroups {
            if !g.is_disjoint(seen) {
                return Err(GridError::InvalidPartition(
                    "subgroups overlap".to_string(),
                ));
            }
            seen = seen.union(*g);
        }
        Ok(SubgroupPartition { subgroups })
    }

    /// The partition with no subgroups: every cell is filler.
    pub fn empty() -> Self {
        SubgroupPartition { subgroups: Vec::new() }
    }

    /// The four color classes of a coloring, as a 4×16 partition.
    pub fn from_coloring(coloring: &GridColoring) -> Self {
        SubgroupPartition {
            subgroups: coloring.classes().to_vec(),
        }
    }

    pub fn subgroups(&self) -> &[CharSet] {
        &self.subgroups
    }

    pub fn is_empty(&self) -> bool {
        self.subgroups.is_empty()
    }

    pub fn covered(&self) -> CharSet {
        self.subgroups
            .iter()
            .fold(CharSet::EMPTY, |acc, g| acc.union(*g))
    }

    pub fn filler(&self) -> CharSet {
        CharSet::FULL.difference(self.covered())
    }

    pub fn subgroup_of(&self, c: CharIndex) -> Option<CharSet> {
        self.subgroups.iter().copied().find(|g| g.contains(c))
    }
}

/// A uniformly random balanced coloring.
pub fn color_bcip<R: Rng + ?Sized>(rng: &mut R) -> GridColoring {
    let mut cells = [ColorKey::K0; CELL_COUNT];
    for (i, cell) in cells.iter_mut().enumerate() {
        *cell = ColorKey::ALL[i / CELLS_PER_KEY];
    }
    cells.shuffle(rng);
    GridColoring(cells)
}

/// Paints four 16-cell groups monochrome, with a random bijection of keys to
/// groups.
pub fn color_icip_grouplocked<R: Rng + ?Sized>(
    groups: &SubgroupPartition,
    rng: &mut R,
) -> Result<GridColoring, GridError> {
    let sizes_ok = groups.subgroups.len() == KEY_COUNT
        && groups.subgroups.iter().all(|g| g.len() == CELLS_PER_KEY);
    if !sizes_ok {
        return Err(GridError::InvalidPartition(
            "group-locked coloring needs exactly 4 groups of 16".to_string(),
        ));
    }
    color_icip_subgrouped(groups, rng)
}

/// Paints each subgroup with its own key and fills the remaining cells at
/// random so that every key still covers 16 cells.
pub fn color_icip_subgrouped<R: Rng + ?Sized>(
    partition: &SubgroupPartition,
    rng: &mut R,
) -> Result<GridColoring, GridError> {
    let groups = &partition.subgroups;
    if groups.len() < 2 || groups.len() > KEY_COUNT {
        return Err(GridError::InvalidPartition(format!(
            "need 2 to {KEY_COUNT} subgroups, got {}",
            groups.len()
        )));
    }
    let size = groups[0].len();
    if size == 0 || size > CELLS_PER_KEY || groups.iter().any(|g| g.len() != size) {
        return Err(GridError::InvalidPartition(
            "subgroups must be non-empty, of equal size, and at most 16 cells".to_string(),
        ));
    }

    let mut keys = ColorKey::ALL;
    keys.shuffle(rng);

    let mut cells = [ColorKey::K0; CELL_COUNT];
    let mut remaining = [CELLS_PER_KEY; KEY_COUNT];
    for (g, &key) in groups.iter().zip(&keys) {
        for c in g.iter() {
            cells[c.index()] = key;
        }
        remaining[key as usize] -= size;
    }

    let mut pool: Vec<ColorKey> = ColorKey::ALL
        .iter()
        .flat_map(|&k| std::iter::repeat_n(k, remaining[k as usize]))
        .collect();
    pool.shuffle(rng);
    for (c, key) in partition.filler().iter().zip(pool) {
        cells[c.index()] = key;
    }
    Ok(GridColoring(cells))
}

/// The key painted on the cell holding `c`.
pub fn key_at(coloring: &GridColoring, c: CharIndex) -> ColorKey {
    coloring.key_at(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig4_quads() -> SubgroupPartition {
        SubgroupPartition::new(
            ["AGy0", "DJfl", "dov8", "Lex6"]
                .iter()
                .map(|s| CharSet::parse(s).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn alphabet_layout() {
        assert_eq!(CharIndex::from_char('A').unwrap().index(), 0);
        assert_eq!(CharIndex::from_char('a').unwrap().index(), 26);
        assert_eq!(CharIndex::from_char('0').unwrap().index(), 52);
        assert_eq!(CharIndex::from_char('*').unwrap().index(), 62);
        assert_eq!(CharIndex::from_char('#').unwrap().index(), 63);
        assert!(CharIndex::from_char('!').is_err());
        assert!(CharIndex::from_char('é').is_err());
        let c = CharIndex::at(3, 5).unwrap();
        assert_eq!(c.index(), 29);
        assert_eq!((c.row(), c.col()), (3, 5));
        for c in CharIndex::all() {
            assert_eq!(CharIndex::from_char(c.to_char()).unwrap(), c);
        }
    }

    #[test]
    fn bcip_is_balanced_and_deterministic() {
        let a = color_bcip(&mut ChaCha8Rng::seed_from_u64(7));
        let b = color_bcip(&mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        assert_eq!(a.key_counts(), [16; 4]);
    }

    #[test]
    fn bcip_differs_across_seeds() {
        let colorings: Vec<_> = (0..100u64)
            .map(|s| color_bcip(&mut ChaCha8Rng::seed_from_u64(s)))
            .collect();
        let distinct: std::collections::HashSet<_> = colorings.iter().collect();
        assert!(distinct.len() >= 99, "only {} distinct", distinct.len());
    }

    #[test]
    fn grouplocked_keeps_the_fig3_group_monochrome() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let round1 = color_bcip(&mut rng);
        let groups = SubgroupPartition::from_coloring(&round1);
        for _ in 0..5 {
            let next = color_icip_grouplocked(&groups, &mut rng).unwrap();
            assert!(next.is_balanced());
            let used: std::collections::HashSet<_> = groups
                .subgroups()
                .iter()
                .map(|g| {
                    let k = next.key_at(g.first().unwrap());
                    assert!(g.iter().all(|c| next.key_at(c) == k));
                    k
                })
                .collect();
            assert_eq!(used.len(), 4);
        }

        // The caption group, padded out to a 4×16 partition.
        let caption = CharSet::parse("ADGJLdeflovxy068").unwrap();
        let rest: Vec<CharIndex> = CharSet::FULL.difference(caption).iter().collect();
        let mut parts = vec![caption];
        parts.extend(rest.chunks(16).map(|ch| ch.iter().copied().collect::<CharSet>()));
        let partition = SubgroupPartition::new(parts).unwrap();
        for _ in 0..6 {
            let col = color_icip_grouplocked(&partition, &mut rng).unwrap();
            let a = col.key_at(CharIndex::from_char('A').unwrap());
            assert!(caption.iter().all(|c| col.key_at(c) == a));
        }
    }

    #[test]
    fn grouplocked_rejects_bad_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(color_icip_grouplocked(&fig4_quads(), &mut rng).is_err());
        assert!(color_icip_grouplocked(&SubgroupPartition::empty(), &mut rng).is_err());
    }

    #[test]
    fn grouplocked_bijections_are_uniform() {
        // 24 key-to-group bijections; chi-square against the uniform law.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let groups = SubgroupPartition::from_coloring(&color_bcip(&mut rng));
        let mut counts = std::collections::HashMap::new();
        let trials = 10_000;
        for _ in 0..trials {
            let col = color_icip_grouplocked(&groups, &mut rng).unwrap();
            let perm: Vec<u8> = groups
                .subgroups()
                .iter()
                .map(|g| col.key_at(g.first().unwrap()).ordinal())
                .collect();
            *counts.entry(perm).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 24);
        let p = 1.0 / 24.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for (perm, &n) in &counts {
            let dev = (n as f64 - trials as f64 * p).abs();
            assert!(dev <= 3.5 * sigma, "{perm:?}: {n}");
        }
    }

    #[test]
    fn subgrouped_quads_get_distinct_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let partition = fig4_quads();
        for _ in 0..50 {
            let col = color_icip_subgrouped(&partition, &mut rng).unwrap();
            assert_eq!(col.key_counts(), [16; 4]);
            let keys: std::collections::HashSet<_> = partition
                .subgroups()
                .iter()
                .map(|g| {
                    let k = col.key_at(g.first().unwrap());
                    assert!(g.iter().all(|c| col.key_at(c) == k));
                    k
                })
                .collect();
            assert_eq!(keys.len(), 4);
        }
    }

    #[test]
    fn subgrouped_singletons_leave_fifteen_fillers_per_key() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let partition = SubgroupPartition::new(
            "AGy0".chars().map(|c| CharSet::parse(&c.to_string()).unwrap()).collect(),
        )
        .unwrap();
        assert_eq!(partition.filler().len(), 60);
        let col = color_icip_subgrouped(&partition, &mut rng).unwrap();
        let mut filler_counts = [0; 4];
        for c in partition.filler().iter() {
            filler_counts[col.key_at(c) as usize] += 1;
        }
        assert_eq!(filler_counts, [15; 4]);
    }

    #[test]
    fn subgrouped_rejects_bad_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let unequal = SubgroupPartition::new(vec![
            CharSet::parse("AB").unwrap(),
            CharSet::parse("C").unwrap(),
        ])
        .unwrap();
        assert!(color_icip_subgrouped(&unequal, &mut rng).is_err());
        let five: Vec<CharSet> = "ABCDE".chars().map(|c| CharSet::parse(&c.to_string()).unwrap()).collect();
        assert!(SubgroupPartition::new(five).is_err());
        let overlapping = vec![CharSet::parse("AB").unwrap(), CharSet::parse("BC").unwrap()];
        assert!(SubgroupPartition::new(overlapping).is_err());
        let one = SubgroupPartition::new(vec![CharSet::parse("A").unwrap()]).unwrap();
        assert!(color_icip_subgrouped(&one, &mut rng).is_err());
    }

    #[test]
    fn wire_format_rejects_unbalanced_arrays() {
        let col = color_bcip(&mut ChaCha8Rng::seed_from_u64(1));
        let json = serde_json::to_string(&col).unwrap();
        let back: GridColoring = serde_json::from_str(&json).unwrap();
        assert_eq!(back, col);
        assert!(serde_json::from_str::<GridColoring>(&format!("[{}]", vec!["0"; 64].join(","))).is_err());
        assert!(GridColoring::from_ordinals(&[0; 10]).is_err());
        let mut bad = col.ordinals();
        bad[0] = 9;
        assert_eq!(GridColoring::from_ordinals(&bad), Err(GridError::BadOrdinal(9)));
    }

    #[test]
    fn labels_are_presentation_only() {
        assert_eq!(ColorKey::K0.label(Palette::Colors), "green");
        assert_eq!(ColorKey::K3.label(Palette::Symbols), "dots");
        assert_eq!(ColorKey::from_ordinal(2).unwrap(), ColorKey::K2);
    }

    proptest! {
        #[test]
        fn every_strategy_is_balanced(seed in any::<u64>(), size in 1usize..=16, count in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cells: Vec<CharIndex> = CharIndex::all().collect();
            cells.shuffle(&mut rng);
            let groups: Vec<CharSet> = cells
                .chunks(size)
                .take(count)
                .map(|ch| ch.iter().copied().collect())
                .collect();
            let partition = SubgroupPartition::new(groups).unwrap();
            let col = color_icip_subgrouped(&partition, &mut rng).unwrap();
            prop_assert!(col.is_balanced());
            let mut keys = std::collections::HashSet::new();
            for g in partition.subgroups() {
                let k = col.key_at(g.first().unwrap());
                prop_assert!(g.iter().all(|c| col.key_at(c) == k));
                keys.insert(k);
            }
            prop_assert_eq!(keys.len(), count);
            prop_assert!(color_bcip(&mut rng).is_balanced());
        }

        #[test]
        fn charset_text_roundtrip(bits in any::<u64>()) {
            let set = CharSet::from_bits(bits);
            prop_assert_eq!(CharSet::parse(&set.to_string()).unwrap(), set);
            prop_assert_eq!(set.iter().count(), set.len());
        }
    }
}
