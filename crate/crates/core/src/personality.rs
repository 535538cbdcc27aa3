//! Big Five trait space, profile sampling and persona instructions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Adjective table shipped with the crate (70 bipolar pairs).
pub const BUNDLED_ADJECTIVES: &str = include_str!("../data/adjectives.tsv");

/// Number of pairs the bundled table must contain.
pub const BUNDLED_PAIR_COUNT: usize = 70;

#[derive(Debug, Error, PartialEq)]
pub enum PersonalityError {
    #[error("dimension {dimension} has {available} adjective pairs, {requested} requested")]
    InsufficientAdjectives {
        dimension: Dimension,
        available: usize,
        requested: usize,
    },
    #[error("adjective list is empty")]
    EmptyAdjectiveList,
    #[error("adjective table line {line}: {message}")]
    TableParse { line: usize, message: String },
    #[error("adjective table invalid: {0}")]
    TableInvalid(String),
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("unknown trait level `{0}`")]
    UnknownLevel(String),
}

/// One of the five personality dimensions. The declaration order is the
/// serialization order everywhere in the crate.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum Dimension {
    Ope,
    Con,
    Ext,
    Agr,
    Neu,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Ope,
        Dimension::Con,
        Dimension::Ext,
        Dimension::Agr,
        Dimension::Neu,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Dimension::Ope => "OPE",
            Dimension::Con => "CON",
            Dimension::Ext => "EXT",
            Dimension::Agr => "AGR",
            Dimension::Neu => "NEU",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Dimension {
    type Err = PersonalityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "OPE" => Ok(Dimension::Ope),
            "CON" => Ok(Dimension::Con),
            "EXT" => Ok(Dimension::Ext),
            "AGR" => Ok(Dimension::Agr),
            "NEU" => Ok(Dimension::Neu),
            _ => Err(PersonalityError::UnknownDimension(s.to_string())),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Negative,
    Positive,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Degree {
    Low,
    Moderate,
    High,
}

impl Degree {
    pub const ALL: [Degree; 3] = [Degree::Low, Degree::Moderate, Degree::High];

    /// Prefix applied to an adjective for this degree.
    pub fn modifier(self) -> &'static str {
        match self {
            Degree::High => "very ",
            Degree::Low => "a bit ",
            Degree::Moderate => "",
        }
    }
}

/// A point of the six-valued trait scale: polarity times degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraitLevel {
    pub polarity: Polarity,
    pub degree: Degree,
}

impl TraitLevel {
    /// All six levels from highly negative to highly positive.
    pub const ALL: [TraitLevel; 6] = [
        TraitLevel::new(Polarity::Negative, Degree::High),
        TraitLevel::new(Polarity::Negative, Degree::Moderate),
        TraitLevel::new(Polarity::Negative, Degree::Low),
        TraitLevel::new(Polarity::Positive, Degree::Low),
        TraitLevel::new(Polarity::Positive, Degree::Moderate),
        TraitLevel::new(Polarity::Positive, Degree::High),
    ];

    pub const fn new(polarity: Polarity, degree: Degree) -> Self {
        TraitLevel { polarity, degree }
    }

    /// Signed strength: `---` is -3, `+++` is +3, zero is never produced.
    pub fn default_ordinal(self) -> i8 {
        let magnitude = match self.degree {
            Degree::Low => 1,
            Degree::Moderate => 2,
            Degree::High => 3,
        };
        match self.polarity {
            Polarity::Negative => -magnitude,
            Polarity::Positive => magnitude,
        }
    }

    /// Compact notation such as `+`, `--` or `+++`.
    pub fn symbol(self) -> String {
        let sign = match self.polarity {
            Polarity::Negative => '-',
            Polarity::Positive => '+',
        };
        std::iter::repeat_n(sign, self.default_ordinal().unsigned_abs() as usize).collect()
    }
}

impl fmt::Display for TraitLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol())
    }
}

impl FromStr for TraitLevel {
    type Err = PersonalityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let n = s.len();
        let polarity = if !s.is_empty() && s.chars().all(|c| c == '+') {
            Polarity::Positive
        } else if !s.is_empty() && s.chars().all(|c| c == '-') {
            Polarity::Negative
        } else {
            return Err(PersonalityError::UnknownLevel(s.to_string()));
        };
        let degree = match n {
            1 => Degree::Low,
            2 => Degree::Moderate,
            3 => Degree::High,
            _ => return Err(PersonalityError::UnknownLevel(s.to_string())),
        };
        Ok(TraitLevel::new(polarity, degree))
    }
}

/// Numeric coding of the trait scale used by the correlation analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrdinalEncoding {
    /// Values for the levels in [`TraitLevel::ALL`] order.
    pub values: [f64; 6],
}

impl Default for OrdinalEncoding {
    fn default() -> Self {
        OrdinalEncoding {
            values: [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
        }
    }
}

impl OrdinalEncoding {
    pub fn encode(&self, level: TraitLevel) -> f64 {
        let idx = TraitLevel::ALL
            .iter()
            .position(|l| *l == level)
            .expect("ALL covers every level");
        self.values[idx]
    }
}

/// A complete Big Five profile: one level per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PersonalityProfile {
    levels: [TraitLevel; 5],
}

impl PersonalityProfile {
    pub fn new(levels: [TraitLevel; 5]) -> Self {
        PersonalityProfile { levels }
    }

    /// Builds a profile where every dimension has the same level.
    pub fn uniform(level: TraitLevel) -> Self {
        PersonalityProfile { levels: [level; 5] }
    }

    pub fn level(&self, dimension: Dimension) -> TraitLevel {
        self.levels[dimension.index()]
    }

    pub fn set(&mut self, dimension: Dimension, level: TraitLevel) {
        self.levels[dimension.index()] = level;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Dimension, TraitLevel)> + '_ {
        Dimension::ALL.iter().map(move |d| (*d, self.level(*d)))
    }
}

impl fmt::Display for PersonalityProfile {
    /// Renders as `OPE+ CON--- EXT- AGR+ NEU++`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(d, l)| format!("{d}{l}")).collect();
        f.write_str(&parts.join(" "))
    }
}

// Profiles serialize as a map keyed by dimension code with symbolic levels,
// e.g. {"OPE":"+","CON":"---",...}, which keeps transcripts readable.
impl Serialize for PersonalityProfile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(5))?;
        for (d, l) in self.iter() {
            map.serialize_entry(d.code(), &l.symbol())?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for PersonalityProfile {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw: BTreeMap<String, String> = BTreeMap::deserialize(deserializer)?;
        if raw.len() != 5 {
            return Err(D::Error::custom(format!(
                "profile needs 5 dimensions, got {}",
                raw.len()
            )));
        }
        let mut levels = [None; 5];
        for (k, v) in &raw {
            let d: Dimension = k.parse().map_err(D::Error::custom)?;
            let l: TraitLevel = v.parse().map_err(D::Error::custom)?;
            if levels[d.index()].replace(l).is_some() {
                return Err(D::Error::custom(format!("duplicate dimension {d}")));
            }
        }
        let levels = levels.map(|l| l.expect("five distinct keys fill all slots"));
        Ok(PersonalityProfile { levels })
    }
}

/// Draws each dimension independently and uniformly from the six levels.
pub fn sample_profile<R: Rng + ?Sized>(rng: &mut R) -> PersonalityProfile {
    let mut levels = [TraitLevel::ALL[0]; 5];
    for slot in levels.iter_mut() {
        *slot = TraitLevel::ALL[rng.random_range(0..TraitLevel::ALL.len())];
    }
    PersonalityProfile { levels }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjectivePair {
    pub dimension: Dimension,
    pub negative: String,
    pub positive: String,
}

impl AdjectivePair {
    pub fn word(&self, polarity: Polarity) -> &str {
        match polarity {
            Polarity::Negative => &self.negative,
            Polarity::Positive => &self.positive,
        }
    }
}

/// Bipolar adjective pairs keyed by dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjectiveTable {
    pairs: Vec<AdjectivePair>,
}

impl AdjectiveTable {
    /// Parses `dimension<TAB>negative<TAB>positive` lines. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, PersonalityError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 3 {
                return Err(PersonalityError::TableParse {
                    line,
                    message: format!("expected 3 tab-separated fields, got {}", fields.len()),
                });
            }
            let dimension = fields[0]
                .parse()
                .map_err(|e: PersonalityError| PersonalityError::TableParse {
                    line,
                    message: e.to_string(),
                })?;
            let (negative, positive) = (fields[1].trim(), fields[2].trim());
            if negative.is_empty() || positive.is_empty() || negative == positive {
                return Err(PersonalityError::TableParse {
                    line,
                    message: format!("bad pair `{negative}` / `{positive}`"),
                });
            }
            pairs.push(AdjectivePair {
                dimension,
                negative: negative.to_string(),
                positive: positive.to_string(),
            });
        }
        let table = AdjectiveTable { pairs };
        for d in Dimension::ALL {
            if table.pairs_for(d).next().is_none() {
                return Err(PersonalityError::TableInvalid(format!(
                    "dimension {d} has no pairs"
                )));
            }
        }
        Ok(table)
    }

    /// Loads the bundled table and checks it holds exactly 70 pairs.
    pub fn bundled() -> Result<Self, PersonalityError> {
        let table = Self::parse(BUNDLED_ADJECTIVES)?;
        if table.len() != BUNDLED_PAIR_COUNT {
            return Err(PersonalityError::TableInvalid(format!(
                "expected {BUNDLED_PAIR_COUNT} pairs, found {}",
                table.len()
            )));
        }
        Ok(table)
    }

    pub fn from_pairs(pairs: Vec<AdjectivePair>) -> Self {
        AdjectiveTable { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[AdjectivePair] {
        &self.pairs
    }

    pub fn pairs_for(&self, dimension: Dimension) -> impl Iterator<Item = &AdjectivePair> {
        self.pairs.iter().filter(move |p| p.dimension == dimension)
    }

    /// Finds the dimension and polarity an adjective belongs to.
    pub fn lookup(&self, word: &str) -> Option<(Dimension, Polarity)> {
        self.pairs.iter().find_map(|p| {
            if p.negative == word {
                Some((p.dimension, Polarity::Negative))
            } else if p.positive == word {
                Some((p.dimension, Polarity::Positive))
            } else {
                None
            }
        })
    }
}

/// Picks `n` adjectives per dimension on the profile's polarity side, without
/// replacement, applies the degree modifier, and shuffles all `5n` entries.
pub fn select_adjectives<R: Rng + ?Sized>(
    profile: &PersonalityProfile,
    table: &AdjectiveTable,
    n: usize,
    rng: &mut R,
) -> Result<Vec<String>, PersonalityError> {
    for d in Dimension::ALL {
        let available = table.pairs_for(d).count();
        if n == 0 || available < n {
            return Err(PersonalityError::InsufficientAdjectives {
                dimension: d,
                available,
                requested: n,
            });
        }
    }
    let mut out = Vec::with_capacity(5 * n);
    for (d, level) in profile.iter() {
        let pairs: Vec<&AdjectivePair> = table.pairs_for(d).collect();
        for pair in pairs.choose_multiple(rng, n) {
            out.push(format!(
                "{}{}",
                level.degree.modifier(),
                pair.word(level.polarity)
            ));
        }
    }
    out.shuffle(rng);
    Ok(out)
}

/// Fills the single-line personality template.
pub fn render_personality_instruction(adjectives: &[String]) -> Result<String, PersonalityError> {
    if adjectives.is_empty() {
        return Err(PersonalityError::EmptyAdjectiveList);
    }
    Ok(format!(
        "You have following personality: {}. Reflect your personality in the negotiation process.",
        adjectives.join(", ")
    ))
}

/// The modified adjectives given to one agent, plus the rendered instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaInstruction {
    pub adjectives: Vec<String>,
    pub rendered: String,
}

impl PersonaInstruction {
    pub fn new(adjectives: Vec<String>) -> Result<Self, PersonalityError> {
        let rendered = render_personality_instruction(&adjectives)?;
        Ok(PersonaInstruction {
            adjectives,
            rendered,
        })
    }

    /// Samples adjectives for `profile` and renders them.
    pub fn for_profile<R: Rng + ?Sized>(
        profile: &PersonalityProfile,
        table: &AdjectiveTable,
        n: usize,
        rng: &mut R,
    ) -> Result<Self, PersonalityError> {
        Self::new(select_adjectives(profile, table, n, rng)?)
    }

    /// Comma-separated adjective list as it appears inside prompts.
    pub fn list(&self) -> String {
        self.adjectives.join(", ")
    }

    /// Recovers the trait level for every dimension whose adjectives appear in
    /// `list`, assuming the modifier conventions used by [`select_adjectives`].
    pub fn infer_levels(list: &str, table: &AdjectiveTable) -> BTreeMap<Dimension, TraitLevel> {
        let mut found = BTreeMap::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (degree, word) = if let Some(w) = item.strip_prefix("very ") {
                (Degree::High, w)
            } else if let Some(w) = item.strip_prefix("a bit ") {
                (Degree::Low, w)
            } else {
                (Degree::Moderate, item)
            };
            if let Some((d, polarity)) = table.lookup(word) {
                found.entry(d).or_insert(TraitLevel::new(polarity, degree));
            }
        }
        found
    }
}
