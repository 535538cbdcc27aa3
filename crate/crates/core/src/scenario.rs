//! Negotiation scenarios: ideal prices, reservation prices and the agreement zone.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid price order: buyer ideal {buyer_ideal} must be below seller ideal {seller_ideal}")]
    InvalidPriceOrder {
        buyer_ideal: Price,
        seller_ideal: Price,
    },
    #[error("zone fraction {0} outside (0, 1]")]
    InvalidZoneFraction(Decimal),
    #[error("invalid price `{0}`")]
    InvalidPrice(String),
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario file parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} scenario entr{} rejected:{}", .0.len(), if .0.len() == 1 { "y" } else { "ies" }, render_rejections(.0))]
    Rejected(Vec<EntryError>),
}

fn render_rejections(errors: &[EntryError]) -> String {
    errors.iter().map(|e| format!("\n  {e}")).collect()
}

/// A rejected scenario entry and the line its object starts on.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryError {
    pub index: usize,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for EntryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entry {} (line {}): {}", self.index, self.line, self.message)
    }
}

/// Exact decimal price. Serialized as a plain JSON number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price(Decimal);

impl Price {
    pub fn new(value: Decimal) -> Self {
        Price(value.normalize())
    }

    /// Parses a JSON-style float through its shortest decimal representation,
    /// so `144.99_f64` becomes exactly `144.99`.
    pub fn from_f64(value: f64) -> Result<Self, ScenarioError> {
        if !value.is_finite() {
            return Err(ScenarioError::InvalidPrice(value.to_string()));
        }
        Decimal::from_str(&value.to_string())
            .map(Price::new)
            .map_err(|_| ScenarioError::InvalidPrice(value.to_string()))
    }

    pub fn from_cents(cents: i64) -> Self {
        Price::new(Decimal::new(cents, 2))
    }

    pub fn decimal(self) -> Decimal {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().expect("decimal prices fit in f64")
    }

    /// Rounded to cents, half away from zero.
    pub fn to_cents(self) -> Price {
        Price::new(
            self.0
                .round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero),
        )
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl FromStr for Price {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Decimal::from_str(s.trim())
            .map(Price::new)
            .map_err(|_| ScenarioError::InvalidPrice(s.to_string()))
    }
}

impl From<i64> for Price {
    fn from(v: i64) -> Self {
        Price::new(Decimal::from(v))
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.fract().is_zero() {
            if let Some(i) = self.0.to_i64() {
                return serializer.serialize_i64(i);
            }
        }
        serializer.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Price::from_f64(v).map_err(D::Error::custom),
            Raw::Text(s) => s.parse().map_err(D::Error::custom),
        }
    }
}

/// Where the agreement zone sits inside `[buyer_ideal, seller_ideal]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZonePlacement {
    #[default]
    Centered,
    /// Zone starts at the buyer's ideal price.
    BuyerAligned,
    /// Zone ends at the seller's ideal price.
    SellerAligned,
}

/// Product categories used for per-category aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Electronics,
    #[serde(alias = "phone")]
    Phones,
    Furniture,
    #[serde(alias = "bike")]
    Bikes,
    Housing,
    #[serde(alias = "car")]
    Cars,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Electronics => "electronics",
            Category::Phones => "phones",
            Category::Furniture => "furniture",
            Category::Bikes => "bikes",
            Category::Housing => "housing",
            Category::Cars => "cars",
        }
    }
}

/// The default 70% agreement zone.
pub fn default_zone_fraction() -> Decimal {
    Decimal::new(7, 1)
}

/// Computes `(seller_reservation, buyer_reservation)`. With the default
/// centered placement the zone is `m ± fraction·W/2` where `W` is the ideal
/// price gap and `m` its midpoint.
pub fn derive_zone(
    buyer_ideal: Price,
    seller_ideal: Price,
    zone_fraction: Decimal,
    placement: ZonePlacement,
) -> Result<(Price, Price), ScenarioError> {
    if buyer_ideal.0 <= Decimal::ZERO || buyer_ideal >= seller_ideal {
        return Err(ScenarioError::InvalidPriceOrder {
            buyer_ideal,
            seller_ideal,
        });
    }
    if zone_fraction <= Decimal::ZERO || zone_fraction > Decimal::ONE {
        return Err(ScenarioError::InvalidZoneFraction(zone_fraction));
    }
    let (lo, hi) = (buyer_ideal.0, seller_ideal.0);
    let width = hi - lo;
    let zone = zone_fraction * width;
    let (seller_res, buyer_res) = match placement {
        ZonePlacement::Centered => {
            let mid = (lo + hi) / Decimal::TWO;
            let half = zone / Decimal::TWO;
            (mid - half, mid + half)
        }
        ZonePlacement::BuyerAligned => (lo, lo + zone),
        ZonePlacement::SellerAligned => (hi - zone, hi),
    };
    Ok((Price::new(seller_res), Price::new(buyer_res)))
}

/// One raw entry of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub product: String,
    #[serde(default)]
    pub description: String,
    pub listing_price: Price,
    pub target_price: Price,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

/// A single-issue bargaining scenario with private price intervals.
///
/// Seller works over `[seller_reservation, seller_ideal]`, buyer over
/// `[buyer_ideal, buyer_reservation]`; the overlap is the agreement zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationScenario {
    pub product: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    pub seller_ideal: Price,
    pub buyer_ideal: Price,
    pub seller_reservation: Price,
    pub buyer_reservation: Price,
    pub zone_fraction: Decimal,
}

impl NegotiationScenario {
    pub fn new(
        product: impl Into<String>,
        description: impl Into<String>,
        seller_ideal: Price,
        buyer_ideal: Price,
        zone_fraction: Decimal,
        placement: ZonePlacement,
    ) -> Result<Self, ScenarioError> {
        let (seller_reservation, buyer_reservation) =
            derive_zone(buyer_ideal, seller_ideal, zone_fraction, placement)?;
        Ok(NegotiationScenario {
            product: product.into(),
            description: description.into(),
            category: None,
            seller_ideal,
            buyer_ideal,
            seller_reservation,
            buyer_reservation,
            zone_fraction,
        })
    }

    pub fn from_entry(
        entry: &ScenarioEntry,
        zone_fraction: Decimal,
        placement: ZonePlacement,
    ) -> Result<Self, ScenarioError> {
        let mut s = Self::new(
            entry.product.clone(),
            entry.description.clone(),
            entry.listing_price,
            entry.target_price,
            zone_fraction,
            placement,
        )?;
        s.category = entry.category;
        Ok(s)
    }

    pub fn with_category(mut self, category: Category) -> Self {
        self.category = Some(category);
        self
    }

    /// Checks the ordering invariants of the four prices.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let ok = self.buyer_ideal.0 > Decimal::ZERO
            && self.buyer_ideal < self.seller_ideal
            && self.seller_reservation < self.buyer_reservation
            && self.buyer_ideal <= self.seller_reservation
            && self.buyer_reservation <= self.seller_ideal;
        if ok {
            Ok(())
        } else {
            Err(ScenarioError::InvalidPriceOrder {
                buyer_ideal: self.buyer_ideal,
                seller_ideal: self.seller_ideal,
            })
        }
    }

    /// Midpoint of the agreement zone, where joint utility peaks.
    pub fn zone_midpoint(&self) -> Price {
        Price::new((self.seller_reservation.0 + self.buyer_reservation.0) / Decimal::TWO)
    }
}

/// Parses a JSON array of scenario entries and derives each zone. Every
/// invalid entry is reported with the line its object starts on.
pub fn parse_scenarios(
    text: &str,
    zone_fraction: Decimal,
    placement: ZonePlacement,
) -> Result<Vec<NegotiationScenario>, ScenarioError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    let lines = element_start_lines(text);
    let mut scenarios = Vec::with_capacity(values.len());
    let mut rejected = Vec::new();
    for (index, value) in values.into_iter().enumerate() {
        let line = lines.get(index).copied().unwrap_or(0);
        let result = serde_json::from_value::<ScenarioEntry>(value)
            .map_err(|e| e.to_string())
            .and_then(|entry| {
                NegotiationScenario::from_entry(&entry, zone_fraction, placement)
                    .map_err(|e| e.to_string())
            });
        match result {
            Ok(s) => scenarios.push(s),
            Err(message) => rejected.push(EntryError {
                index,
                line,
                message,
            }),
        }
    }
    if rejected.is_empty() {
        Ok(scenarios)
    } else {
        Err(ScenarioError::Rejected(rejected))
    }
}

pub fn load_scenarios(
    path: impl AsRef<Path>,
    zone_fraction: Decimal,
    placement: ZonePlacement,
) -> Result<Vec<NegotiationScenario>, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenarios(&text, zone_fraction, placement)
}

/// 1-based line numbers where each element of a top-level JSON array begins.
fn element_start_lines(text: &str) -> Vec<usize> {
    let mut lines = Vec::new();
    let mut line = 1;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let mut expecting = false;
    for c in text.chars() {
        if c == '\n' {
            line += 1;
        }
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        if depth == 1 && expecting && !c.is_whitespace() && c != ']' {
            lines.push(line);
            expecting = false;
        }
        match c {
            '"' => in_string = true,
            '[' | '{' => {
                depth += 1;
                if depth == 1 {
                    expecting = true;
                }
            }
            ']' | '}' => depth = depth.saturating_sub(1),
            ',' if depth == 1 => expecting = true,
            _ => {}
        }
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dec(s: &str) -> Decimal {
        Decimal::from_str(s).unwrap()
    }

    #[test]
    fn stereo_speaker_zone() {
        let (s, b) = derive_zone(30.into(), 50.into(), dec("0.7"), ZonePlacement::Centered).unwrap();
        assert_eq!(s, 33.into());
        assert_eq!(b, 47.into());
        assert_eq!(b.decimal() - s.decimal(), dec("14"));
    }

    #[test]
    fn full_fraction_is_whole_interval() {
        let (s, b) = derive_zone(30.into(), 50.into(), Decimal::ONE, ZonePlacement::Centered).unwrap();
        assert_eq!((s, b), (30.into(), 50.into()));
    }

    #[test]
    fn placements_keep_width() {
        for placement in [ZonePlacement::BuyerAligned, ZonePlacement::SellerAligned] {
            let (s, b) = derive_zone(144.into(), 160.into(), dec("0.7"), placement).unwrap();
            assert_eq!(b.decimal() - s.decimal(), dec("11.2"));
            assert!(s >= 144.into() && b <= 160.into());
        }
    }

    #[test]
    fn bad_order_and_fraction() {
        assert!(matches!(
            derive_zone(50.into(), 50.into(), dec("0.7"), ZonePlacement::Centered),
            Err(ScenarioError::InvalidPriceOrder { .. })
        ));
        assert!(matches!(
            derive_zone(30.into(), 50.into(), dec("0"), ZonePlacement::Centered),
            Err(ScenarioError::InvalidZoneFraction(_))
        ));
        assert!(matches!(
            derive_zone(30.into(), 50.into(), dec("1.01"), ZonePlacement::Centered),
            Err(ScenarioError::InvalidZoneFraction(_))
        ));
    }

    #[test]
    fn parse_iphone_entry() {
        let text = r#"[{"product":"iPhone 5S","description":"like new","listing_price":160,"target_price":144,"category":"phones"}]"#;
        let s = parse_scenarios(text, dec("0.7"), ZonePlacement::Centered).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].seller_ideal, 160.into());
        assert_eq!(s[0].buyer_ideal, 144.into());
        assert_eq!(s[0].seller_reservation, "146.4".parse().unwrap());
        assert_eq!(s[0].buyer_reservation, "157.6".parse().unwrap());
        assert_eq!(s[0].category, Some(Category::Phones));
        s[0].validate().unwrap();
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_scenarios("", dec("0.7"), ZonePlacement::Centered).unwrap().is_empty());
        assert!(parse_scenarios("[]", dec("0.7"), ZonePlacement::Centered).unwrap().is_empty());
    }

    #[test]
    fn rejects_target_above_listing_with_line() {
        let text = "[\n  {\"product\":\"a\",\"listing_price\":10,\"target_price\":5},\n  {\"product\":\"b\",\n   \"listing_price\":10,\"target_price\":10}\n]";
        match parse_scenarios(text, dec("0.7"), ZonePlacement::Centered) {
            Err(ScenarioError::Rejected(errs)) => {
                assert_eq!(errs.len(), 1);
                assert_eq!(errs[0].index, 1);
                assert_eq!(errs[0].line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_scenarios("[\n{\"product\": }", dec("0.7"), ZonePlacement::Centered) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decimal_prices_parse_exactly() {
        let p: Price = serde_json::from_str("144.99").unwrap();
        assert_eq!(p.decimal(), dec("144.99"));
        let q: Price = serde_json::from_str("\"0.10\"").unwrap();
        assert_eq!(q.decimal(), dec("0.1"));
        assert_eq!(serde_json::to_string(&Price::from(160)).unwrap(), "160");
        assert_eq!(serde_json::to_string(&p).unwrap(), "144.99");
    }

    #[test]
    fn scenario_round_trip() {
        let s = NegotiationScenario::new("Bike", "red", "199.99".parse().unwrap(), "120.5".parse().unwrap(), dec("0.7"), ZonePlacement::Centered)
            .unwrap()
            .with_category(Category::Bikes);
        let json = serde_json::to_string(&s).unwrap();
        let back: NegotiationScenario = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
