//! Pattern helpers shared by the scripted agents and the rule-based detector.

use std::sync::LazyLock;

use regex::Regex;

static AMOUNT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\$\s*((?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?)|\b((?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?)\s*(?:dollars|bucks|usd)\b",
    )
    .expect("valid amount pattern")
});

static STRATEGY_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[strategy:\s*([^\]]*?)\s*\]").expect("valid tag pattern"));

/// Currency amounts in order of appearance: `$80`, `$ 1,200.50`, `75 dollars`.
pub fn currency_amounts(text: &str) -> Vec<f64> {
    AMOUNT
        .captures_iter(text)
        .filter_map(|c| c.get(1).or_else(|| c.get(2)))
        .filter_map(|m| m.as_str().replace(',', "").parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .collect()
}

/// The `[strategy: ...]` tag scripted agents append to their replies.
pub fn strategy_tag(text: &str) -> Option<String> {
    STRATEGY_TAG
        .captures(text)
        .map(|c| c[1].to_string())
        .filter(|s| !s.is_empty())
}

/// Text with any strategy tag removed.
pub fn strip_strategy_tag(text: &str) -> String {
    STRATEGY_TAG.replace_all(text, "").trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amounts() {
        assert_eq!(currency_amounts("Its price is $80."), vec![80.0]);
        assert_eq!(currency_amounts("$80 is too much, $75 then"), vec![80.0, 75.0]);
        assert_eq!(currency_amounts("I'd pay 1,250 dollars"), vec![1250.0]);
        assert_eq!(currency_amounts("$ 41.25"), vec![41.25]);
        assert_eq!(currency_amounts("I have 3 kids"), Vec::<f64>::new());
        assert_eq!(currency_amounts("$41.234567891"), vec![41.234567891]);
    }

    #[test]
    fn tags() {
        assert_eq!(strategy_tag("I can do $60. [strategy: hold firm]").as_deref(), Some("hold firm"));
        assert_eq!(strategy_tag("nothing"), None);
        assert_eq!(strategy_tag("[strategy: ]"), None);
        assert_eq!(strip_strategy_tag("Deal. [strategy: x]"), "Deal.");
    }
}
