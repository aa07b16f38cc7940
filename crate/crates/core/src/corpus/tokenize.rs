/// Splits on unicode whitespace, lowercases, and strips leading and trailing
/// non-alphanumeric characters from every token. Tokens left empty are dropped.
///
/// No stemming, lemmatization or stopword removal is applied.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let lower = raw.to_lowercase();
            let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
            (!trimmed.is_empty()).then(|| trimmed.to_string())
        })
        .collect()
}
