//! Small text helpers shared by ingestion, tagging and the lexical metrics.

/// Split on Unicode whitespace and strip non-alphanumeric characters from
/// both token edges. Tokens that are left empty are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Case-insensitive substring test.
pub fn contains_ci(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return true;
    }
    haystack.to_lowercase().contains(&needle.to_lowercase())
}

pub fn any_contains_ci(haystack: &str, needles: &[String]) -> bool {
    if needles.is_empty() {
        return false;
    }
    let lower = haystack.to_lowercase();
    needles.iter().any(|n| lower.contains(&n.to_lowercase()))
}

// Function words dropped from topic-model vocabularies.
const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "before", "but", "by", "can", "could", "did", "do", "does", "during", "each", "for", "from",
    "had", "has", "have", "he", "her", "hers", "herself", "him", "himself", "his", "how", "i", "if",
    "in", "into", "is", "it", "its", "may", "more", "most", "no", "not", "of", "on", "one", "only",
    "or", "other", "our", "out", "over", "she", "should", "so", "some", "such", "than", "that",
    "the", "their", "them", "then", "there", "these", "they", "this", "those", "through", "to",
    "two", "under", "up", "was", "we", "were", "what", "when", "where", "which", "while", "who",
    "whom", "will", "with", "would", "you", "your",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopword_table_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
        assert!(is_stopword("the"));
        assert!(!is_stopword("novelist"));
    }

    #[test]
    fn tokenize_strips_edge_punctuation() {
        assert_eq!(tokenize("  \"Quoted,\" it's-fine. "), vec!["Quoted", "it's-fine"]);
        assert_eq!(tokenize("... -- !!"), Vec::<String>::new());
    }

    #[test]
    fn case_insensitive_match() {
        assert!(contains_ci("American Women Novelists", "women"));
        assert!(!contains_ci("Actors", "women"));
        assert!(any_contains_ci("Actor stubs", &["STUBS".to_string()]));
        assert!(!any_contains_ci("Actor stubs", &[]));
    }
}
