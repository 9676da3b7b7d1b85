use inkflux_core::textmetrics::{
    edit_similarity, levenshtein, lexical_cosine, max_pairwise_influence, split_sentences, word_count, Providers,
    SimilarityMetricId,
};
use proptest::prelude::*;

const WORD_FIXTURE: &str = include_str!("fixtures/fifty_sentences.txt");

/// Independent count: whitespace chunks that still hold a letter or digit
/// after hyphen/dash runs are split apart.
fn naive_word_count(text: &str) -> usize {
    text.split_whitespace()
        .flat_map(|chunk| chunk.split("--"))
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .count()
}

#[test]
fn fifty_sentence_fixture() {
    let expected: usize = 368;
    assert_eq!(split_sentences(WORD_FIXTURE).len(), 50);
    assert_eq!(naive_word_count(WORD_FIXTURE), expected);
    assert_eq!(word_count(WORD_FIXTURE), expected);
}

fn sentence() -> impl Strategy<Value = String> {
    "[A-Z][a-z]{0,6}( [a-z]{1,6}){0,6}[.!?]"
}

fn prose() -> impl Strategy<Value = String> {
    prop::collection::vec((sentence(), "[ \n]{1,2}"), 0..8)
        .prop_map(|parts| parts.into_iter().map(|(s, ws)| format!("{s}{ws}")).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn metrics_symmetric_and_bounded(a in "\\PC{0,24}", b in "\\PC{0,24}") {
        for (x, y) in [(edit_similarity(&a, &b), edit_similarity(&b, &a)), (lexical_cosine(&a, &b), lexical_cosine(&b, &a))] {
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert_eq!(edit_similarity(&a, &a), 1.0);
    }

    #[test]
    fn levenshtein_triangle(a in "[abc]{0,10}", b in "[abc]{0,10}", c in "[abc]{0,10}") {
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
    }

    #[test]
    fn sentences_reassemble_input(text in prose()) {
        let sentences = split_sentences(&text);
        let chars: Vec<char> = text.chars().collect();
        let mut rebuilt = String::new();
        let mut at = 0;
        for s in &sentences {
            let (start, end) = s.char_span;
            let gap: String = chars[at..start].iter().collect();
            prop_assert!(gap.trim().is_empty());
            rebuilt.push_str(&gap);
            let body: String = chars[start..end].iter().collect();
            prop_assert_eq!(&body, &s.text);
            rebuilt.push_str(&body);
            at = end;
        }
        let tail: String = chars[at..].iter().collect();
        prop_assert!(tail.trim().is_empty());
        rebuilt.push_str(&tail);
        prop_assert_eq!(rebuilt, text);
    }

    #[test]
    fn verbatim_copy_scores_one(text in prose(), extra in sentence()) {
        let sug = split_sentences(&format!("{text}{extra}"));
        let target = sug.last().unwrap().text.clone();
        let sug_texts: Vec<&str> = sug.iter().map(|s| s.text.as_str()).collect();
        let score = max_pairwise_influence(SimilarityMetricId::Edit, &sug_texts, &[target.as_str()], &Providers::default())
            .unwrap();
        prop_assert_eq!(score, Some(1.0));
    }
}
