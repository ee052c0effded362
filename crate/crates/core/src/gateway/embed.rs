//! Feature-hashed bag-of-words embedding used by the deterministic backend.

use crate::scalar::Real;

pub const EMBEDDING_DIM: usize = 256;

// Function words carry no topical signal; dropping them keeps "more shared
// content words" as the only driver of similarity.
const STOPWORDS: &[&str] = &[
    "a", "about", "all", "also", "am", "an", "and", "are", "as", "at", "be", "been", "but", "by",
    "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "his",
    "how", "i", "if", "in", "into", "is", "it", "its", "me", "my", "of", "on", "or", "our", "s",
    "she", "so", "that", "the", "their", "them", "there", "they", "this", "to", "up", "was", "we",
    "were", "what", "when", "where", "which", "who", "will", "with", "would", "you", "your",
];

/// Lowercased alphanumeric word tokens with function words removed.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| STOPWORDS.binary_search(&t.as_str()).is_err())
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Signed feature hashing of word tokens, L2-normalized.
///
/// Text with no content tokens hashes its whole lowercased form so the
/// output is always a unit vector.
pub fn hash_embedding<F: Real>(text: &str) -> Vec<F> {
    let mut acc = vec![0.0f64; EMBEDDING_DIM];
    let mut toks = tokens(text);
    if toks.is_empty() {
        toks.push(text.trim().to_lowercase());
    }
    for tok in &toks {
        let h = fnv1a(tok.as_bytes());
        let bucket = (h % EMBEDDING_DIM as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        // every token cancelled out; fall back to a fixed axis
        acc[fnv1a(text.as_bytes()) as usize % EMBEDDING_DIM] = 1.0;
        return acc.into_iter().map(F::of).collect();
    }
    acc.into_iter().map(|v| F::of(v / norm)).collect()
}

/// L2-normalizes an arbitrary vector (live embeddings are not guaranteed unit).
pub fn normalize<F: Real>(v: &[f64]) -> Option<Vec<F>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return None;
    }
    Some(v.iter().map(|x| F::of(x / norm)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn stopword_table_is_sorted() {
        let mut sorted = STOPWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, STOPWORDS);
    }

    #[test]
    fn unit_norm_and_deterministic() {
        for text in ["chemistry test", "the", "Isabella Rodriguez is setting out the pastries", "!!"] {
            let a: Vec<f64> = hash_embedding(text);
            let b: Vec<f64> = hash_embedding(text);
            assert_eq!(a, b);
            assert!((dot(&a, &a).sqrt() - 1.0).abs() < 1e-6, "{text}");
        }
    }

    #[test]
    fn f32_embedding_is_unit_too() {
        let v: Vec<f32> = hash_embedding("Klaus Mueller is reading a book on gentrification");
        let n: f32 = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((n - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tokenization_drops_function_words() {
        assert_eq!(tokens("Do you know of Maria Lopez?"), vec!["know", "maria", "lopez"]);
    }
}
