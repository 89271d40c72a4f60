//! Vocabulary and caption framing.
//!
//! Reserved indices: `<pad>`=0, `<BOS>`=1, `<EOS>`=2, `<unk>`=3.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<BOS>", "<EOS>", "<unk>"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Builds from a full token list whose first four entries are the
    /// reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len()
            || tokens.iter().zip(RESERVED).any(|(t, r)| t != r)
        {
            return Err(Error::Config(
                "vocabulary must start with <pad>, <BOS>, <EOS>, <unk>".into(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Config(alloc::format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Vocabulary with only the reserved tokens followed by `words`.
    pub fn with_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(words.iter().map(|w| w.as_ref().to_string()));
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of `token`, falling back to `<unk>`.
    pub fn lookup(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        self.tokens.get(index as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Lowercased whitespace tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Reserved tokens first, then tokens with count ≥ `min_count` by descending
/// count and lexicographically within ties.
pub fn build_vocab<S: AsRef<str>>(captions: &[Vec<S>], min_count: usize) -> Result<Vocabulary> {
    if captions.is_empty() {
        return Err(Error::Empty("build_vocab"));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for caption in captions {
        for tok in caption {
            let tok = tok.as_ref();
            if RESERVED.contains(&tok) {
                continue;
            }
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let words: Vec<&str> = ranked.into_iter().map(|(t, _)| t).collect();
    Vocabulary::with_words(&words)
}

/// Word indices of one caption followed by a single terminal `<EOS>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRecord {
    pub video_id: String,
    tokens: Vec<u32>,
}

impl CaptionRecord {
    pub fn new(video_id: impl Into<String>, tokens: Vec<u32>, max_len: usize) -> Result<Self> {
        let ok_end = tokens.last() == Some(&EOS);
        let body_ok = tokens[..tokens.len().saturating_sub(1)]
            .iter()
            .all(|&t| t != PAD && t != BOS && t != EOS);
        if !ok_end || !body_ok {
            return Err(Error::Config(
                "caption must hold words only, terminated by exactly one <EOS>".into(),
            ));
        }
        if tokens.len() > max_len {
            return Err(Error::Config(alloc::format!(
                "caption of {} tokens exceeds maximum length {max_len}",
                tokens.len()
            )));
        }
        Ok(Self {
            video_id: video_id.into(),
            tokens,
        })
    }

    /// Words followed by `<EOS>`; also the per-step training targets.
    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn words(&self) -> &[u32] {
        &self.tokens[..self.tokens.len() - 1]
    }

    /// `<BOS>` followed by the words; the teacher-forced inputs.
    pub fn teacher_input(&self) -> Vec<u32> {
        let mut inp = vec![BOS];
        inp.extend_from_slice(self.words());
        inp
    }
}

/// A framed caption plus its fixed-length padded views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramedCaption {
    pub record: CaptionRecord,
    /// `<BOS> w_0 .. w_{k-1} <pad>...`, length `T`.
    pub teacher_input: Vec<u32>,
    /// `w_0 .. w_{k-1} <EOS> <pad>...`, length `T`.
    pub target: Vec<u32>,
}

/// Truncates to `T − 1` words, maps unknown words to `<unk>` and appends
/// `<EOS>`; padded views are filled with `<pad>` past the end.
pub fn frame_caption<S: AsRef<str>>(
    video_id: &str,
    raw: &[S],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<FramedCaption> {
    if raw.is_empty() {
        return Err(Error::Empty("frame_caption"));
    }
    if max_len < 2 {
        return Err(Error::Config("maximum caption length must be at least 2".into()));
    }
    let mut tokens: Vec<u32> = raw
        .iter()
        .take(max_len - 1)
        .map(|w| match vocab.lookup(w.as_ref()) {
            PAD | BOS | EOS => UNK,
            i => i,
        })
        .collect();
    tokens.push(EOS);
    let record = CaptionRecord::new(video_id, tokens, max_len)?;
    let mut teacher_input = record.teacher_input();
    teacher_input.resize(max_len, PAD);
    let mut target = record.tokens().to_vec();
    target.resize(max_len, PAD);
    Ok(FramedCaption {
        record,
        teacher_input,
        target,
    })
}

/// Word strings of a token sequence, stopping at `<EOS>`.
pub fn detokenize(tokens: &[u32], vocab: &Vocabulary) -> Vec<String> {
    tokens
        .iter()
        .take_while(|&&t| t != EOS)
        .filter(|&&t| t != PAD)
        .map(|&t| vocab.token(t).unwrap_or("<unk>").to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus() -> Vec<Vec<&'static str>> {
        vec![vec!["a", "dog"], vec!["a", "cat"]]
    }

    #[test]
    fn build_vocab_orders_by_count_then_lexically() {
        let v = build_vocab(&corpus(), 1).unwrap();
        assert_eq!(
            v.tokens(),
            ["<pad>", "<BOS>", "<EOS>", "<unk>", "a", "cat", "dog"]
        );
        let v2 = build_vocab(&corpus(), 2).unwrap();
        assert_eq!(v2.tokens(), ["<pad>", "<BOS>", "<EOS>", "<unk>", "a"]);
        assert_eq!(v2.lookup("dog"), UNK);
        assert_eq!(build_vocab(&corpus(), 1).unwrap(), v);
    }

    #[test]
    fn frames_and_pads() {
        let v = build_vocab(&corpus(), 1).unwrap();
        let f = frame_caption("x", &["a", "dog"], &v, 10).unwrap();
        let (a, dog) = (v.lookup("a"), v.lookup("dog"));
        assert_eq!(f.target, [a, dog, EOS, PAD, PAD, PAD, PAD, PAD, PAD, PAD]);
        assert_eq!(f.teacher_input[..3], [BOS, a, dog]);
        assert!(f.teacher_input[3..].iter().all(|&t| t == PAD));
    }

    #[test]
    fn truncates_to_max_len() {
        let v = build_vocab(&corpus(), 1).unwrap();
        let words = ["a"; 12];
        let f = frame_caption("x", &words, &v, 10).unwrap();
        assert_eq!(f.record.words().len(), 9);
        assert_eq!(f.record.tokens().len(), 10);
        assert_eq!(*f.record.tokens().last().unwrap(), EOS);
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = build_vocab(&corpus(), 1).unwrap();
        let f = frame_caption("x", &["a", "zebra"], &v, 10).unwrap();
        assert_eq!(f.record.words(), &[v.lookup("a"), UNK]);
        assert!(frame_caption::<&str>("x", &[], &v, 10).is_err());
    }

    #[test]
    fn reserved_order_enforced() {
        let bad = vec!["<BOS>".to_string(), "<pad>".into(), "<EOS>".into(), "<unk>".into()];
        assert!(Vocabulary::from_tokens(bad).is_err());
    }

    proptest! {
        #[test]
        fn frame_detokenize_roundtrip(words in proptest::collection::vec(0usize..3, 1..12)) {
            let v = build_vocab(&corpus(), 1).unwrap();
            let names = ["a", "cat", "dog"];
            let raw: Vec<&str> = words.iter().map(|&i| names[i]).collect();
            let f = frame_caption("x", &raw, &v, 10).unwrap();
            let back = detokenize(f.record.tokens(), &v);
            let again = frame_caption("x", &back, &v, 10).unwrap();
            prop_assert_eq!(again, f);
        }
    }
}
