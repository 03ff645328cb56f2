//! Zero-shot chat prompts, answer parsing and up-to-three-answer Hits@k.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::verbalizer::{VerbalizedQuery, SEPARATOR};

pub const SYSTEM_PROMPT: &str = "You will be provided with a incomplete triplet from the Wikidata knowledge graph. Your task is to complete the triplet with a tail (subject) based on the given triplet head (object) and relation. Your answer must only include the tail of the triplet with prefix 'Tail:'. Do not include relation into the answer.";

pub const SYSTEM_PROMPT_WITH_NEIGHBORS: &str = "You will be provided with a incomplete triplet from the Wikidata knowledge graph. Your task is to complete the triplet with a tail (subject) based on the given triplet head (object) and relation. Triplet to complete IS NOT in the list of related nodes, but it may contain helpful clues. Your answer must only include the tail of the triplet with prefix 'Tail:'. Do not include relation into the answer.";

pub const MAX_LLM_ANSWERS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub system_text: String,
    pub user_text: String,
}

pub fn build_prompt(vq: &VerbalizedQuery, with_neighbors: bool) -> PromptPair {
    if with_neighbors {
        let block = vq.neighbors().collect::<Vec<_>>().join(SEPARATOR);
        PromptPair {
            system_text: SYSTEM_PROMPT_WITH_NEIGHBORS.to_string(),
            user_text: format!(
                "Adjacent relations: {block}\nTriplet to complete: {}.",
                vq.task()
            ),
        }
    } else {
        PromptPair {
            system_text: SYSTEM_PROMPT.to_string(),
            user_text: format!("Triplet to complete: {}.", vq.task()),
        }
    }
}

/// One prompt line for an external chat model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub query_id: String,
    pub system_text: String,
    pub user_text: String,
    pub target_text: String,
}

/// Raw chat-model replies for one query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub query_id: String,
    pub answers: Vec<String>,
}

/// Drops a leading `Tail:` (any case), keeps the first line, trims. An
/// empty string means no usable answer.
pub fn parse_answer(raw: &str) -> String {
    let s = raw.trim_start();
    let s = match s.get(..5) {
        Some(p) if p.eq_ignore_ascii_case("tail:") => &s[5..],
        _ => s,
    };
    s.lines().next().unwrap_or("").trim().to_string()
}

fn is_edge_punct(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(
            c,
            '“' | '”'
                | '‘'
                | '’'
                | '«'
                | '»'
                | '„'
                | '‚'
                | '‹'
                | '›'
                | '…'
                | '。'
                | '、'
                | '¡'
                | '¿'
        )
}

pub fn normalize(text: &str) -> String {
    let mut current: String = text.nfc().collect();
    // lowercasing can leave non-NFC sequences; iterate to a fixed point
    for _ in 0..4 {
        let lowered: String = current.to_lowercase().nfc().collect();
        let trimmed = lowered.trim_matches(is_edge_punct);
        let next = trimmed.split_whitespace().collect::<Vec<_>>().join(" ");
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Indices of the `k` answers taken for scoring. Each index draws a key
/// from a stream fixed by `(seed, stream)`; indices are taken in key
/// order, so the pick for a smaller `k` is a prefix of the larger pick.
pub fn select_predictions(n: usize, k: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut keyed: Vec<(u64, usize)> = (0..n).map(|i| (rng.next_u64(), i)).collect();
    keyed.sort_unstable();
    keyed.into_iter().take(k).map(|(_, i)| i).collect()
}

pub fn gpt_hits(
    predictions: &[String],
    target: &str,
    k: usize,
    seed: u64,
    stream: u64,
) -> Result<u8> {
    if predictions.len() > MAX_LLM_ANSWERS {
        return Err(Error::Invalid(format!(
            "{} answers given, at most {MAX_LLM_ANSWERS} are scored",
            predictions.len()
        )));
    }
    if k == 0 {
        return Err(Error::Invalid("Hits@k needs k >= 1".into()));
    }
    let target = normalize(target);
    let hit = select_predictions(predictions.len(), k, seed, stream)
        .into_iter()
        .map(|i| normalize(&predictions[i]))
        .any(|p| !p.is_empty() && p == target);
    Ok(u8::from(hit))
}

/// Stable per-query stream for the selection RNG.
pub fn query_stream(query_id: &str) -> u64 {
    match crate::dataset::parse_query_id(query_id) {
        Some((idx, inverse)) => idx as u64 * 2 + u64::from(inverse),
        None => {
            // FNV-1a
            query_id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
                (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
            })
        }
    }
}
