//! Where, if anywhere, the target text already appears in the input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text_catalog::canonical_text;
use crate::verbalizer::VerbalizedQuery;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPosition {
    InTask,
    InNeighborhood,
    NotInInput,
}

impl TargetPosition {
    pub const ALL: [TargetPosition; 3] = [
        TargetPosition::InTask,
        TargetPosition::InNeighborhood,
        TargetPosition::NotInInput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetPosition::InTask => "in_task",
            TargetPosition::InNeighborhood => "in_neighborhood",
            TargetPosition::NotInInput => "not_in_input",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TargetPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetPosition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TargetPosition::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown target position `{s}`")))
    }
}

/// Case-sensitive substring match after NFC; the task span wins over
/// neighbor spans. An empty target is never found.
pub fn classify_target_position(vq: &VerbalizedQuery, target_text: &str) -> TargetPosition {
    let target = canonical_text(target_text);
    if target.is_empty() {
        return TargetPosition::NotInInput;
    }
    let contains = |span: &str| canonical_text(span).contains(target.as_str());
    if contains(vq.task()) {
        TargetPosition::InTask
    } else if vq.neighbors().any(contains) {
        TargetPosition::InNeighborhood
    } else {
        TargetPosition::NotInInput
    }
}

/// Per-class counts and exact-match sums.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PositionReport {
    pub counts: [usize; 3],
    pub exact_matches: [usize; 3],
}

impl PositionReport {
    pub fn add(&mut self, position: TargetPosition, exact_match: u8) {
        self.counts[position.slot()] += 1;
        self.exact_matches[position.slot()] += exact_match as usize;
    }

    pub fn merge(mut self, other: &PositionReport) -> Self {
        for i in 0..3 {
            self.counts[i] += other.counts[i];
            self.exact_matches[i] += other.exact_matches[i];
        }
        self
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn count(&self, position: TargetPosition) -> usize {
        self.counts[position.slot()]
    }

    /// Share of all queries in `position`; 0 for an empty report.
    pub fn frequency(&self, position: TargetPosition) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.count(position) as f64 / n as f64,
        }
    }

    /// EM within `position`, or `None` when the class is empty.
    pub fn exact_match(&self, position: TargetPosition) -> Option<f64> {
        match self.count(position) {
            0 => None,
            n => Some(self.exact_matches[position.slot()] as f64 / n as f64),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("position\tcount\tfrequency\texact_match\n");
        for p in TargetPosition::ALL {
            let em = self
                .exact_match(p)
                .map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
            out.push_str(&format!(
                "{p}\t{}\t{:.6}\t{em}\n",
                self.count(p),
                self.frequency(p)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vq(input: &str) -> VerbalizedQuery {
        VerbalizedQuery::from_input(input.to_string(), String::new())
    }

    #[test]
    fn classes() {
        let q = vq("predict Apple Inc. parent organization [SEP] founded by Steve Jobs");
        assert_eq!(
            classify_target_position(&q, "Apple"),
            TargetPosition::InTask
        );
        let q = vq("predict Steve Jobs place of death [SEP] residence Palo Alto");
        assert_eq!(
            classify_target_position(&q, "Palo Alto"),
            TargetPosition::InNeighborhood
        );
        assert_eq!(
            classify_target_position(&q, "palo alto"),
            TargetPosition::NotInInput
        );
        assert_eq!(classify_target_position(&q, ""), TargetPosition::NotInInput);
    }

    #[test]
    fn separator_is_not_part_of_any_span() {
        let q = vq("predict a r [SEP] s b");
        assert_eq!(
            classify_target_position(&q, "[SEP]"),
            TargetPosition::NotInInput
        );
    }

    #[test]
    fn nfc_forms_match() {
        let q = vq("predict x r [SEP] born in Zu\u{308}rich");
        assert_eq!(
            classify_target_position(&q, "Z\u{fc}rich"),
            TargetPosition::InNeighborhood
        );
    }

    #[test]
    fn report_frequencies() {
        let mut r = PositionReport::default();
        r.add(TargetPosition::InTask, 1);
        r.add(TargetPosition::NotInInput, 0);
        r.add(TargetPosition::NotInInput, 1);
        let sum: f64 = TargetPosition::ALL.iter().map(|&p| r.frequency(p)).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(r.exact_match(TargetPosition::NotInInput), Some(0.5));
        assert_eq!(r.exact_match(TargetPosition::InNeighborhood), None);
        assert_eq!(
            "in_task".parse::<TargetPosition>().unwrap(),
            TargetPosition::InTask
        );
    }
}
