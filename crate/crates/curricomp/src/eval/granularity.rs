//! Granularity levels and the label-collapse taxonomy.
//!
//! Evaluation runs at four granularities produced by merging rubric labels:
//!
//! | 5-level | 4-level | 3-level | 2-level  |
//! |---------|---------|---------|----------|
//! | 3       | 3       | 3       | covered  |
//! | 2       | 2       | 1&2     | covered  |
//! | 1       | 1       | 1&2     | covered  |
//! | 0       | 0&NA    | 0&NA    | 0&NA     |
//! | NA      | 0&NA    | 0&NA    | 0&NA     |
//!
//! Ordinal class codes ascend from the merged bottom class (e.g. at 3-level:
//! 0&NA=0, 1&2=1, 3=2). At the 5-level, NA keeps its own class (code 4) but
//! has no ordinal value.

use serde::{Deserialize, Serialize};

use crate::annotation::AlignmentLabel;

/// Classification granularity: 5-, 4-, 3-, or 2-class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GranularityLevel {
    L5,
    L4,
    L3,
    L2,
}

impl GranularityLevel {
    pub const ALL: [GranularityLevel; 4] = [
        GranularityLevel::L5,
        GranularityLevel::L4,
        GranularityLevel::L3,
        GranularityLevel::L2,
    ];

    /// Number of classes at this level.
    pub fn class_count(self) -> usize {
        match self {
            GranularityLevel::L5 => 5,
            GranularityLevel::L4 => 4,
            GranularityLevel::L3 => 3,
            GranularityLevel::L2 => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GranularityLevel::L5 => "L5",
            GranularityLevel::L4 => "L4",
            GranularityLevel::L3 => "L3",
            GranularityLevel::L2 => "L2",
        }
    }

    pub fn parse(s: &str) -> Option<GranularityLevel> {
        GranularityLevel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
    }

    /// Display string for a class code at this level.
    pub fn class_display(self, code: usize) -> &'static str {
        match self {
            GranularityLevel::L5 => ["0", "1", "2", "3", "NA"][code],
            GranularityLevel::L4 => ["0&NA", "1", "2", "3"][code],
            GranularityLevel::L3 => ["0&NA", "1&2", "3"][code],
            GranularityLevel::L2 => ["0&NA", "covered"][code],
        }
    }
}

impl std::fmt::Display for GranularityLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rubric label merged to one granularity level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollapsedLabel {
    pub level: GranularityLevel,
    pub code: usize,
    pub display: &'static str,
}

/// Merge a rubric label into its class at the given level.
pub fn collapse(label: AlignmentLabel, level: GranularityLevel) -> CollapsedLabel {
    use AlignmentLabel::*;
    let code = match level {
        GranularityLevel::L5 => match label {
            S0 => 0,
            S1 => 1,
            S2 => 2,
            S3 => 3,
            Na => 4,
        },
        GranularityLevel::L4 => match label {
            S0 | Na => 0,
            S1 => 1,
            S2 => 2,
            S3 => 3,
        },
        GranularityLevel::L3 => match label {
            S0 | Na => 0,
            S1 | S2 => 1,
            S3 => 2,
        },
        GranularityLevel::L2 => match label {
            S0 | Na => 0,
            S1 | S2 | S3 => 1,
        },
    };
    CollapsedLabel {
        level,
        code,
        display: level.class_display(code),
    }
}

/// Signed prediction deviation (predicted minus gold) at a level.
///
/// At the 5-level the difference is defined only when both labels carry a
/// numeric value; NA on either side yields `None`. At coarser levels NA is
/// merged into the bottom class, so the difference is always defined on the
/// collapsed codes.
pub fn score_difference(
    gold: AlignmentLabel,
    pred: AlignmentLabel,
    level: GranularityLevel,
) -> Option<f64> {
    match level {
        GranularityLevel::L5 => Some(pred.numeric_value()? - gold.numeric_value()?),
        _ => {
            let g = collapse(gold, level).code as f64;
            let p = collapse(pred, level).code as f64;
            Some(p - g)
        }
    }
}
