use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of force sensors under the cushion.
pub const N_SENSORS: usize = 10;
/// Number of posture classes, including the empty seat.
pub const N_CLASSES: usize = 8;

/// Sitting posture classes. The discriminant is the class index used by
/// every model, one-hot vector and binary artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PostureLabel {
    Empty = 0,
    Upright = 1,
    Slouching = 2,
    LeanLeft = 3,
    LeanRight = 4,
    LeftLegCrossed = 5,
    RightLegCrossed = 6,
    LeanBack = 7,
}

impl PostureLabel {
    pub const ALL: [PostureLabel; N_CLASSES] = [
        PostureLabel::Empty,
        PostureLabel::Upright,
        PostureLabel::Slouching,
        PostureLabel::LeanLeft,
        PostureLabel::LeanRight,
        PostureLabel::LeftLegCrossed,
        PostureLabel::RightLegCrossed,
        PostureLabel::LeanBack,
    ];

    /// The seven occupied postures in collection order.
    pub const OCCUPIED: [PostureLabel; 7] = [
        PostureLabel::Upright,
        PostureLabel::Slouching,
        PostureLabel::LeanLeft,
        PostureLabel::LeanRight,
        PostureLabel::LeftLegCrossed,
        PostureLabel::RightLegCrossed,
        PostureLabel::LeanBack,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PostureLabel::Empty => "Empty",
            PostureLabel::Upright => "Upright",
            PostureLabel::Slouching => "Slouching",
            PostureLabel::LeanLeft => "LeanLeft",
            PostureLabel::LeanRight => "LeanRight",
            PostureLabel::LeftLegCrossed => "LeftLegCrossed",
            PostureLabel::RightLegCrossed => "RightLegCrossed",
            PostureLabel::LeanBack => "LeanBack",
        }
    }

    pub fn is_occupied(self) -> bool {
        self != PostureLabel::Empty
    }
}

impl fmt::Display for PostureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PostureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|label| label.name() == s.trim())
            .ok_or_else(|| Error::InvalidLabel(s.to_string()))
    }
}
