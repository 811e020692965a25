use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::MdalError;

/// The six multi-domain architectures.
///
/// | kind         | extractors                 | classifier(s)          | discriminator            |
/// |--------------|----------------------------|------------------------|--------------------------|
/// | sdl-joint    | one F for all domains      | one C                  | none                     |
/// | sdl-separate | one private F per domain   | one C per domain       | none                     |
/// | dann         | one shared F               | one C                  | D on F (reversed grads)  |
/// | mdnet        | one shared F               | one C per domain       | none                     |
/// | man          | shared F + private F per k | one C on `[shared;private]` | D on shared F       |
/// | can          | as man                     | as man                 | D on `[shared; class probs]` |
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArchitectureKind {
    #[serde(rename = "sdl-joint")]
    SdlJoint,
    #[serde(rename = "sdl-separate")]
    SdlSeparate,
    #[serde(rename = "dann")]
    Dann,
    #[serde(rename = "mdnet")]
    Mdnet,
    #[serde(rename = "man")]
    Man,
    #[serde(rename = "can")]
    Can,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 6] = [
        ArchitectureKind::SdlJoint,
        ArchitectureKind::SdlSeparate,
        ArchitectureKind::Dann,
        ArchitectureKind::Mdnet,
        ArchitectureKind::Man,
        ArchitectureKind::Can,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::SdlJoint => "sdl-joint",
            ArchitectureKind::SdlSeparate => "sdl-separate",
            ArchitectureKind::Dann => "dann",
            ArchitectureKind::Mdnet => "mdnet",
            ArchitectureKind::Man => "man",
            ArchitectureKind::Can => "can",
        }
    }

    pub fn has_shared_extractor(self) -> bool {
        !matches!(self, ArchitectureKind::SdlSeparate)
    }

    pub fn has_private_extractors(self) -> bool {
        matches!(
            self,
            ArchitectureKind::SdlSeparate | ArchitectureKind::Man | ArchitectureKind::Can
        )
    }

    pub fn per_domain_classifiers(self) -> bool {
        matches!(self, ArchitectureKind::SdlSeparate | ArchitectureKind::Mdnet)
    }

    pub fn has_discriminator(self) -> bool {
        matches!(
            self,
            ArchitectureKind::Dann | ArchitectureKind::Man | ArchitectureKind::Can
        )
    }

    /// Shared and private features are concatenated before the classifier.
    pub fn is_share_private(self) -> bool {
        matches!(self, ArchitectureKind::Man | ArchitectureKind::Can)
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchitectureKind {
    type Err = MdalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArchitectureKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| MdalError::Config(format!("unknown architecture '{s}'")))
    }
}
