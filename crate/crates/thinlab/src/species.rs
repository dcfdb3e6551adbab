use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ThinlabError;

/// Tree species handled by the toolkit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Spruce,
    Pine,
    Birch,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::Spruce, Species::Pine, Species::Birch];

    pub fn name(self) -> &'static str {
        match self {
            Species::Spruce => "spruce",
            Species::Pine => "pine",
            Species::Birch => "birch",
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Species {
    type Err = ThinlabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spruce" => Ok(Species::Spruce),
            "pine" => Ok(Species::Pine),
            "birch" => Ok(Species::Birch),
            other => Err(ThinlabError::Config(format!("unknown species '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_names() {
        assert_eq!("spruce".parse::<Species>().unwrap(), Species::Spruce);
        assert_eq!(" Birch ".parse::<Species>().unwrap(), Species::Birch);
        assert!("larch".parse::<Species>().is_err());
    }
}
