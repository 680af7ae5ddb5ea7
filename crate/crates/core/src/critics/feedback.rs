use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Closed vocabulary of machine-readable problem tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProblemTag {
    NoProgress,
    Overshoot,
    WrongObject,
    StalledAtStage(usize),
}

impl fmt::Display for ProblemTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemTag::NoProgress => f.write_str("no-progress"),
            ProblemTag::Overshoot => f.write_str("overshoot"),
            ProblemTag::WrongObject => f.write_str("wrong-object"),
            ProblemTag::StalledAtStage(i) => write!(f, "stalled-at-stage({i})"),
        }
    }
}

impl FromStr for ProblemTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "no-progress" => Ok(ProblemTag::NoProgress),
            "overshoot" => Ok(ProblemTag::Overshoot),
            "wrong-object" => Ok(ProblemTag::WrongObject),
            other => other
                .strip_prefix("stalled-at-stage(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|n| n.trim().parse().ok())
                .map(ProblemTag::StalledAtStage)
                .ok_or_else(|| {
                    format!(
                        "unknown problem tag `{other}` (allowed: no-progress, overshoot, wrong-object, stalled-at-stage(<i>))"
                    )
                }),
        }
    }
}

impl TryFrom<String> for ProblemTag {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ProblemTag> for String {
    fn from(t: ProblemTag) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<ProblemTag>,
}

impl Problem {
    pub fn tagged(tag: ProblemTag, text: impl Into<String>) -> Self {
        Self { text: text.into(), tag: Some(tag) }
    }
}

/// Structured critique of a trained policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub video_description: String,
    pub potential_problems: Vec<Problem>,
    pub possible_improvements: Vec<String>,
}

impl Feedback {
    /// Placeholder handed to the refiner before any policy has been trained.
    pub fn initial() -> Self {
        Self {
            video_description: "No policy has been trained yet; write an initial reward program for the task.".into(),
            potential_problems: Vec::new(),
            possible_improvements: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.video_description.trim().is_empty() {
            return Err("`video_description` must not be empty".into());
        }
        if let Some(i) = self.potential_problems.iter().position(|p| p.text.trim().is_empty()) {
            return Err(format!("potential_problems[{i}].text must not be empty"));
        }
        Ok(())
    }

    /// Parses the JSON wire form; all three sections are required.
    pub fn parse(text: &str) -> Result<Self, Vec<String>> {
        let fb: Feedback = serde_json::from_str(text).map_err(|e| vec![format!("feedback: {e}")])?;
        fb.validate().map_err(|e| vec![e])?;
        Ok(fb)
    }

    pub fn tags(&self) -> impl Iterator<Item = ProblemTag> + '_ {
        self.potential_problems.iter().filter_map(|p| p.tag)
    }

    pub fn has_tag(&self, tag: ProblemTag) -> bool {
        self.tags().any(|t| t == tag)
    }

    /// Plain-text form used in refinement prompts.
    pub fn render(&self) -> String {
        let mut out = format!("Description: {}\nPotential problems:\n", self.video_description);
        if self.potential_problems.is_empty() {
            out.push_str("- none\n");
        }
        for p in &self.potential_problems {
            match p.tag {
                Some(t) => out.push_str(&format!("- [{t}] {}\n", p.text)),
                None => out.push_str(&format!("- {}\n", p.text)),
            }
        }
        out.push_str("Possible improvements:\n");
        if self.possible_improvements.is_empty() {
            out.push_str("- none\n");
        }
        for i in &self.possible_improvements {
            out.push_str(&format!("- {i}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for t in [ProblemTag::NoProgress, ProblemTag::Overshoot, ProblemTag::WrongObject, ProblemTag::StalledAtStage(3)]
        {
            assert_eq!(t.to_string().parse::<ProblemTag>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<ProblemTag>(&json).unwrap(), t);
        }
        assert_eq!(serde_json::to_string(&ProblemTag::StalledAtStage(1)).unwrap(), "\"stalled-at-stage(1)\"");
        assert!("stalled".parse::<ProblemTag>().is_err());
    }

    #[test]
    fn parse_requires_all_sections() {
        let ok = r#"{"video_description": "arm idles", "potential_problems": [{"text": "lid closed", "tag": "no-progress"}, {"text": "slow"}], "possible_improvements": []}"#;
        let fb = Feedback::parse(ok).unwrap();
        assert!(fb.has_tag(ProblemTag::NoProgress));
        assert_eq!(fb.potential_problems[1].tag, None);

        let missing = r#"{"video_description": "arm idles", "potential_problems": []}"#;
        assert!(Feedback::parse(missing).unwrap_err()[0].contains("possible_improvements"));
        let blank = r#"{"video_description": " ", "potential_problems": [], "possible_improvements": []}"#;
        assert!(Feedback::parse(blank).is_err());
        let bad_tag = r#"{"video_description": "x", "potential_problems": [{"text": "t", "tag": "sad"}], "possible_improvements": []}"#;
        assert!(Feedback::parse(bad_tag).unwrap_err()[0].contains("unknown problem tag"));
    }
}
