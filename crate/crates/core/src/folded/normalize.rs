use std::borrow::Cow;

use regex::Regex;

use crate::error::{Error, Result};

const MAX_REWRITE_PASSES: usize = 16;
const MAX_LABEL_GROWTH: usize = 4096;

/// Rewrites frame labels before stacks are assembled, so that frames from
/// different builds of the same code can be identified.
///
/// Every rule is idempotent: normalizing an already-normalized label is a
/// no-op.
#[derive(Debug, Clone, Default)]
pub enum FrameNormalizer {
    #[default]
    Identity,
    /// Drops trailing `:<digits>` suffixes (`work:12` becomes `work`).
    StripTrailingLocation,
    /// Applies `replace_all` until the label stops changing.
    RegexReplace { pattern: Regex, replacement: String },
}

impl FrameNormalizer {
    pub fn regex(pattern: &str, replacement: impl Into<String>) -> Result<Self> {
        Ok(FrameNormalizer::RegexReplace {
            pattern: Regex::new(pattern)?,
            replacement: replacement.into(),
        })
    }

    pub fn normalize<'a>(&self, label: &'a str) -> Result<Cow<'a, str>> {
        match self {
            FrameNormalizer::Identity => Ok(Cow::Borrowed(label)),
            FrameNormalizer::StripTrailingLocation => Ok(Cow::Borrowed(strip_location(label))),
            FrameNormalizer::RegexReplace {
                pattern,
                replacement,
            } => {
                let mut current = Cow::Borrowed(label);
                for _ in 0..MAX_REWRITE_PASSES {
                    let next = pattern.replace_all(&current, replacement.as_str());
                    if next == current {
                        return Ok(current);
                    }
                    if next.len() > label.len() + MAX_LABEL_GROWTH {
                        break;
                    }
                    current = Cow::Owned(next.into_owned());
                }
                Err(Error::NormalizerDiverged(label.to_owned()))
            }
        }
    }
}

/// Strips every trailing `:<digits>` group, keeping at least one character.
fn strip_location(mut label: &str) -> &str {
    loop {
        let digits = label.len() - label.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        if digits == 0 {
            return label;
        }
        let head = &label[..label.len() - digits];
        match head.strip_suffix(':') {
            Some(rest) if !rest.trim_end().is_empty() => label = rest.trim_end(),
            _ => return label,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strip_location_cases() {
        let n = FrameNormalizer::StripTrailingLocation;
        assert_eq!(n.normalize("work:12").unwrap(), "work");
        assert_eq!(n.normalize("work:12:5").unwrap(), "work");
        assert_eq!(n.normalize("work").unwrap(), "work");
        assert_eq!(n.normalize("v2").unwrap(), "v2");
        assert_eq!(n.normalize(":12").unwrap(), ":12");
        assert_eq!(n.normalize("a:").unwrap(), "a:");
        assert_eq!(n.normalize("f (x.py):3").unwrap(), "f (x.py)");
    }

    #[test]
    fn regex_reaches_fixed_point() {
        let n = FrameNormalizer::regex(r"0x[0-9a-f]+", "ADDR").unwrap();
        assert_eq!(n.normalize("fn@0x7fff12").unwrap(), "fn@ADDR");
        let n = FrameNormalizer::regex(r"a", "aa").unwrap();
        assert!(matches!(
            n.normalize("a"),
            Err(Error::NormalizerDiverged(_))
        ));
        let n = FrameNormalizer::regex(r"__", "_").unwrap();
        assert_eq!(n.normalize("a____b").unwrap(), "a_b");
    }

    proptest! {
        #[test]
        fn normalizers_are_idempotent(label in "[a-z_:0-9 ()]{1,16}") {
            let rules = [
                FrameNormalizer::Identity,
                FrameNormalizer::StripTrailingLocation,
                FrameNormalizer::regex(r"[0-9]+", "N").unwrap(),
            ];
            for rule in &rules {
                let once = rule.normalize(&label).unwrap().into_owned();
                let twice = rule.normalize(&once).unwrap().into_owned();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
