/// Characters per token assumed by [`estimate_tokens`].
pub const CHARS_PER_TOKEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("prompt of ~{estimate} tokens exceeds the ceiling of {ceiling}")]
pub struct OversizedPrompt {
    pub estimate: usize,
    pub ceiling: usize,
}

/// `ceil(chars / 4)`. Endpoint-agnostic and monotone in prompt length.
pub fn estimate_tokens(prompt: &str) -> usize {
    prompt.chars().count().div_ceil(CHARS_PER_TOKEN)
}

pub fn enforce_ceiling(prompt: &str, ceiling: Option<usize>) -> Result<usize, OversizedPrompt> {
    let estimate = estimate_tokens(prompt);
    match ceiling {
        Some(ceiling) if estimate > ceiling => Err(OversizedPrompt { estimate, ceiling }),
        _ => Ok(estimate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn heuristic_values() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens(&"x".repeat(4000)), 1000);
        assert_eq!(estimate_tokens("abcde"), 2);
    }

    #[test]
    fn ceiling_names_limit() {
        let err = enforce_ceiling(&"x".repeat(41), Some(10)).unwrap_err();
        assert_eq!(
            err,
            OversizedPrompt {
                estimate: 11,
                ceiling: 10
            }
        );
        assert!(err.to_string().contains("ceiling of 10"));
        assert_eq!(enforce_ceiling("abcd", None), Ok(1));
    }

    proptest! {
        #[test]
        fn monotone_under_extension(a in ".{0,200}", b in ".{0,200}") {
            let joined = format!("{a}{b}");
            prop_assert!(estimate_tokens(&a) <= estimate_tokens(&joined));
        }
    }
}
