use super::{Verdict, VerdictLabel, VerdictSource};

/// Instruction sent with every candidate patch.
pub const PATCH_PROMPT: &str = "Inspect this satellite image patch. Is the surface smooth and free of dynamic obstacles or structural hazards? Answer [Safe/Unsafe] and provide a 1-sentence reason.";

/// Reason attached to replies that contain no verdict token.
pub const UNPARSEABLE_REASON: &str = "unparseable model reply";

pub fn build_patch_prompt() -> &'static str {
    PATCH_PROMPT
}

/// Alphanumeric runs with their byte spans.
fn words(text: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut iter = text.char_indices().peekable();
    std::iter::from_fn(move || {
        while let Some(&(_, c)) = iter.peek() {
            if c.is_alphanumeric() {
                break;
            }
            iter.next();
        }
        let (start, _) = *iter.peek()?;
        let mut end = start;
        while let Some(&(i, c)) = iter.peek() {
            if !c.is_alphanumeric() {
                break;
            }
            end = i + c.len_utf8();
            iter.next();
        }
        Some((start, end))
    })
}

fn reason_after(text: &str, end: usize) -> String {
    let line_end = text[end..].find('\n').map_or(text.len(), |i| end + i);
    let rest = text[end..line_end].trim_start_matches(|c: char| !c.is_alphanumeric());
    let rest = rest.trim();
    if !rest.is_empty() {
        return rest.to_string();
    }
    text[line_end..]
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
        .to_string()
}

/// Normalizes a free-form model reply into a verdict.
///
/// The first whole word equal to `safe` or `unsafe` (case-insensitive) decides
/// the label; `safe` directly preceded by `not` counts as unsafe. Text after the
/// token on the same line becomes the reason. Replies without a token are
/// rejected as unsafe.
pub fn parse_verdict(model_text: &str) -> Verdict {
    let mut prev: Option<&str> = None;
    for (start, end) in words(model_text) {
        let word = &model_text[start..end];
        let label = if word.eq_ignore_ascii_case("unsafe") {
            Some(VerdictLabel::Unsafe)
        } else if word.eq_ignore_ascii_case("safe") {
            if prev.is_some_and(|p| p.eq_ignore_ascii_case("not")) {
                Some(VerdictLabel::Unsafe)
            } else {
                Some(VerdictLabel::Safe)
            }
        } else {
            None
        };
        if let Some(label) = label {
            return Verdict::new(label, reason_after(model_text, end), VerdictSource::RemoteModel);
        }
        prev = Some(word);
    }
    Verdict::new(VerdictLabel::Unsafe, UNPARSEABLE_REASON, VerdictSource::RemoteModel)
}
