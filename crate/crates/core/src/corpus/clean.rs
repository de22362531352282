use unicode_normalization::UnicodeNormalization;

use super::DropReason;

/// Normalize a document's text: NFC, LF line endings, per-line trailing
/// whitespace stripped, runs of more than two blank lines collapsed to one,
/// document edges trimmed. Documents shorter than `min_chars` are dropped.
/// Idempotent: cleaning a cleaned document changes nothing.
pub fn clean_text(text: &str, min_chars: usize) -> Result<String, DropReason> {
    let normalized: String = text.nfc().collect();
    let unified = normalized.replace("\r\n", "\n").replace('\r', "\n");

    let mut out = String::with_capacity(unified.len());
    let mut blank_run = 0usize;
    let mut pending_blanks = String::new();
    for line in unified.split('\n') {
        let line = line.trim_end();
        if line.is_empty() {
            blank_run += 1;
            pending_blanks.push('\n');
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
            if blank_run > 2 {
                out.push('\n'); // long runs collapse to a single blank line
            } else {
                out.push_str(&pending_blanks);
            }
        }
        blank_run = 0;
        pending_blanks.clear();
        out.push_str(line);
    }

    let cleaned = out.trim_end().to_string();
    if cleaned.chars().count() < min_chars {
        return Err(DropReason::TooShort);
    }
    Ok(cleaned)
}
