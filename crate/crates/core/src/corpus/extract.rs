use super::CorpusError;

/// Link-character density above which a block is considered boilerplate.
const BOILERPLATE_LINK_DENSITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Heading(u8),
    Paragraph,
    Item,
}

struct BlockBuilder {
    kind: BlockKind,
    text: String,
    total_chars: usize,
    link_chars: usize,
}

impl BlockBuilder {
    fn new(kind: BlockKind) -> Self {
        BlockBuilder {
            kind,
            text: String::new(),
            total_chars: 0,
            link_chars: 0,
        }
    }
}

struct Extractor {
    blocks: Vec<(BlockKind, String)>,
    current: BlockBuilder,
    anchor_depth: usize,
}

impl Extractor {
    fn new() -> Self {
        Extractor {
            blocks: Vec::new(),
            current: BlockBuilder::new(BlockKind::Paragraph),
            anchor_depth: 0,
        }
    }

    fn push_text(&mut self, text: &str) {
        for ch in text.chars() {
            self.current.text.push(ch);
            if !ch.is_whitespace() {
                self.current.total_chars += 1;
                if self.anchor_depth > 0 {
                    self.current.link_chars += 1;
                }
            }
        }
    }

    /// Close the current block: collapse whitespace, drop empty and
    /// link-dominated blocks, start a new one.
    fn flush(&mut self, next_kind: BlockKind) {
        let built = std::mem::replace(&mut self.current, BlockBuilder::new(next_kind));
        let collapsed = collapse_whitespace(&built.text);
        if collapsed.is_empty() {
            return;
        }
        if built.total_chars > 0 {
            let density = built.link_chars as f64 / built.total_chars as f64;
            if density > BOILERPLATE_LINK_DENSITY {
                return;
            }
        }
        self.blocks.push((built.kind, collapsed));
    }

    fn render(mut self) -> String {
        self.flush(BlockKind::Paragraph);
        let mut out = String::new();
        let mut previous: Option<BlockKind> = None;
        for (kind, text) in self.blocks {
            if previous.is_some() {
                // consecutive list items stay in one block
                if previous == Some(BlockKind::Item) && kind == BlockKind::Item {
                    out.push('\n');
                } else {
                    out.push_str("\n\n");
                }
            }
            match kind {
                BlockKind::Heading(level) => {
                    for _ in 0..level {
                        out.push('#');
                    }
                    out.push(' ');
                    out.push_str(&text);
                }
                BlockKind::Item => {
                    out.push_str("- ");
                    out.push_str(&text);
                }
                BlockKind::Paragraph => out.push_str(&text),
            }
            previous = Some(kind);
        }
        out
    }
}

fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_space = true;
    for ch in s.chars() {
        if ch.is_whitespace() {
            if !in_space {
                out.push(' ');
                in_space = true;
            }
        } else {
            out.push(ch);
            in_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

fn heading_level(tag: &str) -> Option<u8> {
    match tag {
        "h1" => Some(1),
        "h2" => Some(2),
        "h3" => Some(3),
        "h4" => Some(4),
        "h5" => Some(5),
        "h6" => Some(6),
        _ => None,
    }
}

/// Tags whose entire content is discarded.
fn is_skipped_container(tag: &str) -> bool {
    matches!(tag, "script" | "style" | "nav")
}

/// Extract block-structured text from HTML: headings become `#`-prefixed
/// lines, paragraphs are separated by blank lines, list items get `- `
/// markers; script/style/nav contents, tags, and link-dominated boilerplate
/// blocks are removed and entities are decoded.
pub fn extract_text(html: &[u8]) -> Result<String, CorpusError> {
    let text = String::from_utf8_lossy(html);
    let trimmed = text.trim_start_matches('\u{feff}').trim_start();
    if !trimmed.starts_with('<') {
        return Err(CorpusError::NotHtml);
    }

    let mut ex = Extractor::new();
    let bytes = trimmed;
    let mut i = 0;
    let len = bytes.len();

    let mut skip_until: Option<String> = None;

    while i < len {
        let rest = &bytes[i..];

        if let Some(closer) = &skip_until {
            if rest.len() >= closer.len() && rest[..closer.len()].eq_ignore_ascii_case(closer) {
                i += closer.len();
                skip_until = None;
            } else {
                i += rest.chars().next().map_or(1, char::len_utf8);
            }
            continue;
        }

        if rest.starts_with("<!--") {
            i += rest.find("-->").map(|e| e + 3).unwrap_or(rest.len());
            continue;
        }

        if rest.starts_with('<') {
            let Some(tag_end) = rest.find('>') else {
                break; // unterminated tag: nothing usable follows
            };
            let tag_body = &rest[1..tag_end];
            let closing = tag_body.starts_with('/');
            let name: String = tag_body
                .trim_start_matches('/')
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric())
                .map(|c| c.to_ascii_lowercase())
                .collect();

            if !closing && is_skipped_container(&name) && !tag_body.ends_with('/') {
                skip_until = Some(format!("</{name}>"));
                i += tag_end + 1;
                continue;
            }

            match name.as_str() {
                "a" => {
                    if closing {
                        ex.anchor_depth = ex.anchor_depth.saturating_sub(1);
                    } else if !tag_body.ends_with('/') {
                        ex.anchor_depth += 1;
                    }
                }
                "p" | "div" | "tr" | "blockquote" | "pre" => ex.flush(BlockKind::Paragraph),
                "li" => {
                    if closing {
                        ex.flush(BlockKind::Paragraph);
                    } else {
                        ex.flush(BlockKind::Item);
                    }
                }
                "td" | "th" | "br" => ex.push_text(" "),
                _ => {
                    if let Some(level) = heading_level(&name) {
                        if closing {
                            ex.flush(BlockKind::Paragraph);
                        } else {
                            ex.flush(BlockKind::Heading(level));
                        }
                    }
                    // other tags are stripped, their text kept
                }
            }
            i += tag_end + 1;
            continue;
        }

        if rest.starts_with('&') {
            if let Some((decoded, consumed)) = decode_entity(rest) {
                ex.push_text(&decoded);
                i += consumed;
                continue;
            }
        }

        let ch = rest.chars().next().unwrap();
        let mut buf = [0u8; 4];
        ex.push_text(ch.encode_utf8(&mut buf));
        i += ch.len_utf8();
    }

    Ok(ex.render())
}

/// Decode one leading entity; returns the text and bytes consumed.
fn decode_entity(s: &str) -> Option<(String, usize)> {
    let end = s.find(';')?;
    if end > 10 {
        return None;
    }
    let entity = &s[..=end];
    let decoded = match entity {
        "&amp;" => "&",
        "&lt;" => "<",
        "&gt;" => ">",
        "&quot;" => "\"",
        "&apos;" => "'",
        "&nbsp;" => " ",
        "&mdash;" => "\u{2014}",
        "&ndash;" => "\u{2013}",
        "&copy;" => "\u{a9}",
        "&sect;" => "\u{a7}",
        _ => {
            if let Some(num) = entity.strip_prefix("&#") {
                let num = &num[..num.len() - 1];
                let code = if let Some(hex) = num.strip_prefix(['x', 'X']) {
                    u32::from_str_radix(hex, 16).ok()?
                } else {
                    num.parse().ok()?
                };
                let ch = char::from_u32(code)?;
                return Some((ch.to_string(), entity.len()));
            }
            return None;
        }
    };
    Some((decoded.to_string(), entity.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_and_paragraph_golden() {
        let out = extract_text(b"<h1>Item 1A</h1><p>Risk factors.</p>").unwrap();
        assert_eq!(out, "# Item 1A\n\nRisk factors.");
    }

    #[test]
    fn entities_are_decoded() {
        assert_eq!(extract_text(b"<p>a&amp;b</p>").unwrap(), "a&b");
        assert_eq!(extract_text(b"<p>5 &lt; 6 &gt; 4</p>").unwrap(), "5 < 6 > 4");
        assert_eq!(extract_text(b"<p>&#65;&#x42;</p>").unwrap(), "AB");
        // unknown entities stay literal
        assert_eq!(extract_text(b"<p>&bogus; x</p>").unwrap(), "&bogus; x");
    }

    #[test]
    fn script_style_nav_contents_are_removed() {
        assert_eq!(
            extract_text(b"<script>x=1</script><p>kept</p>").unwrap(),
            "kept"
        );
        assert_eq!(
            extract_text(b"<style>p { color: red }</style><p>kept</p>").unwrap(),
            "kept"
        );
        assert_eq!(
            extract_text(b"<nav><a href=x>Home</a> | <a href=y>Filings</a></nav><p>body</p>")
                .unwrap(),
            "body"
        );
    }

    #[test]
    fn list_items_get_markers() {
        let out = extract_text(b"<p>Risks:</p><ul><li>market</li><li>credit</li></ul>").unwrap();
        assert_eq!(out, "Risks:\n\n- market\n- credit");
    }

    #[test]
    fn deeper_headings_and_divs() {
        let out =
            extract_text(b"<div>intro</div><h3>Part III</h3><div>body text</div>").unwrap();
        assert_eq!(out, "intro\n\n### Part III\n\nbody text");
    }

    #[test]
    fn link_dominated_blocks_are_dropped() {
        let html = b"<p><a href=\"/a\">Previous filing</a> <a href=\"/b\">Next filing</a></p>\
                     <p>Substantive discussion of results here.</p>";
        let out = extract_text(html).unwrap();
        assert_eq!(out, "Substantive discussion of results here.");
    }

    #[test]
    fn block_with_minor_links_is_kept() {
        let html = b"<p>See <a href=\"/x\">note 4</a> for the full reconciliation of figures.</p>";
        let out = extract_text(html).unwrap();
        assert_eq!(out, "See note 4 for the full reconciliation of figures.");
    }

    #[test]
    fn inline_tags_are_stripped_without_breaking_blocks() {
        let out = extract_text(b"<p>net <b>revenue</b> rose <i>sharply</i></p>").unwrap();
        assert_eq!(out, "net revenue rose sharply");
    }

    #[test]
    fn table_cells_are_separated() {
        let out = extract_text(b"<table><tr><td>2023</td><td>413</td></tr><tr><td>2024</td><td>540</td></tr></table>")
            .unwrap();
        assert_eq!(out, "2023 413\n\n2024 540");
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            extract_text(b"<p>a</p><!-- hidden --><p>b</p>").unwrap(),
            "a\n\nb"
        );
    }

    #[test]
    fn non_html_is_rejected() {
        assert!(matches!(
            extract_text(b"plain text, no markup"),
            Err(CorpusError::NotHtml)
        ));
    }

    #[test]
    fn outputs_never_contain_script_or_style_tags() {
        let html = b"<html><head><style>.x{}</style><script>var a;</script></head>\
                     <body><h2>T</h2><p>content</p></body></html>";
        let out = extract_text(html).unwrap();
        assert!(!out.contains("<script"));
        assert!(!out.contains("<style"));
        assert_eq!(out, "## T\n\ncontent");
    }
}
