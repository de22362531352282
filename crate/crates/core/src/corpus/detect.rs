use super::DocFormat;

const HTML_MARKERS: &[&str] = &[
    "<!doctype", "<html", "<head", "<body", "<div", "<p>", "<p ", "<span", "<table", "<h1",
    "<h2", "<h3", "<h4", "<h5", "<h6", "<br", "<a ", "<li", "<ul", "<ol", "<script", "<style",
    "<title", "<meta", "<b>", "<i>", "<font",
];

fn extension(name: &str) -> Option<String> {
    let file = name.rsplit(['/', '\\']).next().unwrap_or(name);
    file.rsplit_once('.').map(|(_, ext)| ext.to_ascii_lowercase())
}

fn probe_window(raw: &[u8]) -> String {
    String::from_utf8_lossy(&raw[..raw.len().min(1024)]).to_ascii_lowercase()
}

fn contains_html_marker(window: &str) -> bool {
    HTML_MARKERS.iter().any(|m| window.contains(m))
}

/// Classify a document from its leading bytes, falling back to the name's
/// extension. Magic bytes take precedence over extensions.
pub fn detect_format(raw: &[u8], name: &str) -> DocFormat {
    if raw.starts_with(b"%PDF") {
        return DocFormat::Pdf;
    }
    if raw.starts_with(b"PK\x03\x04") {
        // modern Excel workbooks are zip archives; only the extension tells
        return match extension(name).as_deref() {
            Some("xls") | Some("xlsx") => DocFormat::Excel,
            _ => DocFormat::Zip,
        };
    }

    // strip a UTF-8 BOM and leading whitespace before looking for markup
    let mut body = raw;
    if body.starts_with(b"\xEF\xBB\xBF") {
        body = &body[3..];
    }
    while let Some((first, rest)) = body.split_first() {
        if first.is_ascii_whitespace() {
            body = rest;
        } else {
            break;
        }
    }

    let window = probe_window(body);
    if body.first() == Some(&b'<') && contains_html_marker(&window) {
        return DocFormat::Html;
    }
    if extension(name).as_deref() == Some("md") {
        return DocFormat::Markdown;
    }
    if std::str::from_utf8(raw).is_ok() {
        if contains_html_marker(&window) {
            return DocFormat::Unknown; // markup mid-text: not plain
        }
        return DocFormat::Plaintext;
    }
    DocFormat::Unknown
}
