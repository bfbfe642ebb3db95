/// Single-pass `{name}` substitution. Unknown placeholders and stray braces
/// are copied through, and substituted values are never rescanned.
pub fn fill<'a, F>(template: &str, mut lookup: F) -> String
where
    F: FnMut(&str) -> Option<std::borrow::Cow<'a, str>>,
{
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_key(&after[..close]) => {
                let key = &after[..close];
                match lookup(key) {
                    Some(v) => out.push_str(&v),
                    None => {
                        out.push('{');
                        out.push_str(key);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Count of `{key}` occurrences in a template.
pub fn count_placeholder(template: &str, key: &str) -> usize {
    template.matches(&format!("{{{key}}}")).count()
}

fn is_key(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == ':')
}
