//! Chinese numerals as they appear in article numbers.
//!
//! Statute citations use two styles: digit-by-digit (`一四三` = 143) and
//! positional (`一百四十三` = 143). Both are accepted, as are ASCII and
//! full-width digits.

fn digit(c: char) -> Option<u64> {
    match c {
        '零' | '〇' => Some(0),
        '一' => Some(1),
        '二' | '兩' | '两' => Some(2),
        '三' => Some(3),
        '四' => Some(4),
        '五' => Some(5),
        '六' => Some(6),
        '七' => Some(7),
        '八' => Some(8),
        '九' => Some(9),
        '0'..='9' => c.to_digit(10).map(u64::from),
        '０'..='９' => Some(c as u64 - '０' as u64),
        _ => None,
    }
}

fn unit(c: char) -> Option<u64> {
    match c {
        '十' => Some(10),
        '百' => Some(100),
        '千' => Some(1000),
        '萬' | '万' => Some(10_000),
        _ => None,
    }
}

/// Parses a numeral; `None` if it contains anything else.
pub fn parse_numeral(s: &str) -> Option<u64> {
    if s.is_empty() {
        return None;
    }
    if !s.chars().any(|c| unit(c).is_some()) {
        return s.chars().try_fold(0u64, |acc, c| acc.checked_mul(10)?.checked_add(digit(c)?));
    }
    let (mut total, mut section, mut pending) = (0u64, 0u64, None::<u64>);
    for c in s.chars() {
        if let Some(d) = digit(c) {
            pending = Some(pending.unwrap_or(0) * 10 + d);
        } else if let Some(u) = unit(c) {
            if u == 10_000 {
                total += (section + pending.take().unwrap_or(0)) * u;
                section = 0;
            } else {
                // A bare 十 at the start reads as 一十.
                section += pending.take().unwrap_or(1) * u;
            }
        } else {
            return None;
        }
    }
    Some(total + section + pending.unwrap_or(0))
}

/// Article-number component in canonical form: ASCII decimal when the input
/// is a numeral, otherwise the input unchanged.
pub fn normalize_number(s: &str) -> String {
    if s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
        return s.to_string();
    }
    parse_numeral(s).map_or_else(|| s.to_string(), |n| n.to_string())
}
