//! Output formatting shared by tables, summaries and the CLI.

/// Formats a float with 9 significant digits, stable across runs.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-3..9).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(s)
    } else {
        format!("{x:.8e}")
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// One `key = value` line per entry, in insertion order.
pub fn kv_lines(entries: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_shapes() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0 / 9.0), "0.111111111");
        assert_eq!(sig9(0.25), "0.25");
        assert_eq!(sig9(123456789.0), "123456789");
        assert_eq!(sig9(1.5e12), "1.50000000e12");
    }
}
