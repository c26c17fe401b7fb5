//! Fixed-width float formatting and a minimal JSON writer.
//!
//! Every float that reaches a CSV or JSON artifact goes through [`fmt_g6`]
//! (six significant digits, trailing zeros trimmed) so re-runs produce
//! byte-identical files.

/// Formats with 6 significant digits in the style of printf `%g`: fixed
/// notation for exponents in [-4, 5], scientific otherwise, trailing zeros
/// trimmed.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // Round to 6 significant digits first; the exponent may carry (9.999995 -> 10).
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp always emits an exponent");
    let exp: i32 = exp.parse().expect("valid exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_zeros(&fixed)
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}

/// Incremental writer for the handful of JSON shapes the commands emit.
/// Floats go through [`fmt_g6`]; strings are escaped minimally (quote,
/// backslash, control characters).
#[derive(Debug, Default)]
pub struct JsonWriter {
    buf: String,
    needs_comma: Vec<bool>,
}

impl JsonWriter {
    pub fn new() -> Self {
        Self::default()
    }

    fn pre_value(&mut self) {
        if let Some(last) = self.needs_comma.last_mut() {
            if *last {
                self.buf.push(',');
            }
            *last = true;
        }
    }

    pub fn begin_object(&mut self) -> &mut Self {
        self.pre_value();
        self.buf.push('{');
        self.needs_comma.push(false);
        self
    }

    pub fn end_object(&mut self) -> &mut Self {
        self.needs_comma.pop();
        self.buf.push('}');
        self
    }

    pub fn begin_array(&mut self) -> &mut Self {
        self.pre_value();
        self.buf.push('[');
        self.needs_comma.push(false);
        self
    }

    pub fn end_array(&mut self) -> &mut Self {
        self.needs_comma.pop();
        self.buf.push(']');
        self
    }

    pub fn key(&mut self, key: &str) -> &mut Self {
        if let Some(last) = self.needs_comma.last_mut() {
            if *last {
                self.buf.push(',');
            }
            *last = false;
        }
        self.buf.push('"');
        self.push_escaped(key);
        self.buf.push_str("\":");
        self
    }

    pub fn float(&mut self, v: f64) -> &mut Self {
        self.pre_value();
        self.buf.push_str(&fmt_g6(v));
        self
    }

    pub fn int(&mut self, v: i64) -> &mut Self {
        self.pre_value();
        self.buf.push_str(&v.to_string());
        self
    }

    pub fn uint(&mut self, v: u64) -> &mut Self {
        self.pre_value();
        self.buf.push_str(&v.to_string());
        self
    }

    pub fn boolean(&mut self, v: bool) -> &mut Self {
        self.pre_value();
        self.buf.push_str(if v { "true" } else { "false" });
        self
    }

    pub fn string(&mut self, v: &str) -> &mut Self {
        self.pre_value();
        self.buf.push('"');
        self.push_escaped(v);
        self.buf.push('"');
        self
    }

    fn push_escaped(&mut self, s: &str) {
        for c in s.chars() {
            match c {
                '"' => self.buf.push_str("\\\""),
                '\\' => self.buf.push_str("\\\\"),
                '\n' => self.buf.push_str("\\n"),
                '\r' => self.buf.push_str("\\r"),
                '\t' => self.buf.push_str("\\t"),
                c if (c as u32) < 0x20 => {
                    self.buf.push_str(&format!("\\u{:04x}", c as u32));
                }
                c => self.buf.push(c),
            }
        }
    }

    pub fn finish(self) -> String {
        debug_assert!(self.needs_comma.is_empty(), "unbalanced JSON writer");
        self.buf
    }
}
