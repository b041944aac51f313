//! CSV output. Numbers are written with 9 significant digits.

use std::io::Write;

pub const SIGNIFICANT_DIGITS: usize = 9;

/// Formats like C's `%.9g`: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros removed.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        format!(
            "{}e{}{:02}",
            trim(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Space-separated list, as used for traces and outputs.
pub fn list<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// A CSV table with a fixed header.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn into_string(self) -> String {
        String::from_utf8(self.writer.into_inner().expect("flushing to memory"))
            .expect("CSV fields are UTF-8")
    }

    pub fn write_to(self, out: &mut dyn Write) -> std::io::Result<()> {
        out.write_all(self.into_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(0.1 + 0.2), "0.3");
        assert_eq!(num(2.0 / 3.0), "0.666666667");
        assert_eq!(num(123456789.4), "123456789");
        assert_eq!(num(1234567890.0), "1.23456789e+09");
        assert_eq!(num(0.000123456789123), "0.000123456789");
        assert_eq!(num(0.0000123), "1.23e-05");
        assert_eq!(num(-4.5), "-4.5");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn tables_quote_only_when_needed() {
        let mut t = Table::new(&["a", "b"]);
        t.row(["1 0 1", "x,y"]);
        assert_eq!(t.into_string(), "a,b\n1 0 1,\"x,y\"\n");
    }
}
