//! Exact text encoding of binary64 values as C99 hex-float literals
//! (`0x1.8p+1`), used for bit-exact JSON round trips.

pub fn format(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    if digits.is_empty() {
        format!("{sign}0x{lead}p{e:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{e:+}")
    }
}

pub fn parse(s: &str) -> Option<f64> {
    let s = s.trim();
    match s {
        "nan" => return Some(f64::NAN),
        "inf" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let rest = rest.strip_prefix("0x").or_else(|| rest.strip_prefix("0X"))?;
    let (mant_str, exp_str) = rest.split_once(['p', 'P'])?;
    let e: i64 = exp_str.parse().ok()?;
    let (lead_str, frac_str) = mant_str.split_once('.').unwrap_or((mant_str, ""));
    let lead: u64 = match lead_str {
        "0" => 0,
        "1" => 1,
        _ => return None,
    };
    if frac_str.len() > 13 || !frac_str.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    let mut frac = if frac_str.is_empty() {
        0
    } else {
        u64::from_str_radix(frac_str, 16).ok()?
    };
    frac <<= 4 * (13 - frac_str.len());
    let bits = if lead == 0 {
        if frac == 0 {
            0
        } else if e == -1022 {
            frac
        } else {
            return None;
        }
    } else {
        let biased = e + 1023;
        if !(1..=2046).contains(&biased) {
            return None;
        }
        ((biased as u64) << 52) | frac
    };
    let v = f64::from_bits(bits);
    Some(if neg { -v } else { v })
}
