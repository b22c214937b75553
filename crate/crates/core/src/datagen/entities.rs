//! Entity value generators, one small format catalog per entity.
//!
//! A generated value may carry unlabeled context around the entity itself
//! (`mailto:` before an email, brackets around a number, a possessive `'s`
//! after a name); [`GeneratedValue::start`]..[`GeneratedValue::end`] is the
//! byte range that gets the entity label.

use rand::seq::SliceRandom;
use rand::Rng;

use super::lists::*;
use crate::error::{Error, Result};
use crate::label::EntityLabel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedValue {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl GeneratedValue {
    pub fn whole(text: String) -> Self {
        let end = text.len();
        Self { text, start: 0, end }
    }

    pub fn wrapped(prefix: &str, core: &str, suffix: &str) -> Self {
        Self {
            text: format!("{prefix}{core}{suffix}"),
            start: prefix.len(),
            end: prefix.len() + core.len(),
        }
    }

    /// The labeled part of the value.
    pub fn core(&self) -> &str {
        &self.text[self.start..self.end]
    }

    pub fn prefix(&self) -> &str {
        &self.text[..self.start]
    }

    pub fn suffix(&self) -> &str {
        &self.text[self.end..]
    }
}

/// Format identifiers per entity. `BACKGROUND` and `PAD` have none.
pub fn formats(entity: EntityLabel) -> &'static [&'static str] {
    use EntityLabel::*;
    match entity {
        Pad | Background => &[],
        Address => &[
            "street",
            "street-unit",
            "street-city-state-zip",
            "street-unit-city-state-zip",
            "street-city-statename",
            "pobox-city-state",
        ],
        Ban => &["digits"],
        CreditCard => &[
            "amex",
            "visa",
            "visa-dash",
            "visa-space",
            "visa-dot",
            "visa-underscore",
            "visa-comma",
            "mastercard",
            "mastercard-dash",
            "mastercard-space",
            "discover",
            "discover-dash",
            "discover-dot",
        ],
        Datetime => &[
            "%B %Y",
            "%a, %d %b %Y %H:%M:%S %z",
            "%B %-d",
            "%a, %d %b %Y %H:%M:%S %z (%Z)",
            "%m/%d/%Y",
            "%m/%d/%Y %H:%M",
            "%Y-%m-%d",
            "%Y-%m-%dT%H:%M:%S",
            "%B %-d, %Y",
            "%d %B %Y",
            "%I:%M %p",
            "%b %d %Y %H:%M:%S",
        ],
        EmailAddress => &["plain", "dotted", "mailto", "mailto-subject", "localhost"],
        HashOrKey => &["md5", "sha1", "sha256", "sha512", "hex-upper", "base64"],
        Ipv4 => &["dotted"],
        Ipv6 => &["full", "compressed", "cidr"],
        MacAddress => &["colon", "dash", "dot", "plain"],
        Person => &[
            "first",
            "last",
            "first-last",
            "first-initial-last",
            "title-first-last",
            "title-last",
            "last-comma-first",
            "possessive",
        ],
        PhoneNumber => &[
            "dash",
            "paren",
            "dot",
            "plain",
            "plus1",
            "plus1-paren",
            "intl-001",
            "extension",
            "uk",
            "ireland",
        ],
        Ssn => &["dash", "dot", "plain", "space"],
        Url => &["https", "http", "www", "bare", "ftp", "s3", "rpc"],
        Uuid => &["canonical", "hex"],
        Float => &["plain", "trailing-dot", "leading-dot", "paren", "bracket", "signed"],
        Integer => &["plain", "paren", "bracket", "signed", "exclaim"],
        Ordinal => &[
            "suffix",
            "word",
            "word-title",
            "bullet-paren",
            "bullet-dot",
            "version-v",
            "version-triple",
            "version-x",
        ],
        Quantity => &["dollar", "unit", "unit-dash", "percent"],
    }
}

pub fn choose_format<R: Rng + ?Sized>(entity: EntityLabel, rng: &mut R) -> Option<&'static str> {
    formats(entity).choose(rng).copied()
}

/// Generate one value of `entity`, as plain text.
pub fn generate_entity_value<R: Rng + ?Sized>(
    entity: EntityLabel,
    format_id: Option<&str>,
    rng: &mut R,
) -> Result<String> {
    generate_entity(entity, format_id, rng).map(|v| v.text)
}

/// Generate one value of `entity` with its labeled byte range. The format
/// is drawn uniformly when `format_id` is `None`.
pub fn generate_entity<R: Rng + ?Sized>(
    entity: EntityLabel,
    format_id: Option<&str>,
    rng: &mut R,
) -> Result<GeneratedValue> {
    use EntityLabel::*;
    let catalog = formats(entity);
    if catalog.is_empty() {
        return Err(Error::Config(format!("{entity} has no value formats")));
    }
    let format = match format_id {
        Some(f) => *catalog
            .iter()
            .find(|c| **c == f)
            .ok_or_else(|| Error::Config(format!("unknown format {f:?} for {entity}")))?,
        None => catalog[rng.gen_range(0..catalog.len())],
    };
    Ok(match entity {
        Address => address(format, rng),
        Ban => GeneratedValue::whole({ let n = rng.gen_range(10..=18); digits(rng, n) }),
        CreditCard => GeneratedValue::whole(credit_card(format, rng)),
        Datetime => GeneratedValue::whole(datetime(format, rng)),
        EmailAddress => email(format, rng),
        HashOrKey => GeneratedValue::whole(hash_or_key(format, rng)),
        Ipv4 => GeneratedValue::whole(ipv4(rng)),
        Ipv6 => GeneratedValue::whole(ipv6(format, rng)),
        MacAddress => GeneratedValue::whole(mac(format, rng)),
        Person => person(format, rng),
        PhoneNumber => GeneratedValue::whole(phone(format, rng)),
        Ssn => GeneratedValue::whole(ssn(format, rng)),
        Url => GeneratedValue::whole(url(format, rng)),
        Uuid => GeneratedValue::whole(uuid(format, rng)),
        Float => float(format, rng),
        Integer => integer(format, rng),
        Ordinal => GeneratedValue::whole(ordinal(format, rng)),
        Quantity => GeneratedValue::whole(quantity(format, rng)),
        Pad | Background => unreachable!("no formats"),
    })
}

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn digits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

fn nonzero_digits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> String {
    let mut s = String::with_capacity(n);
    s.push(char::from(b'1' + rng.gen_range(0..9u8)));
    s.push_str(&digits(rng, n - 1));
    s
}

fn hex<R: Rng + ?Sized>(rng: &mut R, n: usize, upper: bool) -> String {
    let table: &[u8; 16] = if upper {
        b"0123456789ABCDEF"
    } else {
        b"0123456789abcdef"
    };
    (0..n).map(|_| table[rng.gen_range(0..16)] as char).collect()
}

fn address<R: Rng + ?Sized>(format: &str, rng: &mut R) -> GeneratedValue {
    let number = { let n = rng.gen_range(1..=5); nonzero_digits(rng, n) };
    let street = format!(
        "{number} {} {}",
        pick(rng, STREET_NAMES),
        pick(rng, STREET_SUFFIXES)
    );
    let with_unit = |rng: &mut R, s: &str| {
        let prefix = pick(rng, UNIT_PREFIXES);
        let sep = if prefix == "#" { "" } else { " " };
        format!("{s} {prefix}{sep}{}", rng.gen_range(1..=999))
    };
    let line_break = |rng: &mut R| if rng.gen_bool(0.5) { "\n" } else { ", " };
    let zip = |rng: &mut R| {
        if rng.gen_bool(0.8) {
            digits(rng, 5)
        } else {
            format!("{}-{}", digits(rng, 5), digits(rng, 4))
        }
    };
    let text = match format {
        "street" => street,
        "street-unit" => with_unit(rng, &street),
        "street-city-state-zip" => {
            let brk = line_break(rng);
            let z = zip(rng);
            format!("{street}{brk}{}, {} {z}", pick(rng, CITIES), pick(rng, STATE_CODES))
        }
        "street-unit-city-state-zip" => {
            let s = with_unit(rng, &street);
            let brk = line_break(rng);
            let z = zip(rng);
            format!("{s}{brk}{}, {} {z}", pick(rng, CITIES), pick(rng, STATE_CODES))
        }
        "street-city-statename" => {
            let brk = line_break(rng);
            format!("{street}{brk}{}, {}", pick(rng, CITIES), pick(rng, STATE_NAMES))
        }
        "pobox-city-state" => format!(
            "PO Box {} {}, {}",
            { let n = rng.gen_range(2..=5); nonzero_digits(rng, n) },
            pick(rng, CITIES),
            pick(rng, STATE_CODES)
        ),
        _ => unreachable!(),
    };
    GeneratedValue::whole(text)
}

fn luhn_complete(partial: &str) -> char {
    // check digit making the full number pass the Luhn test
    let sum: u32 = partial
        .bytes()
        .rev()
        .enumerate()
        .map(|(i, b)| {
            let d = (b - b'0') as u32;
            if i % 2 == 0 {
                let x = d * 2;
                if x > 9 {
                    x - 9
                } else {
                    x
                }
            } else {
                d
            }
        })
        .sum();
    char::from(b'0' + ((10 - sum % 10) % 10) as u8)
}

fn credit_card<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    let (brand, delim) = format.split_once('-').unwrap_or((format, ""));
    let (prefix, len) = match brand {
        "amex" => (pick(rng, &["34", "37"]).to_string(), 15),
        "visa" => ("4".to_string(), 16),
        "mastercard" => (format!("5{}", rng.gen_range(1..=5)), 16),
        "discover" => (pick(rng, &["6011", "65"]).to_string(), 16),
        _ => unreachable!(),
    };
    let mut number = prefix;
    number.push_str(&digits(rng, len - 1 - number.len()));
    let check = luhn_complete(&number);
    number.push(check);
    let sep = match delim {
        "" => return number,
        "dash" => "-",
        "space" => " ",
        "dot" => ".",
        "underscore" => "_",
        "comma" => ",",
        _ => unreachable!(),
    };
    number
        .as_bytes()
        .chunks(4)
        .map(|c| std::str::from_utf8(c).unwrap())
        .collect::<Vec<_>>()
        .join(sep)
}

fn days_in_month(year: u32, month: u32) -> u32 {
    match month {
        2 if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

/// 0 = Sunday.
fn weekday(year: u32, month: u32, day: u32) -> usize {
    const T: [u32; 12] = [0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4];
    let y = if month < 3 { year - 1 } else { year };
    ((y + y / 4 - y / 100 + y / 400 + T[month as usize - 1] + day) % 7) as usize
}

fn datetime<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    let year = rng.gen_range(1970..=2030u32);
    let month = rng.gen_range(1..=12u32);
    let day = rng.gen_range(1..=days_in_month(year, month));
    let hour = rng.gen_range(0..24u32);
    let minute = rng.gen_range(0..60u32);
    let second = rng.gen_range(0..60u32);
    let tz_hours = rng.gen_range(-11..=12i32);
    let mut out = String::new();
    let mut chars = format.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        let mut spec = chars.next().expect("format spec");
        let mut no_pad = false;
        if spec == '-' {
            no_pad = true;
            spec = chars.next().expect("format spec");
        }
        let month_name = MONTHS[month as usize - 1];
        let wd = WEEKDAYS[weekday(year, month, day)];
        match spec {
            'Y' => out.push_str(&year.to_string()),
            'm' => out.push_str(&format!("{month:02}")),
            'd' if no_pad => out.push_str(&day.to_string()),
            'd' => out.push_str(&format!("{day:02}")),
            'B' => out.push_str(month_name),
            'b' => out.push_str(&month_name[..3]),
            'a' => out.push_str(&wd[..3]),
            'H' => out.push_str(&format!("{hour:02}")),
            'I' => out.push_str(&format!("{:02}", (hour + 11) % 12 + 1)),
            'M' => out.push_str(&format!("{minute:02}")),
            'S' => out.push_str(&format!("{second:02}")),
            'p' => out.push_str(if hour < 12 { "AM" } else { "PM" }),
            'z' => out.push_str(&format!(
                "{}{:02}00",
                if tz_hours < 0 { '-' } else { '+' },
                tz_hours.unsigned_abs()
            )),
            'Z' => out.push_str(pick(rng, TIMEZONES)),
            other => {
                out.push('%');
                out.push(other);
            }
        }
    }
    out
}

fn domain<R: Rng + ?Sized>(rng: &mut R) -> String {
    let mut d = pick(rng, DOMAIN_WORDS).to_string();
    if rng.gen_bool(0.3) {
        d.push(if rng.gen_bool(0.5) { '-' } else { '.' });
        d.push_str(pick(rng, DOMAIN_WORDS));
    }
    if rng.gen_bool(0.2) {
        d.push_str(&rng.gen_range(1..100).to_string());
    }
    format!("{d}.{}", pick(rng, TLDS))
}

fn email_user<R: Rng + ?Sized>(rng: &mut R, dotted: bool) -> String {
    let first = pick(rng, FIRST_NAMES).to_lowercase();
    let last = pick(rng, LAST_NAMES).to_lowercase();
    if dotted {
        return format!("{first}.{last}");
    }
    match rng.gen_range(0..4) {
        0 => pick(rng, EMAIL_USERS).to_string(),
        1 => format!("{}{last}", &first[..1]),
        2 => format!("{first}_{last}{}", rng.gen_range(1..100)),
        _ => format!("{first}{}", rng.gen_range(1..1000)),
    }
}

fn email<R: Rng + ?Sized>(format: &str, rng: &mut R) -> GeneratedValue {
    match format {
        "plain" => GeneratedValue::whole(format!("{}@{}", email_user(rng, false), domain(rng))),
        "dotted" => GeneratedValue::whole(format!("{}@{}", email_user(rng, true), domain(rng))),
        "mailto" => {
            let core = format!("{}@{}", email_user(rng, false), domain(rng));
            GeneratedValue::wrapped("mailto:", &core, "")
        }
        "mailto-subject" => {
            let core = format!("{}@{}", email_user(rng, false), domain(rng));
            let subject = pick(rng, &["help", "info", "question", "report", "hello"]);
            GeneratedValue::wrapped("mailto:", &core, &format!("?subject={subject}"))
        }
        "localhost" => GeneratedValue::whole(format!("{}@localhost", email_user(rng, false))),
        _ => unreachable!(),
    }
}

fn hash_or_key<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    match format {
        "md5" => hex(rng, 32, false),
        "sha1" => hex(rng, 40, false),
        "sha256" => hex(rng, 64, false),
        "sha512" => hex(rng, 128, false),
        "hex-upper" => { let n = rng.gen_range(20..=32); hex(rng, n, true) },
        "base64" => {
            const B64: &[u8] =
                b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
            let n = rng.gen_range(5..=11) * 4;
            let pad = rng.gen_range(0..=2);
            let mut s: String = (0..n - pad).map(|_| B64[rng.gen_range(0..64)] as char).collect();
            s.push_str(&"=".repeat(pad));
            s
        }
        _ => unreachable!(),
    }
}

fn ipv4<R: Rng + ?Sized>(rng: &mut R) -> String {
    let first = rng.gen_range(1..=254u8);
    format!(
        "{first}.{}.{}.{}",
        rng.gen::<u8>(),
        rng.gen::<u8>(),
        rng.gen_range(1..=254u8)
    )
}

fn ipv6_group<R: Rng + ?Sized>(rng: &mut R) -> String {
    format!("{:x}", rng.gen::<u16>())
}

fn ipv6<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    match format {
        "full" => (0..8).map(|_| ipv6_group(rng)).collect::<Vec<_>>().join(":"),
        "compressed" => {
            let head = rng.gen_range(1..=4);
            let tail = rng.gen_range(1..=(6 - head).min(3));
            let h: Vec<_> = (0..head).map(|_| ipv6_group(rng)).collect();
            let t: Vec<_> = (0..tail).map(|_| ipv6_group(rng)).collect();
            format!("{}::{}", h.join(":"), t.join(":"))
        }
        "cidr" => {
            let head = rng.gen_range(2..=4);
            let h: Vec<_> = (0..head).map(|_| ipv6_group(rng)).collect();
            format!("{}::/{}", h.join(":"), rng.gen_range(16..=128))
        }
        _ => unreachable!(),
    }
}

fn mac<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    let upper = rng.gen_bool(0.5);
    let raw = hex(rng, 12, upper);
    let groups = |size: usize| -> Vec<String> {
        raw.as_bytes()
            .chunks(size)
            .map(|c| String::from_utf8(c.to_vec()).unwrap())
            .collect()
    };
    match format {
        "colon" => groups(2).join(":"),
        "dash" => groups(2).join("-"),
        "dot" => groups(4).join("."),
        "plain" => raw,
        _ => unreachable!(),
    }
}

fn person<R: Rng + ?Sized>(format: &str, rng: &mut R) -> GeneratedValue {
    let first = pick(rng, FIRST_NAMES);
    let last = pick(rng, LAST_NAMES);
    let title = pick(rng, TITLES);
    let initial = char::from(b'A' + rng.gen_range(0..26u8));
    match format {
        "first" => GeneratedValue::whole(first.into()),
        "last" => GeneratedValue::whole(last.into()),
        "first-last" => GeneratedValue::whole(format!("{first} {last}")),
        "first-initial-last" => {
            let dot = if rng.gen_bool(0.5) { "." } else { "" };
            GeneratedValue::whole(format!("{first} {initial}{dot} {last}"))
        }
        "title-first-last" => GeneratedValue::whole(format!("{title} {first} {last}")),
        "title-last" => GeneratedValue::whole(format!("{title} {last}")),
        "last-comma-first" => GeneratedValue::whole(format!("{last}, {first}")),
        "possessive" => {
            let core = if rng.gen_bool(0.5) {
                first.to_string()
            } else {
                format!("{title} {last}")
            };
            GeneratedValue::wrapped("", &core, "'s")
        }
        _ => unreachable!(),
    }
}

fn phone<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    let area = nonzero_digits(rng, 3);
    let exchange = nonzero_digits(rng, 3);
    let line = digits(rng, 4);
    match format {
        "dash" => format!("{area}-{exchange}-{line}"),
        "paren" => format!("({area}) {exchange}-{line}"),
        "dot" => format!("{area}.{exchange}.{line}"),
        "plain" => format!("{area}{exchange}{line}"),
        "plus1" => format!("+1 {area}{exchange}{line}"),
        "plus1-paren" => format!("+1 ({area}) {exchange}-{line}"),
        "intl-001" => format!("001-{area}-{exchange}-{line}"),
        "extension" => {
            let ext = { let n = rng.gen_range(2..=5); digits(rng, n) };
            let marker = pick(rng, &[" x", " ext", " #", "x"]);
            let marker = if marker == " ext" { " Ext." } else { marker };
            format!("{area}-{exchange}-{line}{marker}{ext}")
        }
        "uk" => format!("+44 {area} {exchange} {line}"),
        "ireland" => format!("+353 {area} {exchange} {line}"),
        _ => unreachable!(),
    }
}

fn ssn<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    let area = format!("{:03}", rng.gen_range(1..=899));
    let group = format!("{:02}", rng.gen_range(1..=99));
    let serial = format!("{:04}", rng.gen_range(1..=9999));
    let sep = match format {
        "dash" => "-",
        "dot" => ".",
        "plain" => "",
        "space" => " ",
        _ => unreachable!(),
    };
    format!("{area}{sep}{group}{sep}{serial}")
}

fn url_tail<R: Rng + ?Sized>(rng: &mut R) -> String {
    let mut s = String::new();
    if rng.gen_bool(0.15) {
        s.push_str(&format!(":{}", rng.gen_range(80..10000)));
    }
    if rng.gen_bool(0.7) {
        for _ in 0..rng.gen_range(1..=3) {
            s.push('/');
            s.push_str(pick(rng, PATH_WORDS));
        }
        if rng.gen_bool(0.4) {
            s.push_str(&format!(
                "?{}={}",
                pick(rng, &["q", "id", "test", "page", "ref"]),
                rng.gen_range(1..1000)
            ));
        }
    }
    s
}

fn url<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    let host = domain(rng);
    let mut tail = url_tail(rng);
    // the URL grammar needs one more character after a two-letter TLD
    if tail.is_empty() && host.rsplit('.').next().is_some_and(|t| t.len() < 3) {
        tail.push('/');
    }
    match format {
        "https" => format!("https://{host}{tail}"),
        "http" => format!("http://{host}{tail}"),
        "www" => format!("www.{host}{tail}"),
        "bare" => format!("{host}{tail}"),
        "ftp" => format!("ftp://{host}{tail}"),
        "s3" => format!("s3://{host}/{}", pick(rng, PATH_WORDS)),
        "rpc" => format!("rpc://{host}{tail}"),
        _ => unreachable!(),
    }
}

fn uuid<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    let variant = pick(rng, &["8", "9", "a", "b"]);
    let parts = [
        hex(rng, 8, false),
        hex(rng, 4, false),
        format!("4{}", hex(rng, 3, false)),
        format!("{variant}{}", hex(rng, 3, false)),
        hex(rng, 12, false),
    ];
    match format {
        "canonical" => parts.join("-"),
        "hex" => parts.concat(),
        _ => unreachable!(),
    }
}

fn float<R: Rng + ?Sized>(format: &str, rng: &mut R) -> GeneratedValue {
    let int = rng.gen_range(0..1000);
    let frac = { let n = rng.gen_range(1..=3); digits(rng, n) };
    match format {
        "plain" => GeneratedValue::whole(format!("{int}.{frac}")),
        "trailing-dot" => GeneratedValue::whole(format!("{int}.")),
        "leading-dot" => GeneratedValue::whole(format!(".{frac}")),
        "paren" => GeneratedValue::wrapped("(", &format!("{int}.{frac}"), ")"),
        "bracket" => GeneratedValue::wrapped("[", &format!("{int}.{frac}"), "]"),
        "signed" => GeneratedValue::whole(format!("-{int}.{frac}")),
        _ => unreachable!(),
    }
}

fn integer<R: Rng + ?Sized>(format: &str, rng: &mut R) -> GeneratedValue {
    let n = rng.gen_range(0..10_000).to_string();
    match format {
        "plain" => GeneratedValue::whole(n),
        "paren" => GeneratedValue::wrapped("(", &n, ")"),
        "bracket" => GeneratedValue::wrapped("[", &n, "]"),
        "signed" => GeneratedValue::whole(format!("-{n}")),
        "exclaim" => GeneratedValue::wrapped("", &n, "!"),
        _ => unreachable!(),
    }
}

fn ordinal_suffix(n: u32) -> &'static str {
    match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    }
}

fn ordinal<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    match format {
        "suffix" => {
            let n = rng.gen_range(1..200);
            format!("{n}{}", ordinal_suffix(n))
        }
        "word" => pick(rng, ORDINAL_WORDS).to_string(),
        "word-title" => {
            let w = pick(rng, ORDINAL_WORDS);
            let mut c = w.chars();
            let f = c.next().unwrap().to_ascii_uppercase();
            format!("{f}{}", c.as_str())
        }
        "bullet-paren" => format!("{})", rng.gen_range(1..30)),
        "bullet-dot" => format!("{}.", rng.gen_range(1..30)),
        "version-v" => format!("v{}.{}", rng.gen_range(0..20), rng.gen_range(0..20)),
        "version-triple" => format!(
            "{}.{}.{}",
            rng.gen_range(0..20),
            rng.gen_range(0..20),
            rng.gen_range(0..50)
        ),
        "version-x" => format!("{}.x", rng.gen_range(1..20)),
        _ => unreachable!(),
    }
}

fn quantity<R: Rng + ?Sized>(format: &str, rng: &mut R) -> String {
    match format {
        "dollar" => format!("${}.{:02}", rng.gen_range(0..100_000), rng.gen_range(0..100)),
        "unit" => format!("{}{}", rng.gen_range(1..1000), pick(rng, QUANTITY_UNITS)),
        "unit-dash" => format!("{}-{}", rng.gen_range(1..1000), pick(rng, QUANTITY_UNITS)),
        "percent" => format!("{}%", rng.gen_range(1..100)),
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use EntityLabel::*;

    #[test]
    fn every_value_entity_has_formats() {
        for e in EntityLabel::value_entities() {
            assert!(!formats(e).is_empty(), "{e}");
        }
        assert!(formats(Background).is_empty());
        let mut rng = stream_rng(0, "t", 0);
        assert!(generate_entity(Background, None, &mut rng).is_err());
        assert!(generate_entity(Pad, None, &mut rng).is_err());
    }

    #[test]
    fn unknown_format_is_an_error() {
        let mut rng = stream_rng(0, "t", 0);
        assert!(generate_entity_value(Ssn, Some("ddd/dd/dddd"), &mut rng).is_err());
    }

    #[test]
    fn ban_is_10_to_18_digits() {
        let mut rng = stream_rng(1, "ban", 0);
        for _ in 0..500 {
            let v = generate_entity_value(Ban, None, &mut rng).unwrap();
            assert!((10..=18).contains(&v.len()), "{v}");
            assert!(v.bytes().all(|b| b.is_ascii_digit()));
        }
    }

    #[test]
    fn uuid_shape_and_version() {
        let mut rng = stream_rng(1, "uuid", 0);
        for _ in 0..200 {
            let v = generate_entity_value(Uuid, Some("canonical"), &mut rng).unwrap();
            let parts: Vec<_> = v.split('-').collect();
            let lens: Vec<_> = parts.iter().map(|p| p.len()).collect();
            assert_eq!(lens, vec![8, 4, 4, 4, 12]);
            assert!(parts[2].starts_with('4'));
            assert!("89ab".contains(&parts[3][..1]));
            assert!(v.bytes().all(|b| b == b'-' || b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
        }
    }

    #[test]
    fn credit_card_with_dash_delimiter() {
        let mut rng = stream_rng(1, "cc", 0);
        for fmt in ["visa-dash", "mastercard-dash", "discover-dash"] {
            let v = generate_entity_value(CreditCard, Some(fmt), &mut rng).unwrap();
            let groups: Vec<_> = v.split('-').collect();
            assert_eq!(groups.len(), 4, "{v}");
            assert!(groups.iter().all(|g| g.len() == 4));
            assert!(["4", "5", "6"].contains(&&v[..1]));
        }
        let amex = generate_entity_value(CreditCard, Some("amex"), &mut rng).unwrap();
        assert_eq!(amex.len(), 15);
        assert!(amex.starts_with("34") || amex.starts_with("37"));
    }

    #[test]
    fn luhn_check_digit() {
        // 7992739871 is the textbook Luhn example with check digit 3
        assert_eq!(luhn_complete("7992739871"), '3');
    }

    #[test]
    fn weekday_reference_dates() {
        assert_eq!(WEEKDAYS[weekday(2002, 9, 3)], "Tuesday");
        assert_eq!(WEEKDAYS[weekday(2000, 1, 1)], "Saturday");
    }

    #[test]
    fn ssn_dash_shape() {
        let mut rng = stream_rng(1, "ssn", 0);
        for _ in 0..100 {
            let v = generate_entity_value(Ssn, Some("dash"), &mut rng).unwrap();
            let b = v.as_bytes();
            assert_eq!(v.len(), 11);
            assert_eq!((b[3], b[6]), (b'-', b'-'));
        }
    }

    #[test]
    fn wrapped_values_label_only_the_core() {
        let mut rng = stream_rng(1, "wrap", 0);
        let v = generate_entity(EmailAddress, Some("mailto"), &mut rng).unwrap();
        assert_eq!(v.prefix(), "mailto:");
        assert!(v.core().contains('@'));
        let v = generate_entity(Person, Some("possessive"), &mut rng).unwrap();
        assert_eq!(v.suffix(), "'s");
        let v = generate_entity(Float, Some("paren"), &mut rng).unwrap();
        assert_eq!((v.prefix(), v.suffix()), ("(", ")"));
    }

    #[test]
    fn datetime_catalog_has_twelve_patterns() {
        assert_eq!(formats(Datetime).len(), 12);
        let mut rng = stream_rng(5, "dt", 0);
        let v = generate_entity_value(Datetime, Some("%a, %d %b %Y %H:%M:%S %z (%Z)"), &mut rng)
            .unwrap();
        assert!(v.ends_with(')'), "{v}");
        assert!(!v.contains('%'));
    }
}
