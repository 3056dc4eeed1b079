//! Parsing of flag values that clap leaves as strings.

use std::collections::BTreeMap;
use std::fmt;

/// Malformed command-line value; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: String) -> anyhow::Error {
    UsageError(msg).into()
}

/// Comma-separated labels and inclusive ranges, e.g. `1,4` or `-3..-1,5`.
pub fn parse_labels(text: &str) -> anyhow::Result<Vec<i64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || usage(format!("cannot read site list item {part:?}"));
        // skip a leading minus so "-3..-1" splits at the range marker
        let split = part.get(1..).and_then(|rest| rest.find("..")).map(|i| i + 1);
        match split {
            Some(i) => {
                let lo: i64 = part[..i].parse().map_err(|_| bad())?;
                let hi: i64 = part[i + 2..].parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(usage("site list is empty".into()));
    }
    Ok(out)
}

/// A single number applied to every site in `sites`, or a JSON object
/// mapping site labels to values.
pub fn parse_site_map(flag: &str, text: &str, sites: &[i64]) -> anyhow::Result<BTreeMap<i64, f64>> {
    if let Ok(v) = text.trim().parse::<f64>() {
        return Ok(sites.iter().map(|&x| (x, v)).collect());
    }
    let raw: BTreeMap<String, f64> = serde_json::from_str(text)
        .map_err(|e| usage(format!("{flag} must be a number or a JSON object of site -> value: {e}")))?;
    raw.into_iter()
        .map(|(k, v)| {
            let x = k.trim().parse().map_err(|_| usage(format!("{flag}: {k:?} is not a site label")))?;
            Ok((x, v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_ranges() {
        assert_eq!(parse_labels("1,4").unwrap(), vec![1, 4]);
        assert_eq!(parse_labels("-3..-1, 5").unwrap(), vec![-3, -2, -1, 5]);
        assert_eq!(parse_labels("-2").unwrap(), vec![-2]);
        assert!(parse_labels("3..1").is_err());
        assert!(parse_labels("a").unwrap_err().downcast_ref::<UsageError>().is_some());
        assert!(parse_labels(" ").is_err());
    }

    #[test]
    fn site_maps() {
        let m = parse_site_map("--cost", "0.5", &[1, 2]).unwrap();
        assert_eq!(m, BTreeMap::from([(1, 0.5), (2, 0.5)]));
        let m = parse_site_map("--cost", r#"{"-1": 2, "3": 0}"#, &[]).unwrap();
        assert_eq!(m, BTreeMap::from([(-1, 2.0), (3, 0.0)]));
        assert!(parse_site_map("--cost", "{", &[]).is_err());
    }
}
