//! Flag value syntax: distribution specs, number lists and state maps.

use std::collections::BTreeMap;

use ccfrontier_core::RatioDist;

use crate::error::{usage, Result};

/// `loguniform:e_lo,e_hi`, `uniform:lo,hi`, `point:v` or `atoms:<json>`,
/// where the JSON is `[[a, p], ...]` or `{"atoms": [[a, p], ...]}`.
/// File references (`@path`) are resolved by the caller.
pub fn dist(spec: &str) -> Result<RatioDist> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| usage(format!("distribution {spec:?} needs the form kind:params")))?;
    let nums = || -> Result<Vec<f64>> { rest.split(',').map(number).collect() };
    let two = || -> Result<(f64, f64)> {
        match nums()?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(usage(format!("{kind} needs two parameters, got {rest:?}"))),
        }
    };
    Ok(match kind.trim().to_ascii_lowercase().as_str() {
        "loguniform" | "log-uniform" => {
            let (a, b) = two()?;
            RatioDist::log_uniform(a, b)?
        }
        "uniform" => {
            let (a, b) = two()?;
            RatioDist::uniform(a, b)?
        }
        "point" | "point-mass" => match nums()?.as_slice() {
            [v] => RatioDist::point_mass(*v)?,
            _ => return Err(usage(format!("point needs one parameter, got {rest:?}"))),
        },
        "atoms" => {
            let text = rest.trim();
            if text.starts_with('[') {
                RatioDist::from_json(&format!("{{\"atoms\":{text}}}"))?
            } else {
                RatioDist::from_json(text)?
            }
        }
        other => return Err(usage(format!("unknown distribution kind {other:?}"))),
    })
}

pub fn number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| usage(format!("expected a number, got {:?}", s.trim())))
}

/// Comma-separated numbers; an item `start:stop:step` expands to the
/// inclusive range.
pub fn list(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in s.split(',').filter(|i| !i.trim().is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(number(v)?),
            [a, b, step] => {
                let (a, b, step) = (number(a)?, number(b)?, number(step)?);
                if !(step > 0.0) || b < a {
                    return Err(usage(format!("bad range {item:?}: need start <= stop and step > 0")));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                if n > 1_000_000 {
                    return Err(usage(format!("range {item:?} has too many points")));
                }
                out.extend((0..=n).map(|i| a + step * i as f64));
            }
            _ => return Err(usage(format!("bad list item {item:?}"))),
        }
    }
    if out.is_empty() {
        return Err(usage("empty value list"));
    }
    Ok(out)
}

/// `state:C` pairs, e.g. `0:0.8,1:1.1`.
pub fn state_map(s: &str) -> Result<BTreeMap<usize, f64>> {
    s.split(',')
        .filter(|i| !i.trim().is_empty())
        .map(|item| {
            let (k, v) = item
                .split_once(':')
                .ok_or_else(|| usage(format!("C_map entry {item:?} needs the form state:C")))?;
            let k = k
                .trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("invalid state id {:?}", k.trim())))?;
            Ok((k, number(v)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dist_specs() {
        assert_eq!(dist("loguniform:-1,1").unwrap(), RatioDist::log_uniform(-1.0, 1.0).unwrap());
        assert_eq!(dist("uniform:0.27,2").unwrap(), RatioDist::uniform(0.27, 2.0).unwrap());
        assert_eq!(dist("point:1").unwrap(), RatioDist::point_mass(1.0).unwrap());
        let a = RatioDist::empirical(vec![(0.5, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(dist("atoms:[[0.5,0.5],[2,0.5]]").unwrap(), a);
        assert_eq!(dist(r#"atoms:{"atoms":[[0.5,0.5],[2,0.5]]}"#).unwrap(), a);
        assert!(dist("uniform:2").is_err());
        assert!(dist("gamma:1,2").is_err());
        assert!(dist("uniform").is_err());
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(list("0.5,1,2,4").unwrap(), vec![0.5, 1.0, 2.0, 4.0]);
        let r = list("0.3:1.2:0.1").unwrap();
        assert_eq!(r.len(), 10);
        assert!((r[9] - 1.2).abs() < 1e-12);
        assert!(list("1:0:0.1").is_err());
        assert!(list("").is_err());
    }

    #[test]
    fn state_maps() {
        assert_eq!(state_map("0:0.8,2:1.1").unwrap(), BTreeMap::from([(0, 0.8), (2, 1.1)]));
        assert!(state_map("a:1").is_err());
    }
}
