//! Set specs such as `halfspace:e1:0`, `ball:0.5,0:1+box:-1,-1:0,0` or
//! `halfspace:1,1:0-ball:1,1:0.5`.
//!
//! Terms: `halfspace:V:R` (`{x·V ≥ R}`, `V` either `eK`, `-eK` or a vector),
//! `ball:C:R`, `box:LO:HI`, `strip:V:LO:HI`, `full`, `empty`. Terms combine
//! left to right with `+` (union) and `-` (difference); an operator is a sign
//! directly followed by a letter.

use anyhow::{anyhow, bail, Context, Result};
use ehrhard::sets::Region;

fn vector(s: &str, n: usize) -> Result<Vec<f64>> {
    let (sign, body) = match s.strip_prefix('-') {
        Some(b) if b.starts_with('e') => (-1.0, b),
        _ => (1.0, s),
    };
    if let Some(k) = body.strip_prefix('e') {
        let k: usize = k.parse().with_context(|| format!("bad axis in {s}"))?;
        if k == 0 || k > n {
            bail!("axis {s} out of range for dimension {n}");
        }
        let mut v = vec![0.0; n];
        v[k - 1] = sign;
        return Ok(v);
    }
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad number {x:?} in {s}")))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != n {
        bail!("vector {s} has {} components, expected {n}", v.len());
    }
    Ok(v)
}

fn scalar(s: &str) -> Result<f64> {
    s.trim().parse().with_context(|| format!("bad number {s:?}"))
}

fn term(t: &str, n: usize) -> Result<Region> {
    let parts: Vec<&str> = t.split(':').collect();
    let arity = |k: usize| -> Result<()> {
        if parts.len() != k + 1 {
            bail!("{} takes {k} arguments: {t}", parts[0]);
        }
        Ok(())
    };
    Ok(match parts[0] {
        "full" => Region::Full,
        "empty" => Region::Empty,
        "halfspace" => {
            arity(2)?;
            let v = vector(parts[1], n)?;
            if v.iter().all(|x| *x == 0.0) {
                bail!("half-space normal must be nonzero");
            }
            Region::half_space(&v, scalar(parts[2])?)
        }
        "ball" => {
            arity(2)?;
            Region::ball(&vector(parts[1], n)?, scalar(parts[2])?)
        }
        "box" => {
            arity(2)?;
            Region::Box { lo: vector(parts[1], n)?, hi: vector(parts[2], n)? }
        }
        "strip" => {
            arity(3)?;
            Region::Strip { normal: vector(parts[1], n)?, lo: scalar(parts[2])?, hi: scalar(parts[3])? }
        }
        other => bail!("unknown set term {other:?}"),
    })
}

pub fn parse_set(spec: &str, n: usize) -> Result<Region> {
    let spec: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
    let chars: Vec<char> = spec.chars().collect();
    let mut pieces: Vec<(char, String)> = Vec::new();
    let mut op = '+';
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let next_alpha = chars.get(i + 1).is_some_and(|d| d.is_ascii_alphabetic());
        if (c == '+' || c == '-') && next_alpha && i > 0 && chars[i - 1] != ':' && chars[i - 1] != ',' {
            pieces.push((op, std::mem::take(&mut cur)));
            op = c;
        } else {
            cur.push(c);
        }
    }
    pieces.push((op, cur));
    let mut region: Option<Region> = None;
    for (op, t) in pieces {
        if t.is_empty() {
            return Err(anyhow!("empty term in set spec {spec:?}"));
        }
        let r = term(&t, n)?;
        region = Some(match (region, op) {
            (None, _) => r,
            (Some(Region::Union { mut parts }), '+') => {
                parts.push(r);
                Region::Union { parts }
            }
            (Some(a), '+') => Region::union(vec![a, r]),
            (Some(a), _) => a.minus(r),
        });
    }
    region.ok_or_else(|| anyhow!("empty set spec"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_terms_and_operators() {
        let r = parse_set("halfspace:e1:0", 2).unwrap();
        assert!(r.contains(&[0.5, 3.0]) && !r.contains(&[-0.5, 3.0]));
        let r = parse_set("halfspace:-e2:-1", 2).unwrap();
        assert!(r.contains(&[0.0, 0.5]) && !r.contains(&[0.0, 1.5]));
        let r = parse_set("ball:0,0:1+box:2,2:3,3-ball:2.5,2.5:0.1", 2).unwrap();
        assert!(r.contains(&[0.2, 0.0]) && r.contains(&[2.1, 2.1]) && !r.contains(&[2.5, 2.5]));
        let r = parse_set("strip:e1:-1e-1:2", 2).unwrap();
        assert!(r.contains(&[0.0, 7.0]) && !r.contains(&[-0.2, 0.0]));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(parse_set("ball:0,0", 2).is_err());
        assert!(parse_set("halfspace:e3:0", 2).is_err());
        assert!(parse_set("blob:1", 2).is_err());
        assert!(parse_set("ball:0,0,0:1", 2).is_err());
    }
}
