#![allow(dead_code)]

use ehrhard::sets::Region;
use rand::Rng;

/// Union of one to three balls, boxes or strips inside `[−2.5, 2.5]²`.
pub fn random_region<R: Rng>(rng: &mut R) -> Region {
    let k = rng.random_range(1..=3);
    let parts = (0..k).map(|_| random_primitive(rng, true)).collect();
    Region::union(parts)
}

/// Same as `random_region` without boxes, so the result can be rotated.
pub fn random_rotatable_region<R: Rng>(rng: &mut R) -> Region {
    let k = rng.random_range(1..=3);
    let parts = (0..k).map(|_| random_primitive(rng, false)).collect();
    Region::union(parts)
}

fn random_primitive<R: Rng>(rng: &mut R, boxes: bool) -> Region {
    let kinds = if boxes { 3 } else { 2 };
    match rng.random_range(0..kinds) {
        0 => {
            let c = [rng.random_range(-1.8..1.8), rng.random_range(-1.8..1.8)];
            Region::ball(&c, rng.random_range(0.3..1.2))
        }
        1 => {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let lo = rng.random_range(-1.5..1.0);
            Region::Strip { normal: vec![t.cos(), t.sin()], lo, hi: lo + rng.random_range(0.3..1.5) }
        }
        _ => {
            let lo = [rng.random_range(-2.5..1.5), rng.random_range(-2.5..1.5)];
            let hi = [lo[0] + rng.random_range(0.4..2.0), lo[1] + rng.random_range(0.4..2.0)];
            Region::Box { lo: lo.to_vec(), hi: hi.to_vec() }
        }
    }
}

pub fn unit(t: f64) -> Vec<f64> {
    vec![t.cos(), t.sin()]
}
