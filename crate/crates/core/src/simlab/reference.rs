//! Published coverage and length figures for the standard designs, bundled
//! as a CSV so experiment reports can show them side by side.

use super::{Family, SimDesign, Target};
use crate::inference::Method;

const TABLE: &str = include_str!("../../data/reference_values.csv");

/// One published cell: mean coverage and length with their run-to-run sds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceValue {
    pub coverage: f64,
    pub coverage_sd: f64,
    pub length: f64,
    pub length_sd: f64,
}

fn same(field: &str, value: f64) -> bool {
    field.parse::<f64>().is_ok_and(|v| (v - value).abs() < 1e-12)
}

/// Looks up the published figure for `design` at `(method, target)`.
/// Only the 95% level is tabulated.
pub fn lookup(design: &SimDesign, method: Method, target: Target) -> Option<ReferenceValue> {
    if (design.level - 0.95).abs() > 1e-12 {
        return None;
    }
    let method = method.as_str().to_ascii_lowercase();
    TABLE.lines().skip(1).find_map(|line| {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 || f[0] != design.family.name() {
            return None;
        }
        let family_ok = match design.family {
            Family::ContaminatedNormal { rho, contamination } => same(f[1], rho) && same(f[2], contamination),
            Family::Kotz { rho } => same(f[1], rho),
            Family::Pareto { scale, shape } => same(f[3], scale) && same(f[4], shape),
        };
        let ok = family_ok && f[5].parse::<usize>().ok() == Some(design.n) && f[6] == method && f[7] == target.as_str();
        if !ok {
            return None;
        }
        Some(ReferenceValue {
            coverage: f[8].parse().ok()?,
            coverage_sd: f[9].parse().ok()?,
            length: f[10].parse().ok()?,
            length_sd: f[11].parse().ok()?,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_complete() {
        assert_eq!(TABLE.lines().skip(1).filter(|l| !l.is_empty()).count(), 100);
    }

    #[test]
    fn known_cells() {
        let d = SimDesign::new(Family::ContaminatedNormal { rho: 0.5, contamination: 0.0 }, 20, 1000, 10, 0);
        let v = lookup(&d, Method::Wjel, Target::Gamma1).unwrap();
        assert_eq!((v.coverage, v.length), (0.944, 0.839));
        let d = SimDesign::new(Family::Pareto { scale: 1.0, shape: 2.0 }, 100, 1000, 10, 0);
        assert_eq!(lookup(&d, Method::Jel, Target::GiniIndex).unwrap().coverage, 0.815);
        let d = SimDesign::new(Family::Kotz { rho: 0.1 }, 20, 1000, 10, 0);
        assert_eq!(lookup(&d, Method::Wjel, Target::Gamma2).unwrap().length, 1.14);
        assert!(lookup(&d, Method::Vj, Target::Gamma2).is_none());
    }
}
