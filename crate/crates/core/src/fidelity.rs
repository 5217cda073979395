//! Werner-state arithmetic.
//!
//! A Werner state with parameter `w` has fidelity `(1 + 3w) / 4`. A noise-free
//! swap multiplies Werner parameters, so a path of `n` elementary links at
//! parameter `w` delivers fidelity `(1 + 3 w^n) / 4`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FidelityError {
    #[error("fidelity {0} outside (0.5, 1]")]
    FidelityOutOfRange(f64),
    #[error("Werner parameter {0} outside (1/3, 1]")]
    WernerOutOfRange(f64),
    #[error("path length must be at least 1")]
    ZeroLength,
    #[error("target fidelity {target} exceeds elementary fidelity {elementary}")]
    TargetExceedsElementary { target: f64, elementary: f64 },
}

/// Werner parameter in (1/3, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct WernerParameter(f64);

impl WernerParameter {
    pub fn new(w: f64) -> Result<Self, FidelityError> {
        if w > 1.0 / 3.0 && w <= 1.0 {
            Ok(Self(w))
        } else {
            Err(FidelityError::WernerOutOfRange(w))
        }
    }

    pub(crate) fn from_fidelity_unchecked(f: f64) -> Self {
        Self((4.0 * f - 1.0) / 3.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn fidelity(self) -> f64 {
        (1.0 + 3.0 * self.0) / 4.0
    }
}

/// Fidelity in (0.5, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FidelityTarget(f64);

impl FidelityTarget {
    pub fn new(f: f64) -> Result<Self, FidelityError> {
        if f > 0.5 && f <= 1.0 {
            Ok(Self(f))
        } else {
            Err(FidelityError::FidelityOutOfRange(f))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn fidelity_to_werner(f: FidelityTarget) -> WernerParameter {
    WernerParameter((4.0 * f.0 - 1.0) / 3.0)
}

/// Werner parameter after swapping two pairs.
pub fn swap_compose(a: WernerParameter, b: WernerParameter) -> WernerParameter {
    WernerParameter(a.0 * b.0)
}

/// Fidelity delivered over `path_len` elementary links.
pub fn end_to_end_fidelity(w: WernerParameter, path_len: u32) -> Result<f64, FidelityError> {
    if path_len == 0 {
        return Err(FidelityError::ZeroLength);
    }
    Ok((1.0 + 3.0 * w.0.powi(path_len as i32)) / 4.0)
}

/// Maximum number of hops allowed by a fidelity target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthBound {
    Finite(u32),
    /// Perfect elementary pairs: any length meets the target.
    Unbounded,
}

impl LengthBound {
    /// Caps an unbounded (or overly long) bound at `max`.
    pub fn capped(self, max: u32) -> u32 {
        match self {
            LengthBound::Finite(l) => l.min(max),
            LengthBound::Unbounded => max,
        }
    }
}

const INTEGER_SNAP: f64 = 1e-9;

/// Largest path length whose end-to-end fidelity still meets `target`.
pub fn length_bound(
    target: FidelityTarget,
    elementary: FidelityTarget,
) -> Result<LengthBound, FidelityError> {
    if target.0 > elementary.0 {
        return Err(FidelityError::TargetExceedsElementary {
            target: target.0,
            elementary: elementary.0,
        });
    }
    let w_elem = fidelity_to_werner(elementary).0;
    if w_elem >= 1.0 {
        return Ok(LengthBound::Unbounded);
    }
    let w_target = fidelity_to_werner(target).0;
    let ratio = w_target.ln() / w_elem.ln();
    let nearest = ratio.round();
    let snapped = if (ratio - nearest).abs() < INTEGER_SNAP {
        nearest
    } else {
        ratio.floor()
    };
    // ratio >= 1 whenever target <= elementary < 1
    Ok(LengthBound::Finite(
        snapped.max(0.0).min(u32::MAX as f64) as u32
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ft(x: f64) -> FidelityTarget {
        FidelityTarget::new(x).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn werner_conversion() {
        assert_eq!(fidelity_to_werner(ft(1.0)).value(), 1.0);
        assert!(close(fidelity_to_werner(ft(0.9925)).value(), 0.99, 1e-15));
        assert!(close(fidelity_to_werner(ft(0.7)).value(), 0.6, 1e-15));
        assert!(FidelityTarget::new(0.5).is_err());
        assert!(FidelityTarget::new(1.01).is_err());
        assert!(WernerParameter::new(1.0 / 3.0).is_err());
    }

    #[test]
    fn swap_composition() {
        let one = WernerParameter::new(1.0).unwrap();
        assert_eq!(swap_compose(one, one).value(), 1.0);
        let w = WernerParameter::new(0.99).unwrap();
        let out = swap_compose(w, w);
        assert!(close(out.value(), 0.9801, 1e-15));
        assert!(close(out.fidelity(), 0.985075, 1e-12));
        assert_eq!(swap_compose(w, one), w);
    }

    #[test]
    fn end_to_end() {
        let w = WernerParameter::new(0.99).unwrap();
        assert!(close(end_to_end_fidelity(w, 1).unwrap(), 0.9925, 1e-15));
        assert!(close(end_to_end_fidelity(w, 4).unwrap(), 0.970447, 1e-6));
        let one = WernerParameter::new(1.0).unwrap();
        assert_eq!(end_to_end_fidelity(one, 17).unwrap(), 1.0);
        assert_eq!(end_to_end_fidelity(w, 0), Err(FidelityError::ZeroLength));
    }

    #[test]
    fn werner_099_at_lengths_five_to_seven() {
        let w = WernerParameter::new(0.99).unwrap();
        assert!(close(end_to_end_fidelity(w, 6).unwrap(), 0.95610, 1e-4));
        assert!(close(end_to_end_fidelity(w, 5).unwrap(), 0.96322, 1e-4));
        assert!(close(end_to_end_fidelity(w, 7).unwrap(), 0.94904, 1e-4));
    }

    #[test]
    fn length_bounds() {
        assert_eq!(
            length_bound(ft(0.9925), ft(0.9925)),
            Ok(LengthBound::Finite(1))
        );
        assert_eq!(
            length_bound(ft(0.95), ft(0.9925)),
            Ok(LengthBound::Finite(6))
        );
        assert_eq!(
            length_bound(ft(0.93), ft(0.9925)),
            Ok(LengthBound::Finite(9))
        );
        assert_eq!(length_bound(ft(0.9), ft(1.0)), Ok(LengthBound::Unbounded));
        assert!(matches!(
            length_bound(ft(0.995), ft(0.9925)),
            Err(FidelityError::TargetExceedsElementary { .. })
        ));
        assert_eq!(LengthBound::Unbounded.capped(49), 49);
        assert_eq!(LengthBound::Finite(60).capped(49), 49);
    }

    #[test]
    fn exact_tie_is_not_floored_down() {
        // target chosen exactly at length 3
        let w = 0.9_f64;
        let target = (1.0 + 3.0 * w.powi(3)) / 4.0;
        let elem = (1.0 + 3.0 * w) / 4.0;
        assert_eq!(
            length_bound(ft(target), ft(elem)),
            Ok(LengthBound::Finite(3))
        );
    }

    proptest! {
        #[test]
        fn length_bound_is_tight(a in 0.5001f64..0.99999, b in 0.5001f64..0.99999) {
            let (target, elem) = if a <= b { (a, b) } else { (b, a) };
            let l = match length_bound(ft(target), ft(elem)).unwrap() {
                LengthBound::Finite(l) => l,
                LengthBound::Unbounded => unreachable!(),
            };
            prop_assert!(l >= 1);
            let w = fidelity_to_werner(ft(elem));
            prop_assert!(end_to_end_fidelity(w, l).unwrap() >= target - 1e-12);
            prop_assert!(end_to_end_fidelity(w, l + 1).unwrap() < target + 1e-12);
        }

        #[test]
        fn round_trip_and_monotone(f in 0.5001f64..1.0, n in 1u32..40) {
            let w = fidelity_to_werner(ft(f));
            prop_assert!((end_to_end_fidelity(w, 1).unwrap() - f).abs() < 1e-15);
            let (longer, shorter) = (end_to_end_fidelity(w, n + 1).unwrap(), end_to_end_fidelity(w, n).unwrap());
            prop_assert!(longer <= shorter);
            // strict unless the Werner term is below the resolution of 1/4
            if w.value().powi(n as i32 + 1) > 1e-14 {
                prop_assert!(longer < shorter);
            }
        }

        #[test]
        fn composition_laws(a in 0.34f64..1.0, b in 0.34f64..1.0, c in 0.34f64..1.0, n in 1u32..12) {
            let (a, b, c) = (
                WernerParameter::new(a).unwrap(),
                WernerParameter::new(b).unwrap(),
                WernerParameter::new(c).unwrap(),
            );
            prop_assert_eq!(swap_compose(a, b), swap_compose(b, a));
            let left = swap_compose(swap_compose(a, b), c).value();
            let right = swap_compose(a, swap_compose(b, c)).value();
            prop_assert!((left - right).abs() < 1e-15);
            let mut acc = a;
            for _ in 1..n {
                acc = swap_compose(acc, a);
            }
            prop_assert!((acc.value() - a.value().powi(n as i32)).abs() < 1e-13);
        }
    }
}
