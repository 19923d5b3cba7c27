//! Bracketing root isolation on a uniform scan.
//!
//! Sign changes between neighbouring samples are refined by bisection. A
//! pair of roots closer together than the scan spacing shows up as a sample
//! extremum that points toward zero without a sign change; such extrema are
//! refined by golden-section search and split into two brackets when the
//! refined value changes sign.

/// Bisection to full double precision. `f(lo)` and `f(hi)` must have
/// opposite signs.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return lo;
    }
    if f_hi == 0.0 {
        return hi;
    }
    debug_assert!(f_lo.signum() != f_hi.signum(), "bisect: no sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bisection on a boolean predicate: `pred(lo)` is true, `pred(hi)` false
/// (or vice versa). Returns the final bracket once narrower than `tol`.
pub fn bisect_predicate(
    mut pred: impl FnMut(f64) -> bool,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    let at_lo = pred(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..120 {
        if hi - lo <= 4.0 * f64::EPSILON * (lo.abs() + hi.abs()).max(1e-300) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRoot {
    pub x: f64,
    /// Double root: the function touches zero without crossing (within the
    /// caller's tangency tolerance), or two roots merged below resolution.
    pub tangent: bool,
}

/// All roots of `f` on `[lo, hi]` found from `n` uniform intervals.
///
/// Extrema whose refined value lies within `tangent_tol` of zero without
/// changing sign are reported as tangent roots; roots closer than
/// `merge_tol` are merged into one tangent root. Pass zeros to disable both.
pub fn scan_roots(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
    tangent_tol: f64,
    merge_tol: f64,
) -> Vec<ScanRoot> {
    let xs: Vec<f64> = (0..=n)
        .map(|k| {
            if k == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n as f64
            }
        })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();

    for k in 0..=n {
        if fs[k] == 0.0 {
            roots.push(ScanRoot {
                x: xs[k],
                tangent: false,
            });
            // a second root may hide next to an exact zero on a node
            if k > 0 && k < n && fs[k - 1] != 0.0 && fs[k - 1].signum() == fs[k + 1].signum() {
                let s = fs[k - 1].signum();
                let (x_ext, f_ext) = golden_min(|x| s * f(x), xs[k - 1], xs[k + 1]);
                if f_ext < 0.0 {
                    let other = if x_ext > xs[k] {
                        bisect(&f, x_ext, xs[k + 1])
                    } else {
                        bisect(&f, xs[k - 1], x_ext)
                    };
                    roots.push(ScanRoot {
                        x: other,
                        tangent: false,
                    });
                }
            }
            continue;
        }
        if k < n && fs[k + 1] != 0.0 && fs[k].signum() != fs[k + 1].signum() {
            roots.push(ScanRoot {
                x: bisect(&f, xs[k], xs[k + 1]),
                tangent: false,
            });
        }
        if k == 0 || k == n {
            continue;
        }
        let s = fs[k].signum();
        let (a, b) = (fs[k - 1], fs[k + 1]);
        if a.signum() != s || b.signum() != s || a == 0.0 || b == 0.0 {
            continue;
        }
        if fs[k].abs() <= a.abs() && fs[k].abs() <= b.abs() {
            let (x_ext, f_ext) = golden_min(|x| s * f(x), xs[k - 1], xs[k + 1]);
            let f_ext = s * f_ext;
            if f_ext == 0.0 {
                roots.push(ScanRoot {
                    x: x_ext,
                    tangent: true,
                });
            } else if f_ext.signum() != s {
                roots.push(ScanRoot {
                    x: bisect(&f, xs[k - 1], x_ext),
                    tangent: false,
                });
                roots.push(ScanRoot {
                    x: bisect(&f, x_ext, xs[k + 1]),
                    tangent: false,
                });
            } else if f_ext.abs() <= tangent_tol {
                roots.push(ScanRoot {
                    x: x_ext,
                    tangent: true,
                });
            }
        }
    }

    roots.sort_by(|p, q| p.x.total_cmp(&q.x));
    roots.dedup_by(|later, earlier| later.x == earlier.x);
    if merge_tol > 0.0 {
        let mut merged: Vec<ScanRoot> = Vec::with_capacity(roots.len());
        for root in roots {
            match merged.last_mut() {
                Some(prev) if root.x - prev.x < merge_tol => {
                    prev.x = 0.5 * (prev.x + root.x);
                    prev.tangent = true;
                }
                _ => merged.push(root),
            }
        }
        merged
    } else {
        roots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn predicate_bracket_width() {
        let (lo, hi) = bisect_predicate(|x| x < 0.3, 0.0, 1.0, 1e-10);
        assert!(hi - lo <= 1e-10);
        assert!(lo < 0.3 && hi >= 0.3);
    }

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, fx) = golden_min(|x| (x - 0.37).powi(2) + 1.0, -1.0, 2.0);
        assert!((x - 0.37).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scan_finds_cubic_roots() {
        let f = |x: f64| (x - 0.1) * (x - 0.5) * (x + 0.7);
        let roots = scan_roots(f, -1.0, 1.0, 200, 0.0, 0.0);
        let xs: Vec<f64> = roots.iter().map(|r| r.x).collect();
        assert_eq!(xs.len(), 3);
        for (got, want) in xs.iter().zip([-0.7, 0.1, 0.5]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn close_pair_inside_one_cell_is_split() {
        // roots 1e-4 apart, scan spacing 1e-2
        let f = |x: f64| (x - 0.3) * (x - 0.3001) + 0.0;
        let roots = scan_roots(f, 0.0, 1.0, 100, 0.0, 0.0);
        assert_eq!(roots.len(), 2);
        assert!((roots[0].x - 0.3).abs() < 1e-12);
        assert!((roots[1].x - 0.3001).abs() < 1e-12);
    }

    #[test]
    fn near_miss_reported_as_tangent() {
        let f = |x: f64| (x - 0.42).powi(2) + 1e-13;
        assert!(scan_roots(f, 0.0, 1.0, 50, 0.0, 0.0).is_empty());
        let roots = scan_roots(f, 0.0, 1.0, 50, 1e-10, 0.0);
        assert_eq!(roots.len(), 1);
        assert!(roots[0].tangent);
        assert!((roots[0].x - 0.42).abs() < 1e-6);
    }

    #[test]
    fn merge_collapses_close_pair() {
        let f = |x: f64| (x - 0.3) * (x - 0.3000001);
        let roots = scan_roots(f, 0.0, 1.0, 100, 0.0, 1e-6);
        assert_eq!(roots.len(), 1);
        assert!(roots[0].tangent);
    }
}
