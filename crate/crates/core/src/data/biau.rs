//! A 0/1 regression function on `[0, 1]^2` that starves CART of useful
//! splits.
//!
//! The square is cut into a 3x3 grid of cells with side 1/3.
//!
//! | cell                      | value                                              |
//! |---------------------------|----------------------------------------------------|
//! | lower-left `[0,1/3)^2`    | vertical stripes: with `u = 3 x1`, stripe `k >= 1` covers `[1 - 2^(1-k), 1 - 2^-k)` and has value `k mod 2` |
//! | upper-right `[2/3,1]^2`   | horizontal stripes, same rule with `u = 3 x2 - 2`   |
//! | center `[1/3,2/3)^2`      | `CHECKERBOARD x CHECKERBOARD` checkerboard, value `(a + b) mod 2` for cell `(a, b)` |
//! | other cells               | 0                                                  |
//!
//! Stripes beyond `STRIPES` are truncated to 0. Each stripe cell offers CART
//! a sequence of ever thinner alternating bands; the center checkerboard has
//! no single axis-aligned split with any gain.

/// Geometry revision; bump when the table above changes.
pub const GEOMETRY_VERSION: u32 = 1;
/// Number of stripes kept per striped cell.
pub const STRIPES: u32 = 30;
/// Checkerboard resolution of the center cell.
pub const CHECKERBOARD: usize = 4;

fn cell(v: f64) -> usize {
    ((3.0 * v).floor().max(0.0) as usize).min(2)
}

fn stripe_value(u: f64) -> f64 {
    let mut edge = 1.0;
    for k in 1..=STRIPES {
        edge *= 0.5;
        if u < 1.0 - edge {
            return f64::from(k % 2);
        }
    }
    0.0
}

/// The truncated striped/checkerboard function. Expects `x.len() >= 2`.
pub fn biau_cef(x: &[f64]) -> f64 {
    match (cell(x[0]), cell(x[1])) {
        (0, 0) => stripe_value(3.0 * x[0]),
        (2, 2) => stripe_value(3.0 * x[1] - 2.0),
        (1, 1) => {
            let c = CHECKERBOARD;
            let a = (((3.0 * x[0] - 1.0) * c as f64).floor() as usize).min(c - 1);
            let b = (((3.0 * x[1] - 1.0) * c as f64).floor() as usize).min(c - 1);
            ((a + b) % 2) as f64
        }
        _ => 0.0,
    }
}

/// Lower and upper corners of the center (checkerboard) cell.
pub fn center_cell() -> ([f64; 2], [f64; 2]) {
    ([1.0 / 3.0, 1.0 / 3.0], [2.0 / 3.0, 2.0 / 3.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untouched_cells_are_zero() {
        for x in [[0.9, 0.1], [0.1, 0.9], [0.5, 0.1], [0.9, 0.5]] {
            assert_eq!(biau_cef(&x), 0.0);
        }
    }

    #[test]
    fn stripes_alternate_with_halving_width() {
        // first stripe [0, 1/2) of the cell, second [1/2, 3/4), ...
        assert_eq!(biau_cef(&[0.1 / 3.0, 0.2]), 1.0);
        assert_eq!(biau_cef(&[0.6 / 3.0, 0.2]), 0.0);
        assert_eq!(biau_cef(&[0.8 / 3.0, 0.2]), 1.0);
        assert_eq!(biau_cef(&[0.9, 2.0 / 3.0 + 0.1 / 3.0]), 1.0);
        assert_eq!(biau_cef(&[0.9, 2.0 / 3.0 + 0.6 / 3.0]), 0.0);
        // stripes depend on one coordinate only
        assert_eq!(biau_cef(&[0.1 / 3.0, 0.01]), biau_cef(&[0.1 / 3.0, 0.3]));
    }

    #[test]
    fn checkerboard_flips_across_internal_lines() {
        let step = 1.0 / (3.0 * CHECKERBOARD as f64);
        let lo = 1.0 / 3.0;
        for a in 0..CHECKERBOARD {
            for b in 0..CHECKERBOARD {
                let x = lo + (a as f64 + 0.5) * step;
                let y = lo + (b as f64 + 0.5) * step;
                let v = biau_cef(&[x, y]);
                assert_eq!(v, ((a + b) % 2) as f64);
                if a + 1 < CHECKERBOARD {
                    assert_ne!(v, biau_cef(&[x + step, y]));
                }
                if b + 1 < CHECKERBOARD {
                    assert_ne!(v, biau_cef(&[x, y + step]));
                }
            }
        }
    }

    #[test]
    fn center_cell_mean_is_one_half() {
        let res = 512;
        let (lo, hi) = center_cell();
        let mut sum = 0.0;
        for i in 0..res {
            for j in 0..res {
                let x = lo[0] + (i as f64 + 0.5) / res as f64 * (hi[0] - lo[0]);
                let y = lo[1] + (j as f64 + 0.5) / res as f64 * (hi[1] - lo[1]);
                sum += biau_cef(&[x, y]);
            }
        }
        assert_eq!(sum / (res * res) as f64, 0.5);
    }

    #[test]
    fn zero_one_valued() {
        for i in 0..=100 {
            for j in 0..=100 {
                let v = biau_cef(&[i as f64 / 100.0, j as f64 / 100.0]);
                assert!(v == 0.0 || v == 1.0);
            }
        }
    }
}
