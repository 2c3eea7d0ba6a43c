//! Binary morphology on the occupied set of a grid.
//!
//! Space outside the grid is treated as part of the set (it is unexplored).
//! Every operation is plain set morphology on Z² restricted to the grid
//! window, computed on an internally padded copy, so closing and opening are
//! exactly idempotent.

use super::{Cell, OccupancyGrid};

/// Square window with an odd side length, in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    side: usize,
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self { side: 3 }
    }
}

impl StructuringElement {
    pub fn square(side: usize) -> Option<Self> {
        (side >= 1 && side % 2 == 1).then_some(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn radius(&self) -> usize {
        self.side / 2
    }
}

/// Row-major boolean mask with the grid's dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn from_grid(grid: &OccupancyGrid, pred: impl Fn(Cell) -> bool) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            bits: grid.cells().iter().map(|c| pred(*c)).collect(),
        }
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }
}

// One separable pass; samples beyond the mask count as set.
fn pass(mask: &Mask, radius: usize, horizontal: bool, any: bool) -> Mask {
    let (w, h) = (mask.width, mask.height);
    let r = radius as i64;
    let mut bits = vec![false; w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = !any;
            for k in -r..=r {
                let (c, rr) = if horizontal {
                    (col as i64 + k, row as i64)
                } else {
                    (col as i64, row as i64 + k)
                };
                let v = if c < 0 || rr < 0 || c >= w as i64 || rr >= h as i64 {
                    true
                } else {
                    mask.bits[rr as usize * w + c as usize]
                };
                if any {
                    acc |= v;
                    if acc {
                        break;
                    }
                } else {
                    acc &= v;
                    if !acc {
                        break;
                    }
                }
            }
            bits[row * w + col] = acc;
        }
    }
    Mask { width: w, height: h, bits }
}

fn raw_dilate(mask: &Mask, r: usize) -> Mask {
    pass(&pass(mask, r, true, true), r, false, true)
}

fn raw_erode(mask: &Mask, r: usize) -> Mask {
    pass(&pass(mask, r, true, false), r, false, false)
}

impl Mask {
    // Border of `pad` set cells on every side.
    fn padded(&self, pad: usize) -> Mask {
        let (w, h) = (self.width + 2 * pad, self.height + 2 * pad);
        let mut bits = vec![true; w * h];
        for row in 0..self.height {
            let dst = (row + pad) * w + pad;
            bits[dst..dst + self.width]
                .copy_from_slice(&self.bits[row * self.width..(row + 1) * self.width]);
        }
        Mask { width: w, height: h, bits }
    }

    fn cropped(&self, pad: usize) -> Mask {
        let (w, h) = (self.width - 2 * pad, self.height - 2 * pad);
        let mut bits = Vec::with_capacity(w * h);
        for row in 0..h {
            let src = (row + pad) * self.width + pad;
            bits.extend_from_slice(&self.bits[src..src + w]);
        }
        Mask { width: w, height: h, bits }
    }
}

// Each stage is exact up to `radius` cells inside the padded border, so a
// chain of n stages needs n·radius cells of padding.
fn staged(mask: &Mask, se: StructuringElement, stages: &[bool]) -> Mask {
    let r = se.radius();
    let pad = r * stages.len();
    let mut m = mask.padded(pad);
    for dilate_stage in stages {
        m = if *dilate_stage { raw_dilate(&m, r) } else { raw_erode(&m, r) };
    }
    m.cropped(pad)
}

pub fn dilate(mask: &Mask, se: StructuringElement) -> Mask {
    staged(mask, se, &[true])
}

pub fn erode(mask: &Mask, se: StructuringElement) -> Mask {
    staged(mask, se, &[false])
}

/// Dilation followed by erosion: fills gaps narrower than the element.
pub fn close(mask: &Mask, se: StructuringElement) -> Mask {
    staged(mask, se, &[true, false])
}

/// Erosion followed by dilation: removes specks smaller than the element.
pub fn open(mask: &Mask, se: StructuringElement) -> Mask {
    staged(mask, se, &[false, true])
}

/// Closing then opening of the Occupied set, Unknown counted as Occupied.
///
/// Cells in the result become Occupied. Cells dropped from the set revert:
/// Unknown stays Unknown, Free or Occupied become Free.
pub fn morph_close_open(grid: &OccupancyGrid, se: StructuringElement) -> OccupancyGrid {
    let set = Mask::from_grid(grid, |c| c != Cell::Free);
    let result = staged(&set, se, &[true, false, false, true]);
    let cells = grid
        .cells()
        .iter()
        .zip(&result.bits)
        .map(|(orig, keep)| match (orig, keep) {
            (_, true) => Cell::Occupied,
            (Cell::Unknown, false) => Cell::Unknown,
            (_, false) => Cell::Free,
        })
        .collect();
    OccupancyGrid::from_cells(
        grid.width(),
        grid.height(),
        grid.resolution(),
        grid.origin(),
        cells,
    )
    .expect("dimensions preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use proptest::prelude::*;
    use std::collections::HashSet;

    type CellSet = HashSet<(i64, i64)>;

    // Explicit Minkowski morphology on a padded window; everything in the
    // padding belongs to the set.
    struct Oracle {
        w: i64,
        h: i64,
        pad: i64,
        offsets: Vec<(i64, i64)>,
    }

    impl Oracle {
        fn new(w: usize, h: usize, side: usize) -> Self {
            let r = (side / 2) as i64;
            let offsets = (-r..=r).flat_map(|a| (-r..=r).map(move |b| (a, b))).collect();
            Self { w: w as i64, h: h as i64, pad: 4 * r + 2, offsets }
        }

        fn window(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
            let p = self.pad;
            (-p..self.w + p).flat_map(move |x| (-p..self.h + p).map(move |y| (x, y)))
        }

        fn lift(&self, m: &Mask) -> CellSet {
            self.window()
                .filter(|&(x, y)| {
                    x < 0 || y < 0 || x >= self.w || y >= self.h
                        || m.get(x as usize, y as usize)
                })
                .collect()
        }

        fn dilate(&self, s: &CellSet) -> CellSet {
            let mut out = CellSet::new();
            for (x, y) in s {
                for (a, b) in &self.offsets {
                    out.insert((x + a, y + b));
                }
            }
            out
        }

        fn erode(&self, s: &CellSet) -> CellSet {
            self.window()
                .filter(|(x, y)| self.offsets.iter().all(|(a, b)| s.contains(&(x + a, y + b))))
                .collect()
        }

        fn lower(&self, s: &CellSet) -> Mask {
            let mut bits = vec![false; (self.w * self.h) as usize];
            for y in 0..self.h {
                for x in 0..self.w {
                    bits[(y * self.w + x) as usize] = s.contains(&(x, y));
                }
            }
            Mask { width: self.w as usize, height: self.h as usize, bits }
        }
    }

    fn mask_from(rows: &[&str]) -> Mask {
        let height = rows.len();
        let width = rows[0].len();
        let mut bits = vec![false; width * height];
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                bits[r * width + c] = ch == '#';
            }
        }
        Mask { width, height, bits }
    }

    fn free_grid(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::new(w, h, 0.05, Pose2D::identity(), Cell::Free).unwrap()
    }

    #[test]
    fn element_must_be_odd() {
        assert!(StructuringElement::square(0).is_none());
        assert!(StructuringElement::square(4).is_none());
        assert_eq!(StructuringElement::square(5).unwrap().radius(), 2);
    }

    #[test]
    fn isolated_speck_removed() {
        let mut g = free_grid(9, 9);
        g.set(4, 4, Cell::Occupied);
        let out = morph_close_open(&g, StructuringElement::default());
        assert_eq!(out.count(Cell::Occupied), 0);
    }

    #[test]
    fn closing_fills_single_cell_gap() {
        // the border counts as set, so keep free rows three deep around the wall
        let m = mask_from(&[
            "#########", //
            "#.......#",
            "#.......#",
            "#.......#",
            "####.####",
            "####.####",
            "####.####",
            "#.......#",
            "#.......#",
            "#.......#",
            "#########",
        ]);
        let closed = close(&m, StructuringElement::default());
        assert!(closed.get(4, 4) && closed.get(4, 5));
        assert!(!closed.get(4, 2));
        // the thick wall survives the opening stage of the full pipeline
        let both = open(&closed, StructuringElement::default());
        assert!(both.get(4, 4));
        assert!(!both.get(4, 8));
    }

    #[test]
    fn unknown_interior_and_free_space() {
        // free room with an unknown block in the middle and one stray hit
        let mut g = free_grid(16, 16);
        for r in 6..10 {
            for c in 6..10 {
                g.set(c, r, Cell::Unknown);
            }
        }
        g.set(3, 12, Cell::Occupied);
        // thin unknown sliver that opening removes
        g.set(12, 3, Cell::Unknown);
        let out = morph_close_open(&g, StructuringElement::default());
        assert_eq!(out.get(7, 7), Cell::Occupied);
        assert_eq!(out.get(3, 12), Cell::Free);
        assert_eq!(out.get(12, 3), Cell::Unknown);
        assert_eq!(out.get(4, 4), Cell::Free);
        assert_eq!(out.get(0, 0), Cell::Free);
    }

    fn random_mask() -> impl Strategy<Value = Mask> {
        proptest::collection::vec(proptest::bool::weighted(0.35), 40 * 40)
            .prop_map(|bits| Mask { width: 40, height: 40, bits })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn matches_minkowski_oracle(m in random_mask()) {
            let se = StructuringElement::default();
            let o = Oracle::new(40, 40, 3);
            let s = o.lift(&m);
            prop_assert_eq!(dilate(&m, se), o.lower(&o.dilate(&s)));
            prop_assert_eq!(erode(&m, se), o.lower(&o.erode(&s)));
            let closed = o.erode(&o.dilate(&s));
            let opened = o.dilate(&o.erode(&closed));
            prop_assert_eq!(open(&close(&m, se), se), o.lower(&opened));
        }

        #[test]
        fn stages_idempotent_and_ordered(m in random_mask(), side in prop_oneof![Just(1usize), Just(3), Just(5)]) {
            let se = StructuringElement::square(side).unwrap();
            let c = close(&m, se);
            let o = open(&m, se);
            prop_assert_eq!(&close(&c, se), &c);
            prop_assert_eq!(&open(&o, se), &o);
            prop_assert!(m.is_subset_of(&dilate(&m, se)));
            prop_assert!(erode(&m, se).is_subset_of(&m));
            prop_assert!(m.is_subset_of(&c));
            prop_assert!(o.is_subset_of(&m));
        }
    }
}
