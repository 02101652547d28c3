use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Row-major binary raster. Pixel (row i, col j) has centre (u, v) = (j, i).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, IngestError> {
        if bits.len() != width * height {
            return Err(IngestError::DimensionMismatch(format!(
                "{} bits for a {width}×{height} mask",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Dilation by one pixel with a 3×3 square element, clipped to the frame.
    pub fn dilated(&self) -> BinaryMask {
        let (w, h) = (self.width, self.height);
        BinaryMask::from_fn(w, h, |r, c| {
            let rows = r.saturating_sub(1)..=(r + 1).min(h - 1);
            rows.into_iter().any(|rr| (c.saturating_sub(1)..=(c + 1).min(w - 1)).any(|cc| self.get(rr, cc)))
        })
    }

    /// Set pixels as (row, col).
    pub fn set_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i / self.width, i % self.width))
    }
}

/// Decode alternating background/foreground run lengths (background first).
pub fn decode_rle(runs: &[u64], width: usize, height: usize) -> Result<BinaryMask, IngestError> {
    check_total(runs, width, height)?;
    let mut bits = Vec::with_capacity(width * height);
    for (i, &r) in runs.iter().enumerate() {
        bits.extend(std::iter::repeat(i % 2 == 1).take(r as usize));
    }
    Ok(BinaryMask { width, height, bits })
}

/// Canonical run-length encoding: a (possibly zero) leading background run,
/// then strictly positive alternating runs.
pub fn encode_rle(mask: &BinaryMask) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u64;
    for &b in &mask.bits {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

/// Mean of set-pixel centres as (u, v) = (col, row).
pub fn centroid(mask: &BinaryMask) -> Result<Point2<f64>, IngestError> {
    let (mut su, mut sv, mut n) = (0u64, 0u64, 0u64);
    for (row, col) in mask.set_pixels() {
        su += col as u64;
        sv += row as u64;
        n += 1;
    }
    if n == 0 {
        return Err(IngestError::EmptyMask);
    }
    Ok(Point2::new(su as f64 / n as f64, sv as f64 / n as f64))
}

fn check_total(runs: &[u64], width: usize, height: usize) -> Result<(), IngestError> {
    let expected = (width as u64) * (height as u64);
    match runs.iter().try_fold(0u64, |acc, r| acc.checked_add(*r)) {
        Some(t) if t == expected => Ok(()),
        Some(got) => Err(IngestError::LengthMismatch { expected, got }),
        None => Err(IngestError::LengthMismatch { expected, got: u64::MAX }),
    }
}

/// [`centroid`] computed from run lengths without decoding. Sums are exact
/// integers, so the result is bit-identical to the decoded path.
pub fn centroid_rle(runs: &[u64], width: usize, height: usize) -> Result<Point2<f64>, IngestError> {
    check_total(runs, width, height)?;
    let w = width as u128;
    let (mut su, mut sv, mut n) = (0u128, 0u128, 0u128);
    let mut pos = 0u128;
    for (i, &r) in runs.iter().enumerate() {
        let (start, end) = (pos, pos + r as u128);
        pos = end;
        if i % 2 == 0 {
            continue;
        }
        let mut s = start;
        while s < end {
            let row = s / w;
            let row_end = ((row + 1) * w).min(end);
            let (c0, c1) = (s - row * w, row_end - row * w);
            su += (c0 + c1 - 1) * (c1 - c0) / 2;
            sv += row * (c1 - c0);
            n += c1 - c0;
            s = row_end;
        }
    }
    if n == 0 {
        return Err(IngestError::EmptyMask);
    }
    Ok(Point2::new(su as f64 / n as f64, sv as f64 / n as f64))
}

/// Canonical runs for a mask given as row spans `(row, col_start, col_end)`
/// (end exclusive), sorted row-major and non-overlapping.
pub fn runs_from_spans(spans: &[(usize, usize, usize)], width: usize, height: usize) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut cursor = 0u64;
    let mut fg_start = None::<u64>;
    for &(row, c0, c1) in spans.iter().filter(|s| s.2 > s.1) {
        let (s, e) = ((row * width + c0) as u64, (row * width + c1) as u64);
        match fg_start {
            Some(_) if s == cursor => {}
            Some(fs) => {
                runs.push(cursor - fs);
                runs.push(s - cursor);
                fg_start = Some(s);
            }
            None => {
                runs.push(s - cursor);
                fg_start = Some(s);
            }
        }
        cursor = e;
    }
    if let Some(fs) = fg_start {
        runs.push(cursor - fs);
    }
    let total = (width * height) as u64;
    if runs.is_empty() || cursor < total {
        runs.push(total - cursor);
    }
    runs
}

/// Tight pixel bounding box (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: usize,
    pub v_min: usize,
    pub u_max: usize,
    pub v_max: usize,
}

impl BBox {
    pub fn area(&self) -> usize {
        (self.u_max - self.u_min + 1) * (self.v_max - self.v_min + 1)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.u_min..=self.u_max).contains(&col) && (self.v_min..=self.v_max).contains(&row)
    }
}

pub fn bbox_from_mask(mask: &BinaryMask) -> Result<BBox, IngestError> {
    let mut it = mask.set_pixels();
    let (r0, c0) = it.next().ok_or(IngestError::EmptyMask)?;
    let mut b = BBox { u_min: c0, v_min: r0, u_max: c0, v_max: r0 };
    for (r, c) in it {
        b.u_min = b.u_min.min(c);
        b.u_max = b.u_max.max(c);
        b.v_min = b.v_min.min(r);
        b.v_max = b.v_max.max(r);
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> BinaryMask {
        decode_rle(&[2, 2, 2, 2, 8], 4, 4).unwrap()
    }

    #[test]
    fn decode_example() {
        let m = example();
        let set: Vec<_> = m.set_pixels().collect();
        assert_eq!(set, vec![(0, 2), (0, 3), (1, 2), (1, 3)]);
        assert!(decode_rle(&[16], 4, 4).unwrap().is_empty());
        assert!(matches!(
            decode_rle(&[15], 4, 4),
            Err(IngestError::LengthMismatch { expected: 16, got: 15 })
        ));
    }

    #[test]
    fn encode_examples() {
        let ones = BinaryMask::from_fn(4, 4, |_, _| true);
        assert_eq!(encode_rle(&ones), vec![0, 16]);
        assert_eq!(encode_rle(&example()), vec![2, 2, 2, 2, 8]);
        assert_eq!(encode_rle(&BinaryMask::empty(3, 2)), vec![6]);
    }

    #[test]
    fn zero_length_interior_runs_decode() {
        let m = decode_rle(&[1, 0, 2, 1, 0], 2, 2).unwrap();
        assert_eq!(m.set_pixels().collect::<Vec<_>>(), vec![(1, 1)]);
    }

    #[test]
    fn centroid_examples() {
        let block = BinaryMask::from_fn(4, 4, |r, c| r < 2 && c < 2);
        assert_eq!(centroid(&block).unwrap(), Point2::new(0.5, 0.5));
        let single = BinaryMask::from_fn(10, 5, |r, c| r == 3 && c == 7);
        assert_eq!(centroid(&single).unwrap(), Point2::new(7.0, 3.0));
        let l = BinaryMask::from_fn(3, 3, |r, c| matches!((r, c), (0, 0) | (1, 0) | (1, 1)));
        let c = centroid(&l).unwrap();
        assert!((c.x - 1.0 / 3.0).abs() < 1e-15 && (c.y - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(centroid(&BinaryMask::empty(2, 2)), Err(IngestError::EmptyMask)));
    }

    #[test]
    fn bbox_examples() {
        assert_eq!(bbox_from_mask(&example()).unwrap(), BBox { u_min: 2, v_min: 0, u_max: 3, v_max: 1 });
        let full = BinaryMask::from_fn(7, 5, |_, _| true);
        assert_eq!(bbox_from_mask(&full).unwrap(), BBox { u_min: 0, v_min: 0, u_max: 6, v_max: 4 });
        assert!(bbox_from_mask(&BinaryMask::empty(2, 2)).is_err());
    }

    fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), w * h)
                .prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
        })
    }

    proptest! {
        #[test]
        fn rle_roundtrip(m in mask_strategy()) {
            let runs = encode_rle(&m);
            let back = decode_rle(&runs, m.width(), m.height()).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(encode_rle(&back), runs);
        }

        #[test]
        fn centroid_rle_matches_decoded(m in mask_strategy()) {
            let runs = encode_rle(&m);
            match centroid(&m) {
                Ok(c) => prop_assert_eq!(centroid_rle(&runs, m.width(), m.height()).unwrap(), c),
                Err(_) => prop_assert!(centroid_rle(&runs, m.width(), m.height()).is_err()),
            }
        }

        #[test]
        fn spans_encode_canonically(m in mask_strategy()) {
            let mut spans = Vec::new();
            for r in 0..m.height() {
                let mut c = 0;
                while c < m.width() {
                    if m.get(r, c) {
                        let c0 = c;
                        while c < m.width() && m.get(r, c) {
                            c += 1;
                        }
                        spans.push((r, c0, c));
                    } else {
                        c += 1;
                    }
                }
            }
            prop_assert_eq!(runs_from_spans(&spans, m.width(), m.height()), encode_rle(&m));
        }

        #[test]
        fn bbox_is_tight(m in mask_strategy()) {
            if let Ok(b) = bbox_from_mask(&m) {
                prop_assert!(m.set_pixels().all(|(r, c)| b.contains(r, c)));
                let px: Vec<_> = m.set_pixels().collect();
                prop_assert!(px.iter().any(|&(_, c)| c == b.u_min));
                prop_assert!(px.iter().any(|&(_, c)| c == b.u_max));
                prop_assert!(px.iter().any(|&(r, _)| r == b.v_min));
                prop_assert!(px.iter().any(|&(r, _)| r == b.v_max));
                prop_assert!(b.area() >= m.count());
            }
        }

        #[test]
        fn centroid_translates(m in mask_strategy(), dr in 0usize..5, dc in 0usize..5) {
            if let Ok(c) = centroid(&m) {
                let shifted = BinaryMask::from_fn(m.width() + dc, m.height() + dr, |r, col| {
                    r >= dr && col >= dc && m.get(r - dr, col - dc)
                });
                let c2 = centroid(&shifted).unwrap();
                prop_assert!((c2.x - c.x - dc as f64).abs() < 1e-9);
                prop_assert!((c2.y - c.y - dr as f64).abs() < 1e-9);
            }
        }
    }
}
