//! Metric values checked against counting arguments on simple geometry.

mod common;

use common::*;
use physbench::ingest::{decode_ppm, decode_rle, encode_ppm, encode_rle, BinaryMask, RgbImage};
use physbench::metrics::{background_rmse, iou, sequence_metrics, summarize};
use physbench::synth::{dilated_prediction, frozen_prediction, rect_mask, translating_rect_bundle, RectMotion, SimRng};
use proptest::prelude::*;

#[test]
fn frozen_rectangle_follows_closed_form() {
    let m = RectMotion::default();
    let gt = translating_rect_bundle(&m).unwrap();
    let from = 9;
    let pred = frozen_prediction(&gt, from);
    let s = sequence_metrics(&gt, &pred, from).unwrap();
    assert_eq!(s.first_frame, from);
    let bg = (m.width * m.height - m.rect_w * m.rect_h) as f64;
    // FG [30, 90, 160] over BG [200, 200, 200].
    let per_px: f64 = [170.0f64, 110.0, 40.0].iter().map(|d| (d / 255.0).powi(2)).sum();
    for (k, (miou, rmse)) in s.per_frame_miou.iter().zip(&s.per_frame_bg_rmse).enumerate() {
        let d = (k + 1) * m.step_px;
        assert!((miou.unwrap() - shifted_rect_iou(m.rect_w, d)).abs() < 1e-12, "frame {}", from + k);
        let stale = (m.rect_h * d.min(m.rect_w)) as f64;
        let want = (stale * per_px / (3.0 * bg)).sqrt();
        assert!((rmse.unwrap() - want).abs() < 1e-12, "frame {}: {} vs {want}", from + k, rmse.unwrap());
    }
}

#[test]
fn dilation_iou_is_area_ratio() {
    for (a, b) in [(24, 16), (5, 3), (1, 1), (40, 7)] {
        let m = rect_mask(64, 48, 10, 10, b, a);
        let want = (a * b) as f64 / ((a + 2) * (b + 2)) as f64;
        assert!((iou(&m, &m.dilated()).unwrap().unwrap() - want).abs() < 1e-12);
    }
    let gt = translating_rect_bundle(&RectMotion::default()).unwrap();
    let s = sequence_metrics(&gt, &dilated_prediction(&gt), 0).unwrap();
    let sum = summarize(&[s], "rect").unwrap();
    assert!((sum.mean_miou.unwrap() - 24.0 * 16.0 / (26.0 * 18.0)).abs() < 1e-12);
    assert_eq!(sum.mean_bg_rmse, Some(0.0));
}

#[test]
fn identical_bundles_are_perfect() {
    let gt = translating_rect_bundle(&RectMotion::default()).unwrap();
    let sum = summarize(&[sequence_metrics(&gt, &gt, 0).unwrap()], "rect").unwrap();
    assert_eq!(sum.mean_miou, Some(1.0));
    assert_eq!(sum.mean_bg_rmse, Some(0.0));
}

#[test]
fn codecs_roundtrip_on_random_instances() {
    let mut rng = SimRng::new(42, 0);
    for _ in 0..1000 {
        let m = random_mask(&mut rng);
        let runs = encode_rle(&m);
        assert_eq!(decode_rle(&runs, m.width(), m.height()).unwrap(), m);
        let img = random_image(&mut rng);
        let bytes = encode_ppm(&img);
        assert_eq!(decode_ppm(&bytes).unwrap(), img);
        assert_eq!(encode_ppm(&decode_ppm(&bytes).unwrap()), bytes);
    }
}

fn mask_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        let bits = proptest::collection::vec(any::<bool>(), w * h);
        (bits.clone(), bits).prop_map(move |(a, b)| {
            (BinaryMask::from_bits(w, h, a).unwrap(), BinaryMask::from_bits(w, h, b).unwrap())
        })
    })
}

proptest! {
    #[test]
    fn iou_is_symmetric((a, b) in mask_pair()) {
        prop_assert_eq!(iou(&a, &b).unwrap(), iou(&b, &a).unwrap());
    }

    #[test]
    fn iou_is_translation_invariant((a, b) in mask_pair(), dr in 0usize..4, dc in 0usize..4) {
        let shift = |m: &BinaryMask| BinaryMask::from_fn(m.width() + dc, m.height() + dr, |r, c| {
            r >= dr && c >= dc && m.get(r - dr, c - dc)
        });
        prop_assert_eq!(iou(&a, &b).unwrap(), iou(&shift(&a), &shift(&b)).unwrap());
    }

    #[test]
    fn nested_iou_is_area_ratio((a, b) in mask_pair()) {
        let inner = BinaryMask::from_fn(a.width(), a.height(), |r, c| a.get(r, c) && b.get(r, c));
        let outer = b;
        if !outer.is_empty() {
            let want = inner.count() as f64 / outer.count() as f64;
            prop_assert_eq!(iou(&inner, &outer).unwrap(), Some(want));
        }
    }

    #[test]
    fn rmse_is_linear_in_uniform_offset(w in 1usize..20, h in 1usize..20, base in 0u8..100, k in 0u8..150) {
        let gt = RgbImage::filled(w, h, [base, base / 2, base]);
        let mut pred = gt.clone();
        pred.data.iter_mut().for_each(|v| *v += k);
        let r = background_rmse(&gt, &pred, std::iter::empty()).unwrap();
        prop_assert!((r - k as f64 / 255.0).abs() < 1e-12);
    }
}
