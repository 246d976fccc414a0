use proptest::prelude::*;

use stressdet::dataio::{parse_annotation, write_annotation, Annotation, ClassMap};
use stressdet::geometry::{box_iou, decode_unclipped, encode_box, nms, BBox, ClassId, LabeledBox};
use stressdet::metrics::{compute_metrics, mask_confusion, pixel_span, rasterize, PixelGrid};

fn bbox() -> impl Strategy<Value = BBox> {
    (0.0..200.0f64, 0.0..200.0f64, 0.5..120.0f64, 0.5..120.0f64)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
}

fn scored() -> impl Strategy<Value = LabeledBox> {
    (bbox(), 0usize..2, 0.0..1.0f64).prop_map(|(b, k, s)| LabeledBox::scored(b, ClassId(k), s).unwrap())
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let ab = box_iou(&a, &b);
        prop_assert_eq!(ab, box_iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((box_iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coding_round_trips(anchor in bbox(), gt in bbox()) {
        let d = encode_box(&anchor, &gt);
        let back = decode_unclipped(&anchor, &d);
        for (x, y) in back.iter().zip(gt.corners()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn nms_output_is_separated_and_idempotent(dets in prop::collection::vec(scored(), 0..60)) {
        let kept = nms(&dets, 0.3);
        prop_assert!(kept.len() <= dets.len());
        for (i, a) in kept.iter().enumerate() {
            prop_assert!(dets.contains(a));
            for b in &kept[i + 1..] {
                prop_assert!(a.score() >= b.score());
                if a.class == b.class {
                    prop_assert!(box_iou(&a.bbox, &b.bbox) <= 0.3);
                }
            }
        }
        prop_assert_eq!(nms(&kept, 0.3), kept);
    }

    #[test]
    fn raster_area_matches_span(b in bbox()) {
        let grid = PixelGrid::new(256, 256).unwrap();
        let (rows, cols) = pixel_span(&b, grid);
        let mask = rasterize([&b], grid);
        prop_assert_eq!(mask.count(), rows.len() * cols.len());
        let self_overlap = compute_metrics(mask_confusion(&mask, &mask));
        if mask.count() > 0 {
            prop_assert_eq!(self_overlap.dsc, 1.0);
        }
    }

    #[test]
    fn dice_and_jaccard_agree(a in bbox(), b in bbox()) {
        let grid = PixelGrid::new(256, 256).unwrap();
        let m = compute_metrics(mask_confusion(&rasterize([&a], grid), &rasterize([&b], grid)));
        prop_assert!((m.dsc - 2.0 * m.iou / (1.0 + m.iou)).abs() < 1e-12);
    }

    #[test]
    fn annotations_round_trip(
        name in "[a-z_]{1,12}\\.(ppm|pgm)",
        objects in prop::collection::vec((0u32..300, 0u32..300, 1u32..80, 1u32..80, 0usize..2), 0..8),
    ) {
        let classes = ClassMap::default();
        let ann = Annotation {
            filename: name,
            width: 400,
            height: 400,
            depth: 3,
            objects: objects
                .into_iter()
                .map(|(x, y, w, h, k)| {
                    let b = BBox::new(f64::from(x), f64::from(y), f64::from(x + w), f64::from(y + h)).unwrap();
                    LabeledBox::new(b, ClassId(k))
                })
                .collect(),
        };
        let xml = write_annotation(&ann, &classes).unwrap();
        prop_assert_eq!(parse_annotation(&xml, &classes, "prop").unwrap(), ann);
    }
}
