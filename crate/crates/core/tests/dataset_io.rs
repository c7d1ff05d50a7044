use depthgaze::dataset::{
    parse_annotations, parse_annotations_lenient, write_annotations, AnnotationRecord, DatasetManifest, Split,
    CSV_HEADER,
};
use depthgaze::geometry::{BinaryMask, DepthMap, PixelBox};
use depthgaze::heatmap::Heatmap;
use depthgaze::io::{self, GrayRaster};
use depthgaze::Error;
use proptest::prelude::*;

fn csv(rows: &[&str]) -> String {
    let mut s = CSV_HEADER.join(",");
    for r in rows {
        s.push('\n');
        s.push_str(r);
    }
    s.push('\n');
    s
}

#[test]
fn single_row_maps_fields() {
    let recs = parse_annotations(csv(&["img1.jpg,640,480,100,50,200,150,150,100,0.5,0.5,1"]).as_bytes()).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert_eq!(r.image_path, "img1.jpg");
    assert_eq!((r.width, r.height), (640, 480));
    assert_eq!(r.head_box, PixelBox::new(100, 50, 200, 150).unwrap());
    assert_eq!(r.eye, (150.0, 100.0));
    assert_eq!(r.gaze_points, vec![(0.5, 0.5)]);
    assert!(r.in_frame);
    assert_eq!(r.line, 2);
}

#[test]
fn ten_annotators_merge() {
    let rows: Vec<String> = (0..10)
        .map(|i| format!("a.png,100,80,10,10,20,20,15,15,0.{i},0.5,1"))
        .collect();
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    let recs = parse_annotations(csv(&refs).as_bytes()).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].gaze_points.len(), 10);
    assert!((recs[0].mean_gaze().0 - 0.45).abs() < 1e-12);

    let mut more = refs.clone();
    more.push("a.png,100,80,10,10,20,20,15,15,0.9,0.9,1");
    assert!(matches!(parse_annotations(csv(&more).as_bytes()), Err(Error::MergeConflict { line: 12, .. })));
}

#[test]
fn out_of_range_gaze_names_row() {
    let text = csv(&["a.png,100,80,10,10,20,20,15,15,0.5,0.5,1", "b.png,100,80,10,10,20,20,15,15,1.5,0.5,1"]);
    match parse_annotations(text.as_bytes()) {
        Err(Error::Parse { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("1.5"), "{message}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn conflicting_duplicates_are_reported() {
    let text = csv(&["a.png,100,80,10,10,20,20,15,15,0.5,0.5,1", "a.png,100,80,10,10,20,20,12,15,0.5,0.5,1"]);
    assert!(matches!(parse_annotations(text.as_bytes()), Err(Error::MergeConflict { line: 3, .. })));
}

#[test]
fn lenient_parse_accounts_for_every_row() {
    let text = csv(&[
        "a.png,100,80,10,10,20,20,15,15,0.5,0.5,1",
        "bad,row",
        "b.png,100,80,10,10,5,20,15,15,0.5,0.5,1",
        "c.png,100,80,10,10,20,20,15,15,0.5,0.5,2",
        "a.png,100,80,10,10,20,20,15,15,0.1,0.2,1",
        "d.png,100,80,0,0,100,80,99,79,7.0,-3.0,0",
    ]);
    let (recs, diags) = parse_annotations_lenient(text.as_bytes());
    let merged_rows: usize = recs.iter().map(|r| r.gaze_points.len()).sum();
    assert_eq!(merged_rows + diags.len(), 6);
    assert_eq!(diags.iter().map(|d| d.line).collect::<Vec<_>>(), vec![3, 4, 5]);
    assert_eq!(recs.iter().map(|r| r.image_path.as_str()).collect::<Vec<_>>(), vec!["a.png", "d.png"]);
    assert!(!recs[1].in_frame);
}

#[test]
fn header_is_required() {
    assert!(parse_annotations("a,b\n1,2\n".as_bytes()).is_err());
}

#[test]
fn manifest_flags_missing_images() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.png"), b"x").unwrap();
    let ann = dir.path().join("ann.csv");
    std::fs::write(
        &ann,
        csv(&["a.png,100,80,10,10,20,20,15,15,0.5,0.5,1", "b.png,100,80,10,10,20,20,15,15,0.5,0.5,1"]),
    )
    .unwrap();
    let m = DatasetManifest::load(&ann, Split::Test).unwrap();
    assert_eq!(m.records.len(), 2);
    assert_eq!(m.missing_images(), vec![1]);
}

#[test]
fn pgm_depth_scaling_example() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.pgm");
    let raster = GrayRaster {
        width: 1,
        height: 1,
        max_value: 65535,
        samples: vec![32768],
    };
    io::write_gray(&raster, &p).unwrap();
    let d = io::load_depth(&p, 0.001).unwrap();
    assert!((d.get(0, 0) - 32.768).abs() < 1e-12);
}

#[test]
fn heatmap_quantisation_example() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.png");
    let h = Heatmap::new(3, 1, vec![0.0, 0.4, 0.8]).unwrap();
    let side = io::save_heatmap(&h, &p).unwrap();
    assert_eq!(side.scale, 0.8);
    assert_eq!(io::read_gray(&p).unwrap().samples[2], 65535);
    let back = io::load_heatmap(&p).unwrap();
    for (a, b) in h.values().iter().zip(back.values()) {
        assert!((a - b).abs() <= 0.8 / 65535.0);
    }
}

#[test]
fn truncated_and_unknown_files_fail() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.pgm");
    std::fs::write(&p, b"P5\n4 4\n65535\n\x00\x01").unwrap();
    assert!(io::load_depth(&p, 1.0).is_err());
    let q = dir.path().join("x.pgm");
    std::fs::write(&q, b"hello").unwrap();
    assert!(io::load_mask(&q).is_err());
    assert!(matches!(io::load_mask(&dir.path().join("none.png")), Err(Error::Io { .. })));
}

fn record_strategy() -> impl Strategy<Value = AnnotationRecord> {
    (8usize..200, 8usize..200).prop_flat_map(|(w, h)| {
        (
            "[a-z]{1,8}\\.png",
            (0..w - 1, 0..h - 1),
            (1usize..8, 1usize..8),
            (0..w, 0..h),
            prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..=10),
            any::<bool>(),
        )
            .prop_map(move |(name, (x0, y0), (bw, bh), eye, gazes, in_frame)| AnnotationRecord {
                image_path: name,
                width: w,
                height: h,
                head_box: PixelBox::new(x0, y0, (x0 + bw).min(w), (y0 + bh).min(h)).unwrap(),
                eye: (eye.0 as f64, eye.1 as f64),
                gaze_points: gazes,
                in_frame,
                line: 0,
            })
    })
}

proptest! {
    #[test]
    fn csv_round_trip(recs in prop::collection::vec(record_strategy(), 1..6)) {
        // one record per image so merging cannot combine them
        let recs: Vec<AnnotationRecord> = recs
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| { r.image_path = format!("{i}_{}", r.image_path); r })
            .collect();
        let mut buf = Vec::new();
        write_annotations(&mut buf, &recs).unwrap();
        let back = parse_annotations(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            prop_assert_eq!(&a.image_path, &b.image_path);
            prop_assert_eq!(a.head_box, b.head_box);
            prop_assert_eq!(a.eye, b.eye);
            prop_assert_eq!(&a.gaze_points, &b.gaze_points);
            prop_assert_eq!(a.in_frame, b.in_frame);
        }
    }

    #[test]
    fn mask_round_trip_is_exact(w in 1usize..30, h in 1usize..30, seed in any::<u64>(), pgm in any::<bool>()) {
        let bits: Vec<bool> = (0..w * h).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let m = BinaryMask::new(w, h, bits).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(if pgm { "m.pgm" } else { "m.png" });
        io::save_mask(&m, &p).unwrap();
        prop_assert_eq!(io::load_mask(&p).unwrap(), m);
    }

    #[test]
    fn depth_round_trip_within_one_step(
        vals in prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..250.0], 1..64),
        pgm in any::<bool>(),
    ) {
        let n = vals.len();
        let d = DepthMap::new(n, 1, vals).unwrap();
        let scale = 1.0 / 256.0;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(if pgm { "d.pgm" } else { "d.png" });
        io::save_depth(&d, &p, scale).unwrap();
        let back = io::load_depth(&p, scale).unwrap();
        for (a, b) in d.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= scale / 2.0 + 1e-12);
        }
    }

    #[test]
    fn heatmap_round_trip_within_one_step(vals in prop::collection::vec(-2.0f64..3.0, 1..64)) {
        let n = vals.len();
        let h = Heatmap::new(n, 1, vals).unwrap();
        let range = h.max() - h.min().min(0.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.png");
        io::save_heatmap(&h, &p).unwrap();
        let back = io::load_heatmap(&p).unwrap();
        for (a, b) in h.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= range / 65535.0 + 1e-12);
        }
    }
}
