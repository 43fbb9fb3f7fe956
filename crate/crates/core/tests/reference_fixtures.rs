mod common;

use common::fixtures;

#[test]
fn resampling_matches_the_numpy_transcription_everywhere() {
    let r = fixtures::resize_errors();
    assert_eq!(r.cases, 8);
    assert!(r.brute <= 1e-10, "{:e}", r.brute);
}

#[test]
fn resampling_matches_pillow_away_from_the_border() {
    let r = fixtures::resize_errors();
    assert!(r.interior_samples > 500, "{}", r.interior_samples);
    // Pillow's float mode stores single precision
    assert!(r.pil_interior <= 1e-6, "{:e}", r.pil_interior);
}

#[test]
fn ssim_matches_scikit_image() {
    let (cases, worst) = fixtures::ssim_error();
    assert_eq!(cases, 3);
    assert!(worst <= 1e-4, "{worst:e}");
}

#[test]
fn patterns_cover_the_unit_range() {
    let t = fixtures::pattern("checker", 4, 6);
    assert_eq!(t.at(0, 0, 0, 0), 0.2);
    assert_eq!(t.at(0, 0, 0, 3), 0.8);
    assert_eq!(t.at(0, 0, 2, 3), 0.2);
    let r = fixtures::pattern("ramp", 2, 5);
    assert_eq!((r.at(0, 0, 1, 0), r.at(0, 0, 1, 4)), (0.0, 1.0));
}
