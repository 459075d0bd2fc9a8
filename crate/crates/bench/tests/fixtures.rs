use nccdet_bench::{batch, frame, FRAME_SIDE};

#[test]
fn fixtures_are_fixed_and_well_formed() {
    let f = frame();
    assert_eq!((f.height(), f.width()), (FRAME_SIDE, FRAME_SIDE));
    assert_eq!(f, frame());
    let b = batch(40);
    assert_eq!(b.len(), 40);
    assert!(b.iter().all(|s| s.patch.height() == 15 && s.patch.width() == 15));
    assert_eq!(b.iter().filter(|s| s.label > 0.0).count(), 20);
}
