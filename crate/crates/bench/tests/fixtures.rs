use eraser_bench::{corpus_design, deep_branch_stimulus};

#[test]
fn stimulus_is_seeded_and_sized() {
    let d = corpus_design("deep_branch");
    let a = deep_branch_stimulus(&d, 50, 3);
    let b = deep_branch_stimulus(&d, 50, 3);
    let c = deep_branch_stimulus(&d, 50, 4);
    assert_eq!(a.end, 510);
    assert_eq!(a.step_count(), b.step_count());
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert_ne!(format!("{a:?}"), format!("{c:?}"));
}
