use loopcap_core::trainer::{forgetting_demo, DEMO_TASK_SIZE};

/// Golden counts (out of 600 task-A samples) from the seed-0 pilot run.
const OFF_A_AFTER_A: usize = 524;
const OFF_A_AFTER_B: usize = 0;
const ON_A_AFTER_A: usize = 526;
const ON_A_AFTER_B: usize = 68;

fn count(rate: f64) -> usize {
    (rate * DEMO_TASK_SIZE as f64).round() as usize
}

#[test]
fn bounded_store_forgets_and_replay_mitigates() {
    let off = forgetting_demo(false, 0).unwrap();
    let on = forgetting_demo(true, 0).unwrap();
    assert!(off.a_after_b < off.a_after_a);
    assert!(on.a_after_b > off.a_after_b);
    assert_eq!(off.replays, 0);
    assert_eq!(on.replays, 6, "replays at batch counters 200..=1200");
    assert_eq!(
        [count(off.a_after_a), count(off.a_after_b), count(on.a_after_a), count(on.a_after_b)],
        [OFF_A_AFTER_A, OFF_A_AFTER_B, ON_A_AFTER_A, ON_A_AFTER_B]
    );
}
