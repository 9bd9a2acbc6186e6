use qpert::acceptance::{run_all, KNOWN_RED};

#[test]
fn acceptance() {
    let outcomes = run_all();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let unexpected: Vec<_> = outcomes.iter().filter(|o| !o.passed && !KNOWN_RED.contains(&o.id)).map(|o| o.id).collect();
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
