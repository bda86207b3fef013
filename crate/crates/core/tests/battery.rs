use hetcap::verify::{run_battery, summarize, Profile};

#[test]
fn fast_battery_passes_and_is_reproducible() {
    let a = run_battery(Profile::Fast, 7).unwrap();
    for s in summarize(&a) {
        println!("{:<20} {:>5} checks, {} failed, min slack {:+.3e}", s.family, s.checks, s.failures, s.min_slack);
    }
    let failed: Vec<_> = a.iter().filter(|r| !r.pass).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert!(a.len() >= 900, "{} checks", a.len());
    let b = run_battery(Profile::Fast, 7).unwrap();
    let line = |v: &[hetcap::verify::CheckReport]| -> String {
        v.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
    };
    assert_eq!(line(&a), line(&b));
}

