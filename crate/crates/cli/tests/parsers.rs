use std::fs;
use std::path::{Path, PathBuf};

use htq_cli::{parse_config, parse_distribution, parse_plot_csv};
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn config_seeds() {
    let files = corpus("fuzz_config");
    assert!(!files.is_empty());
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        let parsed = parse_config(&text);
        let wrong = f.file_name().unwrap() == "wrong_version.json";
        assert_eq!(parsed.is_err(), wrong, "{}", f.display());
    }
}

#[test]
fn distribution_seeds() {
    for f in corpus("fuzz_distribution") {
        let text = fs::read_to_string(&f).unwrap();
        let parsed = parse_distribution(&text);
        let bad = f.file_name().unwrap() == "reversed.json";
        assert_eq!(parsed.is_err(), bad, "{}", f.display());
    }
}

#[test]
fn plot_csv_seeds() {
    for f in corpus("fuzz_plot_csv") {
        let parsed = parse_plot_csv(&fs::read(&f).unwrap());
        let empty = f.file_name().unwrap() == "header_only.csv";
        assert_eq!(parsed.is_err(), empty, "{}", f.display());
    }
}

#[test]
fn quoted_fields_survive() {
    let t = parse_plot_csv(b"a,b\n1,\"2\"\n\"x,y\",4\n").unwrap();
    assert_eq!(t.rows[1][0], "x,y");
    let s = t.series("a", "b", None, "s").unwrap();
    assert_eq!(s[0].points, vec![(1.0, 2.0)]);
}

proptest! {
    #[test]
    fn parsers_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_plot_csv(&bytes);
        if let Ok(s) = std::str::from_utf8(&bytes) {
            let _ = parse_config(s);
            let _ = parse_distribution(s);
        }
    }

    #[test]
    fn parsed_distributions_are_usable(
        kind in prop_oneof![Just("dirac"), Just("uniform"), Just("grid"), Just("other")],
        a in any::<f64>(),
        b in any::<f64>(),
        values in proptest::collection::vec(-1.0f64..2.0, 0..8),
    ) {
        let num = |x: f64| if x.is_finite() { format!("{x:e}") } else { "null".into() };
        let text = match kind {
            "dirac" => format!(r#"{{"kind":"dirac","point":{}}}"#, num(a)),
            "grid" => format!(r#"{{"kind":"grid","h":{},"values":{:?}}}"#, num(b), values),
            k => format!(r#"{{"kind":"{k}","lo":{},"hi":{}}}"#, num(a), num(b)),
        };
        if let Ok(d) = parse_distribution(&text) {
            prop_assert!(d.mean().is_finite());
            prop_assert!(d.support_hi() >= d.mean() - 1e-9 * d.mean().abs().max(1.0));
        }
    }
}
