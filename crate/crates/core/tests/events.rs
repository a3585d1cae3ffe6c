use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::sync::OnceLock;

use sprint_core::error::Error;
use sprint_core::model::{Cardinal, SystemParams};
use sprint_core::sim::{
    read_events, read_truth, run_campaign, write_events, write_truth, Campaign, CampaignOptions, DetectionChain, Scenario,
    SequenceSpec,
};

fn campaign() -> &'static Campaign {
    static CAMPAIGN: OnceLock<Campaign> = OnceLock::new();
    CAMPAIGN.get_or_init(build)
}

fn build() -> Campaign {
    let mut chain = DetectionChain::ideal();
    chain.false_click_rate = 1e-4;
    chain.afterpulse_probability = 0.05;
    run_campaign(
        Scenario::AtomToPhotonSameAxis,
        &Cardinal::ALL,
        500,
        &SystemParams::nominal(),
        &chain,
        &SequenceSpec::canonical(),
        17,
        &CampaignOptions::default(),
    )
    .unwrap()
}

fn lines(c: &Campaign) -> Vec<String> {
    let mut buf = Vec::new();
    write_events(&c.stream, &mut buf).unwrap();
    String::from_utf8(buf).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn stream_round_trips_through_a_file() {
    let c = campaign();
    assert!(c.stream.records.len() > 100);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    write_events(&c.stream, BufWriter::new(File::create(&path).unwrap())).unwrap();
    let back = read_events(BufReader::new(File::open(&path).unwrap())).unwrap();
    assert_eq!(back, c.stream);

    let truth_path = dir.path().join("truth.jsonl");
    write_truth(&c.truth, BufWriter::new(File::create(&truth_path).unwrap())).unwrap();
    let truth = read_truth(BufReader::new(File::open(&truth_path).unwrap())).unwrap();
    assert_eq!(truth, c.truth);
}

#[test]
fn unsorted_input_is_sorted_on_read() {
    let c = campaign();
    let mut l = lines(c);
    l[1..].reverse();
    let text = l.join("\n");
    let back = read_events(text.as_bytes()).unwrap();
    assert!(back.is_sorted());
    assert_eq!(back, c.stream);
}

#[test]
fn unknown_detector_is_rejected_with_its_line() {
    let c = campaign();
    let mut l = lines(c);
    l.insert(3, r#"{"t_ns":5,"detector_id":99,"side":"L"}"#.into());
    match read_events(l.join("\n").as_bytes()) {
        Err(Error::MalformedRecord { line, reason }) => {
            assert_eq!(line, 4);
            assert!(reason.contains("99"), "{reason}");
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn malformed_lines_are_rejected() {
    let c = campaign();
    let header = lines(c).remove(0);
    for (bad, needle) in [
        (r#"{"t_ns":-4,"detector_id":1,"side":"L"}"#, "negative"),
        (r#"{"t_ns":4,"detector_id":1,"side":"R"}"#, "side"),
        (r#"{"t_ns":4,"detector_id":1}"#, "side"),
        ("not json", "expected"),
    ] {
        let mut text = Vec::new();
        writeln!(text, "{header}\n{bad}").unwrap();
        match read_events(&text[..]) {
            Err(Error::MalformedRecord { line: 2, reason }) => assert!(reason.contains(needle), "{reason}"),
            other => panic!("{bad}: {other:?}"),
        }
    }
    assert!(matches!(read_events(&b""[..]), Err(Error::MalformedRecord { line: 1, .. })));
}
