use cdp_core::error::CdpError;
use cdp_core::ingest::{interarrivals, read_events, write_events, EventDate, ReadOptions};
use std::io::Write;

fn file_with(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn round_trip_through_a_file() {
    let src = file_with("date,x,y,id\n2003-01-06,1.5,2.5,a\n2003-01-06,NA,NA,b\n2003-02-01,,,c\n2003-03-10,-4,0.25,d\n");
    let ds = read_events(src.path(), &ReadOptions::default()).unwrap();
    assert_eq!(ds.events.len(), 4);
    assert_eq!(ds.spatial_points().len(), 2);
    let out = tempfile::NamedTempFile::new().unwrap();
    write_events(&ds, out.path()).unwrap();
    let back = read_events(out.path(), &ReadOptions::default()).unwrap();
    assert_eq!(back.events, ds.events);
    let gaps = interarrivals(&back).unwrap();
    assert_eq!(gaps.days, vec![0.5, 26.0, 37.0]);
    assert_eq!(gaps.zero_gaps_adjusted, 1);
}

#[test]
fn strict_mode_lists_every_bad_row() {
    let src = file_with("date,x,y\n2003-01-06,1,2\n2003-13-01,1,2\n2003-01-09,1,\n2003-01-10 12:00,1,2\n");
    let e = read_events(src.path(), &ReadOptions::default()).unwrap_err();
    let CdpError::Data(msg) = &e else { panic!("expected a data error, got {e:?}") };
    for row in ["row 2", "row 3", "row 4"] {
        assert!(msg.contains(row), "{msg}");
    }
    assert_eq!(e.exit_code(), 3);
}

#[test]
fn skipping_keeps_good_rows() {
    let src = file_with("when;east;north\n5;1;2\nx;1;2\n9;;\n");
    let opts = ReadOptions {
        date_col: "when".into(),
        x_col: "east".into(),
        y_col: "north".into(),
        delimiter: b';',
        skip_invalid: true,
        ..ReadOptions::default()
    };
    let ds = read_events(src.path(), &opts).unwrap();
    assert_eq!(ds.events.len(), 2);
    assert_eq!(ds.rejected.len(), 1);
    assert_eq!(ds.rejected[0].row, 2);
    assert_eq!(ds.events[1].date, EventDate::Offset(9));
}

#[test]
fn missing_file_is_an_io_error() {
    let e = read_events(std::path::Path::new("/nonexistent/events.csv"), &ReadOptions::default()).unwrap_err();
    assert_eq!(e.exit_code(), 3);
}

#[test]
fn bundled_surrogate_has_151_events() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/rabies_surrogate.csv");
    let ds = read_events(&path, &ReadOptions::default()).unwrap();
    assert_eq!(ds.events.len(), 151);
    assert!(ds.spatial_points().len() < 151);
}
