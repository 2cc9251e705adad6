//! CSV file formats for tracks and detections.
//!
//! Both formats are plain UTF-8 CSV with a fixed header. Track files hold
//! one state per line, detection files one rectangle per line. Positions
//! are written with six decimal places, so round trips are lossless at
//! that precision. Lines may appear in any frame order on input.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;
use trackeval_core::{
    DetectionSequence, FrameDetections, KinematicState, Rect, Sensor, Track, TrackSet,
};

/// Header of a track file.
pub const TRACK_HEADER: &str = "frame,label,x,y,vx,vy";
/// Header of a detection file.
pub const DETECTION_HEADER: &str = "frame,sensor,chi,eta,w,h";

/// Errors from reading or writing CSV files.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:1: expected header `{expected}`, found `{found}`")]
    Header {
        path: String,
        expected: &'static str,
        found: String,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate state for label {label} at frame {frame}")]
    DuplicateState {
        path: String,
        line: usize,
        label: u32,
        frame: u32,
    },
    #[error(transparent)]
    Track(#[from] trackeval_core::TrackError),
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: display(path),
        source,
    })
}

fn write_string(path: &Path, content: &str) -> Result<(), IoError> {
    std::fs::write(path, content).map_err(|source| IoError::File {
        path: display(path),
        source,
    })
}

/// Non-empty lines with their 1-based line numbers, after the header.
fn body_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, line)| (i + 1, line.trim_end_matches('\r')))
        .filter(|(_, line)| !line.trim().is_empty())
}

fn check_header(text: &str, expected: &'static str, path: &Path) -> Result<(), IoError> {
    let found = text.lines().next().unwrap_or("").trim_end_matches('\r');
    if found == expected {
        Ok(())
    } else {
        Err(IoError::Header {
            path: display(path),
            expected,
            found: found.to_string(),
        })
    }
}

fn split_fields<'a>(
    line: &'a str,
    count: usize,
    path: &Path,
    line_no: usize,
) -> Result<Vec<&'a str>, IoError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() == count {
        Ok(fields)
    } else {
        Err(IoError::Parse {
            path: display(path),
            line: line_no,
            message: format!(
                "expected {count} comma-separated fields, found {}",
                fields.len()
            ),
        })
    }
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    what: &str,
    path: &Path,
    line_no: usize,
) -> Result<T, IoError> {
    field.parse().map_err(|_| IoError::Parse {
        path: display(path),
        line: line_no,
        message: format!("invalid {what} `{field}`"),
    })
}

fn parse_finite(field: &str, what: &str, path: &Path, line_no: usize) -> Result<f64, IoError> {
    let value: f64 = parse_field(field, what, path, line_no)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(IoError::Parse {
            path: display(path),
            line: line_no,
            message: format!("{what} `{field}` is not finite"),
        })
    }
}

/// Serializes a track set in label order, frames ascending per track.
pub fn tracks_to_csv(set: &TrackSet) -> String {
    let mut out = String::from(TRACK_HEADER);
    out.push('\n');
    for track in set.tracks() {
        for (frame, state) in track.states() {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                frame,
                track.label(),
                state.x,
                state.y,
                state.vx,
                state.vy
            )
            .expect("string writes cannot fail");
        }
    }
    out
}

pub fn save_tracks(path: &Path, set: &TrackSet) -> Result<(), IoError> {
    write_string(path, &tracks_to_csv(set))
}

/// Parses a track file. The frame count is the largest frame mentioned.
pub fn load_tracks(path: &Path) -> Result<TrackSet, IoError> {
    load_tracks_impl(path, None)
}

/// Parses a track file against a known frame count; states beyond it are
/// rejected.
pub fn load_tracks_with_frame_count(path: &Path, frame_count: u32) -> Result<TrackSet, IoError> {
    load_tracks_impl(path, Some(frame_count))
}

fn load_tracks_impl(path: &Path, frame_count: Option<u32>) -> Result<TrackSet, IoError> {
    let text = read_to_string(path)?;
    check_header(&text, TRACK_HEADER, path)?;
    let mut by_label: BTreeMap<u32, BTreeMap<u32, KinematicState>> = BTreeMap::new();
    let mut max_frame = 0u32;
    for (line_no, line) in body_lines(&text) {
        let fields = split_fields(line, 6, path, line_no)?;
        let frame: u32 = parse_field(fields[0], "frame", path, line_no)?;
        let label: u32 = parse_field(fields[1], "label", path, line_no)?;
        if frame == 0 {
            return Err(IoError::Parse {
                path: display(path),
                line: line_no,
                message: "frame numbers start at 1".into(),
            });
        }
        if label == 0 {
            return Err(IoError::Parse {
                path: display(path),
                line: line_no,
                message: "labels start at 1".into(),
            });
        }
        if let Some(count) = frame_count {
            if frame > count {
                return Err(IoError::Parse {
                    path: display(path),
                    line: line_no,
                    message: format!("frame {frame} beyond frame count {count}"),
                });
            }
        }
        let x = parse_finite(fields[2], "x", path, line_no)?;
        let y = parse_finite(fields[3], "y", path, line_no)?;
        let vx = parse_finite(fields[4], "vx", path, line_no)?;
        let vy = parse_finite(fields[5], "vy", path, line_no)?;
        let states = by_label.entry(label).or_default();
        if states
            .insert(frame, KinematicState::new(x, vx, y, vy))
            .is_some()
        {
            return Err(IoError::DuplicateState {
                path: display(path),
                line: line_no,
                label,
                frame,
            });
        }
        max_frame = max_frame.max(frame);
    }
    let tracks = by_label
        .into_iter()
        .map(|(label, states)| Track::new(label, states))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrackSet::new(tracks, frame_count.unwrap_or(max_frame))?)
}

/// Serializes detections frame by frame, head rectangles before body ones.
/// Unscheduled sensor frames produce no lines, so scheduling is not
/// represented in the file; it is reapplied by the consumer.
pub fn detections_to_csv(seq: &DetectionSequence) -> String {
    let mut out = String::from(DETECTION_HEADER);
    out.push('\n');
    for (i, frame) in seq.frames().iter().enumerate() {
        let frame_no = i + 1;
        for rects in [&frame.head, &frame.body].into_iter().flatten() {
            for rect in rects {
                writeln!(
                    out,
                    "{},{},{:.6},{:.6},{:.6},{:.6}",
                    frame_no,
                    rect.sensor.code(),
                    rect.chi,
                    rect.eta,
                    rect.w,
                    rect.h
                )
                .expect("string writes cannot fail");
            }
        }
    }
    out
}

pub fn save_detections(path: &Path, seq: &DetectionSequence) -> Result<(), IoError> {
    write_string(path, &detections_to_csv(seq))
}

/// Parses a detection file. Every frame up to the largest mentioned frame
/// comes back with both sensors scheduled (possibly empty); rectangles
/// keep their file order within a frame and sensor.
pub fn load_detections(path: &Path) -> Result<DetectionSequence, IoError> {
    load_detections_impl(path, None)
}

/// Parses a detection file padded or checked against a known frame count.
pub fn load_detections_with_frame_count(
    path: &Path,
    frame_count: u32,
) -> Result<DetectionSequence, IoError> {
    load_detections_impl(path, Some(frame_count))
}

fn load_detections_impl(
    path: &Path,
    frame_count: Option<u32>,
) -> Result<DetectionSequence, IoError> {
    let text = read_to_string(path)?;
    check_header(&text, DETECTION_HEADER, path)?;
    let mut rows: Vec<(u32, Rect)> = Vec::new();
    let mut max_frame = 0u32;
    for (line_no, line) in body_lines(&text) {
        let fields = split_fields(line, 6, path, line_no)?;
        let frame: u32 = parse_field(fields[0], "frame", path, line_no)?;
        if frame == 0 {
            return Err(IoError::Parse {
                path: display(path),
                line: line_no,
                message: "frame numbers start at 1".into(),
            });
        }
        if let Some(count) = frame_count {
            if frame > count {
                return Err(IoError::Parse {
                    path: display(path),
                    line: line_no,
                    message: format!("frame {frame} beyond frame count {count}"),
                });
            }
        }
        let code: u8 = parse_field(fields[1], "sensor", path, line_no)?;
        let sensor = Sensor::from_code(code).ok_or_else(|| IoError::Parse {
            path: display(path),
            line: line_no,
            message: format!("sensor must be 1 (head) or 2 (body), found {code}"),
        })?;
        let chi = parse_finite(fields[2], "chi", path, line_no)?;
        let eta = parse_finite(fields[3], "eta", path, line_no)?;
        let w = parse_finite(fields[4], "w", path, line_no)?;
        let h = parse_finite(fields[5], "h", path, line_no)?;
        let rect = Rect::new(chi, eta, w, h, sensor).map_err(|e| IoError::Parse {
            path: display(path),
            line: line_no,
            message: e.to_string(),
        })?;
        rows.push((frame, rect));
        max_frame = max_frame.max(frame);
    }
    let count = frame_count.unwrap_or(max_frame) as usize;
    let mut frames: Vec<FrameDetections> = (0..count)
        .map(|_| FrameDetections {
            head: Some(Vec::new()),
            body: Some(Vec::new()),
        })
        .collect();
    for (frame, rect) in rows {
        let slot = &mut frames[frame as usize - 1];
        let list = match rect.sensor {
            Sensor::Head => slot.head.as_mut(),
            Sensor::Body => slot.body.as_mut(),
        };
        list.expect("sensors initialized as scheduled").push(rect);
    }
    Ok(DetectionSequence::new(frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use trackeval_core::Sensor;

    fn temp_file(name: &str, content: &str) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(name), content).unwrap();
        dir
    }

    fn sample_set() -> TrackSet {
        let states: BTreeMap<u32, KinematicState> = [
            (1, KinematicState::new(10.0, 1.5, 20.0, -0.25)),
            (2, KinematicState::new(11.5, 1.5, 19.75, -0.25)),
        ]
        .into();
        TrackSet::new(vec![Track::new(3, states).unwrap()], 4).unwrap()
    }

    #[test]
    fn track_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracks.csv");
        let set = sample_set();
        save_tracks(&path, &set).unwrap();
        let loaded = load_tracks_with_frame_count(&path, 4).unwrap();
        assert_eq!(loaded, set);
    }

    #[test]
    fn track_frame_count_defaults_to_max_frame() {
        let dir = temp_file(
            "t.csv",
            "frame,label,x,y,vx,vy\n5,1,0.0,0.0,0.0,0.0\n2,1,1.0,1.0,0.0,0.0\n",
        );
        let set = load_tracks(&dir.path().join("t.csv")).unwrap();
        assert_eq!(set.frame_count(), 5);
        assert_eq!(set.tracks().len(), 1);
        assert_eq!(set.tracks()[0].state_count(), 2);
    }

    #[test]
    fn empty_track_file_is_an_empty_set() {
        let dir = temp_file("t.csv", "frame,label,x,y,vx,vy\n");
        let set = load_tracks(&dir.path().join("t.csv")).unwrap();
        assert!(set.tracks().is_empty());
        assert_eq!(set.frame_count(), 0);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = temp_file("t.csv", "frame,id,x,y,vx,vy\n1,1,0,0,0,0\n");
        let err = load_tracks(&dir.path().join("t.csv")).unwrap_err();
        assert!(matches!(err, IoError::Header { .. }), "{err}");
    }

    #[test]
    fn duplicate_state_reports_line_number() {
        let dir = temp_file("t.csv", "frame,label,x,y,vx,vy\n1,7,0,0,0,0\n1,7,5,5,0,0\n");
        let err = load_tracks(&dir.path().join("t.csv")).unwrap_err();
        match err {
            IoError::DuplicateState {
                line, label, frame, ..
            } => {
                assert_eq!((line, label, frame), (3, 7, 1));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn bad_number_reports_line_number() {
        let dir = temp_file("t.csv", "frame,label,x,y,vx,vy\n1,1,abc,0,0,0\n");
        let err = load_tracks(&dir.path().join("t.csv")).unwrap_err();
        match err {
            IoError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("abc"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn detection_round_trip_preserves_order() {
        let head = Rect::new(10.0, 20.0, 30.0, 36.0, Sensor::Head).unwrap();
        let body = Rect::new(5.0, 8.0, 80.0, 200.0, Sensor::Body).unwrap();
        let frames = vec![
            FrameDetections {
                head: Some(vec![head]),
                body: Some(vec![body]),
            },
            FrameDetections {
                head: Some(vec![]),
                body: Some(vec![]),
            },
        ];
        let seq = DetectionSequence::new(frames);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dets.csv");
        save_detections(&path, &seq).unwrap();
        let loaded = load_detections_with_frame_count(&path, 2).unwrap();
        assert_eq!(loaded.frame(1).unwrap().head.as_deref(), Some(&[head][..]));
        assert_eq!(loaded.frame(1).unwrap().body.as_deref(), Some(&[body][..]));
        assert_eq!(loaded.frame(2).unwrap().head.as_deref(), Some(&[][..]));
    }

    #[test]
    fn out_of_order_detection_lines_are_sorted_by_frame() {
        let dir = temp_file(
            "d.csv",
            "frame,sensor,chi,eta,w,h\n3,1,0,0,10,10\n1,2,5,5,20,20\n",
        );
        let seq = load_detections(&dir.path().join("d.csv")).unwrap();
        assert_eq!(seq.frame_count(), 3);
        assert_eq!(seq.frame(1).unwrap().body.as_ref().unwrap().len(), 1);
        assert_eq!(seq.frame(3).unwrap().head.as_ref().unwrap().len(), 1);
        assert!(seq.frame(2).unwrap().head.as_ref().unwrap().is_empty());
    }

    #[test]
    fn unknown_sensor_code_is_rejected() {
        let dir = temp_file("d.csv", "frame,sensor,chi,eta,w,h\n1,3,0,0,10,10\n");
        let err = load_detections(&dir.path().join("d.csv")).unwrap_err();
        match err {
            IoError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("sensor"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
