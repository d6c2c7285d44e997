//! Timeline JSON and trajectory CSV.

use std::io::{Read, Write};

use super::evolve::TrajectoryPoint;
use super::pulse::Timeline;
use crate::error::Result;

pub const TRAJECTORY_HEADER: &str = "t_ns,bloch_x,bloch_y,bloch_z,manifold";

pub fn write_trajectory_csv<W: Write>(mut w: W, points: &[TrajectoryPoint]) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{}",
            p.t_ns,
            p.bloch.x,
            p.bloch.y,
            p.bloch.z,
            p.manifold.label()
        )?;
    }
    Ok(())
}

pub fn read_timeline<R: Read>(r: R) -> Result<Timeline> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_timeline<W: Write>(w: W, timeline: &Timeline) -> Result<()> {
    serde_json::to_writer_pretty(w, timeline)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Manifold, PulseEvent, PulseTemplate, RotationAxis};
    use crate::spin::BlochVector;

    #[test]
    fn trajectory_csv_layout() {
        let pts = [
            TrajectoryPoint {
                t_ns: -1.0,
                bloch: BlochVector::PLUS_X,
                manifold: Manifold::Ground,
            },
            TrajectoryPoint {
                t_ns: 0.5,
                bloch: BlochVector::new(0.0, 0.25, 0.0),
                manifold: Manifold::Excited,
            },
        ];
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines[1], "-1,1,0,0,GS");
        assert_eq!(lines[2], "0.5,0,0.25,0,ES");
    }

    #[test]
    fn timeline_json_round_trip() {
        let tpl = PulseTemplate {
            target: Manifold::Excited,
            sigma: 0.5,
            truncation: 3.0,
            carrier: 2.14,
            rabi_peak: 0.2,
            target_angle: 1.5,
        };
        let tl = Timeline::new(vec![PulseEvent::excitation(0.0), tpl.at(1.2, RotationAxis::MinusX)]).unwrap();
        let mut buf = Vec::new();
        write_timeline(&mut buf, &tl).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"sigma_ns\"") && text.contains("\"carrier_ghz\""));
        assert_eq!(read_timeline(buf.as_slice()).unwrap(), tl);
    }
}
