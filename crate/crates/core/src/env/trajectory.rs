use std::io::{Read, Write};

use crate::error::Error;

pub const TRAJECTORY_HEADER: [&str; 10] = [
    "t", "x", "y", "theta", "v", "steer", "throttle", "reward", "collision", "success",
];

/// One line of a trajectory log: the state *after* step `t`, the control
/// that produced it and the reward it earned. Row `t = 0` is the start state
/// with zero control and reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub steer: f64,
    pub throttle: f64,
    pub reward: f64,
    pub collision: bool,
    pub success: bool,
}

pub fn write_trajectory_csv<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.theta.to_string(),
            r.v.to_string(),
            r.steer.to_string(),
            r.throttle.to_string(),
            r.reward.to_string(),
            (r.collision as u8).to_string(),
            (r.success as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "0" | "false" => Some(false),
        "1" | "true" => Some(true),
        _ => None,
    }
}

/// Parse a trajectory log. Errors name the offending 1-based line.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryRow>, Error> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != TRAJECTORY_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}", TRAJECTORY_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                line,
                msg: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| Error::Parse {
            line,
            msg: format!("bad {what} field"),
        };
        let f = |i: usize| -> Result<f64, Error> {
            rec[i].trim().parse::<f64>().map_err(|_| bad(TRAJECTORY_HEADER[i]))
        };
        rows.push(TrajectoryRow {
            t: rec[0].trim().parse().map_err(|_| bad("t"))?,
            x: f(1)?,
            y: f(2)?,
            theta: f(3)?,
            v: f(4)?,
            steer: f(5)?,
            throttle: f(6)?,
            reward: f(7)?,
            collision: parse_bool(&rec[8]).ok_or_else(|| bad("collision"))?,
            success: parse_bool(&rec[9]).ok_or_else(|| bad("success"))?,
        });
    }
    Ok(rows)
}
