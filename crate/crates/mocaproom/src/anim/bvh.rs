//! Biovision Hierarchy (BVH) text format: parser and writer.
//!
//! The parser is permissive about whitespace between tokens in the HIERARCHY
//! section, but motion data is read line by line: each non-empty line after
//! `Frame Time:` is one frame. End Sites are materialized as leaf joints
//! named `<parent>_end` with no channels, so extremity keypoints are
//! annotatable like any other joint. Errors carry 1-based line numbers.

use thiserror::Error;

use crate::anim::AnimationClip;
use crate::math::Vec3;
use crate::skeleton::{Channel, Joint, Skeleton, SkeletonError};

#[derive(Debug, Error)]
pub enum BvhError {
    #[error("missing HIERARCHY keyword (line {line})")]
    MissingHierarchy { line: usize },
    #[error("missing MOTION keyword (line {line})")]
    MissingMotion { line: usize },
    #[error("line {line}: expected {expected}, found {found}")]
    Unexpected { line: usize, expected: String, found: String },
    #[error("line {line}: expected a finite number, found \"{token}\"")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: unknown channel name \"{token}\"")]
    UnknownChannel { line: usize, token: String },
    #[error("line {line}: motion line has {got} values but the hierarchy declares {expected} channels")]
    MotionChannelCount { line: usize, expected: usize, got: usize },
    #[error("line {line}: header declares {declared} frames but the motion section contains {found}")]
    FrameCount { line: usize, declared: usize, found: usize },
    #[error("line {line}: frame time must be positive and finite, got {value}")]
    BadFrameTime { line: usize, value: f64 },
    #[error(transparent)]
    InvalidSkeleton(#[from] SkeletonError),
}

struct Cursor<'a> {
    lines: &'a [&'a str],
    line: usize,
    toks: std::str::SplitWhitespace<'a>,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn new(lines: &'a [&'a str]) -> Cursor<'a> {
        Cursor {
            lines,
            line: 0,
            toks: lines.first().copied().unwrap_or("").split_whitespace(),
            last_line: 1,
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        loop {
            if let Some(t) = self.toks.next() {
                self.last_line = self.line + 1;
                return Some((self.line + 1, t));
            }
            self.line += 1;
            if self.line >= self.lines.len() {
                return None;
            }
            self.toks = self.lines[self.line].split_whitespace();
        }
    }

    /// 1-based line of the most recently returned token.
    fn here(&self) -> usize {
        self.last_line
    }

    /// True if more tokens remain on the current line.
    fn more_on_line(&mut self) -> bool {
        self.toks.clone().next().is_some()
    }
}

fn unexpected(line: usize, expected: &str, found: Option<&str>) -> BvhError {
    BvhError::Unexpected {
        line,
        expected: expected.to_string(),
        found: found.map_or_else(|| "end of file".to_string(), |t| format!("\"{t}\"")),
    }
}

fn parse_channel(line: usize, token: &str) -> Result<Channel, BvhError> {
    match token.to_ascii_lowercase().as_str() {
        "xposition" => Ok(Channel::Xpos),
        "yposition" => Ok(Channel::Ypos),
        "zposition" => Ok(Channel::Zpos),
        "xrotation" => Ok(Channel::Xrot),
        "yrotation" => Ok(Channel::Yrot),
        "zrotation" => Ok(Channel::Zrot),
        _ => Err(BvhError::UnknownChannel { line, token: token.to_string() }),
    }
}

struct Parser<'a> {
    cur: Cursor<'a>,
    joints: Vec<Joint>,
}

impl<'a> Parser<'a> {
    fn expect_token(&mut self, expected: &str) -> Result<usize, BvhError> {
        match self.cur.next() {
            Some((line, t)) if t.eq_ignore_ascii_case(expected) => Ok(line),
            Some((line, t)) => Err(unexpected(line, &format!("\"{expected}\""), Some(t))),
            None => Err(unexpected(self.cur.here(), &format!("\"{expected}\""), None)),
        }
    }

    fn expect_number(&mut self, what: &str) -> Result<(usize, f64), BvhError> {
        match self.cur.next() {
            Some((line, t)) => match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok((line, v)),
                _ => Err(BvhError::BadNumber { line, token: t.to_string() }),
            },
            None => Err(unexpected(self.cur.here(), what, None)),
        }
    }

    fn expect_count(&mut self, what: &str) -> Result<(usize, usize), BvhError> {
        match self.cur.next() {
            Some((line, t)) => t
                .parse::<usize>()
                .map(|v| (line, v))
                .map_err(|_| BvhError::BadNumber { line, token: t.to_string() }),
            None => Err(unexpected(self.cur.here(), what, None)),
        }
    }

    /// Parses a joint body after its name: `{ OFFSET .. CHANNELS .. children }`.
    fn parse_joint_body(&mut self, name: String, parent: Option<usize>) -> Result<(), BvhError> {
        self.expect_token("{")?;
        self.expect_token("OFFSET")?;
        let (_, x) = self.expect_number("an OFFSET value")?;
        let (_, y) = self.expect_number("an OFFSET value")?;
        let (_, z) = self.expect_number("an OFFSET value")?;
        self.expect_token("CHANNELS")?;
        let (_, count) = self.expect_count("a channel count")?;
        let mut channels = Vec::with_capacity(count);
        for _ in 0..count {
            match self.cur.next() {
                Some((line, t)) => channels.push(parse_channel(line, t)?),
                None => return Err(unexpected(self.cur.here(), "a channel name", None)),
            }
        }

        let index = self.joints.len();
        self.joints.push(Joint::new(name.clone(), parent, Vec3::new(x, y, z), channels));

        loop {
            match self.cur.next() {
                Some((_, t)) if t.eq_ignore_ascii_case("JOINT") => {
                    let child = match self.cur.next() {
                        Some((_, n)) => n.to_string(),
                        None => return Err(unexpected(self.cur.here(), "a joint name", None)),
                    };
                    self.parse_joint_body(child, Some(index))?;
                }
                Some((_, t)) if t.eq_ignore_ascii_case("End") => {
                    self.expect_token("Site")?;
                    self.expect_token("{")?;
                    self.expect_token("OFFSET")?;
                    let (_, ex) = self.expect_number("an OFFSET value")?;
                    let (_, ey) = self.expect_number("an OFFSET value")?;
                    let (_, ez) = self.expect_number("an OFFSET value")?;
                    self.expect_token("}")?;
                    self.joints.push(Joint::new(
                        format!("{name}_end"),
                        Some(index),
                        Vec3::new(ex, ey, ez),
                        Vec::new(),
                    ));
                }
                Some((_, "}")) => return Ok(()),
                Some((line, t)) => {
                    return Err(unexpected(line, "\"JOINT\", \"End Site\" or \"}\"", Some(t)))
                }
                None => return Err(unexpected(self.cur.here(), "\"}\"", None)),
            }
        }
    }
}

/// Parses a BVH document into an [`AnimationClip`].
pub fn parse_bvh(text: &str) -> Result<AnimationClip, BvhError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut parser = Parser { cur: Cursor::new(&lines), joints: Vec::new() };

    match parser.cur.next() {
        Some((_, t)) if t.eq_ignore_ascii_case("HIERARCHY") => {}
        Some((line, _)) => return Err(BvhError::MissingHierarchy { line }),
        None => return Err(BvhError::MissingHierarchy { line: 1 }),
    }

    parser.expect_token("ROOT")?;
    let root_name = match parser.cur.next() {
        Some((_, n)) => n.to_string(),
        None => return Err(unexpected(parser.cur.here(), "a joint name", None)),
    };
    parser.parse_joint_body(root_name, None)?;

    match parser.cur.next() {
        Some((_, t)) if t.eq_ignore_ascii_case("MOTION") => {}
        Some((line, t)) if t.eq_ignore_ascii_case("ROOT") => {
            return Err(unexpected(line, "\"MOTION\" (only one ROOT is supported)", Some(t)))
        }
        Some((line, _)) => return Err(BvhError::MissingMotion { line }),
        None => return Err(BvhError::MissingMotion { line: parser.cur.here() }),
    }

    // "Frames:" and "Frame Time:" headers; tolerate a fused "Frames:N".
    let (frames_line, declared) = {
        match parser.cur.next() {
            Some((line, t)) => {
                let lower = t.to_ascii_lowercase();
                if lower == "frames:" {
                    let (_, v) = parser.expect_count("a frame count")?;
                    (line, v)
                } else if let Some(rest) = lower.strip_prefix("frames:") {
                    let v = rest
                        .parse::<usize>()
                        .map_err(|_| BvhError::BadNumber { line, token: rest.to_string() })?;
                    (line, v)
                } else {
                    return Err(unexpected(line, "\"Frames:\"", Some(t)));
                }
            }
            None => return Err(unexpected(parser.cur.here(), "\"Frames:\"", None)),
        }
    };

    parser.expect_token("Frame")?;
    let (time_line, frame_time) = match parser.cur.next() {
        Some((line, t)) => {
            let lower = t.to_ascii_lowercase();
            if lower == "time:" {
                let (line, v) = parser.expect_number("a frame time")?;
                (line, v)
            } else if let Some(rest) = lower.strip_prefix("time:") {
                match rest.parse::<f64>() {
                    Ok(v) if v.is_finite() => (line, v),
                    _ => return Err(BvhError::BadNumber { line, token: rest.to_string() }),
                }
            } else {
                return Err(unexpected(line, "\"Time:\"", Some(t)));
            }
        }
        None => return Err(unexpected(parser.cur.here(), "\"Frame Time:\"", None)),
    };
    if !(frame_time.is_finite() && frame_time > 0.0) {
        return Err(BvhError::BadFrameTime { line: time_line, value: frame_time });
    }
    if parser.cur.more_on_line() {
        let (line, t) = parser.cur.next().expect("token on line");
        return Err(unexpected(line, "frame data to start on a new line", Some(t)));
    }

    let skeleton = Skeleton::new(parser.joints, "unspecified")?;
    let total = skeleton.total_channels();

    // One frame per non-empty line after the Frame Time line.
    let mut frames = Vec::with_capacity(declared);
    for (idx, raw) in lines.iter().enumerate().skip(time_line) {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut values = Vec::with_capacity(total);
        for tok in raw.split_whitespace() {
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => return Err(BvhError::BadNumber { line, token: tok.to_string() }),
            }
        }
        if values.len() != total {
            return Err(BvhError::MotionChannelCount { line, expected: total, got: values.len() });
        }
        frames.push(crate::skeleton::LocalPose::new(values));
    }

    if frames.len() != declared {
        return Err(BvhError::FrameCount { line: frames_line, declared, found: frames.len() });
    }
    if frames.is_empty() {
        return Err(BvhError::FrameCount { line: frames_line, declared, found: 0 });
    }

    // Constructor invariants (frame_time, channel counts) were checked above.
    Ok(AnimationClip::new(skeleton, frame_time, frames).expect("validated while parsing"))
}

fn channel_name(ch: Channel) -> &'static str {
    match ch {
        Channel::Xpos => "Xposition",
        Channel::Ypos => "Yposition",
        Channel::Zpos => "Zposition",
        Channel::Xrot => "Xrotation",
        Channel::Yrot => "Yrotation",
        Channel::Zrot => "Zrotation",
    }
}

/// Serializes a clip as BVH text.
///
/// Channel-less leaf joints become End Sites (their names are not
/// representable in BVH; reparsing synthesizes `<parent>_end`). A leaf that
/// has channels gains a zero-offset End Site to satisfy the grammar.
pub fn format_bvh(clip: &AnimationClip) -> String {
    let skeleton = clip.skeleton();
    let joints = skeleton.joints();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); joints.len()];
    for (i, j) in joints.iter().enumerate() {
        if let Some(p) = j.parent {
            children[p].push(i);
        }
    }

    fn write_joint(
        out: &mut String,
        joints: &[Joint],
        children: &[Vec<usize>],
        index: usize,
        depth: usize,
    ) {
        let j = &joints[index];
        let pad = "  ".repeat(depth);
        let offset = j.rest_offset;

        if j.channels.is_empty() && children[index].is_empty() && depth > 0 {
            out.push_str(&format!(
                "{pad}End Site\n{pad}{{\n{pad}  OFFSET {} {} {}\n{pad}}}\n",
                offset.x, offset.y, offset.z
            ));
            return;
        }

        let keyword = if depth == 0 { "ROOT" } else { "JOINT" };
        out.push_str(&format!("{pad}{keyword} {}\n{pad}{{\n", j.name));
        out.push_str(&format!("{pad}  OFFSET {} {} {}\n", offset.x, offset.y, offset.z));
        out.push_str(&format!("{pad}  CHANNELS {}", j.channels.len()));
        for ch in &j.channels {
            out.push(' ');
            out.push_str(channel_name(*ch));
        }
        out.push('\n');
        if children[index].is_empty() {
            out.push_str(&format!("{pad}  End Site\n{pad}  {{\n{pad}    OFFSET 0 0 0\n{pad}  }}\n"));
        } else {
            for &c in &children[index] {
                write_joint(out, joints, children, c, depth + 1);
            }
        }
        out.push_str(&format!("{pad}}}\n"));
    }

    let mut out = String::from("HIERARCHY\n");
    write_joint(&mut out, joints, &children, 0, 0);
    out.push_str("MOTION\n");
    out.push_str(&format!("Frames: {}\n", clip.frame_count()));
    out.push_str(&format!("Frame Time: {}\n", clip.frame_time()));
    for frame in clip.frames() {
        let row: Vec<String> = frame.values().iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
