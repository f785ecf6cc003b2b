//! Readers for the movingai `.map` and `.scen` formats.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Coord, GridMap, MapfInstance, ModelError};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("scenario has {available} entries, {requested} requested")]
    TooFewEntries { available: usize, requested: usize },
    #[error("scenario entry on line {line}: {source}")]
    Instance { line: usize, source: ModelError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses a `.map` file. `name` becomes the map's name.
pub fn parse_map(name: &str, text: &str) -> Result<GridMap, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (mut width, mut height) = (None, None);
    let mut last_line = 0;
    loop {
        let Some((no, line)) = lines.next() else {
            return Err(syntax(last_line + 1, "missing `map` header line"));
        };
        last_line = no;
        let mut words = line.split_whitespace();
        match (words.next(), words.next()) {
            (Some("type"), _) => {}
            (Some("height"), Some(v)) => {
                height = Some(
                    v.parse::<u32>()
                        .map_err(|_| syntax(no, format!("bad height `{v}`")))?,
                )
            }
            (Some("width"), Some(v)) => {
                width = Some(
                    v.parse::<u32>()
                        .map_err(|_| syntax(no, format!("bad width `{v}`")))?,
                )
            }
            (Some("map"), None) => break,
            (None, _) => {}
            _ => return Err(syntax(no, format!("unexpected header line `{line}`"))),
        }
    }
    let height = height.ok_or_else(|| syntax(last_line, "missing height"))?;
    let width = width.ok_or_else(|| syntax(last_line, "missing width"))?;
    if width == 0 || height == 0 {
        return Err(syntax(last_line, "empty grid"));
    }

    let mut passable = Vec::with_capacity(width as usize * height as usize);
    for row in 0..height {
        let Some((no, line)) = lines.next() else {
            return Err(syntax(
                last_line + 1,
                format!("grid truncated: {row} of {height} rows"),
            ));
        };
        last_line = no;
        if line.chars().count() != width as usize {
            return Err(syntax(
                no,
                format!("row has {} glyphs, expected {width}", line.chars().count()),
            ));
        }
        for (col, glyph) in line.chars().enumerate() {
            passable.push(match glyph {
                '.' | 'G' => true,
                '@' | 'O' | 'T' | 'W' => false,
                other => {
                    return Err(syntax(
                        no,
                        format!("unknown glyph `{other}` at column {col}"),
                    ))
                }
            });
        }
    }
    for (no, line) in lines {
        if !line.trim().is_empty() {
            return Err(syntax(no, "trailing content after grid"));
        }
    }
    Ok(GridMap::new(name, width, height, passable)?)
}

/// Renders a map back into `.map` text, with `.` and `@` glyphs.
pub fn render_map(map: &GridMap) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "type octile\nheight {}\nwidth {}\nmap\n",
        map.height(),
        map.width()
    );
    for row in 0..map.height() {
        for col in 0..map.width() {
            out.push(if map.is_passable_at(Coord::new(row, col)) {
                '.'
            } else {
                '@'
            });
        }
        out.push('\n');
    }
    out
}

/// One line of a `.scen` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenEntry {
    pub bucket: u32,
    pub map_name: String,
    pub map_width: u32,
    pub map_height: u32,
    pub start: Coord,
    pub goal: Coord,
    pub reference_length: f64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub version: String,
    pub entries: Vec<ScenEntry>,
}

pub fn parse_scen_file(text: &str) -> Result<ScenarioFile, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let version = match lines.next() {
        Some((_, l)) if l.starts_with("version") => l["version".len()..].trim().to_string(),
        Some((no, _)) => return Err(syntax(no, "expected `version` header")),
        None => return Err(syntax(1, "empty scenario file")),
    };
    let mut entries = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let fields = if fields.len() == 9 {
            fields
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() != 9 {
            return Err(syntax(
                no,
                format!("expected 9 fields, found {}", fields.len()),
            ));
        }
        let int = |i: usize, what: &str| {
            fields[i]
                .trim()
                .parse::<u32>()
                .map_err(|_| syntax(no, format!("bad {what} `{}`", fields[i])))
        };
        let reference_length = fields[8]
            .trim()
            .parse::<f64>()
            .map_err(|_| syntax(no, format!("bad reference length `{}`", fields[8])))?;
        entries.push(ScenEntry {
            bucket: int(0, "bucket")?,
            map_name: fields[1].trim().to_string(),
            map_width: int(2, "map width")?,
            map_height: int(3, "map height")?,
            start: Coord::new(int(5, "start row")?, int(4, "start column")?),
            goal: Coord::new(int(7, "goal row")?, int(6, "goal column")?),
            reference_length,
            line: no,
        });
    }
    Ok(ScenarioFile { version, entries })
}

/// Builds an instance from the first `n_agents` entries of a `.scen` file.
///
/// Distances are recomputed by BFS on the 4-connected grid; the file's
/// reference lengths are not used.
pub fn parse_scen(text: &str, map: &GridMap, n_agents: usize) -> Result<MapfInstance, ParseError> {
    let scen = parse_scen_file(text)?;
    if scen.entries.len() < n_agents {
        return Err(ParseError::TooFewEntries {
            available: scen.entries.len(),
            requested: n_agents,
        });
    }
    let entries = &scen.entries[..n_agents];
    for e in entries {
        if e.map_width != map.width() || e.map_height != map.height() {
            return Err(syntax(
                e.line,
                format!(
                    "entry is for a {}x{} map, loaded map is {}x{}",
                    e.map_width,
                    e.map_height,
                    map.width(),
                    map.height()
                ),
            ));
        }
    }
    let tasks = entries.iter().map(|e| (e.start, e.goal)).collect();
    MapfInstance::new(map.clone(), tasks).map_err(|source| match &source {
        ModelError::BlockedEndpoint { agent, .. }
        | ModelError::Unreachable { agent, .. }
        | ModelError::DuplicateEndpoint { second: agent, .. } => ParseError::Instance {
            line: entries[*agent].line,
            source,
        },
        _ => ParseError::Model(source),
    })
}

/// Entries whose BFS distance differs from the file's reference length,
/// as `(agent, bfs, reference)`. Informational only.
pub fn reference_length_mismatches(
    instance: &MapfInstance,
    scen: &ScenarioFile,
) -> Vec<(usize, u32, f64)> {
    (0..instance.num_agents())
        .filter_map(|a| {
            let bfs = instance.shortest(a);
            let reference = scen.entries[a].reference_length;
            ((bfs as f64 - reference).abs() > 1e-6).then_some((a, bfs, reference))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_map_with_one_obstacle() {
        let map = parse_map("tiny", "type octile\nheight 2\nwidth 2\nmap\n.@\nG.\n").unwrap();
        assert_eq!((map.width(), map.height()), (2, 2));
        assert_eq!(map.num_passable(), 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = |text: &str, line: usize| match parse_map("m", text) {
            Err(ParseError::Syntax { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        };
        bad("type octile\nheight 2\nwidth 2\nmap\n..\n.x\n", 6);
        bad("type octile\nheight 2\nwidth 2\nmap\n...\n..\n", 5);
        bad("type octile\nheight 3\nwidth 2\nmap\n..\n..\n", 7);
        bad("type octile\nheight 2\nwidth 2\n", 4);
        bad("type octile\nheight two\nwidth 2\nmap\n", 2);
    }

    #[test]
    fn render_round_trip() {
        let text = "type octile\nheight 2\nwidth 3\nmap\n.@.\n@..\n";
        let map = parse_map("m", text).unwrap();
        assert_eq!(render_map(&map), text);
    }

    const SCEN: &str = "version 1\n\
        0\tm.map\t3\t2\t0\t0\t2\t1\t3\n\
        0\tm.map\t3\t2\t2\t0\t0\t1\t3.41421356\n";

    #[test]
    fn scen_columns_are_col_then_row() {
        let map = GridMap::open("m", 3, 2).unwrap();
        let inst = parse_scen(SCEN, &map, 2).unwrap();
        assert_eq!(map.coord(inst.start(0)), Coord::new(0, 0));
        assert_eq!(map.coord(inst.goal(0)), Coord::new(1, 2));
        assert_eq!(map.coord(inst.start(1)), Coord::new(0, 2));
        assert_eq!(inst.shortest(1), 3);
        let scen = parse_scen_file(SCEN).unwrap();
        assert_eq!(
            reference_length_mismatches(&inst, &scen),
            vec![(1, 3, 3.41421356)]
        );
    }

    #[test]
    fn zero_agents_and_too_many() {
        let map = GridMap::open("m", 3, 2).unwrap();
        assert_eq!(parse_scen(SCEN, &map, 0).unwrap().num_agents(), 0);
        assert!(matches!(
            parse_scen(SCEN, &map, 3),
            Err(ParseError::TooFewEntries {
                available: 2,
                requested: 3
            })
        ));
    }

    #[test]
    fn blocked_endpoint_and_wrong_dimensions() {
        let map = parse_map("m", "type octile\nheight 2\nwidth 3\nmap\n...\n..@\n").unwrap();
        assert!(matches!(
            parse_scen(SCEN, &map, 1),
            Err(ParseError::Instance { line: 2, .. })
        ));
        let other = GridMap::open("m", 4, 2).unwrap();
        assert!(matches!(
            parse_scen(SCEN, &other, 1),
            Err(ParseError::Syntax { line: 2, .. })
        ));
    }
}
