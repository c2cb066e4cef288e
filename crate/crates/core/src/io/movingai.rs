//! Readers for movingai `.map` and `.scen` files.

use super::{numbered_lines, parse_field, ParseError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    passable: Vec<bool>,
}

impl GridMap {
    pub fn new(width: usize, height: usize, passable: Vec<bool>) -> Option<GridMap> {
        (width > 0 && height > 0 && passable.len() == width * height).then_some(GridMap {
            width,
            height,
            passable,
        })
    }

    /// All cells passable.
    pub fn open(width: usize, height: usize) -> Option<GridMap> {
        GridMap::new(width, height, vec![true; width * height])
    }

    pub fn is_passable(&self, col: i64, row: i64) -> bool {
        col >= 0
            && row >= 0
            && (col as usize) < self.width
            && (row as usize) < self.height
            && self.passable[row as usize * self.width + col as usize]
    }

    pub fn passable_count(&self) -> usize {
        self.passable.iter().filter(|&&p| p).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "type octile\nheight {}\nwidth {}\nmap\n",
            self.height, self.width
        );
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(if self.passable[r * self.width + c] {
                    '.'
                } else {
                    '@'
                });
            }
            out.push('\n');
        }
        out
    }
}

fn header_value(line: usize, text: &str, key: &str) -> Result<usize, ParseError> {
    let mut it = text.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(k), Some(v), None) if k == key => {
            let n: usize = parse_field(line, key, v)?;
            if n == 0 {
                return Err(ParseError::new(line, format!("{key} must be positive")));
            }
            Ok(n)
        }
        _ => Err(ParseError::new(line, format!("expected '{key} <n>'"))),
    }
}

pub fn parse_map(text: &str) -> Result<GridMap, ParseError> {
    let lines: Vec<(usize, &str)> = numbered_lines(text).collect();
    let get = |i: usize| lines.get(i).copied().unwrap_or((i + 1, ""));

    let (l, t) = get(0);
    if t.split_whitespace().collect::<Vec<_>>() != ["type", "octile"] {
        return Err(ParseError::new(l, "expected 'type octile'"));
    }
    let (l, t) = get(1);
    let height = header_value(l, t, "height")?;
    let (l, t) = get(2);
    let width = header_value(l, t, "width")?;
    let (l, t) = get(3);
    if t.trim() != "map" {
        return Err(ParseError::new(l, "expected 'map'"));
    }

    let first_row_line = 5;
    let rows: Vec<(usize, &str)> = lines.iter().skip(4).copied().collect();
    let body_len = rows
        .iter()
        .rposition(|(_, r)| !r.trim().is_empty())
        .map_or(0, |p| p + 1);
    if body_len < height {
        return Err(ParseError::new(
            first_row_line,
            format!("map has {body_len} rows, header declares {height}"),
        ));
    }
    if body_len > height {
        let (l, _) = rows[height];
        return Err(ParseError::new(
            l,
            "unexpected content after the last map row",
        ));
    }
    let mut passable = Vec::with_capacity(width * height);
    for &(l, row) in &rows[..height] {
        if row.chars().count() != width {
            return Err(ParseError::new(
                l,
                format!("row has {} cells, expected {width}", row.chars().count()),
            ));
        }
        for ch in row.chars() {
            passable.push(match ch {
                '.' | 'G' => true,
                '@' | 'O' | 'T' | 'S' | 'W' => false,
                other => return Err(ParseError::new(l, format!("unknown map glyph '{other}'"))),
            });
        }
    }
    Ok(GridMap {
        width,
        height,
        passable,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioEntry {
    pub bucket: i64,
    pub map: String,
    pub map_width: usize,
    pub map_height: usize,
    /// (col, row)
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub optimal_length: f64,
}

pub fn parse_scen(text: &str) -> Result<Vec<ScenarioEntry>, ParseError> {
    let mut lines = numbered_lines(text);
    match lines.next() {
        Some((_, h))
            if matches!(
                h.split_whitespace().collect::<Vec<_>>()[..],
                ["version", "1" | "1.0"]
            ) => {}
        Some((l, _)) => return Err(ParseError::new(l, "expected 'version 1'")),
        None => return Err(ParseError::new(1, "empty scenario file")),
    }
    let mut out = Vec::new();
    for (l, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(ParseError::new(
                l,
                format!("expected 9 tab-separated fields, found {}", f.len()),
            ));
        }
        let e = ScenarioEntry {
            bucket: parse_field(l, "bucket", f[0].trim())?,
            map: f[1].trim().to_string(),
            map_width: parse_field(l, "map width", f[2].trim())?,
            map_height: parse_field(l, "map height", f[3].trim())?,
            start: (
                parse_field(l, "start x", f[4].trim())?,
                parse_field(l, "start y", f[5].trim())?,
            ),
            goal: (
                parse_field(l, "goal x", f[6].trim())?,
                parse_field(l, "goal y", f[7].trim())?,
            ),
            optimal_length: parse_field(l, "optimal length", f[8].trim())?,
        };
        for (what, (x, y)) in [("start", e.start), ("goal", e.goal)] {
            if x >= e.map_width || y >= e.map_height {
                return Err(ParseError::new(
                    l,
                    format!("{what} ({x}, {y}) outside the map"),
                ));
            }
        }
        out.push(e);
    }
    Ok(out)
}

pub fn write_scen(entries: &[ScenarioEntry]) -> String {
    let mut out = String::from("version 1\n");
    for e in entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.8}\n",
            e.bucket,
            e.map,
            e.map_width,
            e.map_height,
            e.start.0,
            e.start.1,
            e.goal.0,
            e.goal.1,
            e.optimal_length
        ));
    }
    out
}
