//! ASCII map files.
//!
//! One grid row per line, cells separated by whitespace:
//!
//! | token   | cell                            |
//! |---------|---------------------------------|
//! | `#`     | wall                            |
//! | `.`     | floor                           |
//! | `1`–`4` | floor, spawn of agent *i*       |
//! | `G1`…   | floor, goal of agent *i*        |
//! | `Da`    | door of colour `a` (`a`–`z`)    |
//! | `Ka`    | floor, key of colour `a`        |
//!
//! Text after `;` is a comment; blank lines are skipped.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MAX_AGENTS: usize = 4;
/// Cell indices must fit in a byte for state packing.
pub const MAX_CELLS: usize = 256;

/// `(row, col)`, origin top-left.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tile {
    Wall,
    Floor,
    Door(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    width: usize,
    height: usize,
    tiles: Vec<Tile>,
    doors: Vec<(Cell, char)>,
    keys: Vec<(Cell, char)>,
    goals: Vec<(Cell, usize)>,
    spawns: Vec<Cell>,
}

fn layout_err(line: usize, message: impl Into<String>) -> Error {
    Error::Layout {
        line,
        message: message.into(),
    }
}

fn parse_agent(s: &str) -> Option<usize> {
    match s {
        "1" | "2" | "3" | "4" => s.parse::<usize>().ok().map(|i| i - 1),
        _ => None,
    }
}

fn parse_colour(s: &str) -> Option<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_lowercase() => Some(c),
        _ => None,
    }
}

impl GridLayout {
    pub fn parse(text: &str) -> Result<Self> {
        let mut tiles = Vec::new();
        let mut doors = Vec::new();
        let mut keys = Vec::new();
        let mut goals: BTreeMap<usize, (Cell, usize)> = BTreeMap::new();
        let mut spawns: BTreeMap<usize, (Cell, usize)> = BTreeMap::new();
        let mut width = None;
        let mut height = 0;

        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split(';').next().unwrap_or_default();
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            match width {
                None => width = Some(tokens.len()),
                Some(w) if w != tokens.len() => {
                    return Err(layout_err(
                        line_no,
                        format!("row has {} cells, expected {w}", tokens.len()),
                    ))
                }
                Some(_) => {}
            }
            let row = height;
            for (col, tok) in tokens.iter().enumerate() {
                let cell = (row, col);
                let tile = match *tok {
                    "#" => Tile::Wall,
                    "." => Tile::Floor,
                    t if parse_agent(t).is_some() => {
                        let agent = parse_agent(t).unwrap_or_default();
                        if spawns.insert(agent, (cell, line_no)).is_some() {
                            return Err(layout_err(line_no, format!("agent {t} spawns twice")));
                        }
                        Tile::Floor
                    }
                    t if t.starts_with('G') => {
                        let agent =
                            parse_agent(&t[1..]).ok_or_else(|| layout_err(line_no, format!("bad goal token `{t}`")))?;
                        if goals.insert(agent, (cell, line_no)).is_some() {
                            return Err(layout_err(line_no, format!("agent {} has two goals", agent + 1)));
                        }
                        Tile::Floor
                    }
                    t if t.starts_with('D') => {
                        let c = parse_colour(&t[1..])
                            .ok_or_else(|| layout_err(line_no, format!("bad door token `{t}`")))?;
                        doors.push((cell, c));
                        Tile::Door(c)
                    }
                    t if t.starts_with('K') => {
                        let c =
                            parse_colour(&t[1..]).ok_or_else(|| layout_err(line_no, format!("bad key token `{t}`")))?;
                        keys.push((cell, c));
                        Tile::Floor
                    }
                    t => return Err(layout_err(line_no, format!("unknown token `{t}`"))),
                };
                tiles.push(tile);
            }
            height += 1;
        }

        let width = width.ok_or_else(|| layout_err(1, "map is empty"))?;
        let last_line = text.lines().count();
        if width * height > MAX_CELLS {
            return Err(layout_err(
                last_line,
                format!("map has {} cells, at most {MAX_CELLS} supported", width * height),
            ));
        }
        if spawns.is_empty() {
            return Err(layout_err(last_line, "map has no agents"));
        }
        let n = spawns.len();
        if spawns.keys().copied().ne(0..n) {
            return Err(layout_err(last_line, "agents must be numbered 1..N without gaps"));
        }
        for (&agent, &(_, line)) in &goals {
            if agent >= n {
                return Err(layout_err(line, format!("goal for missing agent {}", agent + 1)));
            }
        }
        if goals.is_empty() {
            return Err(layout_err(last_line, "map has no goals"));
        }
        let key_colours: BTreeSet<char> = keys.iter().map(|(_, c)| *c).collect();
        for &((r, c), colour) in &doors {
            if !key_colours.contains(&colour) {
                return Err(layout_err(
                    last_line,
                    format!("door `D{colour}` at ({r}, {c}) has no key"),
                ));
            }
        }

        Ok(Self {
            width,
            height,
            tiles,
            doors,
            keys,
            goals: goals.into_iter().map(|(a, (cell, _))| (cell, a)).collect(),
            spawns: spawns.into_values().map(|(cell, _)| cell).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_agents(&self) -> usize {
        self.spawns.len()
    }

    pub fn spawns(&self) -> &[Cell] {
        &self.spawns
    }

    pub fn doors(&self) -> &[(Cell, char)] {
        &self.doors
    }

    pub fn keys(&self) -> &[(Cell, char)] {
        &self.keys
    }

    /// `(cell, agent)` pairs, agents zero-based.
    pub fn goals(&self) -> &[(Cell, usize)] {
        &self.goals
    }

    pub fn goal_of(&self, agent: usize) -> Option<Cell> {
        self.goals.iter().find(|(_, a)| *a == agent).map(|(c, _)| *c)
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.0 * self.width + cell.1
    }

    pub fn cell(&self, index: usize) -> Cell {
        (index / self.width, index % self.width)
    }

    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        self.tiles[self.index(cell)] == Tile::Wall
    }

    /// Colour of the door at `cell`, if any.
    pub fn door_at(&self, cell: Cell) -> Option<char> {
        match self.tiles[self.index(cell)] {
            Tile::Door(c) => Some(c),
            _ => None,
        }
    }

    /// Distinct door colours in first-appearance order; bit `i` of a door mask
    /// refers to `door_colours()[i]`.
    pub fn door_colours(&self) -> Vec<char> {
        let mut out = Vec::new();
        for (_, c) in &self.doors {
            if !out.contains(c) {
                out.push(*c);
            }
        }
        out
    }

    /// BFS distance from `from` to `to` through non-wall cells, treating
    /// doors as open or closed per `door_open` and skipping `blocked` cells.
    pub fn shortest_path(
        &self,
        from: Cell,
        to: Cell,
        door_open: impl Fn(char) -> bool,
        blocked: &[Cell],
    ) -> Option<usize> {
        let passable = |cell: Cell| match self.tiles[self.index(cell)] {
            Tile::Wall => false,
            Tile::Door(c) => door_open(c),
            Tile::Floor => !blocked.contains(&cell),
        };
        if !passable(from) && from != to {
            return None;
        }
        let mut dist = vec![usize::MAX; self.tiles.len()];
        let mut queue = VecDeque::from([from]);
        dist[self.index(from)] = 0;
        while let Some(cell) = queue.pop_front() {
            let d = dist[self.index(cell)];
            if cell == to {
                return Some(d);
            }
            for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (r, c) = (cell.0 as isize + dr, cell.1 as isize + dc);
                if !self.in_bounds(r, c) {
                    continue;
                }
                let next = (r as usize, c as usize);
                if passable(next) && dist[self.index(next)] == usize::MAX {
                    dist[self.index(next)] = d + 1;
                    queue.push_back(next);
                }
            }
        }
        None
    }
}

impl FromStr for GridLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for GridLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in 0..self.height {
            let mut cells = Vec::with_capacity(self.width);
            for col in 0..self.width {
                let cell = (row, col);
                let token = if let Some(a) = self.spawns.iter().position(|s| *s == cell) {
                    (a + 1).to_string()
                } else if let Some((_, a)) = self.goals.iter().find(|(c, _)| *c == cell) {
                    format!("G{}", a + 1)
                } else if let Some((_, k)) = self.keys.iter().find(|(c, _)| *c == cell) {
                    format!("K{k}")
                } else {
                    match self.tiles[self.index(cell)] {
                        Tile::Wall => "#".into(),
                        Tile::Floor => ".".into(),
                        Tile::Door(c) => format!("D{c}"),
                    }
                };
                cells.push(format!("{token:<2}"));
            }
            writeln!(f, "{}", cells.join(" ").trim_end())?;
        }
        Ok(())
    }
}
