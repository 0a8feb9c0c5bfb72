//! Mobile robot on a terrain grid, with a reach-then-reach or recurrence
//! objective and obstacles to avoid.
//!
//! From a cell the robot moves north, south, east or west. The move
//! succeeds with a terrain-dependent probability; otherwise the robot slips
//! to one of the two lateral neighbours with equal probability. A move into
//! the outer wall leaves the robot where it was.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::Example;
use crate::error::{Error, Result};
use crate::model::{CognitiveModel, LabeledMdp, RabinAutomaton};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terrain {
    Pavement,
    Grass,
    Gravel,
    Sand,
}

impl Terrain {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'p' => Some(Terrain::Pavement),
            'g' => Some(Terrain::Grass),
            'v' => Some(Terrain::Gravel),
            's' => Some(Terrain::Sand),
            _ => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Which reading of the obstacle clause the automaton encodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleRule {
    /// Obstacles must never be entered.
    #[default]
    Never,
    /// Obstacle-free cells must be occupied infinitely often.
    InfinitelyOftenClear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    /// One string per row, north first. Tokens are separated by spaces:
    /// a terrain letter (`p`, `g`, `v`, `s`) optionally followed by a
    /// region digit `1`-`3`, or `X` for an obstacle.
    pub map: Vec<String>,
    /// `(row, column)` of the starting cell.
    pub start: (usize, usize),
    /// Success probability per terrain under the onboard controller, in
    /// the order pavement, grass, gravel, sand.
    pub auto_success: [f64; 4],
    pub human_success: [f64; 4],
    /// Attention costs of the low, moderate and high states.
    pub costs: [f64; 3],
    /// `inc`: probability of moving one level up.
    pub raise: f64,
    /// `dec`: probability of moving one level down.
    pub lower: f64,
    /// `keep`: probability of staying at the current level.
    pub keep: f64,
    pub gamma: f64,
    pub obstacles: ObstacleRule,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            map: vec![
                "s2 p g p p3".into(),
                "p g p v s".into(),
                "X X s X X".into(),
                "X X g X X".into(),
                "p p p v p1".into(),
            ],
            start: (4, 0),
            auto_success: [0.95, 0.80, 0.75, 0.65],
            human_success: [0.95, 0.90, 0.85, 0.80],
            costs: [1.0, 5.0, 10.0],
            raise: 0.8,
            lower: 0.8,
            keep: 0.9,
            gamma: 0.98,
            obstacles: ObstacleRule::Never,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub terrain: Terrain,
    pub region: Option<u8>,
    pub obstacle: bool,
}

/// Parsed map.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Cell>,
}

impl Grid {
    pub fn parse(map: &[String]) -> Result<Grid> {
        let bad = |m: String| Error::Format(format!("grid map: {m}"));
        let mut cells = Vec::new();
        let mut cols = None;
        for (r, line) in map.iter().enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if *cols.get_or_insert(toks.len()) != toks.len() {
                return Err(bad(format!("row {r} has {} cells", toks.len())));
            }
            for tok in toks {
                if tok == "X" {
                    cells.push(Cell {
                        terrain: Terrain::Pavement,
                        region: None,
                        obstacle: true,
                    });
                    continue;
                }
                let mut ch = tok.chars();
                let terrain = ch
                    .next()
                    .and_then(Terrain::from_char)
                    .ok_or_else(|| bad(format!("unknown terrain in `{tok}`")))?;
                let region = match ch.as_str() {
                    "" => None,
                    "1" => Some(1),
                    "2" => Some(2),
                    "3" => Some(3),
                    other => return Err(bad(format!("unknown region `{other}` in `{tok}`"))),
                };
                cells.push(Cell {
                    terrain,
                    region,
                    obstacle: false,
                });
            }
        }
        let cols = cols.unwrap_or(0);
        if cols == 0 {
            return Err(bad("map is empty".into()));
        }
        Ok(Grid {
            rows: map.len(),
            cols,
            cells,
        })
    }

    pub fn cell(&self, r: usize, c: usize) -> &Cell {
        &self.cells[r * self.cols + c]
    }

    fn neighbour(&self, r: usize, c: usize, d: Dir) -> (usize, usize) {
        let (dr, dc) = d.delta();
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize {
            (r, c)
        } else {
            (nr as usize, nc as usize)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dir {
    N,
    S,
    E,
    W,
}

impl Dir {
    const ALL: [Dir; 4] = [Dir::N, Dir::S, Dir::E, Dir::W];

    fn delta(self) -> (isize, isize) {
        match self {
            Dir::N => (-1, 0),
            Dir::S => (1, 0),
            Dir::E => (0, 1),
            Dir::W => (0, -1),
        }
    }

    fn lateral(self) -> [Dir; 2] {
        match self {
            Dir::N | Dir::S => [Dir::E, Dir::W],
            Dir::E | Dir::W => [Dir::N, Dir::S],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dir::N => "N",
            Dir::S => "S",
            Dir::E => "E",
            Dir::W => "W",
        }
    }
}

pub fn cell_name(r: usize, c: usize) -> String {
    format!("r{r}c{c}")
}

pub const PROPS: [&str; 4] = ["R1", "R2", "R3", "Unsafe"];
pub const LEVELS: [&str; 3] = ["L", "M", "H"];
pub const EVENTS: [&str; 3] = ["inc", "dec", "keep"];

fn system(grid: &Grid, success: &[f64; 4], start: (usize, usize), gamma: f64) -> Result<LabeledMdp> {
    let mut names: Vec<&str> = Vec::new();
    let owned: Vec<String> = (0..grid.rows * grid.cols).map(|i| cell_name(i / grid.cols, i % grid.cols)).collect();
    names.extend(owned.iter().map(String::as_str));
    let mut b = LabeledMdp::builder(names, Dir::ALL.map(Dir::name), PROPS)
        .initial(&cell_name(start.0, start.1), 1.0)
        .gamma(gamma);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let here = cell_name(r, c);
            let cell = grid.cell(r, c);
            if cell.obstacle {
                b = b.label(&here, "Unsafe");
            }
            if let Some(k) = cell.region {
                b = b.label(&here, PROPS[k as usize - 1]);
            }
            let p = success[cell.terrain.index()];
            for d in Dir::ALL {
                let mut out: BTreeMap<(usize, usize), f64> = BTreeMap::new();
                *out.entry(grid.neighbour(r, c, d)).or_default() += p;
                for l in d.lateral() {
                    *out.entry(grid.neighbour(r, c, l)).or_default() += (1.0 - p) / 2.0;
                }
                for ((tr, tc), q) in out {
                    if q > 0.0 {
                        b = b.transition(&here, d.name(), &cell_name(tr, tc), q);
                    }
                }
            }
        }
    }
    b.build()
}

fn attention(p: &GridParams) -> Result<CognitiveModel> {
    let mut rows: Vec<(&str, &str, &str, f64)> = Vec::new();
    for (i, &h) in LEVELS.iter().enumerate() {
        let up = LEVELS[(i + 1).min(2)];
        let down = LEVELS[i.saturating_sub(1)];
        rows.extend([
            (h, "inc", up, p.raise),
            (h, "inc", h, 1.0 - p.raise),
            (h, "dec", down, p.lower),
            (h, "dec", h, 1.0 - p.lower),
            (h, "keep", h, p.keep),
            (h, "keep", down, 1.0 - p.keep),
        ]);
    }
    let mut b = CognitiveModel::builder(LEVELS, EVENTS)
        .initial("L", 1.0)
        .takeover("H")
        .gamma(p.gamma);
    for (h, e, t, q) in rows {
        if q > 0.0 {
            b = b.transition(h, e, t, q);
        }
    }
    for h in LEVELS {
        for e in EVENTS {
            for (j, t) in LEVELS.iter().enumerate() {
                b = b.cost(h, e, t, p.costs[j]);
            }
        }
    }
    b.build()
}

/// Control state of the task automaton.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Progress {
    /// 0: first region not yet seen, 1: waiting for the second, 2: done.
    phase: u8,
    /// Progress of the recurrence check: waiting for R3 (0) or for a clear
    /// cell (1). Only used by the infinitely-often-clear reading.
    wait: u8,
    /// The last letter completed a recurrence round.
    hit: bool,
    /// The last letter was obstacle-free.
    clear: bool,
    trap: bool,
}

impl Progress {
    fn name(&self, rule: ObstacleRule) -> String {
        match rule {
            ObstacleRule::Never if self.trap => "trap".into(),
            ObstacleRule::Never => {
                format!("q{}{}", self.phase, if self.hit { "r" } else { "" })
            }
            ObstacleRule::InfinitelyOftenClear => format!(
                "q{}w{}{}{}",
                self.phase,
                self.wait,
                if self.hit { "r" } else { "" },
                if self.clear { "c" } else { "" }
            ),
        }
    }

    fn step(self, rule: ObstacleRule, r1: bool, r2: bool, r3: bool, unsafe_: bool) -> Progress {
        if self.trap || (rule == ObstacleRule::Never && unsafe_) {
            return Progress { trap: true, phase: 0, wait: 0, hit: false, clear: false };
        }
        let phase = match self.phase {
            0 if r1 && r2 => 2,
            0 if r1 => 1,
            1 if r2 => 2,
            p => p,
        };
        let clear = rule == ObstacleRule::InfinitelyOftenClear && !unsafe_;
        let (wait, hit) = match rule {
            ObstacleRule::Never => (0, r3 && phase < 2),
            ObstacleRule::InfinitelyOftenClear => match (self.wait, r3, !unsafe_) {
                (0, true, true) => (0, true),
                (0, true, false) => (1, false),
                (1, _, true) => (0, true),
                (w, _, _) => (w, false),
            },
        };
        Progress { phase, wait, hit, clear, trap: false }
    }
}

/// Automaton for "(R1 then R2, or R3 infinitely often) and the obstacle
/// rule", over the propositions `R1, R2, R3, Unsafe`.
pub fn automaton(rule: ObstacleRule) -> Result<RabinAutomaton> {
    let init = Progress { phase: 0, wait: 0, hit: false, clear: false, trap: false };
    let mut index: BTreeMap<Progress, usize> = BTreeMap::new();
    let mut order = vec![init];
    index.insert(init, 0);
    let mut edges: Vec<(usize, Vec<&str>, usize)> = Vec::new();
    let mut queue = VecDeque::from([init]);
    while let Some(s) = queue.pop_front() {
        for mask in 0u8..16 {
            let bit = |i: u8| mask & (1 << i) != 0;
            let t = s.step(rule, bit(0), bit(1), bit(2), bit(3));
            let ti = *index.entry(t).or_insert_with(|| {
                order.push(t);
                queue.push_back(t);
                order.len() - 1
            });
            let letter = (0..4).filter(|&i| bit(i)).map(|i| PROPS[i as usize]).collect();
            edges.push((index[&s], letter, ti));
        }
    }
    let names: Vec<String> = order.iter().map(|s| s.name(rule)).collect();
    let mut b = RabinAutomaton::builder(names.clone(), PROPS.to_vec(), &names[0]);
    for (q, letter, t) in &edges {
        b = b.edge(&names[*q], letter, &names[*t]);
    }
    let pick = |f: &dyn Fn(&Progress) -> bool| -> Vec<String> {
        order
            .iter()
            .zip(&names)
            .filter(|(s, _)| f(s))
            .map(|(_, n)| n.clone())
            .collect()
    };
    let avoid = pick(&|s| s.trap);
    let done = match rule {
        ObstacleRule::Never => pick(&|s| !s.trap && s.phase == 2),
        ObstacleRule::InfinitelyOftenClear => pick(&|s| s.phase == 2 && s.clear),
    };
    let recur = pick(&|s| !s.trap && s.hit);
    b = b.pair(&avoid, &done).pair(&avoid, &recur);
    b.build()
}

impl GridParams {
    pub fn grid(&self) -> Result<Grid> {
        let g = Grid::parse(&self.map)?;
        if self.start.0 >= g.rows || self.start.1 >= g.cols {
            return Err(Error::Format(format!("start cell {:?} is off the map", self.start)));
        }
        Ok(g)
    }

    pub fn build(&self) -> Result<Example> {
        let grid = self.grid()?;
        Ok(Example {
            autonomous: system(&grid, &self.auto_success, self.start, self.gamma)?,
            human: system(&grid, &self.human_success, self.start, self.gamma)?,
            attention: attention(self)?,
            automaton: automaton(self.obstacles)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dra_step, validate_cognitive, validate_mdp, validate_rabin};

    #[test]
    fn default_models_validate() {
        let ex = GridParams::default().build().unwrap();
        assert_eq!(ex.autonomous.states().len(), 25);
        assert!(validate_mdp(&ex.autonomous).is_empty());
        assert!(validate_mdp(&ex.human).is_empty());
        assert!(validate_cognitive(&ex.attention).is_empty());
        assert!(validate_rabin(&ex.automaton).is_empty());
    }

    #[test]
    fn wall_bounces_back() {
        let ex = GridParams::default().build().unwrap();
        let m = &ex.autonomous;
        let s = m.state_index("r0c0").unwrap();
        let n = m.actions().iter().position(|a| a == "N").unwrap();
        let d = m.transition(s, n).unwrap();
        // sand: 0.65 into the wall, 0.175 west into the wall, 0.175 east.
        assert!((d.prob(s) - 0.825).abs() < 1e-12);
        assert!((d.prob(m.state_index("r0c1").unwrap()) - 0.175).abs() < 1e-12);
    }

    #[test]
    fn first_region_advances() {
        let a = automaton(ObstacleRule::Never).unwrap();
        assert_eq!(dra_step(&a, "q0", &["R1"]).unwrap(), "q1");
        assert_eq!(dra_step(&a, "q1", &["R2"]).unwrap(), "q2");
        assert_eq!(dra_step(&a, "q0", &["R3"]).unwrap(), "q0r");
        assert_eq!(dra_step(&a, "q2", &["Unsafe"]).unwrap(), "trap");
    }

    #[test]
    fn uniform_pavement_makes_controllers_equal() {
        let p = GridParams {
            map: vec!["p p".into(), "p p".into()],
            start: (0, 0),
            ..GridParams::default()
        };
        let ex = p.build().unwrap();
        assert_eq!(ex.autonomous, ex.human);
    }

    #[test]
    fn bad_maps_are_rejected() {
        for map in [vec!["p q".to_string()], vec!["p p".into(), "p".into()], vec!["p7".into()]] {
            let p = GridParams { map, start: (0, 0), ..GridParams::default() };
            assert!(p.build().is_err());
        }
    }
}
