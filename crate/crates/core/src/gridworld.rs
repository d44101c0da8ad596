//! Labeled gridworld MDPs: DoorKey and MultiRoom layouts, the deterministic
//! transition function, the labeling function and the ground-truth success
//! monitor.
//!
//! Positions are `(row, col)` with `(0, 0)` the top-left corner. The outer
//! ring of every generated map is wall.

use std::collections::VecDeque;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::word::Symbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Cell {
    Empty = 0,
    Wall = 1,
    Key = 2,
    DoorClosed = 3,
    DoorOpen = 4,
    Goal = 5,
    Ball = 6,
    Box = 7,
}

impl Cell {
    pub const COUNT: usize = 8;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Cell> {
        Some(match code {
            0 => Cell::Empty,
            1 => Cell::Wall,
            2 => Cell::Key,
            3 => Cell::DoorClosed,
            4 => Cell::DoorOpen,
            5 => Cell::Goal,
            6 => Cell::Ball,
            7 => Cell::Box,
            _ => return None,
        })
    }

    fn walkable(self) -> bool {
        matches!(self, Cell::Empty | Cell::DoorOpen | Cell::Goal)
    }

    fn carriable(self) -> Option<Carried> {
        match self {
            Cell::Key => Some(Carried::Key),
            Cell::Ball => Some(Carried::Ball),
            Cell::Box => Some(Carried::Box),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Dir {
    Up = 0,
    Left = 1,
    Down = 2,
    Right = 3,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::Up, Dir::Left, Dir::Down, Dir::Right];

    pub fn from_code(code: u8) -> Option<Dir> {
        Dir::ALL.get(code as usize).copied()
    }

    pub fn left(self) -> Dir {
        Dir::ALL[(self as usize + 1) % 4]
    }

    pub fn right(self) -> Dir {
        Dir::ALL[(self as usize + 3) % 4]
    }

    /// `(drow, dcol)` of one step forward.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Dir::Up => (-1, 0),
            Dir::Left => (0, -1),
            Dir::Down => (1, 0),
            Dir::Right => (0, 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Carried {
    Empty = 0,
    Key = 1,
    Ball = 2,
    Box = 3,
}

impl Carried {
    pub fn from_code(code: u8) -> Option<Carried> {
        Some(match code {
            0 => Carried::Empty,
            1 => Carried::Key,
            2 => Carried::Ball,
            3 => Carried::Box,
            _ => return None,
        })
    }

    fn as_cell(self) -> Option<Cell> {
        match self {
            Carried::Empty => None,
            Carried::Key => Some(Cell::Key),
            Carried::Ball => Some(Cell::Ball),
            Carried::Box => Some(Cell::Box),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Control {
    TurnLeft = 0,
    TurnRight = 1,
    Forward = 2,
    Pickup = 3,
    Drop = 4,
    Toggle = 5,
}

/// Canonical control ordering; tie-breaks everywhere follow it.
pub const CONTROLS: [Control; 6] = [
    Control::TurnLeft,
    Control::TurnRight,
    Control::Forward,
    Control::Pickup,
    Control::Drop,
    Control::Toggle,
];

impl Control {
    pub const COUNT: usize = 6;

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: u8) -> Option<Control> {
        CONTROLS.get(id as usize).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    DoorKey,
    MultiRoom,
}

impl TaskKind {
    pub fn ap_count(self) -> usize {
        match self {
            TaskKind::DoorKey => 3,
            TaskKind::MultiRoom => 4,
        }
    }

    pub fn ap_names(self) -> &'static [&'static str] {
        match self {
            TaskKind::DoorKey => &["Key is picked up", "Door is open", "agent reaches Goal"],
            TaskKind::MultiRoom => &[
                "Door 1 is open",
                "Door 2 is open",
                "Door 3 is open",
                "agent reaches Goal",
            ],
        }
    }

    /// Bit index of the "agent reaches Goal" proposition.
    pub fn goal_bit(self) -> usize {
        self.ap_count() - 1
    }

    fn keyed_doors(self) -> bool {
        self == TaskKind::DoorKey
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub height: usize,
    pub width: usize,
    pub xi: f64,
    pub horizon_cap: usize,
}

impl TaskSpec {
    /// 8×8 DoorKey.
    pub fn doorkey() -> Self {
        Self::doorkey_sized(8)
    }

    /// DoorKey on an `n × n` map including the outer wall (`n ≥ 5`).
    pub fn doorkey_sized(n: usize) -> Self {
        assert!(n >= 5, "DoorKey needs at least a 5x5 map");
        TaskSpec { kind: TaskKind::DoorKey, height: n, width: n, xi: 0.5, horizon_cap: 4 * n * n }
    }

    /// Four 5×5 rooms in a row joined by three doors.
    pub fn multiroom() -> Self {
        let (height, width) = (ROOM + 2, ROOMS * (ROOM + 1) + 1);
        TaskSpec { kind: TaskKind::MultiRoom, height, width, xi: 0.5, horizon_cap: 4 * height * width }
    }

    pub fn ap_count(&self) -> usize {
        self.kind.ap_count()
    }

    pub fn parse_kind(name: &str) -> Option<TaskSpec> {
        match name {
            "doorkey" => Some(Self::doorkey()),
            "multiroom" => Some(Self::multiroom()),
            _ => None,
        }
    }
}

const ROOM: usize = 5;
const ROOMS: usize = 4;
const DOOR_OPEN_PROB: f64 = 0.3;

/// Static facts about a generated map shared by all states derived from it.
#[derive(Debug, PartialEq, Eq)]
struct Layout {
    kind: TaskKind,
    height: usize,
    width: usize,
    /// Door cell indices ordered left to right.
    doors: Vec<usize>,
    goal: usize,
}

/// Full L-MDP state: map, agent pose and carried object.
#[derive(Clone, Debug)]
pub struct GridState {
    layout: Arc<Layout>,
    cells: Vec<Cell>,
    pos: usize,
    dir: Dir,
    carried: Carried,
}

impl PartialEq for GridState {
    fn eq(&self, other: &Self) -> bool {
        self.pos == other.pos
            && self.dir == other.dir
            && self.carried == other.carried
            && self.cells == other.cells
            && (Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout)
    }
}

impl Eq for GridState {}

impl Hash for GridState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.pos.hash(state);
        (self.dir as u8).hash(state);
        (self.carried as u8).hash(state);
        self.cells.hash(state);
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("map is empty or ragged")]
    Shape,
    #[error("unknown cell code {0}")]
    CellCode(u8),
    #[error("unknown {what} code {code}")]
    Code { what: &'static str, code: u8 },
    #[error("agent position ({0}, {1}) is outside the map or not walkable")]
    Position(usize, usize),
    #[error("map must contain exactly one goal, found {0}")]
    Goal(usize),
}

/// Serialized form of a [`GridState`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedState {
    pub map: Vec<Vec<u8>>,
    pub pos: [usize; 2],
    pub dir: u8,
    pub carried: u8,
}

impl GridState {
    pub fn kind(&self) -> TaskKind {
        self.layout.kind
    }

    pub fn height(&self) -> usize {
        self.layout.height
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn pos(&self) -> (usize, usize) {
        (self.pos / self.layout.width, self.pos % self.layout.width)
    }

    pub fn dir(&self) -> Dir {
        self.dir
    }

    pub fn carried(&self) -> Carried {
        self.carried
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.layout.width + col]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn goal(&self) -> (usize, usize) {
        (self.layout.goal / self.layout.width, self.layout.goal % self.layout.width)
    }

    pub fn door_positions(&self) -> Vec<(usize, usize)> {
        self.layout.doors.iter().map(|&d| (d / self.layout.width, d % self.layout.width)).collect()
    }

    pub fn door_open(&self, index: usize) -> bool {
        self.cells[self.layout.doors[index]] == Cell::DoorOpen
    }

    pub fn at_goal(&self) -> bool {
        self.pos == self.layout.goal
    }

    /// Cell at `(row + drow, col + dcol)`; off-map reads as wall.
    pub fn cell_offset(&self, drow: isize, dcol: isize) -> Cell {
        let (r, c) = self.pos();
        let (r, c) = (r as isize + drow, c as isize + dcol);
        if r < 0 || c < 0 || r >= self.layout.height as isize || c >= self.layout.width as isize {
            return Cell::Wall;
        }
        self.cells[r as usize * self.layout.width + c as usize]
    }

    fn front_index(&self) -> Option<usize> {
        let (r, c) = self.pos();
        let (dr, dc) = self.dir.delta();
        let (r, c) = (r as isize + dr, c as isize + dc);
        if r < 0 || c < 0 || r >= self.layout.height as isize || c >= self.layout.width as isize {
            return None;
        }
        Some(r as usize * self.layout.width + c as usize)
    }

    /// Contents of the cell the agent faces.
    pub fn front(&self) -> Cell {
        self.front_index().map_or(Cell::Wall, |i| self.cells[i])
    }

    /// Deterministic transition `f(x, u)`; inapplicable controls are no-ops.
    pub fn step(&self, u: Control) -> GridState {
        let mut next = self.clone();
        match u {
            Control::TurnLeft => next.dir = self.dir.left(),
            Control::TurnRight => next.dir = self.dir.right(),
            Control::Forward => {
                if let Some(i) = self.front_index() {
                    if self.cells[i].walkable() {
                        next.pos = i;
                    }
                }
            }
            Control::Pickup => {
                if let Some(i) = self.front_index() {
                    if let (Some(obj), Carried::Empty) = (self.cells[i].carriable(), self.carried) {
                        next.carried = obj;
                        next.cells[i] = Cell::Empty;
                    }
                }
            }
            Control::Drop => {
                if let (Some(i), Some(obj)) = (self.front_index(), self.carried.as_cell()) {
                    if self.cells[i] == Cell::Empty {
                        next.cells[i] = obj;
                        next.carried = Carried::Empty;
                    }
                }
            }
            Control::Toggle => {
                if let Some(i) = self.front_index() {
                    match self.cells[i] {
                        Cell::DoorClosed => {
                            if !self.layout.kind.keyed_doors() || self.carried == Carried::Key {
                                next.cells[i] = Cell::DoorOpen;
                            }
                        }
                        Cell::DoorOpen => next.cells[i] = Cell::DoorClosed,
                        _ => {}
                    }
                }
            }
        }
        next
    }

    /// Propositions that hold in this state.
    pub fn propositions(&self) -> Symbol {
        let mut bits = 0u8;
        match self.layout.kind {
            TaskKind::DoorKey => {
                if self.carried == Carried::Key {
                    bits |= 1;
                }
                if self.layout.doors.iter().any(|&d| self.cells[d] == Cell::DoorOpen) {
                    bits |= 2;
                }
            }
            TaskKind::MultiRoom => {
                for (i, &d) in self.layout.doors.iter().enumerate() {
                    if self.cells[d] == Cell::DoorOpen {
                        bits |= 1 << i;
                    }
                }
            }
        }
        if self.at_goal() {
            bits |= 1 << self.layout.kind.goal_bit();
        }
        Symbol::from_bits(bits)
    }

    /// Successor state and the label `ℓ(x, u)`, evaluated on the successor.
    pub fn transition(&self, u: Control) -> (GridState, Symbol) {
        let next = self.step(u);
        let sigma = next.propositions();
        (next, sigma)
    }

    pub fn label(&self, u: Control) -> Symbol {
        self.transition(u).1
    }

    pub fn encode(&self) -> EncodedState {
        let w = self.layout.width;
        EncodedState {
            map: self.cells.chunks(w).map(|row| row.iter().map(|c| c.code()).collect()).collect(),
            pos: [self.pos / w, self.pos % w],
            dir: self.dir as u8,
            carried: self.carried as u8,
        }
    }

    /// Rebuild a state from its serialized form. The task is inferred from
    /// the door count: one door is DoorKey, several is MultiRoom.
    pub fn decode(enc: &EncodedState) -> Result<GridState, GridError> {
        let height = enc.map.len();
        let width = enc.map.first().map_or(0, |r| r.len());
        if height == 0 || width == 0 || enc.map.iter().any(|r| r.len() != width) {
            return Err(GridError::Shape);
        }
        let cells = enc
            .map
            .iter()
            .flatten()
            .map(|&c| Cell::from_code(c).ok_or(GridError::CellCode(c)))
            .collect::<Result<Vec<_>, _>>()?;
        let dir = Dir::from_code(enc.dir).ok_or(GridError::Code { what: "direction", code: enc.dir })?;
        let carried = Carried::from_code(enc.carried)
            .ok_or(GridError::Code { what: "carried", code: enc.carried })?;
        let [r, c] = enc.pos;
        if r >= height || c >= width || !cells[r * width + c].walkable() {
            return Err(GridError::Position(r, c));
        }
        let goals: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == Cell::Goal).collect();
        if goals.len() != 1 {
            return Err(GridError::Goal(goals.len()));
        }
        let doors = ordered_doors(&cells, height, width);
        let kind = if doors.len() > 1 { TaskKind::MultiRoom } else { TaskKind::DoorKey };
        let layout = Arc::new(Layout { kind, height, width, doors, goal: goals[0] });
        Ok(GridState { layout, cells, pos: r * width + c, dir, carried })
    }
}

fn ordered_doors(cells: &[Cell], height: usize, width: usize) -> Vec<usize> {
    let mut doors = Vec::new();
    for col in 0..width {
        for row in 0..height {
            let i = row * width + col;
            if matches!(cells[i], Cell::DoorClosed | Cell::DoorOpen) {
                doors.push(i);
            }
        }
    }
    doors
}

/// Deterministic environment generation from `(task, seed)`.
pub fn generate_env(task: &TaskSpec, seed: u64) -> GridState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match task.kind {
        TaskKind::DoorKey => generate_doorkey(task.height, &mut rng),
        TaskKind::MultiRoom => generate_multiroom(&mut rng),
    }
}

fn walled(height: usize, width: usize) -> Vec<Cell> {
    let mut cells = vec![Cell::Empty; height * width];
    for r in 0..height {
        for c in 0..width {
            if r == 0 || c == 0 || r == height - 1 || c == width - 1 {
                cells[r * width + c] = Cell::Wall;
            }
        }
    }
    cells
}

/// Uniform empty cell inside the given row/col ranges, by rejection.
fn sample_empty(
    cells: &[Cell],
    width: usize,
    rows: std::ops::RangeInclusive<usize>,
    cols: std::ops::RangeInclusive<usize>,
    rng: &mut ChaCha8Rng,
) -> usize {
    loop {
        let r = rng.gen_range(rows.clone());
        let c = rng.gen_range(cols.clone());
        if cells[r * width + c] == Cell::Empty {
            return r * width + c;
        }
    }
}

fn generate_doorkey(n: usize, rng: &mut ChaCha8Rng) -> GridState {
    let mut cells = walled(n, n);
    let goal = (n - 2) * n + (n - 2);
    cells[goal] = Cell::Goal;
    let split = rng.gen_range(2..=n - 3);
    for r in 0..n {
        cells[r * n + split] = Cell::Wall;
    }
    let door_row = rng.gen_range(1..=n - 2);
    let open = rng.gen_bool(DOOR_OPEN_PROB);
    cells[door_row * n + split] = if open { Cell::DoorOpen } else { Cell::DoorClosed };
    // agent first, then the key in another free cell of the left room
    let pos = sample_empty(&cells, n, 1..=n - 2, 1..=split - 1, rng);
    let key = loop {
        let k = sample_empty(&cells, n, 1..=n - 2, 1..=split - 1, rng);
        if k != pos {
            break k;
        }
    };
    cells[key] = Cell::Key;
    let dir = Dir::ALL[rng.gen_range(0..4)];
    let layout = Arc::new(Layout {
        kind: TaskKind::DoorKey,
        height: n,
        width: n,
        doors: vec![door_row * n + split],
        goal,
    });
    GridState { layout, cells, pos, dir, carried: Carried::Empty }
}

fn generate_multiroom(rng: &mut ChaCha8Rng) -> GridState {
    let (h, w) = (ROOM + 2, ROOMS * (ROOM + 1) + 1);
    let mut cells = walled(h, w);
    let mut doors = Vec::with_capacity(ROOMS - 1);
    for k in 1..ROOMS {
        let col = k * (ROOM + 1);
        for r in 0..h {
            cells[r * w + col] = Cell::Wall;
        }
        let row = rng.gen_range(1..=ROOM);
        cells[row * w + col] = Cell::DoorClosed;
        doors.push(row * w + col);
    }
    let pos = sample_empty(&cells, w, 1..=ROOM, 1..=ROOM, rng);
    let last = (ROOMS - 1) * (ROOM + 1) + 1;
    let goal = sample_empty(&cells, w, 1..=ROOM, last..=last + ROOM - 1, rng);
    cells[goal] = Cell::Goal;
    let dir = Dir::ALL[rng.gen_range(0..4)];
    let layout = Arc::new(Layout { kind: TaskKind::MultiRoom, height: h, width: w, doors, goal });
    GridState { layout, cells, pos, dir, carried: Carried::Empty }
}

/// Ground-truth success: 1 iff the final state is on the goal cell.
pub fn success(trajectory: &[GridState]) -> u8 {
    trajectory.last().map_or(0, |x| u8::from(x.at_goal()))
}

/// Unit-cost shortest distance (in controls) from `start` to any state on
/// the goal cell, with one shortest control sequence. `None` when the goal is
/// unreachable within `max_states` explored states.
pub fn shortest_path_to_goal(start: &GridState, max_states: usize) -> Option<Vec<Control>> {
    if start.at_goal() {
        return Some(Vec::new());
    }
    let mut parent: FxHashMap<GridState, (GridState, Control)> = FxHashMap::default();
    let mut seen: FxHashSet<GridState> = FxHashSet::default();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start.clone());
    while let Some(x) = queue.pop_front() {
        for u in CONTROLS {
            let y = x.step(u);
            if seen.contains(&y) {
                continue;
            }
            if y.at_goal() {
                let mut controls = vec![u];
                let mut cur = x.clone();
                while let Some((p, pu)) = parent.get(&cur) {
                    controls.push(*pu);
                    cur = p.clone();
                }
                controls.reverse();
                return Some(controls);
            }
            if seen.len() >= max_states {
                return None;
            }
            seen.insert(y.clone());
            parent.insert(y.clone(), (x.clone(), u));
            queue.push_back(y);
        }
    }
    None
}

/// Default exploration budget for unit-cost searches.
pub const MAX_BFS_STATES: usize = 2_000_000;

pub fn shortest_distance_to_goal(start: &GridState) -> Option<usize> {
    shortest_path_to_goal(start, MAX_BFS_STATES).map(|p| p.len())
}
