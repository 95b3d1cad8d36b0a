use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BlockGraph, GameError, GridConfig};

/// Index into the palette `CR`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Color(pub u8);

impl Color {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Status of one block, an element of `CR ∪ {hidden, white}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockStatus {
    White,
    Hidden,
    Colored(Color),
}

/// A single player's move: paint `block` with `color`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub block: usize,
    pub color: Color,
}

impl Action {
    pub fn new(block: usize, color: u8) -> Self {
        Action { block, color: Color(color) }
    }

    /// Flat index `block * num_colors + color`, the layout of the network output.
    pub fn index(self, num_colors: usize) -> usize {
        self.block * num_colors + self.color.index()
    }

    pub fn from_index(index: usize, num_colors: usize) -> Self {
        Action { block: index / num_colors, color: Color((index % num_colors) as u8) }
    }
}

pub const GAIN: f64 = 1.0;
pub const PENALTY: f64 = -2.0;
pub const SANCTION: f64 = -10.0;
pub const DELAY: f64 = -1.0;

/// Reward-relevant events of one player in one round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub gains: u32,
    pub penalties: u32,
    pub sanctioned: bool,
    pub delayed: bool,
    /// On a collision, the player who got to paint.
    pub painter: Option<usize>,
    /// Whether this player's action changed the board.
    pub painted: bool,
}

impl StepEvents {
    /// Base reward: gains, penalties, sanction and delay; no preferences.
    pub fn reward(&self) -> f64 {
        GAIN * self.gains as f64
            + PENALTY * self.penalties as f64
            + if self.sanctioned { SANCTION } else { 0.0 }
            + if self.delayed { DELAY } else { 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: GameState,
    pub base_reward: Vec<f64>,
    pub events: Vec<StepEvents>,
    pub revealed: Vec<usize>,
}

/// The dynamic game state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    colors: Vec<BlockStatus>,
    hidden_palette: BTreeMap<usize, Color>,
    num_colors: usize,
}

impl GameState {
    /// An all-white board.
    pub fn blank(num_blocks: usize, num_colors: usize) -> Self {
        GameState {
            colors: vec![BlockStatus::White; num_blocks],
            hidden_palette: BTreeMap::new(),
            num_colors,
        }
    }

    /// Builds a state from explicit statuses and hidden colors. Every hidden
    /// block needs a palette entry and nothing else may have one.
    pub fn from_parts(
        colors: Vec<BlockStatus>,
        hidden_palette: BTreeMap<usize, Color>,
        num_colors: usize,
    ) -> Result<Self, GameError> {
        for (b, status) in colors.iter().enumerate() {
            match status {
                BlockStatus::Hidden if !hidden_palette.contains_key(&b) => {
                    return Err(GameError::State(format!("hidden block {b} has no palette color")))
                }
                BlockStatus::Colored(c) if c.index() >= num_colors => {
                    return Err(GameError::UnknownColor(c.index()))
                }
                _ => {}
            }
        }
        for (&b, c) in &hidden_palette {
            if colors.get(b) != Some(&BlockStatus::Hidden) {
                return Err(GameError::State(format!("palette entry for non-hidden block {b}")));
            }
            if c.index() >= num_colors {
                return Err(GameError::UnknownColor(c.index()));
            }
        }
        Ok(GameState { colors, hidden_palette, num_colors })
    }

    pub fn num_blocks(&self) -> usize {
        self.colors.len()
    }

    pub fn num_colors(&self) -> usize {
        self.num_colors
    }

    pub fn status(&self, block: usize) -> BlockStatus {
        self.colors[block]
    }

    pub fn statuses(&self) -> &[BlockStatus] {
        &self.colors
    }

    pub fn hidden_palette(&self) -> &BTreeMap<usize, Color> {
        &self.hidden_palette
    }

    pub fn count_white(&self) -> usize {
        self.colors.iter().filter(|s| **s == BlockStatus::White).count()
    }

    pub fn count_hidden(&self) -> usize {
        self.hidden_palette.len()
    }

    pub fn count_colored(&self) -> usize {
        self.colors.len() - self.count_white() - self.count_hidden()
    }

    /// Fraction of colored blocks that carry `color` (0 when none is colored).
    pub fn color_frequency(&self, color: Color) -> f64 {
        let colored = self.count_colored();
        if colored == 0 {
            return 0.0;
        }
        let n = self.colors.iter().filter(|s| **s == BlockStatus::Colored(color)).count();
        n as f64 / colored as f64
    }

    /// Over all edges whose endpoints are both colored: `(violating, total)`.
    pub fn violations(&self, graph: &BlockGraph) -> (usize, usize) {
        let mut bad = 0;
        let mut total = 0;
        for (a, b) in graph.edges() {
            if let (BlockStatus::Colored(x), BlockStatus::Colored(y)) = (self.colors[a], self.colors[b]) {
                total += 1;
                if x == y {
                    bad += 1;
                }
            }
        }
        (bad, total)
    }

    /// Violating share of colored adjacencies, 0 when there are none.
    pub fn violation_rate(&self, graph: &BlockGraph) -> f64 {
        match self.violations(graph) {
            (_, 0) => 0.0,
            (bad, total) => bad as f64 / total as f64,
        }
    }

    /// Compact observation: the color index, `num_colors` for hidden and
    /// `num_colors + 1` for white. Hidden colors are not observable.
    pub fn observation(&self) -> Vec<u8> {
        let n = self.num_colors as u8;
        self.colors
            .iter()
            .map(|s| match s {
                BlockStatus::Colored(c) => c.0,
                BlockStatus::Hidden => n,
                BlockStatus::White => n + 1,
            })
            .collect()
    }

    fn check_action(&self, action: Action) -> Result<(), GameError> {
        if action.block >= self.colors.len() {
            return Err(GameError::UnknownBlock(action.block));
        }
        if action.color.index() >= self.num_colors {
            return Err(GameError::UnknownColor(action.color.index()));
        }
        Ok(())
    }

    /// Applies one player's paint in place and returns its events.
    fn apply_paint(&mut self, action: Action, graph: &BlockGraph) -> StepEvents {
        let mut ev = StepEvents::default();
        if self.colors[action.block] != BlockStatus::White {
            ev.sanctioned = true;
            return ev;
        }
        for &n in graph.neighbors(action.block) {
            if let BlockStatus::Colored(c) = self.colors[n] {
                if c == action.color {
                    ev.penalties += 1;
                } else {
                    ev.gains += 1;
                }
            }
        }
        self.colors[action.block] = BlockStatus::Colored(action.color);
        ev.painted = true;
        ev
    }
}

/// Initial state: `floor(hidden_fraction * |B|)` uniformly chosen hidden
/// blocks with uniform environment colors; every other block is white.
pub fn init_state<R: Rng + ?Sized>(graph: &BlockGraph, config: &GridConfig, rng: &mut R) -> GameState {
    let n = graph.num_blocks();
    let hidden = config.hidden_count().min(n);
    let mut state = GameState::blank(n, config.num_colors);
    let mut chosen = sample(rng, n, hidden).into_vec();
    chosen.sort_unstable();
    for b in chosen {
        let color = Color(rng.gen_range(0..config.num_colors) as u8);
        state.colors[b] = BlockStatus::Hidden;
        state.hidden_palette.insert(b, color);
    }
    state
}

/// Reveals `k ~ U{0..#hidden}` uniformly chosen hidden blocks.
pub fn reveal_phase<R: Rng + ?Sized>(state: &GameState, rng: &mut R) -> (GameState, Vec<usize>) {
    let mut next = state.clone();
    let revealed = reveal_in_place(&mut next, rng);
    (next, revealed)
}

fn reveal_in_place<R: Rng + ?Sized>(state: &mut GameState, rng: &mut R) -> Vec<usize> {
    let hidden: Vec<usize> = state.hidden_palette.keys().copied().collect();
    if hidden.is_empty() {
        return Vec::new();
    }
    let k = rng.gen_range(0..=hidden.len());
    let mut picked: Vec<usize> = sample(rng, hidden.len(), k).into_iter().map(|i| hidden[i]).collect();
    picked.sort_unstable();
    for &b in &picked {
        let color = state.hidden_palette.remove(&b).expect("hidden block has a palette color");
        state.colors[b] = BlockStatus::Colored(color);
    }
    picked
}

/// True iff no block is hidden and none is white.
pub fn is_terminal(state: &GameState) -> bool {
    state.colors.iter().all(|s| matches!(s, BlockStatus::Colored(_)))
}

/// One round: reveal, then resolve the joint action (one or two players).
///
/// Collisions cost both players a delay; a fair coin picks the painter and
/// the other action is void. Distinct targets are resolved player 1 first,
/// so player 2's gains and penalties see player 1's paint.
pub fn step<R: Rng + ?Sized>(
    state: &GameState,
    joint: &[Action],
    graph: &BlockGraph,
    rng: &mut R,
) -> Result<StepOutcome, GameError> {
    if joint.is_empty() || joint.len() > 2 {
        return Err(GameError::PlayerCount(joint.len()));
    }
    if state.num_blocks() != graph.num_blocks() {
        return Err(GameError::State("state and graph disagree on the block count".into()));
    }
    if is_terminal(state) {
        return Err(GameError::Terminal);
    }
    for &a in joint {
        state.check_action(a)?;
    }
    let mut next = state.clone();
    let revealed = reveal_in_place(&mut next, rng);
    let mut events = vec![StepEvents::default(); joint.len()];

    if joint.len() == 2 && joint[0].block == joint[1].block {
        let painter = if rng.gen_bool(0.5) { 0 } else { 1 };
        let mut ev = next.apply_paint(joint[painter], graph);
        ev.delayed = true;
        ev.painter = Some(painter);
        events[painter] = ev;
        events[1 - painter] = StepEvents { delayed: true, painter: Some(painter), ..StepEvents::default() };
    } else {
        for (p, &a) in joint.iter().enumerate() {
            events[p] = next.apply_paint(a, graph);
        }
    }
    let base_reward = events.iter().map(StepEvents::reward).collect();
    Ok(StepOutcome { next_state: next, base_reward, events, revealed })
}
