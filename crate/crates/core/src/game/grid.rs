use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GameError;

/// Board dimensions, partition size, palette size and the initial
/// hidden share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub num_blocks: usize,
    pub num_colors: usize,
    pub hidden_fraction: f64,
    /// Seed of the board layout.
    pub seed: u64,
    /// Optional explicit layout: one block label per cell in row-major
    /// order. When present it replaces random generation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<Vec<usize>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            rows: 4,
            cols: 5,
            num_blocks: 10,
            num_colors: 10,
            hidden_fraction: 0.3,
            seed: 0,
            layout: None,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(GameError::Config("rows and cols must be positive".into()));
        }
        if self.num_blocks == 0 {
            return Err(GameError::Config("num_blocks must be positive".into()));
        }
        if self.num_blocks > self.rows * self.cols {
            return Err(GameError::Config(format!(
                "num_blocks = {} exceeds the {}x{} = {} cells",
                self.num_blocks,
                self.rows,
                self.cols,
                self.rows * self.cols
            )));
        }
        if self.num_colors == 0 || self.num_colors > 250 {
            return Err(GameError::Config("num_colors must be in 1..=250".into()));
        }
        if !(0.0..=1.0).contains(&self.hidden_fraction) {
            return Err(GameError::Config("hidden_fraction must lie in [0, 1]".into()));
        }
        if let Some(layout) = &self.layout {
            if layout.len() != self.rows * self.cols {
                return Err(GameError::Config(format!(
                    "layout has {} cells, expected {}",
                    layout.len(),
                    self.rows * self.cols
                )));
            }
        }
        Ok(())
    }

    /// Number of blocks hidden at the start of a game: `floor(fraction * |B|)`.
    pub fn hidden_count(&self) -> usize {
        // The epsilon keeps products like 0.3 * 10 from landing just below
        // an integer.
        ((self.hidden_fraction * self.num_blocks as f64) + 1e-9).floor() as usize
    }

    /// Builds the board: the explicit layout when given, otherwise a random
    /// partition seeded by `self.seed`.
    pub fn build_graph(&self) -> Result<BlockGraph, GameError> {
        self.validate()?;
        match &self.layout {
            Some(labels) => {
                let g = BlockGraph::from_labels(self.rows, self.cols, labels)?;
                if g.num_blocks() != self.num_blocks {
                    return Err(GameError::Config(format!(
                        "layout defines {} blocks but num_blocks = {}",
                        g.num_blocks(),
                        self.num_blocks
                    )));
                }
                Ok(g)
            }
            None => {
                let mut rng = crate::rng::stream(self.seed, "grid");
                generate_grid(self, &mut rng)
            }
        }
    }
}

/// Grid cell as `(row, col)`.
pub type Cell = (usize, usize);

/// The board: cells merged into blocks plus the block adjacency graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGraph {
    rows: usize,
    cols: usize,
    blocks: Vec<Vec<Cell>>,
    adjacency: Vec<Vec<usize>>,
}

impl BlockGraph {
    /// Builds a graph from one block label per cell (row-major). Labels are
    /// renumbered so that blocks are ordered by their first cell.
    pub fn from_labels(rows: usize, cols: usize, labels: &[usize]) -> Result<Self, GameError> {
        if labels.len() != rows * cols {
            return Err(GameError::Config(format!(
                "expected {} labels, got {}",
                rows * cols,
                labels.len()
            )));
        }
        let mut remap = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<Cell>> = Vec::new();
        for (idx, &label) in labels.iter().enumerate() {
            let id = *remap.entry(label).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[id].push((idx / cols, idx % cols));
        }
        let graph = Self::assemble(rows, cols, blocks);
        for (b, cells) in graph.blocks.iter().enumerate() {
            if !is_connected(cells) {
                return Err(GameError::Config(format!("block {b} is not 4-connected")));
            }
        }
        Ok(graph)
    }

    fn assemble(rows: usize, cols: usize, blocks: Vec<Vec<Cell>>) -> Self {
        let mut owner = vec![usize::MAX; rows * cols];
        for (b, cells) in blocks.iter().enumerate() {
            for &(r, c) in cells {
                owner[r * cols + c] = b;
            }
        }
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); blocks.len()];
        for r in 0..rows {
            for c in 0..cols {
                let a = owner[r * cols + c];
                if a == usize::MAX {
                    continue;
                }
                for (nr, nc) in [(r + 1, c), (r, c + 1)] {
                    if nr < rows && nc < cols {
                        let b = owner[nr * cols + nc];
                        if b != usize::MAX && b != a {
                            adj[a].insert(b);
                            adj[b].insert(a);
                        }
                    }
                }
            }
        }
        BlockGraph {
            rows,
            cols,
            blocks,
            adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<Cell>] {
        &self.blocks
    }

    pub fn cells(&self, block: usize) -> &[Cell] {
        &self.blocks[block]
    }

    pub fn neighbors(&self, block: usize) -> &[usize] {
        &self.adjacency[block]
    }

    pub fn degree(&self, block: usize) -> usize {
        self.adjacency[block].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Undirected edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    /// Block label of every cell, row-major; `None` for uncovered cells.
    pub fn labels(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.rows * self.cols];
        for (b, cells) in self.blocks.iter().enumerate() {
            for &(r, c) in cells {
                out[r * self.cols + c] = Some(b);
            }
        }
        out
    }

    /// Canonical text form:
    ///
    /// ```text
    /// grid 4x5
    /// block 0: 0,0 0,1
    /// ...
    /// adj 0: 1 3
    /// ...
    /// ```
    pub fn dump(&self) -> String {
        let mut out = format!("grid {}x{}\n", self.rows, self.cols);
        for (b, cells) in self.blocks.iter().enumerate() {
            let _ = write!(out, "block {b}:");
            for (r, c) in cells {
                let _ = write!(out, " {r},{c}");
            }
            out.push('\n');
        }
        for (b, ns) in self.adjacency.iter().enumerate() {
            let _ = write!(out, "adj {b}:");
            for n in ns {
                let _ = write!(out, " {n}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`BlockGraph::dump`]. Adjacency lines are
    /// checked against the adjacency recomputed from the cells.
    pub fn parse_dump(text: &str) -> Result<Self, GameError> {
        let bad = |line: usize, msg: &str| GameError::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (n0, first) = lines.next().ok_or_else(|| bad(1, "empty dump"))?;
        let dims = first
            .strip_prefix("grid ")
            .ok_or_else(|| bad(n0 + 1, "expected `grid RxC`"))?;
        let (r, c) = dims.split_once('x').ok_or_else(|| bad(n0 + 1, "expected `grid RxC`"))?;
        let rows: usize = r.trim().parse().map_err(|_| bad(n0 + 1, "bad row count"))?;
        let cols: usize = c.trim().parse().map_err(|_| bad(n0 + 1, "bad column count"))?;
        let mut blocks = Vec::new();
        let mut adjacency = Vec::new();
        for (n, line) in lines {
            let (head, rest) = line.split_once(':').ok_or_else(|| bad(n + 1, "missing `:`"))?;
            let mut head = head.split_whitespace();
            let kind = head.next().unwrap_or_default();
            let idx: usize = head
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(n + 1, "bad index"))?;
            match kind {
                "block" => {
                    if idx != blocks.len() {
                        return Err(bad(n + 1, "blocks out of order"));
                    }
                    let mut cells = Vec::new();
                    for tok in rest.split_whitespace() {
                        let (a, b) = tok.split_once(',').ok_or_else(|| bad(n + 1, "bad cell"))?;
                        let cell = (
                            a.parse().map_err(|_| bad(n + 1, "bad cell"))?,
                            b.parse().map_err(|_| bad(n + 1, "bad cell"))?,
                        );
                        if cell.0 >= rows || cell.1 >= cols {
                            return Err(bad(n + 1, "cell outside the grid"));
                        }
                        cells.push(cell);
                    }
                    if cells.is_empty() {
                        return Err(bad(n + 1, "empty block"));
                    }
                    blocks.push(cells);
                }
                "adj" => {
                    let ns: Result<Vec<usize>, _> = rest.split_whitespace().map(str::parse).collect();
                    adjacency.push((idx, ns.map_err(|_| bad(n + 1, "bad neighbor"))?));
                }
                _ => return Err(bad(n + 1, "unknown record")),
            }
        }
        let graph = Self::assemble(rows, cols, blocks);
        for (idx, ns) in adjacency {
            if graph.adjacency.get(idx) != Some(&ns) {
                return Err(GameError::Config(format!(
                    "adjacency of block {idx} does not match its cells"
                )));
            }
        }
        Ok(graph)
    }
}

fn is_connected(cells: &[Cell]) -> bool {
    if cells.is_empty() {
        return false;
    }
    let set: BTreeSet<Cell> = cells.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut stack = vec![cells[0]];
    while let Some((r, c)) = stack.pop() {
        if !seen.insert((r, c)) {
            continue;
        }
        let mut around = vec![(r + 1, c), (r, c + 1)];
        if r > 0 {
            around.push((r - 1, c));
        }
        if c > 0 {
            around.push((r, c - 1));
        }
        for n in around {
            if set.contains(&n) && !seen.contains(&n) {
                stack.push(n);
            }
        }
    }
    seen.len() == set.len()
}

/// Random partition of the grid into `num_blocks` 4-connected blocks.
///
/// Seeds `num_blocks` distinct cells, then repeatedly picks a uniformly
/// random unassigned cell bordering at least one block and attaches it to a
/// uniformly random bordering block, until every cell is covered.
pub fn generate_grid<R: Rng + ?Sized>(config: &GridConfig, rng: &mut R) -> Result<BlockGraph, GameError> {
    config.validate()?;
    let (rows, cols) = (config.rows, config.cols);
    let total = rows * cols;
    let mut owner = vec![usize::MAX; total];
    let mut seeds = sample(rng, total, config.num_blocks).into_vec();
    seeds.sort_unstable();
    for (b, &cell) in seeds.iter().enumerate() {
        owner[cell] = b;
    }
    let neighbors = |idx: usize| {
        let (r, c) = (idx / cols, idx % cols);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(idx - cols);
        }
        if r + 1 < rows {
            out.push(idx + cols);
        }
        if c > 0 {
            out.push(idx - 1);
        }
        if c + 1 < cols {
            out.push(idx + 1);
        }
        out
    };
    let mut assigned = config.num_blocks;
    while assigned < total {
        let frontier: Vec<usize> = (0..total)
            .filter(|&i| owner[i] == usize::MAX && neighbors(i).iter().any(|&n| owner[n] != usize::MAX))
            .collect();
        let cell = frontier[rng.gen_range(0..frontier.len())];
        let mut touching: Vec<usize> = neighbors(cell)
            .into_iter()
            .map(|n| owner[n])
            .filter(|&o| o != usize::MAX)
            .collect();
        touching.sort_unstable();
        touching.dedup();
        owner[cell] = touching[rng.gen_range(0..touching.len())];
        assigned += 1;
    }
    // Renumber by first cell so block ids are canonical.
    BlockGraph::from_labels(rows, cols, &owner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn singleton_blocks_give_the_grid_graph() {
        let cfg = GridConfig { num_blocks: 20, ..GridConfig::default() };
        let g = generate_grid(&cfg, &mut rng::stream(3, "g")).unwrap();
        assert_eq!(g.num_blocks(), 20);
        for b in 0..20 {
            let (r, c) = g.cells(b)[0];
            let expected = [(r > 0), (r < 3), (c > 0), (c < 4)].iter().filter(|&&x| x).count();
            assert_eq!(g.degree(b), expected);
        }
        assert_eq!(g.edges().count(), 4 * 4 + 3 * 5);
    }

    #[test]
    fn too_many_blocks_is_rejected() {
        let cfg = GridConfig { num_blocks: 21, ..GridConfig::default() };
        assert!(matches!(cfg.build_graph(), Err(GameError::Config(_))));
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let cfg = GridConfig { seed: 11, ..GridConfig::default() };
        assert_eq!(cfg.build_graph().unwrap(), cfg.build_graph().unwrap());
        let other = GridConfig { seed: 12, ..GridConfig::default() };
        // Different seeds almost surely give different layouts.
        assert_ne!(cfg.build_graph().unwrap().dump(), other.build_graph().unwrap().dump());
    }

    #[test]
    fn dump_parses_back() {
        let g = GridConfig::default().build_graph().unwrap();
        assert_eq!(BlockGraph::parse_dump(&g.dump()).unwrap(), g);
        let tampered = g.dump().replace("adj 0:", "adj 0: 9");
        assert!(BlockGraph::parse_dump(&tampered).is_err());
    }

    #[test]
    fn disconnected_layout_is_rejected() {
        let labels = [0, 1, 1, 0];
        assert!(BlockGraph::from_labels(2, 2, &labels).is_err());
        let ok = BlockGraph::from_labels(2, 2, &[0, 0, 1, 2]).unwrap();
        assert_eq!(ok.num_blocks(), 3);
        assert!(ok.are_adjacent(1, 2));
    }

    #[test]
    fn hidden_count_floors() {
        let cfg = GridConfig::default();
        assert_eq!(cfg.hidden_count(), 3);
        assert_eq!(GridConfig { hidden_fraction: 1.0, ..cfg.clone() }.hidden_count(), 10);
        assert_eq!(GridConfig { hidden_fraction: 0.0, ..cfg }.hidden_count(), 0);
    }
}
