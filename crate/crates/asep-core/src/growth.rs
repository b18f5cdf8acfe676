//! Corner growth / directed last-passage percolation, with a three-colour
//! competition variant and an exact cross-check against the equivalent
//! particle system.
//!
//! Cells are `(x, y)` with `x` counting columns to the right and `y` rows
//! upward, both 1-based. The parents of `(x, y)` are `(x-1, y)` and
//! `(x, y-1)`; virtual boundary cells with `x = 0` or `y = 0` carry
//! occupation time zero. The occupation time field satisfies
//! `G(z) = w(z) + max(G(z-(1,0)), G(z-(0,1)))` except on seed cells, which
//! are occupied at time zero.
//!
//! The mapping between cell coordinates and the labels of the particle/hole
//! system is fixed in [`check_correspondence`] and validated there by
//! event-driven simulation, not taken from any prose convention.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::engine::keyed_rng;

/// 1-based lattice cell `(x, y)`.
pub type Cell = (u32, u32);

/// Largest supported grid edge; larger fields are out of scope for the
/// full-storage solver.
pub const MAX_GRID_N: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum GrowthError {
    #[error("weight grid must be square and non-empty, got {0} values")]
    BadWeights(usize),
    #[error("negative weight at ({0}, {1})")]
    NegativeWeight(u32, u32),
    #[error("grid edge {0} exceeds supported maximum {MAX_GRID_N}")]
    GridTooLarge(usize),
    #[error("grid edge {0} too small for this operation")]
    GridTooSmall(usize),
    #[error("seed set must be empty, {{(1,1)}}, or {{(1,1),(1,2),(2,1)}}")]
    BadSeeds,
    #[error("operation requires the three-seed field")]
    WrongSeedKind,
    #[error("exact tie in occupation times at the parents of ({0}, {1})")]
    OccupationTie(u32, u32),
    #[error("grid text is malformed: {0}")]
    Parse(String),
}

/// Which cells start occupied at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    /// Plain corner growth: nothing pre-occupied, growth starts at (1,1).
    None,
    /// One pre-occupied cell (1,1); the single-interface system.
    SinglePair,
    /// Pre-occupied (1,1), (1,2), (2,1); the two-interface system.
    ThreePoint,
}

fn seed_kind(seeds: &[Cell]) -> Result<SeedKind, GrowthError> {
    let set: HashSet<Cell> = seeds.iter().copied().collect();
    if set.len() != seeds.len() {
        return Err(GrowthError::BadSeeds);
    }
    if set.is_empty() {
        Ok(SeedKind::None)
    } else if set == HashSet::from([(1, 1)]) {
        Ok(SeedKind::SinglePair)
    } else if set == HashSet::from([(1, 1), (1, 2), (2, 1)]) {
        Ok(SeedKind::ThreePoint)
    } else {
        Err(GrowthError::BadSeeds)
    }
}

impl SeedKind {
    pub fn cells(self) -> &'static [Cell] {
        match self {
            SeedKind::None => &[],
            SeedKind::SinglePair => &[(1, 1)],
            SeedKind::ThreePoint => &[(1, 1), (1, 2), (2, 1)],
        }
    }

    fn is_seed(self, x: u32, y: u32) -> bool {
        match self {
            SeedKind::None => false,
            SeedKind::SinglePair => x == 1 && y == 1,
            SeedKind::ThreePoint => (x == 1 && y == 1) || (x == 1 && y == 2) || (x == 2 && y == 1),
        }
    }
}

/// Square grid of nonnegative weights, row-major by `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid {
    n: usize,
    w: Vec<f64>,
}

impl WeightGrid {
    pub fn new(n: usize, w: Vec<f64>) -> Result<WeightGrid, GrowthError> {
        if n == 0 || w.len() != n * n {
            return Err(GrowthError::BadWeights(w.len()));
        }
        if n > MAX_GRID_N {
            return Err(GrowthError::GridTooLarge(n));
        }
        for y in 1..=n as u32 {
            for x in 1..=n as u32 {
                if w[(y as usize - 1) * n + (x as usize - 1)] < 0.0 {
                    return Err(GrowthError::NegativeWeight(x, y));
                }
            }
        }
        Ok(WeightGrid { n, w })
    }

    pub fn from_fn(
        n: usize,
        mut f: impl FnMut(u32, u32) -> f64,
    ) -> Result<WeightGrid, GrowthError> {
        let mut w = Vec::with_capacity(n * n);
        for y in 1..=n as u32 {
            for x in 1..=n as u32 {
                w.push(f(x, y));
            }
        }
        WeightGrid::new(n, w)
    }

    /// Mean-one exponential weights. Row `y` draws from its own keyed RNG
    /// stream, so the `m x m` prefix of the field is identical for every
    /// grid size `>= m` under the same `(master_seed, replica)`.
    pub fn exponential(
        n: usize,
        master_seed: u64,
        replica: u64,
    ) -> Result<WeightGrid, GrowthError> {
        if n == 0 {
            return Err(GrowthError::BadWeights(0));
        }
        if n > MAX_GRID_N {
            return Err(GrowthError::GridTooLarge(n));
        }
        let mut w = Vec::with_capacity(n * n);
        for y in 1..=n as u64 {
            let mut rng = keyed_rng(master_seed, replica, y);
            for _ in 0..n {
                w.push(rng.sample::<f64, _>(Exp1));
            }
        }
        Ok(WeightGrid { n, w })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline(always)]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.w[(y as usize - 1) * self.n + (x as usize - 1)]
    }

    pub fn set(&mut self, x: u32, y: u32, value: f64) {
        self.w[(y as usize - 1) * self.n + (x as usize - 1)] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }
}

/// Occupation-time field over a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthField {
    n: usize,
    g: Vec<f64>,
    kind: SeedKind,
}

impl GrowthField {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn seed_kind(&self) -> SeedKind {
        self.kind
    }

    /// Occupation time of `(x, y)`; virtual boundary cells are zero.
    #[inline(always)]
    pub fn g(&self, x: u32, y: u32) -> f64 {
        if x == 0 || y == 0 {
            0.0
        } else {
            self.g[(y as usize - 1) * self.n + (x as usize - 1)]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }
}

/// Solves the occupation-time recurrence row-major. Seed cells are forced
/// to zero; everything else is `w + max` of the two parents.
pub fn compute_lpp(w: &WeightGrid, seeds: &[Cell]) -> Result<GrowthField, GrowthError> {
    let kind = seed_kind(seeds)?;
    let n = w.n;
    let mut g = vec![0.0f64; n * n];
    for y in 1..=n as u32 {
        for x in 1..=n as u32 {
            let idx = (y as usize - 1) * n + (x as usize - 1);
            if kind.is_seed(x, y) {
                g[idx] = 0.0;
                continue;
            }
            let left = if x > 1 { g[idx - 1] } else { 0.0 };
            let below = if y > 1 { g[idx - n] } else { 0.0 };
            g[idx] = w.w[idx] + left.max(below);
        }
    }
    Ok(GrowthField { n, g, kind })
}

/// Cluster colours of the two-interface growth model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Color {
    LightBlue,
    DarkBlue,
    Red,
    /// Seed cells carry no meaningful colour.
    Unset,
}

impl Color {
    pub fn glyph(self) -> char {
        match self {
            Color::LightBlue => 'L',
            Color::DarkBlue => 'D',
            Color::Red => 'R',
            Color::Unset => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorField {
    n: usize,
    colors: Vec<Color>,
}

impl ColorField {
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline(always)]
    pub fn get(&self, x: u32, y: u32) -> Color {
        self.colors[(y as usize - 1) * self.n + (x as usize - 1)]
    }

    /// True when some red cell sits on the far boundary, so the red cluster
    /// could continue past the stored grid.
    pub fn red_touches_boundary(&self) -> bool {
        let n = self.n as u32;
        (1..=n).any(|x| self.get(x, n) == Color::Red)
            || (1..=n).any(|y| self.get(n, y) == Color::Red)
    }
}

/// Colours every cell of a three-seed field: first row light blue, first
/// column dark blue, (2,2) red, and every other cell copies the parent that
/// became occupied more recently. An exact tie between parents is reported
/// as an error rather than broken silently.
pub fn assign_colors(field: &GrowthField) -> Result<ColorField, GrowthError> {
    if field.kind != SeedKind::ThreePoint {
        return Err(GrowthError::WrongSeedKind);
    }
    let n = field.n;
    let mut colors = vec![Color::Unset; n * n];
    for y in 1..=n as u32 {
        for x in 1..=n as u32 {
            let idx = (y as usize - 1) * n + (x as usize - 1);
            colors[idx] = if field.kind.is_seed(x, y) {
                Color::Unset
            } else if y == 1 {
                Color::LightBlue
            } else if x == 1 {
                Color::DarkBlue
            } else if x == 2 && y == 2 {
                Color::Red
            } else {
                let g_left = field.g(x - 1, y);
                let g_below = field.g(x, y - 1);
                if g_left == g_below {
                    return Err(GrowthError::OccupationTie(x, y));
                }
                let parent = if g_left > g_below {
                    colors[idx - 1]
                } else {
                    colors[idx - n]
                };
                debug_assert_ne!(parent, Color::Unset);
                parent
            };
        }
    }
    Ok(ColorField { n, colors })
}

/// A competition interface: a staircase of cells stepping `+(1,0)` or
/// `+(0,1)`, always toward the forward neighbour occupied sooner.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfacePath {
    pub cells: Vec<Cell>,
}

/// How a two-interface trace ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// The two paths reached a common cell and coincide afterwards.
    Met(Cell),
    /// A path reached the grid edge before any meeting could be resolved.
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTrace {
    pub upper_left: InterfacePath,
    pub lower_right: InterfacePath,
    pub resolution: Resolution,
}

/// Walks one interface from `start` until a step would leave the grid.
pub fn trace_interface_from(
    field: &GrowthField,
    start: Cell,
) -> Result<InterfacePath, GrowthError> {
    let n = field.n as u32;
    let mut cells = vec![start];
    let (mut x, mut y) = start;
    while x < n && y < n {
        let g_right = field.g(x + 1, y);
        let g_up = field.g(x, y + 1);
        if g_right == g_up {
            return Err(GrowthError::OccupationTie(x, y));
        }
        if g_right < g_up {
            x += 1;
        } else {
            y += 1;
        }
        cells.push((x, y));
    }
    Ok(InterfacePath { cells })
}

/// Traces both competition interfaces of a three-seed field. The upper-left
/// interface starts at (1,2), the lower-right one at (2,1); the meet is the
/// first cell they share, after which both follow the same rule and
/// coincide.
pub fn trace_interfaces(field: &GrowthField) -> Result<InterfaceTrace, GrowthError> {
    if field.kind != SeedKind::ThreePoint {
        return Err(GrowthError::WrongSeedKind);
    }
    if field.n < 3 {
        return Err(GrowthError::GridTooSmall(field.n));
    }
    let upper = trace_interface_from(field, (1, 2))?;
    let lower = trace_interface_from(field, (2, 1))?;
    let lower_set: HashSet<Cell> = lower.cells.iter().copied().collect();
    let meet = upper.cells.iter().copied().find(|c| lower_set.contains(c));
    let resolution = match meet {
        Some(cell) => Resolution::Met(cell),
        None => Resolution::Truncated,
    };
    Ok(InterfaceTrace {
        upper_left: upper,
        lower_right: lower,
        resolution,
    })
}

/// Fate of the red cluster at this truncation size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedClusterStatus {
    /// The interfaces met inside the grid; the red cluster is finished.
    Surrounded(Cell),
    /// Still alive when the trace ran off the grid; an upper bound on
    /// survival.
    AliveAtTruncation,
}

pub fn red_cluster_status(field: &GrowthField) -> Result<RedClusterStatus, GrowthError> {
    let trace = trace_interfaces(field)?;
    Ok(match trace.resolution {
        Resolution::Met(cell) => RedClusterStatus::Surrounded(cell),
        Resolution::Truncated => RedClusterStatus::AliveAtTruncation,
    })
}

/// First cell occupied after time zero in the three-seed model: whichever
/// of (1,3), (2,2), (3,1) carries the smallest occupation time.
pub fn first_growth_cell(field: &GrowthField) -> Result<Cell, GrowthError> {
    if field.kind != SeedKind::ThreePoint {
        return Err(GrowthError::WrongSeedKind);
    }
    if field.n < 3 {
        return Err(GrowthError::GridTooSmall(field.n));
    }
    let candidates = [(1u32, 3u32), (2, 2), (3, 1)];
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if field.g(c.0, c.1) < field.g(best.0, best.1) {
            best = c;
        }
    }
    Ok(best)
}

/// Cells that lie strictly between the two interfaces: not in the upward
/// shadow of the upper-left path, not in the rightward shadow of the
/// lower-right path, and not a seed. Matches the red cluster cell set.
pub fn cells_strictly_between(trace: &InterfaceTrace, n: usize) -> HashSet<Cell> {
    // min y of the upper path per column; min x of the lower path per row
    let mut upper_min_y = vec![u32::MAX; n + 1];
    for &(x, y) in &trace.upper_left.cells {
        upper_min_y[x as usize] = upper_min_y[x as usize].min(y);
    }
    let mut lower_min_x = vec![u32::MAX; n + 1];
    for &(x, y) in &trace.lower_right.cells {
        lower_min_x[y as usize] = lower_min_x[y as usize].min(x);
    }
    let mut out = HashSet::new();
    for y in 1..=n as u32 {
        for x in 1..=n as u32 {
            if SeedKind::ThreePoint.is_seed(x, y) {
                continue;
            }
            let in_upper_shadow = upper_min_y[x as usize] < y;
            let in_lower_shadow = lower_min_x[y as usize] < x;
            if !in_upper_shadow && !in_lower_shadow {
                out.insert((x, y));
            }
        }
    }
    out
}

// --- portable text dumps -------------------------------------------------

/// Writes a square grid of values as text: a dimensions header line, then
/// one row per line.
pub fn grid_to_text(n: usize, values: &[f64]) -> String {
    assert_eq!(values.len(), n * n);
    let mut s = format!("{n} {n}\n");
    for y in 0..n {
        let row: Vec<String> = values[y * n..(y + 1) * n]
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn grid_from_text(text: &str) -> Result<(usize, Vec<f64>), GrowthError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| GrowthError::Parse("empty text".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| GrowthError::Parse(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let [rows, cols] = dims.as_slice() else {
        return Err(GrowthError::Parse("header must hold two dimensions".into()));
    };
    if rows != cols {
        return Err(GrowthError::Parse("grid must be square".into()));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for line in lines.take(*rows) {
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|e| GrowthError::Parse(e.to_string()))?,
            );
        }
    }
    if values.len() != rows * cols {
        return Err(GrowthError::Parse(format!(
            "expected {} values, found {}",
            rows * cols,
            values.len()
        )));
    }
    Ok((*rows, values))
}

pub fn colors_to_text(colors: &ColorField) -> String {
    let n = colors.n;
    let mut s = format!("{n} {n}\n");
    for y in 1..=n as u32 {
        for x in 1..=n as u32 {
            s.push(colors.get(x, y).glyph());
        }
        s.push('\n');
    }
    s
}

// --- exact correspondence oracle -----------------------------------------

/// What the particle/hole simulation verified against the recurrence field.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceReport {
    /// Overtaking events checked for exact time equality.
    pub events_checked: usize,
    /// Merge cell of the two tracked pairs, when they merged on the board.
    pub merge: Option<Cell>,
    /// Merge time; equals the occupation time of the merge cell.
    pub merge_time: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CorrespondenceError {
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error("overtaking time of particle {particle} over hole {hole} was {simulated}, field has {field}")]
    TimeMismatch {
        particle: u32,
        hole: u32,
        simulated: f64,
        field: f64,
    },
    #[error("pair path diverged from traced interface at step {step}: {pair:?} vs {interface:?}")]
    PathMismatch {
        step: usize,
        pair: Cell,
        interface: Cell,
    },
    #[error("adjacency condition violated at event {event}")]
    AdjacencyMismatch { event: usize },
    #[error("expected {expected} overtaking events, simulated {simulated}")]
    MissingEvents { expected: usize, simulated: usize },
    #[error("pairs merged at {simulated:?} but interfaces resolved to {traced:?}")]
    MergeMismatch {
        simulated: Option<Cell>,
        traced: Option<Cell>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Entity {
    Particle(u32),
    Hole(u32),
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    site: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.site == other.site
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.site.cmp(&other.site))
    }
}

#[derive(Debug, Clone, Copy)]
struct PairState {
    hole: u32,
    particle: u32,
    /// Board site of the pair's hole; the particle sits one to the right.
    site: usize,
}

impl PairState {
    fn cell(&self) -> Cell {
        (self.particle, self.hole)
    }
}

/// Event-driven simulation of the labelled particle/hole system using the
/// same weights as the recurrence: once particle `P_i` sits immediately left
/// of hole `H_j`, they exchange after a further delay `w(i, j)`.
///
/// Returns `Ok` iff every overtaking time equals the field value exactly
/// and, for the three-seed case, the tracked hole/particle pairs traverse
/// exactly the cells of the traced interfaces, satisfy the label-adjacency
/// condition whenever they are spatially adjacent, and merge exactly where
/// and when the interfaces meet.
pub fn check_correspondence(
    w: &WeightGrid,
    seeds: &[Cell],
) -> Result<CorrespondenceReport, CorrespondenceError> {
    let kind = seed_kind(seeds)?;
    let field = compute_lpp(w, seeds)?;
    let n = w.n as u32;

    // board layout per seed kind, particles labelled right to left,
    // holes left to right
    let mut board: Vec<Entity> = Vec::with_capacity(2 * w.n);
    match kind {
        SeedKind::None => {
            for i in (1..=n).rev() {
                board.push(Entity::Particle(i));
            }
            for j in 1..=n {
                board.push(Entity::Hole(j));
            }
        }
        SeedKind::SinglePair => {
            for i in (2..=n).rev() {
                board.push(Entity::Particle(i));
            }
            board.push(Entity::Hole(1));
            board.push(Entity::Particle(1));
            for j in 2..=n {
                board.push(Entity::Hole(j));
            }
        }
        SeedKind::ThreePoint => {
            for i in (3..=n).rev() {
                board.push(Entity::Particle(i));
            }
            board.push(Entity::Hole(1));
            board.push(Entity::Particle(2));
            board.push(Entity::Hole(2));
            board.push(Entity::Particle(1));
            for j in 3..=n {
                board.push(Entity::Hole(j));
            }
        }
    }

    let mut pairs: Vec<PairState> = match kind {
        SeedKind::None => vec![],
        SeedKind::SinglePair => vec![PairState {
            hole: 1,
            particle: 1,
            site: w.n - 1,
        }],
        SeedKind::ThreePoint => vec![
            // left-hand pair: covers hole 1 and particle 2
            PairState {
                hole: 1,
                particle: 2,
                site: w.n - 2,
            },
            // right-hand pair: covers hole 2 and particle 1
            PairState {
                hole: 2,
                particle: 1,
                site: w.n,
            },
        ],
    };
    let mut pair_cells: Vec<Vec<Cell>> = pairs.iter().map(|p| vec![p.cell()]).collect();
    let mut merge: Option<(Cell, f64)> = None;

    let mut queue: BinaryHeap<Reverse<Pending>> = BinaryHeap::new();
    let schedule =
        |queue: &mut BinaryHeap<Reverse<Pending>>, board: &[Entity], site: usize, now: f64| {
            if site + 1 >= board.len() {
                return;
            }
            if let (Entity::Particle(i), Entity::Hole(j)) = (board[site], board[site + 1]) {
                queue.push(Reverse(Pending {
                    time: now + w.get(i, j),
                    site,
                }));
            }
        };
    for site in 0..board.len().saturating_sub(1) {
        schedule(&mut queue, &board, site, 0.0);
    }

    let seed_count = kind.cells().len();
    let expected_events = w.n * w.n - seed_count;
    let mut events_checked = 0usize;
    let mut event_index = 0usize;

    while let Some(Reverse(Pending { time, site })) = queue.pop() {
        let (Entity::Particle(i), Entity::Hole(j)) = (board[site], board[site + 1]) else {
            unreachable!("scheduled pairs stay adjacent until they fire");
        };
        board.swap(site, site + 1);
        event_index += 1;

        let field_time = field.g(i, j);
        if time != field_time {
            return Err(CorrespondenceError::TimeMismatch {
                particle: i,
                hole: j,
                simulated: time,
                field: field_time,
            });
        }
        events_checked += 1;

        // pair bookkeeping (only until the pairs merge)
        if merge.is_none() && !pairs.is_empty() {
            if pairs.len() == 2 {
                let left = pairs[0];
                let right = pairs[1];
                if i == left.particle && j == right.hole {
                    // the left pair's particle jumped onto the right pair's
                    // hole: the pairs merge at the common forward cell
                    let cell = (i, j);
                    merge = Some((cell, time));
                    pair_cells[0].push(cell);
                    pair_cells[1].push(cell);
                } else {
                    update_pair_after_event(&mut pairs, &mut pair_cells, i, j, site);
                }
            } else {
                update_pair_after_event(&mut pairs, &mut pair_cells, i, j, site);
            }
            if merge.is_none() && pairs.len() == 2 {
                let spatially_adjacent = pairs[1].site == pairs[0].site + 2;
                let labels_adjacent = pairs[1].hole == pairs[0].hole + 1
                    && pairs[0].particle == pairs[1].particle + 1;
                if spatially_adjacent != labels_adjacent {
                    return Err(CorrespondenceError::AdjacencyMismatch { event: event_index });
                }
            }
        }

        if site > 0 {
            schedule(&mut queue, &board, site - 1, time);
        }
        schedule(&mut queue, &board, site + 1, time);
    }

    if events_checked != expected_events {
        return Err(CorrespondenceError::MissingEvents {
            expected: expected_events,
            simulated: events_checked,
        });
    }

    // compare pair journeys against the traced interfaces
    match kind {
        SeedKind::None => {}
        SeedKind::SinglePair => {
            let path = trace_interface_from(&field, (1, 1)).map_err(CorrespondenceError::Growth)?;
            compare_prefix(&path.cells, &pair_cells[0])?;
        }
        SeedKind::ThreePoint => {
            let trace = trace_interfaces(&field).map_err(CorrespondenceError::Growth)?;
            match trace.resolution {
                Resolution::Met(c) => {
                    // the meet lies inside the faithful region, so the
                    // pairs must have merged exactly there and then
                    let Some((cell, time)) = merge else {
                        return Err(CorrespondenceError::MergeMismatch {
                            simulated: None,
                            traced: Some(c),
                        });
                    };
                    if cell != c {
                        return Err(CorrespondenceError::MergeMismatch {
                            simulated: Some(cell),
                            traced: Some(c),
                        });
                    }
                    let field_time = field.g(cell.0, cell.1);
                    if time != field_time {
                        return Err(CorrespondenceError::TimeMismatch {
                            particle: cell.0,
                            hole: cell.1,
                            simulated: time,
                            field: field_time,
                        });
                    }
                    // pair journeys stop at the merge; the traced paths
                    // continue past it
                    compare_prefix_upto(&trace.lower_right.cells, &pair_cells[0], cell)?;
                    compare_prefix_upto(&trace.upper_left.cells, &pair_cells[1], cell)?;
                }
                Resolution::Truncated => {
                    // the finite board always merges the pairs eventually,
                    // but only the traced prefix is faithful to the
                    // infinite system; compare no further than that
                    let merge_cell = merge.map(|(c, _)| c);
                    compare_common_prefix(&trace.lower_right.cells, &pair_cells[0], merge_cell)?;
                    compare_common_prefix(&trace.upper_left.cells, &pair_cells[1], merge_cell)?;
                }
            }
        }
    }

    Ok(CorrespondenceReport {
        events_checked,
        merge: merge.map(|(c, _)| c),
        merge_time: merge.map(|(_, t)| t),
    })
}

fn update_pair_after_event(
    pairs: &mut [PairState],
    pair_cells: &mut [Vec<Cell>],
    i: u32,
    j: u32,
    site: usize,
) {
    for (k, pair) in pairs.iter_mut().enumerate() {
        if i == pair.particle && j != pair.hole {
            // pair jumps right: it swallows the hole on its right
            debug_assert_eq!(site, pair.site + 1);
            pair.hole = j;
            pair.site += 1;
            pair_cells[k].push(pair.cell());
            return;
        }
        if j == pair.hole && i != pair.particle {
            // pair jumps left: the particle on its left joins it
            debug_assert_eq!(site + 1, pair.site);
            pair.particle = i;
            pair.site -= 1;
            pair_cells[k].push(pair.cell());
            return;
        }
    }
}

fn compare_prefix(interface: &[Cell], pair: &[Cell]) -> Result<(), CorrespondenceError> {
    // the traced path stops at the grid edge; the pair may walk further
    for (step, &cell) in interface.iter().enumerate() {
        match pair.get(step) {
            Some(&p) if p == cell => {}
            other => {
                return Err(CorrespondenceError::PathMismatch {
                    step,
                    pair: other.copied().unwrap_or((0, 0)),
                    interface: cell,
                })
            }
        }
    }
    Ok(())
}

/// Elementwise comparison over the shared prefix; the pair journey may stop
/// short of the traced path only because of a merge.
fn compare_common_prefix(
    interface: &[Cell],
    pair: &[Cell],
    merge_cell: Option<Cell>,
) -> Result<(), CorrespondenceError> {
    let k = interface.len().min(pair.len());
    for step in 0..k {
        if interface[step] != pair[step] {
            return Err(CorrespondenceError::PathMismatch {
                step,
                pair: pair[step],
                interface: interface[step],
            });
        }
    }
    if pair.len() < interface.len() && pair.last().copied() != merge_cell {
        return Err(CorrespondenceError::PathMismatch {
            step: pair.len(),
            pair: *pair.last().unwrap(),
            interface: interface[pair.len()],
        });
    }
    Ok(())
}

fn compare_prefix_upto(
    interface: &[Cell],
    pair: &[Cell],
    meet: Cell,
) -> Result<(), CorrespondenceError> {
    let meet_idx = interface
        .iter()
        .position(|&c| c == meet)
        .expect("meet lies on both traced paths");
    if pair.len() != meet_idx + 1 {
        return Err(CorrespondenceError::PathMismatch {
            step: pair.len().min(meet_idx),
            pair: *pair.last().unwrap(),
            interface: interface[meet_idx],
        });
    }
    for (step, (&a, &b)) in interface[..=meet_idx].iter().zip(pair.iter()).enumerate() {
        if a != b {
            return Err(CorrespondenceError::PathMismatch {
                step,
                pair: b,
                interface: a,
            });
        }
    }
    Ok(())
}

/// Boolean form of [`check_correspondence`].
pub fn correspondence_oracle(w: &WeightGrid, seeds: &[Cell]) -> bool {
    check_correspondence(w, seeds).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_weights() -> WeightGrid {
        WeightGrid::from_fn(2, |x, y| match (x, y) {
            (1, 1) => 0.5,
            (1, 2) => 0.3,
            (2, 1) => 0.2,
            _ => 0.4,
        })
        .unwrap()
    }

    #[test]
    fn lpp_hand_example() {
        let field = compute_lpp(&hand_weights(), &[]).unwrap();
        assert_eq!(field.g(1, 1), 0.5);
        assert_eq!(field.g(2, 1), 0.2 + 0.5);
        assert_eq!(field.g(1, 2), 0.3 + 0.5);
        assert_eq!(field.g(2, 2), 0.4 + (0.3 + 0.5));
        assert!((field.g(2, 2) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn lpp_zero_weights_give_zero_field() {
        let w = WeightGrid::from_fn(4, |_, _| 0.0).unwrap();
        let field = compute_lpp(&w, &[]).unwrap();
        assert!(field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lpp_three_seed_zeroes() {
        let w = WeightGrid::exponential(5, 9, 0).unwrap();
        let field = compute_lpp(&w, &[(1, 1), (1, 2), (2, 1)]).unwrap();
        assert_eq!(field.g(1, 1), 0.0);
        assert_eq!(field.g(1, 2), 0.0);
        assert_eq!(field.g(2, 1), 0.0);
        assert!(field.g(2, 2) > 0.0);
        assert_eq!(field.g(2, 2), w.get(2, 2));
        assert_eq!(field.g(3, 1), w.get(3, 1));
        assert_eq!(field.g(1, 3), w.get(1, 3));
    }

    #[test]
    fn lpp_monotone_in_weights() {
        let mut rng = crate::engine::replica_rng(41, 0);
        for _ in 0..40 {
            let w = WeightGrid::exponential(5, 42, rng.gen()).unwrap();
            let base = compute_lpp(&w, &[]).unwrap();
            let x = rng.gen_range(1..=5u32);
            let y = rng.gen_range(1..=5u32);
            let mut bumped = w.clone();
            bumped.set(x, y, bumped.get(x, y) + rng.gen_range(0.1..2.0));
            let after = compute_lpp(&bumped, &[]).unwrap();
            for (a, b) in base.values().iter().zip(after.values()) {
                assert!(b >= a, "increasing a weight decreased an occupation time");
            }
        }
    }

    #[test]
    fn bad_seed_sets_rejected() {
        let w = hand_weights();
        assert_eq!(
            compute_lpp(&w, &[(1, 2)]).unwrap_err(),
            GrowthError::BadSeeds
        );
        assert_eq!(
            compute_lpp(&w, &[(1, 1), (2, 2)]).unwrap_err(),
            GrowthError::BadSeeds
        );
    }

    fn three_seed_field(n: usize, seed: u64, replica: u64) -> GrowthField {
        let w = WeightGrid::exponential(n, seed, replica).unwrap();
        compute_lpp(&w, &[(1, 1), (1, 2), (2, 1)]).unwrap()
    }

    #[test]
    fn colors_follow_the_stated_rules() {
        let field = three_seed_field(8, 17, 3);
        let colors = assign_colors(&field).unwrap();
        assert_eq!(colors.get(5, 1), Color::LightBlue);
        assert_eq!(colors.get(1, 5), Color::DarkBlue);
        assert_eq!(colors.get(2, 2), Color::Red);
        assert_eq!(colors.get(1, 1), Color::Unset);
        // every interior cell matches its later parent
        for y in 2..=8u32 {
            for x in 2..=8u32 {
                if (x, y) == (2, 2) {
                    continue;
                }
                let expect = if field.g(x - 1, y) > field.g(x, y - 1) {
                    colors.get(x - 1, y)
                } else {
                    colors.get(x, y - 1)
                };
                assert_eq!(colors.get(x, y), expect, "cell ({x},{y})");
            }
        }
    }

    #[test]
    fn immediate_surround_when_center_first() {
        // force (2,2) to be occupied before (1,3) and (3,1)
        let w = WeightGrid::from_fn(6, |x, y| {
            0.9 + 0.01 * (x as f64) + 0.013 * (y as f64) + if (x, y) == (2, 2) { -0.7 } else { 0.0 }
        })
        .unwrap();
        let field = compute_lpp(&w, &[(1, 1), (1, 2), (2, 1)]).unwrap();
        assert_eq!(first_growth_cell(&field).unwrap(), (2, 2));
        let trace = trace_interfaces(&field).unwrap();
        assert_eq!(trace.resolution, Resolution::Met((2, 2)));
        assert_eq!(
            red_cluster_status(&field).unwrap(),
            RedClusterStatus::Surrounded((2, 2))
        );
        let colors = assign_colors(&field).unwrap();
        assert_eq!(colors.get(2, 3), Color::DarkBlue);
        assert_eq!(colors.get(3, 2), Color::LightBlue);
        // no red outside (2,2)
        for y in 1..=6u32 {
            for x in 1..=6u32 {
                if (x, y) != (2, 2) {
                    assert_ne!(colors.get(x, y), Color::Red, "cell ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn first_moves_follow_the_order_of_occupation_times() {
        // G(3,1) < G(2,2) < G(1,3): lower interface moves to (3,1), upper
        // to (2,2)
        let w = WeightGrid::from_fn(6, |x, y| match (x, y) {
            (3, 1) => 0.1,
            (2, 2) => 0.2,
            (1, 3) => 0.3,
            _ => 1.0 + 0.01 * (x as f64) + 0.017 * (y as f64),
        })
        .unwrap();
        let field = compute_lpp(&w, &[(1, 1), (1, 2), (2, 1)]).unwrap();
        let trace = trace_interfaces(&field).unwrap();
        assert_eq!(trace.lower_right.cells[1], (3, 1));
        assert_eq!(trace.upper_left.cells[1], (2, 2));
    }

    #[test]
    fn red_cells_equal_strictly_between_region() {
        for replica in 0..30u64 {
            let field = three_seed_field(20, 71, replica);
            let colors = assign_colors(&field).unwrap();
            let trace = trace_interfaces(&field).unwrap();
            let between = cells_strictly_between(&trace, 20);
            for y in 1..=20u32 {
                for x in 1..=20u32 {
                    if SeedKind::ThreePoint.is_seed(x, y) {
                        continue;
                    }
                    let is_red = colors.get(x, y) == Color::Red;
                    assert_eq!(
                        is_red,
                        between.contains(&(x, y)),
                        "cell ({x},{y}) replica {replica}"
                    );
                }
            }
        }
    }

    #[test]
    fn paths_never_cross_before_meeting() {
        for replica in 0..30u64 {
            let field = three_seed_field(20, 72, replica);
            let trace = trace_interfaces(&field).unwrap();
            let meet = match trace.resolution {
                Resolution::Met(c) => Some(c),
                Resolution::Truncated => None,
            };
            let upper_pre: Vec<Cell> = match meet {
                Some(m) => trace
                    .upper_left
                    .cells
                    .iter()
                    .copied()
                    .take_while(|&c| c != m)
                    .collect(),
                None => trace.upper_left.cells.clone(),
            };
            let lower_pre: Vec<Cell> = match meet {
                Some(m) => trace
                    .lower_right
                    .cells
                    .iter()
                    .copied()
                    .take_while(|&c| c != m)
                    .collect(),
                None => trace.lower_right.cells.clone(),
            };
            for &u in &upper_pre {
                for &l in &lower_pre {
                    assert!(
                        !(l.0 <= u.0 && l.1 >= u.1),
                        "lower cell {l:?} is weakly above-left of upper cell {u:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn status_from_colors_agrees_with_interfaces() {
        let mut met = 0;
        let mut alive = 0;
        for replica in 0..60u64 {
            let field = three_seed_field(25, 73, replica);
            let colors = assign_colors(&field).unwrap();
            let status = red_cluster_status(&field).unwrap();
            match status {
                RedClusterStatus::Surrounded((x, y)) => {
                    // boundary meets cannot be classified from colours alone
                    if x < 25 && y < 25 {
                        met += 1;
                        assert!(!colors.red_touches_boundary(), "replica {replica}");
                    }
                }
                RedClusterStatus::AliveAtTruncation => {
                    alive += 1;
                    assert!(colors.red_touches_boundary(), "replica {replica}");
                }
            }
        }
        assert!(
            met > 0 && alive > 0,
            "test needs both outcomes: {met} met, {alive} alive"
        );
    }

    #[test]
    fn surrounded_is_monotone_in_grid_size() {
        for replica in 0..40u64 {
            let w300 = WeightGrid::exponential(60, 74, replica).unwrap();
            let field = compute_lpp(&w300, &[(1, 1), (1, 2), (2, 1)]).unwrap();
            let w_small = WeightGrid::from_fn(30, |x, y| w300.get(x, y)).unwrap();
            let small = compute_lpp(&w_small, &[(1, 1), (1, 2), (2, 1)]).unwrap();
            if let RedClusterStatus::Surrounded(cell) = red_cluster_status(&small).unwrap() {
                assert_eq!(
                    red_cluster_status(&field).unwrap(),
                    RedClusterStatus::Surrounded(cell),
                    "replica {replica}"
                );
            }
        }
    }

    #[test]
    fn prefix_stability_of_exponential_weights() {
        let small = WeightGrid::exponential(10, 5, 3).unwrap();
        let large = WeightGrid::exponential(25, 5, 3).unwrap();
        for y in 1..=10u32 {
            for x in 1..=10u32 {
                assert_eq!(small.get(x, y), large.get(x, y));
            }
        }
    }

    #[test]
    fn correspondence_on_deterministic_grid() {
        let w = WeightGrid::from_fn(3, |x, y| {
            0.31 * x as f64 + 0.47 * y as f64 + 0.01 * (x * y) as f64
        })
        .unwrap();
        for seeds in [&[][..], &[(1, 1)][..], &[(1, 1), (1, 2), (2, 1)][..]] {
            let report = check_correspondence(&w, seeds).unwrap();
            assert_eq!(report.events_checked, 9 - seeds.len());
        }
    }

    #[test]
    fn correspondence_merge_time_equals_field_value() {
        // center-first weights force an immediate merge at (2,2)
        let w = WeightGrid::from_fn(5, |x, y| {
            1.0 + 0.03 * x as f64 + 0.05 * y as f64 + if (x, y) == (2, 2) { -0.9 } else { 0.0 }
        })
        .unwrap();
        let report = check_correspondence(&w, &[(1, 1), (1, 2), (2, 1)]).unwrap();
        assert_eq!(report.merge, Some((2, 2)));
        let field = compute_lpp(&w, &[(1, 1), (1, 2), (2, 1)]).unwrap();
        assert_eq!(report.merge_time, Some(field.g(2, 2)));
    }

    #[test]
    fn grid_text_round_trip() {
        let w = WeightGrid::exponential(4, 2, 2).unwrap();
        let text = grid_to_text(4, w.values());
        let (n, values) = grid_from_text(&text).unwrap();
        assert_eq!(n, 4);
        assert_eq!(values, w.values());
    }

    #[test]
    fn grid_dump_golden() {
        let w = WeightGrid::from_fn(3, |x, y| (x + 10 * y) as f64 / 8.0).unwrap();
        assert_eq!(
            grid_to_text(3, w.values()),
            "3 3\n1.375 1.5 1.625\n2.625 2.75 2.875\n3.875 4 4.125\n"
        );
        let field = compute_lpp(&w, &[(1, 1), (1, 2), (2, 1)]).unwrap();
        assert_eq!(
            grid_to_text(3, field.values()),
            "3 3\n0 0 1.625\n0 2.75 5.625\n3.875 7.875 12\n"
        );
        let colors = assign_colors(&field).unwrap();
        assert_eq!(colors_to_text(&colors), "3 3\n--L\n-RR\nDDD\n");
    }
}
