//! 4-connected grid graphs and the MovingAI `.map` format.

use std::fmt::Write as _;

use crate::error::ParseError;

/// Dense id of a passable cell.
pub type VertexId = u32;

/// A 4-connected grid with dense vertex ids assigned row-major to passable cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    width: usize,
    height: usize,
    /// `cells[y * width + x]` is the vertex id of a passable cell.
    cells: Vec<Option<VertexId>>,
    coords: Vec<(usize, usize)>,
    neighbors: Vec<Vec<VertexId>>,
    /// Prefix sums of neighbor counts; directed edge `k` of `v` has index `edge_offset[v] + k`.
    edge_offset: Vec<usize>,
}

impl Grid {
    /// Builds a grid from a row-major passability mask.
    pub fn from_mask(width: usize, height: usize, passable: &[bool]) -> Self {
        assert_eq!(passable.len(), width * height, "mask size must equal width * height");
        let mut cells = vec![None; width * height];
        let mut coords = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if passable[y * width + x] {
                    cells[y * width + x] = Some(coords.len() as VertexId);
                    coords.push((x, y));
                }
            }
        }
        let mut neighbors = Vec::with_capacity(coords.len());
        for &(x, y) in &coords {
            let mut adj = Vec::with_capacity(4);
            // left, right, up, down
            if x > 0 {
                adj.extend(cells[y * width + x - 1]);
            }
            if x + 1 < width {
                adj.extend(cells[y * width + x + 1]);
            }
            if y > 0 {
                adj.extend(cells[(y - 1) * width + x]);
            }
            if y + 1 < height {
                adj.extend(cells[(y + 1) * width + x]);
            }
            neighbors.push(adj);
        }
        let mut edge_offset = Vec::with_capacity(neighbors.len() + 1);
        edge_offset.push(0);
        for adj in &neighbors {
            edge_offset.push(edge_offset.last().unwrap() + adj.len());
        }
        Grid { width, height, cells, coords, neighbors, edge_offset }
    }

    /// Fully open grid.
    pub fn open(width: usize, height: usize) -> Self {
        Self::from_mask(width, height, &vec![true; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    /// Number of directed edges (twice the number of undirected edges).
    pub fn num_directed_edges(&self) -> usize {
        *self.edge_offset.last().unwrap()
    }

    pub fn is_passable(&self, x: usize, y: usize) -> bool {
        self.vertex_at(x, y).is_some()
    }

    pub fn vertex_at(&self, x: usize, y: usize) -> Option<VertexId> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.cells[y * self.width + x]
    }

    /// `(x, y)` of a vertex.
    pub fn coord(&self, v: VertexId) -> (usize, usize) {
        self.coords[v as usize]
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.neighbors[v as usize]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.neighbors[v as usize].len()
    }

    pub fn are_adjacent(&self, u: VertexId, v: VertexId) -> bool {
        self.neighbors[u as usize].contains(&v)
    }

    /// Index of the directed edge `from -> to`, if the two vertices are adjacent.
    pub fn edge_index(&self, from: VertexId, to: VertexId) -> Option<usize> {
        let base = self.edge_offset[from as usize];
        self.neighbors[from as usize]
            .iter()
            .position(|&u| u == to)
            .map(|k| base + k)
    }

    /// Directed edge indices leaving `v`, aligned with [`Grid::neighbors`].
    pub fn out_edges(&self, v: VertexId) -> std::ops::Range<usize> {
        self.edge_offset[v as usize]..self.edge_offset[v as usize + 1]
    }

    /// All directed edges as `(index, from, to)`.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, VertexId, VertexId)> + '_ {
        self.neighbors.iter().enumerate().flat_map(move |(v, adj)| {
            let base = self.edge_offset[v];
            adj.iter().enumerate().map(move |(k, &u)| (base + k, v as VertexId, u))
        })
    }

    pub fn manhattan(&self, u: VertexId, v: VertexId) -> usize {
        let (ux, uy) = self.coord(u);
        let (vx, vy) = self.coord(v);
        ux.abs_diff(vx) + uy.abs_diff(vy)
    }

    /// Row-major passability mask.
    pub fn mask(&self) -> Vec<bool> {
        self.cells.iter().map(Option::is_some).collect()
    }
}

/// Parses a MovingAI `.map` file.
pub fn parse_map(text: &str) -> Result<Grid, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let mut height = None;
    let mut width = None;
    let mut saw_type = false;
    loop {
        let Some((no, line)) = lines.next() else {
            return Err(ParseError::new(text.lines().count().max(1), "missing `map` line in header"));
        };
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("type") => saw_type = true,
            Some("height") => height = Some(parse_dim(no, parts.next(), "height")?),
            Some("width") => width = Some(parse_dim(no, parts.next(), "width")?),
            Some("map") => {
                if !saw_type {
                    return Err(ParseError::new(no, "header is missing a `type` line"));
                }
                break;
            }
            Some(other) => {
                return Err(ParseError::new(no, format!("unexpected header entry `{other}`")))
            }
            None => return Err(ParseError::new(no, "empty header line")),
        }
    }
    let height = height.ok_or_else(|| ParseError::new(1, "header is missing `height`"))?;
    let width = width.ok_or_else(|| ParseError::new(1, "header is missing `width`"))?;

    let mut mask = Vec::with_capacity(width * height);
    let mut rows = 0;
    let mut last_line = 0;
    for (no, line) in lines {
        last_line = no;
        if rows == height {
            if line.trim().is_empty() {
                continue;
            }
            return Err(ParseError::new(no, format!("more than {height} map rows")));
        }
        let row: Vec<char> = line.chars().collect();
        if row.len() != width {
            return Err(ParseError::new(
                no,
                format!("row has {} cells, expected width {width}", row.len()),
            ));
        }
        for c in row {
            mask.push(match c {
                '.' | 'G' => true,
                '@' | 'T' | 'O' => false,
                other => {
                    return Err(ParseError::new(no, format!("unknown cell character `{other}`")))
                }
            });
        }
        rows += 1;
    }
    if rows != height {
        return Err(ParseError::new(
            last_line.max(1),
            format!("found {rows} map rows, expected height {height}"),
        ));
    }
    Ok(Grid::from_mask(width, height, &mask))
}

fn parse_dim(line: usize, token: Option<&str>, what: &str) -> Result<usize, ParseError> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| ParseError::new(line, format!("malformed `{what}` value")))
}

/// Writes a grid in MovingAI `.map` format (`.` passable, `@` blocked).
pub fn serialize_map(grid: &Grid) -> String {
    let mut out = String::new();
    let _ = write!(out, "type octile\nheight {}\nwidth {}\nmap\n", grid.height, grid.width);
    for y in 0..grid.height {
        for x in 0..grid.width {
            out.push(if grid.is_passable(x, y) { '.' } else { '@' });
        }
        out.push('\n');
    }
    out
}
