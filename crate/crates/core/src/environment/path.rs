//! Tile-grid collision map and 4-connected A* path finding.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `(row, col)` on the tile grid.
pub type Tile = (i32, i32);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("tile {0:?} is outside the map")]
    OutOfBounds(Tile),
    #[error("tile {0:?} is blocked")]
    Blocked(Tile),
    #[error("no path from {from:?} to {to:?}")]
    Unreachable { from: Tile, to: Tile },
    #[error("collision map row {row} has width {found}, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("collision map contains unknown tile character {0:?}")]
    BadChar(char),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionMap {
    pub width: i32,
    pub height: i32,
    blocked: Vec<bool>,
}

impl CollisionMap {
    pub fn open(width: i32, height: i32) -> Self {
        Self {
            width,
            height,
            blocked: vec![false; (width * height) as usize],
        }
    }

    /// Parses a text raster: `#` is blocked, `.` is walkable.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, PathError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().chars().count());
        let mut blocked = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            let n = row.chars().count();
            if n != width {
                return Err(PathError::RaggedRow {
                    row: i,
                    expected: width,
                    found: n,
                });
            }
            for c in row.chars() {
                blocked.push(match c {
                    '#' => true,
                    '.' => false,
                    other => return Err(PathError::BadChar(other)),
                });
            }
        }
        Ok(Self {
            width: width as i32,
            height: height as i32,
            blocked,
        })
    }

    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .map(|r| {
                (0..self.width)
                    .map(|c| if self.is_blocked((r, c)) { '#' } else { '.' })
                    .collect()
            })
            .collect()
    }

    pub fn in_bounds(&self, (r, c): Tile) -> bool {
        r >= 0 && c >= 0 && r < self.height && c < self.width
    }

    fn index(&self, (r, c): Tile) -> usize {
        (r * self.width + c) as usize
    }

    /// Out-of-bounds tiles count as blocked.
    pub fn is_blocked(&self, tile: Tile) -> bool {
        !self.in_bounds(tile) || self.blocked[self.index(tile)]
    }

    pub fn set_blocked(&mut self, tile: Tile, blocked: bool) {
        if self.in_bounds(tile) {
            let i = self.index(tile);
            self.blocked[i] = blocked;
        }
    }

    /// Walkable 4-neighbours in ascending `(row, col)` order.
    pub fn neighbours(&self, (r, c): Tile) -> impl Iterator<Item = Tile> + '_ {
        [(r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)]
            .into_iter()
            .filter(move |t| !self.is_blocked(*t))
    }

    fn check(&self, tile: Tile) -> Result<(), PathError> {
        if !self.in_bounds(tile) {
            Err(PathError::OutOfBounds(tile))
        } else if self.is_blocked(tile) {
            Err(PathError::Blocked(tile))
        } else {
            Ok(())
        }
    }
}

pub fn manhattan(a: Tile, b: Tile) -> i32 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

pub fn chebyshev(a: Tile, b: Tile) -> i32 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// Shortest 4-connected path from `from` to `to`, excluding `from` and
/// including `to`. Equal-cost frontier nodes expand in `(row, col)` order.
pub fn path_find(map: &CollisionMap, from: Tile, to: Tile) -> Result<Vec<Tile>, PathError> {
    map.check(from)?;
    map.check(to)?;
    if from == to {
        return Ok(Vec::new());
    }
    let n = (map.width * map.height) as usize;
    let mut g = vec![i32::MAX; n];
    let mut came_from: Vec<Option<Tile>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[map.index(from)] = 0;
    open.push(Reverse((manhattan(from, to), from)));
    while let Some(Reverse((_, tile))) = open.pop() {
        let ti = map.index(tile);
        if closed[ti] {
            continue;
        }
        if tile == to {
            let mut path = vec![to];
            let mut cur = to;
            while let Some(prev) = came_from[map.index(cur)] {
                if prev == from {
                    break;
                }
                path.push(prev);
                cur = prev;
            }
            path.reverse();
            return Ok(path);
        }
        closed[ti] = true;
        let next_g = g[ti] + 1;
        for nb in map.neighbours(tile) {
            let ni = map.index(nb);
            if next_g < g[ni] {
                g[ni] = next_g;
                came_from[ni] = Some(tile);
                open.push(Reverse((next_g + manhattan(nb, to), nb)));
            }
        }
    }
    Err(PathError::Unreachable { from, to })
}
