//! Blockwise tiling: cubic cores that partition a volume exactly, each
//! padded by a fixed per-face overlap clamped to the volume bounds.

use serde::Serialize;

use crate::volume::VolumeMeta;

/// Half-open axis-aligned box: `start[a] <= c < end[a]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Region {
    pub start: [usize; 3],
    pub end: [usize; 3],
}

impl Region {
    pub fn contains(&self, c: [usize; 3]) -> bool {
        (0..3).all(|a| self.start[a] <= c[a] && c[a] < self.end[a])
    }

    pub fn len(&self) -> usize {
        (0..3).map(|a| self.end[a] - self.start[a]).product()
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.start[a] >= self.end[a])
    }
}

/// One tile: the core region it owns plus the padded region to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Block {
    pub core: Region,
    pub padded: Region,
}

/// The full tiling of a volume into blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTiling {
    pub block_edge: usize,
    pub overlap: usize,
    pub blocks: Vec<Block>,
}

/// Tile a volume into cores of edge `block_edge` (clamped at the far
/// faces) with `overlap` voxels of padding per face.
///
/// Cores are disjoint and cover the volume exactly; blocks are listed
/// x-fastest.
pub fn make_tiling(meta: &VolumeMeta, block_edge: usize, overlap: usize) -> BlockTiling {
    assert!(block_edge >= 1, "block_edge must be >= 1");
    let dims = meta.dims;
    let counts: Vec<usize> = (0..3).map(|a| dims[a].div_ceil(block_edge)).collect();

    let mut blocks = Vec::with_capacity(counts.iter().product());
    for bz in 0..counts[2] {
        for by in 0..counts[1] {
            for bx in 0..counts[0] {
                let b = [bx, by, bz];
                let mut core = Region {
                    start: [0; 3],
                    end: [0; 3],
                };
                let mut padded = Region {
                    start: [0; 3],
                    end: [0; 3],
                };
                for a in 0..3 {
                    core.start[a] = b[a] * block_edge;
                    core.end[a] = ((b[a] + 1) * block_edge).min(dims[a]);
                    padded.start[a] = core.start[a].saturating_sub(overlap);
                    padded.end[a] = (core.end[a] + overlap).min(dims[a]);
                }
                blocks.push(Block { core, padded });
            }
        }
    }

    BlockTiling {
        block_edge,
        overlap,
        blocks,
    }
}
