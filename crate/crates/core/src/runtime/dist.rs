use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// One contiguous slab of rows of a distributed matrix.
#[derive(Debug, PartialEq)]
pub struct RowBlock {
    pub row_offset: usize,
    pub data: DenseMatrix,
}

impl RowBlock {
    pub fn rows(&self) -> usize {
        self.data.rows()
    }
}

/// Row-block partitioned matrix. Blocks are immutable and shared between
/// tasks by reference count.
#[derive(Clone, Debug)]
pub struct DistMatrix {
    global_rows: usize,
    cols: usize,
    blocks: Vec<Arc<RowBlock>>,
}

impl DistMatrix {
    /// Splits `m` into `partitions` contiguous blocks whose sizes differ by
    /// at most one row; the remainder goes to the leading blocks.
    pub fn partition(m: &DenseMatrix, partitions: usize) -> Result<DistMatrix> {
        Self::split_rows(m, &block_sizes(m.rows(), partitions)?)
    }

    /// Splits `m` into blocks of the given row counts.
    pub fn split_rows(m: &DenseMatrix, sizes: &[usize]) -> Result<DistMatrix> {
        if sizes.iter().sum::<usize>() != m.rows() {
            return Err(Error::dim(format!(
                "block sizes sum to {} but matrix has {} rows",
                sizes.iter().sum::<usize>(),
                m.rows()
            )));
        }
        let mut start = 0;
        let mut blocks = Vec::with_capacity(sizes.len());
        for &s in sizes {
            blocks.push(m.row_range(start, start + s));
            start += s;
        }
        Self::from_blocks(blocks)
    }

    /// Assembles a distributed matrix from already-split blocks, in order.
    /// Every block must be non-empty and share one column count.
    pub fn from_blocks(blocks: Vec<DenseMatrix>) -> Result<DistMatrix> {
        let Some(first) = blocks.first() else {
            return Err(Error::dim("a distributed matrix needs at least one block"));
        };
        let cols = first.cols();
        let mut offset = 0;
        let mut out = Vec::with_capacity(blocks.len());
        for (i, b) in blocks.into_iter().enumerate() {
            if b.cols() != cols {
                return Err(Error::dim(format!(
                    "block {i} has {} columns, expected {cols}",
                    b.cols()
                )));
            }
            if b.rows() == 0 {
                return Err(Error::dim(format!("block {i} is empty")));
            }
            let rows = b.rows();
            out.push(Arc::new(RowBlock {
                row_offset: offset,
                data: b,
            }));
            offset += rows;
        }
        Ok(DistMatrix {
            global_rows: offset,
            cols,
            blocks: out,
        })
    }

    pub(crate) fn from_shared(blocks: Vec<Arc<RowBlock>>, cols: usize) -> DistMatrix {
        let global_rows = blocks.iter().map(|b| b.rows()).sum();
        DistMatrix {
            global_rows,
            cols,
            blocks,
        }
    }

    pub fn rows(&self) -> usize {
        self.global_rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_partitions(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Arc<RowBlock>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &RowBlock {
        &self.blocks[i]
    }

    /// Concatenates the blocks back into one local matrix.
    pub fn gather(&self) -> DenseMatrix {
        let parts: Vec<&DenseMatrix> = self.blocks.iter().map(|b| &b.data).collect();
        DenseMatrix::vstack(&parts).expect("blocks share a column count")
    }
}

/// Row counts of the blocks [`DistMatrix::partition`] produces.
pub fn block_sizes(rows: usize, partitions: usize) -> Result<Vec<usize>> {
    if partitions == 0 {
        return Err(Error::Config("partitions must be at least 1".into()));
    }
    if partitions > rows {
        return Err(Error::dim(format!(
            "cannot split {rows} rows into {partitions} partitions"
        )));
    }
    let base = rows / partitions;
    let extra = rows % partitions;
    Ok((0..partitions).map(|i| base + usize::from(i < extra)).collect())
}

/// Free-function form of [`DistMatrix::partition`].
pub fn partition(m: &DenseMatrix, partitions: usize) -> Result<DistMatrix> {
    DistMatrix::partition(m, partitions)
}
