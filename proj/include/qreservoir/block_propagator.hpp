// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "qreservoir/core.hpp"

#include <numeric>
#include <vector>

namespace qreservoir {

/// exp(-i angle H) for a sparse Hermitian H that splits into many small
/// invariant blocks (the atom-field couplings conserve an excitation-like
/// charge). Blocks are the connected components of the sparsity graph; each
/// is diagonalized once, so a kick costs O(sum of block_size^2) and blocks
/// with a vanishing input slice are skipped.
class BlockPropagator {
 public:
  explicit BlockPropagator(const SparseMatrix& h) : dim_(h.rows()) {
    require(h.rows() == h.cols(), "BlockPropagator: square generator required");
    std::vector<Index> parent(static_cast<size_t>(dim_));
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index i) {
      while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
      }
      return i;
    };
    for (Index j = 0; j < h.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(h, j); it; ++it) {
        if (it.value() == cplx(0.0)) continue;
        Index a = find(it.row()), b = find(it.col());
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    std::vector<Index> block_of(static_cast<size_t>(dim_), -1);
    for (Index i = 0; i < dim_; ++i) {
      Index root = find(i);
      if (block_of[root] < 0) {
        block_of[root] = static_cast<Index>(blocks_.size());
        blocks_.emplace_back();
      }
      blocks_[block_of[root]].indices.push_back(i);
    }
    Matrix dense = Matrix(h);
    for (auto& block : blocks_) {
      const Index n = static_cast<Index>(block.indices.size());
      Matrix sub(n, n);
      for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b) sub(a, b) = dense(block.indices[a], block.indices[b]);
      Eigen::SelfAdjointEigenSolver<Matrix> solver(sub);
      block.vectors = solver.eigenvectors();
      block.values = solver.eigenvalues();
      max_block_ = std::max(max_block_, n);
    }
  }

  Index dim() const { return dim_; }
  size_t block_count() const { return blocks_.size(); }
  Index max_block() const { return max_block_; }

  /// state <- exp(-i angle H) state
  void apply(double angle, Vector& state) const {
    require(state.size() == dim_, "BlockPropagator: state dimension mismatch");
    Vector slice, coeffs;
    for (const auto& block : blocks_) {
      const Index n = static_cast<Index>(block.indices.size());
      bool any = false;
      for (Index a = 0; a < n && !any; ++a) any = state(block.indices[a]) != cplx(0.0);
      if (!any) continue;
      if (n == 1) {
        state(block.indices[0]) *= std::exp(-kI * angle * block.values(0));
        continue;
      }
      slice.resize(n);
      for (Index a = 0; a < n; ++a) slice(a) = state(block.indices[a]);
      coeffs.noalias() = block.vectors.adjoint() * slice;
      for (Index a = 0; a < n; ++a) coeffs(a) *= std::exp(-kI * angle * block.values(a));
      slice.noalias() = block.vectors * coeffs;
      for (Index a = 0; a < n; ++a) state(block.indices[a]) = slice(a);
    }
  }

  Matrix unitary(double angle) const {
    Matrix u = Matrix::Zero(dim_, dim_);
    for (const auto& block : blocks_) {
      const Index n = static_cast<Index>(block.indices.size());
      Vector phases(n);
      for (Index a = 0; a < n; ++a) phases(a) = std::exp(-kI * angle * block.values(a));
      Matrix sub = block.vectors * phases.asDiagonal() * block.vectors.adjoint();
      for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b) u(block.indices[a], block.indices[b]) = sub(a, b);
    }
    return u;
  }

 private:
  struct Block {
    std::vector<Index> indices;
    Matrix vectors;
    RealVector values;
  };

  Index dim_ = 0;
  Index max_block_ = 0;
  std::vector<Block> blocks_;
};

}  // namespace qreservoir
