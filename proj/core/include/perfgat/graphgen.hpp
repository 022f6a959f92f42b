#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "perfgat/geometry.hpp"
#include "perfgat/matrix.hpp"
#include "perfgat/synthdata.hpp"

namespace perfgat::graph {

// Symmetric binary adjacency with zero diagonal.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(std::size_t n) : n_(n), a_(n * n, 0) {}

  static Adjacency complete(std::size_t n);

  std::size_t size() const { return n_; }
  bool at(std::size_t i, std::size_t j) const { return a_[i * n_ + j] != 0; }
  // Sets/clears both directions.
  void set_edge(std::size_t i, std::size_t j, bool present);

  bool symmetric_zero_diag() const;
  std::size_t degree(std::size_t i) const;
  std::size_t edge_pairs() const;  // undirected count
  std::vector<std::size_t> neighbors(std::size_t i) const;            // ascending
  std::vector<std::pair<std::size_t, std::size_t>> undirected_edges() const;  // i < j

  friend bool operator==(const Adjacency& x, const Adjacency& y) {
    return x.n_ == y.n_ && x.a_ == y.a_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> a_;
};

// Node features with the two adjacency structures; row N is the tumor node.
struct SpatioTemporalGraph {
  num::Matrix x;          // (N+1) x T
  Adjacency a_temporal;   // (N+1) x (N+1)
  Adjacency a_spatial;    // (N+1) x (N+1)
  std::vector<Point3> centroids;  // N+1
};

// Pearson correlation of rows. Requires T >= 3; a zero-variance row throws
// DomainError naming the node. Diagonal is exactly 1.
num::Matrix correlation_matrix(const num::Matrix& x);

// A_ij = 1 iff C_ij > tau (strict) for i != j; with use_abs, |C_ij| > tau.
Adjacency threshold_temporal_adjacency(const num::Matrix& c, double tau,
                                       bool use_abs = false);

// Directed k-nearest-neighbour graph by Euclidean distance, symmetrized by
// union. Distance ties break toward the lower node index. Duplicate
// centroids throw DomainError.
Adjacency knn_spatial_adjacency(const std::vector<Point3>& centroids, std::size_t k);

// Stacks region and tumor series into X, then applies the same correlation
// thresholding and kNN rules to all N+1 nodes.
SpatioTemporalGraph build_graphs(const synth::LabeledVolume& v, double tau, std::size_t k,
                                 bool use_abs = false);

}  // namespace perfgat::graph
