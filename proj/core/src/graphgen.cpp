#include "perfgat/graphgen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "perfgat/errors.hpp"

namespace perfgat::graph {

Adjacency Adjacency::complete(std::size_t n) {
  Adjacency a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a.set_edge(i, j, true);
  return a;
}

void Adjacency::set_edge(std::size_t i, std::size_t j, bool present) {
  if (i == j) throw ContractError("adjacency carries no self-loops");
  a_[i * n_ + j] = present ? 1 : 0;
  a_[j * n_ + i] = present ? 1 : 0;
}

bool Adjacency::symmetric_zero_diag() const {
  for (std::size_t i = 0; i < n_; ++i) {
    if (a_[i * n_ + i] != 0) return false;
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (a_[i * n_ + j] != a_[j * n_ + i]) return false;
    }
  }
  return true;
}

std::size_t Adjacency::degree(std::size_t i) const {
  std::size_t d = 0;
  for (std::size_t j = 0; j < n_; ++j) d += a_[i * n_ + j];
  return d;
}

std::size_t Adjacency::edge_pairs() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j) c += a_[i * n_ + j];
  return c;
}

std::vector<std::size_t> Adjacency::neighbors(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < n_; ++j) {
    if (a_[i * n_ + j]) out.push_back(j);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Adjacency::undirected_edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (a_[i * n_ + j]) out.emplace_back(i, j);
    }
  return out;
}

num::Matrix correlation_matrix(const num::Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t T = x.cols();
  if (T < 3) throw DomainError("correlation_matrix requires T >= 3");

  // Center rows, precompute norms.
  num::Matrix centered(n, T);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += x(i, t);
    mean /= static_cast<double>(T);
    double ss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      centered(i, t) = x(i, t) - mean;
      ss += centered(i, t) * centered(i, t);
    }
    if (ss == 0.0) {
      throw DomainError("correlation_matrix: node " + std::to_string(i) +
                        " has a zero-variance series");
    }
    norms[i] = std::sqrt(ss);
  }

  num::Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += centered(i, t) * centered(j, t);
      const double r = std::clamp(s / (norms[i] * norms[j]), -1.0, 1.0);
      c(i, j) = r;
      c(j, i) = r;
    }
  }
  return c;
}

Adjacency threshold_temporal_adjacency(const num::Matrix& c, double tau, bool use_abs) {
  if (c.rows() != c.cols()) {
    throw DimensionError("threshold_temporal_adjacency: matrix is " + c.shape_str());
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw DomainError("threshold_temporal_adjacency: tau must lie in (0,1)");
  }
  const std::size_t n = c.rows();
  Adjacency a(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = use_abs ? std::abs(c(i, j)) : c(i, j);
      if (v > tau) a.set_edge(i, j, true);
    }
  }
  return a;
}

Adjacency knn_spatial_adjacency(const std::vector<Point3>& centroids, std::size_t k) {
  const std::size_t n = centroids.size();
  if (n < 2) throw DomainError("knn_spatial_adjacency needs at least 2 nodes");
  if (k < 1 || k >= n) {
    throw DomainError("knn_spatial_adjacency: k must lie in [1, N], got " + std::to_string(k));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (centroids[i] == centroids[j]) {
        throw DomainError("knn_spatial_adjacency: duplicate centroids at nodes " +
                          std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }

  Adjacency a(n);
  std::vector<std::size_t> others(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t w = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others[w++] = j;
    }
    // Ties break toward the lower node index.
    std::sort(others.begin(), others.end(), [&](std::size_t p, std::size_t q) {
      const double dp = squared_distance(centroids[i], centroids[p]);
      const double dq = squared_distance(centroids[i], centroids[q]);
      return dp != dq ? dp < dq : p < q;
    });
    for (std::size_t t = 0; t < k; ++t) a.set_edge(i, others[t], true);  // union symmetrization
  }
  return a;
}

SpatioTemporalGraph build_graphs(const synth::LabeledVolume& v, double tau, std::size_t k,
                                 bool use_abs) {
  const std::size_t N = v.region_series.rows();
  const std::size_t T = v.region_series.cols();
  if (v.tumor_series.len() != T) {
    throw DimensionError("build_graphs: tumor series length " +
                         std::to_string(v.tumor_series.len()) + " vs T=" + std::to_string(T));
  }
  SpatioTemporalGraph g;
  g.x = num::Matrix(N + 1, T);
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t t = 0; t < T; ++t) g.x(r, t) = v.region_series(r, t);
  for (std::size_t t = 0; t < T; ++t) g.x(N, t) = v.tumor_series[t];
  num::require_finite(g.x.data(), "build_graphs node features");

  g.centroids = v.region_centroids;
  g.centroids.push_back(v.tumor_centroid);

  g.a_temporal = threshold_temporal_adjacency(correlation_matrix(g.x), tau, use_abs);
  g.a_spatial = knn_spatial_adjacency(g.centroids, k);
  return g;
}

}  // namespace perfgat::graph
