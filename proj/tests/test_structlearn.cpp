#include <algorithm>
#include <cmath>
#include <map>

#include <doctest.h>

#include "perfgat/errors.hpp"
#include "perfgat/structlearn.hpp"
#include "test_util.hpp"

using namespace perfgat;
using graph::Adjacency;
using gsl::EdgeScores;
using gsl::GslConfig;
using gsl::GslLayerParams;
using num::Matrix;

namespace {

GslLayerParams random_layer(Rng& rng, std::size_t d_in, std::size_t d_out) {
  GslLayerParams p;
  p.w_attn = testutil::random_matrix(rng, d_in, d_out, 0.5);
  p.attn_vec = testutil::random_matrix(rng, 2 * d_out, 1, 0.5);
  p.w_feat = testutil::random_matrix(rng, d_in, d_out, 0.5);
  return p;
}

Adjacency random_graph(Rng& rng, std::size_t n, double density) {
  Adjacency a(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) a.set_edge(i, j, rng.uniform() < density);
    if (a.edge_pairs() > 0) return a;
  }
}

// ---- Independent oracle: plain-double reimplementation of one structure-
// learning layer, following the edit sequence step by step. ----

using PairScore = std::map<std::pair<std::size_t, std::size_t>, double>;

PairScore oracle_attention(const Matrix& x, const Adjacency& a, const GslLayerParams& p,
                           double slope) {
  const std::size_t n = a.size();
  const std::size_t d = p.w_attn.cols();
  Matrix u(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < d; ++o) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) s += x(i, k) * p.w_attn(k, o);
      u(i, o) = s;
    }
  PairScore scores;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> nb;
    for (std::size_t j = 0; j < n; ++j) {
      if (a.at(i, j)) nb.push_back(j);
    }
    if (nb.empty()) continue;
    std::vector<double> raw;
    for (std::size_t j : nb) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        s += p.attn_vec(k, 0) * u(i, k) + p.attn_vec(d + k, 0) * u(j, k);
      }
      raw.push_back(s >= 0.0 ? s : slope * s);
    }
    const double mx = *std::max_element(raw.begin(), raw.end());
    double denom = 0.0;
    for (double& r : raw) {
      r = std::exp(r - mx);
      denom += r;
    }
    for (std::size_t t = 0; t < nb.size(); ++t) scores[{i, nb[t]}] = raw[t] / denom;
  }
  return scores;
}

std::vector<std::pair<std::size_t, std::size_t>> oracle_select(const PairScore& directed,
                                                               std::size_t count,
                                                               bool lowest) {
  std::map<std::pair<std::size_t, std::size_t>, double> sym;
  for (const auto& [edge, s] : directed) {
    auto key = edge;
    if (key.first > key.second) std::swap(key.first, key.second);
    sym[key] += 0.5 * s;
  }
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> pairs(sym.begin(),
                                                                            sym.end());
  std::sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return lowest ? a.second < b.second : a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t t = 0; t < std::min(count, pairs.size()); ++t) out.push_back(pairs[t].first);
  return out;
}

Matrix oracle_update(const Matrix& x, const Adjacency& a, const PairScore& scores,
                     const GslLayerParams& p) {
  const std::size_t n = a.size();
  const std::size_t d = p.w_feat.cols();
  Matrix v(n, d);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t o = 0; o < d; ++o) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) s += x(j, k) * p.w_feat(k, o);
      v(j, o) = s;
    }
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!a.at(i, j)) continue;
      const double e = scores.at({i, j});
      for (std::size_t o = 0; o < d; ++o) out(i, o) += e * v(j, o);
    }
  }
  return out;
}

struct OracleLayer {
  Adjacency adjacency{0};
  Matrix x;
  std::vector<std::pair<std::size_t, std::size_t>> removed, added;
};

OracleLayer oracle_layer(const Matrix& x, const Adjacency& a, const GslLayerParams& p,
                         std::size_t alpha, std::size_t beta, double slope) {
  OracleLayer out;
  out.adjacency = a;
  const PairScore pos = oracle_attention(x, a, p, slope);
  out.removed = oracle_select(pos, alpha, /*lowest=*/true);
  Adjacency neg(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) neg.set_edge(i, j, !a.at(i, j));
  if (neg.edge_pairs() > 0) {
    const PairScore negs = oracle_attention(x, neg, p, slope);
    out.added = oracle_select(negs, beta, /*lowest=*/false);
  }
  for (const auto& [i, j] : out.removed) out.adjacency.set_edge(i, j, false);
  for (const auto& [i, j] : out.added) out.adjacency.set_edge(i, j, true);
  const PairScore final_scores = oracle_attention(x, out.adjacency, p, slope);
  out.x = oracle_update(x, out.adjacency, final_scores, p);
  return out;
}

}  // namespace

TEST_CASE("negative_graph") {
  const Adjacency complete = Adjacency::complete(5);
  CHECK(gsl::negative_graph(complete).edge_pairs() == 0);

  const Adjacency empty(5);
  CHECK(gsl::negative_graph(empty).edge_pairs() == 10);

  Rng rng(2);
  const Adjacency a = random_graph(rng, 7, 0.4);
  CHECK(gsl::negative_graph(gsl::negative_graph(a)) == a);
  CHECK(gsl::negative_graph(a).symmetric_zero_diag());
}

TEST_CASE("adjacency_from_matrix validates the contract") {
  Matrix ok(3, 3);
  ok(0, 1) = 1.0;
  ok(1, 0) = 1.0;
  CHECK(gsl::adjacency_from_matrix(ok).at(0, 1));

  Matrix asym(3, 3);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(gsl::adjacency_from_matrix(asym), ContractError);

  Matrix diag(2, 2);
  diag(0, 0) = 1.0;
  CHECK_THROWS_AS(gsl::adjacency_from_matrix(diag), ContractError);

  Matrix nonbinary(2, 2);
  nonbinary(0, 1) = 0.5;
  nonbinary(1, 0) = 0.5;
  CHECK_THROWS_AS(gsl::adjacency_from_matrix(nonbinary), ContractError);
}

TEST_CASE("edge_attention basics") {
  Rng rng(5);

  SUBCASE("a single neighbor receives score 1") {
    Adjacency a(2);
    a.set_edge(0, 1, true);
    const GslLayerParams p = random_layer(rng, 3, 2);
    const EdgeScores s =
        gsl::edge_attention_values(testutil::random_matrix(rng, 2, 3), a, p, 0.2);
    REQUIRE(s.edges.size() == 2);
    CHECK(s.scores[0] == 1.0);
    CHECK(s.scores[1] == 1.0);
  }

  SUBCASE("identical node features give uniform scores") {
    Adjacency a(4);
    a.set_edge(0, 1, true);
    a.set_edge(0, 2, true);
    a.set_edge(0, 3, true);
    a.set_edge(1, 2, true);
    Matrix x(4, 3);
    for (double& v : x.data()) v = 1.5;
    const GslLayerParams p = random_layer(rng, 3, 2);
    const EdgeScores s = gsl::edge_attention_values(x, a, p, 0.2);
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
      const std::size_t deg_i = a.degree(s.edges[e].first);
      CHECK(s.scores[e] == doctest::Approx(1.0 / static_cast<double>(deg_i)).epsilon(1e-12));
    }
  }

  SUBCASE("3-node path matches a scalar hand evaluation") {
    Adjacency a(3);
    a.set_edge(0, 1, true);
    a.set_edge(1, 2, true);
    GslLayerParams p;
    p.w_attn = Matrix::identity(2);
    p.attn_vec = Matrix(4, 1, {1.0, -1.0, 0.5, 0.25});
    p.w_feat = Matrix::identity(2);
    const Matrix x = Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}});
    const EdgeScores s = gsl::edge_attention_values(x, a, p, 0.2);

    const auto leaky = [](double v) { return v >= 0.0 ? v : 0.2 * v; };
    const double raw01 = leaky(1.0 * 1 - 1.0 * 0 + 0.5 * 0 + 0.25 * 1);   // 1.25
    const double raw10 = leaky(1.0 * 0 - 1.0 * 1 + 0.5 * 1 + 0.25 * 0);   // -0.1
    const double raw12 = leaky(1.0 * 0 - 1.0 * 1 + 0.5 * 1 + 0.25 * 1);   // -0.05
    const double raw21 = leaky(1.0 * 1 - 1.0 * 1 + 0.5 * 0 + 0.25 * 1);   // 0.25
    CHECK(raw01 == 1.25);

    std::map<std::pair<std::size_t, std::size_t>, double> got;
    for (std::size_t e = 0; e < s.edges.size(); ++e) got[s.edges[e]] = s.scores[e];
    CHECK(got.at({0, 1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(got.at({2, 1}) == doctest::Approx(1.0).epsilon(1e-12));
    const double e10 = std::exp(raw10) / (std::exp(raw10) + std::exp(raw12));
    const double e12 = std::exp(raw12) / (std::exp(raw10) + std::exp(raw12));
    CHECK(got.at({1, 0}) == doctest::Approx(e10).epsilon(1e-12));
    CHECK(got.at({1, 2}) == doctest::Approx(e12).epsilon(1e-12));
    (void)raw21;
  }

  SUBCASE("an empty graph is a domain error") {
    const GslLayerParams p = random_layer(rng, 3, 2);
    CHECK_THROWS_AS(
        gsl::edge_attention_values(testutil::random_matrix(rng, 3, 3), Adjacency(3), p, 0.2),
        DomainError);
  }

  SUBCASE("per-source scores sum to 1") {
    const Adjacency a = random_graph(rng, 8, 0.5);
    const GslLayerParams p = random_layer(rng, 4, 3);
    const EdgeScores s =
        gsl::edge_attention_values(testutil::random_matrix(rng, 8, 4), a, p, 0.2);
    std::map<std::size_t, double> sums;
    for (std::size_t e = 0; e < s.edges.size(); ++e) sums[s.edges[e].first] += s.scores[e];
    for (const auto& [node, sum] : sums) CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("select_edges") {
  EdgeScores s;
  s.edges = {{0, 1}, {1, 0}, {0, 2}, {2, 0}};
  s.scores = {0.9, 0.9, 0.1, 0.1};

  SUBCASE("count 0 selects nothing") {
    CHECK(gsl::select_edges(s, 0, gsl::SelectMode::kLowest).pairs.empty());
  }

  SUBCASE("direct comparison picks the weaker pair") {
    const gsl::Selection sel = gsl::select_edges(s, 1, gsl::SelectMode::kLowest);
    REQUIRE(sel.pairs.size() == 1);
    CHECK(sel.pairs[0] == std::make_pair<std::size_t, std::size_t>(0, 2));
    CHECK_FALSE(sel.clipped);
  }

  SUBCASE("ties break lexicographically") {
    EdgeScores tie;
    tie.edges = {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {0, 3}, {3, 0}};
    tie.scores = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    const gsl::Selection sel = gsl::select_edges(tie, 1, gsl::SelectMode::kLowest);
    CHECK(sel.pairs[0] == std::make_pair<std::size_t, std::size_t>(0, 1));
    const gsl::Selection hi = gsl::select_edges(tie, 2, gsl::SelectMode::kHighest);
    CHECK(hi.pairs[0] == std::make_pair<std::size_t, std::size_t>(0, 1));
    CHECK(hi.pairs[1] == std::make_pair<std::size_t, std::size_t>(0, 3));
  }

  SUBCASE("oversized count clips with a warning flag") {
    const gsl::Selection sel = gsl::select_edges(s, 9, gsl::SelectMode::kHighest);
    CHECK(sel.pairs.size() == 2);
    CHECK(sel.clipped);
  }
}

TEST_CASE("feature update semantics") {
  Rng rng(6);

  SUBCASE("single edge with identity transform copies the neighbor") {
    Adjacency a(2);
    a.set_edge(0, 1, true);
    GslLayerParams p = random_layer(rng, 2, 2);
    p.w_feat = Matrix::identity(2);
    const Matrix x = Matrix::from_rows({{3, 4}, {5, 6}});
    GslConfig cfg{0, 0, 1, 2};
    const gsl::GslValueResult r =
        gsl::run_structure_learning_values(x, a, std::vector<GslLayerParams>{p}, cfg, 0.2);
    CHECK(r.embeddings(0, 0) == 5.0);
    CHECK(r.embeddings(0, 1) == 6.0);
    CHECK(r.embeddings(1, 0) == 3.0);
    CHECK(r.embeddings(1, 1) == 4.0);
  }

  SUBCASE("zero attention transform gives uniform scores, so the update is a neighbor mean") {
    Adjacency a(3);
    a.set_edge(0, 1, true);
    a.set_edge(0, 2, true);
    GslLayerParams p;
    p.w_attn = Matrix(2, 2);  // zero: all raw scores equal
    p.attn_vec = testutil::random_matrix(rng, 4, 1);
    p.w_feat = Matrix::identity(2);
    const Matrix x = Matrix::from_rows({{0, 0}, {2, 4}, {6, 8}});
    GslConfig cfg{0, 0, 1, 2};
    const gsl::GslValueResult r =
        gsl::run_structure_learning_values(x, a, std::vector<GslLayerParams>{p}, cfg, 0.2);
    CHECK(r.embeddings(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(r.embeddings(0, 1) == doctest::Approx(6.0).epsilon(1e-12));
  }

  SUBCASE("isolated nodes produce zero rows") {
    Adjacency a(3);
    a.set_edge(0, 1, true);
    const GslLayerParams p = random_layer(rng, 2, 2);
    GslConfig cfg{0, 0, 1, 2};
    const gsl::GslValueResult r = gsl::run_structure_learning_values(
        testutil::random_matrix(rng, 3, 2), a, std::vector<GslLayerParams>{p}, cfg, 0.2);
    CHECK(r.embeddings(2, 0) == 0.0);
    CHECK(r.embeddings(2, 1) == 0.0);
  }
}

TEST_CASE("run_structure_learning edit bookkeeping") {
  Rng rng(8);

  SUBCASE("alpha = beta = 0 leaves the adjacency untouched") {
    const Adjacency a = random_graph(rng, 6, 0.5);
    std::vector<GslLayerParams> layers = {random_layer(rng, 4, 3), random_layer(rng, 3, 3)};
    GslConfig cfg{0, 0, 2, 3};
    const gsl::GslValueResult r = gsl::run_structure_learning_values(
        testutil::random_matrix(rng, 6, 4), a, layers, cfg, 0.2);
    CHECK(r.adjacency == a);
  }

  SUBCASE("pair count evolves as |E| - alpha + beta per layer") {
    // 6 nodes, exactly 10 pairs out of 15.
    Adjacency a(6);
    std::size_t placed = 0;
    for (std::size_t i = 0; i < 6 && placed < 10; ++i) {
      for (std::size_t j = i + 1; j < 6 && placed < 10; ++j) {
        a.set_edge(i, j, true);
        ++placed;
      }
    }
    REQUIRE(a.edge_pairs() == 10);
    std::vector<GslLayerParams> layers = {random_layer(rng, 4, 3), random_layer(rng, 3, 3)};
    GslConfig cfg{2, 3, 2, 3};
    const gsl::GslValueResult r = gsl::run_structure_learning_values(
        testutil::random_matrix(rng, 6, 4), a, layers, cfg, 0.2);
    // 10 - 2 + 3 = 11 after layer 1, 12 after layer 2.
    CHECK(r.edits[0].removed.size() == 2);
    CHECK(r.edits[0].added.size() == 3);
    CHECK(r.adjacency.edge_pairs() == 12);
    CHECK(r.adjacency.symmetric_zero_diag());
  }

  SUBCASE("deleted pairs never coincide with added pairs in a layer") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng g(seed + 100);
      const Adjacency a = random_graph(g, 7, 0.5);
      std::vector<GslLayerParams> layers = {random_layer(g, 3, 3), random_layer(g, 3, 3)};
      GslConfig cfg{1, 2, 2, 3};
      const gsl::GslValueResult r = gsl::run_structure_learning_values(
          testutil::random_matrix(g, 7, 3), a, layers, cfg, 0.2);
      for (const gsl::LayerEdit& e : r.edits) {
        for (const auto& rem : e.removed) {
          CHECK(std::find(e.added.begin(), e.added.end(), rem) == e.added.end());
        }
      }
    }
  }

  SUBCASE("per-node normalization holds on both graphs at every layer") {
    const Adjacency a = random_graph(rng, 7, 0.5);
    std::vector<GslLayerParams> layers = {random_layer(rng, 3, 3), random_layer(rng, 3, 3)};
    GslConfig cfg{1, 1, 2, 3};
    const gsl::GslValueResult r = gsl::run_structure_learning_values(
        testutil::random_matrix(rng, 7, 3), a, layers, cfg, 0.2);
    for (const gsl::LayerDiagnostics& d : r.diagnostics) {
      for (const EdgeScores* s : {&d.positive, &d.negative, &d.final_scores}) {
        std::map<std::size_t, double> sums;
        for (std::size_t e = 0; e < s->edges.size(); ++e) {
          sums[s->edges[e].first] += s->scores[e];
        }
        for (const auto& [node, sum] : sums) CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
  }

  SUBCASE("deleting the last pair is a structural collapse") {
    Adjacency a(4);
    a.set_edge(0, 1, true);
    std::vector<GslLayerParams> layers = {random_layer(rng, 2, 2)};
    GslConfig cfg{1, 0, 1, 2};
    CHECK_THROWS_AS(gsl::run_structure_learning_values(testutil::random_matrix(rng, 4, 2), a,
                                                       layers, cfg, 0.2),
                    DomainError);
  }
}

TEST_CASE("one layer agrees exactly with the brute-force oracle on 5-node graphs") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    Rng rng(seed);
    const Adjacency a = random_graph(rng, 5, 0.5);
    const Matrix x = testutil::random_matrix(rng, 5, 3);
    const GslLayerParams p = random_layer(rng, 3, 2);
    const std::size_t alpha = std::min<std::size_t>(1, a.edge_pairs() - 1);
    const std::size_t beta = 1;

    const OracleLayer expect = oracle_layer(x, a, p, alpha, beta, 0.2);
    GslConfig cfg{alpha, beta, 1, 2};
    const gsl::GslValueResult got = gsl::run_structure_learning_values(
        x, a, std::vector<GslLayerParams>{p}, cfg, 0.2);

    CHECK(got.adjacency == expect.adjacency);
    CHECK(got.edits[0].removed == expect.removed);
    CHECK(got.edits[0].added == expect.added);
    CHECK(testutil::max_abs_diff(got.embeddings, expect.x) <= 1e-12);
  }
}

TEST_CASE("two stacked layers agree with the oracle applied twice") {
  for (std::uint64_t seed = 30; seed < 34; ++seed) {
    Rng rng(seed);
    const Adjacency a = random_graph(rng, 5, 0.6);
    const Matrix x = testutil::random_matrix(rng, 5, 4);
    std::vector<GslLayerParams> layers = {random_layer(rng, 4, 3), random_layer(rng, 3, 3)};

    const OracleLayer first = oracle_layer(x, a, layers[0], 1, 1, 0.2);
    const OracleLayer second = oracle_layer(first.x, first.adjacency, layers[1], 1, 1, 0.2);

    GslConfig cfg{1, 1, 2, 3};
    const gsl::GslValueResult got =
        gsl::run_structure_learning_values(x, a, layers, cfg, 0.2);
    CHECK(got.adjacency == second.adjacency);
    CHECK(testutil::max_abs_diff(got.embeddings, second.x) <= 1e-12);
  }
}

TEST_CASE("gradients through structure learning match finite differences with frozen edits") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 7);
    const Adjacency a = random_graph(rng, 5, 0.6);
    const Matrix x = testutil::random_matrix(rng, 5, 3);
    std::vector<GslLayerParams> layers = {random_layer(rng, 3, 2), random_layer(rng, 2, 2)};
    const Matrix weights = testutil::random_matrix(rng, 5, 2);
    GslConfig cfg{1, 1, 2, 2};

    // Record the edit plan once, then differentiate the frozen replay.
    const gsl::GslValueResult live =
        gsl::run_structure_learning_values(x, a, layers, cfg, 0.2);
    const gsl::GslPlan plan = live.edits;

    const std::vector<Matrix> params = {layers[0].w_attn, layers[0].attn_vec,
                                        layers[0].w_feat, layers[1].w_attn,
                                        layers[1].attn_vec, layers[1].w_feat};
    const num::TapeProgram frozen_program =
        [&](num::GradTape& t, const std::vector<num::Var>& vars) {
          std::vector<gsl::GslLayerVars> lv = {{vars[0], vars[1], vars[2]},
                                               {vars[3], vars[4], vars[5]}};
          const gsl::GslResult r = gsl::run_structure_learning(
              t, t.constant(x), a, lv, cfg, 0.2, &plan);
          return t.dot(r.embeddings, t.constant(weights));
        };
    const double err = num::finite_diff_check(frozen_program, params, 1e-5);
    CHECK_MESSAGE(err <= 1e-4, "seed " << seed << " rel err " << err);
  }
}
