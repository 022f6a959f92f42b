#include <cmath>
#include <vector>

#include <doctest.h>

#include "perfgat/errors.hpp"
#include "perfgat/grad_tape.hpp"
#include "perfgat/matrix.hpp"
#include "test_util.hpp"

using namespace perfgat;
using num::GradTape;
using num::Matrix;
using num::Var;
using num::Vector;

TEST_CASE("matmul basics") {
  Rng rng(7);
  const Matrix m = testutil::random_matrix(rng, 3, 3);
  CHECK(num::matmul(Matrix::identity(3), m) == m);

  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{0}, {1}});
  const Matrix prod = num::matmul(a, b);
  CHECK(prod(0, 0) == 2.0);
  CHECK(prod(1, 0) == 4.0);

  const Matrix bad(4, 2);
  try {
    num::matmul(Matrix(2, 3), bad);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
}

TEST_CASE("softmax values and stability") {
  const Vector sym = num::softmax(Vector{0.0, 0.0});
  CHECK(sym[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sym[1] == doctest::Approx(0.5).epsilon(1e-12));

  const Vector big = num::softmax(Vector{1000.0, 1000.0, 1000.0});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::isfinite(big[i]));
    CHECK(big[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  const Vector closed = num::softmax(Vector{0.0, std::log(3.0)});
  CHECK(closed[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(closed[1] == doctest::Approx(0.75).epsilon(1e-12));

  CHECK_THROWS_AS(num::softmax(Vector{}), DomainError);
}

TEST_CASE("softmax sums to one for long random inputs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t len = 1 + rng.index(10000);
    Vector v(len);
    for (std::size_t i = 0; i < len; ++i) v[i] = rng.uniform(-700.0, 700.0);
    const Vector s = num::softmax(v);
    double sum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      CHECK(s[i] > 0.0);
      sum += s[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("leaky_relu") {
  CHECK(num::leaky_relu(5.0, 0.2) == 5.0);
  CHECK(num::leaky_relu(-1.0, 0.2) == -0.2);
  CHECK(num::leaky_relu(0.0, 0.2) == 0.0);
  CHECK_THROWS_AS(num::leaky_relu(1.0, 1.5), DomainError);
}

TEST_CASE("cosine_similarity") {
  Rng rng(3);
  const Vector v = testutil::random_vector(rng, 5);
  CHECK(num::cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(num::cosine_similarity(Vector{1, 0}, Vector{0, 1}) == 0.0);
  CHECK(num::cosine_similarity(Vector{1, 1}, Vector{1, 0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(num::cosine_similarity(Vector{0, 0}, Vector{1, 0}), DomainError);
}

TEST_CASE("backward on simple programs") {
  SUBCASE("f(w) = w.w at w=3 has gradient 6") {
    GradTape tape;
    const Var w = tape.param(Matrix(1, 1, {3.0}));
    tape.backward(tape.dot(w, w));
    CHECK(tape.grad(w)(0, 0) == doctest::Approx(6.0).epsilon(1e-14));
  }

  SUBCASE("unused parameter gets a zero gradient of its shape") {
    GradTape tape;
    const Var used = tape.param(Matrix(1, 1, {2.0}));
    const Var unused = tape.param(Matrix(2, 3, std::vector<double>(6, 1.0)));
    tape.backward(tape.dot(used, used));
    const Matrix& g = tape.grad(unused);
    CHECK(g.rows() == 2);
    CHECK(g.cols() == 3);
    for (double v : g.data()) CHECK(v == 0.0);
  }

  SUBCASE("sum of softmax is constant, so gradients vanish") {
    Rng rng(11);
    GradTape tape;
    const Var w = tape.param(testutil::random_matrix(rng, 4, 3));
    const Var v = tape.constant(testutil::random_matrix(rng, 3, 1));
    tape.backward(tape.sum(tape.softmax(tape.matmul(w, v))));
    for (double g : tape.grad(w).data()) CHECK(std::abs(g) <= 1e-12);
  }

  SUBCASE("non-scalar output is a contract violation") {
    GradTape tape;
    const Var w = tape.param(Matrix(2, 2));
    CHECK_THROWS_AS(tape.backward(w), ContractError);
  }

  SUBCASE("backward runs once per tape") {
    GradTape tape;
    const Var w = tape.param(Matrix(1, 1, {1.0}));
    const Var out = tape.dot(w, w);
    tape.backward(out);
    CHECK_THROWS_AS(tape.backward(out), ContractError);
  }
}

TEST_CASE("backward is deterministic bit for bit") {
  const auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    GradTape tape;
    const Var w = tape.param(testutil::random_matrix(rng, 4, 4));
    const Var x = tape.constant(testutil::random_matrix(rng, 4, 2));
    const Var y = tape.tanh_act(tape.matmul(w, x));
    const Var out = tape.mean_all(tape.hadamard(y, y));
    tape.backward(out);
    return tape.grad(w);
  };
  CHECK(run(5) == run(5));
}

namespace {

// Scalarizes `out` by a fixed random weighting so every entry influences the
// objective.
Var weigh(GradTape& tape, Var out, Rng& rng) {
  const Matrix& v = tape.value(out);
  return tape.dot(out, tape.constant(testutil::random_matrix(rng, v.rows(), v.cols())));
}

}  // namespace

TEST_CASE("every tape op matches central finite differences") {
  struct OpCase {
    const char* name;
    std::vector<Matrix> (*make_params)(Rng&);
    Var (*program)(GradTape&, const std::vector<Var>&, Rng&);
  };

  const std::vector<OpCase> cases = {
      {"add_sub_hadamard_scale",
       [](Rng& rng) {
         return std::vector<Matrix>{testutil::random_matrix(rng, 3, 2),
                                    testutil::random_matrix(rng, 3, 2)};
       },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         const Var s = t.scale(t.add(p[0], p[1]), 0.7);
         return weigh(t, t.hadamard(s, t.sub(p[0], p[1])), rng);
       }},
      {"matmul",
       [](Rng& rng) {
         return std::vector<Matrix>{testutil::random_matrix(rng, 3, 4),
                                    testutil::random_matrix(rng, 4, 2)};
       },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         return weigh(t, t.matmul(p[0], p[1]), rng);
       }},
      {"add_row_bias",
       [](Rng& rng) {
         return std::vector<Matrix>{testutil::random_matrix(rng, 4, 3),
                                    testutil::random_matrix(rng, 1, 3)};
       },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         return weigh(t, t.add_row_bias(p[0], p[1]), rng);
       }},
      {"activations",
       [](Rng& rng) { return std::vector<Matrix>{testutil::random_matrix(rng, 3, 3)}; },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         const Var a = t.leaky_relu(p[0], 0.2);
         const Var b = t.tanh_act(a);
         return weigh(t, t.sigmoid(b), rng);
       }},
      {"softmax",
       [](Rng& rng) { return std::vector<Matrix>{testutil::random_matrix(rng, 5, 1)}; },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         return weigh(t, t.softmax(p[0]), rng);
       }},
      {"reductions",
       [](Rng& rng) { return std::vector<Matrix>{testutil::random_matrix(rng, 4, 3)}; },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         const Var mr = weigh(t, t.mean_rows(p[0]), rng);
         return t.add(t.add(t.sum(p[0]), t.mean_all(p[0])), mr);
       }},
      {"mul_scalar_dot",
       [](Rng& rng) {
         return std::vector<Matrix>{testutil::random_matrix(rng, 2, 3),
                                    testutil::random_matrix(rng, 1, 1)};
       },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         return weigh(t, t.mul_scalar(p[0], p[1]), rng);
       }},
      {"rows_stack_gather",
       [](Rng& rng) { return std::vector<Matrix>{testutil::random_matrix(rng, 4, 3)}; },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         std::vector<Var> rows = {t.row(p[0], 2), t.row(p[0], 0), t.row(p[0], 2)};
         const Var stacked = t.stack_rows(rows);
         std::vector<Var> scalars = {t.mean_all(stacked), t.sum(p[0])};
         return weigh(t, t.gather_scalars(scalars), rng);
       }},
      {"weighted_row_sum",
       [](Rng& rng) {
         return std::vector<Matrix>{testutil::random_matrix(rng, 3, 1),
                                    testutil::random_matrix(rng, 3, 4)};
       },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         std::vector<Var> rows = {t.row(p[1], 0), t.row(p[1], 1), t.row(p[1], 2)};
         return weigh(t, t.weighted_row_sum(p[0], rows), rng);
       }},
      {"scale_rows",
       [](Rng& rng) {
         return std::vector<Matrix>{testutil::random_matrix(rng, 3, 4),
                                    testutil::random_matrix(rng, 3, 1)};
       },
       [](GradTape& t, const std::vector<Var>& p, Rng& rng) {
         return weigh(t, t.scale_rows(p[0], p[1]), rng);
       }},
      {"edge_score",
       [](Rng& rng) {
         return std::vector<Matrix>{testutil::random_matrix(rng, 6, 1),
                                    testutil::random_matrix(rng, 1, 3),
                                    testutil::random_matrix(rng, 1, 3)};
       },
       [](GradTape& t, const std::vector<Var>& p, Rng&) {
         return t.edge_score(p[0], p[1], p[2], 0.2);
       }},
      {"cosine",
       [](Rng& rng) {
         return std::vector<Matrix>{testutil::random_matrix(rng, 1, 4),
                                    testutil::random_matrix(rng, 1, 4)};
       },
       [](GradTape& t, const std::vector<Var>& p, Rng&) { return t.cosine(p[0], p[1]); }},
      {"cross_entropy_logits",
       [](Rng& rng) { return std::vector<Matrix>{testutil::random_matrix(rng, 1, 2)}; },
       [](GradTape& t, const std::vector<Var>& p, Rng&) {
         return t.cross_entropy_logits(p[0], 1);
       }},
  };

  for (const OpCase& oc : cases) {
    CAPTURE(oc.name);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng param_rng(seed);
      const std::vector<Matrix> params = oc.make_params(param_rng);
      const std::uint64_t weigh_seed = seed * 1000 + 17;
      const num::TapeProgram program = [&](GradTape& t, const std::vector<Var>& vars) {
        Rng rng(weigh_seed);
        return oc.program(t, vars, rng);
      };
      const double err = num::finite_diff_check(program, params, 1e-5);
      CHECK_MESSAGE(err <= 1e-4, oc.name << " seed " << seed << " rel err " << err);
    }
  }
}

TEST_CASE("finite_diff_check accepts a hand-derived quadratic-form gradient") {
  Rng rng(21);
  const Matrix a = testutil::random_matrix(rng, 4, 4);
  const Matrix w = testutil::random_matrix(rng, 4, 1);

  // f(w) = w^T A w, grad = (A + A^T) w.
  const num::ScalarFn f = [&a](const std::vector<Matrix>& ps) {
    const Matrix& w0 = ps[0];
    return num::matmul(num::matmul(num::transpose(w0), a), w0)(0, 0);
  };
  const Matrix grad = num::matmul(num::add(a, num::transpose(a)), w);
  const double err = num::finite_diff_check(f, {w}, {grad}, 1e-5);
  CHECK(err <= 1e-6);
}

TEST_CASE("finite_diff_check edge cases") {
  const Matrix w(2, 2, {1.0, 2.0, 3.0, 4.0});

  SUBCASE("constant function has zero gradient both ways") {
    const num::ScalarFn f = [](const std::vector<Matrix>&) { return 5.0; };
    CHECK(num::finite_diff_check(f, {w}, {Matrix(2, 2)}, 1e-5) == 0.0);
  }

  SUBCASE("non-finite objective is a numeric error") {
    const num::ScalarFn f = [](const std::vector<Matrix>&) {
      return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(num::finite_diff_check(f, {w}, {Matrix(2, 2)}, 1e-5), NumericError);
  }

  SUBCASE("eps outside (0, 1e-2] is rejected") {
    const num::ScalarFn f = [](const std::vector<Matrix>&) { return 0.0; };
    CHECK_THROWS_AS(num::finite_diff_check(f, {w}, {Matrix(2, 2)}, 0.5), DomainError);
    CHECK_THROWS_AS(num::finite_diff_check(f, {w}, {Matrix(2, 2)}, 0.0), DomainError);
  }
}

TEST_CASE("registered parameters all expose gradients after backward") {
  Rng rng(9);
  GradTape tape;
  const Var a = tape.param(testutil::random_matrix(rng, 2, 3));
  const Var b = tape.param(testutil::random_matrix(rng, 3, 1));
  const Var c = tape.param(testutil::random_matrix(rng, 5, 5));  // unreachable
  tape.backward(tape.sum(tape.matmul(a, b)));
  CHECK(tape.num_params() == 3);
  CHECK(tape.grad(a).same_shape(tape.value(a)));
  CHECK(tape.grad(b).same_shape(tape.value(b)));
  CHECK(tape.grad(c).same_shape(tape.value(c)));
}
