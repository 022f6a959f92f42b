#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "perfgat/matrix.hpp"

namespace perfgat::num {

class GradTape;

// Handle to one node of a GradTape. Cheap to copy; valid only for the tape
// that created it.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }

 private:
  friend class GradTape;
  Var(GradTape* tape, int id) : tape_(tape), id_(id) {}
  GradTape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-accumulation gradient tape over Matrix values.
//
// Usage: create leaves with constant()/param(), compose with the ops below,
// call backward() once on a 1x1 output, then read grad() for every
// registered parameter. Construction order is evaluation order, so the
// reverse sweep visits a valid topological order. A tape is confined to one
// thread for its lifetime; all inputs are copied in, so distinct tapes may
// run concurrently over shared parameter storage.
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  // Leaf that never receives a gradient.
  Var constant(Matrix v);
  // Leaf registered as a parameter: backward() accumulates its gradient.
  Var param(Matrix v);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double s);
  Var matmul(Var a, Var b);
  // m (n x d) plus bias row (1 x d) added to every row.
  Var add_row_bias(Var m, Var bias);
  Var leaky_relu(Var a, double slope);
  Var tanh_act(Var a);
  Var sigmoid(Var a);
  // Softmax over all entries (shape preserved), max-subtracted.
  Var softmax(Var a);
  Var sum(Var a);
  Var mean_all(Var a);
  // (n x d) -> (1 x d) column means.
  Var mean_rows(Var a);
  Var dot(Var a, Var b);
  // m scaled by a 1x1 node.
  Var mul_scalar(Var m, Var s);
  // Row i of a as a 1 x d node.
  Var row(Var a, std::size_t i);
  // Stack 1 x d rows into an n x d node.
  Var stack_rows(std::span<const Var> rows);
  // Collect 1x1 nodes into a k x 1 node.
  Var gather_scalars(std::span<const Var> scalars);
  // weights (k x 1) and k rows (1 x d) -> sum_k w_k * row_k (1 x d).
  Var weighted_row_sum(Var weights, std::span<const Var> rows);
  // Row i of m scaled by weights[i]; weights is n x 1.
  Var scale_rows(Var m, Var weights);
  // LeakyReLU(attn . [ui || uj]) for 1 x d endpoint embeddings and a
  // 2d x 1 attention vector; the pre-softmax edge score.
  Var edge_score(Var attn, Var ui, Var uj, double slope);
  // Cosine similarity of two same-length vectors (1 x d or d x 1) -> 1x1.
  // Zero-norm operands throw DomainError.
  Var cosine(Var a, Var b);
  // -log softmax(logits)[label] for 1 x k logits -> 1x1.
  Var cross_entropy_logits(Var logits, int label);

  // Reverse sweep from a 1x1 output. Throws ContractError on non-scalar
  // outputs or when called twice. Afterwards every node reachable from the
  // output has its gradient populated; everything else reads as zeros.
  void backward(Var output);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;

  std::size_t num_params() const { return params_.size(); }
  Var param_at(std::size_t i) const;
  std::size_t num_nodes() const;

 private:
  enum class Op : std::uint8_t;
  struct Node;

  Var push(Op op, Matrix value, std::vector<int> parents, double a = 0.0, int i0 = 0);
  int check(Var v, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<int> params_;
  bool backward_done_ = false;
  Matrix zero_;
};

// Scalar function of a parameter list, used by the finite-difference checker.
using ScalarFn = std::function<double(const std::vector<Matrix>&)>;

// Program that registers `params` on a fresh tape and returns the 1x1 output.
using TapeProgram = std::function<Var(GradTape&, const std::vector<Var>&)>;

// Central-difference check of `analytic` against f around `params`.
// Returns the max entrywise relative error with denominator
// max(|g|, |g_fd|, 1e-8). eps must lie in (0, 1e-2]; a non-finite f at any
// probe point throws NumericError.
double finite_diff_check(const ScalarFn& f, const std::vector<Matrix>& params,
                         const std::vector<Matrix>& analytic, double eps);

// Convenience overload: runs `program` on a tape to obtain both the scalar
// value and the analytic gradients, then probes the same program.
double finite_diff_check(const TapeProgram& program, const std::vector<Matrix>& params,
                         double eps);

}  // namespace perfgat::num
