#include "perfgat/grad_tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "perfgat/errors.hpp"

namespace perfgat::num {

enum class GradTape::Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kHadamard,
  kScale,
  kMatmul,
  kAddRowBias,
  kLeakyRelu,
  kTanh,
  kSigmoid,
  kSoftmax,
  kSum,
  kMeanAll,
  kMeanRows,
  kDot,
  kMulScalar,
  kRow,
  kStackRows,
  kGatherScalars,
  kWeightedRowSum,
  kScaleRows,
  kEdgeScore,
  kCosine,
  kCrossEntropyLogits,
};

struct GradTape::Node {
  Op op;
  Matrix value;
  Matrix grad;  // allocated by backward()
  std::vector<int> parents;
  double a = 0.0;  // op-specific scalar (slope, ...)
  int i0 = 0;      // op-specific index (row, label, ...)
};

GradTape::GradTape() { nodes_.reserve(1024); }

GradTape::~GradTape() = default;

std::size_t GradTape::num_nodes() const { return nodes_.size(); }

Var GradTape::push(Op op, Matrix value, std::vector<int> parents, double a, int i0) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.a = a;
  n.i0 = i0;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

int GradTape::check(Var v, const char* op) const {
  if (v.tape_ != this || v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size())) {
    throw ContractError(std::string(op) + ": Var does not belong to this tape");
  }
  return v.id_;
}

Var GradTape::constant(Matrix v) { return push(Op::kLeaf, std::move(v), {}); }

Var GradTape::param(Matrix v) {
  Var out = push(Op::kLeaf, std::move(v), {});
  params_.push_back(out.id_);
  return out;
}

Var GradTape::param_at(std::size_t i) const {
  return Var(const_cast<GradTape*>(this), params_.at(i));
}

const Matrix& GradTape::value(Var v) const { return nodes_[check(v, "value")].value; }

const Matrix& GradTape::grad(Var v) const {
  const Node& n = nodes_[check(v, "grad")];
  if (n.grad.size() == 0 && n.value.size() != 0) {
    // backward() not run or node unreachable: present zeros of the right shape.
    const_cast<Node&>(n).grad = Matrix(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

namespace {
void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + " shape mismatch: " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}
}  // namespace

Var GradTape::add(Var a, Var b) {
  const int ia = check(a, "add"), ib = check(b, "add");
  require_same_shape(nodes_[ia].value, nodes_[ib].value, "add");
  return push(Op::kAdd, num::add(nodes_[ia].value, nodes_[ib].value), {ia, ib});
}

Var GradTape::sub(Var a, Var b) {
  const int ia = check(a, "sub"), ib = check(b, "sub");
  require_same_shape(nodes_[ia].value, nodes_[ib].value, "sub");
  return push(Op::kSub, num::sub(nodes_[ia].value, nodes_[ib].value), {ia, ib});
}

Var GradTape::hadamard(Var a, Var b) {
  const int ia = check(a, "hadamard"), ib = check(b, "hadamard");
  require_same_shape(nodes_[ia].value, nodes_[ib].value, "hadamard");
  return push(Op::kHadamard, num::hadamard(nodes_[ia].value, nodes_[ib].value), {ia, ib});
}

Var GradTape::scale(Var a, double s) {
  const int ia = check(a, "scale");
  return push(Op::kScale, num::scale(nodes_[ia].value, s), {ia}, s);
}

Var GradTape::matmul(Var a, Var b) {
  const int ia = check(a, "matmul"), ib = check(b, "matmul");
  return push(Op::kMatmul, num::matmul(nodes_[ia].value, nodes_[ib].value), {ia, ib});
}

Var GradTape::add_row_bias(Var m, Var bias) {
  const int im = check(m, "add_row_bias"), ib = check(bias, "add_row_bias");
  const Matrix& mm = nodes_[im].value;
  const Matrix& bb = nodes_[ib].value;
  if (bb.rows() != 1 || bb.cols() != mm.cols()) {
    throw DimensionError("add_row_bias: bias " + bb.shape_str() + " for matrix " +
                         mm.shape_str());
  }
  Matrix out = mm;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bb(0, j);
  return push(Op::kAddRowBias, std::move(out), {im, ib});
}

Var GradTape::leaky_relu(Var a, double slope) {
  const int ia = check(a, "leaky_relu");
  if (!(slope > 0.0 && slope < 1.0)) {
    throw DomainError("leaky_relu slope must lie in (0,1)");
  }
  Matrix out = nodes_[ia].value;
  for (double& v : out.data()) v = v >= 0.0 ? v : slope * v;
  return push(Op::kLeakyRelu, std::move(out), {ia}, slope);
}

Var GradTape::tanh_act(Var a) {
  const int ia = check(a, "tanh_act");
  Matrix out = nodes_[ia].value;
  for (double& v : out.data()) v = std::tanh(v);
  return push(Op::kTanh, std::move(out), {ia});
}

Var GradTape::sigmoid(Var a) {
  const int ia = check(a, "sigmoid");
  Matrix out = nodes_[ia].value;
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return push(Op::kSigmoid, std::move(out), {ia});
}

Var GradTape::softmax(Var a) {
  const int ia = check(a, "softmax");
  const Matrix& in = nodes_[ia].value;
  if (in.size() == 0) throw DomainError("softmax of empty input");
  Matrix out = in;
  double mx = out.data()[0];
  for (double v : out.data()) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : out.data()) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out.data()) v /= sum;
  return push(Op::kSoftmax, std::move(out), {ia});
}

Var GradTape::sum(Var a) {
  const int ia = check(a, "sum");
  double s = 0.0;
  for (double v : nodes_[ia].value.data()) s += v;
  return push(Op::kSum, Matrix(1, 1, {s}), {ia});
}

Var GradTape::mean_all(Var a) {
  const int ia = check(a, "mean_all");
  const Matrix& in = nodes_[ia].value;
  if (in.size() == 0) throw DomainError("mean_all of empty input");
  double s = 0.0;
  for (double v : in.data()) s += v;
  return push(Op::kMeanAll, Matrix(1, 1, {s / static_cast<double>(in.size())}), {ia});
}

Var GradTape::mean_rows(Var a) {
  const int ia = check(a, "mean_rows");
  const Matrix& in = nodes_[ia].value;
  if (in.rows() == 0) throw DomainError("mean_rows of empty input");
  Matrix out(1, in.cols());
  for (std::size_t i = 0; i < in.rows(); ++i)
    for (std::size_t j = 0; j < in.cols(); ++j) out(0, j) += in(i, j);
  for (double& v : out.data()) v /= static_cast<double>(in.rows());
  return push(Op::kMeanRows, std::move(out), {ia});
}

Var GradTape::dot(Var a, Var b) {
  const int ia = check(a, "dot"), ib = check(b, "dot");
  const Matrix& ma = nodes_[ia].value;
  const Matrix& mb = nodes_[ib].value;
  if (ma.size() != mb.size()) {
    throw DimensionError("dot size mismatch: " + ma.shape_str() + " vs " + mb.shape_str());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) s += ma.data()[i] * mb.data()[i];
  return push(Op::kDot, Matrix(1, 1, {s}), {ia, ib});
}

Var GradTape::mul_scalar(Var m, Var s) {
  const int im = check(m, "mul_scalar"), is = check(s, "mul_scalar");
  const Matrix& ms = nodes_[is].value;
  if (ms.size() != 1) throw ContractError("mul_scalar: scalar operand must be 1x1");
  return push(Op::kMulScalar, num::scale(nodes_[im].value, ms.data()[0]), {im, is});
}

Var GradTape::row(Var a, std::size_t i) {
  const int ia = check(a, "row");
  const Matrix& in = nodes_[ia].value;
  if (i >= in.rows()) throw DimensionError("row index out of range");
  Matrix out(1, in.cols());
  for (std::size_t j = 0; j < in.cols(); ++j) out(0, j) = in(i, j);
  return push(Op::kRow, std::move(out), {ia}, 0.0, static_cast<int>(i));
}

Var GradTape::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ContractError("stack_rows of zero rows");
  std::vector<int> parents;
  parents.reserve(rows.size());
  const Matrix& first = nodes_[check(rows[0], "stack_rows")].value;
  Matrix out(rows.size(), first.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int ir = check(rows[r], "stack_rows");
    const Matrix& m = nodes_[ir].value;
    if (m.rows() != 1 || m.cols() != first.cols()) {
      throw DimensionError("stack_rows: row " + std::to_string(r) + " has shape " +
                           m.shape_str());
    }
    for (std::size_t j = 0; j < m.cols(); ++j) out(r, j) = m(0, j);
    parents.push_back(ir);
  }
  return push(Op::kStackRows, std::move(out), std::move(parents));
}

Var GradTape::gather_scalars(std::span<const Var> scalars) {
  if (scalars.empty()) throw ContractError("gather_scalars of zero nodes");
  std::vector<int> parents;
  parents.reserve(scalars.size());
  Matrix out(scalars.size(), 1);
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    const int ik = check(scalars[k], "gather_scalars");
    if (nodes_[ik].value.size() != 1) {
      throw ContractError("gather_scalars: operand " + std::to_string(k) + " is not 1x1");
    }
    out(k, 0) = nodes_[ik].value.data()[0];
    parents.push_back(ik);
  }
  return push(Op::kGatherScalars, std::move(out), std::move(parents));
}

Var GradTape::weighted_row_sum(Var weights, std::span<const Var> rows) {
  const int iw = check(weights, "weighted_row_sum");
  const Matrix& w = nodes_[iw].value;
  if (w.cols() != 1 || w.rows() != rows.size()) {
    throw DimensionError("weighted_row_sum: " + std::to_string(rows.size()) +
                         " rows for weights " + w.shape_str());
  }
  if (rows.empty()) throw ContractError("weighted_row_sum of zero rows");
  std::vector<int> parents;
  parents.reserve(rows.size() + 1);
  parents.push_back(iw);
  const std::size_t d = nodes_[check(rows[0], "weighted_row_sum")].value.cols();
  Matrix out(1, d);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int ik = check(rows[k], "weighted_row_sum");
    const Matrix& r = nodes_[ik].value;
    if (r.rows() != 1 || r.cols() != d) {
      throw DimensionError("weighted_row_sum: row " + std::to_string(k) + " has shape " +
                           r.shape_str());
    }
    for (std::size_t j = 0; j < d; ++j) out(0, j) += w(k, 0) * r(0, j);
    parents.push_back(ik);
  }
  return push(Op::kWeightedRowSum, std::move(out), std::move(parents));
}

Var GradTape::scale_rows(Var m, Var weights) {
  const int im = check(m, "scale_rows"), iw = check(weights, "scale_rows");
  const Matrix& mm = nodes_[im].value;
  const Matrix& w = nodes_[iw].value;
  if (w.cols() != 1 || w.rows() != mm.rows()) {
    throw DimensionError("scale_rows: weights " + w.shape_str() + " for matrix " +
                         mm.shape_str());
  }
  Matrix out = mm;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= w(i, 0);
  return push(Op::kScaleRows, std::move(out), {im, iw});
}

Var GradTape::edge_score(Var attn, Var ui, Var uj, double slope) {
  const int ia = check(attn, "edge_score");
  const int ii = check(ui, "edge_score"), ij = check(uj, "edge_score");
  const Matrix& w = nodes_[ia].value;
  const Matrix& a = nodes_[ii].value;
  const Matrix& b = nodes_[ij].value;
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols()) {
    throw DimensionError("edge_score: endpoint shapes " + a.shape_str() + ", " + b.shape_str());
  }
  if (w.cols() != 1 || w.rows() != 2 * a.cols()) {
    throw DimensionError("edge_score: attention vector " + w.shape_str() + " for dim " +
                         std::to_string(a.cols()));
  }
  if (!(slope > 0.0 && slope < 1.0)) throw DomainError("edge_score slope must lie in (0,1)");
  const std::size_t d = a.cols();
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += w(k, 0) * a(0, k);
  for (std::size_t k = 0; k < d; ++k) s += w(d + k, 0) * b(0, k);
  const double y = s >= 0.0 ? s : slope * s;
  return push(Op::kEdgeScore, Matrix(1, 1, {y}), {ia, ii, ij}, slope);
}

Var GradTape::cosine(Var a, Var b) {
  const int ia = check(a, "cosine"), ib = check(b, "cosine");
  const Matrix& ma = nodes_[ia].value;
  const Matrix& mb = nodes_[ib].value;
  if (ma.size() != mb.size()) {
    throw DimensionError("cosine size mismatch: " + ma.shape_str() + " vs " + mb.shape_str());
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    ab += ma.data()[i] * mb.data()[i];
    aa += ma.data()[i] * ma.data()[i];
    bb += mb.data()[i] * mb.data()[i];
  }
  if (aa == 0.0 || bb == 0.0) throw DomainError("cosine of zero-norm vector");
  const double c = ab / std::sqrt(aa * bb);
  return push(Op::kCosine, Matrix(1, 1, {c}), {ia, ib});
}

Var GradTape::cross_entropy_logits(Var logits, int label) {
  const int il = check(logits, "cross_entropy_logits");
  const Matrix& z = nodes_[il].value;
  if (z.rows() != 1 || z.cols() < 2) {
    throw ContractError("cross_entropy_logits expects a 1 x k logits row, got " + z.shape_str());
  }
  if (label < 0 || static_cast<std::size_t>(label) >= z.cols()) {
    throw ContractError("cross_entropy_logits label out of range");
  }
  double mx = z(0, 0);
  for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(0, j));
  double se = 0.0;
  for (std::size_t j = 0; j < z.cols(); ++j) se += std::exp(z(0, j) - mx);
  const double loss = std::log(se) + mx - z(0, static_cast<std::size_t>(label));
  return push(Op::kCrossEntropyLogits, Matrix(1, 1, {loss}), {il}, 0.0, label);
}

void GradTape::backward(Var output) {
  const int iout = check(output, "backward");
  if (backward_done_) throw ContractError("backward already run on this tape");
  if (nodes_[iout].value.size() != 1) {
    throw ContractError("backward requires a scalar (1x1) output, got " +
                        nodes_[iout].value.shape_str());
  }
  backward_done_ = true;
  for (Node& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
  nodes_[iout].grad(0, 0) = 1.0;

  for (int id = iout; id >= 0; --id) {
    Node& n = nodes_[id];
    bool any = false;
    for (double g : n.grad.data()) {
      if (g != 0.0) {
        any = true;
        break;
      }
    }
    if (!any) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        Matrix& gb = nodes_[n.parents[1]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i];
          gb.data()[i] += g.data()[i];
        }
        break;
      }
      case Op::kSub: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        Matrix& gb = nodes_[n.parents[1]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i];
          gb.data()[i] -= g.data()[i];
        }
        break;
      }
      case Op::kHadamard: {
        const Matrix& va = nodes_[n.parents[0]].value;
        const Matrix& vb = nodes_[n.parents[1]].value;
        Matrix& ga = nodes_[n.parents[0]].grad;
        Matrix& gb = nodes_[n.parents[1]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i] * vb.data()[i];
          gb.data()[i] += g.data()[i] * va.data()[i];
        }
        break;
      }
      case Op::kScale: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += n.a * g.data()[i];
        break;
      }
      case Op::kMatmul: {
        const Matrix& va = nodes_[n.parents[0]].value;
        const Matrix& vb = nodes_[n.parents[1]].value;
        Matrix& ga = nodes_[n.parents[0]].grad;
        Matrix& gb = nodes_[n.parents[1]].grad;
        // ga += g * vb^T ; gb += va^T * g
        for (std::size_t i = 0; i < va.rows(); ++i)
          for (std::size_t j = 0; j < vb.cols(); ++j) {
            const double gij = g(i, j);
            if (gij == 0.0) continue;
            for (std::size_t k = 0; k < va.cols(); ++k) {
              ga(i, k) += gij * vb(k, j);
              gb(k, j) += va(i, k) * gij;
            }
          }
        break;
      }
      case Op::kAddRowBias: {
        Matrix& gm = nodes_[n.parents[0]].grad;
        Matrix& gb = nodes_[n.parents[1]].grad;
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) {
            gm(i, j) += g(i, j);
            gb(0, j) += g(i, j);
          }
        break;
      }
      case Op::kLeakyRelu: {
        const Matrix& vin = nodes_[n.parents[0]].value;
        Matrix& ga = nodes_[n.parents[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i] * (vin.data()[i] >= 0.0 ? 1.0 : n.a);
        }
        break;
      }
      case Op::kTanh: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.data()[i];
          ga.data()[i] += g.data()[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::kSigmoid: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.data()[i];
          ga.data()[i] += g.data()[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::kSoftmax: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        double gy = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) gy += g.data()[i] * n.value.data()[i];
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += n.value.data()[i] * (g.data()[i] - gy);
        }
        break;
      }
      case Op::kSum: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        const double gs = g.data()[0];
        for (double& v : ga.data()) v += gs;
        break;
      }
      case Op::kMeanAll: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        const double gs = g.data()[0] / static_cast<double>(ga.size());
        for (double& v : ga.data()) v += gs;
        break;
      }
      case Op::kMeanRows: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        const double inv = 1.0 / static_cast<double>(ga.rows());
        for (std::size_t i = 0; i < ga.rows(); ++i)
          for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j) * inv;
        break;
      }
      case Op::kDot: {
        const Matrix& va = nodes_[n.parents[0]].value;
        const Matrix& vb = nodes_[n.parents[1]].value;
        Matrix& ga = nodes_[n.parents[0]].grad;
        Matrix& gb = nodes_[n.parents[1]].grad;
        const double gs = g.data()[0];
        for (std::size_t i = 0; i < va.size(); ++i) {
          ga.data()[i] += gs * vb.data()[i];
          gb.data()[i] += gs * va.data()[i];
        }
        break;
      }
      case Op::kMulScalar: {
        const Matrix& vm = nodes_[n.parents[0]].value;
        const double s = nodes_[n.parents[1]].value.data()[0];
        Matrix& gm = nodes_[n.parents[0]].grad;
        Matrix& gs = nodes_[n.parents[1]].grad;
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          gm.data()[i] += s * g.data()[i];
          acc += g.data()[i] * vm.data()[i];
        }
        gs.data()[0] += acc;
        break;
      }
      case Op::kRow: {
        Matrix& ga = nodes_[n.parents[0]].grad;
        const std::size_t i = static_cast<std::size_t>(n.i0);
        for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(0, j);
        break;
      }
      case Op::kStackRows: {
        for (std::size_t r = 0; r < n.parents.size(); ++r) {
          Matrix& gr = nodes_[n.parents[r]].grad;
          for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(r, j);
        }
        break;
      }
      case Op::kGatherScalars: {
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
          nodes_[n.parents[k]].grad.data()[0] += g(k, 0);
        }
        break;
      }
      case Op::kWeightedRowSum: {
        const Matrix& w = nodes_[n.parents[0]].value;
        Matrix& gw = nodes_[n.parents[0]].grad;
        for (std::size_t k = 0; k + 1 < n.parents.size(); ++k) {
          const Matrix& r = nodes_[n.parents[k + 1]].value;
          Matrix& gr = nodes_[n.parents[k + 1]].grad;
          double acc = 0.0;
          for (std::size_t j = 0; j < g.cols(); ++j) {
            acc += g(0, j) * r(0, j);
            gr(0, j) += w(k, 0) * g(0, j);
          }
          gw(k, 0) += acc;
        }
        break;
      }
      case Op::kScaleRows: {
        const Matrix& vm = nodes_[n.parents[0]].value;
        const Matrix& w = nodes_[n.parents[1]].value;
        Matrix& gm = nodes_[n.parents[0]].grad;
        Matrix& gw = nodes_[n.parents[1]].grad;
        for (std::size_t i = 0; i < vm.rows(); ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < vm.cols(); ++j) {
            gm(i, j) += w(i, 0) * g(i, j);
            acc += g(i, j) * vm(i, j);
          }
          gw(i, 0) += acc;
        }
        break;
      }
      case Op::kEdgeScore: {
        const Matrix& w = nodes_[n.parents[0]].value;
        const Matrix& ui = nodes_[n.parents[1]].value;
        const Matrix& uj = nodes_[n.parents[2]].value;
        Matrix& gw = nodes_[n.parents[0]].grad;
        Matrix& gi = nodes_[n.parents[1]].grad;
        Matrix& gj = nodes_[n.parents[2]].grad;
        const std::size_t d = ui.cols();
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += w(k, 0) * ui(0, k) + w(d + k, 0) * uj(0, k);
        const double gs = g.data()[0] * (s >= 0.0 ? 1.0 : n.a);
        for (std::size_t k = 0; k < d; ++k) {
          gw(k, 0) += gs * ui(0, k);
          gw(d + k, 0) += gs * uj(0, k);
          gi(0, k) += gs * w(k, 0);
          gj(0, k) += gs * w(d + k, 0);
        }
        break;
      }
      case Op::kCosine: {
        const Matrix& va = nodes_[n.parents[0]].value;
        const Matrix& vb = nodes_[n.parents[1]].value;
        Matrix& ga = nodes_[n.parents[0]].grad;
        Matrix& gb = nodes_[n.parents[1]].grad;
        double ab = 0.0, aa = 0.0, bb = 0.0;
        for (std::size_t i = 0; i < va.size(); ++i) {
          ab += va.data()[i] * vb.data()[i];
          aa += va.data()[i] * va.data()[i];
          bb += vb.data()[i] * vb.data()[i];
        }
        const double na = std::sqrt(aa), nb = std::sqrt(bb);
        const double c = ab / (na * nb);
        const double gs = g.data()[0];
        for (std::size_t i = 0; i < va.size(); ++i) {
          ga.data()[i] += gs * (vb.data()[i] / (na * nb) - c * va.data()[i] / aa);
          gb.data()[i] += gs * (va.data()[i] / (na * nb) - c * vb.data()[i] / bb);
        }
        break;
      }
      case Op::kCrossEntropyLogits: {
        const Matrix& z = nodes_[n.parents[0]].value;
        Matrix& gz = nodes_[n.parents[0]].grad;
        double mx = z(0, 0);
        for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(0, j));
        double se = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) se += std::exp(z(0, j) - mx);
        const double gs = g.data()[0];
        for (std::size_t j = 0; j < z.cols(); ++j) {
          const double p = std::exp(z(0, j) - mx) / se;
          gz(0, j) += gs * (p - (static_cast<int>(j) == n.i0 ? 1.0 : 0.0));
        }
        break;
      }
    }
  }
}

double finite_diff_check(const ScalarFn& f, const std::vector<Matrix>& params,
                         const std::vector<Matrix>& analytic, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw DomainError("finite_diff_check eps must lie in (0, 1e-2]");
  }
  if (analytic.size() != params.size()) {
    throw DimensionError("finite_diff_check: gradient count does not match parameter count");
  }
  std::vector<Matrix> probe = params;
  double max_rel = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!analytic[p].same_shape(params[p])) {
      throw DimensionError("finite_diff_check: gradient " + std::to_string(p) +
                           " has shape " + analytic[p].shape_str() + ", parameter is " +
                           params[p].shape_str());
    }
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = probe[p].data()[i];
      probe[p].data()[i] = orig + eps;
      const double fp = f(probe);
      probe[p].data()[i] = orig - eps;
      const double fm = f(probe);
      probe[p].data()[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericError("finite_diff_check: non-finite objective at probe point");
      }
      const double g_fd = (fp - fm) / (2.0 * eps);
      const double g = analytic[p].data()[i];
      const double denom = std::max({std::abs(g), std::abs(g_fd), 1e-8});
      max_rel = std::max(max_rel, std::abs(g - g_fd) / denom);
    }
  }
  return max_rel;
}

double finite_diff_check(const TapeProgram& program, const std::vector<Matrix>& params,
                         double eps) {
  std::vector<Matrix> analytic;
  {
    GradTape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const Matrix& p : params) vars.push_back(tape.param(p));
    Var out = program(tape, vars);
    tape.backward(out);
    for (const Var& v : vars) analytic.push_back(tape.grad(v));
  }
  const ScalarFn f = [&program](const std::vector<Matrix>& ps) {
    GradTape tape;
    std::vector<Var> vars;
    vars.reserve(ps.size());
    for (const Matrix& p : ps) vars.push_back(tape.param(p));
    Var out = program(tape, vars);
    return tape.value(out)(0, 0);
  };
  return finite_diff_check(f, params, analytic, eps);
}

}  // namespace perfgat::num
