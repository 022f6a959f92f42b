#include <benchmark/benchmark.h>

#include "perfgat/grad_tape.hpp"
#include "perfgat/matrix.hpp"
#include "perfgat/rng.hpp"

using namespace perfgat;

namespace {

num::Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  num::Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const num::Matrix a = random_matrix(rng, n, n);
  const num::Matrix b = random_matrix(rng, n, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(num::matmul(a, b));
  }
}

void BM_TapeForwardBackward(benchmark::State& state) {
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const num::Matrix w1 = random_matrix(rng, d, d);
  const num::Matrix w2 = random_matrix(rng, d, d);
  const num::Matrix x = random_matrix(rng, d, d);
  for (auto _ : state) {
    num::GradTape tape;
    const num::Var vw1 = tape.param(w1);
    const num::Var vw2 = tape.param(w2);
    const num::Var vx = tape.constant(x);
    const num::Var out =
        tape.mean_all(tape.tanh_act(tape.matmul(tape.matmul(vx, vw1), vw2)));
    tape.backward(out);
    benchmark::DoNotOptimize(tape.grad(vw1));
  }
}

void BM_Softmax(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  num::Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(num::softmax(v));
  }
}

}  // namespace

BENCHMARK(BM_Matmul)->Arg(16)->Arg(64);
BENCHMARK(BM_TapeForwardBackward)->Arg(16)->Arg(32);
BENCHMARK(BM_Softmax)->Arg(64)->Arg(4096);
