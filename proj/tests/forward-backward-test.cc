// tests/forward-backward-test.cc

#include <cmath>
#include <random>

#include "cts/base.h"
#include "cts/forward-backward.h"
#include "doctest.h"
#include "test-util.h"

using namespace cts;
using namespace cts::testing;

namespace {

struct PathOracle {
  double log_total = kLogZero;
  Matrix gamma;
};

// Exhaustive sum over every arc path of exactly T frames.
PathOracle EnumerateOracle(const DenominatorFsa &fsa, const Matrix &x) {
  const int T = static_cast<int>(x.NumRows());
  long double total = 0.0L;
  std::vector<std::vector<long double>> g(T,
                                          std::vector<long double>(x.NumCols()));
  EnumeratePaths(fsa, T, [&](const std::vector<int32_t> &path, double lw) {
    double f = fsa.FinalLogWeight(path.back());
    if (f == kLogZero) return;
    long double w = std::exp(static_cast<long double>(lw) + f);
    for (int t = 0; t < T; ++t)
      w *= std::exp(static_cast<long double>(x(t, fsa.StateLabel(path[t + 1]))));
    total += w;
    for (int t = 0; t < T; ++t) g[t][fsa.StateLabel(path[t + 1])] += w;
  });
  PathOracle o;
  o.log_total = std::log(static_cast<double>(total));
  o.gamma.Resize(T, x.NumCols());
  for (int t = 0; t < T; ++t)
    for (size_t s = 0; s < x.NumCols(); ++s)
      o.gamma(t, s) = static_cast<double>(g[t][s] / total);
  return o;
}

Matrix RandomLoglikes(std::mt19937_64 &rng, size_t T, size_t S,
                      double lo = -3.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix x(T, S);
  for (auto &v : x.Data()) v = u(rng);
  return x;
}

// start -> a1 -> a2 with all self-loops and exits at 0.5.
DenominatorFsa ThreeStateGraph() {
  return DenominatorFsa(3, 0,
                        {{0, 1, 0, 0.0},
                         {1, 1, 0, std::log(0.5)},
                         {1, 2, 1, std::log(0.5)},
                         {2, 2, 1, std::log(0.5)}},
                        {kLogZero, kLogZero, std::log(0.5)});
}

// start -> A | B with equal weight; each loops or ends with 0.5.
DenominatorFsa SymmetricGraph() {
  return DenominatorFsa(3, 0,
                        {{0, 1, 0, std::log(0.5)},
                         {0, 2, 1, std::log(0.5)},
                         {1, 1, 0, std::log(0.5)},
                         {2, 2, 1, std::log(0.5)}},
                        {kLogZero, std::log(0.5), std::log(0.5)});
}

double RowSum(const Matrix &m, size_t t) {
  double s = 0.0;
  for (double v : m.Row(t)) s += v;
  return s;
}

}  // namespace

TEST_CASE("forward on hand-checkable graphs") {
  DenominatorFsa one(2, 0, {{0, 1, 0, 0.0}, {1, 1, 0, 0.0}}, {kLogZero, 0.0});
  Matrix zeros(3, 1, 0.0);
  CHECK(LogTotalFromAlpha(one, Forward(one, zeros)) == 0.0);

  // Only start->a1->a2 ends in a final state after two frames:
  // 1 * 0.5 (exit a1) * 0.5 (final a2) = 0.25.
  auto g3 = ThreeStateGraph();
  Matrix x(2, 2, 0.0);
  CHECK(LogTotalFromAlpha(g3, Forward(g3, x)) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-14));
  Matrix uniform(2, 2, std::log(0.5));
  CHECK(LogTotalFromAlpha(g3, Forward(g3, uniform)) ==
        doctest::Approx(std::log(0.25 * 0.25)).epsilon(1e-14));

  CHECK_THROWS_AS(Forward(g3, Matrix(0, 2)), cts::Error);
  CHECK_THROWS_AS(Forward(g3, Matrix(2, 1)), cts::Error);  // label 1 out of range
  CHECK_THROWS_AS(Backward(g3, Matrix(0, 2)), cts::Error);
}

TEST_CASE("backward mirrors forward") {
  auto g3 = ThreeStateGraph();
  Matrix x(2, 2, 0.0);
  auto beta = Backward(g3, x);
  CHECK(beta(0, g3.Start()) == doctest::Approx(std::log(0.25)));
  for (int32_t j = 0; j < g3.NumStates(); ++j)
    CHECK(beta(2, j) == g3.FinalLogWeight(j));

  Matrix single(1, 2, 0.0);
  auto b1 = Backward(g3, single);
  for (int32_t j = 0; j < g3.NumStates(); ++j)
    CHECK(b1(1, j) == g3.FinalLogWeight(j));
}

TEST_CASE("posteriors on symmetric graphs") {
  DenominatorFsa one(2, 0, {{0, 1, 0, 0.0}, {1, 1, 0, std::log(0.5)}},
                     {kLogZero, std::log(0.5)});
  auto r1 = ForwardBackward(one, Matrix(4, 1, -0.3));
  for (double v : r1.gamma.Data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

  auto r2 = ForwardBackward(SymmetricGraph(), Matrix(5, 2, -1.0));
  for (double v : r2.gamma.Data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("forward-backward equals exhaustive path enumeration") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 8;
    auto fsa = RandomFsa(rng, n, 5);
    auto x = RandomLoglikes(rng, 6, 5);
    auto oracle = EnumerateOracle(fsa, x);
    for (auto kernel : {FbKernel::kLog, FbKernel::kScaled}) {
      FbOptions opts{kernel};
      auto alpha = Forward(fsa, x, opts);
      auto beta = Backward(fsa, x, opts);
      auto res = Posteriors(fsa, x, alpha, beta);
      CHECK(ApproxEqual(res.log_total, oracle.log_total, 1e-10));
      CHECK(ApproxEqual(beta(0, fsa.Start()), oracle.log_total, 1e-10));
      for (size_t t = 0; t <= x.NumRows(); ++t) {
        std::vector<double> terms;
        for (int32_t j = 0; j < n; ++j) terms.push_back(alpha(t, j) + beta(t, j));
        CHECK(std::abs(LogSumExp(terms) - res.log_total) <= 1e-10);
      }
      for (size_t i = 0; i < res.gamma.Data().size(); ++i)
        CHECK(std::abs(res.gamma.Data()[i] - oracle.gamma.Data()[i]) <=
              1e-9 * std::max(1e-3, oracle.gamma.Data()[i]));
      for (size_t t = 0; t < x.NumRows(); ++t)
        CHECK(std::abs(RowSum(res.gamma, t) - 1.0) <= 1e-8);
    }
  }
}

TEST_CASE("adding a constant to a frame shifts the total only") {
  std::mt19937_64 rng(7);
  auto fsa = RandomFsa(rng, 10, 4);
  auto x = RandomLoglikes(rng, 6, 4);
  auto base = ForwardBackward(fsa, x);
  Matrix shifted = x;
  for (auto &v : shifted.Row(3)) v += 2.5;
  auto res = ForwardBackward(fsa, shifted);
  CHECK(std::abs(res.log_total - (base.log_total + 2.5)) <= 1e-10);
  for (size_t i = 0; i < res.gamma.Data().size(); ++i)
    CHECK(std::abs(res.gamma.Data()[i] - base.gamma.Data()[i]) <= 1e-10);
}

TEST_CASE("scaled kernel agrees with log kernel on compiled graphs") {
  Inventory inv = MakeToyInventory(5, 2);
  auto corpus = RandomCorpus(17, 40, 5, 2, 6, 4);
  auto fsa = Compile(Estimate(corpus, inv), CountTransitions(corpus), inv);
  std::mt19937_64 rng(3);
  auto x = RandomLoglikes(rng, 200, inv.NumSenones(), -8.0, 0.0);
  auto a = ForwardBackward(fsa, x, {FbKernel::kLog});
  auto b = ForwardBackward(fsa, x, {FbKernel::kScaled});
  CHECK(ApproxEqual(a.log_total, b.log_total, 1e-10));
  double worst = 0.0;
  for (size_t i = 0; i < a.gamma.Data().size(); ++i)
    worst = std::max(worst, std::abs(a.gamma.Data()[i] - b.gamma.Data()[i]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("numerator chain") {
  TransitionModel tm({{0, 0.6}, {1, 0.25}});
  AlignedUtterance ali{"u", {0, 0, 1}};
  auto num = MakeNumeratorChain(ali, 3, 2, &tm);
  CHECK(num.posterior(0, 0) == 1.0);
  CHECK(num.posterior(1, 0) == 1.0);
  CHECK(num.posterior(2, 1) == 1.0);
  for (size_t t = 0; t < 3; ++t) CHECK(RowSum(num.posterior, t) == 1.0);
  // self(a) * exit(a) * exit(b) = 0.6 * 0.4 * 0.75
  Matrix uniform(3, 2, std::log(0.5));
  CHECK(NumeratorLogProb(num, uniform) ==
        doctest::Approx(3 * std::log(0.5) + std::log(0.6 * 0.4 * 0.75)));
  auto plain = MakeNumeratorChain(ali, 3, 2, nullptr,
                                  NumeratorWeights::kLikelihoodOnly);
  CHECK(NumeratorLogProb(plain, uniform) == doctest::Approx(3 * std::log(0.5)));
  CHECK_THROWS_AS(MakeNumeratorChain(ali, 4, 2, &tm), cts::Error);
  CHECK_THROWS_AS(MakeNumeratorChain(ali, 3, 2, nullptr), cts::Error);
}

TEST_CASE("MMI statistics") {
  // Two frames on the symmetric graph with alignment [A, A].
  //   den: A A  = .5*.5*.5 * .7*.6 = .0525
  //        B B  = .5*.5*.5 * .3*.4 = .015
  //   num: self(A) exit(A) * .7 * .6 = .25 * .42 = .105
  auto g = SymmetricGraph();
  Matrix x(2, 2);
  x(0, 0) = std::log(0.7);
  x(0, 1) = std::log(0.3);
  x(1, 0) = std::log(0.6);
  x(1, 1) = std::log(0.4);
  auto tm = TransitionModelFromGraph(g);
  auto num = MakeNumeratorChain({"u", {0, 0}}, 2, 2, &tm);
  auto den = ForwardBackward(g, x);
  auto stats = ComputeMmiStats(num, den, x);
  CHECK(stats.objective == doctest::Approx(std::log(0.105 / 0.0675)).epsilon(1e-13));
  CHECK(stats.grad(0, 0) == doctest::Approx(1.0 - 0.0525 / 0.0675));
  for (size_t t = 0; t < 2; ++t) CHECK(std::abs(RowSum(stats.grad, t)) <= 1e-12);

  FbResult fake{-1.0, num.posterior};
  auto degenerate = ComputeMmiStats(num, fake, x);
  for (double v : degenerate.grad.Data()) CHECK(v == 0.0);
  CHECK(degenerate.objective == doctest::Approx(NumeratorLogProb(num, x) + 1.0));

  CHECK_THROWS_AS(ComputeMmiStats(num, FbResult{0.0, Matrix(3, 2)}, x), cts::Error);
}

TEST_CASE("cross-entropy regularisation") {
  auto g = SymmetricGraph();
  Matrix x(3, 2, -0.7);
  auto tm = TransitionModelFromGraph(g);
  auto num = MakeNumeratorChain({"u", {1, 1, 1}}, 3, 2, &tm);
  auto stats = ComputeMmiStats(num, ForwardBackward(g, x), x);
  auto same = CeRegularize(stats, num, x, 0.0);
  CHECK(same.grad == stats.grad);
  CHECK(same.objective == stats.objective);

  auto reg = CeRegularize(stats, num, x, 0.1);
  for (size_t t = 0; t < 3; ++t) {
    CHECK(reg.grad(t, 1) - stats.grad(t, 1) == doctest::Approx(0.1 * 0.5));
    CHECK(reg.grad(t, 0) - stats.grad(t, 0) == doctest::Approx(-0.1 * 0.5));
  }
  CHECK(reg.objective - stats.objective == doctest::Approx(0.1 * 3 * std::log(0.5)));
  CHECK_THROWS_AS(CeRegularize(stats, num, x, -0.1), cts::Error);
}

TEST_CASE("MMI + CE gradient matches central differences") {
  Inventory inv = MakeToyInventory(3);
  auto corpus = RandomCorpus(5, 10, 3, 1, 3, 3);
  auto fsa = Compile(Estimate(corpus, inv), CountTransitions(corpus), inv);
  auto tm = CountTransitions(corpus);
  std::mt19937_64 rng(1);
  const AlignedUtterance &ali = corpus[0];
  auto x = RandomLoglikes(rng, ali.frames.size(), inv.NumSenones());
  auto objective = [&](const Matrix &m) {
    auto num = MakeNumeratorChain(ali, m.NumRows(), m.NumCols(), &tm);
    return CeRegularize(ComputeMmiStats(num, ForwardBackward(fsa, m), m), num, m,
                        0.1);
  };
  auto stats = objective(x);
  const double h = 1e-5;
  for (size_t i = 0; i < x.Data().size(); ++i) {
    Matrix plus = x, minus = x;
    plus.Data()[i] += h;
    minus.Data()[i] -= h;
    double fd = (objective(plus).objective - objective(minus).objective) / (2 * h);
    double g = stats.grad.Data()[i];
    if (std::abs(g) > 1e-6) CHECK(std::abs(fd - g) <= 1e-4 * std::abs(g));
  }
}

TEST_CASE("batch results do not depend on thread count") {
  Inventory inv = MakeToyInventory(4, 2);
  auto corpus = RandomCorpus(9, 12, 4, 2, 5, 4);
  auto fsa = Compile(Estimate(corpus, inv), CountTransitions(corpus), inv);
  auto tm = CountTransitions(corpus);
  std::mt19937_64 rng(4);
  std::vector<Matrix> xs;
  for (const auto &u : corpus)
    xs.push_back(RandomLoglikes(rng, u.frames.size(), inv.NumSenones()));
  MmiOptions serial;
  MmiOptions parallel;
  parallel.num_threads = 4;
  auto a = ComputeMmiBatch(fsa, tm, corpus, xs, serial);
  auto b = ComputeMmiBatch(fsa, tm, corpus, xs, parallel);
  CHECK(a.objective == b.objective);
  CHECK(a.frames == b.frames);
  for (size_t u = 0; u < corpus.size(); ++u)
    CHECK(a.per_utterance[u].grad == b.per_utterance[u].grad);
  std::vector<Matrix> short_list(xs.begin(), xs.end() - 1);
  CHECK_THROWS_AS(ComputeMmiBatch(fsa, tm, corpus, short_list, serial), cts::Error);
}

TEST_CASE("bench report") {
  auto g = SymmetricGraph();
  std::vector<Matrix> chunks(3, Matrix(50, 2, -1.0));
  auto rep = BenchThroughput(g, chunks);
  CHECK(rep.frames == 150);
  CHECK(rep.states == 3);
  CHECK(rep.arcs == 4);
  CHECK(rep.senones == 2);
  CHECK(rep.seconds >= 0.0);
  auto json = rep.ToJson();
  for (const char *key : {"frames", "states", "arcs", "senones", "kernel",
                          "seconds", "frames_per_second", "realtime_factor"})
    CHECK(json.find(std::string("\"") + key + "\"") != std::string::npos);
}
