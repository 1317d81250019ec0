#include <benchmark/benchmark.h>

#include "dopf/admm.hpp"
#include "dopf/local.hpp"
#include "dopf/parse.hpp"
#include "dopf/qp.hpp"

namespace {

const char* const kCase9 = DOPF_CASES_DIR "/case9.m";

dopf::Network case9() { return dopf::parse_case_file(kCase9); }

struct BusFixture {
  dopf::Network net = case9();
  dopf::AdmittanceMatrix Y = dopf::build_admittance(net);
  dopf::LocalProblem lp = dopf::local_problem(net, Y, 3);
  Eigen::VectorXd v_flat;
  Eigen::VectorXd y;
  Eigen::VectorXd v_target;
  std::vector<dopf::Halfspace> donut;
  dopf::SubOptions opts;

  BusFixture() {
    const int nb = net.n_buses();
    v_flat = Eigen::VectorXd::Zero(2 * nb);
    v_flat.head(nb).setOnes();
    const int nn = lp.n_neighbors();
    y = Eigen::VectorXd::Zero(2 * nn);
    v_target.resize(2 * nn);
    for (int r = 0; r < nn; ++r) {
      v_target(r) = v_flat(lp.neighbors[r]);
      v_target(nn + r) = v_flat(nb + lp.neighbors[r]);
    }
    donut.resize(nn);
    for (int r = 0; r < nn; ++r)
      donut[r] =
          dopf::donut_halfspace(v_target(r), v_target(nn + r), lp.v_min(r));
  }
};

}  // namespace

static void BM_ParseCase9(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(case9());
}
BENCHMARK(BM_ParseCase9);

static void BM_BuildAdmittance(benchmark::State& state) {
  const dopf::Network net = case9();
  for (auto _ : state) benchmark::DoNotOptimize(dopf::build_admittance(net));
}
BENCHMARK(BM_BuildAdmittance);

static void BM_SolveQp(benchmark::State& state) {
  BusFixture fx;
  const Eigen::VectorXd zhat = dopf::initialize_zhat(fx.lp, fx.v_flat);
  const dopf::InnerResult inner = dopf::solve_convex_inner(
      fx.lp, zhat, fx.y, fx.v_target, 1e6, fx.donut, fx.opts);
  for (auto _ : state) benchmark::DoNotOptimize(dopf::solve_qp(inner.qp));
}
BENCHMARK(BM_SolveQp);

static void BM_Algorithm2(benchmark::State& state) {
  BusFixture fx;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        dopf::run_algorithm2(fx.lp, fx.y, fx.v_flat, 1e6, fx.opts));
}
BENCHMARK(BM_Algorithm2);

static void BM_AdmmIteration(benchmark::State& state) {
  const dopf::Network net = case9();
  dopf::AdmmConfig cfg;
  cfg.max_admm_iters = 1;
  for (auto _ : state) benchmark::DoNotOptimize(dopf::run_admm(net, cfg));
}
BENCHMARK(BM_AdmmIteration);

BENCHMARK_MAIN();
