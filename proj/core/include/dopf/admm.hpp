#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dopf/local.hpp"
#include "dopf/network.hpp"

namespace dopf {

struct StopRule {
  enum class Kind { FixedIters, Consensus, Objective };
  Kind kind = Kind::FixedIters;
  double theta = 0.0;  // threshold for Consensus / Objective
};

enum class NetUpdateMode { ExactGeneral, ExactAverage, Gossip };

struct AdmmConfig {
  double rho = 1e6;
  int max_admm_iters = 1000;
  double eps_sub = 1e-10;
  int max_sub_iter = 20;
  StopRule stop;
  NetUpdateMode net_update = NetUpdateMode::ExactGeneral;
  int gossip_rounds = 200;
  unsigned seed = 0;
  double qp_tol = 1e-9;
};

struct IterRecord {
  int iter = 0;
  double objective = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  double worst_df = 0.0;
  int sub_eps_stops = 0;
  int sub_maxiter_stops = 0;
  int sub_infeasible = 0;
  double wall_ms = 0.0;
};

struct ConsensusState {
  Eigen::VectorXd v;                   // net voltages (re block, im block)
  std::vector<Eigen::VectorXd> z;      // local variables per bus
  std::vector<Eigen::VectorXd> y;      // duals per bus, aligned with v slices
};

struct AdmmResult {
  ConsensusState state;
  std::vector<LocalProblem> locals;
  std::vector<IterRecord> trace;
  int iterations = 0;
  bool unrecoverable = false;
  std::string stop_reason;  // fixed_iters | consensus | objective | iter_cap | unrecoverable
  double a_len = 0.0;       // sum of 2|N_k|
  double b_len = 0.0;       // sum of len(z_k) + 2N
  double worst_df = 0.0;    // max over the whole run
  long long sub_eps_total = 0;
  long long sub_maxiter_total = 0;
  long long sub_infeasible_total = 0;
};

using IterObserver = std::function<void(const IterRecord&)>;

AdmmResult run_admm(const Network& net, const AdmmConfig& cfg,
                    const IterObserver& observer = {});

// Net update, general exact form: per component, the degree-weighted mean of
// (copy + dual/rho).
Eigen::VectorXd net_update_general(const std::vector<LocalProblem>& lps,
                                   const std::vector<Eigen::VectorXd>& z,
                                   const std::vector<Eigen::VectorXd>& y,
                                   double rho, int n_buses);

// Plain per-component mean of the copies (the form gossip approximates).
Eigen::VectorXd net_update_average(const std::vector<LocalProblem>& lps,
                                   const std::vector<Eigen::VectorXd>& z,
                                   int n_buses);

// One component's randomized pairwise averaging: each round picks one pair
// (seeded) and replaces both copies by their mean. Sum-preserving.
void gossip_average(std::vector<double>& values,
                    const std::vector<std::pair<int, int>>& pairs, int rounds,
                    std::mt19937& rng);

// Gossip-based net update over all components (copies exchanged only along
// electrical lines); the read-out is the self bus copy.
Eigen::VectorXd net_update_gossip(const Network& net,
                                  const std::vector<LocalProblem>& lps,
                                  const std::vector<Eigen::VectorXd>& z,
                                  int rounds, std::mt19937& rng);

// y_k += rho (v_k - E_k v) for every bus not in `skip`; returns per-bus
// consensus residual norms ||v_k - E_k v||_2 (all buses, skipped included).
std::vector<double> dual_update(const std::vector<LocalProblem>& lps,
                                const std::vector<Eigen::VectorXd>& z,
                                std::vector<Eigen::VectorXd>& y,
                                const Eigen::VectorXd& v, double rho,
                                const std::vector<char>& skip);

// Returns the reason when the rule fires at iteration `iter` (1-based),
// empty otherwise.
std::string check_stop(const StopRule& rule, const std::vector<IterRecord>& trace,
                       int iter, double max_consensus_residual);

void write_trace_csv(const std::string& path,
                     const std::vector<IterRecord>& trace);
void write_trace_jsonl(const std::string& path,
                       const std::vector<IterRecord>& trace);
std::string trace_csv_header();

}  // namespace dopf
