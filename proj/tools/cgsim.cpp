#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "cgsim/analytics.hpp"
#include "cgsim/conformance.hpp"
#include "cgsim/drivers.hpp"
#include "cgsim/errors.hpp"
#include "cgsim/export.hpp"
#include "cgsim/sim_engine.hpp"

namespace {

bool log_debug() {
  const char* v = std::getenv("CGSIM_LOG");
  return v && std::string(v) == "debug";
}

int run_simulate(const std::string& scenario_file, std::uint64_t seed,
                 bool seed_set, int replications, bool repl_set,
                 const std::string& out_dir) {
  auto cfg = cgsim::load_scenario(scenario_file);
  if (seed_set) cfg.seed = seed;
  if (repl_set) cfg.replications = replications;
  cgsim::validate_or_throw(cfg);
  if (log_debug())
    std::fprintf(stderr, "scenario ok: %d ue(s), %d grant(s), %lld slots\n",
                 static_cast<int>(cfg.ues.size()),
                 static_cast<int>(cfg.grants.size()),
                 static_cast<long long>(cfg.duration_slots));
  auto report = cgsim::run_replications(cfg, cfg.replications);
  cgsim::export_report(report, out_dir);
  for (const auto& a : report.aggregates()) {
    std::printf("ue %d: offered=%lld delivered=%lld", a.ue_id,
                static_cast<long long>(a.offered),
                static_cast<long long>(a.delivered));
    if (a.reliability_defined)
      std::printf(" reliability=%.9g%s", a.reliability_mean,
                  a.reliability_undersampled ? " (under-sampled)" : "");
    std::printf("\n");
  }
  std::printf("wrote %s/metrics.csv, summary.json, latency_cdf.csv\n",
              out_dir.c_str());
  return 0;
}

int run_compare(const std::string& scenario_file, const std::string& metric,
                double z_threshold) {
  auto cfg = cgsim::load_scenario(scenario_file);
  cgsim::validate_or_throw(cfg);
  auto cmp = cgsim::compare_with_oracle(cfg, metric);
  if (!cmp.covered) {
    std::printf("metric=%s,no_oracle,%s\n", metric.c_str(), cmp.note.c_str());
    return 0;
  }
  std::printf("metric=%s,simulated=%.9g,analytical=%.9g,z=%.4g\n", metric.c_str(),
              cmp.simulated, cmp.analytical, cmp.z);
  return std::abs(cmp.z) > z_threshold ? 3 : 0;
}

int run_conformance() {
  auto checks = cgsim::run_conformance_matrix();
  std::size_t passed = 0;
  for (const auto& c : checks) {
    std::printf("%-28s %s  %s\n", c.row.c_str(), c.pass ? "PASS" : "FAIL",
                c.detail.c_str());
    passed += c.pass ? 1 : 0;
  }
  std::printf("%zu/%zu rows pass\n", passed, checks.size());
  return passed == checks.size() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"5G NR uplink configured-grant simulator and analytical toolkit"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "run a scenario and export metrics");
  std::string scenario_file, out_dir = "out";
  std::uint64_t seed = 0;
  int replications = 1;
  sim->add_option("--scenario", scenario_file, "scenario JSON file")->required();
  auto* seed_opt = sim->add_option("--seed", seed, "master seed (overrides file)");
  auto* repl_opt =
      sim->add_option("--replications", replications, "replication count");
  sim->add_option("--out", out_dir, "output directory");

  auto* cmp = app.add_subcommand("compare", "simulated vs analytical oracle");
  std::string cmp_scenario, metric;
  double z_threshold = 3.0;
  cmp->add_option("--scenario", cmp_scenario, "scenario JSON file")->required();
  cmp->add_option("--metric", metric,
                  "at_least_one_rep | recovery | collision | alignment_delay")
      ->required();
  cmp->add_option("--z-threshold", z_threshold, "mismatch threshold (exit 3)");

  app.add_subcommand("conformance", "run the profile feature-gating matrix");

  auto* orc = app.add_subcommand("oracle", "evaluate one closed form");
  std::string formula;
  orc->add_option("formula", formula,
                  "p_at_least_one_rep | p_unknown_detection | "
                  "p_common_nack_recovery | p_shared_collision | composed_error "
                  "| find_min_kplus | mean_alignment_delay | occasions_legacy | "
                  "occasions_flexible")
      ->required();
  int K = 4, N = 16, T = 0, a = 1, b = 1, k_plus = 1, n_ues = 1, m = 1, k_max = 64;
  double p_t = 1, p_e = 1, p_d = 1, p_md = 0, p_cn = 1, q = 0, gamma_db = 0,
         epsilon = 0, p_arrival = 0, target = 1e-5;
  int det_b = 0;
  orc->add_option("--k", K);
  orc->add_option("--n", N);
  orc->add_option("--t", T);
  orc->add_option("--a", a);
  orc->add_option("--b", b);
  orc->add_option("--k-plus", k_plus);
  orc->add_option("--n-ues", n_ues);
  orc->add_option("--m", m);
  orc->add_option("--k-max", k_max);
  orc->add_option("--p-t", p_t);
  orc->add_option("--p-e", p_e);
  orc->add_option("--p-d", p_d);
  orc->add_option("--p-md", p_md);
  orc->add_option("--p-cn", p_cn);
  orc->add_option("--q", q);
  orc->add_option("--gamma-db", gamma_db);
  orc->add_option("--epsilon", epsilon);
  orc->add_option("--p-arrival", p_arrival);
  orc->add_option("--target", target);
  orc->add_option("--det-b", det_b, "deterministic arrival occasion (composed_error)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim)
      return run_simulate(scenario_file, seed, seed_opt->count() > 0, replications,
                          repl_opt->count() > 0, out_dir);
    if (*cmp) return run_compare(cmp_scenario, metric, z_threshold);
    if (app.get_subcommand("conformance")->parsed()) return run_conformance();

    cgsim::LinkModel link{1.0, p_e, p_d, p_md, p_cn, p_t};
    cgsim::SharedPoolConfig pool{k_plus, n_ues, q};
    cgsim::DedicatedCgSummary ded{p_arrival, K, cgsim::db_to_linear(gamma_db)};
    cgsim::BlerModel bler;
    bler.kind = cgsim::BlerModel::Kind::BERNOULLI;
    bler.epsilon = epsilon;

    if (formula == "p_at_least_one_rep") {
      std::printf("p_at_least_one_rep,K=%d,N=%d,T=%d,%.12g\n", K, N, T,
                  cgsim::p_at_least_one_rep(K, N, T));
    } else if (formula == "p_unknown_detection") {
      std::printf("p_unknown_detection,P_T=%g,P_E=%g,P_D=%g,P_MD=%g,%.12g\n", p_t,
                  p_e, p_d, p_md, cgsim::p_unknown_detection(link));
    } else if (formula == "p_common_nack_recovery") {
      std::printf(
          "p_common_nack_recovery,P_T=%g,P_E=%g,P_D=%g,P_MD=%g,P_CN=%g,%.12g\n",
          p_t, p_e, p_d, p_md, p_cn, cgsim::p_common_nack_recovery(link));
    } else if (formula == "p_shared_collision") {
      std::printf("p_shared_collision,q=%g,k_plus=%d,n_ues=%d,%.12g\n", q, k_plus,
                  n_ues, cgsim::p_shared_collision(pool));
    } else if (formula == "composed_error") {
      double v = det_b > 0
                     ? cgsim::composed_error(
                           ded, pool, bler,
                           cgsim::ArrivalDistribution::deterministic(K, det_b))
                     : cgsim::composed_error(ded, pool, bler);
      std::printf(
          "composed_error,P_a=%g,K=%d,gamma_db=%g,eps=%g,q=%g,k_plus=%d,n_ues=%d,"
          "%.12g\n",
          p_arrival, K, gamma_db, epsilon, q, k_plus, n_ues, v);
    } else if (formula == "find_min_kplus") {
      auto v = cgsim::find_min_kplus(ded, pool, bler, target, k_max);
      std::printf("find_min_kplus,P_a=%g,K=%d,eps=%g,q=%g,n_ues=%d,target=%g,%s\n",
                  p_arrival, K, epsilon, q, n_ues, target,
                  v ? std::to_string(*v).c_str() : "NONE");
    } else if (formula == "mean_alignment_delay") {
      std::printf("mean_alignment_delay,p=%d,m=%d,%.12g\n", N, m,
                  cgsim::mean_alignment_delay(N, m));
    } else if (formula == "occasions_legacy") {
      std::printf("occasions_legacy,K=%d,a=%d,b=%d,%d\n", K, a, b,
                  cgsim::occasions_available_legacy(K, a, b));
    } else if (formula == "occasions_flexible") {
      std::printf("occasions_flexible,K=%d,b=%d,%d\n", K, b,
                  cgsim::occasions_available_flexible(K, b));
    } else {
      std::fprintf(stderr, "unknown formula \"%s\"\n", formula.c_str());
      return 2;
    }
    return 0;
  } catch (const cgsim::ValidationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const cgsim::DomainError& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return 2;
  } catch (const cgsim::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const cgsim::ModelViolation& e) {
    std::fprintf(stderr, "model violation: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
