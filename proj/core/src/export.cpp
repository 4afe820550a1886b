#include "cgsim/export.hpp"

#include <cstdio>
#include <fstream>

#include "cgsim/errors.hpp"
#include "json.hpp"

namespace cgsim {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string opt_fmt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string();
}

constexpr double kPercentiles[] = {50, 95, 99, 99.9, 99.999};

void append_percentiles(std::string& row, std::span<const float> sorted) {
  for (double q : kPercentiles) {
    row += ',';
    row += opt_fmt(percentile(sorted, q));
  }
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << content;
  if (!out) throw ConfigError("write failed for " + p.string());
}

}  // namespace

std::string render_metrics_csv(const MetricsReport& report) {
  std::string csv =
      "scope,ue_id,replication,offered,delivered,delivered_within_deadline,"
      "reliability,reliability_se,reliability_undersampled,"
      "at_least_one_rep_fraction,mean_alignment_delay_slots,"
      "latency_p50_us,latency_p95_us,latency_p99_us,latency_p99_9_us,"
      "latency_p99_999_us,reps_scheduled,reps_emitted,skipped_missed,"
      "skipped_lbt,skipped_cancelled,shared_emissions,collisions,lbt_blocks,"
      "common_nack_recoveries\n";

  for (std::size_t r = 0; r < report.replications.size(); ++r) {
    for (const auto& m : report.replications[r].ues) {
      std::string row = "rep," + std::to_string(m.ue_id) + "," + std::to_string(r);
      row += "," + std::to_string(m.offered);
      row += "," + std::to_string(m.delivered);
      row += "," + std::to_string(m.delivered_within_deadline);
      row += "," + opt_fmt(m.reliability());
      row += ",";  // per-replication rows carry no standard error
      row += ",";
      row += "," + opt_fmt(m.at_least_one_fraction());
      row += "," + opt_fmt(m.mean_alignment_slots());
      append_percentiles(row, m.latencies_us);
      row += "," + std::to_string(m.reps_scheduled);
      row += "," + std::to_string(m.reps_emitted);
      row += "," + std::to_string(m.skipped_missed);
      row += "," + std::to_string(m.skipped_lbt);
      row += "," + std::to_string(m.skipped_cancelled);
      row += "," + std::to_string(m.shared_emissions);
      row += "," + std::to_string(m.collisions);
      row += "," + std::to_string(m.lbt_blocks);
      row += "," + std::to_string(m.common_nack_recoveries);
      csv += row + "\n";
    }
  }
  for (const auto& a : report.aggregates()) {
    std::string row = "agg," + std::to_string(a.ue_id) + ",";
    row += "," + std::to_string(a.offered);
    row += "," + std::to_string(a.delivered);
    row += "," + std::to_string(a.delivered_within_deadline);
    row += "," + (a.reliability_defined ? fmt(a.reliability_mean) : std::string());
    row += "," + (a.reliability_defined ? fmt(a.reliability_se) : std::string());
    row += std::string(",") + (a.reliability_undersampled ? "1" : "0");
    row += "," + (a.offered ? fmt(a.at_least_one_mean) : std::string());
    row += "," + (a.alignment_defined ? fmt(a.alignment_mean) : std::string());
    append_percentiles(row, a.pooled_latencies_us);
    row += "," + std::to_string(a.reps_scheduled);
    row += "," + std::to_string(a.reps_emitted);
    row += "," + std::to_string(a.skipped_missed);
    row += "," + std::to_string(a.skipped_lbt);
    row += "," + std::to_string(a.skipped_cancelled);
    row += "," + std::to_string(a.shared_emissions);
    row += "," + std::to_string(a.collisions);
    row += "," + std::to_string(a.lbt_blocks);
    row += "," + std::to_string(a.common_nack_recoveries);
    csv += row + "\n";
  }
  return csv;
}

std::string render_summary_json(const MetricsReport& report) {
  nlohmann::ordered_json root;
  root["profile"] = std::string(profile_name(report.scenario.profile));
  root["replications"] = report.replications.size();
  root["duration_slots"] = report.scenario.duration_slots;
  root["seed"] = report.scenario.seed;
  auto& ues = root["ues"];
  ues = nlohmann::ordered_json::array();
  for (const auto& a : report.aggregates()) {
    nlohmann::ordered_json u;
    u["ue_id"] = a.ue_id;
    u["offered"] = a.offered;
    u["delivered"] = a.delivered;
    u["delivered_within_deadline"] = a.delivered_within_deadline;
    if (a.reliability_defined) {
      u["reliability"] = a.reliability_mean;
      u["reliability_se"] = a.reliability_se;
    } else {
      u["reliability"] = nullptr;
    }
    u["reliability_undersampled"] = a.reliability_undersampled;
    if (a.alignment_defined) {
      u["mean_alignment_delay_slots"] = a.alignment_mean;
      u["mean_alignment_delay_se"] = a.alignment_se;
    }
    nlohmann::ordered_json pct;
    for (double q : kPercentiles) {
      auto v = percentile(a.pooled_latencies_us, q);
      char key[16];
      std::snprintf(key, sizeof key, "p%g", q);
      if (v) pct[key] = *v;
    }
    u["latency_us"] = pct;
    u["reps"] = {{"scheduled", a.reps_scheduled},
                 {"emitted", a.reps_emitted},
                 {"skipped_missed", a.skipped_missed},
                 {"skipped_lbt", a.skipped_lbt},
                 {"skipped_cancelled", a.skipped_cancelled},
                 {"shared_emissions", a.shared_emissions}};
    u["collisions"] = a.collisions;
    u["lbt_blocks"] = a.lbt_blocks;
    u["common_nack_recoveries"] = a.common_nack_recoveries;
    ues.push_back(std::move(u));
  }
  return root.dump(2) + "\n";
}

std::string render_latency_cdf_csv(const MetricsReport& report) {
  std::vector<float> all;
  for (const auto& rep : report.replications)
    for (const auto& m : rep.ues)
      all.insert(all.end(), m.latencies_us.begin(), m.latencies_us.end());
  std::sort(all.begin(), all.end());

  std::string csv = "latency_us,cumulative_fraction\n";
  const double n = static_cast<double>(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i + 1 < all.size() && all[i + 1] == all[i]) continue;  // keep last of ties
    csv += fmt(all[i]) + "," + fmt(static_cast<double>(i + 1) / n) + "\n";
  }
  return csv;
}

void export_report(const MetricsReport& report,
                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "metrics.csv", render_metrics_csv(report));
  write_file(out_dir / "summary.json", render_summary_json(report));
  write_file(out_dir / "latency_cdf.csv", render_latency_cdf_csv(report));
}

}  // namespace cgsim
