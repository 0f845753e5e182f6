#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "telesim/harness.hpp"

namespace telesim::harness {

const TierAggregate* AggregateReport::find(const std::string& tier) const {
  for (const auto& t : tiers)
    if (t.tier == tier) return &t;
  return nullptr;
}

namespace {

TierAggregate summarize_tier(const std::string& name, const std::vector<const TrialRecord*>& rows) {
  TierAggregate a;
  a.tier = name;
  a.trials = rows.size();
  a.present = !rows.empty();
  if (!a.present) return a;

  double completion_success = 0;
  std::size_t successes = 0;
  for (const auto* r : rows) {
    a.mean_psnr_db += r->psnr_db;
    a.mean_ssim += r->ssim;
    a.mean_completion_s += r->completion_time_s;
    a.mean_throughput_mbps += r->mean_throughput_mbps;
    a.mean_latency_ms += r->mean_latency_ms;
    a.measured_plr_pct += r->measured_plr_pct;
    if (r->success) {
      ++successes;
      completion_success += r->completion_time_s;
    }
  }
  const double n = static_cast<double>(rows.size());
  a.mean_psnr_db /= n;
  a.mean_ssim /= n;
  a.mean_completion_s /= n;
  a.mean_throughput_mbps /= n;
  a.mean_latency_ms /= n;
  a.measured_plr_pct /= n;
  a.success_rate_pct = 100.0 * static_cast<double>(successes) / n;
  if (successes) a.mean_completion_success_s = completion_success / static_cast<double>(successes);
  return a;
}

double rel_pct(double base, double value) { return base == 0 ? std::nan("") : 100.0 * (value - base) / base; }

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

AggregateReport aggregate(const std::vector<TrialRecord>& records, const std::vector<std::string>& requested) {
  std::vector<std::string> order = requested;
  for (const auto& r : records)
    if (std::find(order.begin(), order.end(), r.tier) == order.end()) order.push_back(r.tier);

  AggregateReport report;
  for (const auto& name : order) {
    std::vector<const TrialRecord*> rows;
    for (const auto& r : records)
      if (r.tier == name) rows.push_back(&r);
    report.tiers.push_back(summarize_tier(name, rows));
  }

  const auto* high = report.find("high");
  if (high && high->present) {
    for (const auto& t : report.tiers) {
      if (t.tier == "high" || !t.present) continue;
      TierDelta d;
      d.tier = t.tier;
      d.psnr_pct = rel_pct(high->mean_psnr_db, t.mean_psnr_db);
      d.ssim_pct = rel_pct(high->mean_ssim, t.mean_ssim);
      d.completion_pct = rel_pct(high->mean_completion_s, t.mean_completion_s);
      d.success_pp = t.success_rate_pct - high->success_rate_pct;
      report.deltas.push_back(d);
    }
  }
  return report;
}

std::string format_delta_pct(double base, double value) {
  const double pct = rel_pct(base, value);
  if (!std::isfinite(pct)) return "n/a";
  char buf[32];
  const double shown = std::round(pct * 10.0) / 10.0;
  std::snprintf(buf, sizeof buf, "%+.1f %%", shown == 0.0 ? 0.0 : shown);
  return buf;
}

nlohmann::json to_json(const AggregateReport& report) {
  nlohmann::json tiers = nlohmann::json::array();
  for (const auto& t : report.tiers) {
    nlohmann::json j{{"tier", t.tier}, {"present", t.present}, {"trials", t.trials}};
    if (t.present) {
      j["mean_psnr_db"] = t.mean_psnr_db;
      j["mean_ssim"] = t.mean_ssim;
      j["mean_completion_s"] = t.mean_completion_s;
      j["mean_completion_success_s"] =
          t.mean_completion_success_s ? nlohmann::json(*t.mean_completion_success_s) : nlohmann::json(nullptr);
      j["success_rate_pct"] = t.success_rate_pct;
      j["mean_throughput_mbps"] = t.mean_throughput_mbps;
      j["mean_latency_ms"] = t.mean_latency_ms;
      j["measured_plr_pct"] = t.measured_plr_pct;
    }
    tiers.push_back(std::move(j));
  }
  nlohmann::json deltas = nlohmann::json::array();
  for (const auto& d : report.deltas) {
    deltas.push_back({{"tier", d.tier},
                      {"psnr_pct", number_or_null(d.psnr_pct)},
                      {"ssim_pct", number_or_null(d.ssim_pct)},
                      {"completion_pct", number_or_null(d.completion_pct)},
                      {"success_pp", d.success_pp}});
  }
  return {{"tiers", tiers}, {"deltas_vs_high", deltas}};
}

std::string to_text(const AggregateReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %6s %9s %7s %12s %12s %9s\n", "tier", "trials", "psnr_db", "ssim",
                "completion_s", "success_only", "success%");
  out << line;
  for (const auto& t : report.tiers) {
    if (!t.present) {
      std::snprintf(line, sizeof line, "%-10s  (absent)\n", t.tier.c_str());
      out << line;
      continue;
    }
    char so[32] = "-";
    if (t.mean_completion_success_s) std::snprintf(so, sizeof so, "%.1f", *t.mean_completion_success_s);
    std::snprintf(line, sizeof line, "%-10s %6zu %9.2f %7.3f %12.1f %12s %8.1f%%\n", t.tier.c_str(), t.trials,
                  t.mean_psnr_db, t.mean_ssim, t.mean_completion_s, so, t.success_rate_pct);
    out << line;
  }
  const auto* high = report.find("high");
  if (high && high->present && !report.deltas.empty()) {
    out << "\nvs high:\n";
    for (const auto& d : report.deltas) {
      const auto* t = report.find(d.tier);
      std::snprintf(line, sizeof line, "  %-8s psnr %s, ssim %s, completion %s, success %+.1f pp\n", d.tier.c_str(),
                    format_delta_pct(high->mean_psnr_db, t->mean_psnr_db).c_str(),
                    format_delta_pct(high->mean_ssim, t->mean_ssim).c_str(),
                    format_delta_pct(high->mean_completion_s, t->mean_completion_s).c_str(), d.success_pp);
      out << line;
    }
  }
  return out.str();
}

bool TrendVerdict::all_pass() const {
  for (const auto& t : trends)
    if (!t.pass) return false;
  return !trends.empty();
}

std::vector<std::string> TrendVerdict::violated() const {
  std::vector<std::string> out;
  for (const auto& t : trends)
    if (!t.pass) out.push_back(t.name);
  return out;
}

TrendVerdict trend_check(const AggregateReport& report) {
  const auto need = [&](const char* name) {
    const auto* t = report.find(name);
    if (!t || !t->present) throw std::invalid_argument(std::string("trend_check: tier '") + name + "' missing");
    return t;
  };
  const auto* h = need("high");
  const auto* m = need("medium");
  const auto* l = need("low");

  TrendVerdict v;
  const auto add = [&](const char* name, bool pass, const char* fmt, double a, double b, double c) {
    char buf[160];
    std::snprintf(buf, sizeof buf, fmt, a, b, c);
    v.trends.push_back({name, pass, buf});
  };
  add("psnr_high_gt_low", h->mean_psnr_db > l->mean_psnr_db, "high %.2f dB, low %.2f dB (medium %.2f dB)",
      h->mean_psnr_db, l->mean_psnr_db, m->mean_psnr_db);
  add("ssim_high_gt_low", h->mean_ssim > l->mean_ssim, "high %.3f, low %.3f (medium %.3f)", h->mean_ssim,
      l->mean_ssim, m->mean_ssim);
  add("completion_high_lt_medium_lt_low",
      h->mean_completion_s < m->mean_completion_s && m->mean_completion_s < l->mean_completion_s,
      "%.1f s < %.1f s < %.1f s", h->mean_completion_s, m->mean_completion_s, l->mean_completion_s);
  add("success_high_gt_medium_gt_low",
      h->success_rate_pct > m->success_rate_pct && m->success_rate_pct > l->success_rate_pct,
      "%.1f %% > %.1f %% > %.1f %%", h->success_rate_pct, m->success_rate_pct, l->success_rate_pct);
  return v;
}

nlohmann::json to_json(const TrendVerdict& verdict) {
  nlohmann::json trends = nlohmann::json::array();
  for (const auto& t : verdict.trends) trends.push_back({{"name", t.name}, {"pass", t.pass}, {"detail", t.detail}});
  return {{"all_pass", verdict.all_pass()}, {"trends", trends}, {"violated", verdict.violated()}};
}

}  // namespace telesim::harness
