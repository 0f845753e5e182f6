#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "telesim/harness.hpp"

namespace telesim::harness {

const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> columns = {
      "trial_id",          "tier",           "seed",
      "bandwidth_mbps",    "latency_ms",     "jitter_ms",
      "set_plr_pct",       "mean_throughput_mbps", "max_throughput_mbps",
      "mean_latency_ms",   "max_latency_ms", "mean_jitter_ms",
      "max_jitter_ms",     "measured_plr_pct", "psnr_db",
      "ssim",              "completion_time_s", "success"};
  return columns;
}

std::string csv_header() {
  std::string h;
  for (const auto& c : dataset_columns()) {
    if (!h.empty()) h += ',';
    h += c;
  }
  return h;
}

namespace {

void append_fixed(std::string& out, double v) {
  out += ',';
  if (std::isnan(v)) return;  // null measurement
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // Avoid "-0.000".
  if (std::string_view(buf) == "-0.000") std::snprintf(buf, sizeof buf, "0.000");
  out += buf;
}

void check_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") != std::string::npos)
    throw std::invalid_argument("dataset: identifier contains a CSV delimiter: " + s);
}

double parse_double(const std::string& s) {
  if (s.empty()) return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("dataset: bad number " + s);
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string to_csv_row(const TrialRecord& r) {
  check_field(r.trial_id);
  check_field(r.tier);
  std::string out = r.trial_id + ',' + r.tier + ',' + std::to_string(r.seed);
  for (double v : {r.bandwidth_mbps, r.latency_ms, r.jitter_ms, r.set_plr_pct, r.mean_throughput_mbps,
                   r.max_throughput_mbps, r.mean_latency_ms, r.max_latency_ms, r.mean_jitter_ms, r.max_jitter_ms,
                   r.measured_plr_pct, r.psnr_db, r.ssim, r.completion_time_s}) {
    append_fixed(out, v);
  }
  out += r.success ? ",1" : ",0";
  return out;
}

void write_dataset(const std::vector<TrialRecord>& records, const std::filesystem::path& path) {
  if (records.empty()) throw std::invalid_argument("write_dataset: no records");
  std::string body = csv_header() + '\n';
  for (const auto& r : records) body += to_csv_row(r) + '\n';

  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write dataset " + path.string());
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("failed writing dataset " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot move dataset into place at " + path.string());
  }
}

std::vector<TrialRecord> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != csv_header())
    throw std::runtime_error("dataset " + path.string() + ": header does not match the schema");

  std::vector<TrialRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != dataset_columns().size())
      throw std::runtime_error("dataset " + path.string() + ": wrong column count in row " +
                               std::to_string(records.size() + 1));
    TrialRecord r;
    r.trial_id = f[0];
    r.tier = f[1];
    r.seed = std::stoull(f[2]);
    double* fields[] = {&r.bandwidth_mbps,     &r.latency_ms,          &r.jitter_ms,       &r.set_plr_pct,
                        &r.mean_throughput_mbps, &r.max_throughput_mbps, &r.mean_latency_ms, &r.max_latency_ms,
                        &r.mean_jitter_ms,     &r.max_jitter_ms,       &r.measured_plr_pct, &r.psnr_db,
                        &r.ssim,               &r.completion_time_s};
    for (std::size_t i = 0; i < std::size(fields); ++i) *fields[i] = parse_double(f[3 + i]);
    if (f[17] != "0" && f[17] != "1") throw std::runtime_error("dataset: success must be 0 or 1");
    r.success = f[17] == "1";
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace telesim::harness
