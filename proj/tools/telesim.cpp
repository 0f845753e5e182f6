// telesim command-line front end: run campaigns, report on them, serve a
// live session to the browser console.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "telesim/harness.hpp"
#include "telesim/live_session.hpp"

using namespace telesim;

namespace {

std::vector<harness::TierSpec> parse_tiers(const std::string& arg) {
  if (arg == "all")
    return {harness::TierSpec::preset(netem::TierName::High), harness::TierSpec::preset(netem::TierName::Medium),
            harness::TierSpec::preset(netem::TierName::Low)};
  return {harness::TierSpec::parse(arg)};
}

int cmd_run(const std::string& tier, std::uint32_t trials, std::uint64_t seed, const std::string& mode,
            const std::string& profile, const std::string& out, bool dump_frames, bool rate_control, bool events,
            bool quiet) {
  harness::RunConfig rc;
  rc.tiers = parse_tiers(tier);
  rc.trials_per_tier = trials;
  rc.master_seed = seed;
  rc.mode = mode == "rt" ? netem::ClockMode::RealTime : netem::ClockMode::DiscreteEvent;
  if (!profile.empty()) rc.profile = task::load_profile(profile);
  rc.out_dir = out;
  rc.dump_frames = dump_frames;
  rc.rate_control = rate_control;
  rc.write_event_logs = events;

  const auto result = harness::run_campaign(rc, [&](const harness::TrialRecord& r) {
    if (!quiet)
      std::fprintf(stderr, "%s  success=%d  t=%.1fs  psnr=%.2f  ssim=%.3f\n", r.trial_id.c_str(), r.success ? 1 : 0,
                   r.completion_time_s, r.psnr_db, r.ssim);
  });
  if (result.skipped) std::fprintf(stderr, "skipped %zu existing trials\n", result.skipped);
  std::cout << harness::to_text(result.report);
  return 0;
}

int cmd_report(const std::string& in, bool json_only) {
  const std::filesystem::path dir(in);
  const auto records = harness::read_dataset(dir / harness::kDatasetFile);
  const auto report = harness::aggregate(records, {"high", "medium", "low"});
  nlohmann::json j = harness::to_json(report);
  std::string trend_text;
  try {
    const auto verdict = harness::trend_check(report);
    j["trends"] = harness::to_json(verdict);
    for (const auto& t : verdict.trends)
      trend_text += std::string(t.pass ? "  pass  " : "  FAIL  ") + t.name + "  " + t.detail + "\n";
  } catch (const std::invalid_argument& e) {
    j["trends"] = {{"error", e.what()}};
    trend_text = std::string("  trend check skipped: ") + e.what() + "\n";
  }
  if (!json_only) std::cout << harness::to_text(report) << "\ntrends:\n" << trend_text << '\n';
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_serve(const std::string& tier, std::uint16_t port, std::uint64_t seed, const std::string& out,
              const std::string& address) {
  harness::BridgeConfig bc;
  bc.session.tier = harness::TierSpec::parse(tier);
  bc.session.seed = seed;
  if (!out.empty()) bc.session.out_dir = out;
  bc.address = address;
  bc.port = port;
  harness::serve(bc, [](std::uint16_t p) { std::fprintf(stderr, "listening on ws://localhost:%u\n", p); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"telesim: emulated-network teleoperation testbed"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a trial campaign");
  std::string tier = "all", mode = "sim", profile, out = "out";
  std::uint32_t trials = 100;
  std::uint64_t seed = 1;
  bool dump = false, rate = false, events = false, quiet = false;
  run->add_option("--tier", tier, "high|medium|low|all|custom.json")->capture_default_str();
  run->add_option("--trials", trials, "trials per tier")->capture_default_str()->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "master seed")->capture_default_str();
  run->add_option("--mode", mode, "sim|rt")->capture_default_str()->check(CLI::IsMember({"sim", "rt"}));
  run->add_option("--profile", profile, "operator profile JSON")->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory")->capture_default_str();
  run->add_flag("--dump-frames", dump, "write sent/received PNGs per trial");
  run->add_flag("--rate-control", rate, "enable the quantizer rate controller");
  run->add_flag("--event-logs", events, "write per-trial event logs");
  run->add_flag("-q,--quiet", quiet, "no per-trial progress lines");

  auto* report = app.add_subcommand("report", "aggregate a campaign and check trends");
  std::string in;
  bool json_only = false;
  report->add_option("--in", in, "campaign directory")->required()->check(CLI::ExistingDirectory);
  report->add_flag("--json", json_only, "JSON output only");

  auto* serve = app.add_subcommand("serve", "serve a live session over WebSocket");
  std::string serve_tier = "high", serve_out, address = "0.0.0.0";
  std::uint16_t port = 8765;
  std::uint64_t serve_seed = 1;
  serve->add_option("--tier", serve_tier, "high|medium|low|custom.json")->capture_default_str();
  serve->add_option("--port", port, "TCP port (0 picks one)")->capture_default_str();
  serve->add_option("--seed", serve_seed, "link seed")->capture_default_str();
  serve->add_option("--out", serve_out, "directory for human-trial records");
  serve->add_option("--address", address, "bind address")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(tier, trials, seed, mode, profile, out, dump, rate, events, quiet);
    if (*report) return cmd_report(in, json_only);
    if (*serve) return cmd_serve(serve_tier, port, serve_seed, serve_out, address);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "telesim: %s\n", e.what());
    return 1;
  }
  return 0;
}
