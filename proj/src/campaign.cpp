#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "telesim/harness.hpp"

namespace telesim::harness {

void RunConfig::validate() const {
  if (tiers.empty()) throw std::invalid_argument("run config: no tiers");
  if (trials_per_tier < 1) throw std::invalid_argument("run config: trials must be >= 1");
  if (out_dir.empty()) throw std::invalid_argument("run config: output directory required");
  std::set<std::string> names;
  for (const auto& t : tiers) {
    t.link.validate();
    if (!names.insert(t.name).second) throw std::invalid_argument("run config: duplicate tier " + t.name);
  }
  profile.validate();
  codec.validate();
}

CampaignResult run_campaign(const RunConfig& config, const std::function<void(const TrialRecord&)>& progress) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  const auto dataset_path = config.out_dir / kDatasetFile;

  // Ordering key: tier position in the run config, then trial index.
  std::map<std::pair<std::size_t, std::uint32_t>, TrialRecord> done;
  std::vector<TrialRecord> foreign;  // rows from tiers not in this run
  std::set<std::string> existing_ids;
  if (std::filesystem::exists(dataset_path)) {
    for (auto& r : read_dataset(dataset_path)) {
      existing_ids.insert(r.trial_id);
      bool placed = false;
      for (std::size_t t = 0; t < config.tiers.size() && !placed; ++t) {
        for (std::uint32_t i = 0; i < config.trials_per_tier; ++i) {
          if (trial_id(config.tiers[t].name, i) == r.trial_id) {
            done.emplace(std::make_pair(t, i), r);
            placed = true;
            break;
          }
        }
      }
      if (!placed) foreign.push_back(std::move(r));
    }
  }

  struct Job {
    std::size_t tier;
    std::uint32_t index;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < config.tiers.size(); ++t)
    for (std::uint32_t i = 0; i < config.trials_per_tier; ++i)
      if (!existing_ids.count(trial_id(config.tiers[t].name, i))) jobs.push_back({t, i});

  CampaignResult result;
  result.skipped = config.tiers.size() * config.trials_per_tier - jobs.size();

  const auto snapshot_rows = [&] {
    std::vector<TrialRecord> rows = foreign;
    for (const auto& [key, r] : done) rows.push_back(r);
    return rows;
  };

  const auto log_dir = config.out_dir / "events";
  if (config.write_event_logs) std::filesystem::create_directories(log_dir);

  const long n = static_cast<long>(jobs.size());
  std::string first_error;
#pragma omp parallel for schedule(dynamic, 1)
  for (long j = 0; j < n; ++j) {
    try {
      const auto& tier = config.tiers[jobs[j].tier];
      TrialConfig tc;
      tc.tier = tier;
      tc.seed = trial_seed(config.master_seed, tier.name, jobs[j].index);
      tc.trial_id = trial_id(tier.name, jobs[j].index);
      tc.codec = config.codec;
      tc.profile = config.profile;
      tc.rate_control = config.rate_control;
      tc.mode = config.mode;
      if (config.dump_frames) tc.frame_dump_dir = config.out_dir / "frames";
      auto trial = run_trial(tc);
      if (config.write_event_logs) task::write_event_log(log_dir / (tc.trial_id + ".jsonl"), trial.events);
#pragma omp critical(telesim_dataset)
      {
        done.emplace(std::make_pair(jobs[j].tier, jobs[j].index), trial.record);
        write_dataset(snapshot_rows(), dataset_path);
        if (progress) progress(trial.record);
      }
    } catch (const std::exception& e) {
#pragma omp critical(telesim_dataset)
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw std::runtime_error("campaign: " + first_error);

  result.records = snapshot_rows();
  std::vector<std::string> requested;
  for (const auto& t : config.tiers) requested.push_back(t.name);
  result.report = aggregate(result.records, requested);

  std::ofstream agg(config.out_dir / kAggregateFile);
  agg << to_json(result.report).dump(2) << '\n';
  return result;
}

}  // namespace telesim::harness
