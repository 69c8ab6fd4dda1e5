#include "eegraph/splitting.hpp"

#include <algorithm>
#include <map>

#include "eegraph/dataset.hpp"
#include "eegraph/errors.hpp"
#include "eegraph/rng.hpp"

namespace eegraph {

std::string to_string(SplitMode mode) { return mode == SplitMode::intra ? "intra" : "cross"; }

SplitMode parse_split_mode(std::string_view name) {
  if (name == "intra") return SplitMode::intra;
  if (name == "cross") return SplitMode::cross;
  throw ConfigError("unknown split mode '" + std::string(name) + "'");
}

std::vector<std::size_t> FoldPlan::complement(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != i) out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan split_intra(std::size_t n_samples, int k, std::uint64_t seed, std::size_t block_size) {
  if (k < 2) throw ValidationError("split_intra: K must be at least 2, got " + std::to_string(k));
  if (block_size == 0) throw ValidationError("split_intra: block_size must be positive");
  const std::size_t n_blocks = (n_samples + block_size - 1) / block_size;
  const auto kk = static_cast<std::size_t>(k);
  if (n_blocks < kk) {
    throw ValidationError("split_intra: K=" + std::to_string(k) + " exceeds the " + std::to_string(n_blocks) +
                          " available blocks of " + std::to_string(n_samples) + " samples");
  }
  std::vector<std::size_t> order(n_blocks);
  for (std::size_t i = 0; i < n_blocks; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  FoldPlan plan;
  plan.mode = SplitMode::intra;
  plan.seed = seed;
  plan.folds.resize(kk);
  const std::size_t base = n_blocks / kk;
  const std::size_t extra = n_blocks % kk;
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < kk; ++f) {
    const std::size_t take = base + (f < extra ? 1 : 0);
    for (std::size_t b = 0; b < take; ++b, ++cursor) {
      const std::size_t first = order[cursor] * block_size;
      const std::size_t last = std::min(n_samples, first + block_size);
      for (std::size_t i = first; i < last; ++i) plan.folds[f].push_back(i);
    }
    std::sort(plan.folds[f].begin(), plan.folds[f].end());
  }
  return plan;
}

FoldPlan split_cross(std::span<const std::int32_t> subjects, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("split_cross: K must be at least 2, got " + std::to_string(k));
  auto ids = distinct_subjects(subjects);
  const auto kk = static_cast<std::size_t>(k);
  if (ids.size() < kk) {
    throw ValidationError("split_cross: K=" + std::to_string(k) + " exceeds the " + std::to_string(ids.size()) +
                          " distinct subjects");
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::int32_t>(ids));

  const std::size_t per_fold = ids.size() / kk;
  std::map<std::int32_t, std::size_t> fold_of;
  for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = std::min(i / per_fold, kk - 1);

  FoldPlan plan;
  plan.mode = SplitMode::cross;
  plan.seed = seed;
  plan.folds.resize(kk);
  for (std::size_t i = 0; i < subjects.size(); ++i) plan.folds[fold_of[subjects[i]]].push_back(i);
  return plan;
}

FoldPlan make_plan(SplitMode mode, std::span<const std::int32_t> subjects, int k, std::uint64_t seed) {
  return mode == SplitMode::cross ? split_cross(subjects, k, seed) : split_intra(subjects.size(), k, seed);
}

std::vector<std::string> check_plan(const FoldPlan& plan, std::size_t n_samples,
                                    std::span<const std::int32_t> subjects) {
  std::vector<std::string> issues;
  std::vector<int> owner(n_samples, -1);
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (auto i : plan.folds[f]) {
      if (i >= n_samples) {
        issues.push_back("fold " + std::to_string(f) + " holds out-of-range index " + std::to_string(i));
      } else if (owner[i] >= 0) {
        issues.push_back("index " + std::to_string(i) + " is in folds " + std::to_string(owner[i]) + " and " +
                         std::to_string(f));
      } else {
        owner[i] = static_cast<int>(f);
      }
    }
  }
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (owner[i] < 0) issues.push_back("index " + std::to_string(i) + " is in no fold");
  }
  if (plan.mode == SplitMode::cross && !subjects.empty()) {
    std::map<std::int32_t, int> subject_fold;
    for (std::size_t i = 0; i < n_samples && i < subjects.size(); ++i) {
      if (owner[i] < 0) continue;
      auto [it, inserted] = subject_fold.emplace(subjects[i], owner[i]);
      if (!inserted && it->second != owner[i]) {
        issues.push_back("subject " + std::to_string(subjects[i]) + " spans folds " + std::to_string(it->second) +
                         " and " + std::to_string(owner[i]));
      }
    }
  }
  return issues;
}

nlohmann::json plan_to_json(const FoldPlan& plan) {
  return {{"mode", to_string(plan.mode)}, {"seed", plan.seed}, {"folds", plan.folds}};
}

FoldPlan plan_from_json(const nlohmann::json& j) {
  FoldPlan plan;
  try {
    plan.mode = parse_split_mode(j.at("mode").get<std::string>());
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.folds = j.at("folds").get<std::vector<std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::malformed, "fold plan: " + std::string(e.what()));
  }
  return plan;
}

}  // namespace eegraph
