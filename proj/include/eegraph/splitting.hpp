#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace eegraph {

enum class SplitMode { intra, cross };

std::string to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view name);

/// K disjoint index sets covering every sample. Indices within a fold are
/// sorted ascending.
struct FoldPlan {
  std::vector<std::vector<std::size_t>> folds;
  SplitMode mode = SplitMode::intra;
  std::uint64_t seed = 0;

  std::size_t k() const { return folds.size(); }

  /// Every index not in fold `i`, ascending.
  std::vector<std::size_t> complement(std::size_t i) const;
};

/// Seeded permutation cut into K parts whose sizes differ by at most one.
/// With block_size > 1, consecutive runs of that many samples move together.
FoldPlan split_intra(std::size_t n_samples, int k, std::uint64_t seed, std::size_t block_size = 1);

/// Shuffles distinct subjects; the first K-1 folds get floor(S/K) subjects
/// each and the last fold takes the rest.
FoldPlan split_cross(std::span<const std::int32_t> subjects, int k, std::uint64_t seed);

/// split_cross over `subjects`, or split_intra over their count.
FoldPlan make_plan(SplitMode mode, std::span<const std::int32_t> subjects, int k, std::uint64_t seed);

/// Problems with disjointness, coverage of [0, n_samples) or, for cross
/// plans, subject purity. Empty means valid.
std::vector<std::string> check_plan(const FoldPlan& plan, std::size_t n_samples,
                                    std::span<const std::int32_t> subjects = {});

nlohmann::json plan_to_json(const FoldPlan& plan);
FoldPlan plan_from_json(const nlohmann::json& j);

}  // namespace eegraph
