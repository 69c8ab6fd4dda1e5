#include "eegraph/audit.hpp"

#include <algorithm>
#include <iterator>

namespace eegraph {

void AuditLog::touch(const AccessTag& tag, std::span<const std::size_t> indices) {
  std::vector<std::size_t> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::lock_guard lock(mutex_);
  const std::uint64_t seq = next_seq_++;
  auto [it, inserted] =
      records_.try_emplace(Key{tag.phase, tag.outer_fold, tag.inner_fold, tag.grid_point});
  auto& rec = it->second;
  if (inserted) {
    rec.tag = tag;
    rec.first_seq = seq;
    rec.indices = std::move(sorted);
  } else {
    std::vector<std::size_t> merged;
    merged.reserve(rec.indices.size() + sorted.size());
    std::set_union(rec.indices.begin(), rec.indices.end(), sorted.begin(), sorted.end(),
                   std::back_inserter(merged));
    rec.indices = std::move(merged);
  }
  rec.last_seq = seq;
  ++rec.accesses;
}

std::vector<AccessRecord> AuditLog::records() const {
  std::vector<AccessRecord> out;
  {
    std::lock_guard lock(mutex_);
    out.reserve(records_.size());
    for (const auto& [key, rec] : records_) out.push_back(rec);
  }
  std::sort(out.begin(), out.end(),
            [](const AccessRecord& a, const AccessRecord& b) { return a.first_seq < b.first_seq; });
  return out;
}

std::vector<std::string> AuditLog::find_leaks(int outer,
                                              std::span<const std::size_t> test_indices) const {
  std::vector<std::size_t> test(test_indices.begin(), test_indices.end());
  std::sort(test.begin(), test.end());

  std::vector<std::string> leaks;
  std::uint64_t last_other = 0;
  std::uint64_t first_test = 0;
  bool saw_test = false;
  for (const auto& rec : records()) {
    if (rec.tag.outer_fold != outer) continue;
    if (rec.tag.phase == "test") {
      saw_test = true;
      first_test = rec.first_seq;
      if (!std::includes(test.begin(), test.end(), rec.indices.begin(), rec.indices.end())) {
        leaks.push_back("outer fold " + std::to_string(outer) +
                        ": test phase read samples outside the test fold");
      }
      continue;
    }
    last_other = std::max(last_other, rec.last_seq);
    std::vector<std::size_t> overlap;
    std::set_intersection(rec.indices.begin(), rec.indices.end(), test.begin(), test.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) {
      leaks.push_back("outer fold " + std::to_string(outer) + ": phase '" + rec.tag.phase +
                      "' (inner " + std::to_string(rec.tag.inner_fold) + ", grid " +
                      std::to_string(rec.tag.grid_point) + ") read " +
                      std::to_string(overlap.size()) + " test samples, first index " +
                      std::to_string(overlap.front()));
    }
  }
  if (saw_test && first_test < last_other) {
    leaks.push_back("outer fold " + std::to_string(outer) +
                    ": test fold was read before training finished");
  }
  return leaks;
}

}  // namespace eegraph
