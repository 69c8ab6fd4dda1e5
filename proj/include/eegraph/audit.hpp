#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "eegraph/dataset.hpp"

namespace eegraph {

/// Aggregated feature accesses for one tag.
struct AccessRecord {
  AccessTag tag;
  std::vector<std::size_t> indices;  // sorted, unique
  std::uint64_t first_seq = 0;
  std::uint64_t last_seq = 0;
  std::size_t accesses = 0;
};

/// Thread-safe record of which samples were read under which phase tag.
/// Sequence numbers are global and strictly increasing, so the relative
/// order of accesses made by one thread is preserved.
class AuditLog {
 public:
  void touch(const AccessTag& tag, std::span<const std::size_t> indices);

  /// All records ordered by first access.
  std::vector<AccessRecord> records() const;

  /// Describes every way outer fold `outer` read any of `test_indices` other
  /// than through the final "test" phase, or read under "test" before the
  /// fold's other phases were finished. Empty means the fold is leak-free.
  std::vector<std::string> find_leaks(int outer, std::span<const std::size_t> test_indices) const;

 private:
  using Key = std::tuple<std::string, int, int, int>;

  mutable std::mutex mutex_;
  std::map<Key, AccessRecord> records_;
  std::uint64_t next_seq_ = 1;
};

}  // namespace eegraph
