#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "desatscan/cohort.hpp"

namespace desatscan {

enum class Scheme : std::uint8_t { MaxSubjects, EqualSubjects };
enum class SplitRole : std::uint8_t { Train, Test, Validation };

inline constexpr std::array<SplitRole, 3> kSplitRoles = {SplitRole::Train, SplitRole::Test,
                                                         SplitRole::Validation};

std::string_view to_string(Scheme s);
std::optional<Scheme> parse_scheme(std::string_view text);
std::string_view to_string(SplitRole r);
std::optional<SplitRole> parse_split_role(std::string_view text);

struct CohortSplit {
  SleepStage stage = SleepStage::N1;
  Scheme scheme = Scheme::MaxSubjects;
  int repeat_index = 0;
  std::uint64_t seed = 0;
  std::map<std::string, SplitRole> assignment;

  std::vector<std::string> subjects(SplitRole role) const;
  std::size_t count(SplitRole role) const;
};

/// Child seed for one (stage, scheme, repeat) split.
std::uint64_t split_seed(std::uint64_t base_seed, SleepStage stage, Scheme scheme, int repeat_index);

/// Uses every subject. Per group and per class the ids are shuffled by
/// `seed` and dealt round-robin Train, Test, Validation.
CohortSplit max_subjects_split(const GroupedSubjects& groups, SleepStage stage, std::uint64_t seed);

/// Per group, n = min(#desaturated, #undesaturated) subjects of each class
/// (the larger class sampled without replacement), both dealt round-robin so
/// every split holds equal class counts per group.
CohortSplit equal_subjects_split(const GroupedSubjects& groups, SleepStage stage,
                                 std::uint64_t seed, int repeat_index);

/// stage, scheme, repeat, subject_id, split
void write_splits_tsv(const std::filesystem::path& path, std::span<const CohortSplit> splits);
std::vector<CohortSplit> read_splits_tsv(const std::filesystem::path& path);

}  // namespace desatscan
