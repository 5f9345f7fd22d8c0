#include "desatscan/split.hpp"

#include <algorithm>

#include "desatscan/random.hpp"
#include "desatscan/tsv.hpp"

namespace desatscan {
namespace {

void deal(std::span<const std::string> ids, std::map<std::string, SplitRole>& out) {
  for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = kSplitRoles[i % kSplitRoles.size()];
}

std::vector<std::string> sorted(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

void check_disjoint(const GroupLists& lists) {
  auto d = sorted(lists.desaturated), u = sorted(lists.undesaturated);
  std::vector<std::string> both;
  std::set_intersection(d.begin(), d.end(), u.begin(), u.end(), std::back_inserter(both));
  if (!both.empty()) throw ConfigError("split: subject '" + both.front() + "' is in both classes");
}

}  // namespace

std::string_view to_string(Scheme s) {
  return s == Scheme::MaxSubjects ? "MaxSubjects" : "EqualSubjects";
}

std::optional<Scheme> parse_scheme(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "maxsubjects" || t == "max") return Scheme::MaxSubjects;
  if (t == "equalsubjects" || t == "equal") return Scheme::EqualSubjects;
  return std::nullopt;
}

std::string_view to_string(SplitRole r) {
  switch (r) {
    case SplitRole::Train: return "Train";
    case SplitRole::Test: return "Test";
    case SplitRole::Validation: return "Validation";
  }
  return "?";
}

std::optional<SplitRole> parse_split_role(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "train") return SplitRole::Train;
  if (t == "test") return SplitRole::Test;
  if (t == "validation") return SplitRole::Validation;
  return std::nullopt;
}

std::vector<std::string> CohortSplit::subjects(SplitRole role) const {
  std::vector<std::string> out;
  for (const auto& [id, r] : assignment)
    if (r == role) out.push_back(id);
  return out;
}

std::size_t CohortSplit::count(SplitRole role) const {
  return static_cast<std::size_t>(std::count_if(assignment.begin(), assignment.end(),
                                                [&](const auto& kv) { return kv.second == role; }));
}

std::uint64_t split_seed(std::uint64_t base_seed, SleepStage stage, Scheme scheme, int repeat_index) {
  return derive_seed(base_seed, {static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(scheme),
                                 static_cast<std::uint64_t>(repeat_index)});
}

CohortSplit max_subjects_split(const GroupedSubjects& groups, SleepStage stage, std::uint64_t seed) {
  CohortSplit split{stage, Scheme::MaxSubjects, 0, seed, {}};
  Rng rng(seed);
  for (const auto& [group, lists] : groups) {
    check_disjoint(lists);
    for (const auto* ids : {&lists.desaturated, &lists.undesaturated}) {
      auto order = sorted(*ids);
      rng.shuffle(std::span(order));
      deal(order, split.assignment);
    }
  }
  return split;
}

CohortSplit equal_subjects_split(const GroupedSubjects& groups, SleepStage stage,
                                 std::uint64_t seed, int repeat_index) {
  CohortSplit split{stage, Scheme::EqualSubjects, repeat_index, seed, {}};
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(repeat_index)}));
  for (const auto& [group, lists] : groups) {
    check_disjoint(lists);
    auto desat = sorted(lists.desaturated);
    auto undesat = sorted(lists.undesaturated);
    rng.shuffle(std::span(desat));
    rng.shuffle(std::span(undesat));
    const auto n = std::min(desat.size(), undesat.size());
    desat.resize(n);
    undesat.resize(n);
    deal(desat, split.assignment);
    deal(undesat, split.assignment);
  }
  return split;
}

void write_splits_tsv(const std::filesystem::path& path, std::span<const CohortSplit> splits) {
  TsvTable t;
  t.header = {"stage", "scheme", "repeat", "subject_id", "split"};
  for (const auto& s : splits)
    for (const auto& [id, role] : s.assignment)
      t.rows.push_back({std::string(to_string(s.stage)), std::string(to_string(s.scheme)),
                        std::to_string(s.repeat_index), id, std::string(to_string(role))});
  write_tsv(path, t);
}

std::vector<CohortSplit> read_splits_tsv(const std::filesystem::path& path) {
  const auto t = read_tsv(path);
  const auto c_stage = t.column("stage"), c_scheme = t.column("scheme"), c_rep = t.column("repeat"),
             c_id = t.column("subject_id"), c_split = t.column("split");
  std::vector<CohortSplit> out;
  for (const auto& r : t.rows) {
    const auto stage = parse_stage(r[c_stage]);
    const auto scheme = parse_scheme(r[c_scheme]);
    const auto role = parse_split_role(r[c_split]);
    if (!stage || !scheme || !role) throw ParseError("splits TSV: bad row for " + r[c_id]);
    const int rep = static_cast<int>(parse_int(r[c_rep], "repeat"));
    auto it = std::find_if(out.begin(), out.end(), [&](const CohortSplit& s) {
      return s.stage == *stage && s.scheme == *scheme && s.repeat_index == rep;
    });
    if (it == out.end()) {
      out.push_back({*stage, *scheme, rep, 0, {}});
      it = out.end() - 1;
    }
    it->assignment[r[c_id]] = *role;
  }
  return out;
}

}  // namespace desatscan
