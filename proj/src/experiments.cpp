#include "desatscan/experiments.hpp"

#include <set>

#include "desatscan/epochs.hpp"
#include "desatscan/tsv.hpp"

namespace desatscan {

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::CrossPatient: return "CrossPatient";
    case Experiment::WithinPatient: return "WithinPatient";
    case Experiment::LatentMarker: return "LatentMarker";
  }
  return "?";
}

std::optional<Experiment> parse_experiment(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "crosspatient" || t == "cross") return Experiment::CrossPatient;
  if (t == "withinpatient" || t == "within") return Experiment::WithinPatient;
  if (t == "latentmarker" || t == "latent") return Experiment::LatentMarker;
  return std::nullopt;
}

bool epoch_has_desat(double start, double end, std::span<const AnnotationEvent> events,
                     const SignalTrace& spo2, double desat_spo2) {
  for (const auto& ev : events) {
    if (ev.kind != EventKind::Desaturation) continue;
    if (!share_sample(ev.onset, ev.end(), start, end)) continue;
    try {
      if (min_spo2_during(ev, spo2) < desat_spo2) return true;
    } catch (const Error&) {
    }
  }
  return false;
}

std::size_t LabeledDataset::positives() const {
  std::size_t n = 0;
  for (const auto& it : items) n += it.label == 1;
  return n;
}

std::size_t LabeledDataset::subject_count() const {
  std::set<std::string> ids;
  for (const auto& it : items) ids.insert(it.epoch.subject_id);
  return ids.size();
}

int experiment_label(Experiment experiment, SubjectClass cls, bool has_desat) {
  if (cls == SubjectClass::Excluded) return -1;
  const bool desat_subject = cls == SubjectClass::Desaturated;
  switch (experiment) {
    case Experiment::CrossPatient:
      if (desat_subject) return has_desat ? 1 : -1;
      return 0;
    case Experiment::WithinPatient:
      if (!desat_subject) return -1;
      return has_desat ? 1 : 0;
    case Experiment::LatentMarker:
      if (desat_subject) return has_desat ? -1 : 1;
      return 0;
  }
  return -1;
}

ExperimentData build_experiment(Experiment experiment,
                                const std::map<std::string, SubjectClass>& classes,
                                const CohortSplit& split, std::span<const EpochRecord> epochs,
                                PosWeightMode mode) {
  ExperimentData data;
  for (auto role : kSplitRoles) {
    auto& ds = data.splits[static_cast<std::size_t>(role)];
    ds.experiment = experiment;
    ds.stage = split.stage;
    ds.split = role;
  }

  std::set<std::string> contributing;
  for (const auto& ep : epochs) {
    if (ep.stage != split.stage) continue;
    const auto role = split.assignment.find(ep.subject_id);
    if (role == split.assignment.end()) continue;
    const auto cls = classes.find(ep.subject_id);
    if (cls == classes.end()) continue;
    const int label = experiment_label(experiment, cls->second, ep.has_desat);
    if (label < 0) continue;
    data.splits[static_cast<std::size_t>(role->second)].items.push_back({ep, label});
    contributing.insert(ep.subject_id);
  }
  data.dropped_subjects = split.assignment.size() - contributing.size();

  const auto& train = data.splits[0];
  const auto pos = train.positives();
  const auto total = train.items.size();
  if (pos == 0 || pos == total)
    throw ConfigError(std::string(to_string(experiment)) + "/" + std::string(to_string(split.stage)) +
                      ": training split needs both classes (" + std::to_string(pos) + " of " +
                      std::to_string(total) + " positive)");
  const double w = mode == PosWeightMode::TotalOverPositive
                       ? static_cast<double>(total) / static_cast<double>(pos)
                       : static_cast<double>(total - pos) / static_cast<double>(pos);
  for (auto& ds : data.splits) ds.pos_weight = w;
  return data;
}

void write_manifest_tsv(const std::filesystem::path& path, std::span<const LabeledItem> items) {
  TsvTable t;
  t.header = {"subject_id", "stage", "epoch_index", "label", "path"};
  for (const auto& it : items)
    t.rows.push_back({it.epoch.subject_id, std::string(to_string(it.epoch.stage)),
                      std::to_string(it.epoch.epoch_index), std::to_string(it.label), it.epoch.path});
  write_tsv(path, t);
}

std::vector<LabeledItem> read_manifest_tsv(const std::filesystem::path& path) {
  const auto t = read_tsv(path);
  const auto c_id = t.column("subject_id"), c_stage = t.column("stage"),
             c_ep = t.column("epoch_index"), c_label = t.column("label"), c_path = t.column("path");
  std::vector<LabeledItem> out;
  for (const auto& r : t.rows) {
    LabeledItem it;
    it.epoch.subject_id = r[c_id];
    const auto st = parse_stage(r[c_stage]);
    if (!st) throw ParseError("manifest: bad stage '" + r[c_stage] + "'");
    it.epoch.stage = *st;
    it.epoch.epoch_index = static_cast<int>(parse_int(r[c_ep], "epoch_index"));
    it.epoch.start = it.epoch.epoch_index * kEpochSeconds;
    it.label = static_cast<int>(parse_int(r[c_label], "label"));
    if (it.label != 0 && it.label != 1) throw ParseError("manifest: label must be 0 or 1");
    it.epoch.has_desat = it.label == 1;
    it.epoch.path = r[c_path];
    out.push_back(std::move(it));
  }
  return out;
}

}  // namespace desatscan
