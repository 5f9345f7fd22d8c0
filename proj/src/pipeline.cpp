#include "desatscan/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <tuple>

#include "desatscan/dstf.hpp"
#include "desatscan/filter.hpp"
#include "desatscan/random.hpp"
#include "desatscan/tsv.hpp"

namespace desatscan {

namespace fs = std::filesystem;

SubjectRecord make_subject_record(const Demographic& demo, std::vector<AnnotationEvent> annotations,
                                  const Recording& recording) {
  const auto* spo2 = recording.find(kSpo2Label);
  if (!spo2) throw ParseError(demo.subject_id + ": recording has no SpO2 channel");
  SubjectRecord s;
  s.subject_id = demo.subject_id;
  s.age = demo.age;
  s.gender = demo.gender;
  s.annotations = std::move(annotations);
  s.spo2 = *spo2;
  return s;
}

PreprocessedSubject preprocess_subject(const Recording& recording, const SubjectRecord& subject,
                                       std::span<const SleepStage> stages, double desat_spo2,
                                       Execution exec) {
  const auto missing = required_channels_check(recording.header, kEegChannels);
  if (!missing.empty())
    throw ParseError(subject.subject_id + ": recording lacks channel '" + missing.front() + "'");

  Recording clean;
  clean.header = recording.header;
  clean.traces.resize(kEegChannels.size());
  const auto n = static_cast<std::ptrdiff_t>(kEegChannels.size());
  const NotchBands notches;
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (std::ptrdiff_t c = 0; c < n; ++c)
    clean.traces[static_cast<std::size_t>(c)] =
        denoise(*recording.find(kEegChannels[static_cast<std::size_t>(c)]), notches);

  auto seg = segment_epochs(clean, subject.annotations, kEegChannels, stages);
  auto tensors = featurize_epochs(seg.epochs, {}, exec);

  PreprocessedSubject out;
  out.dropped = seg.dropped;
  for (std::size_t i = 0; i < seg.epochs.size(); ++i) {
    const auto& iv = seg.epochs[i].interval;
    EpochRecord r;
    r.subject_id = subject.subject_id;
    r.stage = iv.stage;
    r.epoch_index = iv.epoch_index;
    r.start = iv.start;
    r.has_desat = epoch_has_desat(iv.start, iv.end, subject.annotations, subject.spo2, desat_spo2);
    out.epochs.push_back(std::move(r));
    out.tensors.push_back(std::make_shared<const std::vector<float>>(std::move(tensors[i].data)));
  }
  return out;
}

void write_epochs_tsv(const fs::path& path, std::span<const EpochRecord> epochs) {
  TsvTable t;
  t.header = {"subject_id", "stage", "epoch_index", "start", "has_desat", "path"};
  for (const auto& e : epochs)
    t.rows.push_back({e.subject_id, std::string(to_string(e.stage)), std::to_string(e.epoch_index),
                      format_fixed(e.start, 3), e.has_desat ? "1" : "0", e.path});
  write_tsv(path, t);
}

std::vector<EpochRecord> read_epochs_tsv(const fs::path& path) {
  const auto t = read_tsv(path);
  const auto ci = t.column("subject_id"), cs = t.column("stage"), ce = t.column("epoch_index"),
             ct = t.column("start"), cd = t.column("has_desat"), cp = t.column("path");
  std::vector<EpochRecord> out;
  for (const auto& r : t.rows) {
    EpochRecord e;
    e.subject_id = r[ci];
    const auto st = parse_stage(r[cs]);
    if (!st) throw ParseError(path.string() + ": bad stage '" + r[cs] + "'");
    e.stage = *st;
    e.epoch_index = static_cast<int>(parse_int(r[ce], "epoch_index"));
    e.start = parse_double(r[ct], "start");
    e.has_desat = parse_int(r[cd], "has_desat") != 0;
    e.path = r[cp];
    out.push_back(std::move(e));
  }
  return out;
}

nn::TensorDataset to_tensor_dataset(const LabeledDataset& data, const TensorLookup& lookup) {
  nn::TensorDataset d;
  d.channels = static_cast<int>(kEpochChannels);
  d.height = static_cast<int>(kFreqBins);
  d.width = static_cast<int>(kTimeBins);
  for (const auto& it : data.items) d.add(lookup(it.epoch), it.label);
  return d;
}

std::uint64_t run_seed(std::uint64_t base, Experiment e, SleepStage stage, Scheme scheme, int repeat) {
  return derive_seed(base, {0x72756e, static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(stage),
                            static_cast<std::uint64_t>(scheme), static_cast<std::uint64_t>(repeat)});
}

std::string run_name(Experiment e, SleepStage stage, Scheme scheme, int repeat) {
  char r[16];
  std::snprintf(r, sizeof r, "_r%02d", repeat);
  return std::string(to_string(e)) + "_" + std::string(to_string(stage)) + "_" +
         std::string(to_string(scheme)) + r;
}

RunOutcome run_experiment(const ExperimentData& data, const CohortSplit& split,
                          const TensorLookup& lookup, const nn::ModelConfig& model,
                          const nn::TrainOptions& options) {
  const auto train_set = to_tensor_dataset(data[SplitRole::Train], lookup);
  const auto test_set = to_tensor_dataset(data[SplitRole::Test], lookup);
  const auto val_set = to_tensor_dataset(data[SplitRole::Validation], lookup);
  auto opts = options;
  opts.pos_weight = data[SplitRole::Train].pos_weight;
  RunOutcome out;
  out.trained = nn::train<float>(train_set, test_set, model, opts);
  out.validation_scores = nn::predict(out.trained.model, val_set, opts.exec);
  auto& r = out.result;
  r.experiment = data[SplitRole::Train].experiment;
  r.stage = split.stage;
  r.scheme = split.scheme;
  r.repeat = split.repeat_index;
  r.n_train = data[SplitRole::Train].subject_count();
  r.n_test = data[SplitRole::Test].subject_count();
  r.n_validation = data[SplitRole::Validation].subject_count();
  r.ba = balanced_accuracy(out.validation_scores, val_set.labels);
  r.auc = roc_auc(out.validation_scores, val_set.labels);
  return out;
}

namespace {

void say(const CommandContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n' << std::flush;
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw MissingInputError(p.string());
}

void write_text(const fs::path& p, const std::string& text) {
  write_file_bytes(p, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("cannot create " + p.string() + ": " + ec.message());
}

std::vector<Demographic> load_demographics(const PipelineConfig& cfg) {
  const auto p = cfg.data_dir / "demographics.tsv";
  require_file(p);
  return read_demographics_tsv(p);
}

struct LoadedSubject {
  SubjectRecord record;
  Recording recording;
};

LoadedSubject load_subject(const PipelineConfig& cfg, const Demographic& demo) {
  const auto edf = cfg.data_dir / (demo.subject_id + ".edf");
  const auto ann = cfg.data_dir / (demo.subject_id + ".tsv");
  require_file(edf);
  require_file(ann);
  LoadedSubject s;
  s.recording = read_edf(edf);
  if (!s.recording.find(kSpo2Label))
    throw MissingInputError(edf.string() + " (channel " + std::string(kSpo2Label) + ")");
  s.record = make_subject_record(demo, read_annotations(ann.string()), s.recording);
  return s;
}

bool looks_like_synth_output(const fs::path& entry) {
  const auto name = entry.filename().string();
  const auto ext = entry.extension().string();
  if (name == "demographics.tsv" || name == "ground_truth.tsv" || name == "synth_config.txt") return true;
  return name.size() > 1 && name[0] == 'S' && (ext == ".edf" || ext == ".tsv");
}

}  // namespace

void cmd_synth(const CommandContext& ctx) {
  auto cfg = ctx.config;
  cfg.validate();
  cfg.synth.seed = cfg.seed;
  const auto& dir = cfg.data_dir;
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!ctx.force)
      throw ConfigError(dir.string() + " is not empty; rerun with --force to overwrite");
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && looks_like_synth_output(e.path())) fs::remove(e.path());
  }
  const auto truth = generate_cohort(cfg.synth, dir);
  write_text(dir / "synth_config.txt", format_config(cfg));
  std::size_t desat = 0;
  for (const auto& t : truth) desat += t.cls == SubjectClass::Desaturated;
  say(ctx, "synth: " + std::to_string(truth.size()) + " subjects (" + std::to_string(desat) +
               " desaturated) written to " + dir.string());
}

void cmd_preprocess(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  cfg.validate();
  const auto demos = load_demographics(cfg);
  make_dirs(cfg.out_dir / "tensors");
  write_text(cfg.out_dir / "config.txt", format_config(cfg));
  std::vector<EpochRecord> all;
  std::size_t dropped = 0;
  for (const auto& demo : demos) {
    const auto s = load_subject(cfg, demo);
    const auto edf = cfg.data_dir / (demo.subject_id + ".edf");
    const auto missing = required_channels_check(s.recording.header, kEegChannels);
    if (!missing.empty()) throw MissingInputError(edf.string() + " (channel " + missing.front() + ")");
    auto pre = preprocess_subject(s.recording, s.record, cfg.stages, cfg.thresholds.desat_spo2);
    const auto subdir = fs::path("tensors") / demo.subject_id;
    make_dirs(cfg.out_dir / subdir);
    for (std::size_t i = 0; i < pre.epochs.size(); ++i) {
      auto& e = pre.epochs[i];
      char name[32];
      std::snprintf(name, sizeof name, "%s_%05d.dstf", std::string(to_string(e.stage)).c_str(),
                    e.epoch_index);
      e.path = (subdir / name).generic_string();
      const std::uint32_t dims[3] = {static_cast<std::uint32_t>(kEpochChannels),
                                     static_cast<std::uint32_t>(kFreqBins),
                                     static_cast<std::uint32_t>(kTimeBins)};
      write_dstf(cfg.out_dir / e.path, dims, *pre.tensors[i]);
      all.push_back(e);
    }
    dropped += pre.dropped;
    say(ctx, "preprocess: " + demo.subject_id + " " + std::to_string(pre.epochs.size()) + " epochs");
  }
  write_epochs_tsv(cfg.out_dir / "epochs.tsv", all);
  say(ctx, "preprocess: " + std::to_string(all.size()) + " epochs from " +
               std::to_string(demos.size()) + " subjects, " + std::to_string(dropped) +
               " incomplete blocks dropped");
}

void cmd_cohort(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  cfg.validate();
  const auto demos = load_demographics(cfg);
  std::vector<SubjectRecord> subjects;
  for (const auto& demo : demos) subjects.push_back(load_subject(cfg, demo).record);
  const auto cohort = build_cohort(subjects, cfg.stages, cfg.thresholds);
  make_dirs(cfg.out_dir);
  write_cohort_tsv(cfg.out_dir / "cohort.tsv", cohort.entries);
  for (auto stage : cfg.stages) {
    const auto groups = group_subjects(cohort.entries, stage);
    std::string line = "cohort: " + std::string(table_name(stage));
    for (const auto& g : all_groups()) {
      const auto it = groups.find(g);
      const auto d = it == groups.end() ? 0 : it->second.desaturated.size();
      const auto u = it == groups.end() ? 0 : it->second.undesaturated.size();
      line += " | " + g.label() + " " + std::to_string(d) + "/" + std::to_string(u);
    }
    say(ctx, line);
  }
  if (cohort.out_of_range)
    say(ctx, "cohort: " + std::to_string(cohort.out_of_range) + " subjects outside the age range");
}

void cmd_split(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  cfg.validate();
  const auto path = cfg.out_dir / "cohort.tsv";
  require_file(path);
  const auto entries = read_cohort_tsv(path);
  std::vector<CohortSplit> splits;
  for (auto stage : cfg.stages) {
    const auto groups = group_subjects(entries, stage);
    if (cfg.scheme == Scheme::MaxSubjects) {
      splits.push_back(max_subjects_split(groups, stage, split_seed(cfg.seed, stage, cfg.scheme, 0)));
    } else {
      for (int r = 0; r < cfg.repeats; ++r)
        splits.push_back(
            equal_subjects_split(groups, stage, split_seed(cfg.seed, stage, cfg.scheme, r), r));
    }
  }
  write_splits_tsv(cfg.out_dir / "splits.tsv", splits);
  say(ctx, "split: " + std::to_string(splits.size()) + " splits written");
}

void cmd_train(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  cfg.validate();
  const auto cohort_path = cfg.out_dir / "cohort.tsv";
  const auto splits_path = cfg.out_dir / "splits.tsv";
  const auto epochs_path = cfg.out_dir / "epochs.tsv";
  require_file(cohort_path);
  require_file(splits_path);
  require_file(epochs_path);
  const auto entries = read_cohort_tsv(cohort_path);
  const auto splits = read_splits_tsv(splits_path);
  const auto epochs = read_epochs_tsv(epochs_path);

  std::map<std::string, TensorPtr> cache;
  const TensorLookup lookup = [&](const EpochRecord& e) -> TensorPtr {
    auto it = cache.find(e.path);
    if (it != cache.end()) return it->second;
    const auto p = cfg.out_dir / e.path;
    require_file(p);
    auto t = read_dstf(p);
    auto ptr = std::make_shared<const std::vector<float>>(std::move(t.data));
    cache.emplace(e.path, ptr);
    return ptr;
  };

  std::vector<RunResult> fresh;
  for (const auto& split : splits) {
    if (split.scheme != cfg.scheme) continue;
    if (std::find(cfg.stages.begin(), cfg.stages.end(), split.stage) == cfg.stages.end()) continue;
    if (split.scheme == Scheme::EqualSubjects && split.repeat_index >= cfg.repeats) continue;
    const auto classes = stage_classes(entries, split.stage);
    const auto data = build_experiment(cfg.experiment, classes, split, epochs, cfg.pos_weight_mode);
    auto model = cfg.model;
    model.seed = run_seed(cfg.seed, cfg.experiment, split.stage, split.scheme, split.repeat_index);
    const auto name = run_name(cfg.experiment, split.stage, split.scheme, split.repeat_index);
    say(ctx, "train: " + name + " (" + std::to_string(data[SplitRole::Train].items.size()) +
                 " training epochs)");
    const auto out = run_experiment(data, split, lookup, model);

    const auto dir = cfg.out_dir / "runs" / name;
    make_dirs(dir);
    nn::write_checkpoint(dir / "checkpoint.dsck", out.trained.model);
    nn::write_train_log(dir / "train_log.tsv", out.trained.history);
    write_manifest_tsv(dir / "train.tsv", data[SplitRole::Train].items);
    write_manifest_tsv(dir / "test.tsv", data[SplitRole::Test].items);
    write_manifest_tsv(dir / "validation.tsv", data[SplitRole::Validation].items);
    TsvTable scores;
    scores.header = {"subject_id", "stage", "epoch_index", "label", "score"};
    const auto& val = data[SplitRole::Validation].items;
    for (std::size_t i = 0; i < val.size(); ++i)
      scores.rows.push_back({val[i].epoch.subject_id, std::string(to_string(val[i].epoch.stage)),
                             std::to_string(val[i].epoch.epoch_index), std::to_string(val[i].label),
                             format_fixed(out.validation_scores[i], 8)});
    write_tsv(dir / "validation_scores.tsv", scores);
    say(ctx, "train: " + name + " best epoch " + std::to_string(out.trained.history.best_epoch) +
                 ", validation BA " + format_fixed(out.result.ba, 3) + ", AUC " +
                 format_fixed(out.result.auc, 3));
    fresh.push_back(out.result);
  }

  // Merge into runs.tsv, replacing rows with the same key.
  using Key = std::tuple<Experiment, SleepStage, Scheme, int>;
  std::map<Key, RunResult> merged;
  const auto runs_path = cfg.out_dir / "runs.tsv";
  if (fs::is_regular_file(runs_path))
    for (const auto& r : read_runs_tsv(runs_path)) merged[{r.experiment, r.stage, r.scheme, r.repeat}] = r;
  for (const auto& r : fresh) merged[{r.experiment, r.stage, r.scheme, r.repeat}] = r;
  std::vector<RunResult> rows;
  for (const auto& [k, r] : merged) rows.push_back(r);
  write_runs_tsv(runs_path, rows);
}

std::string cmd_report(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  cfg.validate();
  std::vector<RunResult> runs;
  const auto runs_path = cfg.out_dir / "runs.tsv";
  if (fs::is_regular_file(runs_path)) runs = read_runs_tsv(runs_path);
  const auto rows = make_report(runs, cfg.ci_method);
  const auto text = format_report_text(rows);
  make_dirs(cfg.out_dir);
  write_text(cfg.out_dir / "report.tsv", format_report_tsv(rows));
  write_text(cfg.out_dir / "report.txt", text);
  return text;
}

}  // namespace desatscan
