#include "desatscan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "desatscan/dstf.hpp"
#include "desatscan/epochs.hpp"
#include "desatscan/fft.hpp"
#include "desatscan/random.hpp"
#include "desatscan/tsv.hpp"

namespace desatscan {

namespace {

constexpr std::size_t kSynthFft = 8192;
constexpr double kEegPhysicalLimit = 1000.0;  // microvolts
constexpr double kDeltaLo = 0.5, kDeltaHi = 4.0;

std::string_view stage_description(SleepStage s) {
  switch (s) {
    case SleepStage::Wake: return "Sleep stage W";
    case SleepStage::N1: return "Sleep stage N1";
    case SleepStage::N2: return "Sleep stage N2";
    case SleepStage::N3: return "Sleep stage N3";
    case SleepStage::REM: return "Sleep stage R";
  }
  return "Sleep stage W";
}

std::string short_stage(SleepStage s) {
  return s == SleepStage::Wake ? "W" : s == SleepStage::REM ? "REM" : std::string(to_string(s));
}

/// Stage of every epoch of the night.
std::vector<SleepStage> night_stages(const SynthConfig& cfg) {
  const auto n = static_cast<std::size_t>(std::llround(cfg.night_duration / kEpochSeconds));
  std::vector<SleepStage> out;
  out.reserve(n);
  while (out.size() < n)
    for (const auto& run : cfg.stage_cycle)
      for (int i = 0; i < run.epochs && out.size() < n; ++i) out.push_back(run.stage);
  return out;
}

struct Event {
  double onset, duration, nadir;
};

bool collides(const std::vector<Event>& events, double onset, double duration, double gap) {
  for (const auto& e : events)
    if (onset < e.onset + e.duration + gap && e.onset < onset + duration + gap) return true;
  return false;
}

/// Per-bin amplitude of unit-RMS 1/f noise, flat below the delta edge.
std::vector<double> spectral_shape(double exponent) {
  const std::size_t n = kSynthFft;
  const double df = kEegSampleRate / static_cast<double>(n);
  std::vector<double> amp(n / 2, 0.0);
  double power = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    amp[k] = std::pow(std::max(static_cast<double>(k) * df, kDeltaLo), -exponent / 2.0);
    power += amp[k] * amp[k];
  }
  // Time-domain variance is 2 * sum(amp^2) / n^2.
  const double scale = static_cast<double>(n) / std::sqrt(2.0 * power);
  for (auto& a : amp) a *= scale;
  return amp;
}

/// One channel-epoch of 1/f Gaussian noise with an optional delta boost.
void colored_epoch(Rng& rng, std::span<const double> shape, double rms, double delta_gain,
                   std::vector<std::complex<double>>& spec, double* out) {
  const std::size_t n = kSynthFft;
  const double df = kEegSampleRate / static_cast<double>(n);
  std::fill(spec.begin(), spec.end(), std::complex<double>{});
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double f = static_cast<double>(k) * df;
    double amp = rms * shape[k] / std::numbers::sqrt2;
    if (f >= kDeltaLo && f <= kDeltaHi) amp *= delta_gain;
    const double re = rng.normal(), im = rng.normal();
    spec[k] = amp * std::complex<double>(re, im);
    spec[n - k] = std::conj(spec[k]);
  }
  fft_inplace(spec, true);
  const auto len = static_cast<std::size_t>(kEpochSeconds * kEegSampleRate);
  for (std::size_t i = 0; i < len; ++i) out[i] = spec[i].real() / static_cast<double>(n);
}

}  // namespace

void SynthConfig::validate() const {
  if (subjects_per_class < 0) throw ConfigError("synth: subjects_per_class must be >= 0");
  if (!(night_duration > 0) || std::fmod(night_duration, kEpochSeconds) != 0.0)
    throw ConfigError("synth: night_duration must be a positive multiple of 30 s");
  if (!(desat_rate >= 0)) throw ConfigError("synth: desat_rate must be >= 0");
  if (!std::isfinite(desat_effect_db) || !std::isfinite(latent_effect_db))
    throw ConfigError("synth: effect sizes must be finite");
  if (!(noise_exponent >= 0) || !std::isfinite(noise_exponent))
    throw ConfigError("synth: noise_exponent must be finite and >= 0");
  if (!(line_noise_uv >= 0)) throw ConfigError("synth: line_noise_uv must be >= 0");
  if (stage_cycle.empty()) throw ConfigError("synth: stage cycle is empty");
  for (const auto& r : stage_cycle)
    if (r.epochs < 1) throw ConfigError("synth: stage cycle runs need >= 1 epoch");
  const auto stages = night_stages(*this);
  for (auto s : kAnalysisStages)
    if (std::find(stages.begin(), stages.end(), s) == stages.end())
      throw ConfigError("synth: the night has no " + std::string(to_string(s)) + " epoch");
}

std::vector<StageRun> parse_stage_cycle(std::string_view text) {
  std::vector<StageRun> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    const auto stage = parse_stage(item.substr(0, colon));
    if (colon == std::string_view::npos || !stage)
      throw ConfigError("synth.stage_cycle: expected <stage>:<epochs>, got '" + std::string(item) + "'");
    long long n = 0;
    try {
      n = parse_int(item.substr(colon + 1), "stage_cycle");
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
    out.push_back({*stage, static_cast<int>(n)});
  }
  return out;
}

std::string format_stage_cycle(std::span<const StageRun> cycle) {
  std::string s;
  for (const auto& r : cycle) {
    if (!s.empty()) s += ",";
    s += short_stage(r.stage) + ":" + std::to_string(r.epochs);
  }
  return s;
}

double stage_eeg_rms(SleepStage stage) {
  switch (stage) {
    case SleepStage::Wake: return 20.0;
    case SleepStage::N1: return 25.0;
    case SleepStage::N2: return 30.0;
    case SleepStage::N3: return 50.0;
    case SleepStage::REM: return 25.0;
  }
  return 25.0;
}

SynthSubject generate_subject(const SynthConfig& cfg, GroupId group, SubjectClass cls,
                              const std::string& subject_id, std::uint64_t seed) {
  cfg.validate();
  if (cls == SubjectClass::Excluded) throw ConfigError("synth: cannot plant the Excluded class");
  const bool desat = cls == SubjectClass::Desaturated;
  Rng rng(seed);
  SynthSubject out;
  out.group = group;
  out.planted = cls;

  auto& rec = out.record;
  rec.subject_id = subject_id;
  rec.gender = group.gender;
  const auto b = static_cast<std::size_t>(group.band);
  const double lo = kAgeBandEdges[b], hi = kAgeBandEdges[b + 1];
  rec.age = std::min(std::floor(rng.uniform(lo, hi) * 10.0) / 10.0, hi - 0.1);

  // Stage annotations, one per run of equal stages.
  const auto stages = night_stages(cfg);
  for (std::size_t i = 0; i < stages.size();) {
    std::size_t j = i;
    while (j < stages.size() && stages[j] == stages[i]) ++j;
    rec.annotations.push_back({static_cast<double>(i) * kEpochSeconds,
                               static_cast<double>(j - i) * kEpochSeconds, EventKind::SleepStage,
                               stages[i], std::string(stage_description(stages[i]))});
    i = j;
  }

  // Desaturation events: one anchored in each analysis stage, the rest uniform.
  std::vector<Event> events;
  if (desat) {
    const double night = cfg.night_duration;
    const auto target = std::max<long long>(
        static_cast<long long>(kAnalysisStages.size()),
        std::llround(cfg.desat_rate * night / 3600.0));
    for (auto s : kAnalysisStages) {
      std::vector<std::size_t> candidates;
      for (std::size_t e = 0; e < stages.size(); ++e)
        if (stages[e] == s) candidates.push_back(e);
      for (int attempt = 0; attempt < 1000; ++attempt) {
        const auto e = candidates[rng.below(candidates.size())];
        const double dur = rng.uniform(15.0, 40.0);
        const double onset = static_cast<double>(e) * kEpochSeconds + rng.uniform(0.0, 25.0);
        if (onset + dur > night || collides(events, onset, dur, 10.0)) continue;
        events.push_back({onset, dur, rng.uniform(85.0, 89.0)});
        break;
      }
    }
    for (int attempt = 0; attempt < 100000 && static_cast<long long>(events.size()) < target; ++attempt) {
      const double dur = rng.uniform(15.0, 40.0);
      const double onset = rng.uniform(0.0, night - dur);
      if (collides(events, onset, dur, 10.0)) continue;
      events.push_back({onset, dur, rng.uniform(85.0, 89.0)});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.onset < b.onset; });
    for (const auto& ev : events) {
      const double ap_onset = std::max(0.0, ev.onset - rng.uniform(5.0, 15.0));
      rec.annotations.push_back({ap_onset, rng.uniform(10.0, 20.0), EventKind::Apnea,
                                 SleepStage::Wake, "Obstructive Apnea"});
      rec.annotations.push_back({ev.onset, ev.duration, EventKind::Desaturation, SleepStage::Wake,
                                 "Oxygen Desaturation"});
    }
    std::stable_sort(rec.annotations.begin(), rec.annotations.end(),
                     [](const AnnotationEvent& a, const AnnotationEvent& b) { return a.onset < b.onset; });
  }

  // SpO2 at 1 Hz with linear dips inside each event.
  const auto n_spo2 = static_cast<std::size_t>(cfg.night_duration);
  rec.spo2 = {std::string(kSpo2Label), 1.0, std::vector<double>(n_spo2)};
  const double base = desat ? rng.uniform(95.5, 97.5) : rng.uniform(97.0, 98.5);
  for (auto& v : rec.spo2.samples)
    v = std::clamp(base + 0.3 * rng.normal(), desat ? 92.0 : 96.0, 100.0);
  for (const auto& ev : events) {
    const double mid = ev.onset + ev.duration / 2.0;
    for (auto t = static_cast<std::size_t>(std::ceil(ev.onset));
         t < n_spo2 && static_cast<double>(t) <= ev.onset + ev.duration; ++t) {
      const double frac = 1.0 - std::abs(static_cast<double>(t) - mid) / (ev.duration / 2.0);
      rec.spo2.samples[t] = base - (base - ev.nadir) * std::max(0.0, frac);
    }
  }

  // Epochs overlapping an event.
  std::vector<bool> boosted(stages.size(), false);
  for (std::size_t e = 0; e < stages.size(); ++e) {
    const double s0 = static_cast<double>(e) * kEpochSeconds;
    for (const auto& ev : events)
      if (share_sample(s0, s0 + kEpochSeconds, ev.onset, ev.onset + ev.duration)) {
        boosted[e] = true;
        out.desat_epochs.push_back(static_cast<int>(e));
        break;
      }
  }

  // EEG.
  const auto epoch_len = static_cast<std::size_t>(kEpochSeconds * kEegSampleRate);
  const std::size_t total = stages.size() * epoch_len;
  const double subject_gain = std::exp(0.1 * rng.normal());
  const double phase60 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase120 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<std::complex<double>> spec(kSynthFft);
  const auto shape = spectral_shape(cfg.noise_exponent);
  // 60 and 120 Hz complete whole cycles every second.
  const auto period = static_cast<std::size_t>(kEegSampleRate);
  std::vector<double> hum(period);
  for (std::size_t i = 0; i < period; ++i) {
    const double t = static_cast<double>(i) / kEegSampleRate;
    hum[i] = cfg.line_noise_uv * std::sin(2.0 * std::numbers::pi * 60.0 * t + phase60) +
             0.4 * cfg.line_noise_uv * std::sin(2.0 * std::numbers::pi * 120.0 * t + phase120);
  }
  for (const auto& label : kEegChannels) {
    EdfChannel ch;
    ch.trace = {label, kEegSampleRate, std::vector<double>(total)};
    ch.physical_min = -kEegPhysicalLimit;
    ch.physical_max = kEegPhysicalLimit;
    ch.physical_dimension = "uV";
    const double gain = subject_gain * std::exp(0.05 * rng.normal());
    for (std::size_t e = 0; e < stages.size(); ++e) {
      double db = desat ? cfg.latent_effect_db : 0.0;
      if (boosted[e]) db += cfg.desat_effect_db;
      colored_epoch(rng, shape, gain * stage_eeg_rms(stages[e]), std::pow(10.0, db / 20.0), spec,
                    ch.trace.samples.data() + e * epoch_len);
    }
    for (std::size_t i = 0; i < total; ++i)
      ch.trace.samples[i] =
          std::clamp(ch.trace.samples[i] + hum[i % period], -kEegPhysicalLimit, kEegPhysicalLimit);
    out.channels.push_back(std::move(ch));
  }
  EdfChannel spo2;
  spo2.trace = rec.spo2;
  spo2.physical_min = 0.0;
  spo2.physical_max = 100.0;
  spo2.physical_dimension = "%";
  out.channels.push_back(std::move(spo2));
  return out;
}

std::vector<SynthPlanEntry> synth_plan(const SynthConfig& cfg) {
  std::vector<SynthPlanEntry> plan;
  std::uint64_t index = 0;
  for (const auto& g : all_groups())
    for (auto cls : {SubjectClass::Desaturated, SubjectClass::Undesaturated})
      for (int i = 0; i < cfg.subjects_per_class; ++i) {
        ++index;
        char id[16];
        std::snprintf(id, sizeof id, "S%04llu", static_cast<unsigned long long>(index));
        plan.push_back({id, g, cls, derive_seed(cfg.seed, {index})});
      }
  return plan;
}

SynthSubject generate_subject(const SynthConfig& cfg, const SynthPlanEntry& entry) {
  return generate_subject(cfg, entry.group, entry.cls, entry.subject_id, entry.seed);
}

std::vector<GroundTruthRow> generate_cohort(const SynthConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  const auto plan = synth_plan(cfg);
  std::vector<GroundTruthRow> truth(plan.size());
  std::vector<SubjectRecord> demographics(plan.size());
  std::vector<std::string> errors(plan.size());
  const auto n = static_cast<long long>(plan.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    try {
      const auto& p = plan[static_cast<std::size_t>(i)];
      const auto s = generate_subject(cfg, p);
      write_edf(dir / (p.subject_id + ".edf"), p.subject_id, s.channels);
      write_file_bytes(dir / (p.subject_id + ".tsv"),
                       [&] {
                         const auto text = format_annotations(s.record.annotations);
                         return std::vector<std::uint8_t>(text.begin(), text.end());
                       }());
      const bool d = p.cls == SubjectClass::Desaturated;
      truth[static_cast<std::size_t>(i)] = {p.subject_id, p.group, p.cls,
                                            static_cast<int>(s.desat_epochs.size()),
                                            d ? cfg.desat_effect_db : 0.0,
                                            d ? cfg.latent_effect_db : 0.0};
      auto& demo = demographics[static_cast<std::size_t>(i)];
      demo.subject_id = p.subject_id;
      demo.age = s.record.age;
      demo.gender = s.record.gender;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error("synth: " + e);
  write_demographics_tsv(dir / "demographics.tsv", demographics);
  write_ground_truth_tsv(dir / "ground_truth.tsv", truth);
  return truth;
}

void write_demographics_tsv(const std::filesystem::path& path, std::span<const SubjectRecord> subjects) {
  TsvTable t;
  t.header = {"subject_id", "age", "gender"};
  for (const auto& s : subjects)
    t.rows.push_back({s.subject_id, format_fixed(s.age, 1), std::string(to_string(s.gender))});
  write_tsv(path, t);
}

std::vector<Demographic> read_demographics_tsv(const std::filesystem::path& path) {
  const auto t = read_tsv(path);
  const auto ci = t.column("subject_id"), ca = t.column("age"), cg = t.column("gender");
  std::vector<Demographic> out;
  for (const auto& r : t.rows) {
    const auto g = parse_gender(r[cg]);
    if (!g) throw ParseError(path.string() + ": bad gender '" + r[cg] + "'");
    out.push_back({r[ci], parse_double(r[ca], "age"), *g});
  }
  return out;
}

void write_ground_truth_tsv(const std::filesystem::path& path, std::span<const GroundTruthRow> rows) {
  TsvTable t;
  t.header = {"subject_id", "group", "class", "planted_desat_epochs", "effect_db", "latent_db"};
  for (const auto& r : rows)
    t.rows.push_back({r.subject_id, r.group.label(), std::string(to_string(r.cls)),
                      std::to_string(r.planted_desat_epochs), format_fixed(r.effect_db, 3),
                      format_fixed(r.latent_db, 3)});
  write_tsv(path, t);
}

std::vector<GroundTruthRow> read_ground_truth_tsv(const std::filesystem::path& path) {
  const auto t = read_tsv(path);
  const auto ci = t.column("subject_id"), cg = t.column("group"), cc = t.column("class"),
             cp = t.column("planted_desat_epochs"), ce = t.column("effect_db"),
             cl = t.column("latent_db");
  std::vector<GroundTruthRow> out;
  for (const auto& r : t.rows) {
    const auto g = GroupId::parse(r[cg]);
    const auto c = parse_subject_class(r[cc]);
    if (!g || !c) throw ParseError(path.string() + ": bad group or class for " + r[ci]);
    out.push_back({r[ci], *g, *c, static_cast<int>(parse_int(r[cp], "planted_desat_epochs")),
                   parse_double(r[ce], "effect_db"), parse_double(r[cl], "latent_db")});
  }
  return out;
}

}  // namespace desatscan
