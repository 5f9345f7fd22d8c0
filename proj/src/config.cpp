#include "desatscan/config.hpp"

#include <cstdio>

#include "desatscan/dstf.hpp"
#include "desatscan/nn/train.hpp"
#include "desatscan/tsv.hpp"

namespace desatscan {

namespace {

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class F>
auto numeric(std::string_view key, F&& parse) {
  try {
    return parse();
  } catch (const ParseError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

double as_double(std::string_view key, std::string_view v) {
  return numeric(key, [&] { return parse_double(v, key); });
}

long long as_int(std::string_view key, std::string_view v) {
  return numeric(key, [&] { return parse_int(v, key); });
}

std::uint64_t as_u64(std::string_view key, std::string_view v) {
  const std::string s(trim(v));
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + s + "'");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError(std::string(key) + ": value out of range");
  }
}

std::vector<SleepStage> parse_stage_list(std::string_view v) {
  std::vector<SleepStage> out;
  std::string_view rest = v;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto s = parse_stage(item);
    if (!s) throw ConfigError("stages: unknown stage '" + std::string(item) + "'");
    if (std::find(out.begin(), out.end(), *s) == out.end()) out.push_back(*s);
  }
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  if (repeats < 1) throw ConfigError("repeats must be >= 1 (got " + std::to_string(repeats) + ")");
  if (stages.empty()) throw ConfigError("stages must list at least one analysis stage");
  for (auto s : stages)
    if (!is_analysis_stage(s)) throw ConfigError("stages: Wake is not an analysis stage");
  if (data_dir.empty() || out_dir.empty()) throw ConfigError("data_dir and out_dir must be set");
  thresholds.validate();
  model.validate();
  synth.validate();
}

void set_config_option(PipelineConfig& cfg, std::string_view key_in, std::string_view value) {
  const std::string key = to_lower(trim(key_in));
  const auto v = trim(value);
  if (key.rfind("model.", 0) == 0) {
    const auto sub = std::string_view(key).substr(6);
    if (sub == "seed") throw ConfigError("model.seed is derived from seed; set seed instead");
    if (!nn::set_model_option(cfg.model, sub, v)) throw ConfigError("unknown key '" + key + "'");
    return;
  }
  if (key.rfind("synth.", 0) == 0) {
    const auto sub = key.substr(6);
    auto& s = cfg.synth;
    if (sub == "subjects_per_class") s.subjects_per_class = static_cast<int>(as_int(key, v));
    else if (sub == "night_duration") s.night_duration = as_double(key, v);
    else if (sub == "stage_cycle") s.stage_cycle = parse_stage_cycle(v);
    else if (sub == "desat_rate") s.desat_rate = as_double(key, v);
    else if (sub == "desat_effect_db") s.desat_effect_db = as_double(key, v);
    else if (sub == "latent_effect_db") s.latent_effect_db = as_double(key, v);
    else if (sub == "noise_exponent") s.noise_exponent = as_double(key, v);
    else if (sub == "line_noise_uv") s.line_noise_uv = as_double(key, v);
    else throw ConfigError("unknown key '" + key + "'");
    return;
  }
  if (key == "data_dir") cfg.data_dir = std::string(v);
  else if (key == "out_dir") cfg.out_dir = std::string(v);
  else if (key == "stages") cfg.stages = parse_stage_list(v);
  else if (key == "scheme") {
    const auto s = parse_scheme(v);
    if (!s) throw ConfigError("scheme: expected MaxSubjects or EqualSubjects, got '" + std::string(v) + "'");
    cfg.scheme = *s;
  } else if (key == "repeats") cfg.repeats = static_cast<int>(as_int(key, v));
  else if (key == "experiment") {
    const auto e = parse_experiment(v);
    if (!e) throw ConfigError("experiment: unknown value '" + std::string(v) + "'");
    cfg.experiment = *e;
  } else if (key == "desat_spo2") cfg.thresholds.desat_spo2 = as_double(key, v);
  else if (key == "undesat_spo2") cfg.thresholds.undesat_spo2 = as_double(key, v);
  else if (key == "undesat_floor") {
    const auto t = to_lower(v);
    if (t == "whole_trace") cfg.thresholds.floor = UndesatFloor::WholeTrace;
    else if (t == "events_only") cfg.thresholds.floor = UndesatFloor::EventsOnly;
    else throw ConfigError("undesat_floor: expected whole_trace or events_only");
  } else if (key == "pos_weight_mode") {
    const auto t = to_lower(v);
    if (t == "total") cfg.pos_weight_mode = PosWeightMode::TotalOverPositive;
    else if (t == "negative") cfg.pos_weight_mode = PosWeightMode::NegativeOverPositive;
    else throw ConfigError("pos_weight_mode: expected total or negative");
  } else if (key == "ci_method") {
    const auto m = parse_ci_method(v);
    if (!m) throw ConfigError("ci_method: expected t or normal");
    cfg.ci_method = *m;
  } else if (key == "seed") cfg.seed = as_u64(key, v);
  else throw ConfigError("unknown key '" + key + "'");
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  PipelineConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    set_config_option(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  if (!base_dir.empty()) {
    if (cfg.data_dir.is_relative()) cfg.data_dir = base_dir / cfg.data_dir;
    if (cfg.out_dir.is_relative()) cfg.out_dir = base_dir / cfg.out_dir;
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw MissingInputError(path.string());
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                      path.parent_path());
}

std::string format_config(const PipelineConfig& cfg) {
  std::string stages;
  for (auto s : cfg.stages) {
    if (!stages.empty()) stages += ",";
    stages += std::string(to_string(s));
  }
  std::string s;
  s += "data_dir = " + cfg.data_dir.string() + "\n";
  s += "out_dir = " + cfg.out_dir.string() + "\n";
  s += "stages = " + stages + "\n";
  s += "scheme = " + std::string(to_string(cfg.scheme)) + "\n";
  s += "repeats = " + std::to_string(cfg.repeats) + "\n";
  s += "experiment = " + std::string(to_string(cfg.experiment)) + "\n";
  s += "desat_spo2 = " + format_g(cfg.thresholds.desat_spo2) + "\n";
  s += "undesat_spo2 = " + format_g(cfg.thresholds.undesat_spo2) + "\n";
  s += std::string("undesat_floor = ") +
       (cfg.thresholds.floor == UndesatFloor::WholeTrace ? "whole_trace" : "events_only") + "\n";
  s += std::string("pos_weight_mode = ") +
       (cfg.pos_weight_mode == PosWeightMode::TotalOverPositive ? "total" : "negative") + "\n";
  s += "ci_method = " + std::string(to_string(cfg.ci_method)) + "\n";
  s += "seed = " + std::to_string(cfg.seed) + "\n";
  const auto model = nn::format_model_config(cfg.model);
  std::string_view rest = model;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const auto line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    const auto eq = line.find('=');
    if (line.substr(0, eq) == "seed") continue;
    s += "model." + std::string(line.substr(0, eq)) + " = " + std::string(line.substr(eq + 1)) + "\n";
  }
  const auto& y = cfg.synth;
  s += "synth.subjects_per_class = " + std::to_string(y.subjects_per_class) + "\n";
  s += "synth.night_duration = " + format_g(y.night_duration) + "\n";
  s += "synth.stage_cycle = " + format_stage_cycle(y.stage_cycle) + "\n";
  s += "synth.desat_rate = " + format_g(y.desat_rate) + "\n";
  s += "synth.desat_effect_db = " + format_g(y.desat_effect_db) + "\n";
  s += "synth.latent_effect_db = " + format_g(y.latent_effect_db) + "\n";
  s += "synth.noise_exponent = " + format_g(y.noise_exponent) + "\n";
  s += "synth.line_noise_uv = " + format_g(y.line_noise_uv) + "\n";
  return s;
}

}  // namespace desatscan
