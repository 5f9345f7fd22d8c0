#include "desatscan/edf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "desatscan/common.hpp"

namespace desatscan {
namespace {

constexpr std::size_t kFixedHeaderBytes = 256;
constexpr std::size_t kPerSignalHeaderBytes = 256;

// Widths of the per-signal header fields, stored field-by-field for all
// signals (all labels first, then all transducers, ...).
constexpr std::size_t kLabelW = 16, kTransducerW = 80, kDimW = 8, kNumW = 8,
                      kPrefilterW = 80, kSamplesW = 8, kReservedW = 32;

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string text(std::size_t width) {
    if (pos_ + width > bytes_.size()) throw ParseError("EDF: truncated header");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), width);
    pos_ += width;
    return std::string(trim(s));
  }

  double number(std::size_t width, std::string_view what) {
    const auto s = text(width);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      throw ParseError("EDF: bad numeric field '" + std::string(what) + "': '" + s + "'");
    return v;
  }

  int integer(std::size_t width, std::string_view what) {
    const double v = number(width, what);
    if (v != std::floor(v)) throw ParseError("EDF: non-integer field '" + std::string(what) + "'");
    return static_cast<int>(v);
  }

  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string fit_field(std::string_view s, std::size_t width) {
  std::string out(s.substr(0, width));
  out.resize(width, ' ');
  return out;
}

std::string format_int(long long v, std::size_t width) {
  auto s = std::to_string(v);
  if (s.size() > width) throw ConfigError("EDF: value " + s + " does not fit header field");
  return fit_field(s, width);
}

// Shortest %g rendering that fits the field.
std::string format_real(double v, std::size_t width) {
  char buf[64];
  for (int precision = 12; precision >= 1; --precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strlen(buf) <= width) return fit_field(buf, width);
  }
  throw ConfigError("EDF: value does not fit header field");
}

double reparse(const std::string& field) {
  const auto t = trim(field);
  double v = 0.0;
  std::from_chars(t.data(), t.data() + t.size(), v);
  return v;
}

}  // namespace

std::string normalize_label(std::string_view label) { return to_lower(trim(label)); }

const SignalTrace* Recording::find(std::string_view label) const {
  const auto key = normalize_label(label);
  for (const auto& t : traces)
    if (normalize_label(t.label) == key) return &t;
  return nullptr;
}

Recording parse_edf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeaderBytes) throw ParseError("EDF: truncated header");
  HeaderReader r(bytes);
  Recording rec;
  auto& h = rec.header;
  r.text(8);  // version
  h.subject_id = r.text(80);
  h.recording_id = r.text(80);
  h.start_date = r.text(8);
  h.start_time = r.text(8);
  const int header_bytes = r.integer(8, "header bytes");
  r.text(44);
  h.record_count = r.integer(8, "number of records");
  h.record_duration = r.number(8, "record duration");
  const int ns = r.integer(4, "signal count");
  if (ns < 1) throw ParseError("EDF: signal count must be >= 1");
  if (h.record_duration <= 0) throw ParseError("EDF: record duration must be > 0");

  const std::size_t expected_header = kFixedHeaderBytes + kPerSignalHeaderBytes * ns;
  if (bytes.size() < expected_header) throw ParseError("EDF: truncated header");
  if (header_bytes != static_cast<int>(expected_header))
    throw ParseError("EDF: header size field disagrees with signal count");

  h.signals.resize(ns);
  for (auto& s : h.signals) s.label = r.text(kLabelW);
  for (auto& s : h.signals) s.transducer = r.text(kTransducerW);
  for (auto& s : h.signals) s.physical_dimension = r.text(kDimW);
  for (auto& s : h.signals) s.physical_min = r.number(kNumW, "physical min");
  for (auto& s : h.signals) s.physical_max = r.number(kNumW, "physical max");
  for (auto& s : h.signals) s.digital_min = r.integer(kNumW, "digital min");
  for (auto& s : h.signals) s.digital_max = r.integer(kNumW, "digital max");
  for (auto& s : h.signals) s.prefiltering = r.text(kPrefilterW);
  for (auto& s : h.signals) s.samples_per_record = r.integer(kSamplesW, "samples per record");
  for (int i = 0; i < ns; ++i) r.text(kReservedW);

  std::set<std::string> seen;
  std::size_t record_samples = 0;
  for (auto& s : h.signals) {
    if (s.digital_min >= s.digital_max)
      throw ParseError("EDF: degenerate digital range for '" + s.label + "'");
    if (s.physical_min == s.physical_max)
      throw ParseError("EDF: degenerate physical range for '" + s.label + "'");
    if (s.samples_per_record <= 0)
      throw ParseError("EDF: samples per record must be > 0 for '" + s.label + "'");
    if (!seen.insert(normalize_label(s.label)).second)
      throw ParseError("EDF: duplicate signal label '" + s.label + "'");
    s.sample_rate = s.samples_per_record / h.record_duration;
    record_samples += static_cast<std::size_t>(s.samples_per_record);
  }

  const std::size_t record_bytes = record_samples * 2;
  const std::size_t data_bytes = bytes.size() - expected_header;
  if (h.record_count < 0) {
    // -1 means "unknown"; infer from the data length.
    if (data_bytes % record_bytes != 0) throw ParseError("EDF: inconsistent record sizes");
    h.record_count = static_cast<int>(data_bytes / record_bytes);
  } else if (data_bytes != record_bytes * static_cast<std::size_t>(h.record_count)) {
    throw ParseError("EDF: inconsistent record sizes (expected " +
                     std::to_string(record_bytes * h.record_count) + " data bytes, got " +
                     std::to_string(data_bytes) + ")");
  }

  rec.traces.resize(ns);
  std::vector<double> scale(ns), offset(ns);
  for (int i = 0; i < ns; ++i) {
    const auto& s = h.signals[i];
    auto& t = rec.traces[i];
    t.label = s.label;
    t.sample_rate = s.sample_rate;
    t.samples.reserve(static_cast<std::size_t>(s.samples_per_record) * h.record_count);
    scale[i] = (s.physical_max - s.physical_min) / (s.digital_max - s.digital_min);
    offset[i] = s.physical_min - s.digital_min * scale[i];
  }

  const std::uint8_t* p = bytes.data() + expected_header;
  for (int rec_i = 0; rec_i < h.record_count; ++rec_i) {
    for (int i = 0; i < ns; ++i) {
      const auto& s = h.signals[i];
      auto& out = rec.traces[i].samples;
      for (int k = 0; k < s.samples_per_record; ++k, p += 2) {
        int d = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
        if (d < s.digital_min || d > s.digital_max) {
          d = std::clamp(d, s.digital_min, s.digital_max);
          ++rec.clamped_samples;
        }
        out.push_back(offset[i] + d * scale[i]);
      }
    }
  }
  return rec;
}

Recording read_edf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError(path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_edf(bytes);
}

std::vector<std::string> required_channels_check(const RecordingHeader& header,
                                                 std::span<const std::string> required) {
  std::set<std::string> present;
  for (const auto& s : header.signals) present.insert(normalize_label(s.label));
  std::vector<std::string> missing;
  for (const auto& label : required)
    if (!present.contains(normalize_label(label))) missing.push_back(label);
  return missing;
}

std::vector<std::uint8_t> encode_edf(std::string_view subject_id,
                                     std::span<const EdfChannel> channels,
                                     double record_duration) {
  if (channels.empty()) throw ConfigError("EDF: at least one channel required");
  if (record_duration <= 0) throw ConfigError("EDF: record duration must be > 0");

  const auto ns = channels.size();
  std::vector<int> spr(ns);
  std::size_t records = 0;
  for (std::size_t i = 0; i < ns; ++i) {
    const auto& c = channels[i];
    const double per_record = c.trace.sample_rate * record_duration;
    if (per_record < 1 || std::abs(per_record - std::round(per_record)) > 1e-9)
      throw ConfigError("EDF: sample rate of '" + c.trace.label +
                        "' is not a whole number of samples per record");
    spr[i] = static_cast<int>(std::lround(per_record));
    if (c.trace.samples.size() % spr[i] != 0)
      throw ConfigError("EDF: trace '" + c.trace.label + "' is not a whole number of records");
    const auto n = c.trace.samples.size() / spr[i];
    if (i == 0) records = n;
    else if (n != records) throw ConfigError("EDF: traces span different durations");
    if (c.digital_min >= c.digital_max || c.physical_min >= c.physical_max)
      throw ConfigError("EDF: degenerate calibration for '" + c.trace.label + "'");
  }

  std::string header;
  header += fit_field("0", 8);
  header += fit_field(subject_id, 80);
  header += fit_field("desatscan", 80);
  header += fit_field("01.01.00", 8);
  header += fit_field("00.00.00", 8);
  header += format_int(static_cast<long long>(kFixedHeaderBytes + kPerSignalHeaderBytes * ns), 8);
  header += fit_field("", 44);
  header += format_int(static_cast<long long>(records), 8);
  header += format_real(record_duration, 8);
  header += format_int(static_cast<long long>(ns), 4);

  std::vector<double> pmin(ns), pmax(ns);
  std::vector<std::string> pmin_f(ns), pmax_f(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    pmin_f[i] = format_real(channels[i].physical_min, kNumW);
    pmax_f[i] = format_real(channels[i].physical_max, kNumW);
    pmin[i] = reparse(pmin_f[i]);
    pmax[i] = reparse(pmax_f[i]);
    if (pmin[i] >= pmax[i]) throw ConfigError("EDF: physical range collapses when rounded");
  }
  for (const auto& c : channels) header += fit_field(c.trace.label, kLabelW);
  for (std::size_t i = 0; i < ns; ++i) header += fit_field("", kTransducerW);
  for (const auto& c : channels) header += fit_field(c.physical_dimension, kDimW);
  for (std::size_t i = 0; i < ns; ++i) header += pmin_f[i];
  for (std::size_t i = 0; i < ns; ++i) header += pmax_f[i];
  for (const auto& c : channels) header += format_int(c.digital_min, kNumW);
  for (const auto& c : channels) header += format_int(c.digital_max, kNumW);
  for (std::size_t i = 0; i < ns; ++i) header += fit_field("", kPrefilterW);
  for (std::size_t i = 0; i < ns; ++i) header += format_int(spr[i], kSamplesW);
  for (std::size_t i = 0; i < ns; ++i) header += fit_field("", kReservedW);

  std::size_t total_samples = 0;
  for (const auto& c : channels) total_samples += c.trace.samples.size();
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + total_samples * 2);

  for (std::size_t r = 0; r < records; ++r) {
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& c = channels[i];
      const double gain = (c.digital_max - c.digital_min) / (pmax[i] - pmin[i]);
      const auto begin = r * static_cast<std::size_t>(spr[i]);
      for (int k = 0; k < spr[i]; ++k) {
        const double x = c.trace.samples[begin + k];
        const double d = std::round(c.digital_min + (x - pmin[i]) * gain);
        const auto q = static_cast<std::int16_t>(
            std::clamp(d, static_cast<double>(c.digital_min), static_cast<double>(c.digital_max)));
        const auto u = static_cast<std::uint16_t>(q);
        out.push_back(static_cast<std::uint8_t>(u & 0xff));
        out.push_back(static_cast<std::uint8_t>(u >> 8));
      }
    }
  }
  return out;
}

void write_edf(const std::filesystem::path& path, std::string_view subject_id,
               std::span<const EdfChannel> channels, double record_duration) {
  const auto bytes = encode_edf(subject_id, channels, record_duration);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace desatscan
