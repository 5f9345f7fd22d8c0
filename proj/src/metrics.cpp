#include "desatscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <tuple>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "desatscan/tsv.hpp"

namespace desatscan {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, const char* what) {
  if (scores.size() != labels.size())
    throw Error(std::string(what) + ": scores and labels differ in length");
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(std::string(what) + ": labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  if (pos == 0 || pos == labels.size())
    throw Error(std::string(what) + ": both classes must be present");
}

}  // namespace

double balanced_accuracy(std::span<const double> scores, std::span<const int> labels,
                         double threshold) {
  check_inputs(scores, labels, "balanced_accuracy");
  std::size_t tp = 0, pos = 0, tn = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      ++pos;
      tp += predicted;
    } else {
      ++neg;
      tn += !predicted;
    }
  }
  return 0.5 * (static_cast<double>(tp) / pos + static_cast<double>(tn) / neg);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "roc_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of doubled midranks of positives keeps every quantity integral.
  double rank2_pos = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double rank2 = static_cast<double>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        rank2_pos += rank2;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  const double u2 = rank2_pos - static_cast<double>(pos) * (pos + 1);
  return (u2 / 2.0) / (static_cast<double>(pos) * neg);
}

std::string_view to_string(CiMethod m) { return m == CiMethod::StudentT ? "t" : "normal"; }

std::optional<CiMethod> parse_ci_method(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "t" || t == "student" || t == "studentt" || t == "student_t") return CiMethod::StudentT;
  if (t == "normal" || t == "z") return CiMethod::Normal;
  return std::nullopt;
}

Interval ci95(std::span<const double> values, CiMethod method) {
  const std::size_t r = values.size();
  if (r < 2) throw Error("ci95: needs at least two values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(r);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(r - 1));
  double q = 0.0;
  if (method == CiMethod::StudentT) {
    boost::math::students_t dist(static_cast<double>(r - 1));
    q = boost::math::quantile(dist, 0.975);
  } else {
    q = boost::math::quantile(boost::math::normal(), 0.975);
  }
  const double half = q * sd / std::sqrt(static_cast<double>(r));
  return {mean, std::clamp(mean - half, 0.0, 1.0), std::clamp(mean + half, 0.0, 1.0)};
}

void write_runs_tsv(const std::filesystem::path& path, std::span<const RunResult> runs) {
  TsvTable t;
  t.header = {"experiment", "stage", "scheme", "repeat", "n_train", "n_test", "n_val", "ba", "auc"};
  for (const auto& r : runs)
    t.rows.push_back({std::string(to_string(r.experiment)), std::string(to_string(r.stage)),
                      std::string(to_string(r.scheme)), std::to_string(r.repeat),
                      std::to_string(r.n_train), std::to_string(r.n_test),
                      std::to_string(r.n_validation), format_fixed(r.ba), format_fixed(r.auc)});
  write_tsv(path, t);
}

std::vector<RunResult> read_runs_tsv(const std::filesystem::path& path) {
  const auto t = read_tsv(path);
  const std::size_t ce = t.column("experiment"), cs = t.column("stage"), cm = t.column("scheme"),
                    cr = t.column("repeat"), c1 = t.column("n_train"), c2 = t.column("n_test"),
                    c3 = t.column("n_val"), cb = t.column("ba"), ca = t.column("auc");
  std::vector<RunResult> out;
  for (const auto& row : t.rows) {
    RunResult r;
    const auto e = parse_experiment(row[ce]);
    const auto s = parse_stage(row[cs]);
    const auto m = parse_scheme(row[cm]);
    if (!e || !s || !m) throw ParseError("runs table: bad experiment/stage/scheme in " + path.string());
    r.experiment = *e;
    r.stage = *s;
    r.scheme = *m;
    r.repeat = static_cast<int>(parse_int(row[cr], "repeat"));
    r.n_train = static_cast<std::size_t>(parse_int(row[c1], "n_train"));
    r.n_test = static_cast<std::size_t>(parse_int(row[c2], "n_test"));
    r.n_validation = static_cast<std::size_t>(parse_int(row[c3], "n_val"));
    r.ba = parse_double(row[cb], "ba");
    r.auc = parse_double(row[ca], "auc");
    out.push_back(r);
  }
  return out;
}

std::vector<ReportRow> make_report(std::span<const RunResult> runs, CiMethod method) {
  using Key = std::tuple<Experiment, Scheme, SleepStage>;
  std::map<Key, std::vector<const RunResult*>> groups;
  for (const auto& r : runs) groups[{r.experiment, r.scheme, r.stage}].push_back(&r);
  std::vector<ReportRow> rows;
  for (const auto& [key, members] : groups) {
    ReportRow row;
    std::tie(row.experiment, row.scheme, row.stage) = key;
    row.repeats = static_cast<int>(members.size());
    std::vector<double> ba, auc;
    double n1 = 0, n2 = 0, n3 = 0;
    for (const auto* r : members) {
      ba.push_back(r->ba);
      auc.push_back(r->auc);
      n1 += static_cast<double>(r->n_train);
      n2 += static_cast<double>(r->n_test);
      n3 += static_cast<double>(r->n_validation);
    }
    const double k = static_cast<double>(members.size());
    row.n_train = static_cast<std::size_t>(std::llround(n1 / k));
    row.n_test = static_cast<std::size_t>(std::llround(n2 / k));
    row.n_validation = static_cast<std::size_t>(std::llround(n3 / k));
    row.has_ci = row.scheme == Scheme::EqualSubjects && members.size() >= 2;
    if (row.has_ci) {
      row.ba = ci95(ba, method);
      row.auc = ci95(auc, method);
    } else {
      const double mb = std::accumulate(ba.begin(), ba.end(), 0.0) / k;
      const double ma = std::accumulate(auc.begin(), auc.end(), 0.0) / k;
      row.ba = {mb, mb, mb};
      row.auc = {ma, ma, ma};
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_cell(const Interval& v, bool with_ci) {
  char buf[64];
  if (with_ci)
    std::snprintf(buf, sizeof buf, "%.3f (%.3f, %.3f)", v.mean, v.lo, v.hi);
  else
    std::snprintf(buf, sizeof buf, "%.3f", v.mean);
  return buf;
}

namespace {

std::string subjects_cell(const ReportRow& r) {
  return std::to_string(r.n_train) + "/" + std::to_string(r.n_test) + "/" +
         std::to_string(r.n_validation);
}

}  // namespace

std::string format_report_text(std::span<const ReportRow> rows) {
  std::string out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].experiment == rows[i].experiment &&
           rows[j].scheme == rows[i].scheme)
      ++j;
    std::vector<std::array<std::string, 5>> cells;
    cells.push_back({"Sleep Type", "# Subjects", "Validation BA", "Validation AUC", "Repeats"});
    for (std::size_t k = i; k < j; ++k)
      cells.push_back({std::string(table_name(rows[k].stage)), subjects_cell(rows[k]),
                       format_cell(rows[k].ba, rows[k].has_ci),
                       format_cell(rows[k].auc, rows[k].has_ci), std::to_string(rows[k].repeats)});
    std::array<std::size_t, 5> width{};
    for (const auto& c : cells)
      for (std::size_t m = 0; m < c.size(); ++m) width[m] = std::max(width[m], c[m].size());
    out += std::string(to_string(rows[i].experiment)) + " / " +
           std::string(to_string(rows[i].scheme)) + "\n";
    for (const auto& c : cells) {
      std::string line;
      for (std::size_t m = 0; m < c.size(); ++m) {
        line += c[m];
        if (m + 1 < c.size()) line += std::string(width[m] - c[m].size() + 2, ' ');
      }
      out += line + "\n";
    }
    out += "\n";
    i = j;
  }
  return out;
}

std::string format_report_tsv(std::span<const ReportRow> rows) {
  TsvTable t;
  t.header = {"experiment", "scheme",        "sleep_type",     "subjects",
              "repeats",    "validation_ba", "validation_auc"};
  for (const auto& r : rows)
    t.rows.push_back({std::string(to_string(r.experiment)), std::string(to_string(r.scheme)),
                      std::string(table_name(r.stage)), subjects_cell(r), std::to_string(r.repeats),
                      format_cell(r.ba, r.has_ci), format_cell(r.auc, r.has_ci)});
  return format_tsv(t);
}

}  // namespace desatscan
