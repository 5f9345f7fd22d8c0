#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "desatscan/common.hpp"
#include "desatscan/experiments.hpp"
#include "desatscan/split.hpp"

namespace desatscan {

/// (TPR + TNR) / 2 with prediction = score >= threshold. Throws Error when
/// labels hold a single class or are not 0/1.
double balanced_accuracy(std::span<const double> scores, std::span<const int> labels,
                         double threshold = 0.5);

/// Mann-Whitney form of the ROC area; ties count one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

enum class CiMethod : std::uint8_t { StudentT, Normal };
std::string_view to_string(CiMethod m);
std::optional<CiMethod> parse_ci_method(std::string_view text);

struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// mean +/- q * sd / sqrt(R), q the 0.975 quantile of Student t(R-1) or of
/// the standard normal; bounds clamped to [0, 1]. Throws Error when R < 2.
Interval ci95(std::span<const double> values, CiMethod method = CiMethod::StudentT);

/// Validation metrics of one trained model.
struct RunResult {
  Experiment experiment = Experiment::CrossPatient;
  SleepStage stage = SleepStage::N1;
  Scheme scheme = Scheme::MaxSubjects;
  int repeat = 0;
  std::size_t n_train = 0, n_test = 0, n_validation = 0;  // subjects
  double ba = 0.0;
  double auc = 0.0;
};

/// experiment, stage, scheme, repeat, n_train, n_test, n_val, ba, auc
void write_runs_tsv(const std::filesystem::path& path, std::span<const RunResult> runs);
std::vector<RunResult> read_runs_tsv(const std::filesystem::path& path);

struct ReportRow {
  Experiment experiment = Experiment::CrossPatient;
  SleepStage stage = SleepStage::N1;
  Scheme scheme = Scheme::MaxSubjects;
  int repeats = 0;
  std::size_t n_train = 0, n_test = 0, n_validation = 0;  // mean over repeats, rounded
  bool has_ci = false;  // EqualSubjects rows with R >= 2
  Interval ba, auc;
};

/// One row per (experiment, stage, scheme), sorted by that key.
std::vector<ReportRow> make_report(std::span<const RunResult> runs,
                                   CiMethod method = CiMethod::StudentT);

/// "0.732 (0.680, 0.784)" when the row has an interval, else "0.732".
std::string format_cell(const Interval& v, bool with_ci);

/// Aligned tables, one per (experiment, scheme), with columns
/// Sleep Type, # Subjects, Validation BA, Validation AUC.
std::string format_report_text(std::span<const ReportRow> rows);
std::string format_report_tsv(std::span<const ReportRow> rows);

}  // namespace desatscan
