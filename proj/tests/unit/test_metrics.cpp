#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "desatscan/metrics.hpp"
#include "desatscan/random.hpp"

using namespace desatscan;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST_CASE("balanced_accuracy examples") {
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) {
    s.push_back(i < 9 ? 0.8 : 0.2);
    y.push_back(1);
  }
  for (int i = 0; i < 10; ++i) {
    s.push_back(i < 7 ? 0.1 : 0.9);
    y.push_back(0);
  }
  CHECK(balanced_accuracy(s, y) == doctest::Approx(0.8));

  std::vector<double> ones(100, 1.0);
  std::vector<int> lab(100, 0);
  for (int i = 0; i < 10; ++i) lab[i] = 1;
  CHECK(balanced_accuracy(ones, lab) == 0.5);
  std::vector<double> perfect(100, 0.0);
  for (int i = 0; i < 10; ++i) perfect[i] = 1.0;
  CHECK(balanced_accuracy(perfect, lab) == 1.0);

  // Exactly 0.5 counts as positive.
  CHECK(balanced_accuracy(std::vector<double>{0.5, 0.4999}, std::vector<int>{1, 0}) == 1.0);
  CHECK_THROWS_AS(balanced_accuracy(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
  CHECK_THROWS_AS(balanced_accuracy(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 2}), Error);
}

TEST_CASE("roc_auc examples") {
  CHECK(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(roc_auc(std::vector<double>(6, 0.3), std::vector<int>{0, 1, 0, 1, 1, 0}) == 0.5);
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.9}, std::vector<int>{0, 0, 1}) == 1.0);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1}, std::vector<int>{0}), Error);
}

TEST_CASE("roc_auc invariances") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 20) / 20;
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    const double a = roc_auc(s, y);
    CHECK(a == pairwise_auc(s, y));
    std::vector<double> t(n), c(n);
    std::vector<int> cy(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = std::exp(3 * s[i]) - 7;
      c[i] = 1 - s[i];
      cy[i] = 1 - y[i];
    }
    CHECK(roc_auc(t, y) == a);
    CHECK(roc_auc(c, cy) == a);
  }
}

TEST_CASE("ci95 examples") {
  const auto flat = ci95(std::vector<double>(11, 0.7));
  CHECK(flat.mean == doctest::Approx(0.7));
  CHECK(flat.lo == doctest::Approx(0.7));
  CHECK(flat.hi == doctest::Approx(0.7));

  const auto two = ci95(std::vector<double>{0.6, 0.8});
  CHECK(two.mean == doctest::Approx(0.7));
  CHECK(two.lo == 0.0);
  CHECK(two.hi == 1.0);

  // t(10, 0.975) = 2.228139; sd of 0..10 step 0.01 offsets.
  std::vector<double> v;
  for (int i = 0; i < 11; ++i) v.push_back(0.5 + 0.01 * i);
  double sd = 0.0;
  for (double x : v) sd += (x - 0.55) * (x - 0.55);
  sd = std::sqrt(sd / 10);
  const auto ci = ci95(v);
  CHECK(ci.mean == doctest::Approx(0.55));
  CHECK(ci.hi - ci.mean == doctest::Approx(2.228139 * sd / std::sqrt(11.0)).epsilon(1e-6));
  const auto cn = ci95(v, CiMethod::Normal);
  CHECK(cn.hi - cn.mean == doctest::Approx(1.959964 * sd / std::sqrt(11.0)).epsilon(1e-6));
  CHECK(ci.lo <= ci.mean);
  CHECK(ci.mean <= ci.hi);
  CHECK_THROWS_AS(ci95(std::vector<double>{0.5}), Error);
  CHECK(parse_ci_method("t") == CiMethod::StudentT);
  CHECK(parse_ci_method("normal") == CiMethod::Normal);
  CHECK_FALSE(parse_ci_method("bootstrap"));
}

TEST_CASE("make_report groups runs and formats cells") {
  std::vector<RunResult> runs;
  for (int r = 0; r < 11; ++r)
    runs.push_back({Experiment::CrossPatient, SleepStage::N2, Scheme::EqualSubjects, r, 10, 10, 9,
                    0.70 + 0.005 * r, 0.75 + 0.004 * r});
  runs.push_back({Experiment::CrossPatient, SleepStage::N3, Scheme::MaxSubjects, 0, 40, 40, 40, 0.8123, 0.9});
  const auto rows = make_report(runs);
  REQUIRE(rows.size() == 2);
  const auto& eq = rows[0].scheme == Scheme::EqualSubjects ? rows[0] : rows[1];
  const auto& mx = rows[0].scheme == Scheme::MaxSubjects ? rows[0] : rows[1];
  CHECK(eq.repeats == 11);
  CHECK(eq.has_ci);
  CHECK_FALSE(mx.has_ci);
  CHECK(format_cell(mx.ba, mx.has_ci) == "0.812");
  CHECK(format_cell({0.732, 0.680, 0.784}, true) == "0.732 (0.680, 0.784)");
  CHECK(format_cell(eq.ba, true).find(" (") == 5);

  const auto text = format_report_text(rows);
  CHECK(text.find("Validation BA") != std::string::npos);
  CHECK(text.find("NREM2") != std::string::npos);
  CHECK(text.find("0.812") != std::string::npos);
  CHECK(make_report(std::vector<RunResult>{}).empty());
  CHECK(format_report_tsv(std::vector<ReportRow>{}).find("validation_ba") != std::string::npos);

  const auto path = std::filesystem::temp_directory_path() / "desatscan_runs_test.tsv";
  write_runs_tsv(path, runs);
  const auto back = read_runs_tsv(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == runs.size());
  CHECK(back[3].repeat == 3);
  CHECK(back[3].ba == doctest::Approx(runs[3].ba).epsilon(1e-9));
  CHECK(back.back().scheme == Scheme::MaxSubjects);
}
