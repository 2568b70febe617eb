#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cbwatch/core.hpp"

namespace cbwatch {

/// Positive class is cyberbullying.
struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::int64_t total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(std::span<const Label> predicted, std::span<const Label> gold);

struct ClassificationReport {
  double acc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool zero_division = false;  // precision or recall had an empty denominator
};

/// Throws EmptyEvaluation.
ClassificationReport accuracy_f1(const ConfusionCounts& c);

struct KappaResult {
  double value = 0.0;
  bool degenerate = false;  // chance agreement was 1
};

/// Throws LengthMismatch, Empty.
KappaResult cohen_kappa(std::span<const Label> a, std::span<const Label> b);

/// rows[i][j] = raters putting item i in category j; every row sums to `raters`.
/// Throws Empty, RowSumMismatch, TooFewRaters.
KappaResult fleiss_kappa(const std::vector<std::vector<int>>& rows, int raters);
/// Builds the count matrix from per-rater label columns of equal length.
std::vector<std::vector<int>> rating_counts(const std::vector<std::vector<Label>>& raters);

std::string kappa_band(double value);

struct AgreementReport {
  std::vector<std::string> raters;
  std::map<std::pair<std::string, std::string>, KappaResult> pairwise;
  KappaResult fleiss;
};

/// labels[r] holds rater r's labels over the same items.
AgreementReport agreement(const std::vector<std::string>& raters, const std::vector<std::vector<Label>>& labels);

/// Pairwise columns then Fleiss, each with its band.
std::string to_table(const AgreementReport& r);
json to_json(const AgreementReport& r);
json to_json(const ClassificationReport& r, const ConfusionCounts& c);

}  // namespace cbwatch
