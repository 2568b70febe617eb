#include "cbwatch/metrics.hpp"

#include <fmt/format.h>

namespace cbwatch {

ConfusionCounts confusion(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size())
    throw Error(Errc::LengthMismatch, fmt::format("{} predictions for {} gold labels", predicted.size(), gold.size()));
  ConfusionCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == Label::cyberbullying;
    const bool g = gold[i] == Label::cyberbullying;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ClassificationReport accuracy_f1(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0)
    throw Error(Errc::InvalidArgument, "counts", "confusion counts must be non-negative");
  if (c.total() == 0) throw Error(Errc::EmptyEvaluation, "nothing to evaluate");
  ClassificationReport r;
  r.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp > 0)
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  else
    r.zero_division = true;
  if (c.tp + c.fn > 0)
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  else
    r.zero_division = true;
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

namespace {

KappaResult chance_corrected(double po, double pe) {
  if (pe >= 1.0) return {po >= 1.0 ? 1.0 : 0.0, true};
  return {(po - pe) / (1.0 - pe), false};
}

}  // namespace

KappaResult cohen_kappa(std::span<const Label> a, std::span<const Label> b) {
  if (a.size() != b.size())
    throw Error(Errc::LengthMismatch, fmt::format("rater lengths differ: {} vs {}", a.size(), b.size()));
  if (a.empty()) throw Error(Errc::Empty, "no items to compare");
  std::int64_t agree = 0, pos_a = 0, pos_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    pos_a += a[i] == Label::cyberbullying;
    pos_b += b[i] == Label::cyberbullying;
  }
  const auto n = static_cast<double>(a.size());
  const double pa = pos_a / n, pb = pos_b / n;
  return chance_corrected(agree / n, pa * pb + (1 - pa) * (1 - pb));
}

KappaResult fleiss_kappa(const std::vector<std::vector<int>>& rows, int raters) {
  if (raters < 2) throw Error(Errc::TooFewRaters, "fleiss kappa needs at least 2 raters per item");
  if (rows.empty()) throw Error(Errc::Empty, "no items to compare");
  const std::size_t k = rows.front().size();
  std::vector<double> col(k, 0.0);
  double pbar = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != k) throw Error(Errc::RowSumMismatch, std::to_string(i), "rows differ in category count");
    long sum = 0, sq = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (row[j] < 0) throw Error(Errc::RowSumMismatch, std::to_string(i), "negative rating count");
      sum += row[j];
      sq += static_cast<long>(row[j]) * row[j];
      col[j] += row[j];
    }
    if (sum != raters)
      throw Error(Errc::RowSumMismatch, std::to_string(i), fmt::format("row {} sums to {}, expected {}", i, sum, raters));
    pbar += static_cast<double>(sq - raters) / (static_cast<double>(raters) * (raters - 1));
  }
  const auto n = static_cast<double>(rows.size());
  pbar /= n;
  double pe = 0.0;
  for (double c : col) {
    const double p = c / (n * raters);
    pe += p * p;
  }
  return chance_corrected(pbar, pe);
}

std::vector<std::vector<int>> rating_counts(const std::vector<std::vector<Label>>& raters) {
  if (raters.empty()) return {};
  const std::size_t items = raters.front().size();
  std::vector<std::vector<int>> rows(items, std::vector<int>(2, 0));
  for (const auto& r : raters) {
    if (r.size() != items) throw Error(Errc::LengthMismatch, "raters labeled different numbers of items");
    for (std::size_t i = 0; i < items; ++i) ++rows[i][static_cast<std::size_t>(to_int(r[i]))];
  }
  return rows;
}

std::string kappa_band(double value) {
  if (value <= 0.0) return "none";
  if (value <= 0.20) return "none-to-slight";
  if (value <= 0.40) return "fair";
  if (value <= 0.60) return "moderate";
  if (value <= 0.80) return "substantial";
  return "almost perfect";
}

AgreementReport agreement(const std::vector<std::string>& raters, const std::vector<std::vector<Label>>& labels) {
  if (raters.size() != labels.size()) throw Error(Errc::LengthMismatch, "one label column per rater is required");
  if (raters.size() < 2) throw Error(Errc::TooFewRaters, "agreement needs at least 2 raters");
  AgreementReport r;
  r.raters = raters;
  for (std::size_t i = 0; i < raters.size(); ++i)
    for (std::size_t j = i + 1; j < raters.size(); ++j)
      r.pairwise[{raters[i], raters[j]}] = cohen_kappa(labels[i], labels[j]);
  r.fleiss = fleiss_kappa(rating_counts(labels), static_cast<int>(raters.size()));
  return r;
}

std::string to_table(const AgreementReport& r) {
  std::vector<std::string> heads, values, bands;
  for (const auto& [pair, k] : r.pairwise) {
    heads.push_back(pair.first + "&" + pair.second);
    values.push_back(fmt::format("{:.3f}", k.value));
    bands.push_back(kappa_band(k.value));
  }
  heads.push_back("Fleiss");
  values.push_back(fmt::format("{:.3f}", r.fleiss.value));
  bands.push_back(kappa_band(r.fleiss.value));
  std::size_t width = 8;
  for (const auto* col : {&heads, &values, &bands})
    for (const auto& s : *col) width = std::max(width, s.size() + 2);
  std::string out;
  for (const auto* col : {&heads, &values, &bands}) {
    for (const auto& s : *col) out += fmt::format("{:<{}}", s, width);
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
  return out;
}

json to_json(const AgreementReport& r) {
  json pairs = json::array();
  for (const auto& [pair, k] : r.pairwise)
    pairs.push_back({{"a", pair.first},
                     {"b", pair.second},
                     {"kappa", k.value},
                     {"band", kappa_band(k.value)},
                     {"degenerate", k.degenerate}});
  return json{{"raters", r.raters},
              {"pairwise", pairs},
              {"fleiss", {{"kappa", r.fleiss.value}, {"band", kappa_band(r.fleiss.value)}, {"degenerate", r.fleiss.degenerate}}}};
}

json to_json(const ClassificationReport& r, const ConfusionCounts& c) {
  return json{{"acc", r.acc},       {"precision", r.precision}, {"recall", r.recall},
              {"f1", r.f1},         {"zero_division", r.zero_division},
              {"tp", c.tp},         {"fp", c.fp},               {"tn", c.tn},
              {"fn", c.fn}};
}

}  // namespace cbwatch
