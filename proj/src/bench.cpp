#include "catparc/bench.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "catparc/error.hpp"

namespace catparc {
namespace {

std::string fmt_value(double v) {
  return std::isnan(v) ? std::string("NA") : fmt::format("{:.10g}", v);
}

double parse_value(const std::string& s, std::size_t line_no) {
  if (s == "NA" || s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw FormatError(fmt::format("rankings line {}: '{}' is not a number", line_no, s));
  }
}

double interpolate_tpr(const RocCurve& c, double x) {
  // Highest TPR reached at FPR <= x along straight segments.
  for (std::size_t k = 1; k < c.fpr.size(); ++k) {
    if (c.fpr[k] < x) continue;
    if (c.fpr[k] == x) {
      std::size_t last = k;
      while (last + 1 < c.fpr.size() && c.fpr[last + 1] == x) ++last;
      return c.tpr[last];
    }
    const double span = c.fpr[k] - c.fpr[k - 1];
    const double w = span > 0.0 ? (x - c.fpr[k - 1]) / span : 1.0;
    return c.tpr[k - 1] + w * (c.tpr[k] - c.tpr[k - 1]);
  }
  return c.tpr.empty() ? 0.0 : c.tpr.back();
}

}  // namespace

void write_rankings_tsv(std::ostream& out, const std::vector<RankingRow>& rows) {
  out << "method\ti\tj\tscore\tp_value\n";
  for (const auto& r : rows)
    fmt::print(out, "{}\t{}\t{}\t{}\t{}\n", r.method, r.i + 1, r.j + 1, fmt_value(r.score),
               fmt_value(r.p_value));
}

std::vector<RankingRow> read_rankings_tsv(std::istream& in) {
  std::vector<RankingRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string method, i, j, score, p = "NA";
    if (!(fields >> method >> i >> j >> score))
      throw FormatError(fmt::format("rankings line {}: need at least 4 fields", line_no));
    fields >> p;
    if (method == "method") continue;
    RankingRow r;
    r.method = method;
    const double a = parse_value(i, line_no), b = parse_value(j, line_no);
    if (!(a >= 1.0 && b >= 1.0) || a == b || a != std::floor(a) || b != std::floor(b))
      throw FormatError(fmt::format("rankings line {}: columns must be distinct and 1-based", line_no));
    r.i = static_cast<std::size_t>(std::min(a, b)) - 1;
    r.j = static_cast<std::size_t>(std::max(a, b)) - 1;
    r.score = parse_value(score, line_no);
    r.p_value = parse_value(p, line_no);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw EmptyInputError("rankings file has no rows");
  return rows;
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& labels,
                   bool higher_is_positive) {
  if (scores.size() != labels.size()) throw InputError("roc_curve: scores and labels differ in size");
  const auto positives = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const double negatives = static_cast<double>(labels.size()) - positives;
  if (positives == 0.0 || negatives == 0.0)
    throw InputError("roc_curve: AUC is undefined without both positive and negative pairs");
  std::vector<double> s(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    double v = higher_is_positive ? scores[k] : -scores[k];
    if (std::isnan(v)) v = -std::numeric_limits<double>::infinity();
    s[k] = v;
  }
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  RocCurve c;
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  c.fpr.push_back(0.0);
  c.tpr.push_back(0.0);
  double tp = 0.0, fp = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double level = s[order[k]];
    while (k < order.size() && s[order[k]] == level) {
      (labels[order[k]] ? tp : fp) += 1.0;
      ++k;
    }
    c.thresholds.push_back(higher_is_positive ? level : -level);
    c.fpr.push_back(fp / negatives);
    c.tpr.push_back(tp / positives);
  }
  c.auc = auc(c);
  return c;
}

double auc(const RocCurve& c) {
  double area = 0.0;
  for (std::size_t k = 1; k < c.fpr.size(); ++k)
    area += (c.fpr[k] - c.fpr[k - 1]) * 0.5 * (c.tpr[k] + c.tpr[k - 1]);
  return area;
}

Rates rate_at_level(const std::vector<double>& pvalues, const std::vector<bool>& labels,
                    double alpha) {
  if (pvalues.size() != labels.size()) throw InputError("rate_at_level: size mismatch");
  double null_n = 0, null_hit = 0, alt_n = 0, alt_hit = 0;
  for (std::size_t k = 0; k < pvalues.size(); ++k) {
    if (std::isnan(pvalues[k])) continue;
    const bool hit = pvalues[k] < alpha;
    if (labels[k]) {
      ++alt_n;
      alt_hit += hit;
    } else {
      ++null_n;
      null_hit += hit;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {null_n > 0 ? null_hit / null_n : nan, alt_n > 0 ? alt_hit / alt_n : nan};
}

Scored join_truth(const std::vector<RankingRow>& rows, const std::vector<TruthPair>& truth) {
  std::map<std::pair<std::size_t, std::size_t>, const RankingRow*> by_pair;
  for (const auto& r : rows) by_pair[{std::min(r.i, r.j), std::max(r.i, r.j)}] = &r;
  Scored out;
  for (const auto& t : truth) {
    const auto it = by_pair.find({std::min(t.i, t.j), std::max(t.i, t.j)});
    out.labels.push_back(t.positive);
    if (it == by_pair.end()) {
      out.scores.push_back(-std::numeric_limits<double>::infinity());
      out.pvalues.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      out.scores.push_back(it->second->score);
      out.pvalues.push_back(it->second->p_value);
    }
  }
  return out;
}

double median(std::vector<double> values) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MethodSummary median_summary(const std::vector<ReplicateMetrics>& reps) {
  std::vector<double> a, t, p;
  for (const auto& r : reps) {
    a.push_back(r.auc);
    t.push_back(r.rates.type1);
    p.push_back(r.rates.power);
  }
  return {median(a), median(t), median(p), reps.size()};
}

RocCurve median_roc(const std::vector<RocCurve>& curves, std::size_t grid) {
  if (grid < 2) throw InputError("median_roc: grid needs at least 2 points");
  RocCurve out;
  for (std::size_t g = 0; g < grid; ++g) {
    const double x = static_cast<double>(g) / static_cast<double>(grid - 1);
    std::vector<double> ys;
    for (const auto& c : curves) ys.push_back(interpolate_tpr(c, x));
    out.fpr.push_back(x);
    out.tpr.push_back(g == 0 ? 0.0 : median(ys));
    out.thresholds.push_back(std::numeric_limits<double>::quiet_NaN());
  }
  // FPR 0 may already carry positives ranked above every negative.
  if (!curves.empty()) {
    std::vector<double> ys;
    for (const auto& c : curves) ys.push_back(interpolate_tpr(c, 0.0));
    out.fpr.insert(out.fpr.begin() + 1, 0.0);
    out.tpr.insert(out.tpr.begin() + 1, median(ys));
    out.thresholds.insert(out.thresholds.begin() + 1, std::numeric_limits<double>::quiet_NaN());
  }
  out.auc = auc(out);
  return out;
}

std::map<std::string, ReplicateMetrics> evaluate_rankings(const std::vector<RankingRow>& rows,
                                                          const std::vector<TruthPair>& truth,
                                                          double alpha) {
  std::map<std::string, std::vector<RankingRow>> by_method;
  for (const auto& r : rows) by_method[r.method].push_back(r);
  std::map<std::string, ReplicateMetrics> out;
  for (const auto& [method, method_rows] : by_method) {
    const Scored s = join_truth(method_rows, truth);
    ReplicateMetrics m;
    m.roc = roc_curve(s.scores, s.labels);
    m.auc = m.roc.auc;
    m.rates = rate_at_level(s.pvalues, s.labels, alpha);
    out[method] = std::move(m);
  }
  return out;
}

void write_roc_tsv(std::ostream& out, const std::map<std::string, RocCurve>& curves) {
  out << "method\tfpr\ttpr\tthreshold\n";
  for (const auto& [method, c] : curves)
    for (std::size_t k = 0; k < c.fpr.size(); ++k)
      fmt::print(out, "{}\t{:.6f}\t{:.6f}\t{}\n", method, c.fpr[k], c.tpr[k],
                 k < c.thresholds.size() ? fmt_value(c.thresholds[k]) : "NA");
}

nlohmann::json summary_json(const std::map<std::string, MethodSummary>& summary) {
  auto number = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [method, s] : summary)
    out[method] = {{"auc", number(s.auc)},
                   {"type1", number(s.type1)},
                   {"power", number(s.power)},
                   {"replicates", s.replicates}};
  return out;
}

}  // namespace catparc
