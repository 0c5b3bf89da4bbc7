#include "parasent/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "parasent/loss.hpp"

namespace parasent {
namespace {

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / double(x.size());
}

double sample_variance(std::span<const double> x, double mean) {
  if (x.size() < 2) return 0.0;
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / double(x.size() - 1);
}

}  // namespace

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson_r: unequal lengths");
  if (x.size() < 2) throw std::invalid_argument("pearson_r: need at least two points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson_r: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman_rho: unequal lengths");
  if (x.size() < 2) throw std::invalid_argument("spearman_rho: need at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  try {
    return pearson_r(rx, ry);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("spearman_rho: constant input");
  }
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("welch_t_test: each sample needs at least two values");
  const double na = double(a.size()), nb = double(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_variance(a, ma) / na;
  const double vb = sample_variance(b, mb) / nb;
  const double se2 = va + vb;
  WelchResult r;
  if (se2 == 0.0) {
    r.df = na + nb - 2.0;
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma > mb ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

std::size_t GradeStats::total_count() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.count;
  return n;
}

void GradeStats::write_csv(std::ostream& out) const {
  const auto old = out.precision(10);
  out << "grade,count,mean,std\n";
  for (const auto& r : rows) out << r.grade << ',' << r.count << ',' << r.mean << ',' << r.std << '\n';
  out << "\ngrade_a,grade_b,t,p,significant\n";
  for (const auto& t : tests) {
    out << t.grade_a << ',' << t.grade_b << ',';
    if (t.testable) {
      out << t.result.t << ',' << t.result.p << ',' << (t.significant ? "yes" : "no") << '\n';
    } else {
      out << ",,untestable\n";
    }
  }
  out.precision(old);
}

GradeStats grade_stats_from_scores(std::span<const double> grades, std::span<const double> sims,
                                   double alpha) {
  if (grades.size() != sims.size()) throw std::invalid_argument("grade/similarity length mismatch");
  if (grades.empty()) throw std::invalid_argument("no annotated pairs");
  std::map<double, std::vector<double>> by_grade;
  for (std::size_t i = 0; i < grades.size(); ++i) by_grade[grades[i]].push_back(sims[i]);

  GradeStats stats;
  stats.alpha = alpha;
  for (const auto& [g, v] : by_grade) {
    GradeRow row;
    row.grade = g;
    row.count = v.size();
    row.mean = mean_of(v);
    row.std = std::sqrt(sample_variance(v, row.mean));
    stats.rows.push_back(row);
  }
  for (auto it = by_grade.begin(); std::next(it) != by_grade.end(); ++it) {
    auto hi = std::next(it);
    GradeTest t;
    t.grade_a = it->first;
    t.grade_b = hi->first;
    t.testable = it->second.size() >= 2 && hi->second.size() >= 2;
    if (t.testable) {
      t.result = welch_t_test(hi->second, it->second);
      t.significant = t.result.p < alpha;
    }
    stats.tests.push_back(t);
  }
  return stats;
}

std::vector<double> pair_similarities(const AnnotatedPairSet& set, const EncoderModel& encoder) {
  std::vector<double> sims;
  sims.reserve(set.size());
  for (const auto& p : set.pairs) {
    const auto u = encoder.embed(p.a);
    const auto v = encoder.embed(p.b);
    sims.push_back(1.0 - cosine_distance<float>(u, v));
  }
  return sims;
}

GradeStats grade_similarity_stats(const AnnotatedPairSet& dev, const EncoderModel& encoder,
                                  double alpha) {
  if (dev.pairs.empty()) throw std::invalid_argument("empty annotated set");
  std::vector<double> grades;
  grades.reserve(dev.size());
  for (const auto& p : dev.pairs) grades.push_back(p.grade);
  const auto sims = pair_similarities(dev, encoder);
  return grade_stats_from_scores(grades, sims, alpha);
}

}  // namespace parasent
