#pragma once

// Slow, independently written references for the metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "layoutseq/layout.hpp"

namespace oracles {

using layoutseq::Element;
using layoutseq::Layout;
using layoutseq::QuantizedBox;

// Brute force over every bijection of padded slots; cross-category pairs score 0.
inline double similarity(const Layout& a, const Layout& b, int bins) {
  const int m = std::max(a.size(), b.size());
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  auto box = [bins](const QuantizedBox& q) {
    return std::array<double, 4>{double(q.x) / bins, double(q.y) / bins, double(q.x + q.w) / bins,
                                 double(q.y + q.h) / bins};
  };
  auto pair_iou = [&](const Element& p, const Element& q) {
    if (p.category != q.category) return 0.0;
    const auto u = box(p.box), v = box(q.box);
    const double iw = std::max(0.0, std::min(u[2], v[2]) - std::max(u[0], v[0]));
    const double ih = std::max(0.0, std::min(u[3], v[3]) - std::max(u[1], v[1]));
    const double ua = (u[2] - u[0]) * (u[3] - u[1]), va = (v[2] - v[0]) * (v[3] - v[1]);
    const double un = ua + va - iw * ih;
    return un > 0 ? iw * ih / un : 0.0;
  };
  double best = 0.0;
  do {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) {
      const int j = perm[static_cast<std::size_t>(i)];
      if (j < b.size()) s += pair_iou(a.elements[static_cast<std::size_t>(i)], b.elements[static_cast<std::size_t>(j)]);
    }
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return m ? best / m : 0.0;
}

inline double alignment(const Layout& l, int bins) {
  const int n = l.size();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double best = 1e300;
    const auto& p = l.elements[static_cast<std::size_t>(i)].box;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& q = l.elements[static_cast<std::size_t>(j)].box;
      const double ax[3] = {p.x / double(bins), (p.x + p.w / 2.0) / bins, double(p.x + p.w) / bins};
      const double bx[3] = {q.x / double(bins), (q.x + q.w / 2.0) / bins, double(q.x + q.w) / bins};
      const double ay[3] = {p.y / double(bins), (p.y + p.h / 2.0) / bins, double(p.y + p.h) / bins};
      const double by[3] = {q.y / double(bins), (q.y + q.h / 2.0) / bins, double(q.y + q.h) / bins};
      for (int k = 0; k < 3; ++k) best = std::min({best, std::abs(ax[k] - bx[k]), std::abs(ay[k] - by[k])});
    }
    sum += best;
  }
  return sum / n;
}

}  // namespace oracles
