#pragma once

#include <random>
#include <vector>

#include "layoutseq/layout.hpp"
#include "layoutseq/random.hpp"
#include "layoutseq/vocab.hpp"

namespace testing {

using namespace layoutseq;

inline CategorySet five_categories() {
  return CategorySet({"button", "icon", "image", "text", "title"}, {});
}

inline Layout layout_of_size(Rng& rng, int n, int categories, int bins = kDefaultBins) {
  std::uniform_int_distribution<int> cat(0, categories - 1), bin(0, bins - 1);
  Layout l;
  for (int i = 0; i < n; ++i) l.elements.push_back({cat(rng), {bin(rng), bin(rng), bin(rng), bin(rng)}});
  return l;
}

inline Layout random_layout(Rng& rng, int categories, int max_n = kDefaultMaxElements) {
  return layout_of_size(rng, std::uniform_int_distribution<int>(1, max_n)(rng), categories);
}

inline Element el(int c, int x, int y, int w, int h) { return {c, {x, y, w, h}}; }

}  // namespace testing
