#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "layoutseq/error.hpp"

using namespace layoutseq;

TEST_CASE("quantize boundaries") {
  CHECK(quantize(0.0, 128) == 0);
  CHECK(quantize(1.0, 128) == 127);
  CHECK(quantize(0.5, 128) == static_cast<int>(std::floor(0.5 * 128)));
  CHECK(quantize(-3.0, 128) == 0);
  CHECK(quantize(7.0, 128) == 127);
  CHECK_THROWS_AS(quantize(std::numeric_limits<double>::quiet_NaN(), 128), Error);
  CHECK_THROWS_AS(quantize(std::numeric_limits<double>::infinity(), 128), Error);
}

TEST_CASE("dequantize gives bin centers") {
  CHECK(dequantize(0, 128) == 0.00390625);
  CHECK(dequantize(127, 128) == 0.99609375);
  CHECK_THROWS_AS(dequantize(128, 128), Error);
  CHECK_THROWS_AS(dequantize(-1, 128), Error);
  for (int b = 0; b < 128; ++b) CHECK(quantize(dequantize(b, 128), 128) == b);
  for (int b = 0; b < 7; ++b) CHECK(quantize(dequantize(b, 7), 7) == b);
}

TEST_CASE("quantize is monotone") {
  Rng rng = make_rng(11);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int i = 0; i < 20000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    REQUIRE(quantize(a, 128) <= quantize(b, 128));
  }
}

TEST_CASE("normalize_layout") {
  SUBCASE("full canvas") {
    const RawElement r{0, 0, 0, 1440, 2560};
    const Layout l = normalize_layout({&r, 1}, 1440, 2560);
    CHECK(l.elements[0].box == QuantizedBox{0, 0, 127, 127});
  }
  SUBCASE("half width") {
    const RawElement r{0, 720, 0, 720, 2560};
    CHECK(normalize_layout({&r, 1}, 1440, 2560).elements[0].box.x == 64);
  }
  SUBCASE("zero width kept") {
    const RawElement r{0, 10, 10, 0, 20};
    CHECK(normalize_layout({&r, 1}, 100, 100).elements[0].box.w == 0);
  }
  SUBCASE("errors") {
    const RawElement r{0, 0, 0, 1, 1};
    CHECK_THROWS_AS(normalize_layout({}, 10, 10), Error);
    try {
      normalize_layout({}, 10, 10);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyLayout);
    }
    try {
      normalize_layout({&r, 1}, 0, 10);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidInput);
    }
  }
  SUBCASE("order preserved and idempotent through pixels") {
    Rng rng = make_rng(5);
    for (int t = 0; t < 200; ++t) {
      const Layout l = testing::random_layout(rng, 5);
      const double cw = 360 + t, ch = 640 + 2 * t;
      std::vector<RawElement> raw;
      for (const auto& e : l.elements) {
        raw.push_back({e.category, dequantize(e.box.x) * cw, dequantize(e.box.y) * ch, dequantize(e.box.w) * cw,
                       dequantize(e.box.h) * ch});
      }
      const Layout back = normalize_layout(raw, cw, ch);
      REQUIRE(back == l);
      CHECK(back.canvas_width == cw);
    }
  }
}

TEST_CASE("CategorySet invariants") {
  CHECK_THROWS_AS(CategorySet({"a", "a"}), Error);
  CHECK_THROWS_AS(CategorySet({"a", ""}), Error);
  CHECK_THROWS_AS(CategorySet({"a", "b"}, {"c"}), Error);
  const CategorySet c({"card", "text"}, {"card"});
  CHECK(c.is_background(0));
  CHECK_FALSE(c.is_background(1));
  CHECK(c.index_of("text") == 1);
  CHECK_FALSE(c.index_of("nope").has_value());
}

TEST_CASE("validate_layout") {
  const CategorySet c = testing::five_categories();
  Layout l;
  CHECK_THROWS_AS(validate_layout(l, c), Error);
  l.elements.push_back(testing::el(0, 1, 2, 3, 4));
  CHECK_NOTHROW(validate_layout(l, c));
  l.elements.push_back(testing::el(5, 1, 2, 3, 4));
  CHECK_THROWS_AS(validate_layout(l, c), Error);
  l.elements.back() = testing::el(1, 128, 0, 0, 0);
  CHECK_THROWS_AS(validate_layout(l, c), Error);
  Layout big;
  for (int i = 0; i < 21; ++i) big.elements.push_back(testing::el(0, 0, 0, 1, 1));
  CHECK_THROWS_AS(validate_layout(big, c), Error);
}
