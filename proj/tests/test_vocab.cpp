#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "layoutseq/error.hpp"
#include "layoutseq/fsm.hpp"
#include "layoutseq/io.hpp"
#include "layoutseq/relations.hpp"

using namespace layoutseq;
using testing::el;

namespace {

const Vocabulary& vocab5() {
  static const Vocabulary v(testing::five_categories());
  return v;
}

// category indices in five_categories()
constexpr int kButton = 0, kImage = 2, kText = 3;

ConstraintSpec random_spec(Task task, Rng& rng) {
  const Vocabulary& v = vocab5();
  const Layout l = testing::random_layout(rng, v.categories().size());
  ConstraintSpec s;
  s.task = task;
  switch (task) {
    case Task::UGen: break;
    case Task::GenT:
    case Task::GenTS:
    case Task::GenR:
      for (const auto& e : l.elements) {
        s.types.push_back(e.category);
        if (task == Task::GenTS) s.sizes.push_back({e.box.w, e.box.h});
      }
      if (task == Task::GenR) s.relationships = extract_relationships(l, 0.1, rng);
      break;
    case Task::Refinement: s.draft = l; break;
    case Task::Completion: s.partial = l; break;
  }
  return s;
}

}  // namespace

TEST_CASE("vocabulary layout") {
  const Vocabulary& v = vocab5();
  CHECK(v.size() == 5 + 6 + 5 + 128 + 8 + 20);
  std::vector<TokenGroup> groups;
  for (int id = 0; id < v.size(); ++id) groups.push_back(v.group(id));
  CHECK(std::is_sorted(groups.begin(), groups.end()));
  CHECK(std::count(groups.begin(), groups.end(), TokenGroup::Coordinate) == 128);
  CHECK(std::count(groups.begin(), groups.end(), TokenGroup::Relation) == 8);
  CHECK(v.group(v.size()) == TokenGroup::Invalid);
  CHECK(v.group(-1) == TokenGroup::Invalid);
  CHECK(v.token_name(Vocabulary::kSos) == "<sos>");
}

TEST_CASE("encode_layout lengths") {
  const Vocabulary& v = vocab5();
  Rng rng = make_rng(1);
  for (int n : {1, 2, 20}) {
    const Layout l = testing::layout_of_size(rng, n, 5);
    const auto seq = encode_layout(l, v);
    int count = 0;
    for (int id : seq.ids) count += id == Vocabulary::kSep;
    CHECK(static_cast<int>(seq.size()) == 2 + 6 * n - 1);
    CHECK(count == n - 1);
    CHECK(seq.ids.front() == Vocabulary::kSos);
    CHECK(seq.ids.back() == Vocabulary::kEos);
  }
  CHECK(encode_layout(testing::layout_of_size(rng, 1, 5), v).size() == 7);
  CHECK(encode_layout(testing::layout_of_size(rng, 20, 5), v).size() == 121);
  try {
    encode_layout(testing::layout_of_size(rng, 21, 5), v);
    FAIL("expected capacity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Capacity);
  }
}

TEST_CASE("codec round trip over random layouts") {
  const Vocabulary& v = vocab5();
  Rng rng = make_rng(2);
  for (int t = 0; t < 1000; ++t) {
    const Layout l = testing::random_layout(rng, 5);
    REQUIRE(decode_layout(encode_layout(l, v), v) == l);
  }
}

TEST_CASE("decode_layout rejects malformed sequences") {
  const Vocabulary& v = vocab5();
  const Layout l{{el(0, 1, 2, 3, 4), el(1, 5, 6, 7, 8)}};
  auto seq = encode_layout(l, v).ids;

  auto position_of_error = [&](std::vector<int> ids) -> long {
    try {
      decode_layout(ids, v);
    } catch (const ParseError& e) {
      return static_cast<long>(e.position());
    }
    return -1;
  };
  auto bad = seq;
  bad[2] = v.category_token(1);  // category where x belongs
  CHECK(position_of_error(bad) == 2);
  CHECK(position_of_error({Vocabulary::kSos, Vocabulary::kEos}) >= 0);
  try {
    decode_layout(std::vector<int>{Vocabulary::kSos, Vocabulary::kEos}, v);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("no elements") != std::string::npos);
  }
  auto no_eos = seq;
  no_eos.pop_back();
  CHECK(position_of_error(no_eos) >= 0);
  auto dangling = seq;
  dangling.back() = Vocabulary::kSep;
  dangling.push_back(Vocabulary::kEos);
  CHECK(position_of_error(dangling) >= 0);
  auto trailing = seq;
  trailing.push_back(Vocabulary::kPad);
  CHECK(position_of_error(trailing) >= 0);
}

TEST_CASE("encode_input grammars") {
  const Vocabulary& v = vocab5();
  SUBCASE("ugen") {
    ConstraintSpec s;
    CHECK(encode_input(s, v, false).ids == std::vector<int>{Vocabulary::kSos, Vocabulary::kEos});
  }
  SUBCASE("gen-t alphabetic") {
    ConstraintSpec s;
    s.task = Task::GenT;
    s.types = {kText, kImage};
    const std::vector<int> want{Vocabulary::kSos, v.category_token(kImage), Vocabulary::kSep, v.category_token(kText),
                                Vocabulary::kEos};
    CHECK(encode_input(s, v, false).ids == want);
  }
  SUBCASE("gen-r with one relationship") {
    ConstraintSpec s;
    s.task = Task::GenR;
    s.types = {kButton, kText};
    s.relationships = {{0, 1, Relation::Above}};
    const std::vector<int> want{Vocabulary::kSos,          v.category_token(kButton), Vocabulary::kSep,
                                v.category_token(kText),   Vocabulary::kSep2,         v.category_token(kButton),
                                v.index_token(0),          v.relation_token(Relation::Above),
                                v.category_token(kText),   v.index_token(1),          Vocabulary::kEos};
    CHECK(encode_input(s, v, false).ids == want);
  }
  SUBCASE("gen-r relationship indices follow the alphabetic sort") {
    ConstraintSpec s;
    s.task = Task::GenR;
    s.types = {kText, kButton};
    s.relationships = {{0, 1, Relation::Left}};  // text left-of button
    const auto c = canonicalize_spec(s, v.categories());
    CHECK(c.types == std::vector<int>{kButton, kText});
    CHECK(c.relationships[0] == Relationship{1, 0, Relation::Left});
  }
  SUBCASE("prefix transparency") {
    Rng rng = make_rng(3);
    for (Task t : kAllTasks) {
      const auto s = random_spec(t, rng);
      auto with = encode_input(s, v, true).ids;
      const auto without = encode_input(s, v, false).ids;
      CHECK(with.front() == v.task_token(t));
      with.erase(with.begin());
      CHECK(with == without);
    }
  }
  SUBCASE("malformed specs") {
    ConstraintSpec s;
    s.task = Task::GenTS;
    s.types = {kText};
    CHECK_THROWS_AS(encode_input(s, v, false), Error);
    s.task = Task::GenR;
    s.sizes.clear();
    s.relationships = {{0, 3, Relation::Left}};
    CHECK_THROWS_AS(encode_input(s, v, false), Error);
    ConstraintSpec many;
    many.task = Task::GenT;
    many.types.assign(21, kText);
    try {
      encode_input(many, v, false);
      FAIL("expected capacity error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Capacity);
    }
  }
}

TEST_CASE("every input parses under its task grammar and FSM") {
  const Vocabulary& v = vocab5();
  Rng rng = make_rng(4);
  for (int t = 0; t < 300; ++t) {
    for (Task task : kAllTasks) {
      const auto spec = random_spec(task, rng);
      const auto seq = encode_input(spec, v, t % 2 == 0);
      const auto parsed = parse_input(seq, task, v);
      REQUIRE(parsed == canonicalize_spec(spec, v.categories()));
    }
  }
  // The input of a refinement/completion is itself a layout sequence the UGen machine accepts.
  for (int t = 0; t < 200; ++t) {
    const auto spec = random_spec(Task::Refinement, rng);
    Fsm fsm(ConstraintSpec{}, v);
    for (std::size_t i = 1; i < encode_input(spec, v, false).ids.size(); ++i) {
      const int tok = encode_input(spec, v, false).ids[i];
      REQUIRE(fsm.feasible().contains(tok));
      fsm.advance(tok);
    }
    CHECK(fsm.done());
    CHECK(fsm.violations().empty());
  }
}

TEST_CASE("order_elements") {
  const CategorySet& c = vocab5().categories();
  const Layout l{{el(kText, 0, 0, 1, 1), el(kImage, 0, 0, 1, 1)}};
  const Layout a = order_elements(l, OrderPolicy::Alphabetic, c);
  CHECK(a.elements[0].category == kImage);
  CHECK(a.elements[1].category == kText);

  const Layout p{{el(0, 10, 0, 1, 1), el(0, 5, 0, 1, 1)}};
  const Layout po = order_elements(p, OrderPolicy::Position, c);
  CHECK(po.elements[0].box.x == 5);
  CHECK(po.elements[1].box.x == 10);

  const Layout ties{{el(kText, 3, 3, 1, 1), el(kText, 3, 3, 2, 2), el(kText, 3, 3, 3, 3)}};
  CHECK(order_elements(ties, OrderPolicy::Position, c) == ties);
  CHECK(order_elements(ties, OrderPolicy::Alphabetic, c) == ties);

  Rng rng = make_rng(6);
  for (int t = 0; t < 200; ++t) {
    const Layout r = testing::random_layout(rng, 5);
    for (OrderPolicy pol : {OrderPolicy::Alphabetic, OrderPolicy::Position}) {
      auto sorted_elements = [](Layout x) {
        std::sort(x.elements.begin(), x.elements.end(), [](const Element& a, const Element& b) {
          return std::tie(a.category, a.box.x, a.box.y, a.box.w, a.box.h) <
                 std::tie(b.category, b.box.x, b.box.y, b.box.w, b.box.h);
        });
        return x;
      };
      REQUIRE(sorted_elements(order_elements(r, pol, c)) == sorted_elements(r));
    }
  }
}

TEST_CASE("refinement noise") {
  Rng rng = make_rng(7);
  const Layout l = testing::layout_of_size(rng, 20, 5);
  Rng r0 = make_rng(8);
  CHECK(add_refinement_noise(l, 0.0, r0) == l);
  Rng r1 = make_rng(9), r2 = make_rng(9);
  CHECK(add_refinement_noise(l, 0.01, r1) == add_refinement_noise(l, 0.01, r2));

  // Interior boxes so clamping never kicks in.
  std::uniform_int_distribution<int> bin(32, 95);
  double total = 0.0;
  long count = 0;
  Rng noise = make_rng(10);
  for (int t = 0; t < 10000; ++t) {
    Layout one{{el(0, bin(rng), bin(rng), bin(rng), bin(rng))}};
    const Layout moved = add_refinement_noise(one, 0.01, noise);
    CHECK(moved.elements[0].category == 0);
    const auto& a = one.elements[0].box;
    const auto& b = moved.elements[0].box;
    total += std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.w - b.w) + std::abs(a.h - b.h);
    count += 4;
  }
  const double expected = 0.01 * 128 * std::sqrt(2.0 / 3.141592653589793);
  CHECK(total / count == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("extract_relationships") {
  Rng rng = make_rng(12);
  CHECK(extract_relationships(Layout{{el(0, 1, 1, 1, 1)}}, 1.0, rng).empty());

  // a above b: yA + hA <= yB
  const Layout two{{el(0, 10, 10, 20, 20), el(1, 40, 30, 20, 40)}};
  const auto all = extract_relationships(two, 1.0, rng);
  std::set<std::tuple<int, int, Relation>> got;
  for (const auto& r : all) got.insert({r.a, r.b, r.relation});
  std::set<std::tuple<int, int, Relation>> want;
  for (int i = 0; i < 2; ++i) {
    const int j = 1 - i;
    const auto& a = two.elements[static_cast<std::size_t>(i)].box;
    const auto& b = two.elements[static_cast<std::size_t>(j)].box;
    const long aa = static_cast<long>(a.w) * a.h, ab = static_cast<long>(b.w) * b.h;
    want.insert({i, j, std::abs(aa - ab) <= std::max(1.0, 0.05 * ab) ? Relation::Equal
                       : aa < ab                                     ? Relation::Smaller
                                                                     : Relation::Larger});
    if (a.y + a.h <= b.y) want.insert({i, j, Relation::Above});
    if (b.y + b.h <= a.y) want.insert({i, j, Relation::Bottom});
    if (a.x + a.w <= b.x) want.insert({i, j, Relation::Left});
    if (b.x + b.w <= a.x) want.insert({i, j, Relation::Right});
  }
  CHECK(got == want);
  CHECK(got.count({0, 1, Relation::Above}) == 1);
  CHECK(got.count({1, 0, Relation::Bottom}) == 1);

  // ceil(rate * total), drawn without replacement
  for (int t = 0; t < 200; ++t) {
    const Layout l = testing::random_layout(rng, 5);
    const auto full = extract_relationships(l, 1.0, rng);
    const auto part = extract_relationships(l, 0.1, rng);
    const auto want_n = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(full.size()) - 1e-9));
    REQUIRE(part.size() == want_n);
    std::set<std::tuple<int, int, Relation>> uniq;
    for (const auto& r : part) {
      uniq.insert({r.a, r.b, r.relation});
      REQUIRE(std::find(full.begin(), full.end(), r) != full.end());
    }
    REQUIRE(uniq.size() == part.size());
  }
}

TEST_CASE("sequence json round trip") {
  const Vocabulary& v = vocab5();
  Rng rng = make_rng(13);
  const auto seq = encode_layout(testing::random_layout(rng, 5), v);
  Task t = Task::UGen;
  const auto back = sequence_from_json(sequence_to_json(seq, Task::GenTS), v, &t);
  CHECK(back == seq);
  CHECK(t == Task::GenTS);
  CHECK_THROWS_AS(sequence_from_json(json{{"ids", {v.size()}}}, v), Error);
}
