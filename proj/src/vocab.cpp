#include "layoutseq/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "layoutseq/error.hpp"

namespace layoutseq {

namespace {

constexpr std::array<std::string_view, kNumTasks> kTaskNames = {"ugen",  "gen-t",      "gen-ts",
                                                                "gen-r", "refinement", "completion"};

// Strict cursor over an id span; every failure names the position.
class Cursor {
 public:
  Cursor(std::span<const int> ids, const Vocabulary& vocab) : ids_(ids), vocab_(vocab) {}

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ >= ids_.size(); }
  int peek() const { return at_end() ? -1 : ids_[pos_]; }

  void expect(int token, const char* what) {
    if (at_end()) throw ParseError(pos_, std::string("unexpected end, expected ") + what);
    if (ids_[pos_] != token) throw ParseError(pos_, std::string("expected ") + what + ", got " + vocab_.token_name(ids_[pos_]));
    ++pos_;
  }

  int take(TokenGroup group, const char* what) {
    if (at_end()) throw ParseError(pos_, std::string("unexpected end, expected ") + what);
    const int id = ids_[pos_];
    if (vocab_.group(id) != group) {
      throw ParseError(pos_, std::string("expected ") + what + ", got " + vocab_.token_name(id));
    }
    ++pos_;
    return id;
  }

  void expect_end() const {
    if (!at_end()) throw ParseError(pos_, "trailing tokens after <eos>");
  }

 private:
  std::span<const int> ids_;
  const Vocabulary& vocab_;
  std::size_t pos_ = 0;
};

Element take_element(Cursor& c, const Vocabulary& v) {
  Element e;
  e.category = v.category_of(c.take(TokenGroup::Category, "category"));
  e.box.x = v.bin_of(c.take(TokenGroup::Coordinate, "x coordinate"));
  e.box.y = v.bin_of(c.take(TokenGroup::Coordinate, "y coordinate"));
  e.box.w = v.bin_of(c.take(TokenGroup::Coordinate, "width"));
  e.box.h = v.bin_of(c.take(TokenGroup::Coordinate, "height"));
  return e;
}

// Body of a layout sequence, after <sos>, through <eos>.
Layout parse_layout_body(Cursor& c, const Vocabulary& v) {
  Layout out;
  if (c.peek() == Vocabulary::kEos) throw ParseError(c.pos(), "no elements");
  while (true) {
    if (out.size() >= v.max_elements()) throw ParseError(c.pos(), "more than max_elements elements");
    out.elements.push_back(take_element(c, v));
    if (c.peek() == Vocabulary::kSep) {
      c.expect(Vocabulary::kSep, "'|'");
      continue;
    }
    c.expect(Vocabulary::kEos, "'|' or <eos>");
    return out;
  }
}

void append_element(std::vector<int>& ids, const Element& e, const Vocabulary& v) {
  ids.push_back(v.category_token(e.category));
  ids.push_back(v.coord_token(e.box.x));
  ids.push_back(v.coord_token(e.box.y));
  ids.push_back(v.coord_token(e.box.w));
  ids.push_back(v.coord_token(e.box.h));
}

void append_layout_body(std::vector<int>& ids, const Layout& layout, const Vocabulary& v) {
  for (std::size_t i = 0; i < layout.elements.size(); ++i) {
    if (i > 0) ids.push_back(Vocabulary::kSep);
    append_element(ids, layout.elements[i], v);
  }
}

bool name_less(const CategorySet& cats, int a, int b) { return cats.name(a) < cats.name(b); }

}  // namespace

std::string_view to_string(Task task) { return kTaskNames[static_cast<std::size_t>(task)]; }

std::optional<Task> parse_task(std::string_view name) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (kTaskNames[i] == name) return kAllTasks[i];
  }
  if (name == "refine") return Task::Refinement;
  if (name == "complete") return Task::Completion;
  return std::nullopt;
}

std::string_view to_string(OrderPolicy p) { return p == OrderPolicy::Alphabetic ? "alphabetic" : "position"; }

std::optional<OrderPolicy> parse_order(std::string_view name) {
  if (name == "alphabetic") return OrderPolicy::Alphabetic;
  if (name == "position") return OrderPolicy::Position;
  return std::nullopt;
}

Vocabulary::Vocabulary(CategorySet categories, int bins, int max_elements)
    : categories_(std::move(categories)), bins_(bins), max_elements_(max_elements) {
  if (categories_.size() == 0) throw Error(ErrorKind::InvalidInput, "vocabulary needs at least one category");
  if (bins_ < 2) throw Error(ErrorKind::InvalidInput, "bins must be >= 2");
  if (max_elements_ < 1) throw Error(ErrorKind::InvalidInput, "max_elements must be >= 1");
  category_begin_ = kNumSpecials + kNumTasks;
  coord_begin_ = category_begin_ + categories_.size();
  relation_begin_ = coord_begin_ + bins_;
  index_begin_ = relation_begin_ + kNumRelations;
}

int Vocabulary::category_token(int category) const {
  if (!categories_.valid(category)) throw Error(ErrorKind::InvalidInput, "category index out of range");
  return category_begin_ + category;
}

int Vocabulary::coord_token(int bin) const {
  if (bin < 0 || bin >= bins_) throw Error(ErrorKind::InvalidInput, "coordinate bin out of range");
  return coord_begin_ + bin;
}

int Vocabulary::index_token(int index) const {
  if (index < 0 || index >= max_elements_) throw Error(ErrorKind::InvalidInput, "element index out of range");
  return index_begin_ + index;
}

TokenGroup Vocabulary::group(int id) const {
  if (id < 0) return TokenGroup::Invalid;
  if (id < kNumSpecials) return TokenGroup::Special;
  if (id < category_begin_) return TokenGroup::TaskPrefix;
  if (id < coord_begin_) return TokenGroup::Category;
  if (id < relation_begin_) return TokenGroup::Coordinate;
  if (id < index_begin_) return TokenGroup::Relation;
  if (id < size()) return TokenGroup::Index;
  return TokenGroup::Invalid;
}

std::string Vocabulary::token_name(int id) const {
  switch (group(id)) {
    case TokenGroup::Special: {
      static constexpr std::array<const char*, kNumSpecials> names = {"<pad>", "<sos>", "<eos>", "|", "||"};
      return names[static_cast<std::size_t>(id)];
    }
    case TokenGroup::TaskPrefix: return "<task:" + std::string(to_string(task_of(id))) + ">";
    case TokenGroup::Category: return "cat:" + categories_.name(category_of(id));
    case TokenGroup::Coordinate: return std::to_string(bin_of(id));
    case TokenGroup::Relation: return "rel:" + std::string(to_string(relation_of(id)));
    case TokenGroup::Index: return "#" + std::to_string(index_of(id));
    case TokenGroup::Invalid: break;
  }
  return "<invalid:" + std::to_string(id) + ">";
}

void validate_spec(const ConstraintSpec& spec, const Vocabulary& vocab) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConstraint, msg); };
  const auto& cats = vocab.categories();
  const bool wants_types = has_type_schedule(spec.task) && spec.task != Task::Refinement;
  if (!wants_types && !spec.types.empty()) fail("types are not used by " + std::string(to_string(spec.task)));
  if (spec.task != Task::GenTS && !spec.sizes.empty()) fail("sizes are only used by gen-ts");
  if (spec.task != Task::GenR && !spec.relationships.empty()) fail("relationships are only used by gen-r");
  if (spec.task != Task::Refinement && spec.draft) fail("draft is only used by refinement");
  if (spec.task != Task::Completion && spec.partial) fail("partial is only used by completion");

  if (wants_types) {
    if (spec.types.empty()) fail("types must be non-empty");
    if (static_cast<int>(spec.types.size()) > vocab.max_elements()) {
      throw Error(ErrorKind::Capacity, std::to_string(spec.types.size()) + " types exceed max_elements " +
                                           std::to_string(vocab.max_elements()));
    }
    for (int t : spec.types) {
      if (!cats.valid(t)) fail("unknown category index " + std::to_string(t));
    }
  }
  if (spec.task == Task::GenTS) {
    if (spec.sizes.size() != spec.types.size()) fail("sizes must align with types");
    for (const auto& s : spec.sizes) {
      if (s.w < 0 || s.w >= vocab.bins() || s.h < 0 || s.h >= vocab.bins()) fail("size bin out of range");
    }
  }
  if (spec.task == Task::GenR) {
    const int n = static_cast<int>(spec.types.size());
    for (const auto& r : spec.relationships) {
      if (r.a < 0 || r.a >= n || r.b < 0 || r.b >= n) fail("relationship index out of range");
      if (r.a == r.b) fail("relationship endpoints must differ");
    }
  }
  auto check_layout = [&](const std::optional<Layout>& l, const char* name) {
    if (!l) fail(std::string(name) + " is required");
    try {
      validate_layout(*l, cats, vocab.bins(), vocab.max_elements());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Capacity) throw;
      fail(std::string(name) + ": " + e.what());
    }
  };
  if (spec.task == Task::Refinement) check_layout(spec.draft, "draft");
  if (spec.task == Task::Completion) check_layout(spec.partial, "partial");
}

ConstraintSpec canonicalize_spec(const ConstraintSpec& spec, const CategorySet& categories) {
  if (spec.task != Task::GenT && spec.task != Task::GenTS && spec.task != Task::GenR) return spec;
  std::vector<int> perm(spec.types.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](int a, int b) { return name_less(categories, spec.types[a], spec.types[b]); });
  std::vector<int> new_index(perm.size());
  ConstraintSpec out = spec;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.types[i] = spec.types[perm[i]];
    if (!spec.sizes.empty()) out.sizes[i] = spec.sizes[perm[i]];
    new_index[perm[i]] = static_cast<int>(i);
  }
  for (auto& r : out.relationships) {
    r.a = new_index.at(r.a);
    r.b = new_index.at(r.b);
  }
  return out;
}

TokenSequence encode_layout(const Layout& layout, const Vocabulary& vocab) {
  if (layout.empty()) throw Error(ErrorKind::EmptyLayout, "cannot encode an empty layout");
  if (layout.size() > vocab.max_elements()) {
    throw Error(ErrorKind::Capacity, std::to_string(layout.size()) + " elements exceed max_elements " +
                                         std::to_string(vocab.max_elements()));
  }
  TokenSequence seq;
  seq.role = SeqRole::Output;
  seq.ids.reserve(static_cast<std::size_t>(1 + 6 * layout.size()));
  seq.ids.push_back(Vocabulary::kSos);
  append_layout_body(seq.ids, layout, vocab);
  seq.ids.push_back(Vocabulary::kEos);
  return seq;
}

Layout decode_layout(const TokenSequence& seq, const Vocabulary& vocab) { return decode_layout(seq.ids, vocab); }

Layout decode_layout(std::span<const int> ids, const Vocabulary& vocab) {
  Cursor c(ids, vocab);
  c.expect(Vocabulary::kSos, "<sos>");
  Layout out = parse_layout_body(c, vocab);
  c.expect_end();
  return out;
}

Layout salvage_layout(std::span<const int> ids, const Vocabulary& vocab) {
  Layout out;
  Cursor c(ids, vocab);
  try {
    c.expect(Vocabulary::kSos, "<sos>");
    while (out.size() < vocab.max_elements()) {
      out.elements.push_back(take_element(c, vocab));
      if (c.peek() != Vocabulary::kSep) break;
      c.expect(Vocabulary::kSep, "'|'");
    }
  } catch (const ParseError&) {
  }
  return out;
}

TokenSequence encode_input(const ConstraintSpec& raw_spec, const Vocabulary& vocab, bool with_prefix) {
  validate_spec(raw_spec, vocab);
  const ConstraintSpec spec = canonicalize_spec(raw_spec, vocab.categories());
  TokenSequence seq;
  seq.role = SeqRole::Input;
  auto& ids = seq.ids;
  if (with_prefix) ids.push_back(vocab.task_token(spec.task));
  ids.push_back(Vocabulary::kSos);
  switch (spec.task) {
    case Task::UGen: break;
    case Task::GenT:
    case Task::GenTS:
    case Task::GenR:
      for (std::size_t i = 0; i < spec.types.size(); ++i) {
        if (i > 0) ids.push_back(Vocabulary::kSep);
        ids.push_back(vocab.category_token(spec.types[i]));
        if (spec.task == Task::GenTS) {
          ids.push_back(vocab.coord_token(spec.sizes[i].w));
          ids.push_back(vocab.coord_token(spec.sizes[i].h));
        }
      }
      if (spec.task == Task::GenR && !spec.relationships.empty()) {
        ids.push_back(Vocabulary::kSep2);
        for (std::size_t m = 0; m < spec.relationships.size(); ++m) {
          const auto& r = spec.relationships[m];
          if (m > 0) ids.push_back(Vocabulary::kSep);
          ids.push_back(vocab.category_token(spec.types[static_cast<std::size_t>(r.a)]));
          ids.push_back(vocab.index_token(r.a));
          ids.push_back(vocab.relation_token(r.relation));
          ids.push_back(vocab.category_token(spec.types[static_cast<std::size_t>(r.b)]));
          ids.push_back(vocab.index_token(r.b));
        }
      }
      break;
    case Task::Refinement: append_layout_body(ids, *spec.draft, vocab); break;
    case Task::Completion: append_layout_body(ids, *spec.partial, vocab); break;
  }
  ids.push_back(Vocabulary::kEos);
  return seq;
}

ConstraintSpec parse_input(const TokenSequence& seq, Task task, const Vocabulary& vocab) {
  Cursor c(seq.ids, vocab);
  if (vocab.group(c.peek()) == TokenGroup::TaskPrefix) {
    if (vocab.task_of(c.peek()) != task) throw ParseError(c.pos(), "task prefix does not match");
    c.take(TokenGroup::TaskPrefix, "task prefix");
  }
  c.expect(Vocabulary::kSos, "<sos>");
  ConstraintSpec spec;
  spec.task = task;
  switch (task) {
    case Task::UGen: c.expect(Vocabulary::kEos, "<eos>"); break;
    case Task::GenT:
    case Task::GenTS:
    case Task::GenR: {
      while (true) {
        spec.types.push_back(vocab.category_of(c.take(TokenGroup::Category, "category")));
        if (task == Task::GenTS) {
          const int w = vocab.bin_of(c.take(TokenGroup::Coordinate, "width"));
          const int h = vocab.bin_of(c.take(TokenGroup::Coordinate, "height"));
          spec.sizes.push_back({w, h});
        }
        if (c.peek() != Vocabulary::kSep) break;
        c.expect(Vocabulary::kSep, "'|'");
      }
      if (task == Task::GenR && c.peek() == Vocabulary::kSep2) {
        c.expect(Vocabulary::kSep2, "'||'");
        while (true) {
          Relationship r;
          const std::size_t at = c.pos();
          const int ca = vocab.category_of(c.take(TokenGroup::Category, "category"));
          r.a = vocab.index_of(c.take(TokenGroup::Index, "element index"));
          r.relation = vocab.relation_of(c.take(TokenGroup::Relation, "relation"));
          const int cb = vocab.category_of(c.take(TokenGroup::Category, "category"));
          r.b = vocab.index_of(c.take(TokenGroup::Index, "element index"));
          const int n = static_cast<int>(spec.types.size());
          if (r.a >= n || r.b >= n) throw ParseError(at, "relationship index out of range");
          if (spec.types[static_cast<std::size_t>(r.a)] != ca || spec.types[static_cast<std::size_t>(r.b)] != cb) {
            throw ParseError(at, "relationship category does not match its index");
          }
          spec.relationships.push_back(r);
          if (c.peek() != Vocabulary::kSep) break;
          c.expect(Vocabulary::kSep, "'|'");
        }
      }
      c.expect(Vocabulary::kEos, "<eos>");
      break;
    }
    case Task::Refinement: spec.draft = parse_layout_body(c, vocab); break;
    case Task::Completion: spec.partial = parse_layout_body(c, vocab); break;
  }
  c.expect_end();
  return spec;
}

Layout order_elements(const Layout& layout, OrderPolicy policy, const CategorySet& categories) {
  Layout out = layout;
  auto& els = out.elements;
  if (policy == OrderPolicy::Alphabetic) {
    std::stable_sort(els.begin(), els.end(),
                     [&](const Element& a, const Element& b) { return name_less(categories, a.category, b.category); });
  } else {
    std::stable_sort(els.begin(), els.end(), [](const Element& a, const Element& b) {
      return a.box.x != b.box.x ? a.box.x < b.box.x : a.box.y < b.box.y;
    });
  }
  return out;
}

Layout add_refinement_noise(const Layout& layout, double std_dev, Rng& rng, int bins) {
  if (!(std_dev >= 0.0)) throw Error(ErrorKind::InvalidInput, "noise std must be >= 0");
  if (std_dev == 0.0) return layout;
  std::normal_distribution<double> noise(0.0, std_dev);
  Layout out = layout;
  auto jitter = [&](int& b) { b = quantize(dequantize(b, bins) + noise(rng), bins); };
  for (auto& e : out.elements) {
    jitter(e.box.x);
    jitter(e.box.y);
    jitter(e.box.w);
    jitter(e.box.h);
  }
  return out;
}

std::vector<Relationship> extract_relationships(const Layout& layout, double sample_rate, Rng& rng) {
  if (!(sample_rate >= 0.0 && sample_rate <= 1.0)) throw Error(ErrorKind::InvalidInput, "sample_rate outside [0,1]");
  std::vector<Relationship> all;
  const int n = layout.size();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& a = layout.elements[static_cast<std::size_t>(i)].box;
      const auto& b = layout.elements[static_cast<std::size_t>(j)].box;
      Relation size_rel = relation_holds(Relation::Equal, a, b)   ? Relation::Equal
                          : relation_holds(Relation::Smaller, a, b) ? Relation::Smaller
                                                                    : Relation::Larger;
      all.push_back({i, j, size_rel});
      for (Relation r : {Relation::Above, Relation::Bottom, Relation::Left, Relation::Right, Relation::Overlap}) {
        if (relation_holds(r, a, b)) all.push_back({i, j, r});
      }
    }
  }
  const auto total = all.size();
  const auto k = std::min(total, static_cast<std::size_t>(std::ceil(sample_rate * static_cast<double>(total) - 1e-9)));
  // Partial Fisher-Yates over indices, then restore enumeration order.
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<Relationship> out;
  out.reserve(k);
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

}  // namespace layoutseq
