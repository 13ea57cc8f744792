#include "layoutseq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "layoutseq/error.hpp"
#include "layoutseq/log.hpp"

namespace layoutseq {

using nlohmann::json;

namespace {

struct RawRecord {
  double canvas_w = 0.0;
  double canvas_h = 0.0;
  std::vector<std::pair<std::string, std::array<double, 4>>> elements;  // name, x y w h
};

std::array<double, 4> read_bbox(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::runtime_error("bbox must have 4 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

RawRecord parse_generic(const json& j) {
  RawRecord r;
  r.canvas_w = j.at("canvas").at("w").get<double>();
  r.canvas_h = j.at("canvas").at("h").get<double>();
  for (const auto& e : j.at("elements")) r.elements.emplace_back(e.at("category").get<std::string>(), read_bbox(e.at("bbox")));
  return r;
}

void collect_rico(const json& node, RawRecord& r) {
  if (node.contains("componentLabel") && node.contains("bounds")) {
    const auto& b = node.at("bounds");
    const double x1 = b.at(0).get<double>(), y1 = b.at(1).get<double>();
    const double x2 = b.at(2).get<double>(), y2 = b.at(3).get<double>();
    r.elements.emplace_back(node.at("componentLabel").get<std::string>(),
                            std::array<double, 4>{x1, y1, std::max(0.0, x2 - x1), std::max(0.0, y2 - y1)});
  }
  if (node.contains("children")) {
    for (const auto& c : node.at("children")) collect_rico(c, r);
  }
}

RawRecord parse_rico(const json& j) {
  RawRecord r;
  const auto& b = j.at("bounds");
  r.canvas_w = b.at(2).get<double>() - b.at(0).get<double>();
  r.canvas_h = b.at(3).get<double>() - b.at(1).get<double>();
  if (j.contains("children")) {
    for (const auto& c : j.at("children")) collect_rico(c, r);
  }
  return r;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

std::vector<RawRecord> parse_publaynet(const std::filesystem::path& path, std::size_t& skipped) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, "malformed COCO file " + path.string() + ": " + e.what());
  }
  std::map<long, std::string> cat_names;
  for (const auto& c : doc.value("categories", json::array())) cat_names[c.at("id").get<long>()] = c.at("name").get<std::string>();
  std::map<long, std::size_t> image_slot;
  std::vector<RawRecord> records;
  for (const auto& img : doc.value("images", json::array())) {
    RawRecord r;
    r.canvas_w = img.at("width").get<double>();
    r.canvas_h = img.at("height").get<double>();
    image_slot[img.at("id").get<long>()] = records.size();
    records.push_back(std::move(r));
  }
  for (const auto& a : doc.value("annotations", json::array())) {
    try {
      auto slot = image_slot.find(a.at("image_id").get<long>());
      auto name = cat_names.find(a.at("category_id").get<long>());
      if (slot == image_slot.end() || name == cat_names.end()) throw std::runtime_error("dangling reference");
      records[slot->second].elements.emplace_back(name->second, read_bbox(a.at("bbox")));
    } catch (const std::exception&) {
      ++skipped;
    }
  }
  return records;
}

std::vector<std::string> default_background(DatasetSchema schema) {
  if (schema == DatasetSchema::RicoLike) return {"Background Image", "Card", "List Item", "Modal"};
  return {};
}

}  // namespace

std::optional<DatasetSchema> parse_schema(std::string_view name) {
  if (name == "generic") return DatasetSchema::Generic;
  if (name == "rico-like" || name == "rico") return DatasetSchema::RicoLike;
  if (name == "publaynet-like" || name == "publaynet") return DatasetSchema::PubLayNetLike;
  return std::nullopt;
}

std::string_view to_string(DatasetSchema s) {
  switch (s) {
    case DatasetSchema::Generic: return "generic";
    case DatasetSchema::RicoLike: return "rico-like";
    case DatasetSchema::PubLayNetLike: return "publaynet-like";
  }
  return "generic";
}

std::optional<SynthStyle> parse_style(std::string_view name) {
  if (name == "grid") return SynthStyle::Grid;
  if (name == "freeform") return SynthStyle::Freeform;
  return std::nullopt;
}

std::string_view to_string(SynthStyle s) { return s == SynthStyle::Grid ? "grid" : "freeform"; }

IngestResult ingest(const std::filesystem::path& path, DatasetSchema schema, int max_elements, int bins) {
  std::vector<RawRecord> records;
  std::size_t skipped = 0;
  if (schema == DatasetSchema::PubLayNetLike) {
    records = parse_publaynet(path, skipped);
  } else {
    std::vector<std::string> texts;
    if (std::filesystem::is_directory(path)) {
      std::vector<std::filesystem::path> files;
      for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        std::ifstream is(f);
        texts.emplace_back(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
      }
    } else {
      texts = read_lines(path);
    }
    for (const auto& text : texts) {
      try {
        const json j = json::parse(text);
        records.push_back(schema == DatasetSchema::RicoLike ? parse_rico(j) : parse_generic(j));
      } catch (const std::exception& e) {
        spdlog::debug("skipping malformed record: {}", e.what());
        ++skipped;
      }
    }
  }

  // Records that survive the filters define the category set.
  std::vector<const RawRecord*> kept;
  std::set<std::string> names;
  for (const auto& r : records) {
    const auto n = static_cast<int>(r.elements.size());
    if (n == 0 || n > max_elements || !(r.canvas_w > 0.0) || !(r.canvas_h > 0.0)) {
      ++skipped;
      continue;
    }
    kept.push_back(&r);
    for (const auto& [name, box] : r.elements) names.insert(name);
  }
  std::vector<std::string> background;
  for (const auto& b : default_background(schema)) {
    if (names.count(b)) background.push_back(b);
  }
  IngestResult out;
  out.categories = CategorySet(std::vector<std::string>(names.begin(), names.end()), background);
  for (const RawRecord* r : kept) {
    try {
      std::vector<RawElement> raw;
      for (const auto& [name, box] : r->elements) {
        raw.push_back({*out.categories.index_of(name), box[0], box[1], box[2], box[3]});
      }
      out.layouts.push_back(normalize_layout(raw, r->canvas_w, r->canvas_h, bins));
    } catch (const Error& e) {
      spdlog::debug("skipping invalid record: {}", e.what());
      ++out.skipped;
    }
  }
  out.skipped += skipped;
  if (out.layouts.empty()) throw Error(ErrorKind::EmptyDataset, "no valid layouts in " + path.string());
  return out;
}

Splits split(const std::vector<Layout>& layouts, std::array<double, 3> fractions, std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || fractions[0] < 0 || fractions[1] < 0 || fractions[2] < 0) {
    throw Error(ErrorKind::InvalidInput, "split fractions must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(layouts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, 0x5911);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(layouts.size());
  const auto n_train = std::min(layouts.size(), static_cast<std::size_t>(std::llround(fractions[0] * n)));
  const auto n_val = std::min(layouts.size() - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
  Splits s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? s.train : (i < n_train + n_val ? s.val : s.test);
    dst.push_back(layouts[order[i]]);
  }
  return s;
}

CategorySet default_synthetic_categories() { return CategorySet({"button", "icon", "image", "text", "title"}); }

std::vector<Layout> synthesize(int n, const CategorySet& categories, SynthStyle style, std::uint64_t seed, int bins,
                               int max_elements) {
  if (n < 1) throw Error(ErrorKind::InvalidInput, "synthesize needs n >= 1");
  if (categories.size() < 2 || categories.size() > 25) {
    throw Error(ErrorKind::InvalidInput, "synthesize needs between 2 and 25 categories");
  }
  std::vector<Layout> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
    auto uni = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    Layout l;
    l.canvas_width = bins;
    l.canvas_height = bins;
    if (style == SynthStyle::Grid) {
      const int cols = uni(1, 3);
      const int max_rows = std::max(1, std::min(5, max_elements / cols));
      const int rows = uni(1, max_rows);
      const int margin = uni(2, bins / 12);
      const int gap = uni(2, 6);
      const int col_w = (bins - 2 * margin - (cols - 1) * gap) / cols;
      int y = uni(2, bins / 6);
      for (int r = 0; r < rows; ++r) {
        const int h = uni(bins / 20, bins / 6);
        if (y + h > bins - 1) break;
        const int row_cat = uni(0, categories.size() - 1);
        for (int c = 0; c < cols; ++c) {
          // Rows usually repeat one category, with occasional variation.
          const int cat = uni(0, 3) == 0 ? uni(0, categories.size() - 1) : row_cat;
          l.elements.push_back({cat, {margin + c * (col_w + gap), y, col_w, h}});
        }
        y += h + uni(2, 6);
      }
      if (l.elements.empty()) l.elements.push_back({uni(0, categories.size() - 1), {margin, 2, col_w, bins / 20}});
    } else {
      const int count = uni(1, std::min(max_elements, 8));
      for (int k = 0; k < count; ++k) {
        QuantizedBox b;
        b.x = uni(0, bins - 8);
        b.y = uni(0, bins - 8);
        b.w = uni(1, bins - 1 - b.x);
        b.h = uni(1, bins - 1 - b.y);
        l.elements.push_back({uni(0, categories.size() - 1), b});
      }
    }
    out.push_back(std::move(l));
  }
  return out;
}

ConstraintSpec constraint_for(const Layout& layout, Task task, const Vocabulary& vocab, const ExampleOptions& options,
                              Rng& rng) {
  const auto& cats = vocab.categories();
  const Layout alpha = order_elements(layout, OrderPolicy::Alphabetic, cats);
  ConstraintSpec spec;
  spec.task = task;
  switch (task) {
    case Task::UGen: break;
    case Task::GenT:
    case Task::GenTS:
    case Task::GenR:
      for (const auto& e : alpha.elements) {
        spec.types.push_back(e.category);
        if (task == Task::GenTS) spec.sizes.push_back({e.box.w, e.box.h});
      }
      if (task == Task::GenR) {
        spec.relationships = extract_relationships(alpha, options.relation_sample_rate, rng);
        if (spec.relationships.size() > options.max_relationships) spec.relationships.resize(options.max_relationships);
      }
      break;
    case Task::Refinement: spec.draft = add_refinement_noise(alpha, options.noise_std, rng, vocab.bins()); break;
    case Task::Completion: {
      Layout known = order_elements(layout, options.output_order, cats);
      const auto p = static_cast<std::size_t>(std::clamp(options.completion_known, 1, known.size()));
      known.elements.resize(p);
      spec.partial = known;
      break;
    }
  }
  return spec;
}

std::vector<TrainingExample> build_examples(const std::vector<Layout>& layouts, Task task, const Vocabulary& vocab,
                                            const ExampleOptions& options, std::uint64_t seed) {
  std::vector<TrainingExample> out;
  out.reserve(layouts.size());
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    Rng rng = make_rng(seed, i);
    const ConstraintSpec spec = constraint_for(layouts[i], task, vocab, options, rng);
    TrainingExample ex;
    ex.task = task;
    ex.input = encode_input(spec, vocab, options.with_prefix);
    ex.target = encode_layout(order_elements(layouts[i], options.output_order, vocab.categories()), vocab);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Layout> read_dataset(const std::filesystem::path& path, const CategorySet& categories, int bins) {
  std::vector<Layout> out;
  std::size_t skipped = 0;
  for (const auto& line : read_lines(path)) {
    try {
      const RawRecord r = parse_generic(json::parse(line));
      std::vector<RawElement> raw;
      for (const auto& [name, box] : r.elements) {
        const auto idx = categories.index_of(name);
        if (!idx) throw std::runtime_error("unknown category " + name);
        raw.push_back({*idx, box[0], box[1], box[2], box[3]});
      }
      out.push_back(normalize_layout(raw, r.canvas_w, r.canvas_h, bins));
    } catch (const std::exception& e) {
      spdlog::debug("skipping record: {}", e.what());
      ++skipped;
    }
  }
  if (skipped > 0) spdlog::warn("{}: skipped {} records", path.string(), skipped);
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<Layout>& layouts, const CategorySet& categories) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& l : layouts) {
    const int bins = kDefaultBins;
    json j;
    j["canvas"] = {{"w", l.canvas_width}, {"h", l.canvas_height}};
    j["elements"] = json::array();
    // Bin centers map back to the same bins under normalize_layout.
    auto px = [&](int b, double extent) { return (b + 0.5) / bins * extent; };
    for (const auto& e : l.elements) {
      j["elements"].push_back({{"category", categories.name(e.category)},
                               {"bbox",
                                {px(e.box.x, l.canvas_width), px(e.box.y, l.canvas_height),
                                 px(e.box.w, l.canvas_width), px(e.box.h, l.canvas_height)}}});
    }
    os << j.dump() << '\n';
  }
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  json j;
  j["name"] = m.name;
  j["categories"] = m.categories.names();
  j["background_labels"] = m.categories.background_labels();
  j["counts"] = {{"train", m.split_counts[0]}, {"val", m.split_counts[1]}, {"test", m.split_counts[2]}};
  j["fractions"] = m.split_fractions;
  j["source_path"] = m.source_path;
  j["filter"] = {{"max_elements", m.max_elements}};
  j["bins"] = m.bins;
  j["seed"] = m.seed;
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    const json j = json::parse(is);
    DatasetManifest m;
    m.name = j.value("name", "");
    m.categories = CategorySet(j.at("categories").get<std::vector<std::string>>(),
                               j.value("background_labels", std::vector<std::string>{}));
    m.split_counts = {j.at("counts").at("train").get<std::size_t>(), j.at("counts").at("val").get<std::size_t>(),
                      j.at("counts").at("test").get<std::size_t>()};
    m.split_fractions = j.at("fractions").get<std::array<double, 3>>();
    m.source_path = j.value("source_path", "");
    m.max_elements = j.at("filter").at("max_elements").get<int>();
    m.bins = j.value("bins", kDefaultBins);
    m.seed = j.value("seed", std::uint64_t{0});
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, "malformed manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace layoutseq
