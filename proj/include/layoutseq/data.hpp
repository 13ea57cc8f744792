#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "layoutseq/training.hpp"
#include "layoutseq/vocab.hpp"

namespace layoutseq {

enum class DatasetSchema { Generic, RicoLike, PubLayNetLike };
std::optional<DatasetSchema> parse_schema(std::string_view name);
std::string_view to_string(DatasetSchema s);

enum class SynthStyle { Grid, Freeform };
std::optional<SynthStyle> parse_style(std::string_view name);
std::string_view to_string(SynthStyle s);

struct DatasetManifest {
  std::string name;
  CategorySet categories;
  std::array<std::size_t, 3> split_counts{};  // train, val, test
  std::array<double, 3> split_fractions{0.90, 0.05, 0.05};
  std::string source_path;
  int max_elements = kDefaultMaxElements;
  int bins = kDefaultBins;
  std::uint64_t seed = 0;
};

struct IngestResult {
  std::vector<Layout> layouts;
  CategorySet categories;
  std::size_t skipped = 0;
};

/// Reads a dataset and normalizes every record. Generic: JSON Lines of
/// {"canvas": {"w","h"}, "elements": [{"category", "bbox": [x,y,w,h]}]}.
/// RicoLike: JSON Lines (or a directory of .json files) of view
/// hierarchies with "bounds" [x1,y1,x2,y2], "componentLabel", "children".
/// PubLayNetLike: one COCO-style JSON with images/annotations/categories.
/// Records with no elements, more than `max_elements`, or malformed
/// fields are skipped and counted. Categories are sorted by name.
IngestResult ingest(const std::filesystem::path& path, DatasetSchema schema, int max_elements = kDefaultMaxElements,
                    int bins = kDefaultBins);

struct Splits {
  std::vector<Layout> train;
  std::vector<Layout> val;
  std::vector<Layout> test;
};

/// Seeded shuffle then contiguous partition; sizes are rounded for the
/// first two parts and the remainder goes to test.
Splits split(const std::vector<Layout>& layouts, std::array<double, 3> fractions, std::uint64_t seed);

/// Grid: aligned, non-overlapping rows of columns sharing left/right
/// edges. Freeform: independent random boxes.
std::vector<Layout> synthesize(int n, const CategorySet& categories, SynthStyle style, std::uint64_t seed,
                               int bins = kDefaultBins, int max_elements = kDefaultMaxElements);

/// A small built-in category set for synthetic data.
CategorySet default_synthetic_categories();

struct ExampleOptions {
  OrderPolicy output_order = OrderPolicy::Alphabetic;
  bool with_prefix = false;
  double relation_sample_rate = 0.1;
  std::size_t max_relationships = 64;
  double noise_std = 0.01;
  int completion_known = 1;
};

/// Builds the (input, target) pair for every layout. Inputs list elements
/// alphabetically; targets follow `output_order`.
std::vector<TrainingExample> build_examples(const std::vector<Layout>& layouts, Task task, const Vocabulary& vocab,
                                            const ExampleOptions& options, std::uint64_t seed);

/// The constraint a layout induces for `task` (the input half of an example).
ConstraintSpec constraint_for(const Layout& layout, Task task, const Vocabulary& vocab, const ExampleOptions& options,
                              Rng& rng);

/// Reads a canonical JSON Lines file against a known category set;
/// records naming other categories are skipped.
std::vector<Layout> read_dataset(const std::filesystem::path& path, const CategorySet& categories,
                                 int bins = kDefaultBins);

void write_dataset(const std::filesystem::path& path, const std::vector<Layout>& layouts, const CategorySet& categories);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace layoutseq
