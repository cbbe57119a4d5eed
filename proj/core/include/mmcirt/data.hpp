#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mmcirt {

/// Sentinel for an unanswered cell before recoding.
inline constexpr int kMissingCode = -1;

/// Answer key entry for one item. `options == 0` means "infer from data"
/// (largest observed code + 1).
struct ItemKey {
  std::string id;
  int correct = 0;
  int options = 0;
};

struct CsvSchema {
  std::vector<ItemKey> key;
  bool missing_as_category = false;
};

/// N x J matrix of categorical responses.
///
/// Each item j has `options(j)` answer options. When missing responses are
/// modelled, a trailing extra category (index `options(j)`) holds every
/// missing cell, so `categories(j) == options(j) + 1`; otherwise no
/// missing cells are accepted. Immutable after construction.
class ResponseMatrix {
 public:
  struct Item {
    std::string id;
    int options = 0;
    int correct = 0;
  };

  ResponseMatrix() = default;
  /// `codes` is row-major N x J. Raw `kMissingCode` cells are recoded to the
  /// missing category when `missing_as_category` is set and rejected otherwise.
  ResponseMatrix(std::vector<Item> items, std::vector<std::string> person_ids, std::vector<int> codes,
                 bool missing_as_category);

  std::size_t n_persons() const noexcept { return person_ids_.size(); }
  std::size_t n_items() const noexcept { return items_.size(); }
  bool missing_as_category() const noexcept { return missing_as_category_; }

  const Item& item(std::size_t j) const { return items_[j]; }
  const std::vector<Item>& items() const noexcept { return items_; }
  int options(std::size_t j) const { return items_[j].options; }
  int categories(std::size_t j) const { return items_[j].options + (missing_as_category_ ? 1 : 0); }
  int correct_option(std::size_t j) const { return items_[j].correct; }
  /// Index of the missing category for item j, or -1 when not modelled.
  int missing_category(std::size_t j) const { return missing_as_category_ ? items_[j].options : -1; }

  /// Start of item j's block in the concatenated one-hot layout.
  std::size_t category_offset(std::size_t j) const { return offsets_[j]; }
  std::size_t total_categories() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
  std::vector<int> category_counts() const;

  const std::string& person_id(std::size_t i) const { return person_ids_[i]; }
  int code(std::size_t i, std::size_t j) const { return codes_[i * items_.size() + j]; }
  std::span<const int> row(std::size_t i) const {
    return {codes_.data() + i * items_.size(), items_.size()};
  }
  std::span<const int> codes() const noexcept { return codes_; }

  ResponseMatrix select_rows(std::span<const std::size_t> rows) const;
  ResponseMatrix select_items(std::span<const std::size_t> items) const;

 private:
  std::vector<Item> items_;
  std::vector<std::string> person_ids_;
  std::vector<int> codes_;
  std::vector<std::size_t> offsets_;
  bool missing_as_category_ = false;
};

/// Reads an answer-key CSV with header `item,correct[,options]`.
std::vector<ItemKey> load_key(const std::filesystem::path& path);

/// Reads a response CSV. Header holds item IDs, optionally preceded by an
/// `id` column of person identifiers. Blank cells and -1 mean missing.
ResponseMatrix load_csv(const std::filesystem::path& path, const CsvSchema& schema);
ResponseMatrix parse_csv(std::string_view text, const CsvSchema& schema);

void write_csv(const ResponseMatrix& rm, const std::filesystem::path& path);
void write_key(const ResponseMatrix& rm, const std::filesystem::path& path);

/// Dense concatenation of per-item one-hot blocks, one row per person.
struct OneHotBatch {
  Eigen::MatrixXd values;
};

OneHotBatch one_hot(const ResponseMatrix& rm, std::span<const std::size_t> rows);
OneHotBatch one_hot(const ResponseMatrix& rm);
/// Inverse of one_hot: recovers the code of every item block (argmax).
std::vector<int> decode(const OneHotBatch& batch, const ResponseMatrix& layout);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::size_t fold_count = 5;
};

struct Partition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

Partition split_indices(std::size_t n, const SplitSpec& spec);
/// k partitions; `test` of fold f is the holdout. Fold sizes differ by at most
/// one, the first `n % k` folds being the larger ones.
std::vector<Partition> fold_indices(std::size_t n, const SplitSpec& spec);
/// `train` holds the sample, `test` the complement (the evaluation set).
Partition sample_indices(std::size_t n_total, std::size_t n, std::uint64_t seed);

std::pair<ResponseMatrix, ResponseMatrix> split(const ResponseMatrix& rm, const SplitSpec& spec);
std::vector<std::pair<ResponseMatrix, ResponseMatrix>> folds(const ResponseMatrix& rm, const SplitSpec& spec);
std::pair<ResponseMatrix, ResponseMatrix> sample_without_replacement(const ResponseMatrix& rm, std::size_t n,
                                                                     std::uint64_t seed);

}  // namespace mmcirt
