#include "mmcirt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "mmcirt/csv.hpp"
#include "mmcirt/error.hpp"

namespace mmcirt {

ResponseMatrix::ResponseMatrix(std::vector<Item> items, std::vector<std::string> person_ids,
                               std::vector<int> codes, bool missing_as_category)
    : items_(std::move(items)),
      person_ids_(std::move(person_ids)),
      codes_(std::move(codes)),
      missing_as_category_(missing_as_category) {
  const std::size_t n = person_ids_.size();
  const std::size_t j_count = items_.size();
  if (codes_.size() != n * j_count)
    fail_data("MALFORMED_ROW", "code matrix has " + std::to_string(codes_.size()) + " cells, expected " +
                                   std::to_string(n * j_count));
  offsets_.assign(j_count + 1, 0);
  for (std::size_t j = 0; j < j_count; ++j) {
    const auto& it = items_[j];
    if (it.options < 1) fail_data("INVALID_KEY", "item '" + it.id + "' has no response options");
    if (it.correct < 0 || it.correct >= it.options)
      fail_data("INVALID_KEY", "correct option " + std::to_string(it.correct) + " of item '" + it.id +
                                   "' outside [0, " + std::to_string(it.options - 1) + "]");
    offsets_[j + 1] = offsets_[j] + static_cast<std::size_t>(categories(j));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < j_count; ++j) {
      int& c = codes_[i * j_count + j];
      if (c == kMissingCode) {
        if (!missing_as_category_)
          fail_data("MISSING_NOT_ALLOWED", "missing response for person " + person_ids_[i] + ", item '" +
                                               items_[j].id + "' while missing responses are not modelled");
        c = items_[j].options;
      } else if (c < 0 || c >= categories(j)) {
        fail_data("OUT_OF_RANGE_CODE", "out-of-range code " + std::to_string(c) + " for item '" + items_[j].id +
                                           "' (categories: " + std::to_string(categories(j)) + ")");
      }
    }
  }
}

std::vector<int> ResponseMatrix::category_counts() const {
  std::vector<int> out(items_.size());
  for (std::size_t j = 0; j < items_.size(); ++j) out[j] = categories(j);
  return out;
}

ResponseMatrix ResponseMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::string> ids;
  std::vector<int> codes;
  ids.reserve(rows.size());
  codes.reserve(rows.size() * items_.size());
  for (auto r : rows) {
    if (r >= n_persons()) throw std::out_of_range("row index out of range");
    ids.push_back(person_ids_[r]);
    const auto src = row(r);
    codes.insert(codes.end(), src.begin(), src.end());
  }
  return ResponseMatrix(items_, std::move(ids), std::move(codes), missing_as_category_);
}

ResponseMatrix ResponseMatrix::select_items(std::span<const std::size_t> items) const {
  std::vector<Item> chosen;
  for (auto j : items) {
    if (j >= n_items()) throw std::out_of_range("item index out of range");
    chosen.push_back(items_[j]);
  }
  std::vector<int> codes;
  codes.reserve(n_persons() * items.size());
  for (std::size_t i = 0; i < n_persons(); ++i)
    for (auto j : items) codes.push_back(code(i, j));
  return ResponseMatrix(std::move(chosen), person_ids_, std::move(codes), missing_as_category_);
}

namespace {

bool parse_int(const std::string& s, int& out) {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

bool is_person_column(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  return name == "id" || name == "person" || name == "person_id";
}

}  // namespace

std::vector<ItemKey> load_key(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto& h = table.header;
  if (h.size() < 2 || h[0] != "item" || h[1] != "correct" || (h.size() > 2 && h[2] != "options"))
    fail_data("INVALID_KEY", "answer key header must be 'item,correct[,options]'");
  std::vector<ItemKey> key;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != h.size())
      fail_data("MALFORMED_ROW", "answer key line " + std::to_string(table.line_numbers[r]) + " has " +
                                     std::to_string(row.size()) + " cells, expected " + std::to_string(h.size()));
    ItemKey k;
    k.id = row[0];
    if (!parse_int(row[1], k.correct) || k.correct < 0)
      fail_data("INVALID_KEY", "bad correct option '" + row[1] + "' for item '" + k.id + "'");
    if (h.size() > 2 && !row[2].empty() && (!parse_int(row[2], k.options) || k.options < 1))
      fail_data("INVALID_KEY", "bad option count '" + row[2] + "' for item '" + k.id + "'");
    key.push_back(std::move(k));
  }
  return key;
}

ResponseMatrix parse_csv(std::string_view text, const CsvSchema& schema) {
  const auto table = csv::parse(text);
  const bool has_ids = !table.header.empty() && is_person_column(table.header.front());
  const std::size_t first_item = has_ids ? 1 : 0;
  const std::size_t j_count = table.header.size() - first_item;
  if (j_count == 0) fail_data("MALFORMED_ROW", "response file has no item columns");

  std::map<std::string, const ItemKey*> key_by_id;
  for (const auto& k : schema.key) key_by_id[k.id] = &k;
  std::map<std::string, bool> seen;
  for (std::size_t c = first_item; c < table.header.size(); ++c) {
    const auto& id = table.header[c];
    if (seen[id]) fail_data("DUPLICATE_ITEM", "item '" + id + "' appears twice in the header");
    seen[id] = true;
    if (!key_by_id.contains(id)) fail_data("UNKNOWN_ITEM", "item '" + id + "' has no answer-key entry");
  }
  for (const auto& k : schema.key)
    if (!seen.contains(k.id)) fail_data("UNKNOWN_ITEM", "unknown item in key: '" + k.id + "'");

  std::vector<std::string> person_ids;
  std::vector<int> codes;
  codes.reserve(table.rows.size() * j_count);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size())
      fail_data("MALFORMED_ROW", "malformed row length at line " + std::to_string(table.line_numbers[r]) + ": " +
                                     std::to_string(row.size()) + " cells, expected " +
                                     std::to_string(table.header.size()));
    person_ids.push_back(has_ids ? row[0] : std::to_string(r + 1));
    for (std::size_t c = first_item; c < row.size(); ++c) {
      int v = kMissingCode;
      if (!row[c].empty() && (!parse_int(row[c], v) || v < kMissingCode))
        fail_data("MALFORMED_CELL", "cannot parse '" + row[c] + "' at line " +
                                        std::to_string(table.line_numbers[r]));
      codes.push_back(v);
    }
  }

  std::vector<ResponseMatrix::Item> items;
  for (std::size_t j = 0; j < j_count; ++j) {
    const auto& k = *key_by_id.at(table.header[first_item + j]);
    int options = k.options;
    if (options == 0) {
      int max_code = std::max(1, k.correct);
      for (std::size_t i = 0; i < person_ids.size(); ++i) max_code = std::max(max_code, codes[i * j_count + j]);
      options = max_code + 1;
    }
    items.push_back({k.id, options, k.correct});
  }
  return ResponseMatrix(std::move(items), std::move(person_ids), std::move(codes), schema.missing_as_category);
}

ResponseMatrix load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("IO_ERROR", "cannot open '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_csv(text, schema);
}

void write_csv(const ResponseMatrix& rm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  std::vector<std::string> cells{"id"};
  for (const auto& it : rm.items()) cells.push_back(it.id);
  csv::write_row(out, cells);
  for (std::size_t i = 0; i < rm.n_persons(); ++i) {
    cells.assign(1, rm.person_id(i));
    for (std::size_t j = 0; j < rm.n_items(); ++j) {
      const int c = rm.code(i, j);
      cells.push_back(c == rm.missing_category(j) ? std::string() : std::to_string(c));
    }
    csv::write_row(out, cells);
  }
}

void write_key(const ResponseMatrix& rm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("IO_ERROR", "cannot write '" + path.string() + "'");
  csv::write_row(out, {"item", "correct", "options"});
  for (const auto& it : rm.items()) csv::write_row(out, {it.id, std::to_string(it.correct), std::to_string(it.options)});
}

OneHotBatch one_hot(const ResponseMatrix& rm, std::span<const std::size_t> rows) {
  OneHotBatch batch;
  batch.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                       static_cast<Eigen::Index>(rm.total_categories()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= rm.n_persons()) throw std::out_of_range("one_hot: row index out of range");
    for (std::size_t j = 0; j < rm.n_items(); ++j)
      batch.values(static_cast<Eigen::Index>(r),
                   static_cast<Eigen::Index>(rm.category_offset(j) + static_cast<std::size_t>(rm.code(rows[r], j)))) = 1.0;
  }
  return batch;
}

OneHotBatch one_hot(const ResponseMatrix& rm) {
  std::vector<std::size_t> rows(rm.n_persons());
  std::iota(rows.begin(), rows.end(), 0);
  return one_hot(rm, rows);
}

std::vector<int> decode(const OneHotBatch& batch, const ResponseMatrix& layout) {
  std::vector<int> codes;
  codes.reserve(static_cast<std::size_t>(batch.values.rows()) * layout.n_items());
  for (Eigen::Index r = 0; r < batch.values.rows(); ++r) {
    for (std::size_t j = 0; j < layout.n_items(); ++j) {
      Eigen::Index best = 0;
      batch.values.row(r)
          .segment(static_cast<Eigen::Index>(layout.category_offset(j)), layout.categories(j))
          .maxCoeff(&best);
      codes.push_back(static_cast<int>(best));
    }
  }
  return codes;
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

Partition split_indices(std::size_t n, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    fail_config("train_fraction must lie strictly between 0 and 1");
  if (n < 2) fail_data("TOO_FEW_PERSONS", "need at least 2 persons to split, have " + std::to_string(n));
  auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  const auto perm = permutation(n, spec.seed);
  Partition p;
  p.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  p.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(p.train.begin(), p.train.end());
  std::sort(p.test.begin(), p.test.end());
  return p;
}

std::vector<Partition> fold_indices(std::size_t n, const SplitSpec& spec) {
  const std::size_t k = spec.fold_count;
  if (k < 2) fail_config("fold_count must be at least 2");
  if (n < k)
    fail_data("TOO_FEW_PERSONS", "need at least " + std::to_string(k) + " persons for " + std::to_string(k) +
                                     " folds, have " + std::to_string(n));
  const auto perm = permutation(n, spec.seed);
  std::vector<Partition> out(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    out[f].test.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                       perm.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::sort(out[f].test.begin(), out[f].test.end());
    start += size;
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) out[f].train.insert(out[f].train.end(), out[g].test.begin(), out[g].test.end());
    std::sort(out[f].train.begin(), out[f].train.end());
  }
  return out;
}

Partition sample_indices(std::size_t n_total, std::size_t n, std::uint64_t seed) {
  if (n > n_total)
    fail_data("TOO_FEW_PERSONS", "cannot sample " + std::to_string(n) + " of " + std::to_string(n_total) + " persons");
  const auto perm = permutation(n_total, seed);
  Partition p;
  p.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
  p.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n), perm.end());
  std::sort(p.train.begin(), p.train.end());
  std::sort(p.test.begin(), p.test.end());
  return p;
}

std::pair<ResponseMatrix, ResponseMatrix> split(const ResponseMatrix& rm, const SplitSpec& spec) {
  const auto p = split_indices(rm.n_persons(), spec);
  return {rm.select_rows(p.train), rm.select_rows(p.test)};
}

std::vector<std::pair<ResponseMatrix, ResponseMatrix>> folds(const ResponseMatrix& rm, const SplitSpec& spec) {
  std::vector<std::pair<ResponseMatrix, ResponseMatrix>> out;
  for (const auto& p : fold_indices(rm.n_persons(), spec))
    out.emplace_back(rm.select_rows(p.train), rm.select_rows(p.test));
  return out;
}

std::pair<ResponseMatrix, ResponseMatrix> sample_without_replacement(const ResponseMatrix& rm, std::size_t n,
                                                                     std::uint64_t seed) {
  const auto p = sample_indices(rm.n_persons(), n, seed);
  return {rm.select_rows(p.train), rm.select_rows(p.test)};
}

}  // namespace mmcirt
