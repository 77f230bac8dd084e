#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tgl/error.hpp"
#include "tgl/types.hpp"

namespace tgl {

namespace detail {

/// Positions [a, b] of the first pair of identical index tuples, if any.
inline std::optional<std::pair<std::size_t, std::size_t>> find_duplicate(
    std::span<const std::size_t> indices, std::size_t modes) {
  const std::size_t count = modes == 0 ? 0 : indices.size() / modes;
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto tuple = [&](std::size_t e) { return indices.subspan(e * modes, modes); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ta = tuple(a);
    auto tb = tuple(b);
    return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(), tb.end());
  });
  for (std::size_t p = 1; p < order.size(); ++p) {
    auto ta = tuple(order[p - 1]);
    auto tb = tuple(order[p]);
    if (std::equal(ta.begin(), ta.end(), tb.begin())) {
      return std::pair{std::min(order[p - 1], order[p]), std::max(order[p - 1], order[p])};
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Partially observed N-way tensor in coordinate format.
///
/// Entry e has index tuple indices[e*N .. e*N+N) and value values[e]. A
/// constructed tensor always satisfies: N >= 2, every mode size positive,
/// every index in range, no duplicate tuples, every value finite.
class SparseTensor {
 public:
  SparseTensor(std::vector<std::size_t> shape, std::vector<std::size_t> indices,
               std::vector<double> values)
      : shape_(std::move(shape)), indices_(std::move(indices)), values_(std::move(values)) {
    validate();
  }

  /// Tensor of the given shape with no observed entries.
  explicit SparseTensor(std::vector<std::size_t> shape)
      : SparseTensor(std::move(shape), {}, {}) {}

  std::size_t modes() const noexcept { return shape_.size(); }
  std::size_t nnz() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }

  std::span<const std::size_t> index(std::size_t e) const {
    return std::span<const std::size_t>(indices_).subspan(e * modes(), modes());
  }
  double value(std::size_t e) const { return values_[e]; }

  std::span<const std::size_t> indices() const noexcept { return indices_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Tensor of the same shape holding the entries at `positions`, in that order.
  SparseTensor subset(std::span<const std::size_t> positions) const {
    std::vector<std::size_t> idx;
    std::vector<double> val;
    idx.reserve(positions.size() * modes());
    val.reserve(positions.size());
    for (std::size_t p : positions) {
      auto t = index(p);
      idx.insert(idx.end(), t.begin(), t.end());
      val.push_back(values_[p]);
    }
    return SparseTensor(shape_, std::move(idx), std::move(val), Unchecked{});
  }

  /// Same shape and same set of (index, value) pairs, irrespective of order.
  bool same_entries(const SparseTensor& other) const {
    if (shape_ != other.shape_ || nnz() != other.nnz()) return false;
    auto a = canonical_order();
    auto b = other.canonical_order();
    for (std::size_t p = 0; p < a.size(); ++p) {
      auto ta = index(a[p]);
      auto tb = other.index(b[p]);
      if (!std::equal(ta.begin(), ta.end(), tb.begin())) return false;
      if (values_[a[p]] != other.values_[b[p]]) return false;
    }
    return true;
  }

  /// Entry positions sorted lexicographically by index tuple.
  std::vector<std::size_t> canonical_order() const {
    std::vector<std::size_t> order(nnz());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      auto ta = index(a);
      auto tb = index(b);
      return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(), tb.end());
    });
    return order;
  }

 private:
  struct Unchecked {};

  SparseTensor(std::vector<std::size_t> shape, std::vector<std::size_t> indices,
               std::vector<double> values, Unchecked)
      : shape_(std::move(shape)), indices_(std::move(indices)), values_(std::move(values)) {}

  void validate() const {
    if (shape_.size() < 2) throw InvalidArgument("tensor needs at least 2 modes");
    for (std::size_t n = 0; n < shape_.size(); ++n) {
      if (shape_[n] == 0) throw InvalidArgument("mode " + std::to_string(n) + " has size 0");
    }
    if (indices_.size() != values_.size() * modes()) {
      throw ShapeError("index buffer length does not match entry count times mode count");
    }
    for (std::size_t e = 0; e < nnz(); ++e) {
      if (!std::isfinite(values_[e])) {
        throw InvalidArgument("entry " + std::to_string(e) + " has a non-finite value");
      }
      auto t = index(e);
      for (std::size_t n = 0; n < modes(); ++n) {
        if (t[n] >= shape_[n]) {
          throw InvalidArgument("entry " + std::to_string(e) + " index " + std::to_string(t[n]) +
                                " out of range for mode " + std::to_string(n));
        }
      }
    }
    if (auto dup = detail::find_duplicate(indices_, modes())) {
      throw InvalidArgument("entries " + std::to_string(dup->first) + " and " +
                            std::to_string(dup->second) + " share an index");
    }
  }

  std::vector<std::size_t> shape_;
  std::vector<std::size_t> indices_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// COO text format
//
//   # shape: 5 6 7        optional, overrides max-index + 1
//   # anything else       comment
//   i_0 i_1 ... i_{N-1} value
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t p = 0;
  while (p < line.size()) {
    while (p < line.size() && (line[p] == ' ' || line[p] == '\t')) ++p;
    std::size_t q = p;
    while (q < line.size() && line[q] != ' ' && line[q] != '\t') ++q;
    if (q > p) out.push_back(line.substr(p, q - p));
    p = q;
  }
  return out;
}

inline std::optional<std::size_t> to_index(std::string_view tok) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

inline std::optional<double> to_real(std::string_view tok) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

/// Mode sizes from a `# shape:` comment, or nullopt if the comment is something else.
inline std::optional<std::vector<std::size_t>> shape_header(std::string_view comment,
                                                            std::size_t line_no) {
  comment.remove_prefix(1);  // '#'
  while (!comment.empty() && (comment.front() == ' ' || comment.front() == '\t')) {
    comment.remove_prefix(1);
  }
  constexpr std::string_view key = "shape:";
  if (comment.substr(0, key.size()) != key) return std::nullopt;
  comment.remove_prefix(key.size());
  std::vector<std::size_t> shape;
  for (auto tok : split_ws(comment)) {
    auto v = to_index(tok);
    if (!v || *v == 0) throw ParseError(line_no, "bad mode size '" + std::string(tok) + "'");
    shape.push_back(*v);
  }
  if (shape.size() < 2) throw ParseError(line_no, "shape header needs at least 2 mode sizes");
  return shape;
}

}  // namespace detail

/// Reads a COO tensor. `expected_modes`, when set, must equal the arity found.
inline SparseTensor parse_coo(std::istream& in,
                              std::optional<std::size_t> expected_modes = std::nullopt) {
  std::optional<std::vector<std::size_t>> declared;
  std::size_t shape_line = 0;
  std::size_t modes = 0;
  std::vector<std::size_t> indices;
  std::vector<double> values;
  std::vector<std::size_t> lines;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    line.remove_prefix(first);
    if (line.front() == '#') {
      if (auto s = detail::shape_header(line, line_no)) {
        if (declared) throw ParseError(line_no, "shape declared twice");
        if (!values.empty()) throw ParseError(line_no, "shape header after data lines");
        declared = std::move(s);
        shape_line = line_no;
        modes = declared->size();
      }
      continue;
    }
    auto toks = detail::split_ws(line);
    if (modes == 0) {
      if (toks.size() < 3) {
        throw ParseError(line_no, "expected at least 2 indices and a value, got " +
                                      std::to_string(toks.size()) + " fields");
      }
      modes = toks.size() - 1;
    }
    if (toks.size() != modes + 1) {
      throw ParseError(line_no, "expected " + std::to_string(modes + 1) + " fields, got " +
                                    std::to_string(toks.size()));
    }
    for (std::size_t n = 0; n < modes; ++n) {
      auto v = detail::to_index(toks[n]);
      if (!v) throw ParseError(line_no, "bad index '" + std::string(toks[n]) + "'");
      if (declared && *v >= (*declared)[n]) {
        throw ParseError(line_no, "index " + std::to_string(*v) + " exceeds declared size " +
                                      std::to_string((*declared)[n]) + " of mode " +
                                      std::to_string(n));
      }
      indices.push_back(*v);
    }
    auto val = detail::to_real(toks[modes]);
    if (!val) throw ParseError(line_no, "bad value '" + std::string(toks[modes]) + "'");
    if (!std::isfinite(*val)) throw ParseError(line_no, "non-finite value");
    values.push_back(*val);
    lines.push_back(line_no);
  }

  if (modes == 0) throw ParseError("no entries and no shape header");
  if (expected_modes && *expected_modes != modes) {
    throw ParseError(declared ? shape_line : (lines.empty() ? 0 : lines.front()),
                     "expected " + std::to_string(*expected_modes) + " modes, found " +
                         std::to_string(modes));
  }
  if (auto dup = detail::find_duplicate(indices, modes)) {
    throw ParseError(lines[dup->second],
                     "duplicate index (first seen on line " + std::to_string(lines[dup->first]) +
                         ")");
  }

  std::vector<std::size_t> shape;
  if (declared) {
    shape = std::move(*declared);
  } else {
    shape.assign(modes, 0);
    for (std::size_t e = 0; e < values.size(); ++e) {
      for (std::size_t n = 0; n < modes; ++n) {
        shape[n] = std::max(shape[n], indices[e * modes + n] + 1);
      }
    }
  }
  return SparseTensor(std::move(shape), std::move(indices), std::move(values));
}

inline SparseTensor parse_coo(std::string_view text,
                              std::optional<std::size_t> expected_modes = std::nullopt) {
  std::istringstream in{std::string(text)};
  return parse_coo(in, expected_modes);
}

inline SparseTensor read_coo_file(const std::string& path,
                                  std::optional<std::size_t> expected_modes = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_coo(in, expected_modes);
}

/// Writes the shape header followed by one line per entry. Values are
/// printed with round-trip precision.
inline void write_coo(std::ostream& out, const SparseTensor& tensor) {
  out << "# shape:";
  for (auto s : tensor.shape()) out << ' ' << s;
  out << '\n';
  char buf[32];
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    for (auto i : tensor.index(e)) out << i << ' ';
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), tensor.value(e));
    out.write(buf, ptr - buf);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Train / validation / test split
// ---------------------------------------------------------------------------

struct DatasetSplit {
  SparseTensor train;
  SparseTensor validation;
  SparseTensor test;
};

/// Part sizes for `count` entries: validation and test get
/// round(ratio_i / sum * count), training takes whatever remains.
inline std::array<std::size_t, 3> split_sizes(std::size_t count, const std::array<double, 3>& ratios) {
  double total = 0;
  for (double r : ratios) {
    if (!(r >= 0) || !std::isfinite(r)) throw InvalidArgument("split ratios must be finite and >= 0");
    total += r;
  }
  if (total <= 0) throw InvalidArgument("split ratios sum to zero");
  auto part = [&](double r) {
    return static_cast<std::size_t>(std::llround(r / total * static_cast<double>(count)));
  };
  std::size_t val = std::min(part(ratios[1]), count);
  std::size_t test = std::min(part(ratios[2]), count - val);
  return {count - val - test, val, test};
}

/// Seeded shuffle of the observed entries, partitioned by `ratios`
/// (train, validation, test). Each part keeps the source entry order.
inline DatasetSplit split_dataset(const SparseTensor& tensor, const std::array<double, 3>& ratios,
                                  std::uint64_t seed) {
  if (tensor.nnz() < 3) {
    throw InvalidArgument("split needs at least 3 entries, tensor has " +
                          std::to_string(tensor.nnz()));
  }
  const auto sizes = split_sizes(tensor.nnz(), ratios);

  std::vector<std::size_t> perm(tensor.nnz());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = make_rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  auto part = [&](std::size_t begin, std::size_t len) {
    std::vector<std::size_t> pos(perm.begin() + begin, perm.begin() + begin + len);
    std::sort(pos.begin(), pos.end());
    return tensor.subset(pos);
  };
  return DatasetSplit{part(0, sizes[0]), part(sizes[0], sizes[1]),
                      part(sizes[0] + sizes[1], sizes[2])};
}

}  // namespace tgl
