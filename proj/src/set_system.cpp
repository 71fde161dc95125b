#include "maxcover/set_system.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include "maxcover/errors.hpp"
#include "maxcover/random.hpp"

namespace maxcover {

SetSystem::SetSystem(std::int64_t n, std::int64_t k, std::vector<std::vector<ElementId>> sets)
    : n_(n), k_(k), sets_(std::move(sets)) {
  if (n_ < 0) throw ValidationError("n must be non-negative");
  if (sets_.empty()) throw ValidationError("instance needs at least one set");
  if (k_ < 1 || k_ > m()) {
    throw ValidationError("k must satisfy 1 <= k <= m (k=" + std::to_string(k_) +
                          ", m=" + std::to_string(m()) + ")");
  }
  for (std::size_t j = 0; j < sets_.size(); ++j) {
    const auto& s = sets_[j];
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (s[t] < 1 || s[t] > n_) {
        throw ValidationError("set " + std::to_string(j + 1) + " has element " +
                              std::to_string(s[t]) + " outside [1, " + std::to_string(n_) + "]");
      }
      if (t > 0 && s[t] <= s[t - 1]) {
        throw ValidationError("set " + std::to_string(j + 1) + " is not strictly increasing");
      }
    }
  }
}

std::int64_t SetSystem::total_size() const {
  std::int64_t total = 0;
  for (const auto& s : sets_) total += static_cast<std::int64_t>(s.size());
  return total;
}

std::int64_t SetSystem::max_set_size() const {
  std::int64_t best = 0;
  for (const auto& s : sets_) best = std::max<std::int64_t>(best, s.size());
  return best;
}

Selection Selection::from(std::vector<SetIndex> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  return Selection{std::move(indices)};
}

namespace {

// Splits a line into non-negative decimal integers. Returns false on any
// token that is not a plain digit string.
bool parse_integers(std::string_view line, std::vector<std::int64_t>& out) {
  out.clear();
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    std::string_view token = line.substr(pos, end - pos);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token[0] == '-' ||
        token[0] == '+') {
      return false;
    }
    out.push_back(value);
    pos = end;
  }
  return true;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

SetSystem load_instance(std::istream& in) {
  std::string line;
  std::vector<std::int64_t> numbers;
  if (!std::getline(in, line)) throw ParseError(1, "missing header \"n m k\"");
  strip_cr(line);
  if (!parse_integers(line, numbers) || numbers.size() != 3) {
    throw ParseError(1, "malformed header, expected \"n m k\"");
  }
  const std::int64_t n = numbers[0];
  const std::int64_t m = numbers[1];
  const std::int64_t k = numbers[2];
  if (n < 1) throw ParseError(1, "n must be at least 1");
  if (m < 1) throw ParseError(1, "m must be at least 1");
  if (k < 1) throw ParseError(1, "k must be at least 1");
  if (k > m) throw ParseError(1, "k exceeds m");
  if (m > n) throw ParseError(1, "m exceeds n");
  if (n > std::numeric_limits<ElementId>::max()) throw ParseError(1, "n too large");

  std::vector<std::vector<ElementId>> sets;
  sets.reserve(static_cast<std::size_t>(m));
  int line_no = 1;
  for (std::int64_t j = 0; j < m; ++j) {
    ++line_no;
    if (!std::getline(in, line)) {
      throw ParseError(line_no, "expected " + std::to_string(m) + " set lines, found " +
                                    std::to_string(j));
    }
    strip_cr(line);
    if (!parse_integers(line, numbers)) throw ParseError(line_no, "malformed element list");
    std::vector<ElementId> set;
    set.reserve(numbers.size());
    for (std::int64_t e : numbers) {
      if (e < 1 || e > n) {
        throw ParseError(line_no, "element id " + std::to_string(e) + " out of range [1, " +
                                      std::to_string(n) + "]");
      }
      set.push_back(static_cast<ElementId>(e));
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    sets.push_back(std::move(set));
  }
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.find_first_not_of(" \t") != std::string::npos) {
      throw ParseError(line_no, "unexpected content after the last set");
    }
  }
  return SetSystem(n, k, std::move(sets));
}

SetSystem load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path);
  return load_instance(in);
}

SetSystem parse_instance(const std::string& text) {
  std::istringstream in(text);
  return load_instance(in);
}

void write_instance(std::ostream& out, const SetSystem& sys) {
  out << sys.n() << ' ' << sys.m() << ' ' << sys.k() << '\n';
  for (const auto& s : sys.sets()) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (t > 0) out << ' ';
      out << s[t];
    }
    out << '\n';
  }
}

std::string format_instance(const SetSystem& sys) {
  std::ostringstream out;
  write_instance(out, sys);
  return out.str();
}

FrequencyVector frequency(const SetSystem& sys) {
  FrequencyVector f(static_cast<std::size_t>(sys.n()), 0);
  for (const auto& s : sys.sets()) {
    for (ElementId e : s) ++f[e - 1];
  }
  return f;
}

std::int64_t coverage(const SetSystem& sys, std::span<const SetIndex> indices) {
  std::vector<char> covered(static_cast<std::size_t>(sys.n()), 0);
  std::int64_t count = 0;
  for (SetIndex j : indices) {
    if (j < 1 || j > sys.m()) throw ValidationError("set index " + std::to_string(j) + " out of range");
    for (ElementId e : sys.set(j)) {
      if (!covered[e - 1]) {
        covered[e - 1] = 1;
        ++count;
      }
    }
  }
  return count;
}

NormalizedInstance normalize_covered(const SetSystem& sys) {
  const FrequencyVector f = frequency(sys);
  std::vector<ElementId> remap(f.size(), 0);
  std::vector<ElementId> original;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] > 0) {
      original.push_back(static_cast<ElementId>(i + 1));
      remap[i] = static_cast<ElementId>(original.size());
    }
  }
  const bool identity = original.size() == f.size();
  std::vector<std::vector<ElementId>> sets;
  sets.reserve(sys.sets().size());
  for (const auto& s : sys.sets()) {
    std::vector<ElementId> renamed;
    renamed.reserve(s.size());
    for (ElementId e : s) renamed.push_back(remap[e - 1]);
    sets.push_back(std::move(renamed));
  }
  return NormalizedInstance{SetSystem(static_cast<std::int64_t>(original.size()), sys.k(),
                                      std::move(sets)),
                            std::move(original), identity};
}

SetSystem generate_random(const GeneratorParams& params) {
  const auto [n, m, k] = std::tuple{params.n, params.m, params.k};
  if (n < 1 || m < 1) throw ValidationError("generator needs n >= 1 and m >= 1");
  if (m > n) throw ValidationError("generator needs m <= n");
  if (k < 1 || k > m) throw ValidationError("generator needs 1 <= k <= m");
  if (params.density.has_value() == params.set_size.has_value()) {
    throw ValidationError("generator needs exactly one of density or set_size");
  }
  if (params.density && !(*params.density >= 0.0 && *params.density <= 1.0)) {
    throw ValidationError("density must lie in [0, 1]");
  }
  if (params.set_size && (*params.set_size < 0 || *params.set_size > n)) {
    throw ValidationError("set_size must lie in [0, n]");
  }

  Rng rng(params.seed);
  std::vector<std::vector<ElementId>> sets(static_cast<std::size_t>(m));
  std::vector<ElementId> pool(static_cast<std::size_t>(n));
  for (auto& s : sets) {
    if (params.density) {
      for (std::int64_t e = 1; e <= n; ++e) {
        if (bernoulli(rng, *params.density)) s.push_back(static_cast<ElementId>(e));
      }
    } else {
      // Partial Fisher-Yates over a fresh identity pool.
      std::iota(pool.begin(), pool.end(), 1);
      const std::int64_t size = *params.set_size;
      for (std::int64_t t = 0; t < size; ++t) {
        const auto pick = t + static_cast<std::int64_t>(uniform_below(rng, n - t));
        std::swap(pool[t], pool[pick]);
      }
      s.assign(pool.begin(), pool.begin() + size);
      std::sort(s.begin(), s.end());
    }
  }
  return SetSystem(n, k, std::move(sets));
}

}  // namespace maxcover
