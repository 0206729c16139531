#ifndef CTSMC_ALPHABET_HPP
#define CTSMC_ALPHABET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ctsmc/common.hpp"

namespace ctsmc {

class Alphabet {
 public:
  Alphabet() = default;

  explicit Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
    if (symbols_.size() < 2) throw ValidationError("alphabet must have at least 2 symbols");
    for (auto& slot : index_) slot = -1;
    for (size_t i = 0; i < symbols_.size(); ++i) {
      auto c = static_cast<unsigned char>(symbols_[i]);
      if (index_[c] >= 0) throw ValidationError(std::string("duplicate alphabet symbol '") + symbols_[i] + "'");
      index_[c] = static_cast<int>(i);
    }
  }

  int size() const { return static_cast<int>(symbols_.size()); }
  int q() const { return size() - 1; }
  char symbol(int i) const { return symbols_[static_cast<size_t>(i)]; }
  const std::string& symbols() const { return symbols_; }

  int index(char c) const {
    int i = index_[static_cast<unsigned char>(c)];
    if (i < 0) throw ValidationError(std::string("symbol '") + c + "' not in alphabet " + symbols_);
    return i;
  }

  bool contains(char c) const { return index_[static_cast<unsigned char>(c)] >= 0; }

  bool operator==(const Alphabet& o) const { return symbols_ == o.symbols_; }

  static Alphabet dna() { return Alphabet("ACGT"); }

 private:
  std::string symbols_;
  int index_[256] = {};
};

// A sequence of alphabet indices; endpoints of the CTMC.
struct Sequence {
  std::vector<uint8_t> sym;

  Sequence() = default;
  explicit Sequence(std::vector<uint8_t> s) : sym(std::move(s)) {}

  int size() const { return static_cast<int>(sym.size()); }
  uint8_t operator[](int i) const { return sym[static_cast<size_t>(i)]; }

  bool operator==(const Sequence& o) const { return sym == o.sym; }
};

inline Sequence parse_sequence(const std::string& text, const Alphabet& alphabet) {
  Sequence s;
  s.sym.reserve(text.size());
  for (char c : text) {
    if (c == '\n' || c == '\r' || c == ' ' || c == '\t') continue;
    s.sym.push_back(static_cast<uint8_t>(alphabet.index(c)));
  }
  if (s.sym.empty()) throw ValidationError("empty sequence");
  return s;
}

inline std::string format_sequence(const Sequence& s, const Alphabet& alphabet) {
  std::string out;
  out.reserve(s.sym.size());
  for (uint8_t b : s.sym) out.push_back(alphabet.symbol(b));
  return out;
}

inline int hamming_distance(const Sequence& x, const Sequence& y) {
  if (x.size() != y.size()) throw ValidationError("sequences differ in length");
  int r = 0;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) ++r;
  return r;
}

// S = { i : x_i != y_i }, 0-based.
inline std::vector<int> mutated_sites(const Sequence& x, const Sequence& y) {
  if (x.size() != y.size()) throw ValidationError("sequences differ in length");
  std::vector<int> s;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) s.push_back(i);
  return s;
}

}  // namespace ctsmc

#endif
