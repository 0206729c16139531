#include "ctsmc/model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ctsmc/toml.hpp"

namespace ctsmc {

std::string ContextModel::context_key(const uint8_t* state, int n, int i) const {
  std::string key;
  if (variant == ContextVariant::neighborhood) {
    int h = k / 2;
    key.reserve(static_cast<size_t>(k) + 1);
    for (int j = i - h; j <= i + h; ++j)
      key.push_back(j >= 0 && j < n ? alphabet.symbol(state[j]) : '.');
  } else {
    for (int j : explicit_context[static_cast<size_t>(i)]) {
      if (j < 0 || j >= n) throw ValidationError("explicit context site out of range");
      key.push_back(alphabet.symbol(state[j]));
    }
  }
  return key;
}

double ContextModel::table_phi(const uint8_t* state, int n, int i, uint8_t b) const {
  std::string key = context_key(state, n, i);
  // Target-specific entry wins over the context-only entry.
  auto it = table.find(key + ':' + alphabet.symbol(b));
  if (it != table.end()) return it->second;
  it = table.find(key);
  if (it != table.end()) return it->second;
  throw ValidationError("multiplier table has no entry for context '" + key + "'");
}

void ContextModel::finalize_extrema() {
  gamma_min = kInf;
  gamma_max = 0.0;
  row_exit_.clear();
  for (const auto& m : base) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(a());
    for (int from = 0; from < a(); ++from) {
      for (int to = 0; to < a(); ++to) {
        if (from == to) continue;
        double g = m(from, to);
        row[from] += g;
        gamma_min = std::min(gamma_min, g);
        gamma_max = std::max(gamma_max, g);
      }
    }
    row_exit_.push_back(std::move(row));
  }
  switch (mult) {
    case MultiplierKind::none:
      phi_min = phi_max = 1.0;
      break;
    case MultiplierKind::cpg: {
      // The indicator table formally spans exponents {0, 1, 2}.
      double l2 = lambda * lambda;
      phi_min = std::min(1.0, l2);
      phi_max = std::max(1.0, l2);
      break;
    }
    case MultiplierKind::table: {
      phi_min = kInf;
      phi_max = 0.0;
      for (const auto& [key, v] : table) {
        phi_min = std::min(phi_min, v);
        phi_max = std::max(phi_max, v);
      }
      break;
    }
  }
}

Context context_of(const ContextModel& model, const Sequence& x, int i) {
  model.check_length(x.size());
  if (i < 0 || i >= x.size()) throw ValidationError("site index out of range");
  Context ctx;
  ctx.sites = model.context_sites(i, x.size());
  ctx.symbols.reserve(ctx.sites.size());
  for (int j : ctx.sites) ctx.symbols.push_back(x[j]);
  return ctx;
}

namespace {

Eigen::MatrixXd parse_matrix(const toml::Array& rows, int a, const char* what) {
  if (static_cast<int>(rows.size()) != a)
    throw ValidationError(std::string(what) + ": expected " + std::to_string(a) + " rows");
  Eigen::MatrixXd m(a, a);
  for (int r = 0; r < a; ++r) {
    const auto& row = rows[static_cast<size_t>(r)].as_array();
    if (static_cast<int>(row.size()) != a)
      throw ValidationError(std::string(what) + ": row " + std::to_string(r + 1) + " has wrong length");
    for (int c = 0; c < a; ++c) m(r, c) = row[static_cast<size_t>(c)].as_number();
  }
  for (int r = 0; r < a; ++r)
    for (int c = 0; c < a; ++c)
      if (r != c && !(m(r, c) > 0.0))
        throw ValidationError(std::string(what) + ": rate (" + std::to_string(r + 1) + "," +
                              std::to_string(c + 1) + ") must be strictly positive");
  return m;
}

// Every context key a neighborhood site can produce, for table validation.
// Tuples truncated on both sides at once (n <= k) are left to lazy checks.
void validate_table_keys(const ContextModel& m) {
  int klen = m.k + 1;
  if (klen > 8) return;  // 4^9+ keys; validated lazily at evaluation instead
  auto resolvable = [&](const std::string& key) {
    if (m.table.count(key)) return true;
    for (int b = 0; b < m.a(); ++b)
      if (!m.table.count(key + ':' + m.alphabet.symbol(b))) return false;
    return true;
  };
  std::vector<std::string> pending;
  auto expand = [&](int lead_dots, int trail_dots) {
    int free_slots = klen - lead_dots - trail_dots;
    std::string key(static_cast<size_t>(klen), '.');
    std::vector<int> digits(static_cast<size_t>(free_slots), 0);
    while (true) {
      for (int j = 0; j < free_slots; ++j)
        key[static_cast<size_t>(lead_dots + j)] = m.alphabet.symbol(digits[static_cast<size_t>(j)]);
      if (!resolvable(key)) pending.push_back(key);
      int pos = free_slots - 1;
      while (pos >= 0 && ++digits[static_cast<size_t>(pos)] == m.a()) digits[static_cast<size_t>(pos--)] = 0;
      if (pos < 0) break;
    }
  };
  expand(0, 0);
  for (int t = 1; t <= m.k / 2; ++t) {
    expand(t, 0);
    expand(0, t);
  }
  if (!pending.empty())
    throw ValidationError("multiplier table is missing " + std::to_string(pending.size()) +
                          " context keys, first: '" + pending.front() + "'");
}

}  // namespace

ContextModel parse_model(const std::string& text) {
  auto doc = toml::parse(text);
  ContextModel m;

  const auto& alpha = doc.section("alphabet");
  if (alpha.at("symbols").is_string()) {
    m.alphabet = Alphabet(alpha.at("symbols").as_string());
  } else {
    std::string syms;
    for (const auto& v : alpha.at("symbols").as_array()) {
      const auto& s = v.as_string();
      if (s.size() != 1) throw ValidationError("alphabet symbols must be single characters");
      syms.push_back(s[0]);
    }
    m.alphabet = Alphabet(syms);
  }
  int a = m.alphabet.size();

  const auto& rates = doc.section("base_rates");
  if (rates.has("matrix") && rates.has("per_site"))
    throw ValidationError("base_rates: give either 'matrix' or 'per_site', not both");
  if (rates.has("matrix")) {
    m.base.push_back(parse_matrix(rates.at("matrix").as_array(), a, "base_rates.matrix"));
    m.per_site_rates = false;
  } else if (rates.has("per_site")) {
    const auto& sites = rates.at("per_site").as_array();
    if (sites.empty()) throw ValidationError("base_rates.per_site is empty");
    for (size_t i = 0; i < sites.size(); ++i)
      m.base.push_back(parse_matrix(sites[i].as_array(), a, "base_rates.per_site"));
    m.per_site_rates = true;
    m.n_fixed = static_cast<int>(sites.size());
  } else {
    throw ValidationError("base_rates: need 'matrix' or 'per_site'");
  }

  if (doc.has_section("context")) {
    const auto& ctx = doc.section("context");
    const std::string& variant = ctx.at("variant").as_string();
    if (variant == "neighborhood") {
      m.variant = ContextVariant::neighborhood;
      double kd = ctx.at("k").as_number();
      m.k = static_cast<int>(kd);
      if (m.k != kd || m.k < 0 || m.k % 2 != 0)
        throw ValidationError("context.k must be a nonnegative even integer");
    } else if (variant == "explicit") {
      m.variant = ContextVariant::explicit_sets;
      const auto& lists = ctx.at("sites").as_array();
      if (lists.empty()) throw ValidationError("context.sites is empty");
      int n = static_cast<int>(lists.size());
      if (m.n_fixed > 0 && n != m.n_fixed)
        throw ValidationError("context.sites length disagrees with per-site rate count");
      m.n_fixed = n;
      for (int i = 0; i < n; ++i) {
        std::set<int> sites;
        sites.insert(i);
        for (const auto& v : lists[static_cast<size_t>(i)].as_array()) {
          double sd = v.as_number();
          int s = static_cast<int>(sd) - 1;  // file uses 1-based indices
          if (s != sd - 1 || s < 0 || s >= n)
            throw ValidationError("context.sites[" + std::to_string(i + 1) + "] has an out-of-range site");
          sites.insert(s);
        }
        m.explicit_context.emplace_back(sites.begin(), sites.end());
        m.k = std::max(m.k, static_cast<int>(sites.size()) - 1);
      }
    } else {
      throw ValidationError("context.variant must be 'neighborhood' or 'explicit'");
    }
  }

  if (doc.has_section("multiplier")) {
    const auto& mult = doc.section("multiplier");
    const std::string& kind = mult.at("kind").as_string();
    if (kind == "cpg") {
      m.mult = MultiplierKind::cpg;
      m.lambda = mult.at("lambda").as_number();
      if (!(m.lambda > 0.0)) throw ValidationError("multiplier.lambda must be strictly positive");
      if (!m.alphabet.contains('C') || !m.alphabet.contains('G'))
        throw ValidationError("cpg multiplier needs alphabet symbols C and G");
      m.cpg_c = m.alphabet.index('C');
      m.cpg_g = m.alphabet.index('G');
      if (m.variant == ContextVariant::explicit_sets)
        throw ValidationError("cpg multiplier requires the neighborhood variant");
      if (m.k == 0) m.k = 2;
      if (m.k != 2) throw ValidationError("cpg multiplier requires k = 2");
    } else if (kind == "table") {
      m.mult = MultiplierKind::table;
      if (!doc.has_section("multiplier.entries"))
        throw ValidationError("multiplier kind 'table' needs a [multiplier.entries] section");
      for (const auto& [key, v] : doc.section("multiplier.entries").values) {
        double val = v.as_number();
        if (!(val > 0.0)) throw ValidationError("multiplier entry '" + key + "' must be strictly positive");
        m.table.emplace(key, val);
      }
      if (m.table.empty()) throw ValidationError("multiplier table is empty");
      if (m.variant == ContextVariant::neighborhood) validate_table_keys(m);
    } else {
      throw ValidationError("multiplier.kind must be 'cpg' or 'table'");
    }
  } else {
    m.mult = MultiplierKind::none;
    if (m.variant == ContextVariant::neighborhood) m.k = 0;  // ISM regardless of declared k
  }

  m.finalize_extrema();
  return m;
}

ContextModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

namespace {

void emit_matrix(std::ostringstream& out, const Eigen::MatrixXd& m) {
  out << "[";
  for (int r = 0; r < m.rows(); ++r) {
    out << (r ? ", [" : "[");
    for (int c = 0; c < m.cols(); ++c) {
      if (c) out << ", ";
      out << m(r, c);
    }
    out << "]";
  }
  out << "]";
}

}  // namespace

std::string save_model(const ContextModel& m) {
  std::ostringstream out;
  out.precision(17);
  out << "[alphabet]\nsymbols = \"" << m.alphabet.symbols() << "\"\n\n";
  out << "[base_rates]\n";
  if (m.per_site_rates) {
    out << "per_site = [";
    for (size_t i = 0; i < m.base.size(); ++i) {
      if (i) out << ", ";
      emit_matrix(out, m.base[i]);
    }
    out << "]\n\n";
  } else {
    out << "matrix = ";
    emit_matrix(out, m.base.front());
    out << "\n\n";
  }
  out << "[context]\n";
  if (m.variant == ContextVariant::neighborhood) {
    out << "variant = \"neighborhood\"\nk = " << m.k << "\n\n";
  } else {
    out << "variant = \"explicit\"\nsites = [";
    for (size_t i = 0; i < m.explicit_context.size(); ++i) {
      if (i) out << ", ";
      out << "[";
      for (size_t j = 0; j < m.explicit_context[i].size(); ++j) {
        if (j) out << ", ";
        out << m.explicit_context[i][j] + 1;
      }
      out << "]";
    }
    out << "]\n\n";
  }
  if (m.mult == MultiplierKind::cpg) {
    out << "[multiplier]\nkind = \"cpg\"\nlambda = " << m.lambda << "\n";
  } else if (m.mult == MultiplierKind::table) {
    out << "[multiplier]\nkind = \"table\"\n\n[multiplier.entries]\n";
    std::vector<std::string> keys;
    keys.reserve(m.table.size());
    for (const auto& [key, v] : m.table) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    for (const auto& key : keys)
      out << "\"" << key << "\" = " << m.table.at(key) << "\n";
  }
  return out.str();
}

}  // namespace ctsmc
