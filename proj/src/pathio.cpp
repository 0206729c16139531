#include "ctsmc/pathio.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ctsmc {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
  (void)ec;
}

}  // namespace

void dump_paths(std::ostream& out, const std::vector<Path>& paths, const Alphabet& alphabet) {
  out << "# ctsmc-paths v1\n";
  if (!paths.empty()) {
    std::string header = "# n=" + std::to_string(paths.front().n()) + " T=";
    append_double(header, paths.front().horizon);
    header += " x0=" + format_sequence(paths.front().x0, alphabet);
    out << header << "\n";
  }
  for (size_t i = 0; i < paths.size(); ++i) {
    out << "# path " << i << "\n";
    for (const auto& e : paths[i].events) {
      std::string line;
      append_double(line, e.t);
      line += "\t" + std::to_string(e.site + 1) + "\t";
      line.push_back(alphabet.symbol(e.to));
      out << line << "\n";
    }
  }
}

std::vector<Path> load_paths(const std::string& file, const ContextModel& model) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open path file: " + file);
  std::vector<Path> paths;
  double horizon = 0.0;
  Sequence x0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      bool new_path = false;
      while (ss >> tok) {
        if (tok.rfind("T=", 0) == 0) horizon = std::stod(tok.substr(2));
        if (tok.rfind("x0=", 0) == 0) x0 = parse_sequence(tok.substr(3), model.alphabet);
        if (tok == "path") new_path = true;
      }
      if (new_path) {
        if (x0.size() == 0) throw ValidationError("path dump missing the x0 header");
        paths.push_back(Path{{}, horizon, x0});
      }
      continue;
    }
    if (paths.empty()) throw ValidationError("path dump has events before a '# path' line");
    std::istringstream ss(line);
    double t;
    int site;
    std::string sym;
    if (!(ss >> t >> site >> sym) || sym.size() != 1)
      throw ValidationError("malformed path event line: " + line);
    paths.back().events.push_back(
        Event{t, site - 1, static_cast<uint8_t>(model.alphabet.index(sym[0]))});
  }
  return paths;
}

void write_trace_tsv(std::ostream& out, const ChainTrace& trace) {
  size_t blocks = trace.rows.empty() ? 0 : trace.rows.front().m_block.size();
  out << "step\tm\tlog_q\tblock\taccepted";
  for (size_t j = 0; j < blocks; ++j) out << "\tm_block_" << j + 1;
  out << "\n";
  for (const auto& row : trace.rows) {
    std::string line = std::to_string(row.step) + "\t" + std::to_string(row.m) + "\t";
    append_double(line, row.log_q);
    line += "\t" + std::to_string(row.block) + "\t" + (row.accepted ? "1" : "0");
    for (int mb : row.m_block) line += "\t" + std::to_string(mb);
    out << line << "\n";
  }
}

}  // namespace ctsmc
