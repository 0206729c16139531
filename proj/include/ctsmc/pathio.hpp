#ifndef CTSMC_PATHIO_HPP
#define CTSMC_PATHIO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "ctsmc/mcmc.hpp"
#include "ctsmc/path.hpp"

namespace ctsmc {

// Path dump format: a file-level header, then per path one `# path <i>` line
// followed by one event per line `t <tab> site <tab> symbol` (1-based sites).
void dump_paths(std::ostream& out, const std::vector<Path>& paths, const Alphabet& alphabet);
std::vector<Path> load_paths(const std::string& file, const ContextModel& model);

void write_trace_tsv(std::ostream& out, const ChainTrace& trace);

}  // namespace ctsmc

#endif
