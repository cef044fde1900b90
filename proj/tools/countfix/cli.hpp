#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "countfix/detector_model.hpp"
#include "countfix/priors.hpp"

namespace countfix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

// Bad flags, out-of-range values, unreadable custom prior.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --help / --version; what() carries the text to print.
class EarlyExit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PdcSpec {
  double chi = 0.7;
};
struct UniformSpec {
  std::size_t lo = 0;
  std::size_t hi = 9;
};
struct CustomSpec {
  std::filesystem::path path;
  std::vector<double> weights;
};
using PriorSpec = std::variant<PdcSpec, UniformSpec, CustomSpec>;

enum class Format { csv, json };

struct Outputs {
  bool pmn = false;
  bool pn = false;
  bool pnm = false;
  bool optmap = false;
  bool fidelity = false;
  bool simulate = false;

  bool any() const { return pmn || pn || pnm || optmap || fidelity || simulate; }
};

struct RunConfig {
  DetectorParams detector;
  PriorSpec prior = PdcSpec{};
  std::size_t n_max = 19;
  Outputs outputs;
  std::uint64_t seed = 0;
  std::uint64_t shots = 1'000'000;
  unsigned threads = 0;
  std::filesystem::path out_dir = ".";
  Format format = Format::csv;
};

// Parses `countfix run|simulate [flags]`. args[0] is the program name.
// Flags override values read from --config. Throws UsageError or EarlyExit.
RunConfig parse_config(const std::vector<std::string>& args);

// "pdc:<chi>", "uniform:<lo>:<hi>" or "custom:<path>".
PriorSpec parse_prior_spec(const std::string& text);

NumberPrior resolve_prior(const PriorSpec& spec, std::size_t n_max);

// Writes the selected artifacts plus summary.json into out_dir. Returns an exit code.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

// Entry point shared by the executable and the tests.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Fixed 12-significant-digit rendering used by every artifact.
std::string format_number(double value);

}  // namespace countfix::cli
