#pragma once

// Experiment drivers behind the command-line front end. A run produces a JSON
// record (config echo plus every computed quantity at full precision) and CSV
// tables laid out like the published ones.

#include "sgfem/adaptive.hpp"
#include "sgfem/config.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace sgfem::runner {

inline constexpr const char* kVersion = "0.1.0";

/// Univariate basis size used by every run; covers gamma entries up to
/// n_max - quad_extra in the Exp model.
inline constexpr int kBasisSize = 40;

struct Artifacts {
    std::string run_json;
    std::string table_csv;
    std::string trace_csv;   // adaptive runs only
};

/// Coefficient model for one amplitude (sigma or alpha_bar) of `c`.
std::shared_ptr<const randfield::CoefficientModel> make_model(const config::RunConfig& c, double amplitude);

/// Initial index set: `indices` when given, else P_{M,degree}.
polychaos::IndexSet initial_index_set(const config::RunConfig& c);

/// Executes `c`. Throws ConfigError when validate(c) is non-empty and
/// NumericalError when an inner solve fails. Progress goes to `log` if set.
///
/// Reference solutions use Q2 elements. Automatic choices (-1):
///   effectivity-sweep / single-solve: level = finest run level + 1,
///     degree = degree of P + 2;
///   adaptive: level = final level + 1, index set = N(P_K, P_{M,1}).
Artifacts run(const config::RunConfig& c, std::ostream* log = nullptr);

/// Writes run.json, table.csv and, when non-empty, trace.csv into `dir`
/// (created if missing).
void write_artifacts(const Artifacts& a, const std::string& dir);

/// Presets are `<name>.cfg` files in a directory.
std::vector<std::string> list_presets(const std::string& dir);
std::string preset_path(const std::string& dir, const std::string& name);
/// First comment line of a preset file, without the leading '#'.
std::string preset_description(const std::string& path);

} // namespace sgfem::runner
