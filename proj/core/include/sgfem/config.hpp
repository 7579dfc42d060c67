#pragma once

// Run configuration: a flat key = value file with dotted keys, optional
// [section] headers that prefix the keys below them, and # comments.
// Every key has a default, so an empty file is a valid single solve.

#include "sgfem/polychaos.hpp"
#include "sgfem/randfield.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sgfem::config {

/// Ordered key -> raw value text.
using KeyValues = std::map<std::string, std::string>;

/// Parses config text. Throws ConfigError on a malformed line (message names
/// `origin` and the line number).
KeyValues parse_text(std::istream& in, const std::string& origin = "<config>");
KeyValues parse_file(const std::string& path);

/// Applies one "key=value" override. Throws ConfigError without '='.
void apply_override(KeyValues& kv, const std::string& assignment);

enum class Experiment { EffectivitySweep, Adaptive, SingleSolve };
enum class FieldKind { KL, Cosine };
enum class FormChoice { B0, B1, Both };

std::string to_string(Experiment e);
std::string to_string(FieldKind f);
std::string to_string(FormChoice f);

struct RunConfig {
    std::string name = "custom";
    Experiment experiment = Experiment::SingleSolve;

    randfield::Nonlinearity model = randfield::Nonlinearity::Exp;
    FieldKind field = FieldKind::KL;
    /// sigma for the KL field, alpha_bar for the cosine field; one run each.
    std::vector<double> amplitudes{0.2};
    double ell1 = 1.0;
    double ell2 = 1.0;
    double sigma_tilde = 2.0;
    int M = 3;
    double sigma0 = 1.0;
    int quad_extra = 10;

    /// Q1 grid levels (level L has 2^L elements per side).
    std::vector<int> levels{2};
    /// P = P_{M,degree} unless `indices` is given.
    int degree = 2;
    std::optional<polychaos::IndexSet> indices;

    FormChoice form = FormChoice::Both;
    /// Q = P_{M,d} \ P for each listed d; empty selects the default detail rule.
    std::vector<int> detail_degrees;
    int b1_quad_level = 6;

    /// Reference solution for effectivity indices. Level and degree of -1
    /// select the automatic choice (see runner.hpp).
    bool reference = false;
    int reference_level = -1;
    int reference_degree = -1;

    double rel_tol = 1e-10;
    int max_iter = 500;

    double theta = 0.9;
    double epsilon = 2e-2;
    int max_iterations = 20;
    int initial_level = 2;

    /// Random y samples for the coefficient-range diagnostic.
    int diagnostic_samples = 256;
    std::uint64_t seed = 0;
    int threads = 0;   // 0 keeps the library default
};

/// Builds a RunConfig from key-values. Unknown keys and unparsable values are
/// collected in `problems` (when non-null) or thrown as ConfigError.
RunConfig from_key_values(const KeyValues& kv, std::vector<std::string>* problems = nullptr);

/// Fully explicit key-values for `c`. Feeding them back through
/// from_key_values reproduces the same key-values.
KeyValues to_key_values(const RunConfig& c);

/// Every violated constraint; empty iff the configuration is runnable.
std::vector<std::string> validate(const RunConfig& c);

/// "0,0,0; 1,0,0" <-> IndexSet (members sorted graded lexicographically).
polychaos::IndexSet parse_index_list(const std::string& text);
std::string format_index_list(const polychaos::IndexSet& s);

} // namespace sgfem::config
