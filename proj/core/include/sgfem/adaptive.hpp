#pragma once

// Adaptive loop: SOLVE, ESTIMATE (B0), MARK with Doerfler, then refine either
// the grid or the index set.

#include "sgfem/estimator.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace sgfem::adaptive {

using polychaos::IndexSet;

/// Minimal set M of indices with sum_M c >= theta sum_Q c: the shortest
/// prefix of Q sorted by contribution (descending, ties in graded
/// lexicographic order).
IndexSet doerfler_mark(const IndexSet& Q, const std::vector<double>& contributions, double theta);

struct AdaptConfig {
    std::shared_ptr<const randfield::CoefficientModel> model;
    int initial_level = 2;
    IndexSet P0;
    double theta = 0.9;
    double epsilon = 1e-2;
    int max_iterations = 20;
    galerkin::SolverOptions solver;
    fem::ScalarFn f = [](Point) { return 1.0; };
};

/// Empty list iff the configuration is runnable.
std::vector<std::string> validate(const AdaptConfig& config);

enum class Decision { Spatial, Parametric, Stop };
std::string to_string(Decision d);

struct IterationRecord {
    int k = 0;
    int level = 0;
    double h = 0.0;
    IndexSet P;
    IndexSet Q;
    double eta = 0.0;
    double spatial_sq = 0.0;
    double parametric_sq = 0.0;
    std::vector<double> index_sq;
    IndexSet marked;
    double marked_sq = 0.0;
    Decision decision = Decision::Stop;
    std::size_t dofs_total = 0;   // all grid nodes times #P
    std::size_t dofs_free = 0;    // free nodes times #P
    double energy_sq = 0.0;       // ||u_k||_B^2
    int solver_iterations = 0;
    double solver_residual = 0.0;
    double seconds = 0.0;
    double theta_eff = 0.0;       // effectivity, filled by attach_effectivity
};

struct AdaptTrace {
    std::vector<IterationRecord> iterations;
    bool converged = false;

    const IterationRecord& final() const { return iterations.back(); }
    std::string to_json() const;
    /// One row per iteration.
    void write_csv(std::ostream& os) const;
};

AdaptTrace adapt_loop(const AdaptConfig& config);

/// Fills theta_eff = eta_k / sqrt(E_ref - ||u_k||_B^2) for every iteration.
void attach_effectivity(AdaptTrace& trace, double reference_energy_sq);

} // namespace sgfem::adaptive
