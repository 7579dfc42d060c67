#pragma once

// Kronecker-structured stochastic Galerkin operator sum_gamma G_gamma (x) K_gamma
// and its solution by conjugate gradients with the mean-based preconditioner.

#include "sgfem/fem.hpp"
#include "sgfem/polychaos.hpp"
#include "sgfem/randfield.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sgfem::galerkin {

using fem::Vector;
using polychaos::IndexSet;
using polychaos::MultiIndex;

/// Spatial stiffness matrices K_gamma for a list of gammas, with weight t_gamma.
fem::MatrixFamily assemble_coefficient_family(const randfield::CoefficientModel& model, const fem::FESpace& space,
                                              const IndexSet& gammas);

struct SpectralTerms {
    IndexSet gammas;
    std::vector<polychaos::SpectralMatrix> matrices;   // one per gamma, #rows x #cols
};

/// Nonzero spectral matrices G_gamma restricted to rows x cols for gamma in
/// N(rows, cols) (intersected with the expansion support of the model).
SpectralTerms spectral_terms(const randfield::CoefficientModel& model, const IndexSet& rows, const IndexSet& cols);

/// Gammas of N(rows, cols) that carry a nonzero spectral matrix and lie in the
/// support of the coefficient expansion.
IndexSet coupling_set(const randfield::CoefficientModel& model, const IndexSet& rows, const IndexSet& cols);

/// Spectral matrices below this magnitude are treated as zero.
inline constexpr double kSpectralDropTol = 1e-14;

/// Linear map X (x) P_cols -> X (x) P_rows given by sum_t G_t (x) K_t. Vectors
/// use the block layout entry [i + iota(alpha) n_X].
class KroneckerOperator {
public:
    KroneckerOperator() = default;
    KroneckerOperator(std::shared_ptr<const fem::MatrixFamily> family, std::vector<polychaos::SpectralMatrix> spectral);

    std::size_t n_x() const noexcept { return family_ ? family_->pattern->rows : 0; }
    std::size_t num_rows() const noexcept { return rows_; }
    std::size_t num_cols() const noexcept { return cols_; }
    std::size_t num_terms() const noexcept { return spectral_.size(); }
    const polychaos::SpectralMatrix& spectral(std::size_t t) const { return spectral_.at(t); }
    const fem::MatrixFamily& family() const { return *family_; }

    /// y = A x in block layout.
    void apply(std::span<const double> x, std::span<double> y) const;
    /// Same product on row-major blocks: x[i * cols + c], y[i * rows + r].
    void apply_interleaved(std::span<const double> x, std::span<double> y) const;

    /// Dense (n_X rows) x (n_X cols) matrix in block layout, row-major. Tests only.
    std::vector<double> to_dense() const;

private:
    std::shared_ptr<const fem::MatrixFamily> family_;
    std::vector<polychaos::SpectralMatrix> spectral_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    // (term, col) products needed, grouped by term.
    std::vector<std::size_t> pair_start_;
    std::vector<std::uint32_t> pair_col_;
    struct Entry {
        std::uint32_t row;
        std::uint32_t pair;
        double value;
    };
    std::vector<Entry> entries_;
};

/// Sparse Cholesky factorization of K_0, applied block-wise.
class MeanSolver {
public:
    explicit MeanSolver(const fem::SparseMatrix& K0);
    ~MeanSolver();
    MeanSolver(const MeanSolver&) = delete;
    MeanSolver& operator=(const MeanSolver&) = delete;

    std::size_t size() const noexcept { return n_; }
    /// Solves K_0 X = B for `columns` right-hand sides stored contiguously.
    void solve(std::span<const double> b, std::span<double> x, std::size_t columns = 1) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t n_;
};

struct KroneckerSystem {
    std::shared_ptr<const randfield::CoefficientModel> model;
    std::shared_ptr<const fem::FESpace> space;
    IndexSet P;
    IndexSet gammas;          // terms actually kept, graded lexicographic
    KroneckerOperator op;
    Vector rhs;               // g (x) f
    Vector load;              // f on free dofs
    fem::SparseMatrix K0;
    std::shared_ptr<const MeanSolver> mean_solver;

    std::size_t n_x() const noexcept { return space->num_free(); }
    std::size_t size() const noexcept { return n_x() * P.size(); }
    void apply(std::span<const double> x, std::span<double> y) const { op.apply(x, y); }
};

/// Assembles the Galerkin system on X (x) P_P with forcing f. P must
/// contain the zero index. Terms with max|K_gamma| <= kSpectralDropTol
/// max|K_0| are dropped.
KroneckerSystem assemble(std::shared_ptr<const randfield::CoefficientModel> model,
                         std::shared_ptr<const fem::FESpace> space, const IndexSet& P, const fem::ScalarFn& f);

struct SolverOptions {
    double rel_tol = 1e-10;
    int max_iter = 500;
};

struct GalerkinSolution {
    Vector coeffs;               // block layout [i + iota(alpha) n_X]
    std::size_t n_x = 0;
    IndexSet P;
    int level = 0;
    std::string model;
    int iterations = 0;
    double residual = 0.0;       // explicit ||b - A u|| / ||b||
    bool converged = false;

    std::span<const double> block(std::size_t alpha) const { return {coeffs.data() + alpha * n_x, n_x}; }
};

/// Preconditioned CG with I (x) K_0. Stops once the explicit relative residual
/// ||b - A u|| / ||b|| is at most rel_tol; throws NumericalError on
/// non-positive curvature.
GalerkinSolution solve(const KroneckerSystem& system, const SolverOptions& options = {});

/// u^T A u.
double energy_norm_sq(const KroneckerSystem& system, std::span<const double> u);
inline double energy_norm_sq(const KroneckerSystem& system, const GalerkinSolution& u) {
    return energy_norm_sq(system, u.coeffs);
}

} // namespace sgfem::galerkin
