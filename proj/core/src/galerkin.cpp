#include "sgfem/galerkin.hpp"

#include "sgfem/errors.hpp"
#include "sgfem/parallel.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace sgfem::galerkin {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Block layout [i + c n] <-> interleaved [i * cols + c].
void to_interleaved(std::span<const double> block, std::span<double> inter, std::size_t n, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t i = 0; i < n; ++i) inter[i * cols + c] = block[i + c * n];
}

void to_block(std::span<const double> inter, std::span<double> block, std::size_t n, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t i = 0; i < n; ++i) block[i + c * n] = inter[i * cols + c];
}

} // namespace

// ---------------------------------------------------------------------------
// Spectral terms

// Pair-driven enumeration: for each (alpha, beta) only the parity-compatible
// gammas in the triangle box are visited.
SpectralTerms spectral_terms(const randfield::CoefficientModel& model, const IndexSet& rows, const IndexSet& cols) {
    const std::size_t M = rows.num_params();
    const auto& basis = model.basis();
    std::map<std::vector<int>, std::vector<polychaos::SpectralEntry>, std::less<>> acc;
    std::vector<int> lo(M), hi(M), g(M);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& a = rows[i];
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const auto& b = cols[j];
            for (std::size_t m = 0; m < M; ++m) {
                lo[m] = std::abs(a[m] - b[m]);
                hi[m] = a[m] + b[m];
                g[m] = lo[m];
            }
            while (true) {
                bool keep = true;
                if (model.finite_expansion()) {
                    int deg = 0;
                    for (int v : g) deg += v;
                    keep = deg <= 2;
                }
                if (keep) {
                    double v = 1.0;
                    for (std::size_t m = 0; m < M; ++m) v *= basis.triple(a[m], b[m], g[m]);
                    if (v != 0.0)
                        acc[g].push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), v});
                }
                std::size_t m = 0;
                while (m < M) {
                    g[m] += 2;
                    if (g[m] <= hi[m]) break;
                    g[m] = lo[m];
                    ++m;
                }
                if (m == M) break;
            }
        }
    }
    std::vector<polychaos::MultiIndex> kept;
    for (const auto& [gam, entries] : acc) {
        double mx = 0.0;
        for (const auto& e : entries) mx = std::max(mx, std::abs(e.value));
        if (mx >= kSpectralDropTol) kept.emplace_back(gam);
    }
    SpectralTerms out;
    out.gammas = IndexSet(M, std::move(kept));
    for (const auto& gam : out.gammas) {
        polychaos::SpectralMatrix G;
        G.rows = rows.size();
        G.cols = cols.size();
        G.entries = std::move(acc.find(gam.entries())->second);
        std::sort(G.entries.begin(), G.entries.end(), [](const auto& x, const auto& y) {
            return x.row != y.row ? x.row < y.row : x.col < y.col;
        });
        out.matrices.push_back(std::move(G));
    }
    return out;
}

IndexSet coupling_set(const randfield::CoefficientModel& model, const IndexSet& rows, const IndexSet& cols) {
    return spectral_terms(model, rows, cols).gammas;
}

fem::MatrixFamily assemble_coefficient_family(const randfield::CoefficientModel& model, const fem::FESpace& space,
                                              const IndexSet& gammas) {
    const auto& members = gammas.members();
    return fem::assemble_stiffness_family(space, members.size(), [&](Point x, std::span<double> w) {
        model.evaluate(x, members, w, {});
    });
}

// ---------------------------------------------------------------------------
// KroneckerOperator

KroneckerOperator::KroneckerOperator(std::shared_ptr<const fem::MatrixFamily> family,
                                     std::vector<polychaos::SpectralMatrix> spectral)
    : family_(std::move(family)), spectral_(std::move(spectral)) {
    if (!family_ || family_->terms != spectral_.size())
        throw std::invalid_argument("KroneckerOperator: term count mismatch");
    if (spectral_.empty()) throw std::invalid_argument("KroneckerOperator: no terms");
    rows_ = spectral_.front().rows;
    cols_ = spectral_.front().cols;
    pair_start_.assign(1, 0);
    std::vector<std::int64_t> pair_of_col(cols_, -1);
    for (const auto& G : spectral_) {
        if (G.rows != rows_ || G.cols != cols_) throw std::invalid_argument("KroneckerOperator: shape mismatch");
        std::fill(pair_of_col.begin(), pair_of_col.end(), -1);
        for (const auto& e : G.entries) {
            if (pair_of_col[e.col] < 0) {
                pair_of_col[e.col] = static_cast<std::int64_t>(pair_col_.size());
                pair_col_.push_back(e.col);
            }
            entries_.push_back({e.row, static_cast<std::uint32_t>(pair_of_col[e.col]), e.value});
        }
        pair_start_.push_back(pair_col_.size());
    }
    std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.row < b.row; });
}

void KroneckerOperator::apply_interleaved(std::span<const double> x, std::span<double> y) const {
    const auto& p = *family_->pattern;
    const std::size_t n = p.rows;
    const std::size_t T = spectral_.size();
    if (x.size() != n * cols_ || y.size() != n * rows_) throw std::invalid_argument("KroneckerOperator: size mismatch");
    const double* vals = family_->values.data();
    const std::size_t npairs = pair_col_.size();
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc(npairs);
        for (std::size_t i = begin; i < end; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) {
                const double* kv = vals + k * T;
                const double* xj = x.data() + static_cast<std::size_t>(p.col_idx[k]) * cols_;
                for (std::size_t t = 0; t < T; ++t) {
                    const double v = kv[t];
                    for (std::size_t q = pair_start_[t]; q < pair_start_[t + 1]; ++q) acc[q] += v * xj[pair_col_[q]];
                }
            }
            double* yi = y.data() + i * rows_;
            std::fill(yi, yi + rows_, 0.0);
            for (const auto& e : entries_) yi[e.row] += e.value * acc[e.pair];
        }
    });
}

void KroneckerOperator::apply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = n_x();
    Vector xi(n * cols_), yi(n * rows_);
    to_interleaved(x, xi, n, cols_);
    apply_interleaved(xi, yi);
    to_block(yi, y, n, rows_);
}

std::vector<double> KroneckerOperator::to_dense() const {
    const std::size_t n = n_x();
    const std::size_t R = n * rows_, C = n * cols_;
    std::vector<double> d(R * C, 0.0);
    for (std::size_t t = 0; t < spectral_.size(); ++t) {
        const auto K = family_->term(t).to_dense();
        for (const auto& e : spectral_[t].entries)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    d[(i + e.row * n) * C + (j + e.col * n)] += e.value * K[i * n + j];
    }
    return d;
}

// ---------------------------------------------------------------------------
// MeanSolver

struct MeanSolver::Impl {
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
};

MeanSolver::MeanSolver(const fem::SparseMatrix& K0) : impl_(std::make_unique<Impl>()), n_(K0.rows()) {
    const auto& p = K0.pattern();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(p.nnz());
    for (std::size_t i = 0; i < p.rows; ++i)
        for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k)
            trip.emplace_back(static_cast<int>(i), static_cast<int>(p.col_idx[k]), K0.values()[k]);
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    A.setFromTriplets(trip.begin(), trip.end());
    impl_->llt.compute(A);
    if (impl_->llt.info() != Eigen::Success)
        throw NumericalError("mean stiffness matrix K_0 is not positive definite (t_0 degenerate?)");
}

MeanSolver::~MeanSolver() = default;

void MeanSolver::solve(std::span<const double> b, std::span<double> x, std::size_t columns) const {
    if (b.size() != n_ * columns || x.size() != n_ * columns) throw std::invalid_argument("MeanSolver::solve: size mismatch");
    if (n_ == 0) return;
    const auto nn = static_cast<Eigen::Index>(n_);
    const auto nc = static_cast<Eigen::Index>(columns);
    Eigen::Map<const Eigen::MatrixXd> B(b.data(), nn, nc);
    Eigen::Map<Eigen::MatrixXd> X(x.data(), nn, nc);
    X = impl_->llt.solve(B);
}

// ---------------------------------------------------------------------------
// Assembly and solution

namespace {

// Removes terms whose K_gamma is negligible against K_0 (t_gamma vanishing
// identically, e.g. a parameter-free field). Term 0 is always kept.
void drop_vanishing_terms(fem::MatrixFamily& family, SpectralTerms& terms) {
    const std::size_t T = family.terms;
    const std::size_t nnz = family.pattern->nnz();
    std::vector<double> mx(T, 0.0);
    for (std::size_t k = 0; k < nnz; ++k)
        for (std::size_t t = 0; t < T; ++t) mx[t] = std::max(mx[t], std::abs(family.values[k * T + t]));
    std::vector<std::size_t> keep{0};
    for (std::size_t t = 1; t < T; ++t)
        if (mx[t] > kSpectralDropTol * mx[0]) keep.push_back(t);
    if (keep.size() == T) return;
    fem::Vector v(nnz * keep.size());
    for (std::size_t k = 0; k < nnz; ++k)
        for (std::size_t i = 0; i < keep.size(); ++i) v[k * keep.size() + i] = family.values[k * T + keep[i]];
    family.values = std::move(v);
    family.terms = keep.size();
    std::vector<MultiIndex> g;
    std::vector<polychaos::SpectralMatrix> m;
    for (std::size_t t : keep) {
        g.push_back(terms.gammas[t]);
        m.push_back(std::move(terms.matrices[t]));
    }
    terms.gammas = IndexSet(terms.gammas.num_params(), std::move(g));
    terms.matrices = std::move(m);
}

} // namespace

KroneckerSystem assemble(std::shared_ptr<const randfield::CoefficientModel> model,
                         std::shared_ptr<const fem::FESpace> space, const IndexSet& P, const fem::ScalarFn& f) {
    if (!P.contains_zero()) throw std::invalid_argument("galerkin::assemble: index set must contain the zero index");
    if (P.num_params() != model->num_params()) throw std::invalid_argument("galerkin::assemble: M mismatch");
    if (space->kind() == fem::SpaceKind::Bubble) throw std::invalid_argument("galerkin::assemble: bubble space");
    auto terms = spectral_terms(*model, P, P);
    if (!terms.gammas[0].is_zero()) throw NumericalError("galerkin::assemble: zero index missing from the coupling set");

    auto family = std::make_shared<fem::MatrixFamily>(assemble_coefficient_family(*model, *space, terms.gammas));
    drop_vanishing_terms(*family, terms);

    KroneckerSystem sys;
    sys.model = model;
    sys.space = space;
    sys.P = P;
    sys.gammas = terms.gammas;
    sys.K0 = family->term(0);
    sys.op = KroneckerOperator(family, std::move(terms.matrices));
    sys.mean_solver = std::make_shared<MeanSolver>(sys.K0);
    sys.load = fem::assemble_load(*space, f);
    sys.rhs.assign(sys.size(), 0.0);
    const std::size_t z = *P.position(polychaos::MultiIndex::zero(P.num_params()));
    std::copy(sys.load.begin(), sys.load.end(), sys.rhs.begin() + static_cast<std::ptrdiff_t>(z * sys.n_x()));
    return sys;
}

GalerkinSolution solve(const KroneckerSystem& system, const SolverOptions& options) {
    const std::size_t n = system.n_x();
    const std::size_t np = system.P.size();
    const std::size_t N = n * np;

    GalerkinSolution sol;
    sol.n_x = n;
    sol.P = system.P;
    sol.level = system.space->grid().level();
    sol.model = randfield::to_string(system.model->kind());
    sol.coeffs.assign(N, 0.0);

    Vector b(N), x(N, 0.0), r(N), z(N), p(N), Ap(N), tmp(N), tmp2(N);
    to_interleaved(system.rhs, b, n, np);
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0 || N == 0) {
        sol.converged = true;
        return sol;
    }
    auto precondition = [&](const Vector& in, Vector& out) {
        to_block(in, tmp, n, np);
        system.mean_solver->solve(tmp, tmp2, np);
        to_interleaved(tmp2, out, n, np);
    };
    auto explicit_residual = [&]() {
        system.op.apply_interleaved(x, Ap);
        for (std::size_t i = 0; i < N; ++i) r[i] = b[i] - Ap[i];
        return std::sqrt(dot(r, r)) / bnorm;
    };

    r = b;
    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    int it = 0;
    double rel = 1.0;
    while (it < options.max_iter) {
        system.op.apply_interleaved(p, Ap);
        const double pAp = dot(p, Ap);
        if (!(pAp > 0.0))
            throw NumericalError("PCG breakdown: non-positive curvature p^T A p = " + std::to_string(pAp) +
                                 " (operator not positive definite)");
        const double a = rz / pAp;
        for (std::size_t i = 0; i < N; ++i) {
            x[i] += a * p[i];
            r[i] -= a * Ap[i];
        }
        ++it;
        rel = std::sqrt(dot(r, r)) / bnorm;
        if (rel <= options.rel_tol) {
            rel = explicit_residual();
            if (rel <= options.rel_tol) break;
            // recursive residual drifted: restart from the true residual
            precondition(r, z);
            p = z;
            rz = dot(r, z);
            continue;
        }
        precondition(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < N; ++i) p[i] = z[i] + beta * p[i];
    }
    sol.residual = explicit_residual();
    sol.iterations = it;
    sol.converged = sol.residual <= options.rel_tol;
    to_block(x, sol.coeffs, n, np);
    return sol;
}

double energy_norm_sq(const KroneckerSystem& system, std::span<const double> u) {
    if (u.size() != system.size()) throw std::invalid_argument("energy_norm_sq: layout mismatch");
    Vector Au(u.size());
    system.op.apply(u, Au);
    return dot(u, Au);
}

} // namespace sgfem::galerkin
