#pragma once

// Multi-index combinatorics and polynomials orthonormal with respect to the
// truncated Gaussian density on [-1, 1] (Rys polynomials).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace sgfem::polychaos {

/// Finitely supported multi-index with a fixed number of parameters M.
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::size_t M) : entries_(M, 0) {}
    MultiIndex(std::initializer_list<int> entries);
    explicit MultiIndex(std::vector<int> entries);

    static MultiIndex zero(std::size_t M) { return MultiIndex(M); }
    static MultiIndex unit(std::size_t M, std::size_t m, int degree = 1);

    std::size_t size() const noexcept { return entries_.size(); }
    int operator[](std::size_t m) const { return entries_[m]; }
    int& operator[](std::size_t m) { return entries_[m]; }
    const std::vector<int>& entries() const noexcept { return entries_; }

    int total_degree() const noexcept;
    int max_degree() const noexcept;
    std::size_t support_size() const noexcept;
    bool is_zero() const noexcept { return total_degree() == 0; }

    std::string to_string() const;

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

private:
    std::vector<int> entries_;
};

/// Graded lexicographic order: total degree first, then ascending lexicographic.
bool grlex_less(const MultiIndex& a, const MultiIndex& b);

struct MultiIndexHash {
    std::size_t operator()(const MultiIndex& a) const noexcept;
};

/// Ordered collection of distinct multi-indices. The position of a member in
/// the graded lexicographic order defines the bijection iota (0-based here).
class IndexSet {
public:
    IndexSet() = default;
    explicit IndexSet(std::size_t M) : M_(M) {}
    IndexSet(std::size_t M, std::vector<MultiIndex> members);

    std::size_t num_params() const noexcept { return M_; }
    std::size_t size() const noexcept { return members_.size(); }
    bool empty() const noexcept { return members_.empty(); }
    const MultiIndex& operator[](std::size_t i) const { return members_[i]; }
    const std::vector<MultiIndex>& members() const noexcept { return members_; }
    auto begin() const { return members_.begin(); }
    auto end() const { return members_.end(); }

    std::optional<std::size_t> position(const MultiIndex& a) const;
    bool contains(const MultiIndex& a) const { return position(a).has_value(); }
    bool contains_zero() const { return contains(MultiIndex::zero(M_)); }
    int max_total_degree() const noexcept;
    int max_entry() const noexcept;

    IndexSet set_union(const IndexSet& other) const;
    IndexSet set_difference(const IndexSet& other) const;
    IndexSet set_intersection(const IndexSet& other) const;

    friend bool operator==(const IndexSet& a, const IndexSet& b) {
        return a.M_ == b.M_ && a.members_ == b.members_;
    }

private:
    std::size_t M_ = 0;
    std::vector<MultiIndex> members_;
    std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> lookup_;
};

/// Quadrature points and weights on [-1, 1] for a probability measure.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
    double integrate(const std::function<double(double)>& g) const;
};

/// n-point Gauss-Legendre rule on [a, b] (Lebesgue weight).
GaussRule gauss_legendre(std::size_t n, double a = -1.0, double b = 1.0);

/// Composite Gauss-Legendre rule: `panels` equal panels of `points` each.
GaussRule composite_gauss_legendre(std::size_t panels, std::size_t points, double a = -1.0,
                                   double b = 1.0);

/// Truncated Gaussian density on [-1, 1], normalized to unit mass.
double truncated_gaussian_density(double y, double sigma0);

/// Orthonormal polynomials for the truncated Gaussian weight, described by
/// their three-term recurrence
///   sqrt(beta[n+1]) P_{n+1} = (y - alpha[n]) P_n - sqrt(beta[n]) P_{n-1},
/// with beta[0] the total mass (= 1) and P_0 = 1.
class UnivariateBasis {
public:
    UnivariateBasis(double sigma0, int n_max, std::vector<double> alpha_rec,
                    std::vector<double> beta_rec);

    double sigma0() const noexcept { return sigma0_; }
    int n_max() const noexcept { return n_max_; }
    const std::vector<double>& alpha_rec() const noexcept { return alpha_; }
    const std::vector<double>& beta_rec() const noexcept { return beta_; }

    double density(double y) const;

    /// Values P_0(y) .. P_n(y).
    std::vector<double> evaluate_all(double y, int n) const;
    double evaluate(int n, double y) const;

    /// n-point Gauss rule for the measure (n <= n_max), precomputed.
    const GaussRule& rule(std::size_t n) const;

    /// <P_i P_j P_k> from the precomputed table.
    double triple(int i, int j, int k) const;

private:
    friend class BasisBuilder;
    void precompute();

    double sigma0_;
    int n_max_;
    std::vector<double> alpha_;
    std::vector<double> beta_;
    std::vector<GaussRule> rules_;        // rules_[n-1] has n points
    std::vector<double> triple_table_;    // (n_max+1)^3, NaN outside the exact range
};

/// Builds recurrence coefficients with the Stieltjes procedure on a composite
/// 200-point Gauss-Legendre discretization of the weight. Throws
/// NumericalError if a recurrence coefficient beta becomes non-positive.
UnivariateBasis build_basis(double sigma0, int n_max = 30);

/// Golub-Welsch: n-point Gauss rule from the recurrence of `basis`.
GaussRule gauss_rule(const UnivariateBasis& basis, std::size_t n);

/// <P_i P_j P_k> for the basis measure. Exactly zero when the triangle
/// condition fails. Requires ceil((i+j+k)/2)+1 <= n_max.
double triple_product(const UnivariateBasis& basis, int i, int j, int k);

/// { alpha : |alpha| <= d } in graded lexicographic order.
IndexSet complete_set(std::size_t M, int d);

/// N(P, Q) = { gamma : exists alpha in P, beta in Q with
///             |alpha_m - beta_m| <= gamma_m <= alpha_m + beta_m for all m }.
IndexSet neighborhood(const IndexSet& P, const IndexSet& Q);

/// Entry of the spectral matrix G_gamma: prod_m <P_{a_m} P_{b_m} P_{g_m}>.
double spectral_entry(const UnivariateBasis& basis, const MultiIndex& alpha,
                      const MultiIndex& beta, const MultiIndex& gamma);

struct SpectralEntry {
    std::uint32_t row;
    std::uint32_t col;
    double value;
};

/// Sparse #P x #Q matrix [G_gamma]_{iota(alpha), iota(beta)}.
struct SpectralMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<SpectralEntry> entries;

    double max_abs() const noexcept;
    std::vector<double> to_dense() const;   // row-major rows x cols
};

SpectralMatrix spectral_matrix(const MultiIndex& gamma, const IndexSet& P, const IndexSet& Q,
                               const UnivariateBasis& basis);

} // namespace sgfem::polychaos
