#pragma once

// Affine parametric fields a(x, y) = a0(x) + sum_m a_m(x) y_m and the gPC
// coefficients t_gamma(x) of T = exp(a) or T = a^2.

#include "sgfem/geometry.hpp"
#include "sgfem/polychaos.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sgfem::randfield {

/// A scalar function on the spatial domain together with its gradient.
struct FieldTerm {
    std::function<double(Point)> value;
    std::function<Vec2(Point)> gradient;

    static FieldTerm constant(double c);
};

class AffineField {
public:
    AffineField(Rect domain, FieldTerm mean, std::vector<FieldTerm> modes);

    std::size_t num_params() const noexcept { return modes_.size(); }
    const Rect& domain() const noexcept { return domain_; }
    const FieldTerm& mean() const noexcept { return mean_; }
    const FieldTerm& mode(std::size_t m) const { return modes_.at(m); }

    /// a(x, y) for a parameter vector of length M.
    double value(Point x, std::span<const double> y) const;

private:
    Rect domain_;
    FieldTerm mean_;
    std::vector<FieldTerm> modes_;
};

enum class Parity { Even, Odd };

/// Eigenpair of the 1D exponential covariance operator on an interval
/// (unit variance). Eigenfunctions have unit L2 norm on the interval.
struct KLEigenpair {
    double lambda = 0.0;
    double omega = 0.0;
    Parity kind = Parity::Even;
    int direction = 1;
    int index = 0;     // position in the 1D sequence (0-based)
    double center = 0.0;
    double half_length = 1.0;

    double value(double t) const;
    double derivative(double t) const;
};

/// The first `count` eigenpairs of int exp(-|x - x'| / ell) phi(x') dx' on
/// [center - half_length, center + half_length], ordered by decreasing
/// eigenvalue. Roots come from bisection on the even/odd transcendental
/// equations.
std::vector<KLEigenpair> kl_eigenpairs_1d(double ell, double center, double half_length,
                                          std::size_t count, int direction = 1);

/// A 2D separable mode: sigma^2 * lambda1 * lambda2 with phi1(x1) phi2(x2).
struct KLMode {
    double lambda = 0.0;
    KLEigenpair first;
    KLEigenpair second;
};

/// The M leading 2D modes; ties broken by (first.index, second.index).
std::vector<KLMode> kl_modes_2d(double sigma, double ell1, double ell2, std::size_t M, const Rect& domain);

/// Truncated KL expansion with mean 1 for the separable exponential covariance.
AffineField kl_field(double sigma, double ell1, double ell2, std::size_t M, const Rect& domain);

/// Frequencies (beta1, beta2) of the cosine family for 1-based mode m.
std::pair<int, int> cosine_frequencies(int m);

/// a0 = 1, a_m = alpha_bar m^{-sigma_tilde} cos(2 pi beta1 x1) cos(2 pi beta2 x2) on (0,1)^2.
AffineField cosine_field(double alpha_bar, double sigma_tilde, std::size_t M);

enum class Nonlinearity { Exp, Square };

std::string to_string(Nonlinearity kind);

/// The coefficient T(x, y) = exp(a) or a^2 and its gPC coefficients.
class CoefficientModel {
public:
    CoefficientModel(Nonlinearity kind, std::shared_ptr<const AffineField> field,
                     std::shared_ptr<const polychaos::UnivariateBasis> basis, int quad_extra = 10);

    Nonlinearity kind() const noexcept { return kind_; }
    const AffineField& field() const noexcept { return *field_; }
    const polychaos::UnivariateBasis& basis() const noexcept { return *basis_; }
    std::shared_ptr<const polychaos::UnivariateBasis> basis_ptr() const noexcept { return basis_; }
    std::size_t num_params() const noexcept { return field_->num_params(); }
    int quad_extra() const noexcept { return quad_extra_; }

    /// True when the gPC expansion has finitely many nonzero terms (Square).
    bool finite_expansion() const noexcept { return kind_ == Nonlinearity::Square; }
    /// Support of the expansion for finite models (P_{M,2}); empty otherwise.
    polychaos::IndexSet support() const;
    /// Restricts a set of gammas to the expansion support (identity for Exp).
    polychaos::IndexSet restrict_to_support(const polychaos::IndexSet& gammas) const;

    double T(Point x, std::span<const double> y) const;

    double t_gamma(const polychaos::MultiIndex& gamma, Point x) const;
    Vec2 grad_t_gamma(const polychaos::MultiIndex& gamma, Point x) const;

    /// Batch evaluation of t_gamma (and optionally gradients) at one point.
    /// `grads` may be empty.
    void evaluate(Point x, std::span<const polychaos::MultiIndex> gammas, std::span<double> values,
                  std::span<Vec2> grads) const;

    /// Moments int y^k P_n p dy for k, n in {0,1,2}.
    double moment(int k, int n) const { return moments_[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)]; }

private:
    struct ModeData {
        double a0;
        Vec2 g0;
        std::vector<double> a;
        std::vector<Vec2> g;
    };
    ModeData sample_modes(Point x) const;
    void evaluate_exp(const ModeData& md, int rule_size, std::span<const polychaos::MultiIndex> gammas,
                      std::span<double> values, std::span<Vec2> grads) const;
    void evaluate_square(const ModeData& md, std::span<const polychaos::MultiIndex> gammas,
                         std::span<double> values, std::span<Vec2> grads) const;

    Nonlinearity kind_;
    std::shared_ptr<const AffineField> field_;
    std::shared_ptr<const polychaos::UnivariateBasis> basis_;
    int quad_extra_;
    double moments_[3][3] = {};
    // P_n at the nodes of every basis rule: rule_pvals_[r-1][q * (n_max+1) + n]
    std::vector<std::vector<double>> rule_pvals_;
};

struct CoefficientRange {
    double min = 0.0;
    double max = 0.0;
};

/// Sampled extremes of T over a 17x17 spatial grid times the 3^M tensor of
/// parameter vertices and midpoints. Diagnostic only.
CoefficientRange sample_coefficient_range(const CoefficientModel& model, int grid_points = 17);

} // namespace sgfem::randfield
