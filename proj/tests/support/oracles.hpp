#pragma once

// Brute-force reference computations for the tests. Nothing here calls the
// quadrature, basis, t_gamma, assembly or estimator code of the library; the
// only shared inputs are the field definitions (AffineField) and index sets.

#include "sgfem/polychaos.hpp"
#include "sgfem/randfield.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace sgfem::oracle {

struct Rule {
    std::vector<double> x;
    std::vector<double> w;
    std::size_t size() const { return x.size(); }
};

/// Gauss-Legendre by Newton iteration on the Legendre recurrence (long double).
Rule gauss_legendre(std::size_t n, double a, double b);

/// Composite Gauss-Legendre: `panels` panels of `n` points.
Rule composite(std::size_t panels, std::size_t n, double a, double b);

/// n-point Gauss-Legendre nodes weighted by the normalized truncated Gaussian.
Rule measure_rule(double sigma0, std::size_t n = 50);

/// Orthonormal polynomials for a discrete measure, tabulated at its nodes by
/// twice-iterated modified Gram-Schmidt on the monomials.
class Polys {
public:
    Polys(Rule rule, int n_max);
    const Rule& rule() const { return rule_; }
    int n_max() const { return n_max_; }
    double at(int n, std::size_t q) const { return v_[static_cast<std::size_t>(n) * rule_.size() + q]; }
    /// <P_i P_j P_k> under the discrete measure.
    double triple(int i, int j, int k) const;

private:
    Rule rule_;
    int n_max_;
    std::vector<double> v_;
};

/// Tensor parameter quadrature over [-1,1]^M with the product measure.
class ParamQuad {
public:
    ParamQuad(double sigma0, std::size_t M, std::size_t points = 50, int n_max = 12);
    std::size_t M() const { return M_; }
    std::size_t size() const;
    /// Node q: parameter vector, weight, and P_alpha at the node.
    void node(std::size_t q, std::vector<double>& y, double& w, std::vector<std::size_t>& idx) const;
    double poly(const polychaos::MultiIndex& a, const std::vector<std::size_t>& idx) const;
    const Polys& polys() const { return polys_; }

private:
    std::size_t M_;
    Polys polys_;
};

using Kind = randfield::Nonlinearity;

double T(const randfield::AffineField& f, Kind k, Point x, const std::vector<double>& y);
Vec2 grad_T(const randfield::AffineField& f, Kind k, Point x, const std::vector<double>& y);

/// int T(x, y) P_gamma(y) p(y) dy by tensor quadrature.
double t_gamma(const randfield::AffineField& f, Kind k, const ParamQuad& pq, const polychaos::MultiIndex& g, Point x);

/// Leading eigenvalues of int exp(-|t - s| / ell) phi(s) ds on [-L, L] by a
/// trapezoidal Nystrom discretization with n intervals, Richardson-extrapolated
/// against n / 2.
std::vector<double> nystrom_eigenvalues(double ell, double L, std::size_t n, std::size_t count);

/// Interior node -> free index on a uniform grid, lexicographic.
struct Q1Grid {
    Rect domain;
    int level;
    std::size_t n;     // elements per side
    double h;
    Q1Grid(Rect d, int lvl);
    std::size_t num_free() const { return (n - 1) * (n - 1); }
    /// -1 for boundary nodes.
    long free(std::size_t i, std::size_t j) const;
};

/// Dense block operator [i + r nX, j + c nX] = int int T grad phi_i . grad phi_j
/// P_rows[r] P_cols[c] p dy dx with 3x3 Gauss per element in x.
Eigen::MatrixXd bilinear_form(const randfield::AffineField& f, Kind k, const ParamQuad& pq, const Q1Grid& g,
                              const polychaos::IndexSet& rows, const polychaos::IndexSet& cols);

/// int f phi_i over free dofs, 3x3 Gauss.
Eigen::VectorXd load(const Q1Grid& g, const std::function<double(Point)>& f);

/// Element residual estimator under B0 with five piecewise bilinear bubbles
/// per element, every expectation in y taken by tensor quadrature. `u` is in
/// block layout over P (free dofs).
std::vector<double> spatial_b0(const randfield::AffineField& f, Kind k, const ParamQuad& pq, const Q1Grid& g,
                               const polychaos::IndexSet& P, const std::vector<double>& u,
                               const std::function<double(Point)>& force);

/// int_D t_gamma t_0 / int_D t_0^2 with 3x3 Gauss on the grid of `level`.
double b1_coefficient(const randfield::AffineField& f, Kind k, const ParamQuad& pq, const polychaos::MultiIndex& g,
                      int level);

/// Smallest cardinality of a subset whose sum reaches theta * total (2^n scan).
std::size_t doerfler_min_card(const std::vector<double>& c, double theta);

/// Members of N(P, Q) by direct membership test over all gamma with entries
/// up to `cap`.
polychaos::IndexSet neighborhood_bruteforce(const polychaos::IndexSet& P, const polychaos::IndexSet& Q, int cap);

} // namespace sgfem::oracle
