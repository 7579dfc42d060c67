#pragma once

// Hierarchical error estimation: element residual problems on the bubble
// space, detail-index problems on X (x) P_Q, under the auxiliary forms B0
// (mean coefficient) and B1 (t_0 times a fitted parametric sum).

#include "sgfem/galerkin.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sgfem::estimator {

using galerkin::GalerkinSolution;
using galerkin::KroneckerSystem;
using polychaos::IndexSet;
using polychaos::MultiIndex;

enum class FormKind { B0, B1 };
std::string to_string(FormKind kind);

/// B0(u, v) = int t_0 grad u . grad v.
/// B1(u, v) = sum_gamma C_gamma int t_0 grad u . grad v <P_gamma u, v>, with
/// C_gamma = int t_gamma t_0 / int t_0^2 (so C_0 = 1).
class AuxiliaryForm {
public:
    static AuxiliaryForm b0();
    /// C_gamma for every gamma in `gammas`, integrated with 3x3 Gauss on a
    /// uniform grid of `quad_level` over the model domain.
    static AuxiliaryForm b1(const randfield::CoefficientModel& model, const IndexSet& gammas, int quad_level = 6);

    FormKind kind() const noexcept { return kind_; }
    /// C_gamma; gammas outside the computed list are an error.
    double coefficient(const MultiIndex& gamma) const;
    const std::map<std::vector<int>, double>& coefficients() const noexcept { return c_; }

private:
    FormKind kind_ = FormKind::B0;
    std::map<std::vector<int>, double> c_;
};

/// Square model: N(P, P_{M,2}) \ P. Exp model: N(P, N(P, P)) \ P.
IndexSet detail_index_set(const IndexSet& P, const randfield::CoefficientModel& model);

/// Gammas needed by B1 for a solution on P with detail set Q.
IndexSet b1_gammas(const randfield::CoefficientModel& model, const IndexSet& P, const IndexSet& Q);

/// Local detail space on each element: the four edge bubbles and the centroid
/// bubble, either piecewise bilinear on the four sub-squares (the hats of the
/// refined grid) or biquadratic.
enum class BubbleKind { PiecewiseBilinear, Biquadratic };

struct SpatialEstimate {
    std::vector<double> element_sq;   // ||e_YP|_K||^2 per element
    double total_sq = 0.0;
};

/// Element residual problems on Y(h)|_K (x) P_P. All five bubbles of K are
/// kept, including those on boundary edges (which carry no jump term). Under
/// B0 the local system decouples across alpha.
SpatialEstimate spatial_estimator(const KroneckerSystem& system, const GalerkinSolution& u, const AuxiliaryForm& form,
                                  const fem::ScalarFn& f, BubbleKind bubbles = BubbleKind::PiecewiseBilinear);

struct ParametricEstimate {
    IndexSet Q;
    std::vector<double> index_sq;    // per detail index (B0 only)
    double total_sq = 0.0;
};

/// Residual functional of u tested against X (x) P_mu for every mu in Q
/// (block layout, #Q blocks): -sum_gamma G_gamma|_{Q,P} (x) K_gamma u.
fem::Vector parametric_residual(const KroneckerSystem& system, const GalerkinSolution& u, const IndexSet& Q);

ParametricEstimate parametric_estimator_b0(const KroneckerSystem& system, const GalerkinSolution& u, const IndexSet& Q);
ParametricEstimate parametric_estimator_b1(const KroneckerSystem& system, const GalerkinSolution& u, const IndexSet& Q,
                                           const AuxiliaryForm& form);

/// sqrt(spatial + parametric).
double total_estimate(const SpatialEstimate& spatial, const ParametricEstimate& parametric);

/// eta / sqrt(||u_ref||_B^2 - ||u||_B^2); throws NumericalError when the
/// denominator is not positive.
double effectivity(double eta, double energy_ref_sq, double energy_sq);

struct EstimateReport {
    FormKind form = FormKind::B0;
    std::vector<double> element_sq;
    IndexSet Q;
    std::vector<double> index_sq;
    double spatial_sq = 0.0;
    double parametric_sq = 0.0;
    double eta = 0.0;
    std::optional<double> theta;

    /// JSON object text (full precision).
    std::string to_json() const;
    void write_element_csv(std::ostream& os) const;
    void write_index_csv(std::ostream& os) const;
};

/// Spatial plus parametric estimate under one form.
EstimateReport estimate(const KroneckerSystem& system, const GalerkinSolution& u, const IndexSet& Q,
                        const AuxiliaryForm& form, const fem::ScalarFn& f,
                        BubbleKind bubbles = BubbleKind::PiecewiseBilinear);

} // namespace sgfem::estimator
