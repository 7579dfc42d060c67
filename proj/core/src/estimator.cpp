#include "sgfem/estimator.hpp"

#include "sgfem/errors.hpp"
#include "sgfem/parallel.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace sgfem::estimator {

std::string to_string(FormKind kind) { return kind == FormKind::B0 ? "B0" : "B1"; }

// ---------------------------------------------------------------------------
// Auxiliary forms

AuxiliaryForm AuxiliaryForm::b0() { return AuxiliaryForm{}; }

AuxiliaryForm AuxiliaryForm::b1(const randfield::CoefficientModel& model, const IndexSet& gammas, int quad_level) {
    AuxiliaryForm form;
    form.kind_ = FormKind::B1;
    const std::size_t M = model.num_params();
    std::vector<MultiIndex> list{MultiIndex::zero(M)};
    for (const auto& g : gammas)
        if (!g.is_zero()) list.push_back(g);
    const std::size_t G = list.size();

    const fem::UniformGrid grid(model.field().domain(), quad_level);
    const auto rule = fem::tensor_gauss(3);
    const std::size_t ne = grid.num_elements();
    // per-element partial sums keep the reduction order fixed
    std::vector<double> partial(ne * (G + 1), 0.0);
    parallel_for(ne, [&](std::size_t b, std::size_t e_end) {
        std::vector<double> t(G);
        for (std::size_t e = b; e < e_end; ++e) {
            double* acc = partial.data() + e * (G + 1);
            for (std::size_t q = 0; q < rule.points.size(); ++q) {
                model.evaluate(grid.to_physical(e, rule.points[q]), list, t, {});
                const double w = rule.weights[q];
                for (std::size_t k = 0; k < G; ++k) acc[k] += w * t[k] * t[0];
                acc[G] += w * t[0] * t[0];
            }
        }
    });
    std::vector<double> num(G, 0.0);
    double den = 0.0;
    for (std::size_t e = 0; e < ne; ++e) {
        for (std::size_t k = 0; k < G; ++k) num[k] += partial[e * (G + 1) + k];
        den += partial[e * (G + 1) + G];
    }
    if (!(den > 0.0)) throw NumericalError("B1: int t_0^2 is not positive");
    form.c_[list[0].entries()] = 1.0;
    for (std::size_t k = 1; k < G; ++k) form.c_[list[k].entries()] = num[k] / den;
    return form;
}

double AuxiliaryForm::coefficient(const MultiIndex& gamma) const {
    if (kind_ == FormKind::B0) return gamma.is_zero() ? 1.0 : 0.0;
    const auto it = c_.find(gamma.entries());
    if (it == c_.end()) throw std::out_of_range("AuxiliaryForm: C_gamma not computed for " + gamma.to_string());
    return it->second;
}

// ---------------------------------------------------------------------------
// Index sets

IndexSet detail_index_set(const IndexSet& P, const randfield::CoefficientModel& model) {
    if (!P.contains_zero()) throw std::invalid_argument("detail_index_set: P must contain the zero index");
    if (model.finite_expansion()) return polychaos::neighborhood(P, model.support()).set_difference(P);
    return polychaos::neighborhood(P, polychaos::neighborhood(P, P)).set_difference(P);
}

IndexSet b1_gammas(const randfield::CoefficientModel& model, const IndexSet& P, const IndexSet& Q) {
    IndexSet g = galerkin::coupling_set(model, P, P);
    if (!Q.empty()) g = g.set_union(galerkin::coupling_set(model, Q, Q));
    return g;
}

namespace {

// Inverse of the symmetric matrix sum_gamma C_gamma G_gamma, checked for
// positive definiteness.
Eigen::MatrixXd fitted_spectral_inverse(const std::vector<polychaos::SpectralMatrix>& mats, const IndexSet& gammas,
                                        const AuxiliaryForm& form, std::size_t n, const char* what) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < mats.size(); ++t) {
        const double c = form.coefficient(gammas[t]);
        if (c == 0.0) continue;
        for (const auto& e : mats[t].entries) G(e.row, e.col) += c * e.value;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    if (eig.info() != Eigen::Success) throw NumericalError(std::string(what) + ": eigen-decomposition failed");
    const double lmin = eig.eigenvalues().minCoeff();
    if (!(lmin > 0.0))
        throw NumericalError(std::string(what) + ": B1 form is indefinite (smallest eigenvalue " +
                             std::to_string(lmin) + ")");
    return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

struct FlatEntry {
    std::uint32_t term;
    std::uint32_t row;
    std::uint32_t col;
    double value;
};

} // namespace

// ---------------------------------------------------------------------------
// Spatial estimator

namespace {

// Biquadratic bubbles on [0,1]^2 in the local order bottom, right, top, left, centroid.
void biquadratic_bubbles(Point r, std::array<double, 5>& v, std::array<Vec2, 5>& g) {
    const double bx = 4.0 * r.x * (1.0 - r.x), by = 4.0 * r.y * (1.0 - r.y);
    const double dbx = 4.0 - 8.0 * r.x, dby = 4.0 - 8.0 * r.y;
    v = {bx * (1.0 - r.y), by * r.x, bx * r.y, by * (1.0 - r.x), bx * by};
    g = {Vec2{dbx * (1.0 - r.y), -bx}, Vec2{by, dby * r.x}, Vec2{dbx * r.y, bx}, Vec2{-by, dby * (1.0 - r.x)},
         Vec2{dbx * by, bx * dby}};
}

} // namespace

SpatialEstimate spatial_estimator(const KroneckerSystem& system, const GalerkinSolution& u, const AuxiliaryForm& form,
                                  const fem::ScalarFn& f, BubbleKind bubbles) {
    const auto& space = *system.space;
    if (space.kind() != fem::SpaceKind::Q1) throw std::invalid_argument("spatial_estimator: Q1 solution required");
    if (u.coeffs.size() != system.size()) throw std::invalid_argument("spatial_estimator: solution layout mismatch");
    const auto& model = *system.model;
    const auto& grid = space.grid();
    const double h = grid.h();
    const std::size_t np = system.P.size();
    const auto& gammas = system.gammas.members();
    const std::size_t ng = gammas.size();
    const std::size_t alpha0 = *system.P.position(MultiIndex::zero(system.P.num_params()));
    if (!gammas[0].is_zero()) throw NumericalError("spatial_estimator: t_0 term missing");

    std::vector<FlatEntry> entries;
    for (std::size_t t = 0; t < system.op.num_terms(); ++t)
        for (const auto& e : system.op.spectral(t).entries)
            entries.push_back({static_cast<std::uint32_t>(t), e.row, e.col, e.value});

    std::vector<fem::Vector> U(np);
    for (std::size_t b = 0; b < np; ++b) U[b] = space.expand(u.block(b));

    Eigen::MatrixXd Ginv;
    if (form.kind() == FormKind::B1) {
        std::vector<polychaos::SpectralMatrix> mats;
        for (std::size_t t = 0; t < system.op.num_terms(); ++t) mats.push_back(system.op.spectral(t));
        Ginv = fitted_spectral_inverse(mats, system.gammas, form, np, "spatial estimator");
    }

    // Edge terms: int_E sum_{gamma,beta} G_gamma[alpha, beta] t_gamma [[du_beta/dn]] psi_E ds.
    const auto& edges = grid.edges();
    const auto erule = fem::edge_quadrature();
    const auto edge_trace = [bubbles](double s) {
        return bubbles == BubbleKind::Biquadratic ? 4.0 * s * (1.0 - s) : fem::edge_bubble(s);
    };
    std::vector<double> edge_term(edges.size() * np, 0.0);
    parallel_for(edges.size(), [&](std::size_t b, std::size_t e_end) {
        std::vector<double> t(ng), jump(np);
        for (std::size_t k = b; k < e_end; ++k) {
            const fem::Edge& E = edges[k];
            if (E.boundary()) continue;
            double* out = edge_term.data() + k * np;
            for (std::size_t q = 0; q < erule.points.size(); ++q) {
                const double s = erule.points[q].x;
                const Point x{E.a.x + s * (E.b.x - E.a.x), E.a.y + s * (E.b.y - E.a.y)};
                model.evaluate(x, gammas, t, {});
                for (std::size_t bb = 0; bb < np; ++bb) jump[bb] = fem::q1_normal_jump(space, U[bb], E, s);
                const double w = erule.weights[q] * h * edge_trace(s);
                for (const auto& en : entries) out[en.row] += w * en.value * t[en.term] * jump[en.col];
            }
        }
    });

    // Bubble shape data on the composite rule.
    fem::FESpace bubble_ref(fem::UniformGrid(Rect::unit(), 0), fem::SpaceKind::Bubble);
    const auto vrule = fem::composite_gauss(3);
    const std::size_t nq = vrule.points.size();
    std::vector<std::array<double, 5>> psi(nq);
    std::vector<std::array<Vec2, 5>> dpsi(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        if (bubbles == BubbleKind::Biquadratic) {
            biquadratic_bubbles(vrule.points[q], psi[q], dpsi[q]);
            continue;
        }
        bubble_ref.shape(vrule.points[q], psi[q]);
        bubble_ref.shape_gradients(vrule.points[q], dpsi[q]);
    }

    SpatialEstimate out;
    out.element_sq.assign(grid.num_elements(), 0.0);
    parallel_for(grid.num_elements(), [&](std::size_t b, std::size_t e_end) {
        std::vector<double> t(ng);
        std::vector<Vec2> dt(ng), du(np);
        std::vector<std::array<double, 4>> corners(np);
        std::vector<double> ra(np);
        for (std::size_t e = b; e < e_end; ++e) {
            for (std::size_t bb = 0; bb < np; ++bb) corners[bb] = fem::q1_corner_values(space, U[bb], e);
            Eigen::Matrix<double, 5, 5> A = Eigen::Matrix<double, 5, 5>::Zero();
            Eigen::MatrixXd R = Eigen::MatrixXd::Zero(5, static_cast<Eigen::Index>(np));
            for (std::size_t q = 0; q < nq; ++q) {
                const Point ref = vrule.points[q];
                const Point x = grid.to_physical(e, ref);
                model.evaluate(x, gammas, t, dt);
                const double w = vrule.weights[q];
                for (int l = 0; l < 5; ++l)
                    for (int m = 0; m < 5; ++m) A(l, m) += w * t[0] * dot(dpsi[q][l], dpsi[q][m]);
                for (std::size_t bb = 0; bb < np; ++bb) du[bb] = fem::q1_gradient(corners[bb], ref, h);
                std::fill(ra.begin(), ra.end(), 0.0);
                ra[alpha0] = f(x);
                for (const auto& en : entries) ra[en.row] += en.value * dot(dt[en.term], du[en.col]);
                const double wa = w * h * h;
                for (std::size_t a = 0; a < np; ++a)
                    for (int l = 0; l < 5; ++l) R(l, static_cast<Eigen::Index>(a)) += wa * ra[a] * psi[q][l];
            }
            // Boundary edges keep their bubble; their edge_term is zero.
            const auto eidx = grid.element_edges(e);
            for (int l = 0; l < 4; ++l)
                for (std::size_t a = 0; a < np; ++a)
                    R(l, static_cast<Eigen::Index>(a)) -= 0.5 * edge_term[eidx[static_cast<std::size_t>(l)] * np + a];
            const Eigen::MatrixXd& Ra = R;
            Eigen::LLT<Eigen::Matrix<double, 5, 5>> llt(A);
            if (llt.info() != Eigen::Success)
                throw NumericalError("spatial estimator: singular local matrix on element " + std::to_string(e) +
                                     " (t_0 degenerate)");
            const Eigen::MatrixXd X = llt.solve(Ra);
            double v;
            if (form.kind() == FormKind::B0) v = (Ra.array() * X.array()).sum();
            else v = (X.array() * (Ra * Ginv).array()).sum();
            out.element_sq[e] = v;
        }
    });
    for (double v : out.element_sq) out.total_sq += v;
    return out;
}

// ---------------------------------------------------------------------------
// Parametric estimators

fem::Vector parametric_residual(const KroneckerSystem& system, const GalerkinSolution& u, const IndexSet& Q) {
    const std::size_t n = system.n_x();
    fem::Vector r(n * Q.size(), 0.0);
    if (Q.empty()) return r;
    for (const auto& mu : Q)
        if (system.P.contains(mu)) throw std::invalid_argument("parametric_residual: Q intersects P");
    auto terms = galerkin::spectral_terms(*system.model, Q, system.P);
    if (terms.gammas.empty()) return r;
    auto family = std::make_shared<fem::MatrixFamily>(
        galerkin::assemble_coefficient_family(*system.model, *system.space, terms.gammas));
    const galerkin::KroneckerOperator op(family, std::move(terms.matrices));
    op.apply(u.coeffs, r);
    for (double& v : r) v = -v;
    return r;
}

ParametricEstimate parametric_estimator_b0(const KroneckerSystem& system, const GalerkinSolution& u, const IndexSet& Q) {
    ParametricEstimate out;
    out.Q = Q;
    out.index_sq.assign(Q.size(), 0.0);
    if (Q.empty()) return out;
    const std::size_t n = system.n_x();
    const auto R = parametric_residual(system, u, Q);
    fem::Vector E(R.size());
    system.mean_solver->solve(R, E, Q.size());
    for (std::size_t m = 0; m < Q.size(); ++m) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += R[m * n + i] * E[m * n + i];
        out.index_sq[m] = s;
        out.total_sq += s;
    }
    return out;
}

ParametricEstimate parametric_estimator_b1(const KroneckerSystem& system, const GalerkinSolution& u, const IndexSet& Q,
                                           const AuxiliaryForm& form) {
    ParametricEstimate out;
    out.Q = Q;
    if (Q.empty()) return out;
    const std::size_t n = system.n_x();
    const std::size_t nq = Q.size();
    const auto R = parametric_residual(system, u, Q);
    fem::Vector E(R.size());
    system.mean_solver->solve(R, E, nq);
    const auto qq = galerkin::spectral_terms(*system.model, Q, Q);
    const Eigen::MatrixXd Ginv = fitted_spectral_inverse(qq.matrices, qq.gammas, form, nq, "parametric estimator");
    const auto nn = static_cast<Eigen::Index>(n);
    const auto nc = static_cast<Eigen::Index>(nq);
    Eigen::Map<const Eigen::MatrixXd> Rm(R.data(), nn, nc), Em(E.data(), nn, nc);
    const Eigen::MatrixXd W = Rm.transpose() * Em;
    out.total_sq = (W.array() * Ginv.transpose().array()).sum();
    return out;
}

double total_estimate(const SpatialEstimate& spatial, const ParametricEstimate& parametric) {
    return std::sqrt(spatial.total_sq + parametric.total_sq);
}

double effectivity(double eta, double energy_ref_sq, double energy_sq) {
    const double d = energy_ref_sq - energy_sq;
    if (!(d > 0.0))
        throw NumericalError("effectivity: reference energy does not exceed the solution energy (difference " +
                             std::to_string(d) + "); the reference is not richer");
    return eta / std::sqrt(d);
}

EstimateReport estimate(const KroneckerSystem& system, const GalerkinSolution& u, const IndexSet& Q,
                        const AuxiliaryForm& form, const fem::ScalarFn& f, BubbleKind bubbles) {
    EstimateReport rep;
    rep.form = form.kind();
    auto sp = spatial_estimator(system, u, form, f, bubbles);
    auto pa = form.kind() == FormKind::B0 ? parametric_estimator_b0(system, u, Q)
                                          : parametric_estimator_b1(system, u, Q, form);
    rep.element_sq = std::move(sp.element_sq);
    rep.spatial_sq = sp.total_sq;
    rep.Q = Q;
    rep.index_sq = std::move(pa.index_sq);
    rep.parametric_sq = pa.total_sq;
    rep.eta = std::sqrt(rep.spatial_sq + rep.parametric_sq);
    return rep;
}

// ---------------------------------------------------------------------------
// Serialization

std::string EstimateReport::to_json() const {
    nlohmann::json j;
    j["form"] = to_string(form);
    j["eta"] = eta;
    j["spatial_sq"] = spatial_sq;
    j["parametric_sq"] = parametric_sq;
    j["element_sq"] = element_sq;
    nlohmann::json idx = nlohmann::json::array();
    for (std::size_t i = 0; i < Q.size(); ++i) {
        nlohmann::json e;
        e["index"] = Q[i].entries();
        if (i < index_sq.size()) e["sq"] = index_sq[i];
        idx.push_back(e);
    }
    j["detail_indices"] = idx;
    if (theta) j["theta"] = *theta;
    return j.dump();
}

void EstimateReport::write_element_csv(std::ostream& os) const {
    os << "element,sq\n" << std::setprecision(17);
    for (std::size_t e = 0; e < element_sq.size(); ++e) os << e << ',' << element_sq[e] << '\n';
}

void EstimateReport::write_index_csv(std::ostream& os) const {
    os << "index,sq\n" << std::setprecision(17);
    for (std::size_t i = 0; i < Q.size(); ++i) {
        os << '"' << Q[i].to_string() << '"' << ',';
        if (i < index_sq.size()) os << index_sq[i];
        os << '\n';
    }
}

} // namespace sgfem::estimator
